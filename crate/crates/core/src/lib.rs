//! Random ordered trees, random walks on them, and Brownian motion on finite
//! metric trees, with exact oracles for checking the simulations.

pub mod bm;
pub mod diagnostics;
pub mod embedding;
pub mod error;
pub mod gw;
pub mod rng;
pub mod walks;
pub mod excursion;
pub mod trees;

pub use error::{Error, Result};
pub use trees::{MetricTree, OrderedTree, TreeMeasure, TreePoint};
