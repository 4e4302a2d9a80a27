//! Ordered graph trees, finite metric trees, subtrees and measures.

pub mod format;
mod measure;
mod metric;
mod ordered;
mod subtree;

pub use measure::{DensityPiece, TreeMeasure, VertexMeasure};
pub use metric::{MetricTree, TreePoint, POINT_TOL};
pub(crate) use metric::TreeBuilder;
pub use ordered::OrderedTree;
pub use subtree::{spanning_subtree, spanning_subtree_graph, GraphSubtree, MetricSubtree};
