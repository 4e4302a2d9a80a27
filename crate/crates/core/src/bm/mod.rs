//! Brownian motion on finite metric trees: mesh-walk simulation, exact
//! oracles, local times and time change.

mod exit_law;
mod mesh;
mod oracle;

pub use exit_law::{
    branch_exit_law, directions, exit_law_electrical, exit_radius_bound, ExitLaw, ResistorNetwork,
};
pub use mesh::{
    bm_position, run_bm, run_until_hit, segment_count, BmPath, Hit, LocalTimeField, MeshGraph,
};
pub use oracle::{hitting_probability_exact, mean_hitting_time_exact};
