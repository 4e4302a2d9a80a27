//! Volume profiles, covering numbers, exponent fits, distribution distances
//! and the rescaled-walk convergence experiment.

mod ks;
mod volume;

pub use ks::{ks_critical_value, ks_distance};
pub use volume::{
    ball_mass, ball_volume_profile, covering_number, exponent_fit, graph_ball_volume_profile, ExponentFit,
    VolumeProfile,
};

mod experiment;

pub use experiment::{
    convergence_experiment, discretize, samples_csv, ExperimentConfig, ExperimentOutcome, ExperimentReport,
    FunctionalSummary, HittingCheck, KsComparison, PredictedExponents, SampleSet, SampleSummary, ScaleReport,
    TreeSpec, VolumeFits, REPORT_VERSION,
};
