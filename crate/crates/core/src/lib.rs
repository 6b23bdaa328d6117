//! Equivariantized split conformal prediction for planar trajectories.
//!
//! A base trajectory predictor is averaged over a rotation group (a cyclic
//! group `C_n` or a Monte-Carlo sample of SO(2)); calibration quantiles and
//! score distributions of the plain, equivariantized and symmetrized
//! variants are compared on shared splits.

pub mod conformal;
pub mod config;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod group;
pub mod io;
pub mod predictor;
pub mod score;
pub mod seeding;
pub mod stats;
pub mod synthetic;

pub use conformal::{
    calibrate, calibrate_values, coverage_from_scores, empirical_coverage, order_statistic_index, prediction_set,
    CalibrationResult, ConformalSet,
};
pub use config::{load_config, parse_config};
pub use error::{Error, Result};
pub use experiment::{CheckRecord, PairedScores, RunConfig, Workspace};
pub use geometry::{FutureTrajectory, PastTrajectory, Point, Trajectory, TrajectorySample};
pub use group::{
    apply_input_action, apply_output_action, enumerate_or_sample, ActionConvention, Group, GroupElement, GroupSpec,
};
pub use io::{load_ethucy, load_predictions, write_report, RunManifest};
pub use predictor::{
    equivariantize, ConstantVelocity, EquivariantizedPredictor, LookupPredictor, PolynomialRegressor,
    PoseBiasedVelocity, Predictor, PredictorHandle, PredictorSpec,
};
pub use score::{score, score_split, symmetrized_score, Provenance, ScoreFn, ScoreMode, ScoreSet};
pub use synthetic::{generate, Invariance, SyntheticConfig};
