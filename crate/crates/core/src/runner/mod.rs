//! Experiment orchestration: configuration, checkpoints, the
//! train / freeze / test protocol, weight-map export and multi-seed suites.

pub mod checkpoint;
pub mod config;
pub mod protocol;
pub mod session;
pub mod suite;
pub mod weights;

pub use checkpoint::{Checkpoint, CircuitRecord};
pub use config::{Assignment, Design, Pairing, RunConfig, TopDown, DATA_DIR_ENV};
pub use protocol::{test, train, write_reports, Dataset, CHECKPOINT_FILE};
pub use session::Session;
pub use suite::{aggregate, mean_std, run_experiment_suite, Aggregate, Suite, SuiteRun, Variant};
pub use weights::{circuit_image, export_weight_maps, LayerSelector, WeightImage};
