//! Experiment harness for predictive vision models: configuration, data
//! generation, training with and without motion integration, evaluation,
//! checkpoints, the closed-loop saccade demo and curve plots.

pub mod checkpoint;
pub mod config;
pub mod demo;
pub mod error;
pub mod metrics;
pub mod plot;
pub mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, TrainProgress};
pub use config::RunConfig;
pub use demo::{demo, run_demo, DemoSummary};
pub use error::{HarnessError, Result};
pub use metrics::{smooth_curve, MetricsRow};
pub use train::{eval, evaluate, generate_data, train, EpochSummary, EvalResult, RunSummary, Session, Trainer};
