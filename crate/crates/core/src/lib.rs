//! Preprocessing, health-state labeling and baseline diagnostics for
//! machinery condition-monitoring data.

pub mod baselines;
pub mod frame;
pub mod ingest;
pub mod labeler;
pub mod models;
pub mod outlier;
pub mod pipeline;
pub mod prepare;
pub mod reduce;
pub mod seed;
pub mod select;
pub mod stats;
pub mod synth;

pub use frame::{is_missing, Matrix, SensorFrame, MISSING};
