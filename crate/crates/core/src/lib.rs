//! Controlled sandbox for auditing the fairness of outlier detectors.
//!
//! The crate simulates two-group populations with known outliers, injects
//! specific data biases, scores the result with four detectors (LOF,
//! isolation forest, a reconstruction autoencoder, and a fairness-regularized
//! autoencoder), and evaluates group-wise detection and fairness metrics.
//! A theory module evaluates closed-form predictions about LOF and isolation
//! forest behavior on idealized cluster geometries and bridges them to the
//! real detectors via synthetic realizations.

pub mod bias;
pub mod data;
pub mod deep;
pub mod error;
pub mod iforest;
pub mod io;
pub mod knn;
pub mod lof;
pub mod metrics;
pub mod plot;
pub mod seed;
pub mod sweep;
pub mod theory;
pub mod tuning;

pub use data::{Dataset, FeatureRole, GroupLabel, OutlierMode, SimConfig};
pub use error::{Error, Result};
pub use metrics::{FlagVector, GroupStats, Grouping, MetricReport, ScoreVector};
