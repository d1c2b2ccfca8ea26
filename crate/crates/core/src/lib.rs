//! Aviation occurrence classification: the 61-feature occurrence schema,
//! labelled datasets, SMOTE resampling, five classifier families, evaluation
//! metrics and the repeated-split benchmark protocol.

pub mod dataset;
pub mod experiment;
pub mod metrics;
pub mod models;
pub mod resample;
pub mod rng;
pub mod schema;
