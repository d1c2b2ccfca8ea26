//! Command-line tools and HTTP prediction service for occurrence
//! classification.

pub mod cli;
pub mod service;
