//! Customer-lifetime-value prediction toolkit.
//!
//! End-to-end pipeline for retail transaction logs: cleaning and per-customer
//! aggregation ([`ingest`]), recency/frequency feature engineering
//! ([`features`]), the analytic CLV formula ([`clv`]), from-scratch regression
//! trees ([`tree`]), bagged and boosted ensembles ([`ensemble`]), elastic-net
//! linear regression ([`linear`]), cross-validated stacking ([`stack`]), and
//! RMSE/MAE plus feature-importance reporting ([`report`]).

pub mod clv;
pub mod ensemble;
pub mod error;
pub mod features;
pub mod ingest;
pub mod linear;
pub mod matrix;
pub mod money;
pub mod persist;
pub mod report;
pub mod stack;
pub mod tree;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use money::Money;
