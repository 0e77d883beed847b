//! Monthly-series forecasting workbench: shrinkage regressions, tree
//! ensembles, ε-SVR and an ARIMA benchmark, tuned by k-fold grid search,
//! compared with RMSE reductions and Diebold-Mariano tests, and explained
//! with Shapley values.
//!
//! The `pipeline` module ties these together behind a TOML [`pipeline::RunConfig`];
//! the `workbench` binary is a thin wrapper over it.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod arima;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod interpretation;
pub mod linear;
pub mod matrix;
pub mod model;
pub mod optimize;
pub mod pipeline;
pub mod predictor;
pub mod seeds;
pub mod shapley;
pub mod svr;
pub mod tree;
pub mod tuning;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use predictor::Predictor;
