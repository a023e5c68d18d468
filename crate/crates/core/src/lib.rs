//! Bayesian quantile regression for non-negative responses with a point mass
//! at zero, where each zero is either a true zero or a left-censored draw of
//! the continuous part.

pub mod ald;
pub mod cli_io;
pub mod error;
pub mod mcmc;
pub mod model;
pub mod sim;
pub mod stochastic;
pub mod summary;
