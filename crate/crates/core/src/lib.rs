//! Estimation and distributionally robust minimization of entropic risk.
//!
//! The crate covers closed-form and empirical entropic risk, an estimator
//! family with bootstrap bias correction, bias-aware mixture fitting, type-∞
//! Wasserstein robust optimization, cross-validated radius tuning and a
//! robust insurance pricing model.

pub mod cv;
pub mod distributions;
pub mod dro;
pub mod error;
pub mod estimators;
pub mod fitting;
pub mod insurance;
pub mod risk;
pub mod rng;
pub mod stats;

pub use distributions::Gmm;
pub use error::{Error, Result};
pub use risk::{GammaSpec, RiskAversion, ScenarioSet};
