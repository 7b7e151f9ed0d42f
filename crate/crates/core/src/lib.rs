//! Term-structure models for overnight-rate futures: Gaussian and
//! shadow-rate arbitrage-free Nelson-Siegel variants, futures pricing,
//! Kalman-filter estimation, term rates, convexity and Monte Carlo checks.

pub mod analysis;
pub mod error;
pub mod estimation;
pub mod futures;
pub mod io;
pub mod math;
pub mod mc;
pub mod models;
pub mod term_structure;

pub use error::{Error, Result};
pub use models::{GaussianMoments, Model, ModelParams, ModelSpec, ModelVariant, StateVector};
