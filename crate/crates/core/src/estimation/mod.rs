//! Filtering and maximum-likelihood estimation.

pub mod filter;
pub mod mle;
pub mod optimizer;
pub mod panel;

pub use filter::{
    discretize_p, ekf_step, filter_states, log_likelihood, unconditional_cov, Discretization, FilterState,
    HStructure, MeasurementErrors,
};
pub use mle::{estimate, rolling_estimate, Convergence, EstimationOptions, EstimationResult, RollingEstimate};
pub use optimizer::{nelder_mead, NelderMeadOptions, NelderMeadResult};
pub use panel::{Observation, ObservationPanel, PanelRow, DEFAULT_DT};
