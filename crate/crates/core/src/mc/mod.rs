//! Monte Carlo engine, MC pricing checks and the estimator recovery study.

pub mod engine;
pub mod pricing;
pub mod study;
pub mod validation;

pub use engine::{simulate_paths, McConfig, McEstimate, Measure, PathEnsemble, Sampler};
pub use pricing::{
    approximation_error_report, mc_convexity, mc_futures_rate, mc_futures_rates, mc_option_price,
    mc_option_price_single, mc_zcb, shift_window, ApproxRow, McConvexity, OptionComparison, OptionQuote,
};
pub use study::{sim_study, simulate_panel, SimStudyConfig, StateErrorRow, StudyReport, SummaryRow};
pub use validation::{
    estimation_windows, near_zero_state, option_ordering, reference_states, shadow_accuracy, OptionRow, ShadowAccuracyRow,
};
