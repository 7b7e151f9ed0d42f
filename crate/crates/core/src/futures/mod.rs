//! Futures contracts and their model prices.

pub mod contract;
pub mod gaussian;
pub mod shadow;

pub use contract::{
    price_to_rate, rate_to_price, AccrualWindow, AccruedFixings, ContractKind, FuturesContract, FuturesQuote,
    Period,
};
pub use gaussian::{
    price_1m, price_1m_exact, price_1m_exact_window, price_1m_window, price_3m, price_3m_exact,
    price_3m_exact_window, price_3m_window,
};
pub use shadow::{
    integrated_positive_mean, integrated_positive_second_moment, shadow_mean_var_cov, shadow_price_1m,
    shadow_price_1m_window, shadow_price_3m, shadow_price_3m_window, shadow_zcb, ShadowMomentInputs,
};

use crate::error::Result;
use crate::math::QuadratureScheme;
use crate::models::Model;

/// Model futures rate for any variant and contract kind; `quad` is only
/// used by the shadow-rate model.
pub fn futures_rate(model: &Model, state: &[f64], w: &AccrualWindow, quad: &QuadratureScheme) -> Result<f64> {
    match (model.variant().is_shadow(), w.kind) {
        (false, ContractKind::OneMonth) => price_1m_window(model, state, w),
        (false, ContractKind::ThreeMonth) => price_3m_window(model, state, w),
        (true, ContractKind::OneMonth) => shadow_price_1m_window(model, state, w, quad),
        (true, ContractKind::ThreeMonth) => shadow_price_3m_window(model, state, w, quad),
    }
}

/// Exact discrete-fixing futures rate for the Gaussian variants.
pub fn exact_futures_rate(model: &Model, state: &[f64], w: &AccrualWindow) -> Result<f64> {
    match w.kind {
        ContractKind::OneMonth => price_1m_exact_window(model, state, w),
        ContractKind::ThreeMonth => price_3m_exact_window(model, state, w),
    }
}
