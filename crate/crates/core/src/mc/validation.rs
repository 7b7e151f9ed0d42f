//! Fixture contracts and states for checking pricers against simulation.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::futures::{futures_rate, AccrualWindow, ContractKind};
use crate::math::QuadratureScheme;
use crate::mc::{mc_futures_rates, mc_option_price, McConfig};
use crate::models::{Model, ModelParams};

const BP: f64 = 1e4;

/// The contracts used in estimation seen at the start of the front month:
/// seven monthly and five quarterly, none accruing yet.
pub fn estimation_windows() -> Vec<(String, AccrualWindow)> {
    let one = (0..7).map(|i| {
        (
            format!("{}M", i + 1),
            AccrualWindow::stylized(ContractKind::OneMonth, (30 * i) as f64 / 360.0, 30),
        )
    });
    let three = (0..5).map(|i| {
        (
            format!("{}M", 3 * (i + 1)),
            AccrualWindow::stylized(ContractKind::ThreeMonth, (90 * i) as f64 / 360.0, 90),
        )
    });
    one.chain(three).collect()
}

/// One state with rates well above zero and one pinned near the bound.
pub fn reference_states(params: &ModelParams) -> Vec<(String, Vec<f64>)> {
    vec![
        ("away".into(), params.theta_p.iter().copied().collect()),
        ("near_bound".into(), vec![0.004, -0.0035, -0.005]),
    ]
}

/// Shadow rate well below zero, used for the option comparison.
pub fn near_zero_state() -> Vec<f64> {
    vec![-0.01, 0.0, 0.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowAccuracyRow {
    pub state: String,
    pub contract: String,
    pub kind: ContractKind,
    pub start: f64,
    pub approx_rate: f64,
    pub mc_rate: f64,
    pub std_error: f64,
    pub difference_bp: f64,
}

pub fn shadow_accuracy(
    model: &Model,
    states: &[(String, Vec<f64>)],
    mc: &McConfig,
    quad: &QuadratureScheme,
) -> Result<Vec<ShadowAccuracyRow>> {
    model.require_shadow("shadow_accuracy")?;
    let windows = estimation_windows();
    let ws: Vec<AccrualWindow> = windows.iter().map(|(_, w)| w.clone()).collect();
    let mut out = vec![];
    for (label, x) in states {
        let sim = mc_futures_rates(model, x, &ws, mc)?;
        for ((name, w), est) in windows.iter().zip(sim) {
            let approx = futures_rate(model, x, w, quad)?;
            out.push(ShadowAccuracyRow {
                state: label.clone(),
                contract: name.clone(),
                kind: w.kind,
                start: w.start,
                approx_rate: approx,
                mc_rate: est.mean,
                std_error: est.std_error,
                difference_bp: (approx - est.mean) * BP,
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptionRow {
    pub expiry: f64,
    pub accrual_start: f64,
    pub gaussian_futures_rate: f64,
    pub gaussian_price: f64,
    pub gaussian_std_error: f64,
    pub shadow_futures_rate: f64,
    pub shadow_price: f64,
    pub shadow_std_error: f64,
    pub ratio: f64,
}

/// At-the-money calls on a three-month contract starting at `start`,
/// expiring at `expiry`, under the Gaussian model and its shadow twin.
pub fn option_ordering(
    params: &ModelParams,
    state: &[f64],
    start: f64,
    expiry: f64,
    mc: &McConfig,
    quad: &QuadratureScheme,
) -> Result<OptionRow> {
    let g = Model::new(params.with_variant(crate::models::ModelVariant::Afns3)?)?;
    let s = Model::new(params.with_variant(crate::models::ModelVariant::ShadowAfns3)?)?;
    let w = AccrualWindow::stylized(ContractKind::ThreeMonth, start, 90);
    let c = mc_option_price(&g, &s, state, &w, expiry, mc, quad)?;
    Ok(OptionRow {
        expiry,
        accrual_start: start,
        gaussian_futures_rate: c.gaussian.futures_rate,
        gaussian_price: c.gaussian.price,
        gaussian_std_error: c.gaussian.std_error,
        shadow_futures_rate: c.shadow.futures_rate,
        shadow_price: c.shadow.price,
        shadow_std_error: c.shadow.std_error,
        ratio: c.shadow.price / c.gaussian.price,
    })
}
