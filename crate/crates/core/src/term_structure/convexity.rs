//! Convexity adjustments: futures rate minus the equivalent forward rate.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::futures::{price_1m_window, price_3m_window, AccrualWindow, AccruedFixings, ContractKind, FuturesContract};
use crate::math::QuadratureScheme;
use crate::mc::{mc_convexity, McConfig};
use crate::models::{quad_form, Model};

const CLOSED_FORM_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConvexityMethod {
    ClosedForm,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Convexity {
    pub futures_rate: f64,
    pub forward_rate: f64,
    /// futures_rate - forward_rate
    pub adjustment: f64,
    /// Closed-form value computed alongside, Gaussian variants only.
    pub closed_form: Option<f64>,
    pub std_error: Option<f64>,
    pub method: ConvexityMethod,
    /// Set when the Monte Carlo standard error exceeds the requested tolerance.
    pub flagged: bool,
}

fn check_unstarted(w: &AccrualWindow) -> Result<f64> {
    if w.start < 0.0 || w.remaining_start() != w.start || w.realized_sum != 0.0 || w.realized_growth != 1.0 {
        return Err(Error::Domain("convexity is only defined before the accrual period starts".into()));
    }
    Ok(w.delta())
}

/// One-month adjustment; the forward is continuously compounded so the
/// gap is (A(T) - A(S)) / (T - S).
pub fn convexity_1m(model: &Model, state: &[f64], w: &AccrualWindow) -> Result<Convexity> {
    model.require_gaussian("convexity_1m")?;
    if w.kind != ContractKind::OneMonth {
        return Err(Error::Domain("expected a 1M contract".into()));
    }
    let delta = check_unstarted(w)?;
    let x = model.state3(state)?;
    let futures = price_1m_window(model, state, w)?;
    let forward = (model.log_zcb3(&x, w.start) - model.log_zcb3(&x, w.end)) / delta;
    let closed = (model.a(w.end) - model.a(w.start)) / delta;
    Ok(Convexity {
        futures_rate: futures,
        forward_rate: forward,
        adjustment: futures - forward,
        closed_form: Some(closed),
        std_error: None,
        method: ConvexityMethod::ClosedForm,
        flagged: false,
    })
}

/// Three-month adjustment against the simple forward p(S)/p(T).
pub fn convexity_3m(model: &Model, state: &[f64], w: &AccrualWindow) -> Result<Convexity> {
    model.require_gaussian("convexity_3m")?;
    if w.kind != ContractKind::ThreeMonth {
        return Err(Error::Domain("expected a 3M contract".into()));
    }
    let delta = check_unstarted(w)?;
    let x = model.state3(state)?;
    let futures = price_3m_window(model, state, w)?;
    let forward = ((model.log_zcb3(&x, w.start) - model.log_zcb3(&x, w.end)).exp() - 1.0) / delta;
    let b = model.b3(delta);
    let v = model.v3(w.start);
    let exponent = model.a(w.end) - model.a(w.start) + model.a(delta) + 0.5 * quad_form(&v, &b);
    let closed = (forward + 1.0 / delta) * exponent.exp_m1();
    let adjustment = futures - forward;
    if (closed - adjustment).abs() > CLOSED_FORM_TOL {
        return Err(Error::Numerical(format!(
            "3M convexity closed form {closed} disagrees with direct difference {adjustment}"
        )));
    }
    Ok(Convexity {
        futures_rate: futures,
        forward_rate: forward,
        adjustment,
        closed_form: Some(closed),
        std_error: None,
        method: ConvexityMethod::ClosedForm,
        flagged: false,
    })
}

/// Shadow-rate adjustment by simulation. The result is flagged when the
/// standard error exceeds `max_std_error`.
pub fn convexity_shadow(model: &Model, state: &[f64], w: &AccrualWindow, mc: &McConfig, max_std_error: f64) -> Result<Convexity> {
    model.require_shadow("convexity_shadow")?;
    check_unstarted(w)?;
    let r = mc_convexity(model, state, w, mc)?;
    Ok(Convexity {
        futures_rate: r.futures_rate,
        forward_rate: r.forward_rate,
        adjustment: r.adjustment,
        closed_form: None,
        std_error: Some(r.std_error),
        method: ConvexityMethod::MonteCarlo,
        flagged: r.std_error > max_std_error,
    })
}

/// Dispatches on variant and contract kind.
pub fn convexity(model: &Model, state: &[f64], w: &AccrualWindow, mc: &McConfig, max_std_error: f64) -> Result<Convexity> {
    match (model.variant().is_shadow(), w.kind) {
        (true, _) => convexity_shadow(model, state, w, mc, max_std_error),
        (false, ContractKind::OneMonth) => convexity_1m(model, state, w),
        (false, ContractKind::ThreeMonth) => convexity_3m(model, state, w),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexityRow {
    pub contract_id: String,
    pub kind: ContractKind,
    pub accrual_start: NaiveDate,
    pub accrual_end: NaiveDate,
    #[serde(flatten)]
    pub value: Convexity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub as_of: NaiveDate,
    pub rows: Vec<ConvexityRow>,
}

/// Adjustments for every contract whose accrual has not started at `as_of`;
/// contracts already accruing are skipped.
pub fn convexity_report(
    model: &Model,
    state: &[f64],
    contracts: &[FuturesContract],
    as_of: NaiveDate,
    mc: &McConfig,
    max_std_error: f64,
) -> Result<ConvexityReport> {
    let rows = contracts
        .iter()
        .filter(|c| c.accrual_start >= as_of)
        .map(|c| {
            let w = c.window(as_of, &AccruedFixings::new())?;
            Ok(ConvexityRow {
                contract_id: c.contract_id.clone(),
                kind: c.kind,
                accrual_start: c.accrual_start,
                accrual_end: c.accrual_end,
                value: convexity(model, state, &w, mc, max_std_error)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvexityReport { as_of, rows })
}

/// Gaussian adjustments of stylized contracts starting every `step` years
/// out to `horizon`.
pub fn convexity_curve(model: &Model, state: &[f64], kind: ContractKind, horizon: f64, step_days: u32) -> Result<Vec<(f64, Convexity)>> {
    let days = match kind {
        ContractKind::OneMonth => 30,
        ContractKind::ThreeMonth => 90,
    };
    let n = (horizon * 360.0 / step_days as f64).floor() as usize;
    (0..=n)
        .map(|i| {
            let s = (i as u32 * step_days) as f64 / 360.0;
            let w = AccrualWindow::stylized(kind, s, days);
            let c = match kind {
                ContractKind::OneMonth => convexity_1m(model, state, &w)?,
                ContractKind::ThreeMonth => convexity_3m(model, state, &w)?,
            };
            Ok((s, c))
        })
        .collect()
}

/// Forward rate on a window for any variant, simple for 3m and continuously
/// compounded for 1m, matching the adjustment definitions above.
pub fn equivalent_forward(model: &Model, state: &[f64], w: &AccrualWindow, quad: &QuadratureScheme) -> Result<f64> {
    let delta = check_unstarted(w)?;
    let (ps, pt) = if model.variant().is_shadow() {
        (
            crate::futures::shadow_zcb(model, state, w.start, quad)?,
            crate::futures::shadow_zcb(model, state, w.end, quad)?,
        )
    } else {
        (model.zcb_price(state, w.start)?, model.zcb_price(state, w.end)?)
    };
    Ok(match w.kind {
        ContractKind::OneMonth => (ps.ln() - pt.ln()) / delta,
        ContractKind::ThreeMonth => (ps / pt - 1.0) / delta,
    })
}
