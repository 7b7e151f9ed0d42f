//! Monte Carlo futures rates, bond prices and futures options.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::futures::{
    exact_futures_rate, futures_rate, AccrualWindow, AccruedFixings, ContractKind, FuturesContract,
};
use crate::math::QuadratureScheme;
use crate::mc::engine::{day_index, estimate, McConfig, McEstimate, Measure, PathRecord};
use crate::models::Model;

struct WindowIdx {
    kind: ContractKind,
    delta: f64,
    realized_sum: f64,
    realized_growth: f64,
    a: usize,
    end: usize,
    periods: Vec<(usize, usize)>,
}

fn index_window(w: &AccrualWindow, spd: usize) -> Result<WindowIdx> {
    let a = w.remaining_start();
    if a < 0.0 {
        return Err(Error::Domain("window has unrealized periods before valuation".into()));
    }
    let on_grid = |t: f64| ((t * 360.0).round() - t * 360.0).abs() < 1e-6;
    if !on_grid(a) || !on_grid(w.end) || w.periods.iter().any(|p| !on_grid(p.start)) {
        return Err(Error::Domain("Monte Carlo windows must fall on whole days".into()));
    }
    Ok(WindowIdx {
        kind: w.kind,
        delta: w.delta(),
        realized_sum: w.realized_sum,
        realized_growth: w.realized_growth,
        a: day_index(a, spd),
        end: day_index(w.end, spd),
        periods: w
            .periods
            .iter()
            .map(|p| (day_index(p.start, spd), day_index(p.start + p.length, spd)))
            .collect(),
    })
}

impl WindowIdx {
    /// Discrete settlement: simple average for 1m, compounded for 3m, with
    /// each day's growth read off the simulated integral.
    fn payoff(&self, cum: &[f64]) -> f64 {
        match self.kind {
            ContractKind::OneMonth => {
                let s: f64 = self.periods.iter().map(|&(s, e)| (cum[e] - cum[s]).exp_m1()).sum();
                (self.realized_sum + s) / self.delta
            }
            ContractKind::ThreeMonth => {
                (self.realized_growth * (cum[self.end] - cum[self.a]).exp() - 1.0) / self.delta
            }
        }
    }

    fn continuous_1m(&self, cum: &[f64]) -> f64 {
        (self.realized_sum + cum[self.end] - cum[self.a]) / self.delta
    }
}

/// Monte Carlo futures rates for several contracts on common paths.
pub fn mc_futures_rates(model: &Model, state: &[f64], windows: &[AccrualWindow], mc: &McConfig) -> Result<Vec<McEstimate>> {
    let x = model.state3(state)?;
    let spd = mc.steps_per_day()?;
    let idx: Vec<WindowIdx> = windows.iter().map(|w| index_window(w, spd)).collect::<Result<_>>()?;
    let n_steps = idx.iter().map(|w| w.end).max().unwrap_or(0);
    estimate(model, Measure::Q, &x, n_steps, &[], idx.len(), mc, |p: &PathRecord, out| {
        for (o, w) in out.iter_mut().zip(&idx) {
            *o = w.payoff(p.cum);
        }
    })
}

pub fn mc_futures_rate(model: &Model, state: &[f64], w: &AccrualWindow, mc: &McConfig) -> Result<McEstimate> {
    Ok(mc_futures_rates(model, state, std::slice::from_ref(w), mc)?[0])
}

/// Monte Carlo zero-coupon bond prices at the given maturities (years).
pub fn mc_zcb(model: &Model, state: &[f64], maturities: &[f64], mc: &McConfig) -> Result<Vec<McEstimate>> {
    let x = model.state3(state)?;
    let spd = mc.steps_per_day()?;
    let idx: Vec<usize> = maturities
        .iter()
        .map(|t| ((t * 360.0 * spd as f64).round()) as usize)
        .collect();
    let n_steps = idx.iter().copied().max().unwrap_or(0);
    estimate(model, Measure::Q, &x, n_steps, &[], idx.len(), mc, |p, out| {
        for (o, &k) in out.iter_mut().zip(&idx) {
            *o = (-p.cum[k]).exp();
        }
    })
}

/// Futures-minus-forward gap by simulation with common random numbers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McConvexity {
    pub futures_rate: f64,
    pub forward_rate: f64,
    pub adjustment: f64,
    pub std_error: f64,
}

/// Simulated convexity adjustment of a contract seen before accrual start.
///
/// For 3m contracts the futures payoff is the compounded growth and the
/// forward is simple; for 1m contracts both are continuously compounded,
/// so the gap vanishes exactly for deterministic rates.
pub fn mc_convexity(model: &Model, state: &[f64], w: &AccrualWindow, mc: &McConfig) -> Result<McConvexity> {
    if w.start < 0.0 || w.realized_growth != 1.0 {
        return Err(Error::Domain("convexity is defined before accrual start only".into()));
    }
    let x = model.state3(state)?;
    let spd = mc.steps_per_day()?;
    let wi = index_window(w, spd)?;
    let ks = day_index(w.start, spd);
    let n_steps = wi.end;
    let kind = w.kind;
    let delta = w.delta();
    // outputs: futures payoff, p(S), p(T)
    let est = estimate(model, Measure::Q, &x, n_steps, &[], 3, mc, |p, out| {
        out[0] = match kind {
            ContractKind::OneMonth => wi.continuous_1m(p.cum),
            ContractKind::ThreeMonth => wi.payoff(p.cum),
        };
        out[1] = (-p.cum[ks]).exp();
        out[2] = (-p.cum[wi.end]).exp();
    })?;
    let (ps, pt) = (est[1].mean, est[2].mean);
    let forward = match kind {
        ContractKind::OneMonth => (ps.ln() - pt.ln()) / delta,
        ContractKind::ThreeMonth => (ps / pt - 1.0) / delta,
    };
    // Delta-method error of the forward, dominated by the futures leg in practice.
    let fwd_se = match kind {
        ContractKind::OneMonth => ((est[1].std_error / ps).powi(2) + (est[2].std_error / pt).powi(2)).sqrt() / delta,
        ContractKind::ThreeMonth => (ps / pt) * ((est[1].std_error / ps).powi(2) + (est[2].std_error / pt).powi(2)).sqrt() / delta,
    };
    Ok(McConvexity {
        futures_rate: est[0].mean,
        forward_rate: forward,
        adjustment: est[0].mean - forward,
        std_error: (est[0].std_error.powi(2) + fwd_se.powi(2)).sqrt(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptionQuote {
    /// Model futures rate today.
    pub futures_rate: f64,
    /// Strike in IMM index points (at the money).
    pub strike: f64,
    /// Call price in IMM index points.
    pub price: f64,
    pub std_error: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptionComparison {
    pub expiry: f64,
    pub gaussian: OptionQuote,
    pub shadow: OptionQuote,
}

/// European call on a futures contract struck at the model's own current
/// futures price, in IMM index points.
pub fn mc_option_price_single(
    model: &Model,
    state: &[f64],
    w: &AccrualWindow,
    expiry: f64,
    strike: Option<f64>,
    mc: &McConfig,
    quad: &QuadratureScheme,
) -> Result<OptionQuote> {
    if expiry <= 0.0 || expiry > w.remaining_start() + 1e-12 {
        return Err(Error::Domain("option expiry must lie in (0, accrual start]".into()));
    }
    let x = model.state3(state)?;
    let spd = mc.steps_per_day()?;
    let f0 = futures_rate(model, state, w, quad)?;
    let strike = strike.unwrap_or(100.0 * (1.0 - f0));
    let k_exp = day_index(expiry, spd);
    let shifted = shift_window(w, expiry);
    let n = model.n;
    let failures = std::sync::atomic::AtomicUsize::new(0);
    let est = estimate(model, Measure::Q, &x, k_exp, &[k_exp], 1, mc, |p, out| {
        let xt = &p.snaps[0][..n];
        let ft = match futures_rate(model, xt, &shifted, quad) {
            Ok(v) => v,
            Err(_) => {
                failures.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                f64::NAN
            }
        };
        let price_t = 100.0 * (1.0 - ft);
        out[0] = (-p.cum[k_exp]).exp() * (price_t - strike).max(0.0);
    })?;
    if failures.into_inner() > 0 || !est[0].mean.is_finite() {
        return Err(Error::Numerical("terminal futures pricing failed on some paths".into()));
    }
    Ok(OptionQuote {
        futures_rate: f0,
        strike,
        price: est[0].mean,
        std_error: est[0].std_error,
    })
}

/// Prices the same at-the-money call under a Gaussian and a shadow-rate
/// model on common random numbers.
pub fn mc_option_price(
    gaussian: &Model,
    shadow: &Model,
    state: &[f64],
    w: &AccrualWindow,
    expiry: f64,
    mc: &McConfig,
    quad: &QuadratureScheme,
) -> Result<OptionComparison> {
    gaussian.require_gaussian("mc_option_price")?;
    shadow.require_shadow("mc_option_price")?;
    Ok(OptionComparison {
        expiry,
        gaussian: mc_option_price_single(gaussian, state, w, expiry, None, mc, quad)?,
        shadow: mc_option_price_single(shadow, state, w, expiry, None, mc, quad)?,
    })
}

/// The same window seen from `t` years later.
pub fn shift_window(w: &AccrualWindow, t: f64) -> AccrualWindow {
    let mut out = w.clone();
    out.start -= t;
    out.end -= t;
    for p in out.periods.iter_mut() {
        p.start -= t;
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproxRow {
    pub contract_id: String,
    pub kind: ContractKind,
    pub accrual_start: NaiveDate,
    pub accrual_end: NaiveDate,
    pub approx_rate: f64,
    pub exact_rate: f64,
    pub difference: f64,
}

/// Continuous-time approximation versus exact discrete pricing for each
/// contract, valued before accrual start.
pub fn approximation_error_report(
    model: &Model,
    state: &[f64],
    contracts: &[FuturesContract],
    valuation: NaiveDate,
) -> Result<Vec<ApproxRow>> {
    model.require_gaussian("approximation_error_report")?;
    let quad = QuadratureScheme::default();
    contracts
        .iter()
        .map(|c| {
            let w = c.window(valuation, &AccruedFixings::new())?;
            let approx = futures_rate(model, state, &w, &quad)?;
            let exact = exact_futures_rate(model, state, &w)?;
            Ok(ApproxRow {
                contract_id: c.contract_id.clone(),
                kind: c.kind,
                accrual_start: c.accrual_start,
                accrual_end: c.accrual_end,
                approx_rate: approx,
                exact_rate: exact,
                difference: approx - exact,
            })
        })
        .collect()
}
