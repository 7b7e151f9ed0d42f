//! Futures rates under the Gaussian variants: continuous-time closed forms
//! and the exact discrete-fixing formulas.

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::futures::contract::{AccrualWindow, AccruedFixings, ContractKind, FuturesContract, Period};
use crate::math::QuadratureScheme;
use crate::models::{dot, quad_form, Model, V3};

fn check_window(w: &AccrualWindow, kind: ContractKind) -> Result<f64> {
    if w.kind != kind {
        return Err(Error::Domain(format!("expected a {kind} contract, got {}", w.kind)));
    }
    let a = w.remaining_start();
    if a < 0.0 {
        return Err(Error::Domain("unrealized period starts before valuation".into()));
    }
    if w.delta() <= 0.0 {
        return Err(Error::Domain("empty accrual period".into()));
    }
    Ok(a)
}

/// E_0[int_0^tau r] for a state `x`.
pub(crate) fn expected_integral(model: &Model, x: &V3, tau: f64) -> f64 {
    let b = model.b3(tau);
    model.drift(tau, &b) - dot(&b, x)
}

/// Log of E_0[exp(int_a^{a+len} r)].
pub(crate) fn log_expected_growth(model: &Model, x: &V3, a: f64, len: f64) -> f64 {
    let b = model.b3(len);
    let m = model.mean3(x, a);
    let v = model.v3(a);
    model.a(len) + model.drift(len, &b) - dot(&b, &m) + 0.5 * quad_form(&v, &b)
}

/// Log of E_0[1 / p(a, a + len)].
pub(crate) fn log_expected_inverse_bond(model: &Model, x: &V3, a: f64, len: f64) -> f64 {
    let b = model.b3(len);
    let m = model.mean3(x, a);
    let v = model.v3(a);
    -model.a(len) + model.drift(len, &b) - dot(&b, &m) + 0.5 * quad_form(&v, &b)
}

pub fn price_1m_window(model: &Model, state: &[f64], w: &AccrualWindow) -> Result<f64> {
    model.require_gaussian("price_1m")?;
    let x = model.state3(state)?;
    let a = check_window(w, ContractKind::OneMonth)?;
    let future = expected_integral(model, &x, w.end) - expected_integral(model, &x, a);
    Ok((w.realized_sum + future) / w.delta())
}

pub fn price_3m_window(model: &Model, state: &[f64], w: &AccrualWindow) -> Result<f64> {
    model.require_gaussian("price_3m")?;
    let x = model.state3(state)?;
    let a = check_window(w, ContractKind::ThreeMonth)?;
    let growth = log_expected_growth(model, &x, a, w.end - a).exp();
    Ok((w.realized_growth * growth - 1.0) / w.delta())
}

/// Exact arithmetic average of the discrete overnight rates.
pub fn price_1m_exact_window(model: &Model, state: &[f64], w: &AccrualWindow) -> Result<f64> {
    model.require_gaussian("price_1m_exact")?;
    let x = model.state3(state)?;
    check_window(w, ContractKind::OneMonth)?;
    let future: f64 = w
        .periods
        .iter()
        .map(|p| log_expected_inverse_bond(model, &x, p.start, p.length).exp_m1())
        .sum();
    Ok((w.realized_sum + future) / w.delta())
}

/// Exact daily-compounded rate via the Gaussian HJM representation.
pub fn price_3m_exact_window(model: &Model, state: &[f64], w: &AccrualWindow) -> Result<f64> {
    model.require_gaussian("price_3m_exact")?;
    let x = model.state3(state)?;
    let a = check_window(w, ContractKind::ThreeMonth)?;
    let log_fwd = model.log_zcb3(&x, a) - model.log_zcb3(&x, w.end);
    let lg = log_gamma_product(model, &w.periods, w.end)?;
    Ok((w.realized_growth * (log_fwd + lg).exp() - 1.0) / w.delta())
}

fn contract_window(
    contract: &FuturesContract,
    valuation: NaiveDate,
    accrued: &AccruedFixings,
) -> Result<AccrualWindow> {
    contract.window(valuation, accrued)
}

pub fn price_1m(
    model: &Model,
    state: &[f64],
    contract: &FuturesContract,
    valuation: NaiveDate,
    accrued: &AccruedFixings,
) -> Result<f64> {
    price_1m_window(model, state, &contract_window(contract, valuation, accrued)?)
}

pub fn price_3m(
    model: &Model,
    state: &[f64],
    contract: &FuturesContract,
    valuation: NaiveDate,
    accrued: &AccruedFixings,
) -> Result<f64> {
    price_3m_window(model, state, &contract_window(contract, valuation, accrued)?)
}

pub fn price_1m_exact(model: &Model, state: &[f64], contract: &FuturesContract, valuation: NaiveDate) -> Result<f64> {
    if valuation > contract.accrual_start {
        return Err(Error::Domain("exact pricing requires valuation on or before accrual start".into()));
    }
    price_1m_exact_window(model, state, &contract_window(contract, valuation, &AccruedFixings::new())?)
}

pub fn price_3m_exact(model: &Model, state: &[f64], contract: &FuturesContract, valuation: NaiveDate) -> Result<f64> {
    if valuation > contract.accrual_start {
        return Err(Error::Domain("exact pricing requires valuation on or before accrual start".into()));
    }
    price_3m_exact_window(model, state, &contract_window(contract, valuation, &AccruedFixings::new())?)
}

// ---- HJM convexity factors ----

/// Sum of log gamma over the fixing periods ending at `end`: the first
/// interval runs from valuation to the first fixing, each later one between
/// consecutive fixings, always paired with the bond maturing at its end.
pub(crate) fn log_gamma_product(model: &Model, periods: &[Period], end: f64) -> Result<f64> {
    let mut total = 0.0;
    let mut s = 0.0;
    for p in periods {
        let e = p.start;
        if e > s {
            total += log_gamma(model, end - e, e - s)?;
        }
        s = e;
    }
    Ok(total)
}

const ANALYTIC_MIN_X: f64 = 0.05;

/// int over an interval of length `h` ending `d` years before the final
/// maturity of nu(., T) . (nu(., T) - nu(., e)).
pub(crate) fn log_gamma(model: &Model, d: f64, h: f64) -> Result<f64> {
    use crate::models::ModelVariant::*;
    let lam = model.lam;
    if lam * (d + h) < ANALYTIC_MIN_X {
        return gamma_by_quadrature(model, d, h);
    }
    let [s1, s2, s3] = model.sig;
    Ok(match model.variant() {
        Vasicek => s1 * s1 * slope_term(lam, d, h),
        Afns2 => s1 * s1 * level_term(d, h) + s2 * s2 * slope_term(lam, d, h),
        Afns3 | ShadowAfns3 => {
            s1 * s1 * level_term(d, h) + s2 * s2 * slope_term(lam, d, h) + s3 * s3 * curvature_term(lam, d, h)
        }
    })
}

fn level_term(d: f64, h: f64) -> f64 {
    d * d * h + 0.5 * d * h * h
}

fn slope_term(lam: f64, d: f64, h: f64) -> f64 {
    let q = (-lam * d).exp();
    let alpha = -(-lam * d).exp_m1();
    alpha / (lam * lam) * (jint(0, lam, h) - q * jint(0, 2.0 * lam, h))
}

fn curvature_term(lam: f64, d: f64, h: f64) -> f64 {
    use crate::math::expfn::G_B3;
    let q = (-lam * d).exp();
    let alpha = -(-lam * d).exp_m1();
    let p0 = d * G_B3.eval(lam * d);
    let u0 = 1.0 / lam + d;
    (p0 * jint(0, lam, h) + alpha * jint(1, lam, h)) / lam
        - q * (u0 * p0 * jint(0, 2.0 * lam, h)
            + (u0 * alpha + p0) * jint(1, 2.0 * lam, h)
            + alpha * jint(2, 2.0 * lam, h))
}

/// int_0^h z^k e^{-c z} dz for k <= 2.
fn jint(k: u32, c: f64, h: f64) -> f64 {
    let ch = c * h;
    if ch <= 4.0 {
        let mut sum = 0.0;
        let mut coef = h.powi(k as i32 + 1);
        for m in 0..80u32 {
            let term = coef / (k + m + 1) as f64;
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
            coef *= -ch / (m + 1) as f64;
        }
        return sum;
    }
    let e = (-ch).exp();
    match k {
        0 => (1.0 - e) / c,
        1 => (1.0 - e * (1.0 + ch)) / (c * c),
        2 => (2.0 - e * (2.0 + 2.0 * ch + ch * ch)) / (c * c * c),
        _ => unreachable!("jint order"),
    }
}

fn gamma_integrand(model: &Model, d: f64, z: f64) -> f64 {
    let bt = model.b3(d + z);
    let be = model.b3(z);
    (0..3)
        .map(|k| model.sig[k] * model.sig[k] * bt[k] * (bt[k] - be[k]))
        .sum()
}

fn gamma_by_quadrature(model: &Model, d: f64, h: f64) -> Result<f64> {
    let mut q = QuadratureScheme::with_points(15);
    let mut f = |z| gamma_integrand(model, d, z);
    let rough = q.adaptive(&mut f, 0.0, h, 1, f64::INFINITY)?;
    q.tolerance = 1e-13 * rough.abs() + 1e-300;
    q.adaptive(&mut f, 0.0, h, 4, q.tolerance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{tmatvec, ModelParams, M3};
    use proptest::prelude::*;

    fn reference() -> Model {
        Model::new(ModelParams::reference_afns3()).unwrap()
    }

    fn theta() -> [f64; 3] {
        [0.0175, -0.0037, -0.0012]
    }

    // Oracle: the log of a product of inverse bonds is linear in jointly
    // Gaussian states; aggregate the loadings backwards and add the
    // innovation variances.
    fn joint_gaussian_log_product(m: &Model, x: &V3, periods: &[Period]) -> f64 {
        let n = periods.len();
        let mut mean = 0.0;
        for p in periods {
            mean += -m.a(p.length) + m.drift(p.length, &m.b3(p.length)) - dot(&m.b3(p.length), &m.mean3(x, p.start));
        }
        let mut g: V3 = [0.0; 3];
        let mut var = 0.0;
        for i in (0..n).rev() {
            let bi = m.b3(periods[i].length);
            let neg = [-bi[0], -bi[1], -bi[2]];
            if i + 1 < n {
                let phi: M3 = m.phi3(periods[i + 1].start - periods[i].start);
                let carried = tmatvec(&phi, &g);
                g = [neg[0] + carried[0], neg[1] + carried[1], neg[2] + carried[2]];
            } else {
                g = neg;
            }
            let gap = if i == 0 { periods[0].start } else { periods[i].start - periods[i - 1].start };
            var += quad_form(&m.v3(gap), &g);
        }
        mean + 0.5 * var
    }

    #[test]
    fn exact_3m_matches_joint_gaussian_oracle() {
        let m = reference();
        let x = theta();
        for start in [0.0, 0.25, 1.0, 4.0] {
            let w = AccrualWindow::stylized(ContractKind::ThreeMonth, start, 91);
            let got = price_3m_exact_window(&m, &x, &w).unwrap();
            let want = (joint_gaussian_log_product(&m, &x, &w.periods).exp() - 1.0) / w.delta();
            assert!((got - want).abs() < 1e-13, "start {start}: {got} vs {want}");
        }
    }

    #[test]
    fn gamma_analytic_matches_quadrature() {
        let m = reference();
        for d in [0.0, 0.01, 0.3, 2.0, 9.0] {
            for h in [1.0 / 360.0, 3.0 / 360.0, 0.5, 3.0] {
                let a = log_gamma(&m, d, h).unwrap();
                let q = gamma_by_quadrature(&m, d, h).unwrap();
                assert!((a - q).abs() <= 1e-13 * q.abs().max(1e-12), "d={d} h={h}: {a} vs {q}");
            }
        }
    }

    #[test]
    fn series_and_closed_form_j_agree() {
        for k in 0..3 {
            for c in [0.5, 2.0, 4.0] {
                let h = 4.0 / c;
                let s = jint(k, c, h);
                let e = (-c * h).exp();
                let closed = match k {
                    0 => (1.0 - e) / c,
                    1 => (1.0 - e * (1.0 + c * h)) / (c * c),
                    _ => (2.0 - e * (2.0 + 2.0 * c * h + c * c * h * h)) / (c * c * c),
                };
                assert!((s - closed).abs() < 1e-14 * closed);
            }
        }
    }

    #[test]
    fn deterministic_rates() {
        let m = Model::new(ModelParams::reference_afns3().with_sigma_scale(0.0)).unwrap();
        let r = 0.031;
        let x = [r, 0.0, 0.0];
        let w1 = AccrualWindow::stylized(ContractKind::OneMonth, 0.1, 30);
        assert!((price_1m_window(&m, &x, &w1).unwrap() - r).abs() < 1e-15);
        let w3 = AccrualWindow::stylized(ContractKind::ThreeMonth, 0.1, 90);
        let d = w3.delta();
        let want = (f64::exp(r * d) - 1.0) / d;
        assert!((price_3m_window(&m, &x, &w3).unwrap() - want).abs() < 1e-14);
        assert!((price_3m_exact_window(&m, &x, &w3).unwrap() - want).abs() < 1e-14);
        let e1 = price_1m_exact_window(&m, &x, &w1).unwrap();
        assert!((e1 - (r / 360.0).exp_m1() * 360.0).abs() < 1e-14, "{e1}");
        assert_eq!(price_1m_window(&m, &[0.0; 3], &w1).unwrap(), 0.0);
    }

    #[test]
    fn continuity_at_accrual_start() {
        let m = reference();
        let x = theta();
        let w = AccrualWindow::stylized(ContractKind::ThreeMonth, 0.0, 90);
        let before = price_3m_window(&m, &x, &w).unwrap();
        let mut started = w.clone();
        started.start = -1e-300;
        let after = price_3m_window(&m, &x, &started).unwrap();
        assert!((before - after).abs() < 1e-12);
        // t = S reduces to the bond-exponent form
        let want = ((m.a(w.end) - dot(&m.b3(w.end), &x)).exp() - 1.0) / w.delta();
        assert!((before - want).abs() < 1e-15);
    }

    #[test]
    fn shadow_model_is_rejected() {
        let m = Model::new(ModelParams::reference_shadow()).unwrap();
        let w = AccrualWindow::stylized(ContractKind::OneMonth, 0.0, 30);
        assert!(matches!(price_1m_window(&m, &[0.0; 3], &w), Err(Error::UnsupportedVariant { .. })));
    }

    proptest! {
        #[test]
        fn level_bump_moves_rates_one_for_one(start_days in 0u32..120) {
            let m = reference();
            let x = theta();
            let bumped = [x[0] + 1e-4, x[1], x[2]];
            let start = start_days as f64 / 360.0;
            for (kind, days) in [(ContractKind::OneMonth, 30), (ContractKind::ThreeMonth, 90)] {
                let w = AccrualWindow::stylized(kind, start, days);
                let p = |s: &[f64]| match kind {
                    ContractKind::OneMonth => price_1m_window(&m, s, &w).unwrap(),
                    ContractKind::ThreeMonth => price_3m_window(&m, s, &w).unwrap(),
                };
                let diff = p(&bumped) - p(&x);
                prop_assert!((diff / 1e-4 - 1.0).abs() < 0.05);
            }
        }

        #[test]
        fn gamma_matches_quadrature_random(lam in 0.02..5.0f64, d in 0.0..10.0f64, h in 0.001..0.5f64) {
            let m = Model::new(ModelParams::afns3(lam, [0.005, 0.006, 0.009], [0.1; 3], [0.0; 3]).unwrap()).unwrap();
            let a = log_gamma(&m, d, h).unwrap();
            let q = gamma_by_quadrature(&m, d, h).unwrap();
            prop_assert!((a - q).abs() <= 1e-12 * q.abs() + 1e-22);
        }
    }
}
