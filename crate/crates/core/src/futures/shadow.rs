//! Shadow-rate AFNS3 pricing from the first two moments of the integrated
//! floored rate.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::futures::contract::{AccrualWindow, AccruedFixings, ContractKind, FuturesContract};
use crate::math::{bivariate_normal_cdf, norm_cdf, norm_pdf, QuadratureScheme};
use crate::models::{dot, Model, V3};

const SIGMA_FLOOR: f64 = 1e-10;
const DEGENERATE_CORR: f64 = 1e-12;

/// Moments of the shadow rate at two horizons.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowMomentInputs {
    pub mu_u: f64,
    pub mu_s: f64,
    pub sigma_u: f64,
    pub sigma_s: f64,
    pub cov: f64,
    pub corr: f64,
}

impl ShadowMomentInputs {
    pub fn zeta_u(&self) -> f64 {
        self.mu_u / self.sigma_u
    }

    pub fn zeta_s(&self) -> f64 {
        self.mu_s / self.sigma_s
    }
}

/// Mean and variance of the shadow rate `tau` years ahead.
pub(crate) fn shadow_mean_var(model: &Model, x: &V3, tau: f64) -> (f64, f64) {
    let m = model.mean3(x, tau);
    let v = model.v3(tau);
    (m[0] + m[1], v[0][0] + v[1][1] + 2.0 * v[0][1])
}

/// Covariance of the shadow rate at `u <= s` years ahead.
pub(crate) fn shadow_cov(model: &Model, u: f64, s: f64) -> f64 {
    let v = model.v3(u);
    let x = model.lam * (s - u);
    let e = (-x).exp();
    let w: V3 = [1.0, e, x * e];
    // rho1' V(u) Phi(s - u)' rho1 with rho1 = (1, 1, 0)
    dot(&v[0], &w) + dot(&v[1], &w)
}

/// Means, variances and covariance of the shadow rate at `u` and `s`, both
/// measured from `t`.
pub fn shadow_mean_var_cov(
    model: &Model,
    state: &[f64],
    t: f64,
    u: f64,
    s: f64,
) -> Result<(f64, f64, f64, f64, f64)> {
    model.require_shadow("shadow_mean_var_cov")?;
    if u < t || s < t {
        return Err(Error::Domain("horizons must not precede t".into()));
    }
    let x = model.state3(state)?;
    let (mu_u, var_u) = shadow_mean_var(model, &x, u - t);
    let (mu_s, var_s) = shadow_mean_var(model, &x, s - t);
    let cov = if u <= s {
        shadow_cov(model, u - t, s - t)
    } else {
        shadow_cov(model, s - t, u - t)
    };
    Ok((mu_u, mu_s, var_u, var_s, cov))
}

pub fn moment_inputs(model: &Model, state: &[f64], u: f64, s: f64) -> Result<ShadowMomentInputs> {
    let (mu_u, mu_s, var_u, var_s, cov) = shadow_mean_var_cov(model, state, 0.0, u, s)?;
    let (sigma_u, sigma_s) = (var_u.sqrt(), var_s.sqrt());
    let corr = if sigma_u > 0.0 && sigma_s > 0.0 {
        (cov / (sigma_u * sigma_s)).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    Ok(ShadowMomentInputs {
        mu_u,
        mu_s,
        sigma_u,
        sigma_s,
        cov,
        corr,
    })
}

/// E[max(Y, 0)] for Y ~ N(mu, sigma^2).
pub fn positive_part_mean(mu: f64, sigma: f64) -> f64 {
    if sigma < SIGMA_FLOOR {
        return mu.max(0.0);
    }
    let z = mu / sigma;
    mu * norm_cdf(z) + sigma * norm_pdf(z)
}

/// E[max(X, 0) max(Y, 0)] for jointly normal X, Y.
pub fn positive_part_cross_moment(mu1: f64, s1: f64, mu2: f64, s2: f64, rho: f64) -> Result<f64> {
    if s1 < SIGMA_FLOOR {
        return Ok(mu1.max(0.0) * positive_part_mean(mu2, s2));
    }
    if s2 < SIGMA_FLOOR {
        return Ok(mu2.max(0.0) * positive_part_mean(mu1, s1));
    }
    let (z1, z2) = (mu1 / s1, mu2 / s2);
    let one_minus = (1.0 - rho) * (1.0 + rho);
    let ratio = |num: f64, den: f64| -> f64 {
        if den > 0.0 {
            norm_cdf(num / den)
        } else if num > 0.0 {
            1.0
        } else if num < 0.0 {
            0.0
        } else {
            0.5
        }
    };
    let (phi2, s) = if one_minus < DEGENERATE_CORR {
        let p = if rho > 0.0 {
            norm_cdf(z1.min(z2))
        } else {
            (norm_cdf(z1) - norm_cdf(-z2)).max(0.0)
        };
        (p, one_minus.max(0.0).sqrt())
    } else {
        (bivariate_normal_cdf(z1, z2, rho)?, one_minus.sqrt())
    };
    let mut out = (mu1 * mu2 + rho * s1 * s2) * phi2
        + mu2 * s1 * norm_pdf(z1) * ratio(z2 - rho * z1, s)
        + mu1 * s2 * norm_pdf(z2) * ratio(z1 - rho * z2, s);
    if s > 0.0 {
        let q = (z1 * z1 - 2.0 * rho * z1 * z2 + z2 * z2) / (s * s);
        out += s1 * s2 * s * norm_pdf(q.sqrt()) / (2.0 * std::f64::consts::PI).sqrt();
    }
    Ok(out)
}

fn auto_panels(q: &QuadratureScheme, a: f64, b: f64) -> usize {
    if q.panels > 0 {
        q.panels
    } else {
        ((b - a) * 12.0).round().max(1.0) as usize
    }
}

fn integrate_with_check<F: FnMut(&QuadratureScheme, usize) -> Result<f64>>(
    q: &QuadratureScheme,
    panels: usize,
    mut run: F,
) -> Result<f64> {
    let base = run(q, panels)?;
    if q.self_check {
        let fine = run(q, 2 * panels)?;
        if (fine - base).abs() > crate::math::quadrature::SELF_CHECK_TOL {
            return Err(Error::Numerical(format!(
                "quadrature refinement disagreement {:.3e}",
                (fine - base).abs()
            )));
        }
        return Ok(fine);
    }
    Ok(base)
}

pub(crate) fn positive_mean_3(model: &Model, x: &V3, a: f64, b: f64, q: &QuadratureScheme) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    integrate_with_check(q, auto_panels(q, a, b), |q, panels| {
        q.adaptive(
            &mut |s| {
                let (mu, var) = shadow_mean_var(model, x, s);
                positive_part_mean(mu, var.sqrt())
            },
            a,
            b,
            panels,
            q.tolerance,
        )
    })
}

pub(crate) fn positive_second_moment_3(
    model: &Model,
    x: &V3,
    a: f64,
    b: f64,
    q: &QuadratureScheme,
) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    let inner_tol = q.tolerance / (b - a);
    integrate_with_check(q, auto_panels(q, a, b), |q, panels| {
        let mut err = None;
        let v = q.adaptive(
            &mut |s| {
                let (mu_s, var_s) = shadow_mean_var(model, x, s);
                let sig_s = var_s.sqrt();
                let inner = q.adaptive(
                    &mut |u| {
                        let (mu_u, var_u) = shadow_mean_var(model, x, u);
                        let sig_u = var_u.sqrt();
                        let rho = if sig_u > 0.0 && sig_s > 0.0 {
                            (shadow_cov(model, u, s) / (sig_u * sig_s)).clamp(-1.0, 1.0)
                        } else {
                            0.0
                        };
                        match positive_part_cross_moment(mu_u, sig_u, mu_s, sig_s, rho) {
                            Ok(v) => v,
                            Err(e) => {
                                err.get_or_insert(e);
                                0.0
                            }
                        }
                    },
                    a,
                    s,
                    1,
                    inner_tol,
                );
                match inner {
                    Ok(v) => v,
                    Err(e) => {
                        err.get_or_insert(e);
                        0.0
                    }
                }
            },
            a,
            b,
            panels,
            q.tolerance,
        )?;
        if let Some(e) = err {
            return Err(e);
        }
        Ok(2.0 * v)
    })
}

/// E[int_a^b max(s_u, 0) du] with horizons in years from valuation.
pub fn integrated_positive_mean(model: &Model, state: &[f64], a: f64, b: f64, q: &QuadratureScheme) -> Result<f64> {
    model.require_shadow("integrated_positive_mean")?;
    q.validate()?;
    if !(0.0 <= a && a < b) {
        return Err(Error::Domain(format!("integration range [{a}, {b}] is invalid")));
    }
    let x = model.state3(state)?;
    positive_mean_3(model, &x, a, b, q)
}

/// E[(int_a^b max(s_u, 0) du)^2].
pub fn integrated_positive_second_moment(
    model: &Model,
    state: &[f64],
    a: f64,
    b: f64,
    q: &QuadratureScheme,
) -> Result<f64> {
    model.require_shadow("integrated_positive_second_moment")?;
    q.validate()?;
    if !(0.0 <= a && a < b) {
        return Err(Error::Domain(format!("integration range [{a}, {b}] is invalid")));
    }
    let x = model.state3(state)?;
    positive_second_moment_3(model, &x, a, b, q)
}

fn remaining(w: &AccrualWindow, kind: ContractKind) -> Result<f64> {
    if w.kind != kind {
        return Err(Error::Domain(format!("expected a {kind} contract, got {}", w.kind)));
    }
    let a = w.remaining_start();
    if a < 0.0 || w.delta() <= 0.0 {
        return Err(Error::Domain("invalid accrual window".into()));
    }
    Ok(a)
}

pub fn shadow_price_1m_window(model: &Model, state: &[f64], w: &AccrualWindow, q: &QuadratureScheme) -> Result<f64> {
    model.require_shadow("shadow_price_1m")?;
    q.validate()?;
    let x = model.state3(state)?;
    let a = remaining(w, ContractKind::OneMonth)?;
    let e = positive_mean_3(model, &x, a, w.end, q)?;
    Ok((w.realized_sum + e) / w.delta())
}

pub fn shadow_price_3m_window(model: &Model, state: &[f64], w: &AccrualWindow, q: &QuadratureScheme) -> Result<f64> {
    model.require_shadow("shadow_price_3m")?;
    q.validate()?;
    let x = model.state3(state)?;
    let a = remaining(w, ContractKind::ThreeMonth)?;
    let e = positive_mean_3(model, &x, a, w.end, q)?;
    let m2 = positive_second_moment_3(model, &x, a, w.end, q)?;
    let growth = (e + 0.5 * (m2 - e * e)).exp();
    Ok((w.realized_growth * growth - 1.0) / w.delta())
}

pub fn shadow_price_1m(
    model: &Model,
    state: &[f64],
    contract: &FuturesContract,
    valuation: NaiveDate,
    accrued: &AccruedFixings,
    q: &QuadratureScheme,
) -> Result<f64> {
    shadow_price_1m_window(model, state, &contract.window(valuation, accrued)?, q)
}

pub fn shadow_price_3m(
    model: &Model,
    state: &[f64],
    contract: &FuturesContract,
    valuation: NaiveDate,
    accrued: &AccruedFixings,
    q: &QuadratureScheme,
) -> Result<f64> {
    shadow_price_3m_window(model, state, &contract.window(valuation, accrued)?, q)
}

/// Zero-coupon bond from the two-cumulant expansion.
pub fn shadow_zcb(model: &Model, state: &[f64], tau: f64, q: &QuadratureScheme) -> Result<f64> {
    model.require_shadow("shadow_zcb")?;
    if tau == 0.0 {
        return Ok(1.0);
    }
    let x = model.state3(state)?;
    let e = positive_mean_3(model, &x, 0.0, tau, q)?;
    let m2 = positive_second_moment_3(model, &x, 0.0, tau, q)?;
    Ok((-e + 0.5 * (m2 - e * e)).exp())
}
