//! Model variants, parameter sets and the closed-form Gaussian quantities
//! (bond loadings, state transition and covariance) they imply.

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::expfn::{e1, G_B3, H2, H3, W22, W23};
use crate::math::QuadratureScheme;

pub(crate) type V3 = [f64; 3];
pub(crate) type M3 = [[f64; 3]; 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ModelVariant {
    Vasicek,
    Afns2,
    Afns3,
    ShadowAfns3,
}

impl ModelVariant {
    pub fn n_factors(self) -> usize {
        match self {
            ModelVariant::Vasicek => 1,
            ModelVariant::Afns2 => 2,
            ModelVariant::Afns3 | ModelVariant::ShadowAfns3 => 3,
        }
    }

    pub fn is_shadow(self) -> bool {
        self == ModelVariant::ShadowAfns3
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelVariant::Vasicek => "VASICEK",
            ModelVariant::Afns2 => "AFNS2",
            ModelVariant::Afns3 => "AFNS3",
            ModelVariant::ShadowAfns3 => "SHADOW_AFNS3",
        }
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().replace('-', "_").as_str() {
            "VASICEK" => Ok(ModelVariant::Vasicek),
            "AFNS2" => Ok(ModelVariant::Afns2),
            "AFNS3" => Ok(ModelVariant::Afns3),
            "SHADOW_AFNS3" | "SHADOW" => Ok(ModelVariant::ShadowAfns3),
            other => Err(Error::Domain(format!("unknown model variant `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub variant: ModelVariant,
    pub n_factors: usize,
}

impl ModelSpec {
    pub fn new(variant: ModelVariant) -> Self {
        Self {
            variant,
            n_factors: variant.n_factors(),
        }
    }
}

/// Latent factors at a date (level, slope, curvature or a prefix of them).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub values: Vec<f64>,
    pub as_of: Option<NaiveDate>,
}

impl StateVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values, as_of: None }
    }

    pub fn dated(values: Vec<f64>, as_of: NaiveDate) -> Self {
        Self {
            values,
            as_of: Some(as_of),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianMoments {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Full parameter set of a model.
///
/// `lambda` is the Nelson-Siegel decay for the AFNS variants and the free
/// risk-neutral mean reversion kappa^Q for Vasicek. All matrices are stored
/// dense but must be diagonal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsRecord", into = "ParamsRecord")]
pub struct ModelParams {
    pub variant: ModelVariant,
    pub lambda: f64,
    pub sigma: DMatrix<f64>,
    pub k_p: DMatrix<f64>,
    pub theta_p: DVector<f64>,
    pub theta_q: DVector<f64>,
    pub rho0: f64,
    pub rho1: DVector<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ParamsRecord {
    variant: ModelVariant,
    lambda: f64,
    sigma: Vec<f64>,
    k_p: Vec<f64>,
    theta_p: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta_q: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rho0: Option<f64>,
}

impl TryFrom<ParamsRecord> for ModelParams {
    type Error = Error;

    fn try_from(r: ParamsRecord) -> Result<Self> {
        let mut p = ModelParams::from_diagonals(r.variant, r.lambda, &r.sigma, &r.k_p, &r.theta_p)?;
        if let Some(tq) = r.theta_q {
            if tq.len() != p.n() {
                return Err(Error::InvalidParams("theta_q has wrong length".into()));
            }
            p.theta_q = DVector::from_vec(tq);
        }
        if let Some(r0) = r.rho0 {
            p.rho0 = r0;
        }
        p.validate()?;
        Ok(p)
    }
}

impl From<ModelParams> for ParamsRecord {
    fn from(p: ModelParams) -> Self {
        let vasicek = p.variant == ModelVariant::Vasicek;
        ParamsRecord {
            variant: p.variant,
            lambda: p.lambda,
            sigma: p.sigma_diag(),
            k_p: p.k_p_diag(),
            theta_p: p.theta_p.iter().copied().collect(),
            theta_q: vasicek.then(|| p.theta_q.iter().copied().collect()),
            rho0: vasicek.then_some(p.rho0),
        }
    }
}

impl ModelParams {
    /// Builds a parameter set from diagonal entries, applying the fixed
    /// risk-neutral restrictions of the variant.
    pub fn from_diagonals(
        variant: ModelVariant,
        lambda: f64,
        sigma: &[f64],
        k_p: &[f64],
        theta_p: &[f64],
    ) -> Result<Self> {
        let n = variant.n_factors();
        if sigma.len() != n || k_p.len() != n || theta_p.len() != n {
            return Err(Error::InvalidParams(format!(
                "{variant} needs {n} entries in sigma, k_p and theta_p"
            )));
        }
        let rho1 = match variant {
            ModelVariant::Vasicek => vec![1.0],
            ModelVariant::Afns2 => vec![1.0, 1.0],
            _ => vec![1.0, 1.0, 0.0],
        };
        let p = ModelParams {
            variant,
            lambda,
            sigma: DMatrix::from_diagonal(&DVector::from_column_slice(sigma)),
            k_p: DMatrix::from_diagonal(&DVector::from_column_slice(k_p)),
            theta_p: DVector::from_column_slice(theta_p),
            theta_q: DVector::zeros(n),
            rho0: 0.0,
            rho1: DVector::from_vec(rho1),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn afns3(lambda: f64, sigma: [f64; 3], k_p: [f64; 3], theta_p: [f64; 3]) -> Result<Self> {
        Self::from_diagonals(ModelVariant::Afns3, lambda, &sigma, &k_p, &theta_p)
    }

    pub fn shadow_afns3(lambda: f64, sigma: [f64; 3], k_p: [f64; 3], theta_p: [f64; 3]) -> Result<Self> {
        Self::from_diagonals(ModelVariant::ShadowAfns3, lambda, &sigma, &k_p, &theta_p)
    }

    pub fn afns2(lambda: f64, sigma: [f64; 2], k_p: [f64; 2], theta_p: [f64; 2]) -> Result<Self> {
        Self::from_diagonals(ModelVariant::Afns2, lambda, &sigma, &k_p, &theta_p)
    }

    pub fn vasicek(kappa_q: f64, theta_q: f64, sigma: f64, k_p: f64, theta_p: f64) -> Result<Self> {
        let mut p = Self::from_diagonals(ModelVariant::Vasicek, kappa_q, &[sigma], &[k_p], &[theta_p])?;
        p.theta_q[0] = theta_q;
        Ok(p)
    }

    /// The AFNS3 parameter set used throughout the validation suites.
    pub fn reference_afns3() -> Self {
        Self::afns3(
            2.0284,
            [0.0054, 0.0062, 0.0088],
            [0.0980, 0.5153, 2.4486],
            [0.0175, -0.0037, -0.0012],
        )
        .expect("reference parameters are valid")
    }

    /// Same parameters with the rate floored at zero.
    pub fn reference_shadow() -> Self {
        let mut p = Self::reference_afns3();
        p.variant = ModelVariant::ShadowAfns3;
        p
    }

    pub fn n(&self) -> usize {
        self.variant.n_factors()
    }

    pub fn spec(&self) -> ModelSpec {
        ModelSpec::new(self.variant)
    }

    pub fn sigma_diag(&self) -> Vec<f64> {
        self.sigma.diagonal().iter().copied().collect()
    }

    pub fn k_p_diag(&self) -> Vec<f64> {
        self.k_p.diagonal().iter().copied().collect()
    }

    /// Copy with every volatility multiplied by `factor`.
    pub fn with_sigma_scale(&self, factor: f64) -> Self {
        let mut p = self.clone();
        p.sigma *= factor;
        p
    }

    pub fn with_variant(&self, variant: ModelVariant) -> Result<Self> {
        if variant.n_factors() != self.n() {
            return Err(Error::InvalidParams(format!(
                "cannot reinterpret {} parameters as {variant}",
                self.variant
            )));
        }
        let mut p = Self::from_diagonals(
            variant,
            self.lambda,
            &self.sigma_diag(),
            &self.k_p_diag(),
            self.theta_p.as_slice(),
        )?;
        if variant == ModelVariant::Vasicek {
            p.theta_q = self.theta_q.clone();
            p.rho0 = self.rho0;
        }
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        let bad = |m: String| Err(Error::InvalidParams(m));
        let dims_ok = self.sigma.shape() == (n, n)
            && self.k_p.shape() == (n, n)
            && self.theta_p.len() == n
            && self.theta_q.len() == n
            && self.rho1.len() == n;
        if !dims_ok {
            return bad(format!("dimensions inconsistent with {}", self.variant));
        }
        let all = self
            .sigma
            .iter()
            .chain(self.k_p.iter())
            .chain(self.theta_p.iter())
            .chain(self.theta_q.iter())
            .chain(std::iter::once(&self.lambda))
            .chain(std::iter::once(&self.rho0));
        if all.into_iter().any(|v| !v.is_finite()) {
            return bad("non-finite parameter".into());
        }
        for i in 0..n {
            for j in 0..n {
                if i != j && (self.sigma[(i, j)] != 0.0 || self.k_p[(i, j)] != 0.0) {
                    return bad("sigma and k_p must be diagonal".into());
                }
            }
            if self.sigma[(i, i)] < 0.0 {
                return bad(format!("sigma[{i}] must be non-negative"));
            }
            if self.k_p[(i, i)] <= 0.0 {
                return bad(format!("k_p[{i}] must be positive for stationarity"));
            }
        }
        match self.variant {
            ModelVariant::Vasicek => {
                if self.lambda < 0.0 {
                    return bad("kappa_q must be non-negative".into());
                }
                if self.rho1[0] != 1.0 {
                    return bad("Vasicek rho1 must be 1".into());
                }
            }
            _ => {
                if self.lambda <= 0.0 {
                    return bad("lambda must be positive".into());
                }
                if self.theta_q.iter().any(|v| *v != 0.0) || self.rho0 != 0.0 {
                    return bad("AFNS variants fix theta_q = 0 and rho0 = 0".into());
                }
                let want: &[f64] = if n == 2 { &[1.0, 1.0] } else { &[1.0, 1.0, 0.0] };
                if self.rho1.as_slice() != want {
                    return bad("rho1 does not match the AFNS restriction".into());
                }
            }
        }
        Ok(())
    }
}

/// A validated model: parameters plus cached diagonal entries for the
/// closed-form evaluations.
#[derive(Clone, Debug)]
pub struct Model {
    params: ModelParams,
    pub(crate) n: usize,
    pub(crate) lam: f64,
    pub(crate) sig: V3,
    pub(crate) kp: V3,
    pub(crate) thp: V3,
    pub(crate) thq: V3,
    pub(crate) rho1: V3,
}

fn pad(v: &[f64]) -> V3 {
    let mut out = [0.0; 3];
    out[..v.len()].copy_from_slice(v);
    out
}

fn check_tau(tau: f64) -> Result<()> {
    if tau >= 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("maturity must be non-negative, got {tau}")))
    }
}

impl Model {
    pub fn new(params: ModelParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            n: params.n(),
            lam: params.lambda,
            sig: pad(&params.sigma_diag()),
            kp: pad(&params.k_p_diag()),
            thp: pad(params.theta_p.as_slice()),
            thq: pad(params.theta_q.as_slice()),
            rho1: pad(params.rho1.as_slice()),
            params,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn variant(&self) -> ModelVariant {
        self.params.variant
    }

    pub fn spec(&self) -> ModelSpec {
        self.params.spec()
    }

    pub(crate) fn require_gaussian(&self, op: &'static str) -> Result<()> {
        if self.variant().is_shadow() {
            Err(Error::UnsupportedVariant {
                variant: self.variant(),
                op,
            })
        } else {
            Ok(())
        }
    }

    pub(crate) fn require_shadow(&self, op: &'static str) -> Result<()> {
        if self.variant().is_shadow() {
            Ok(())
        } else {
            Err(Error::UnsupportedVariant {
                variant: self.variant(),
                op,
            })
        }
    }

    pub(crate) fn state3(&self, x: &[f64]) -> Result<V3> {
        if x.len() != self.n {
            return Err(Error::Domain(format!(
                "state has {} components, {} expects {}",
                x.len(),
                self.variant(),
                self.n
            )));
        }
        Ok(pad(x))
    }

    // ---- closed forms on padded arrays ----

    pub(crate) fn b3(&self, tau: f64) -> V3 {
        let x = self.lam * tau;
        match self.variant() {
            ModelVariant::Vasicek => [-tau * e1(x), 0.0, 0.0],
            ModelVariant::Afns2 => [-tau, -tau * e1(x), 0.0],
            _ => [-tau, -tau * e1(x), -tau * G_B3.eval(x)],
        }
    }

    pub(crate) fn a(&self, tau: f64) -> f64 {
        let x = self.lam * tau;
        let t3 = tau * tau * tau;
        let [s1, s2, s3] = self.sig;
        match self.variant() {
            ModelVariant::Vasicek => 0.5 * s1 * s1 * t3 * H2.eval(x),
            ModelVariant::Afns2 => s1 * s1 * t3 / 6.0 + 0.5 * s2 * s2 * t3 * H2.eval(x),
            _ => s1 * s1 * t3 / 6.0 + 0.5 * s2 * s2 * t3 * H2.eval(x) + s3 * s3 * t3 * H3.eval(x),
        }
    }

    /// Deterministic part of E[int r] coming from rho0 and theta^Q.
    pub(crate) fn drift(&self, tau: f64, b: &V3) -> f64 {
        if self.variant() != ModelVariant::Vasicek {
            return 0.0;
        }
        self.params.rho0 * tau + self.rho1[0] * self.thq[0] * tau + b[0] * self.thq[0]
    }

    /// log p(t, t + tau) = a + b'x - drift.
    pub(crate) fn log_zcb3(&self, x: &V3, tau: f64) -> f64 {
        let b = self.b3(tau);
        self.a(tau) + dot(&b, x) - self.drift(tau, &b)
    }

    pub(crate) fn phi3(&self, tau: f64) -> M3 {
        let x = self.lam * tau;
        let e = (-x).exp();
        match self.variant() {
            ModelVariant::Vasicek => [[e, 0.0, 0.0], [0.0; 3], [0.0; 3]],
            ModelVariant::Afns2 => [[1.0, 0.0, 0.0], [0.0, e, 0.0], [0.0; 3]],
            _ => [[1.0, 0.0, 0.0], [0.0, e, x * e], [0.0, 0.0, e]],
        }
    }

    pub(crate) fn v3(&self, tau: f64) -> M3 {
        let x = self.lam * tau;
        let [s1, s2, s3] = self.sig;
        match self.variant() {
            ModelVariant::Vasicek => [[s1 * s1 * tau * e1(2.0 * x), 0.0, 0.0], [0.0; 3], [0.0; 3]],
            ModelVariant::Afns2 => [
                [s1 * s1 * tau, 0.0, 0.0],
                [0.0, s2 * s2 * tau * e1(2.0 * x), 0.0],
                [0.0; 3],
            ],
            _ => {
                let v22 = s2 * s2 * tau * e1(2.0 * x) + s3 * s3 * tau * W22.eval(x);
                let v23 = s3 * s3 * tau * W23.eval(x);
                let v33 = s3 * s3 * tau * e1(2.0 * x);
                [[s1 * s1 * tau, 0.0, 0.0], [0.0, v22, v23], [0.0, v23, v33]]
            }
        }
    }

    /// Q-conditional mean of the state after `tau`.
    pub(crate) fn mean3(&self, x: &V3, tau: f64) -> V3 {
        let phi = self.phi3(tau);
        let d = sub(x, &self.thq);
        let m = matvec(&phi, &d);
        [m[0] + self.thq[0], m[1] + self.thq[1], m[2] + self.thq[2]]
    }

    // ---- public operations ----

    pub fn loading_b(&self, tau: f64) -> Result<DVector<f64>> {
        check_tau(tau)?;
        Ok(DVector::from_column_slice(&self.b3(tau)[..self.n]))
    }

    pub fn loading_a(&self, tau: f64) -> Result<f64> {
        check_tau(tau)?;
        Ok(self.a(tau))
    }

    /// Risk-neutral transition matrix e^{-K^Q dt} and conditional covariance.
    pub fn q_transition(&self, dt: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Domain(format!("dt must be positive, got {dt}")));
        }
        Ok((to_dmatrix(&self.phi3(dt), self.n), to_dmatrix(&self.v3(dt), self.n)))
    }

    pub fn state_moments(&self, state: &[f64], tau: f64) -> Result<GaussianMoments> {
        check_tau(tau)?;
        let x = self.state3(state)?;
        Ok(GaussianMoments {
            mean: DVector::from_column_slice(&self.mean3(&x, tau)[..self.n]),
            cov: to_dmatrix(&self.v3(tau), self.n),
        })
    }

    /// Mean and variance of the integrated short rate over `tau`.
    pub fn integrated_rate_moments(&self, state: &[f64], tau: f64) -> Result<(f64, f64)> {
        self.require_gaussian("integrated_rate_moments")?;
        check_tau(tau)?;
        let x = self.state3(state)?;
        let b = self.b3(tau);
        Ok((self.drift(tau, &b) - dot(&b, &x), 2.0 * self.a(tau)))
    }

    pub fn short_rate(&self, state: &[f64]) -> Result<f64> {
        let x = self.state3(state)?;
        let r = self.params.rho0 + dot(&self.rho1, &x);
        Ok(if self.variant().is_shadow() { r.max(0.0) } else { r })
    }

    pub fn zcb_price(&self, state: &[f64], tau: f64) -> Result<f64> {
        check_tau(tau)?;
        let x = self.state3(state)?;
        if tau == 0.0 {
            return Ok(1.0);
        }
        if self.variant().is_shadow() {
            return crate::futures::shadow::shadow_zcb(self, state, tau, &QuadratureScheme::default());
        }
        Ok(self.log_zcb3(&x, tau).exp())
    }
}

// Free-function forms taking the variant descriptor explicitly.

fn model_for(spec: &ModelSpec, params: &ModelParams) -> Result<Model> {
    if spec.variant != params.variant || spec.n_factors != params.n() {
        return Err(Error::InvalidParams(format!(
            "spec {} does not match parameters for {}",
            spec.variant, params.variant
        )));
    }
    Model::new(params.clone())
}

pub fn loading_b(spec: &ModelSpec, params: &ModelParams, tau: f64) -> Result<DVector<f64>> {
    model_for(spec, params)?.loading_b(tau)
}

pub fn loading_a(spec: &ModelSpec, params: &ModelParams, tau: f64) -> Result<f64> {
    model_for(spec, params)?.loading_a(tau)
}

pub fn q_transition(spec: &ModelSpec, params: &ModelParams, dt: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    model_for(spec, params)?.q_transition(dt)
}

pub fn integrated_rate_moments(
    spec: &ModelSpec,
    params: &ModelParams,
    state: &StateVector,
    tau: f64,
) -> Result<(f64, f64)> {
    model_for(spec, params)?.integrated_rate_moments(&state.values, tau)
}

pub fn short_rate(spec: &ModelSpec, params: &ModelParams, state: &StateVector) -> Result<f64> {
    model_for(spec, params)?.short_rate(&state.values)
}

pub fn zcb_price(spec: &ModelSpec, params: &ModelParams, state: &StateVector, tau: f64) -> Result<f64> {
    model_for(spec, params)?.zcb_price(&state.values, tau)
}

// ---- small fixed-size helpers ----

pub(crate) fn dot(a: &V3, b: &V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn sub(a: &V3, b: &V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn matvec(m: &M3, v: &V3) -> V3 {
    [dot(&m[0], v), dot(&m[1], v), dot(&m[2], v)]
}

/// m' v
pub(crate) fn tmatvec(m: &M3, v: &V3) -> V3 {
    let mut out = [0.0; 3];
    for (i, row) in m.iter().enumerate() {
        for j in 0..3 {
            out[j] += row[j] * v[i];
        }
    }
    out
}

pub(crate) fn quad_form(m: &M3, v: &V3) -> f64 {
    dot(v, &matvec(m, v))
}

fn to_dmatrix(m: &M3, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| m[i][j])
}
