//! Extended Kalman filter over futures-rate panels.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::panel::{ObservationPanel, PanelRow};
use crate::futures::{futures_rate, AccrualWindow, ContractKind};
use crate::math::expfn::e1;
use crate::math::QuadratureScheme;
use crate::models::{dot, tmatvec, Model, ModelParams, M3, V3};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const FD_STEP: f64 = 1e-7;

/// Exact discretization of the physical dynamics over `dt`:
/// `X_t = C + F X_{t-1} + xi_t`, `xi_t ~ N(0, Q)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Discretization {
    pub f: DMatrix<f64>,
    pub c: DVector<f64>,
    pub q: DMatrix<f64>,
}

/// Discretizes the P-dynamics through the eigendecomposition of K^P, which
/// is diagonal for every supported variant (eigenvectors = identity).
pub fn discretize_p(params: &ModelParams, dt: f64) -> Result<Discretization> {
    params.validate()?;
    if !(dt > 0.0) {
        return Err(Error::Domain("dt must be positive".into()));
    }
    let n = params.n();
    let k = &params.k_p;
    if (0..n).any(|i| (0..n).any(|j| i != j && k[(i, j)] != 0.0)) {
        return Err(Error::InvalidParams("K^P must be diagonalizable (diagonal)".into()));
    }
    let lam: Vec<f64> = (0..n).map(|i| k[(i, i)]).collect();
    let g = &params.sigma * params.sigma.transpose();
    let f = DMatrix::from_fn(n, n, |i, j| if i == j { (-lam[i] * dt).exp() } else { 0.0 });
    let c = (DMatrix::identity(n, n) - &f) * &params.theta_p;
    let q = DMatrix::from_fn(n, n, |i, j| g[(i, j)] * dt * e1((lam[i] + lam[j]) * dt));
    Ok(Discretization { f, c, q })
}

/// Stationary covariance of the physical dynamics.
pub fn unconditional_cov(params: &ModelParams) -> DMatrix<f64> {
    let n = params.n();
    let g = &params.sigma * params.sigma.transpose();
    DMatrix::from_fn(n, n, |i, j| g[(i, j)] / (params.k_p[(i, i)] + params.k_p[(j, j)]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HStructure {
    /// One measurement-error standard deviation per contract kind (1m, 3m).
    #[default]
    PerKind,
    /// One per contract slot.
    PerSlot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementErrors {
    pub structure: HStructure,
    pub sd: Vec<f64>,
}

impl MeasurementErrors {
    pub fn per_kind(sd_1m: f64, sd_3m: f64) -> Self {
        Self {
            structure: HStructure::PerKind,
            sd: vec![sd_1m, sd_3m],
        }
    }

    pub fn uniform(structure: HStructure, sd: f64, n_slots: usize) -> Self {
        let n = match structure {
            HStructure::PerKind => 2,
            HStructure::PerSlot => n_slots,
        };
        Self {
            structure,
            sd: vec![sd; n],
        }
    }

    pub fn variance(&self, kind: ContractKind, slot: usize) -> Result<f64> {
        let i = match self.structure {
            HStructure::PerKind => kind.index(),
            HStructure::PerSlot => slot,
        };
        self.sd
            .get(i)
            .map(|s| s * s)
            .ok_or_else(|| Error::Data(format!("no measurement error for slot {slot}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterState {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    pub loglik_accum: f64,
}

impl FilterState {
    /// Start at the unconditional mean and covariance.
    pub fn initial(params: &ModelParams) -> Self {
        let p0 = unconditional_cov(params);
        let n = params.n();
        Self {
            mean: params.theta_p.iter().copied().collect(),
            cov: (0..n).map(|i| (0..n).map(|j| p0[(i, j)]).collect()).collect(),
            loglik_accum: 0.0,
        }
    }

    pub fn cov_matrix(&self) -> DMatrix<f64> {
        let n = self.mean.len();
        DMatrix::from_fn(n, n, |i, j| self.cov[i][j])
    }
}

// ---- measurement functions ----

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct WindowKey([f64; 6], ContractKind);

impl WindowKey {
    fn of(w: &AccrualWindow) -> Self {
        WindowKey(
            [w.start, w.end, w.remaining_start(), w.realized_sum, w.realized_growth, 0.0],
            w.kind,
        )
    }
}

#[derive(Clone, Debug)]
pub(crate) enum Measurement {
    /// rate = c0 + g'x
    Affine { c0: f64, g: V3 },
    /// rate = (scale * exp(k0 + k'x) - 1) / delta
    ExpAffine { scale: f64, k0: f64, k: V3, delta: f64 },
    /// evaluated by the pricer with a finite-difference Jacobian
    Numeric(AccrualWindow),
}

impl Measurement {
    pub(crate) fn new(model: &Model, w: &AccrualWindow) -> Result<Self> {
        if model.variant().is_shadow() {
            return Ok(Measurement::Numeric(w.clone()));
        }
        let a = w.remaining_start();
        if a < 0.0 || w.delta() <= 0.0 {
            return Err(Error::Domain("invalid accrual window".into()));
        }
        let delta = w.delta();
        Ok(match w.kind {
            ContractKind::OneMonth => {
                let (ba, be) = (model.b3(a), model.b3(w.end));
                let c0 = (w.realized_sum + model.drift(w.end, &be) - model.drift(a, &ba)) / delta;
                Measurement::Affine {
                    c0,
                    g: [(ba[0] - be[0]) / delta, (ba[1] - be[1]) / delta, (ba[2] - be[2]) / delta],
                }
            }
            ContractKind::ThreeMonth => {
                let len = w.end - a;
                let b = model.b3(len);
                let phi = model.phi3(a);
                // m(a) = theta + Phi (x - theta)
                let pb = tmatvec(&phi, &b);
                let th = model.thq;
                let v = model.v3(a);
                let k0 = model.a(len) + model.drift(len, &b) - dot(&b, &th) + dot(&pb, &th)
                    + 0.5 * crate::models::quad_form(&v, &b);
                Measurement::ExpAffine {
                    scale: w.realized_growth,
                    k0,
                    k: [-pb[0], -pb[1], -pb[2]],
                    delta,
                }
            }
        })
    }

    /// Value and gradient at `x`.
    pub(crate) fn eval(&self, model: &Model, x: &V3, quad: &QuadratureScheme) -> Result<(f64, V3)> {
        match self {
            Measurement::Affine { c0, g } => Ok((c0 + dot(g, x), *g)),
            Measurement::ExpAffine { scale, k0, k, delta } => {
                let e = scale * (k0 + dot(k, x)).exp();
                let s = e / delta;
                Ok(((e - 1.0) / delta, [s * k[0], s * k[1], s * k[2]]))
            }
            Measurement::Numeric(w) => {
                let n = model.n;
                let value = futures_rate(model, &x[..n], w, quad)?;
                let mut g = [0.0; 3];
                for i in 0..n {
                    let mut up = *x;
                    let mut dn = *x;
                    up[i] += FD_STEP;
                    dn[i] -= FD_STEP;
                    let fu = futures_rate(model, &up[..n], w, quad)?;
                    let fd = futures_rate(model, &dn[..n], w, quad)?;
                    g[i] = (fu - fd) / (2.0 * FD_STEP);
                }
                Ok((value, g))
            }
        }
    }
}

/// Per-slot cache of measurement functions, rebuilt only when a slot's
/// accrual window changes between rows.
#[derive(Default)]
pub(crate) struct MeasurementCache {
    slots: Vec<Option<(WindowKey, Measurement)>>,
}

impl MeasurementCache {
    pub(crate) fn get(&mut self, model: &Model, slot: usize, w: &AccrualWindow) -> Result<&Measurement> {
        if self.slots.len() <= slot {
            self.slots.resize_with(slot + 1, || None);
        }
        let key = WindowKey::of(w);
        let fresh = !matches!(&self.slots[slot], Some((k, _)) if *k == key);
        if fresh {
            self.slots[slot] = Some((key, Measurement::new(model, w)?));
        }
        Ok(&self.slots[slot].as_ref().expect("filled above").1)
    }
}

// ---- filtering ----

/// Fixed-size discretization used by the fast filter.
#[derive(Clone, Copy)]
pub(crate) struct Transition3 {
    f: V3,
    c: V3,
    q: M3,
}

impl Transition3 {
    pub(crate) fn new(params: &ModelParams, dt: f64) -> Result<Self> {
        let d = discretize_p(params, dt)?;
        let n = params.n();
        let mut t = Transition3 {
            f: [0.0; 3],
            c: [0.0; 3],
            q: [[0.0; 3]; 3],
        };
        for i in 0..n {
            t.f[i] = d.f[(i, i)];
            t.c[i] = d.c[i];
            for j in 0..n {
                t.q[i][j] = d.q[(i, j)];
            }
        }
        Ok(t)
    }
}

fn symmetrize(p: &mut M3) {
    for i in 0..3 {
        for j in 0..i {
            let v = 0.5 * (p[i][j] + p[j][i]);
            p[i][j] = v;
            p[j][i] = v;
        }
    }
}

fn is_psd(p: &M3, n: usize) -> bool {
    let mut l = [[0.0; 3]; 3];
    for i in 0..n {
        for j in 0..=i {
            let mut s = p[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s < -1e-300 {
                    return false;
                }
                l[i][i] = s.max(0.0).sqrt();
            } else if l[j][j] > 0.0 {
                l[i][j] = s / l[j][j];
            } else if s.abs() > 1e-30 {
                return false;
            }
        }
    }
    true
}

/// Clips negative eigenvalues to zero.
fn clip_psd(p: &mut M3, n: usize) {
    let m = DMatrix::from_fn(n, n, |i, j| p[i][j]);
    let eig = m.symmetric_eigen();
    let vals = eig.eigenvalues.map(|v| v.max(0.0));
    let fixed = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
    for i in 0..n {
        for j in 0..n {
            p[i][j] = fixed[(i, j)];
        }
    }
}

pub(crate) struct Filter<'a> {
    pub(crate) model: &'a Model,
    pub(crate) trans: Transition3,
    pub(crate) h: &'a MeasurementErrors,
    pub(crate) quad: &'a QuadratureScheme,
    pub(crate) cache: MeasurementCache,
    pub(crate) x: V3,
    pub(crate) p: M3,
    pub(crate) loglik: f64,
}

impl<'a> Filter<'a> {
    pub(crate) fn new(model: &'a Model, dt: f64, h: &'a MeasurementErrors, quad: &'a QuadratureScheme) -> Result<Self> {
        let init = FilterState::initial(model.params());
        let mut x = [0.0; 3];
        let mut p = [[0.0; 3]; 3];
        for i in 0..model.n {
            x[i] = init.mean[i];
            for j in 0..model.n {
                p[i][j] = init.cov[i][j];
            }
        }
        Ok(Self {
            model,
            trans: Transition3::new(model.params(), dt)?,
            h,
            quad,
            cache: MeasurementCache::default(),
            x,
            p,
            loglik: 0.0,
        })
    }

    /// Predict and update on one row, processing observations one at a
    /// time with the measurement linearized at the predicted state.
    pub(crate) fn step(&mut self, row: &PanelRow) -> Result<()> {
        let n = self.model.n;
        let t = &self.trans;
        let mut x = [0.0; 3];
        let mut p = [[0.0; 3]; 3];
        for i in 0..n {
            x[i] = t.c[i] + t.f[i] * self.x[i];
            for j in 0..n {
                p[i][j] = t.f[i] * self.p[i][j] * t.f[j] + t.q[i][j];
            }
        }
        let x_pred = x;
        for o in &row.observations {
            let meas = self.cache.get(self.model, o.slot, &o.window)?;
            let (value, g) = meas.eval(self.model, &x_pred, self.quad)?;
            let hv = self.h.variance(o.kind(), o.slot)?;
            // Linearized prediction at the current posterior.
            let dx = [x[0] - x_pred[0], x[1] - x_pred[1], x[2] - x_pred[2]];
            let nu = o.rate - value - dot(&g, &dx);
            let pg = [dot(&p[0], &g), dot(&p[1], &g), dot(&p[2], &g)];
            let s = hv + dot(&g, &pg);
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::Numerical(format!(
                    "innovation variance {s} not positive{}",
                    row.date.map_or(String::new(), |d| format!(" on {d}"))
                )));
            }
            for i in 0..n {
                x[i] += pg[i] * nu / s;
                for j in 0..n {
                    p[i][j] -= pg[i] * pg[j] / s;
                }
            }
            self.loglik -= 0.5 * (LN_2PI + s.ln() + nu * nu / s);
        }
        symmetrize(&mut p);
        if !is_psd(&p, n) {
            clip_psd(&mut p, n);
        }
        self.x = x;
        self.p = p;
        Ok(())
    }

    pub(crate) fn state(&self) -> FilterState {
        let n = self.model.n;
        FilterState {
            mean: self.x[..n].to_vec(),
            cov: (0..n).map(|i| self.p[i][..n].to_vec()).collect(),
            loglik_accum: self.loglik,
        }
    }
}

/// Gaussian log-likelihood of the panel from the extended Kalman filter.
pub fn log_likelihood(model: &Model, h: &MeasurementErrors, panel: &ObservationPanel, quad: &QuadratureScheme) -> Result<f64> {
    panel.validate()?;
    let mut f = Filter::new(model, panel.dt, h, quad)?;
    for row in &panel.rows {
        f.step(row)?;
    }
    Ok(f.loglik)
}

/// Filtered states after every row.
pub fn filter_states(
    model: &Model,
    h: &MeasurementErrors,
    panel: &ObservationPanel,
    quad: &QuadratureScheme,
) -> Result<Vec<FilterState>> {
    panel.validate()?;
    let mut f = Filter::new(model, panel.dt, h, quad)?;
    let mut out = Vec::with_capacity(panel.len());
    for row in &panel.rows {
        f.step(row)?;
        out.push(f.state());
    }
    Ok(out)
}

/// One filter step in matrix form: predict with the exact discretization,
/// then update on all observations of the row jointly.
pub fn ekf_step(
    model: &Model,
    disc: &Discretization,
    prior: &FilterState,
    row: &PanelRow,
    h: &MeasurementErrors,
    quad: &QuadratureScheme,
) -> Result<FilterState> {
    let n = model.n;
    let x_prior = DVector::from_column_slice(&prior.mean);
    let x_pred = &disc.c + &disc.f * x_prior;
    let p_pred = &disc.f * prior.cov_matrix() * disc.f.transpose() + &disc.q;
    let m = row.observations.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut nu = DVector::zeros(m);
    let mut hmat = DMatrix::zeros(m, m);
    let mut x3 = [0.0; 3];
    x3[..n].copy_from_slice(x_pred.as_slice());
    for (r, o) in row.observations.iter().enumerate() {
        let meas = Measurement::new(model, &o.window)?;
        let (value, g) = meas.eval(model, &x3, quad)?;
        for c in 0..n {
            jac[(r, c)] = g[c];
        }
        nu[r] = o.rate - value;
        hmat[(r, r)] = h.variance(o.kind(), o.slot)?;
    }
    let s = &hmat + &jac * &p_pred * jac.transpose();
    let chol = s.clone().cholesky().ok_or_else(|| {
        Error::Numerical(format!(
            "innovation covariance not invertible{}",
            row.date.map_or(String::new(), |d| format!(" on {d}"))
        ))
    })?;
    let s_inv_nu = chol.solve(&nu);
    let pj = &p_pred * jac.transpose();
    let gain = chol.solve(&pj.transpose()).transpose();
    let mean = &x_pred + &gain * &nu;
    let mut cov = &p_pred - &gain * &jac * &p_pred;
    cov = 0.5 * (&cov + cov.transpose());
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let ll = -0.5 * (m as f64 * LN_2PI + log_det + nu.dot(&s_inv_nu));
    Ok(FilterState {
        mean: mean.iter().copied().collect(),
        cov: (0..n).map(|i| (0..n).map(|j| cov[(i, j)]).collect()).collect(),
        loglik_accum: prior.loglik_accum + ll,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::study::{simulate_panel, SimStudyConfig};
    use crate::models::ModelVariant;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn reference() -> ModelParams {
        ModelParams::reference_afns3()
    }

    fn cfg(n_obs: usize, tick: f64) -> SimStudyConfig {
        SimStudyConfig {
            n_obs,
            tick,
            ..SimStudyConfig::default()
        }
    }

    fn one_month_cfg(n_obs: usize) -> SimStudyConfig {
        SimStudyConfig {
            tau_3m: vec![],
            ..cfg(n_obs, 0.0)
        }
    }

    fn panel(p: &ModelParams, c: &SimStudyConfig, seed: u64) -> ObservationPanel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        simulate_panel(p, c, &mut rng).unwrap().0
    }

    #[test]
    fn scalar_ou_variance() {
        let p = reference();
        let dt = 1.0 / 250.0;
        let d = discretize_p(&p, dt).unwrap();
        for i in 0..3 {
            let (s, k) = (p.sigma[(i, i)], p.k_p[(i, i)]);
            let expect = s * s * (1.0 - (-2.0 * k * dt).exp()) / (2.0 * k);
            assert!((d.q[(i, i)] / expect - 1.0).abs() < 1e-12);
            assert!((d.f[(i, i)] - (-k * dt).exp()).abs() < 1e-16);
            assert!((d.c[i] - (1.0 - d.f[(i, i)]) * p.theta_p[i]).abs() < 1e-18);
        }
    }

    #[test]
    fn discretized_covariance_matches_quadrature() {
        let p = reference();
        let dt = 0.7;
        let d = discretize_p(&p, dt).unwrap();
        let g = &p.sigma * p.sigma.transpose();
        let k = p.k_p_diag();
        let m = 20_000;
        let h = dt / m as f64;
        for i in 0..3 {
            for j in 0..3 {
                let f = |u: f64| (-(k[i] + k[j]) * u).exp() * g[(i, j)];
                let mut s = f(0.0) + f(dt);
                for n in 1..m {
                    s += if n % 2 == 1 { 4.0 } else { 2.0 } * f(n as f64 * h);
                }
                let quad = s * h / 3.0;
                assert!((d.q[(i, j)] - quad).abs() < 1e-14, "{i}{j}");
            }
        }
    }

    #[test]
    fn small_dt_covariance_is_first_order() {
        let p = reference();
        let dt = 1e-8;
        let d = discretize_p(&p, dt).unwrap();
        for i in 0..3 {
            let ratio = d.q[(i, i)] / (p.sigma[(i, i)].powi(2) * dt);
            assert!((ratio - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn huge_measurement_error_leaves_prediction() {
        let p = reference();
        let model = Model::new(p.clone()).unwrap();
        let pan = panel(&p, &cfg(1, 0.0), 1);
        let d = discretize_p(&p, pan.dt).unwrap();
        let prior = FilterState::initial(&p);
        let h = MeasurementErrors::per_kind(1e3, 1e3);
        let post = ekf_step(&model, &d, &prior, &pan.rows[0], &h, &QuadratureScheme::default()).unwrap();
        let pred = &d.c + &d.f * DVector::from_column_slice(&prior.mean);
        for i in 0..3 {
            assert!((post.mean[i] - pred[i]).abs() < 1e-12);
        }
    }

    /// Plain linear Kalman filter for `y = c0 + G x + e`.
    fn linear_kf(p: &ModelParams, pan: &ObservationPanel, h_sd: f64) -> Vec<(DVector<f64>, DMatrix<f64>, f64)> {
        let model = Model::new(p.clone()).unwrap();
        let d = discretize_p(p, pan.dt).unwrap();
        let mut x = p.theta_p.clone();
        let mut cov = unconditional_cov(p);
        let mut ll = 0.0;
        let mut out = vec![];
        for row in &pan.rows {
            let m = row.observations.len();
            let mut g = DMatrix::zeros(m, 3);
            let mut c0 = DVector::zeros(m);
            let mut y = DVector::zeros(m);
            for (r, o) in row.observations.iter().enumerate() {
                let w = &o.window;
                let ba = model.loading_b(w.start).unwrap();
                let be = model.loading_b(w.end).unwrap();
                for c in 0..3 {
                    g[(r, c)] = (ba[c] - be[c]) / w.delta();
                }
                c0[r] = 0.0;
                y[r] = o.rate;
            }
            x = &d.c + &d.f * &x;
            cov = &d.f * &cov * d.f.transpose() + &d.q;
            let s = DMatrix::identity(m, m) * h_sd * h_sd + &g * &cov * g.transpose();
            let chol = s.clone().cholesky().unwrap();
            let nu = &y - &c0 - &g * &x;
            let k = chol.solve(&(&g * &cov)).transpose();
            x = &x + &k * &nu;
            cov = (DMatrix::identity(3, 3) - &k * &g) * &cov;
            ll += -0.5 * (m as f64 * (2.0 * std::f64::consts::PI).ln() + s.determinant().ln() + nu.dot(&chol.solve(&nu)));
            out.push((x.clone(), cov.clone(), ll));
        }
        out
    }

    #[test]
    fn one_month_panel_equals_linear_kalman_filter() {
        let p = reference();
        let model = Model::new(p.clone()).unwrap();
        let pan = panel(&p, &one_month_cfg(100), 3);
        let h = MeasurementErrors::per_kind(1e-4, 1e-4);
        let states = filter_states(&model, &h, &pan, &QuadratureScheme::default()).unwrap();
        let exact = linear_kf(&p, &pan, 1e-4);
        for (s, (x, c, ll)) in states.iter().zip(&exact) {
            for i in 0..3 {
                assert!((s.mean[i] - x[i]).abs() < 1e-14, "{} {}", s.mean[i], x[i]);
                for j in 0..3 {
                    assert!((s.cov[i][j] - c[(i, j)]).abs() < 1e-14);
                }
            }
            assert!((s.loglik_accum - ll).abs() < 1e-14 * ll.abs().max(1.0));
        }
    }

    #[test]
    fn batch_step_matches_dense_reference() {
        let p = reference();
        let model = Model::new(p.clone()).unwrap();
        let pan = panel(&p, &cfg(1, 0.0), 5);
        let row = &pan.rows[0];
        let d = discretize_p(&p, pan.dt).unwrap();
        let prior = FilterState::initial(&p);
        let hsd = [2e-5, 3e-5];
        let h = MeasurementErrors::per_kind(hsd[0], hsd[1]);
        let quad = QuadratureScheme::default();
        let got = ekf_step(&model, &d, &prior, row, &h, &quad).unwrap();

        // Reference: prediction, prices at the prediction and analytic
        // Jacobians from the public loadings and Q-transition.
        let xp = &d.c + &d.f * DVector::from_column_slice(&prior.mean);
        let pp = &d.f * prior.cov_matrix() * d.f.transpose() + &d.q;
        let m = row.observations.len();
        let mut jac = DMatrix::zeros(m, 3);
        let mut nu = DVector::zeros(m);
        let mut hm = DMatrix::zeros(m, m);
        for (r, o) in row.observations.iter().enumerate() {
            let w = &o.window;
            let rate = futures_rate(&model, xp.as_slice(), w, &quad).unwrap();
            nu[r] = o.rate - rate;
            hm[(r, r)] = hsd[o.kind().index()].powi(2);
            let row_j: Vec<f64> = match o.kind() {
                ContractKind::OneMonth => {
                    let ba = model.loading_b(w.start).unwrap();
                    let be = model.loading_b(w.end).unwrap();
                    (0..3).map(|c| (ba[c] - be[c]) / w.delta()).collect()
                }
                ContractKind::ThreeMonth => {
                    let b = model.loading_b(w.end - w.start).unwrap();
                    let phi = if w.start > 0.0 {
                        model.q_transition(w.start).unwrap().0
                    } else {
                        DMatrix::identity(3, 3)
                    };
                    let pb = phi.transpose() * b;
                    (0..3).map(|c| -(rate + 1.0 / w.delta()) * pb[c]).collect()
                }
            };
            for c in 0..3 {
                jac[(r, c)] = row_j[c];
            }
        }
        let s = &hm + &jac * &pp * jac.transpose();
        let s_inv = s.clone().try_inverse().unwrap();
        let k = &pp * jac.transpose() * &s_inv;
        let x = &xp + &k * &nu;
        let cov = &pp - &k * &jac * &pp;
        for i in 0..3 {
            assert!((got.mean[i] - x[i]).abs() < 1e-12);
            for j in 0..3 {
                assert!((got.cov[i][j] - cov[(i, j)]).abs() < 1e-12);
            }
        }
        let ll = -0.5 * (m as f64 * LN_2PI + s.determinant().ln() + (nu.transpose() * &s_inv * &nu)[0]);
        assert!((got.loglik_accum - ll).abs() < 1e-9 * ll.abs());
    }

    #[test]
    fn sequential_filter_matches_batch_steps() {
        let p = reference();
        let model = Model::new(p.clone()).unwrap();
        let pan = panel(&p, &cfg(30, 0.5e-4), 11);
        let h = MeasurementErrors::per_kind(1.5e-5, 2e-5);
        let quad = QuadratureScheme::default();
        let seq = filter_states(&model, &h, &pan, &quad).unwrap();
        let d = discretize_p(&p, pan.dt).unwrap();
        let mut st = FilterState::initial(&p);
        for (row, s) in pan.rows.iter().zip(&seq) {
            st = ekf_step(&model, &d, &st, row, &h, &quad).unwrap();
            for i in 0..3 {
                assert!((st.mean[i] - s.mean[i]).abs() < 1e-12);
            }
        }
        assert!((st.loglik_accum - seq.last().unwrap().loglik_accum).abs() < 1e-8 * st.loglik_accum.abs());
    }

    #[test]
    fn scalar_gaussian_density() {
        let p = ModelParams::vasicek(0.3, 0.02, 0.01, 0.5, 0.01).unwrap();
        let model = Model::new(p.clone()).unwrap();
        let w = AccrualWindow::stylized(ContractKind::OneMonth, 0.25, 30);
        let y = 0.013;
        let pan = ObservationPanel {
            rows: vec![PanelRow {
                date: None,
                observations: vec![crate::estimation::Observation {
                    contract_id: "A".into(),
                    slot: 0,
                    window: w.clone(),
                    rate: y,
                }],
            }],
            dt: 0.01,
        };
        let hsd = 3e-4;
        let h = MeasurementErrors::per_kind(hsd, hsd);
        let ll = log_likelihood(&model, &h, &pan, &QuadratureScheme::default()).unwrap();
        // x_1 ~ N(theta, sigma^2/(2k)) unconditionally, and y is affine in x.
        let (k, s, th) = (0.5f64, 0.01f64, 0.01f64);
        let var_x = s * s / (2.0 * k);
        let e = 0.3f64;
        let b = |t: f64| -(1.0 - (-e * t).exp()) / e;
        let g = (b(w.start) - b(w.end)) / w.delta();
        let integral = |t: f64| 0.02 * t + 0.02 * b(t);
        let c0 = (integral(w.end) - integral(w.start)) / w.delta();
        let mean = c0 + g * th;
        let var = g * g * var_x + hsd * hsd;
        let expect = -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + (y - mean).powi(2) / var);
        assert!((ll - expect).abs() < 1e-12, "{ll} {expect}");
    }

    #[test]
    fn likelihood_ignores_row_order() {
        let p = reference();
        let model = Model::new(p.clone()).unwrap();
        let mut pan = panel(&p, &cfg(40, 0.5e-4), 2);
        let h = MeasurementErrors::per_kind(1.5e-5, 1.5e-5);
        let quad = QuadratureScheme::default();
        let a = log_likelihood(&model, &h, &pan, &quad).unwrap();
        for row in &mut pan.rows {
            row.observations.reverse();
        }
        let b = log_likelihood(&model, &h, &pan, &quad).unwrap();
        assert!((a - b).abs() < 1e-8 * a.abs(), "{a} {b}");
    }

    #[test]
    fn covariance_stays_psd() {
        let p = reference();
        let model = Model::new(p.clone()).unwrap();
        let pan = panel(&p, &cfg(200, 0.5e-4), 4);
        let h = MeasurementErrors::per_kind(1e-7, 1e-7);
        for s in filter_states(&model, &h, &pan, &QuadratureScheme::default()).unwrap() {
            let m = s.cov_matrix();
            assert!((&m - m.transpose()).amax() == 0.0);
            assert!(m.symmetric_eigen().eigenvalues.min() >= -1e-10);
        }
    }

    #[test]
    fn shadow_filter_runs_with_numeric_jacobian() {
        let p = ModelParams::reference_shadow();
        let model = Model::new(p.clone()).unwrap();
        let c = SimStudyConfig {
            tau_1m: vec![0.0, 30.0 / 360.0],
            tau_3m: vec![90.0 / 360.0],
            ..cfg(5, 0.0)
        };
        let pan = panel(&p, &c, 9);
        let h = MeasurementErrors::per_kind(1e-4, 1e-4);
        let quad = QuadratureScheme {
            tolerance: 1e-10,
            ..QuadratureScheme::default()
        };
        let states = filter_states(&model, &h, &pan, &quad).unwrap();
        assert!(states.iter().all(|s| s.loglik_accum.is_finite()));
        // The FD gradient of an affine-in-state region should match the
        // Gaussian Jacobian when rates are far above zero.
        let w = &pan.rows[0].observations[0].window;
        let x: V3 = [0.05, 0.0, 0.0];
        let (_, g) = Measurement::new(&model, w).unwrap().eval(&model, &x, &quad).unwrap();
        let gauss = Model::new(p.with_variant(ModelVariant::Afns3).unwrap()).unwrap();
        let (_, ge) = Measurement::new(&gauss, w).unwrap().eval(&gauss, &x, &quad).unwrap();
        for i in 0..3 {
            assert!((g[i] - ge[i]).abs() < 1e-4, "{g:?} {ge:?}");
        }
    }

    #[test]
    fn truth_beats_perturbed_lambda() {
        let p = reference();
        let model = Model::new(p.clone()).unwrap();
        let h = MeasurementErrors::per_kind(1e-6, 1e-6);
        let quad = QuadratureScheme::default();
        for seed in 0..20 {
            let pan = panel(&p, &cfg(60, 0.0), 100 + seed);
            let base = log_likelihood(&model, &h, &pan, &quad).unwrap();
            for f in [0.9, 1.1] {
                let mut q = p.clone();
                q.lambda *= f;
                let ll = log_likelihood(&Model::new(q).unwrap(), &h, &pan, &quad).unwrap();
                assert!(base >= ll, "seed {seed} factor {f}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn likelihood_gradient_is_finite(f in proptest::collection::vec(0.8..1.2f64, 8)) {
            let p = reference();
            let pan = panel(&p, &cfg(30, 0.5e-4), 77);
            let mut q = p.clone();
            q.lambda *= f[0];
            for i in 0..3 {
                q.sigma[(i, i)] *= f[1 + i];
                q.k_p[(i, i)] *= f[4 + i];
            }
            let h = MeasurementErrors::per_kind(1.5e-5 * f[7], 1.5e-5 * f[7]);
            let quad = QuadratureScheme::default();
            let ll = |q: &ModelParams| log_likelihood(&Model::new(q.clone()).unwrap(), &h, &pan, &quad).unwrap();
            let eps = 1e-6;
            let mut up = q.clone();
            up.lambda += eps;
            let mut dn = q.clone();
            dn.lambda -= eps;
            let g = (ll(&up) - ll(&dn)) / (2.0 * eps);
            prop_assert!(g.is_finite());
            for i in 0..3 {
                let mut up = q.clone();
                up.sigma[(i, i)] *= 1.0 + eps;
                let mut dn = q.clone();
                dn.sigma[(i, i)] *= 1.0 - eps;
                prop_assert!(((ll(&up) - ll(&dn)) / (2.0 * eps)).is_finite());
            }
        }
    }
}
