//! Path simulation with deterministic chunked random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Model, M3, V3};

/// Paths per random stream. Each chunk draws from its own ChaCha stream
/// (`seed`, stream = chunk index), so results do not depend on how chunks
/// are scheduled across threads.
pub const CHUNK_PATHS: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    P,
    Q,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    /// Exact Gaussian transitions for Gaussian variants, Euler for the shadow model.
    #[default]
    Auto,
    Exact,
    Euler,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    pub antithetic: bool,
    #[serde(default)]
    pub sampler: Sampler,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            dt: 1.0 / 3600.0,
            seed: 20_240_601,
            antithetic: true,
            sampler: Sampler::Auto,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 2 {
            return Err(Error::Domain("need at least two paths".into()));
        }
        if !(self.dt > 0.0 && self.dt <= 1.0 / 360.0 + 1e-15) {
            return Err(Error::Domain("dt must lie in (0, 1/360]".into()));
        }
        self.steps_per_day()?;
        Ok(())
    }

    /// Time steps per day; dt must divide 1/360.
    pub fn steps_per_day(&self) -> Result<usize> {
        let k = 1.0 / (360.0 * self.dt);
        let r = k.round();
        if r < 1.0 || (k - r).abs() > 1e-9 {
            return Err(Error::Domain(format!("dt = {} does not divide one day", self.dt)));
        }
        Ok(r as usize)
    }

    fn samples(&self) -> usize {
        if self.antithetic {
            self.n_paths / 2
        } else {
            self.n_paths
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// One simulated path: cumulative integral of the short rate on the grid
/// (`cum[k]` = int_0^{k dt} r) and the state at the requested snapshot steps.
pub struct PathRecord<'a> {
    pub cum: &'a [f64],
    pub snaps: &'a [V3],
}

#[derive(Clone, Copy)]
enum Step {
    Exact { phi: M3, mean_shift: V3, chol: M3 },
    Euler { drift: M3, level: V3, vol: V3 },
}

pub(crate) struct Stepper {
    step: Step,
    n: usize,
    shadow: bool,
    rho0: f64,
    rho1: V3,
}

fn cholesky3(m: &M3, n: usize) -> M3 {
    let mut l = [[0.0; 3]; 3];
    for i in 0..n {
        for j in 0..=i {
            let mut s = m[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                l[i][i] = s.max(0.0).sqrt();
            } else if l[j][j] > 0.0 {
                l[i][j] = s / l[j][j];
            }
        }
    }
    l
}

impl Stepper {
    pub(crate) fn new(model: &Model, measure: Measure, dt: f64, sampler: Sampler) -> Self {
        let n = model.n;
        let exact = match sampler {
            Sampler::Auto => !model.variant().is_shadow(),
            Sampler::Exact => true,
            Sampler::Euler => false,
        };
        let step = match (measure, exact) {
            (Measure::Q, true) => {
                let phi = model.phi3(dt);
                let mut shift = [0.0; 3];
                for i in 0..3 {
                    shift[i] = model.thq[i] - (0..3).map(|j| phi[i][j] * model.thq[j]).sum::<f64>();
                }
                Step::Exact {
                    phi,
                    mean_shift: shift,
                    chol: cholesky3(&model.v3(dt), n),
                }
            }
            (Measure::P, true) => {
                let mut phi = [[0.0; 3]; 3];
                let mut shift = [0.0; 3];
                let mut chol = [[0.0; 3]; 3];
                for i in 0..n {
                    let f = (-model.kp[i] * dt).exp();
                    phi[i][i] = f;
                    shift[i] = (1.0 - f) * model.thp[i];
                    let q = model.sig[i] * model.sig[i] * dt * crate::math::expfn::e1(2.0 * model.kp[i] * dt);
                    chol[i][i] = q.sqrt();
                }
                Step::Exact {
                    phi,
                    mean_shift: shift,
                    chol,
                }
            }
            (Measure::Q, false) => {
                // dX = K^Q (theta^Q - X) dt + Sigma dW
                let mut drift = [[0.0; 3]; 3];
                let l = model.lam;
                match model.variant() {
                    crate::models::ModelVariant::Vasicek => drift[0][0] = l,
                    crate::models::ModelVariant::Afns2 => drift[1][1] = l,
                    _ => {
                        drift[1][1] = l;
                        drift[1][2] = -l;
                        drift[2][2] = l;
                    }
                }
                let level = model.thq;
                Step::Euler {
                    drift: scale3(&drift, dt),
                    level,
                    vol: [model.sig[0] * dt.sqrt(), model.sig[1] * dt.sqrt(), model.sig[2] * dt.sqrt()],
                }
            }
            (Measure::P, false) => {
                let mut drift = [[0.0; 3]; 3];
                for i in 0..n {
                    drift[i][i] = model.kp[i];
                }
                Step::Euler {
                    drift: scale3(&drift, dt),
                    level: model.thp,
                    vol: [model.sig[0] * dt.sqrt(), model.sig[1] * dt.sqrt(), model.sig[2] * dt.sqrt()],
                }
            }
        };
        Self {
            step,
            n,
            shadow: model.variant().is_shadow(),
            rho0: model.params().rho0,
            rho1: model.rho1,
        }
    }

    pub(crate) fn rate(&self, x: &V3) -> f64 {
        let r = self.rho0 + self.rho1[0] * x[0] + self.rho1[1] * x[1] + self.rho1[2] * x[2];
        if self.shadow {
            r.max(0.0)
        } else {
            r
        }
    }

    #[inline]
    pub(crate) fn advance(&self, x: &V3, z: &V3) -> V3 {
        let n = self.n;
        let mut out = [0.0; 3];
        match &self.step {
            Step::Exact { phi, mean_shift, chol } => {
                for i in 0..n {
                    let mut v = mean_shift[i];
                    for j in 0..n {
                        v += phi[i][j] * x[j] + chol[i][j] * z[j];
                    }
                    out[i] = v;
                }
            }
            Step::Euler { drift, level, vol } => {
                for i in 0..n {
                    let mut d = 0.0;
                    for j in 0..n {
                        d += drift[i][j] * (level[j] - x[j]);
                    }
                    out[i] = x[i] + d + vol[i] * z[i];
                }
            }
        }
        out
    }
}

fn scale3(m: &M3, s: f64) -> M3 {
    let mut out = *m;
    for row in out.iter_mut() {
        for v in row.iter_mut() {
            *v *= s;
        }
    }
    out
}

/// Welford accumulator over a vector of outputs.
#[derive(Clone, Debug)]
struct Acc {
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Acc {
    fn new(k: usize) -> Self {
        Self {
            n: 0.0,
            mean: vec![0.0; k],
            m2: vec![0.0; k],
        }
    }

    fn push(&mut self, v: &[f64]) {
        self.n += 1.0;
        for i in 0..v.len() {
            let d = v[i] - self.mean[i];
            self.mean[i] += d / self.n;
            self.m2[i] += d * (v[i] - self.mean[i]);
        }
    }

    fn merge(&mut self, o: &Acc) {
        if o.n == 0.0 {
            return;
        }
        let n = self.n + o.n;
        for i in 0..self.mean.len() {
            let d = o.mean[i] - self.mean[i];
            self.mean[i] += d * o.n / n;
            self.m2[i] += o.m2[i] + d * d * self.n * o.n / n;
        }
        self.n = n;
    }
}

/// Simulates paths from `x0` over `n_steps` grid steps and returns the Monte
/// Carlo mean and standard error of each of the `n_out` functionals
/// evaluated by `f`. Antithetic pairs are averaged before accumulation.
#[allow(clippy::too_many_arguments)]
pub(crate) fn estimate<F>(
    model: &Model,
    measure: Measure,
    x0: &V3,
    n_steps: usize,
    snap_steps: &[usize],
    n_out: usize,
    mc: &McConfig,
    f: F,
) -> Result<Vec<McEstimate>>
where
    F: Fn(&PathRecord, &mut [f64]) + Sync,
{
    mc.validate()?;
    let stepper = Stepper::new(model, measure, mc.dt, mc.sampler);
    let samples = mc.samples();
    let per_chunk = if mc.antithetic { CHUNK_PATHS / 2 } else { CHUNK_PATHS };
    let n_chunks = samples.div_ceil(per_chunk);

    let run_chunk = |chunk: usize| -> Acc {
        let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
        rng.set_stream(chunk as u64);
        let count = per_chunk.min(samples - chunk * per_chunk);
        let mut acc = Acc::new(n_out);
        let mut cum = vec![0.0; n_steps + 1];
        let mut cum_b = vec![0.0; n_steps + 1];
        let mut snaps = vec![[0.0; 3]; snap_steps.len()];
        let mut snaps_b = vec![[0.0; 3]; snap_steps.len()];
        let mut out = vec![0.0; n_out];
        let mut out_b = vec![0.0; n_out];
        let mut zs = vec![[0.0; 3]; n_steps];
        for _ in 0..count {
            for z in zs.iter_mut() {
                for v in z.iter_mut().take(stepper.n) {
                    *v = StandardNormal.sample(&mut rng);
                }
            }
            run_path(&stepper, x0, &zs, 1.0, snap_steps, &mut cum, &mut snaps, mc.dt);
            f(&PathRecord { cum: &cum, snaps: &snaps }, &mut out);
            if mc.antithetic {
                run_path(&stepper, x0, &zs, -1.0, snap_steps, &mut cum_b, &mut snaps_b, mc.dt);
                f(&PathRecord { cum: &cum_b, snaps: &snaps_b }, &mut out_b);
                for (a, b) in out.iter_mut().zip(&out_b) {
                    *a = 0.5 * (*a + *b);
                }
            }
            acc.push(&out);
        }
        acc
    };

    #[cfg(feature = "parallel")]
    let accs: Vec<Acc> = {
        use rayon::prelude::*;
        (0..n_chunks).into_par_iter().map(run_chunk).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let accs: Vec<Acc> = (0..n_chunks).map(run_chunk).collect();

    let mut total = Acc::new(n_out);
    for a in &accs {
        total.merge(a);
    }
    let n = total.n;
    Ok((0..n_out)
        .map(|i| McEstimate {
            mean: total.mean[i],
            std_error: if n > 1.0 { (total.m2[i] / (n - 1.0) / n).sqrt() } else { 0.0 },
        })
        .collect())
}

#[allow(clippy::too_many_arguments)]
fn run_path(
    stepper: &Stepper,
    x0: &V3,
    zs: &[V3],
    sign: f64,
    snap_steps: &[usize],
    cum: &mut [f64],
    snaps: &mut [V3],
    dt: f64,
) {
    let mut x = *x0;
    let mut r = stepper.rate(&x);
    cum[0] = 0.0;
    let mut next_snap = 0;
    while next_snap < snap_steps.len() && snap_steps[next_snap] == 0 {
        snaps[next_snap] = x;
        next_snap += 1;
    }
    for (k, z) in zs.iter().enumerate() {
        let zz = [sign * z[0], sign * z[1], sign * z[2]];
        x = stepper.advance(&x, &zz);
        let r_next = stepper.rate(&x);
        cum[k + 1] = cum[k] + 0.5 * dt * (r + r_next);
        r = r_next;
        while next_snap < snap_steps.len() && snap_steps[next_snap] == k + 1 {
            snaps[next_snap] = x;
            next_snap += 1;
        }
    }
}

/// Full state paths, for inspection and small studies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub times: Vec<f64>,
    /// `paths[p][k]` is the state of path `p` at `times[k]`.
    pub paths: Vec<Vec<Vec<f64>>>,
}

/// Simulates and stores `mc.n_paths` state paths up to `horizon` years,
/// recording every `record_every` steps. Antithetic partners are stored
/// as consecutive paths.
pub fn simulate_paths(
    model: &Model,
    measure: Measure,
    x0: &[f64],
    horizon: f64,
    record_every: usize,
    mc: &McConfig,
) -> Result<PathEnsemble> {
    mc.validate()?;
    let x0 = model.state3(x0)?;
    let n_steps = (horizon / mc.dt).round() as usize;
    let every = record_every.max(1);
    let stepper = Stepper::new(model, measure, mc.dt, mc.sampler);
    let n = model.n;
    let times: Vec<f64> = (0..=n_steps).step_by(every).map(|k| k as f64 * mc.dt).collect();
    let per_chunk = if mc.antithetic { CHUNK_PATHS / 2 } else { CHUNK_PATHS };
    let samples = mc.samples();
    let mut paths = Vec::with_capacity(mc.n_paths);
    for chunk in 0..samples.div_ceil(per_chunk) {
        let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
        rng.set_stream(chunk as u64);
        let count = per_chunk.min(samples - chunk * per_chunk);
        for _ in 0..count {
            let zs: Vec<V3> = (0..n_steps)
                .map(|_| {
                    let mut z = [0.0; 3];
                    for v in z.iter_mut().take(n) {
                        *v = StandardNormal.sample(&mut rng);
                    }
                    z
                })
                .collect();
            let signs: &[f64] = if mc.antithetic { &[1.0, -1.0] } else { &[1.0] };
            for &sign in signs {
                let mut x = x0;
                let mut path = vec![x[..n].to_vec()];
                for (k, z) in zs.iter().enumerate() {
                    x = stepper.advance(&x, &[sign * z[0], sign * z[1], sign * z[2]]);
                    if (k + 1) % every == 0 {
                        path.push(x[..n].to_vec());
                    }
                }
                paths.push(path);
            }
        }
    }
    Ok(PathEnsemble { times, paths })
}

/// Grid index of a time that lies on a day boundary.
pub(crate) fn day_index(t: f64, steps_per_day: usize) -> usize {
    ((t * 360.0).round() as usize) * steps_per_day
}
