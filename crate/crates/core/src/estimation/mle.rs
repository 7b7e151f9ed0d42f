//! Maximum-likelihood estimation with Nelder-Mead and jittered restarts.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::filter::{FilterState, Filter, HStructure, MeasurementErrors};
use crate::estimation::optimizer::{nelder_mead, NelderMeadOptions};
use crate::estimation::panel::ObservationPanel;
use crate::math::QuadratureScheme;
use crate::models::{Model, ModelParams, ModelVariant};

const MAX_POLISH: usize = 20;

#[derive(Clone, Debug)]
pub struct EstimationOptions {
    pub ftol: f64,
    pub max_evals: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Relative simplex displacement per coordinate.
    pub initial_step: f64,
    pub quadrature: QuadratureScheme,
}

impl Default for EstimationOptions {
    fn default() -> Self {
        Self {
            ftol: 0.01,
            max_evals: 20_000,
            restarts: 3,
            seed: 7,
            initial_step: 0.1,
            quadrature: QuadratureScheme::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub iterations: usize,
    pub evaluations: usize,
    pub spread: f64,
    pub converged: bool,
    pub restarts_used: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EstimationResult {
    pub params: ModelParams,
    pub measurement_errors: MeasurementErrors,
    pub final_filter: FilterState,
    pub loglik: f64,
    pub convergence: Convergence,
}

impl EstimationResult {
    pub fn measurement_error_sd(&self) -> &[f64] {
        &self.measurement_errors.sd
    }
}

/// Maps parameters to unconstrained optimizer coordinates and back.
#[derive(Clone, Debug)]
pub(crate) struct Packing {
    template: ModelParams,
    structure: HStructure,
    n_h: usize,
}

impl Packing {
    pub(crate) fn new(template: &ModelParams, h: &MeasurementErrors) -> Self {
        Self {
            template: template.clone(),
            structure: h.structure,
            n_h: h.sd.len(),
        }
    }

    pub(crate) fn pack(&self, p: &ModelParams, h: &MeasurementErrors) -> Result<(Vec<f64>, Vec<bool>)> {
        let mut x = Vec::new();
        let mut is_log = Vec::new();
        let push_log = |x: &mut Vec<f64>, is_log: &mut Vec<bool>, v: f64, what: &str| -> Result<()> {
            if !(v > 0.0) {
                return Err(Error::InvalidParams(format!("{what} must be positive to start estimation")));
            }
            x.push(v.ln());
            is_log.push(true);
            Ok(())
        };
        push_log(&mut x, &mut is_log, p.lambda, "lambda")?;
        if p.variant == ModelVariant::Vasicek {
            x.push(p.theta_q[0]);
            is_log.push(false);
        }
        for s in p.sigma_diag() {
            push_log(&mut x, &mut is_log, s, "sigma")?;
        }
        for k in p.k_p_diag() {
            push_log(&mut x, &mut is_log, k, "K^P")?;
        }
        for t in p.theta_p.iter() {
            x.push(*t);
            is_log.push(false);
        }
        for s in &h.sd {
            push_log(&mut x, &mut is_log, *s, "measurement error")?;
        }
        Ok((x, is_log))
    }

    pub(crate) fn unpack(&self, x: &[f64]) -> Result<(ModelParams, MeasurementErrors)> {
        let t = &self.template;
        let n = t.n();
        let mut i = 0;
        let mut next = || {
            let v = x[i];
            i += 1;
            v
        };
        let lambda = next().exp();
        let theta_q = if t.variant == ModelVariant::Vasicek { next() } else { 0.0 };
        let sigma: Vec<f64> = (0..n).map(|_| next().exp()).collect();
        let k_p: Vec<f64> = (0..n).map(|_| next().exp()).collect();
        let theta_p: Vec<f64> = (0..n).map(|_| next()).collect();
        let sd: Vec<f64> = (0..self.n_h).map(|_| next().exp()).collect();
        let mut p = ModelParams::from_diagonals(t.variant, lambda, &sigma, &k_p, &theta_p)?;
        if t.variant == ModelVariant::Vasicek {
            p.theta_q[0] = theta_q;
        }
        p.rho0 = t.rho0;
        p.validate()?;
        Ok((
            p,
            MeasurementErrors {
                structure: self.structure,
                sd,
            },
        ))
    }
}

fn negative_loglik(packing: &Packing, x: &[f64], panel: &ObservationPanel, quad: &QuadratureScheme) -> f64 {
    let Ok((p, h)) = packing.unpack(x) else {
        return f64::INFINITY;
    };
    let Ok(model) = Model::new(p) else {
        return f64::INFINITY;
    };
    match run_filter(&model, &h, panel, quad) {
        Ok((ll, _)) if ll.is_finite() => -ll,
        _ => f64::INFINITY,
    }
}

fn run_filter(model: &Model, h: &MeasurementErrors, panel: &ObservationPanel, quad: &QuadratureScheme) -> Result<(f64, FilterState)> {
    let mut f = Filter::new(model, panel.dt, h, quad)?;
    for row in &panel.rows {
        f.step(row)?;
    }
    Ok((f.loglik, f.state()))
}

/// Maximizes the filter likelihood over the model parameters and the
/// measurement-error standard deviations.
pub fn estimate(
    panel: &ObservationPanel,
    init: &ModelParams,
    init_h: &MeasurementErrors,
    opts: &EstimationOptions,
) -> Result<EstimationResult> {
    panel.validate()?;
    init.validate()?;
    if panel.is_empty() {
        return Err(Error::Data("empty panel".into()));
    }
    if init_h.structure == HStructure::PerSlot && init_h.sd.len() < panel.n_slots() {
        return Err(Error::InvalidParams("per-slot measurement errors do not cover every slot".into()));
    }
    let packing = Packing::new(init, init_h);
    let (x0, is_log) = packing.pack(init, init_h)?;
    let quad = &opts.quadrature;
    let objective = |x: &[f64]| negative_loglik(&packing, x, panel, quad);
    let steps: Vec<f64> = x0
        .iter()
        .zip(&is_log)
        .map(|(v, &l)| {
            if l {
                (1.0 + opts.initial_step).ln()
            } else if v.abs() > 1e-8 {
                opts.initial_step * v.abs()
            } else {
                1e-4
            }
        })
        .collect();
    let nm = NelderMeadOptions {
        ftol: opts.ftol,
        max_evals: opts.max_evals,
    };
    if !objective(&x0).is_finite() {
        return Err(Error::Numerical("likelihood is not finite at the initial parameters".into()));
    }
    let mut best = nelder_mead(objective, &x0, &steps, &nm);
    let mut iterations = best.iterations;
    let mut evaluations = best.evaluations;
    let mut restarts_used = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.restarts {
        if evaluations >= opts.max_evals {
            break;
        }
        let jittered: Vec<f64> = steps
            .iter()
            .map(|s| {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                sign * s * rng.random_range(0.5..1.5)
            })
            .collect();
        let budget = NelderMeadOptions {
            ftol: opts.ftol,
            max_evals: opts.max_evals - evaluations,
        };
        let r = nelder_mead(objective, &best.x, &jittered, &budget);
        iterations += r.iterations;
        evaluations += r.evaluations;
        restarts_used += 1;
        let improved = best.f - r.f;
        let converged = r.converged;
        if r.f < best.f {
            best = r;
        } else {
            best.converged = converged && best.converged;
        }
        if improved < opts.ftol {
            break;
        }
    }
    // Polish: fresh simplices from the best point until they stop paying off.
    for _ in 0..MAX_POLISH {
        if evaluations >= opts.max_evals {
            break;
        }
        let budget = NelderMeadOptions {
            ftol: opts.ftol,
            max_evals: opts.max_evals - evaluations,
        };
        let r = nelder_mead(objective, &best.x, &steps, &budget);
        iterations += r.iterations;
        evaluations += r.evaluations;
        let improved = best.f - r.f;
        let converged = r.converged;
        if r.f < best.f {
            best = r;
        }
        best.converged = converged;
        if improved < opts.ftol {
            break;
        }
    }
    let (params, h) = packing.unpack(&best.x)?;
    let model = Model::new(params.clone())?;
    let (loglik, final_filter) = run_filter(&model, &h, panel, quad)?;
    Ok(EstimationResult {
        params,
        measurement_errors: h,
        final_filter,
        loglik,
        convergence: Convergence {
            iterations,
            evaluations,
            spread: best.spread,
            converged: best.converged,
            restarts_used,
        },
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RollingEstimate {
    /// Index of the last panel row used.
    pub end_row: usize,
    pub date: Option<NaiveDate>,
    pub result: EstimationResult,
}

/// Expanding-window re-estimation: the first fit uses `min_rows` rows, then
/// every `every` rows a new fit starts from the previous optimum.
pub fn rolling_estimate(
    panel: &ObservationPanel,
    init: &ModelParams,
    init_h: &MeasurementErrors,
    opts: &EstimationOptions,
    min_rows: usize,
    every: usize,
) -> Result<Vec<RollingEstimate>> {
    if min_rows == 0 || every == 0 {
        return Err(Error::Domain("window sizes must be positive".into()));
    }
    if panel.len() < min_rows {
        return Err(Error::Data(format!(
            "panel has {} rows, at least {min_rows} are required",
            panel.len()
        )));
    }
    let mut out = Vec::new();
    let mut params = init.clone();
    let mut h = init_h.clone();
    let mut end = min_rows;
    loop {
        let window = panel.slice(0, end);
        let result = estimate(&window, &params, &h, opts)?;
        params = result.params.clone();
        h = result.measurement_errors.clone();
        out.push(RollingEstimate {
            end_row: end - 1,
            date: panel.rows[end - 1].date,
            result,
        });
        if end == panel.len() {
            break;
        }
        end = (end + every).min(panel.len());
    }
    Ok(out)
}
