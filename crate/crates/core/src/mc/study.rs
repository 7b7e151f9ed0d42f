//! Parameter-recovery study for the filter-based estimator on simulated
//! futures panels.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{
    discretize_p, estimate, EstimationOptions, HStructure, MeasurementErrors, Observation, ObservationPanel,
    PanelRow,
};
use crate::futures::{futures_rate, AccrualWindow, ContractKind};
use crate::math::{mean_sd, quantile_sorted, QuadratureScheme};
use crate::models::{Model, ModelParams};

#[derive(Clone, Debug)]
pub struct SimStudyConfig {
    pub n_replications: usize,
    pub n_obs: usize,
    pub dt: f64,
    /// Rates are rounded to a multiple of this.
    pub tick: f64,
    pub tau_1m: Vec<f64>,
    pub tau_3m: Vec<f64>,
    pub days_1m: u32,
    pub days_3m: u32,
    pub seed: u64,
    /// Starting measurement-error standard deviation for both kinds.
    pub init_h_sd: f64,
    pub estimation: EstimationOptions,
}

impl Default for SimStudyConfig {
    fn default() -> Self {
        Self {
            n_replications: 1000,
            n_obs: 500,
            dt: 1.0 / 250.0,
            tick: 0.5e-4,
            tau_1m: (0..7).map(|i| (30 * i) as f64 / 360.0).collect(),
            tau_3m: (0..5).map(|i| (90 * i) as f64 / 360.0).collect(),
            days_1m: 30,
            days_3m: 90,
            seed: 20240601,
            init_h_sd: 1.5e-5,
            estimation: EstimationOptions::default(),
        }
    }
}

impl SimStudyConfig {
    pub fn windows(&self) -> Vec<AccrualWindow> {
        let one = self
            .tau_1m
            .iter()
            .map(|&s| AccrualWindow::stylized(ContractKind::OneMonth, s, self.days_1m));
        let three = self
            .tau_3m
            .iter()
            .map(|&s| AccrualWindow::stylized(ContractKind::ThreeMonth, s, self.days_3m));
        one.chain(three).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub name: String,
    pub true_value: f64,
    pub mean: f64,
    pub sd: f64,
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
}

impl SummaryRow {
    fn from_values(name: &str, true_value: f64, values: &[f64]) -> Self {
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        let (mean, sd) = mean_sd(values);
        Self {
            name: name.to_string(),
            true_value,
            mean,
            sd,
            q05: quantile_sorted(&s, 0.05),
            q25: quantile_sorted(&s, 0.25),
            median: quantile_sorted(&s, 0.5),
            q75: quantile_sorted(&s, 0.75),
            q95: quantile_sorted(&s, 0.95),
        }
    }
}

/// Filtered-minus-true final state, in basis points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateErrorRow {
    pub name: String,
    pub rmse_bp: f64,
    pub summary: SummaryRow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub n_replications: usize,
    pub n_succeeded: usize,
    pub n_failed: usize,
    pub failures: Vec<String>,
    pub params: Vec<SummaryRow>,
    pub states: Vec<StateErrorRow>,
}

impl StudyReport {
    pub fn param(&self, name: &str) -> Option<&SummaryRow> {
        self.params.iter().find(|r| r.name == name)
    }

    pub fn state(&self, name: &str) -> Option<&StateErrorRow> {
        self.states.iter().find(|r| r.name == name)
    }
}

/// Simulates one panel from the exact physical transition started at θ^P.
/// Returns the panel and the true state after the last row.
pub fn simulate_panel(truth: &ModelParams, cfg: &SimStudyConfig, rng: &mut ChaCha8Rng) -> Result<(ObservationPanel, Vec<f64>)> {
    let model = Model::new(truth.clone())?;
    let n = truth.n();
    let d = discretize_p(truth, cfg.dt)?;
    let chol = d
        .q
        .clone()
        .cholesky()
        .map(|c| c.l())
        .unwrap_or_else(|| nalgebra::DMatrix::from_fn(n, n, |i, j| if i == j { d.q[(i, i)].max(0.0).sqrt() } else { 0.0 }));
    let windows = cfg.windows();
    let quad = QuadratureScheme::default();
    let mut x = truth.theta_p.clone();
    let mut rows = Vec::with_capacity(cfg.n_obs);
    for _ in 0..cfg.n_obs {
        let z = nalgebra::DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
        x = &d.c + &d.f * x + &chol * z;
        let xs: Vec<f64> = x.iter().copied().collect();
        let mut obs = Vec::with_capacity(windows.len());
        for (slot, w) in windows.iter().enumerate() {
            let rate = futures_rate(&model, &xs, w, &quad)?;
            let rounded = if cfg.tick > 0.0 { (rate / cfg.tick).round() * cfg.tick } else { rate };
            obs.push(Observation {
                contract_id: format!("{}#{slot}", w.kind),
                slot,
                window: w.clone(),
                rate: rounded,
            });
        }
        rows.push(PanelRow {
            date: None,
            observations: obs,
        });
    }
    let panel = ObservationPanel { rows, dt: cfg.dt };
    Ok((panel, x.iter().copied().collect()))
}

pub(crate) fn param_names(truth: &ModelParams) -> Vec<String> {
    let n = truth.n();
    let mut names = Vec::new();
    for i in 1..=n {
        names.push(format!("k{i}{i}_p"));
    }
    for i in 1..=n {
        names.push(format!("theta{i}_p"));
    }
    for i in 1..=n {
        names.push(format!("sigma{i}{i}"));
    }
    names.push("lambda".to_string());
    names
}

fn param_values(p: &ModelParams) -> Vec<f64> {
    let mut v = p.k_p_diag();
    v.extend(p.theta_p.iter());
    v.extend(p.sigma_diag());
    v.push(p.lambda);
    v
}

const STATE_NAMES: [&str; 3] = ["level", "slope", "curve"];

struct Replication {
    params: Vec<f64>,
    state_err_bp: Vec<f64>,
}

fn replicate(truth: &ModelParams, cfg: &SimStudyConfig, rep: usize) -> Result<Replication> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(rep as u64);
    let (panel, x_true) = simulate_panel(truth, cfg, &mut rng)?;
    let h = MeasurementErrors::uniform(HStructure::PerKind, cfg.init_h_sd, panel.n_slots());
    let mut opts = cfg.estimation.clone();
    opts.seed = cfg.estimation.seed.wrapping_add(rep as u64);
    let fit = estimate(&panel, truth, &h, &opts)?;
    let state_err_bp = fit
        .final_filter
        .mean
        .iter()
        .zip(&x_true)
        .map(|(f, t)| (f - t) * 1e4)
        .collect();
    Ok(Replication {
        params: param_values(&fit.params),
        state_err_bp,
    })
}

/// Runs the recovery study. Each replication draws from its own RNG stream
/// so serial and parallel runs agree; failed replications are counted and
/// excluded from the summaries.
pub fn sim_study(truth: &ModelParams, cfg: &SimStudyConfig) -> Result<StudyReport> {
    truth.validate()?;
    if truth.variant.is_shadow() {
        return Err(Error::UnsupportedVariant {
            variant: truth.variant,
            op: "sim_study",
        });
    }
    if cfg.n_replications == 0 || cfg.n_obs == 0 {
        return Err(Error::Domain("study needs at least one replication and one observation".into()));
    }
    let run = |rep: usize| replicate(truth, cfg, rep);
    #[cfg(feature = "parallel")]
    let results: Vec<Result<Replication>> = {
        use rayon::prelude::*;
        (0..cfg.n_replications).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<Replication>> = (0..cfg.n_replications).map(run).collect();

    let mut ok = Vec::new();
    let mut failures = Vec::new();
    for (rep, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => failures.push(format!("replication {rep}: {e}")),
        }
    }
    if ok.is_empty() {
        return Err(Error::Numerical(format!("all {} replications failed", cfg.n_replications)));
    }
    let truth_vals = param_values(truth);
    let params = param_names(truth)
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let vals: Vec<f64> = ok.iter().map(|r| r.params[i]).collect();
            SummaryRow::from_values(name, truth_vals[i], &vals)
        })
        .collect();
    let states = (0..truth.n())
        .map(|i| {
            let vals: Vec<f64> = ok.iter().map(|r| r.state_err_bp[i]).collect();
            let rmse = (vals.iter().map(|v| v * v).sum::<f64>() / vals.len() as f64).sqrt();
            let name = if truth.n() == 3 { STATE_NAMES[i].to_string() } else { format!("x{}", i + 1) };
            StateErrorRow {
                summary: SummaryRow::from_values(&name, 0.0, &vals),
                name,
                rmse_bp: rmse,
            }
        })
        .collect();
    Ok(StudyReport {
        n_replications: cfg.n_replications,
        n_succeeded: ok.len(),
        n_failed: failures.len(),
        failures,
        params,
        states,
    })
}
