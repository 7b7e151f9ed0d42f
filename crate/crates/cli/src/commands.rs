use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sofr_core::analysis::{compare_term_rates, fit_rmse, fitted_rates, fomc_surprise, realized_monthly_average, risk_premium, MonthlyFuturesSeries};
use sofr_core::estimation::{filter_states, rolling_estimate, EstimationResult, MeasurementErrors};
use sofr_core::futures::{AccruedFixings, ContractKind};
use sofr_core::io::report::{
    comparison_records, convexity_records, fomc_records, param_history_records, study_records, term_rate_records,
};
use sofr_core::io::{
    cme_grid, load_panel, parse_contract_month, read_benchmark, read_dates, read_fixings, read_quotes, select_universe,
    write_csv, write_json, LoadedPanel, QuoteRecord, RunConfig,
};
use sofr_core::math::QuadratureScheme;
use sofr_core::mc::{
    approximation_error_report, near_zero_state, option_ordering, reference_states, shadow_accuracy, sim_study, McConfig,
    SimStudyConfig,
};
use sofr_core::term_structure::{convexity_report, term_curve, Calendar};
use sofr_core::{Error, Model, ModelParams, ModelVariant, Result};

use crate::{AnalyzeKind, Command, Common, Grid, McArgs, StateArgs, ValidateKind};

pub enum Outcome {
    Ok,
    ChecksFailed(usize),
}

struct Ctx {
    cfg: RunConfig,
    params_path: Option<PathBuf>,
    out: PathBuf,
}

impl Ctx {
    fn new(common: &Common) -> Result<Self> {
        let cfg = match &common.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let out = common.out.clone().unwrap_or_else(|| cfg.out_dir.clone());
        Ok(Self {
            params_path: common.params.clone().or_else(|| cfg.params.clone()),
            cfg,
            out,
        })
    }

    fn params(&self) -> Result<ModelParams> {
        match &self.params_path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Data(format!("cannot read {}: {e}", p.display())))?;
                let params: ModelParams = serde_json::from_str(&text)?;
                if params.variant != self.cfg.variant && self.cfg.variant.n_factors() == params.n() {
                    return params.with_variant(self.cfg.variant);
                }
                Ok(params)
            }
            None => ModelParams::reference_afns3().with_variant(self.cfg.variant),
        }
    }

    fn calendar(&self) -> Result<Calendar> {
        match &self.cfg.calendar {
            Some(p) => Calendar::from_file(p),
            None => Ok(Calendar::usny()),
        }
    }

    fn quotes(&self, flag: Option<&PathBuf>) -> Result<Vec<QuoteRecord>> {
        let p = flag
            .or(self.cfg.quotes.as_ref())
            .ok_or_else(|| Error::Data("no quote file given".into()))?;
        read_quotes(p)
    }

    fn fixings(&self, flag: Option<&PathBuf>) -> Result<AccruedFixings> {
        match flag.or(self.cfg.fixings.as_ref()) {
            Some(p) => read_fixings(p),
            None => Ok(AccruedFixings::new()),
        }
    }

    fn panel(&self) -> Result<LoadedPanel> {
        let loaded = load_panel(&self.quotes(None)?, &self.fixings(None)?, &self.calendar()?, &self.cfg.panel)?;
        if !loaded.flagged.is_empty() {
            eprintln!("{} panel rows have fewer contracts than configured", loaded.flagged.len());
        }
        Ok(loaded)
    }

    fn init_h(&self, n_slots: usize) -> MeasurementErrors {
        MeasurementErrors::uniform(self.cfg.h_structure, self.cfg.init_h_sd, n_slots)
    }

    fn mc(&self, a: &McArgs) -> Result<McConfig> {
        let mut mc = self.cfg.mc;
        if let Some(n) = a.paths {
            mc.n_paths = n;
        }
        if let Some(k) = a.steps_per_day {
            mc.dt = 1.0 / (360.0 * k as f64);
        }
        if let Some(s) = a.seed {
            mc.seed = s;
        }
        mc.validate()?;
        Ok(mc)
    }

    fn path(&self, name: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out)?;
        Ok(self.out.join(name))
    }

    fn csv<T: serde::Serialize>(&self, name: &str, rows: &[T]) -> Result<()> {
        let p = self.path(name)?;
        write_csv(&p, rows)?;
        println!("{}", p.display());
        Ok(())
    }

    fn json<T: serde::Serialize>(&self, name: &str, v: &T) -> Result<()> {
        let p = self.path(name)?;
        write_json(&p, v)?;
        println!("{}", p.display());
        Ok(())
    }
}

fn state_or_mean(params: &ModelParams, s: &StateArgs) -> Vec<f64> {
    s.state.clone().unwrap_or_else(|| params.theta_p.iter().copied().collect())
}

fn parse_tenor(t: &str) -> Result<u32> {
    let t = t.trim().to_ascii_uppercase();
    let bad = || Error::Domain(format!("bad tenor `{t}`; use e.g. 3M or 1Y"));
    let (num, mult) = if let Some(n) = t.strip_suffix('M') {
        (n, 1)
    } else if let Some(n) = t.strip_suffix('Y') {
        (n, 12)
    } else {
        return Err(bad());
    };
    let n: u32 = num.parse().map_err(|_| bad())?;
    if n == 0 {
        return Err(bad());
    }
    Ok(n * mult)
}

fn rolling(ctx: &Ctx, loaded: &LoadedPanel) -> Result<Vec<sofr_core::estimation::RollingEstimate>> {
    let h = ctx.init_h(loaded.panel.n_slots());
    rolling_estimate(
        &loaded.panel,
        &ctx.params()?,
        &h,
        &ctx.cfg.estimation,
        ctx.cfg.min_window,
        ctx.cfg.reestimate_every,
    )
}

fn monthly_series(quotes: &[QuoteRecord]) -> Result<MonthlyFuturesSeries> {
    use chrono::Datelike;
    let mut s = MonthlyFuturesSeries::default();
    for q in quotes.iter().filter(|q| q.kind == ContractKind::OneMonth) {
        let cm = match q.accrual_start {
            Some(d) => (d.year(), d.month()),
            None => parse_contract_month(&q.contract_id)?,
        };
        s.insert(cm, q.date, q.rate());
    }
    Ok(s)
}

pub fn run(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Estimate { common } => {
            let ctx = Ctx::new(&common)?;
            let loaded = ctx.panel()?;
            let hist = rolling(&ctx, &loaded)?;
            let last = hist.last().ok_or_else(|| Error::Data("no estimation window".into()))?;
            ctx.json("estimate.json", &last.result)?;
            ctx.json("params.json", &last.result.params)?;
            ctx.csv("param_history.csv", &param_history_records(&hist))?;
            Ok(Outcome::Ok)
        }
        Command::TermRates { common, state, tenors } => {
            let ctx = Ctx::new(&common)?;
            let months = tenors.iter().map(|t| parse_tenor(t)).collect::<Result<Vec<_>>>()?;
            let cal = ctx.calendar()?;
            let curves = if ctx.cfg.quotes.is_some() {
                let loaded = ctx.panel()?;
                rolling(&ctx, &loaded)?
                    .iter()
                    .map(|e| {
                        let date = e.date.ok_or_else(|| Error::Data("panel rows carry no dates".into()))?;
                        let m = Model::new(e.result.params.clone())?;
                        term_curve(&m, &e.result.final_filter.mean, date, &months, &cal)
                    })
                    .collect::<Result<Vec<_>>>()?
            } else {
                let params = ctx.params()?;
                let x = state_or_mean(&params, &state);
                vec![term_curve(&Model::new(params)?, &x, state.as_of, &months, &cal)?]
            };
            ctx.csv("term_rates.csv", &term_rate_records(&curves))?;
            Ok(Outcome::Ok)
        }
        Command::Convexity {
            common,
            state,
            grid,
            max_std_error,
        } => {
            let ctx = Ctx::new(&common)?;
            let params = ctx.params()?;
            let x = state_or_mean(&params, &state);
            let cal = ctx.calendar()?;
            let contracts = match grid {
                Grid::Cme => cme_grid(state.as_of, &cal)?,
                Grid::Estimation => select_universe(state.as_of, &cal, ctx.cfg.panel.n_monthly, ctx.cfg.panel.n_quarterly)?,
            };
            let r = convexity_report(&Model::new(params)?, &x, &contracts, state.as_of, &ctx.cfg.mc, max_std_error)?;
            let flagged = r.rows.iter().filter(|r| r.value.flagged).count();
            ctx.csv("convexity.csv", &convexity_records(&r))?;
            if flagged > 0 {
                return Ok(Outcome::ChecksFailed(flagged));
            }
            Ok(Outcome::Ok)
        }
        Command::Validate { common, what, state, mc } => {
            let ctx = Ctx::new(&common)?;
            let params = ctx.params()?;
            let quad = QuadratureScheme::default();
            match what {
                ValidateKind::Approx => {
                    let x = state_or_mean(&params, &state);
                    let g = Model::new(params.with_variant(ModelVariant::Afns3).or_else(|_| Ok::<_, Error>(params.clone()))?)?;
                    let rows = approximation_error_report(&g, &x, &cme_grid(state.as_of, &ctx.calendar()?)?, state.as_of)?;
                    let failed = rows
                        .iter()
                        .filter(|r| match r.kind {
                            ContractKind::OneMonth => r.difference.abs() >= 1e-4,
                            ContractKind::ThreeMonth => r.difference.abs() >= 1e-7,
                        })
                        .count();
                    ctx.csv("approx.csv", &rows)?;
                    Ok(if failed == 0 { Outcome::Ok } else { Outcome::ChecksFailed(failed) })
                }
                ValidateKind::Shadow => {
                    let m = Model::new(params.with_variant(ModelVariant::ShadowAfns3)?)?;
                    let states = match &state.state {
                        Some(s) => vec![("given".to_string(), s.clone())],
                        None => reference_states(&params),
                    };
                    let rows = shadow_accuracy(&m, &states, &ctx.mc(&mc)?, &quad)?;
                    let failed = rows.iter().filter(|r| r.difference_bp.abs() > 0.25).count();
                    ctx.csv("shadow_accuracy.csv", &rows)?;
                    Ok(if failed == 0 { Outcome::Ok } else { Outcome::ChecksFailed(failed) })
                }
                ValidateKind::Option => {
                    let x = state.state.clone().unwrap_or_else(near_zero_state);
                    let row = option_ordering(&params, &x, 0.5, 0.5, &ctx.mc(&mc)?, &quad)?;
                    ctx.csv("option.csv", std::slice::from_ref(&row))?;
                    let checked = state.state.is_none();
                    Ok(if checked && !(row.ratio < 0.25) { Outcome::ChecksFailed(1) } else { Outcome::Ok })
                }
            }
        }
        Command::SimStudy { common, reps, seed, obs } => {
            let ctx = Ctx::new(&common)?;
            let cfg = SimStudyConfig {
                n_replications: reps,
                n_obs: obs,
                seed,
                ..SimStudyConfig::default()
            };
            let report = sim_study(&ctx.params()?, &cfg)?;
            ctx.json("study.json", &report)?;
            ctx.csv("study.csv", &study_records(&report))?;
            Ok(Outcome::Ok)
        }
        Command::Analyze { common, what } => analyze(&Ctx::new(&common)?, what),
    }
}

fn analyze(ctx: &Ctx, what: AnalyzeKind) -> Result<Outcome> {
    match what {
        AnalyzeKind::Rmse => {
            let loaded = ctx.panel()?;
            let (params, h) = match &ctx.params_path {
                Some(p) if is_estimate(p) => {
                    let r: EstimationResult = serde_json::from_str(&std::fs::read_to_string(p)?)?;
                    (r.params, r.measurement_errors)
                }
                _ => (ctx.params()?, ctx.init_h(loaded.panel.n_slots())),
            };
            let m = Model::new(params)?;
            let quad = QuadratureScheme::default();
            let states = filter_states(&m, &h, &loaded.panel, &quad)?;
            let fitted = fitted_rates(&m, &loaded.panel, &states, &quad)?;
            ctx.csv("rmse.csv", &fit_rmse(&loaded.panel, &fitted)?)?;
        }
        AnalyzeKind::Compare { model_rates, benchmark } => {
            let bench = benchmark
                .or_else(|| ctx.cfg.benchmark.clone())
                .ok_or_else(|| Error::Data("no benchmark file given".into()))?;
            let stats = compare_term_rates(&read_benchmark(&model_rates)?, &read_benchmark(&bench)?)?;
            ctx.csv("comparison.csv", &comparison_records(&stats))?;
        }
        AnalyzeKind::Fomc { quotes, meetings } => {
            let series = monthly_series(&ctx.quotes(quotes.as_ref())?)?;
            let rows = read_dates(&meetings)?
                .into_iter()
                .map(|d| fomc_surprise(&series, d))
                .collect::<Result<Vec<_>>>()?;
            ctx.csv("fomc.csv", &fomc_records(&rows))?;
        }
        AnalyzeKind::RiskPremium {
            quotes,
            fixings,
            max_horizon,
        } => {
            let series = monthly_series(&ctx.quotes(quotes.as_ref())?)?;
            let fx = ctx.fixings(fixings.as_ref())?;
            let cal = ctx.calendar()?;
            let mut realized = BTreeMap::new();
            for &(y, m) in series.quotes.keys() {
                match realized_monthly_average(&fx, y, m, &cal) {
                    Ok(r) => {
                        realized.insert((y, m), r);
                    }
                    Err(Error::MissingFixings(_)) => {}
                    Err(e) => return Err(e),
                }
            }
            let rows = risk_premium(&series, &realized, max_horizon)?;
            ctx.csv("risk_premium.csv", &rows)?;
        }
    }
    Ok(Outcome::Ok)
}

/// Estimation output (as opposed to a bare parameter file).
fn is_estimate(p: &Path) -> bool {
    std::fs::read_to_string(p)
        .ok()
        .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).ok())
        .is_some_and(|v| v.get("measurement_errors").is_some())
}
