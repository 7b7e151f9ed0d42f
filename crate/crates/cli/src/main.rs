//! `sofr-curve`: batch driver for estimation, pricing reports, Monte Carlo
//! checks and market statistics.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "sofr-curve", version, about = "SOFR/EFFR futures term structure models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Run configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Parameter JSON (overrides the config).
    #[arg(long, global = true)]
    pub params: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct StateArgs {
    /// Comma-separated factor values; defaults to the long-run mean.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub state: Option<Vec<f64>>,
    #[arg(long, default_value = "2020-12-11")]
    pub as_of: NaiveDate,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Rolling maximum-likelihood estimation on a quote panel.
    Estimate {
        #[command(flatten)]
        common: Common,
    },
    /// Forward-looking term rates, rolling over the panel when quotes are configured.
    TermRates {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        state: StateArgs,
        #[arg(long, value_delimiter = ',', default_value = "1M,3M,6M,12M")]
        tenors: Vec<String>,
    },
    /// Convexity adjustments on a contract grid.
    Convexity {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        state: StateArgs,
        #[arg(long, value_enum, default_value = "cme")]
        grid: Grid,
        /// Shadow-model rows with a larger Monte Carlo error are flagged.
        #[arg(long, default_value_t = 2e-6)]
        max_std_error: f64,
    },
    /// Pricer checks against exact or simulated values.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(value_enum)]
        what: ValidateKind,
        #[command(flatten)]
        state: StateArgs,
        #[command(flatten)]
        mc: McArgs,
    },
    /// Parameter recovery on simulated panels.
    SimStudy {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 200)]
        reps: usize,
        #[arg(long, default_value_t = 20240601)]
        seed: u64,
        #[arg(long, default_value_t = 500)]
        obs: usize,
    },
    /// Fit and market statistics.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[command(subcommand)]
        what: AnalyzeKind,
    },
}

#[derive(Args, Debug, Clone)]
pub struct McArgs {
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub steps_per_day: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Grid {
    /// 13 monthly and 39 quarterly listed contracts.
    Cme,
    /// The 7 monthly and 5 quarterly contracts used in estimation.
    Estimation,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ValidateKind {
    Approx,
    Shadow,
    Option,
}

#[derive(Subcommand, Debug)]
pub enum AnalyzeKind {
    /// In-sample fit RMSE per contract slot.
    Rmse,
    /// Model term rates against a benchmark.
    Compare {
        /// Model rates (date, tenor, rate); e.g. the term-rates output.
        #[arg(long)]
        model_rates: PathBuf,
        /// Benchmark rates; defaults to the configured benchmark.
        #[arg(long)]
        benchmark: Option<PathBuf>,
    },
    /// Policy surprises from one-month futures around meeting dates.
    Fomc {
        #[arg(long)]
        quotes: Option<PathBuf>,
        /// CSV with a `date` column.
        #[arg(long)]
        meetings: PathBuf,
    },
    /// Excess returns on one-month futures against realized averages.
    RiskPremium {
        #[arg(long)]
        quotes: Option<PathBuf>,
        #[arg(long)]
        fixings: Option<PathBuf>,
        #[arg(long, default_value_t = 6)]
        max_horizon: u32,
    },
}

fn init_threads() -> Result<(), sofr_core::Error> {
    if let Ok(v) = std::env::var("CURVE_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| sofr_core::Error::Domain(format!("CURVE_THREADS must be a positive integer, got `{v}`")))?;
        if n == 0 {
            return Err(sofr_core::Error::Domain("CURVE_THREADS must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| sofr_core::Error::Domain(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = init_threads().and_then(|_| commands::run(cli.command));
    match res {
        Ok(commands::Outcome::Ok) => ExitCode::SUCCESS,
        Ok(commands::Outcome::ChecksFailed(n)) => {
            let msg = serde_json::json!({
                "error": "check_failed",
                "message": format!("{n} consistency check(s) failed"),
            });
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(e) => {
            let mut msg = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            if let sofr_core::Error::Parse { line, .. } = &e {
                msg["line"] = (*line).into();
            }
            if let sofr_core::Error::MissingFixings(d) = &e {
                msg["dates"] = d.iter().map(|d| d.to_string()).collect::<Vec<_>>().into();
            }
            eprintln!("{msg}");
            ExitCode::from(2)
        }
    }
}
