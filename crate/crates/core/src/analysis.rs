//! Empirical diagnostics: fit errors, term-rate comparisons, FOMC
//! surprises and futures risk premia. Outputs are in basis points.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{FilterState, ObservationPanel};
use crate::futures::{futures_rate, FuturesContract};
use crate::math::{mean_sd, quantile_sorted, QuadratureScheme};
use crate::models::Model;
use crate::term_structure::Calendar;

const BP: f64 = 1e4;

/// Summary of a difference series in basis points. Quantiles use linear
/// interpolation between order statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonStats {
    pub n: usize,
    pub rmse: f64,
    pub mean: f64,
    pub sd: f64,
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
}

impl ComparisonStats {
    /// `diffs` are decimal rate differences; the result is in bp.
    pub fn from_differences(diffs: &[f64]) -> Result<Self> {
        if diffs.is_empty() {
            return Err(Error::Data("no differences to summarize".into()));
        }
        // Sorting first makes every statistic independent of input order.
        let mut s: Vec<f64> = diffs.iter().map(|d| d * BP).collect();
        s.sort_by(f64::total_cmp);
        let (mean, sd) = mean_sd(&s);
        let rmse = (s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64).sqrt();
        Ok(Self {
            n: s.len(),
            rmse,
            mean,
            sd,
            q05: quantile_sorted(&s, 0.05),
            q25: quantile_sorted(&s, 0.25),
            median: quantile_sorted(&s, 0.5),
            q75: quantile_sorted(&s, 0.75),
            q95: quantile_sorted(&s, 0.95),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotRmse {
    pub slot: usize,
    pub n: usize,
    pub rmse_bp: f64,
}

/// Per-slot RMSE of fitted against observed rates; `fitted[t][j]` matches
/// `panel.rows[t].observations[j]`.
pub fn fit_rmse(panel: &ObservationPanel, fitted: &[Vec<f64>]) -> Result<Vec<SlotRmse>> {
    if fitted.len() != panel.rows.len() {
        return Err(Error::Data(format!(
            "{} fitted rows for {} panel rows",
            fitted.len(),
            panel.rows.len()
        )));
    }
    let mut acc: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (row, fit) in panel.rows.iter().zip(fitted) {
        if fit.len() != row.observations.len() {
            return Err(Error::Data("fitted rates do not match the observations of a row".into()));
        }
        for (o, f) in row.observations.iter().zip(fit) {
            acc.entry(o.slot).or_default().push((o.rate - f) * BP);
        }
    }
    if acc.is_empty() {
        return Err(Error::Data("no observations".into()));
    }
    Ok(acc
        .into_iter()
        .map(|(slot, mut e)| {
            e.sort_by(f64::total_cmp);
            let ss: f64 = e.iter().map(|v| v * v).sum();
            SlotRmse {
                slot,
                n: e.len(),
                rmse_bp: (ss / e.len() as f64).sqrt(),
            }
        })
        .collect())
}

/// Model rates for every observation, priced at each row's filtered state.
pub fn fitted_rates(model: &Model, panel: &ObservationPanel, states: &[FilterState], quad: &QuadratureScheme) -> Result<Vec<Vec<f64>>> {
    if states.len() != panel.rows.len() {
        return Err(Error::Data("one filtered state per panel row is required".into()));
    }
    panel
        .rows
        .iter()
        .zip(states)
        .map(|(row, st)| {
            row.observations
                .iter()
                .map(|o| futures_rate(model, &st.mean, &o.window, quad))
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub date: NaiveDate,
    pub tenor: String,
    pub rate: f64,
}

/// Statistics of model minus benchmark per tenor over the dates both have.
pub fn compare_term_rates(model: &[RatePoint], benchmark: &[RatePoint]) -> Result<BTreeMap<String, ComparisonStats>> {
    let bench: BTreeMap<(NaiveDate, &str), f64> =
        benchmark.iter().map(|p| ((p.date, p.tenor.as_str()), p.rate)).collect();
    let mut diffs: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for p in model {
        if let Some(b) = bench.get(&(p.date, p.tenor.as_str())) {
            diffs.entry(p.tenor.clone()).or_default().push(p.rate - b);
        }
    }
    if diffs.is_empty() {
        return Err(Error::Data("model and benchmark series share no (date, tenor) pairs".into()));
    }
    diffs
        .into_iter()
        .map(|(t, d)| Ok((t, ComparisonStats::from_differences(&d)?)))
        .collect()
}

/// Daily one-month futures rates keyed by contract month.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MonthlyFuturesSeries {
    pub quotes: BTreeMap<(i32, u32), BTreeMap<NaiveDate, f64>>,
}

impl MonthlyFuturesSeries {
    pub fn insert(&mut self, contract_month: (i32, u32), date: NaiveDate, rate: f64) {
        self.quotes.entry(contract_month).or_default().insert(date, rate);
    }

    pub fn get(&self, contract_month: (i32, u32), date: NaiveDate) -> Option<f64> {
        self.quotes.get(&contract_month)?.get(&date).copied()
    }

    /// Latest quote strictly before `date`.
    pub fn previous(&self, contract_month: (i32, u32), date: NaiveDate) -> Option<(NaiveDate, f64)> {
        self.quotes
            .get(&contract_month)?
            .range(..date)
            .next_back()
            .map(|(d, r)| (*d, *r))
    }

    /// Last quote date within each calendar month across all contracts.
    pub fn month_ends(&self) -> Vec<NaiveDate> {
        let mut last: BTreeMap<(i32, u32), NaiveDate> = BTreeMap::new();
        for d in self.quotes.values().flat_map(|s| s.keys()) {
            let e = last.entry((d.year(), d.month())).or_insert(*d);
            if d > e {
                *e = *d;
            }
        }
        last.into_values().collect()
    }
}

fn days_in_month(y: i32, m: u32) -> u32 {
    let (ny, nm) = crate::futures::contract::next_month(y, m);
    (NaiveDate::from_ymd_opt(ny, nm, 1).expect("valid") - NaiveDate::from_ymd_opt(y, m, 1).expect("valid")).num_days() as u32
}

fn shift_month(y: i32, m: u32, n: u32) -> (i32, u32) {
    let z = y * 12 + m as i32 - 1 + n as i32;
    (z.div_euclid(12), (z.rem_euclid(12) + 1) as u32)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FomcSurprise {
    pub meeting: NaiveDate,
    /// Contract month used.
    pub contract_month: (i32, u32),
    pub previous_date: NaiveDate,
    pub scale: f64,
    pub surprise_bp: f64,
}

/// Unexpected change in the policy rate implied by the spot one-month
/// contract, scaled by N/(N - day). A meeting on the first of the month
/// compares with the last quote of the previous month; one on the last day
/// uses the next month's contract unscaled.
pub fn fomc_surprise(series: &MonthlyFuturesSeries, meeting: NaiveDate) -> Result<FomcSurprise> {
    let (y, m) = (meeting.year(), meeting.month());
    let n = days_in_month(y, m);
    let tau = meeting.day();
    let (contract, scale) = if tau == n {
        (crate::futures::contract::next_month(y, m), 1.0)
    } else {
        ((y, m), n as f64 / (n - tau) as f64)
    };
    let missing = |what: &str| Error::Data(format!("no {what} quote for contract {}-{:02} around {meeting}", contract.0, contract.1));
    let f = series.get(contract, meeting).ok_or_else(|| missing("meeting-day"))?;
    let (prev_date, f_prev) = series.previous(contract, meeting).ok_or_else(|| missing("prior-day"))?;
    if tau == 1 && (prev_date.year(), prev_date.month()) == (y, m) {
        return Err(missing("previous-month"));
    }
    Ok(FomcSurprise {
        meeting,
        contract_month: contract,
        previous_date: prev_date,
        scale,
        surprise_bp: scale * (f - f_prev) * BP,
    })
}

/// Average of the overnight rates over a calendar month, each fixing
/// weighted by the calendar days it covers.
pub fn realized_monthly_average(
    fixings: &crate::futures::AccruedFixings,
    year: i32,
    month: u32,
    cal: &Calendar,
) -> Result<f64> {
    let c = FuturesContract::monthly(year, month, cal)?;
    let mut sum = 0.0;
    let mut missing = vec![];
    for (d, w) in c.fixing_dates.iter().zip(&c.day_weights) {
        match fixings.get(*d) {
            Some(r) => sum += w * r,
            None => missing.push(*d),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingFixings(missing));
    }
    Ok(sum / c.year_fraction())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    /// Months ahead.
    pub horizon: u32,
    pub n_obs: usize,
    pub alpha_bp: f64,
    pub std_error_bp: f64,
    /// Excess returns scaled by 12/n before averaging.
    pub annualized_alpha_bp: f64,
    pub annualized_std_error_bp: f64,
}

fn constant_regression(horizon: u32, rx: &[f64]) -> Result<RegressionResult> {
    if rx.len() < 2 {
        return Err(Error::Data(format!(
            "horizon {horizon}: {} excess returns, at least 2 are needed",
            rx.len()
        )));
    }
    let mut s = rx.to_vec();
    s.sort_by(f64::total_cmp);
    let (mean, sd) = mean_sd(&s);
    let se = sd / (s.len() as f64).sqrt();
    let k = 12.0 / horizon as f64;
    Ok(RegressionResult {
        horizon,
        n_obs: s.len(),
        alpha_bp: mean * BP,
        std_error_bp: se * BP,
        annualized_alpha_bp: k * mean * BP,
        annualized_std_error_bp: k * se * BP,
    })
}

/// Constant-only regressions of one-month futures excess returns
/// f_(n)(t) - R_{t+n} on end-of-month data, for n = 1..=max_horizon.
/// Month ends whose contract or realized rate is unavailable are skipped.
pub fn risk_premium(
    series: &MonthlyFuturesSeries,
    realized: &BTreeMap<(i32, u32), f64>,
    max_horizon: u32,
) -> Result<Vec<RegressionResult>> {
    let ends = series.month_ends();
    (1..=max_horizon)
        .map(|n| {
            let rx: Vec<f64> = ends
                .iter()
                .filter_map(|t| {
                    let cm = shift_month(t.year(), t.month(), n);
                    Some(series.get(cm, *t)? - realized.get(&cm)?)
                })
                .collect();
            constant_regression(n, &rx)
        })
        .collect()
}

/// Excess-return regression on precomputed excess returns.
pub fn regress_excess_returns(horizon: u32, rx: &[f64]) -> Result<RegressionResult> {
    if horizon == 0 {
        return Err(Error::Domain("horizon must be at least one month".into()));
    }
    constant_regression(horizon, rx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::{Observation, PanelRow};
    use crate::futures::{AccrualWindow, ContractKind};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn panel(rates: &[[f64; 2]]) -> ObservationPanel {
        let rows = rates
            .iter()
            .map(|r| PanelRow {
                date: None,
                observations: (0..2)
                    .map(|slot| Observation {
                        contract_id: format!("c{slot}"),
                        slot,
                        window: AccrualWindow::stylized(ContractKind::OneMonth, 0.0, 30),
                        rate: r[slot],
                    })
                    .collect(),
            })
            .collect();
        ObservationPanel::new(rows).unwrap()
    }

    #[test]
    fn perfect_fit_and_constant_error() {
        let obs = [[0.01, 0.02], [0.011, 0.021], [0.012, 0.019]];
        let p = panel(&obs);
        let same: Vec<Vec<f64>> = obs.iter().map(|r| r.to_vec()).collect();
        assert!(fit_rmse(&p, &same).unwrap().iter().all(|r| r.rmse_bp == 0.0));
        let off: Vec<Vec<f64>> = obs.iter().map(|r| vec![r[0] - 2e-4, r[1] + 2e-4]).collect();
        for r in fit_rmse(&p, &off).unwrap() {
            assert!((r.rmse_bp - 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn rmse_matches_spreadsheet_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let obs: Vec<[f64; 2]> = (0..50).map(|_| [rng.random_range(0.0..0.03), rng.random_range(0.0..0.03)]).collect();
        let fit: Vec<Vec<f64>> = obs.iter().map(|r| vec![r[0] + rng.random_range(-1e-3..1e-3), r[1]]).collect();
        let got = fit_rmse(&panel(&obs), &fit).unwrap();
        let mut ss = 0.0;
        for (o, f) in obs.iter().zip(&fit) {
            let e = (o[0] - f[0]) * 10000.0;
            ss += e * e;
        }
        assert!((got[0].rmse_bp - (ss / 50.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn stats_of_known_series() {
        // Differences 1..=9 bp.
        let diffs: Vec<f64> = (1..=9).map(|i| i as f64 * 1e-4).collect();
        let s = ComparisonStats::from_differences(&diffs).unwrap();
        assert!((s.mean - 5.0).abs() < 1e-12);
        assert!((s.median - 5.0).abs() < 1e-12);
        assert!((s.q25 - 3.0).abs() < 1e-12);
        assert!((s.q75 - 7.0).abs() < 1e-12);
        assert!((s.q05 - 1.4).abs() < 1e-12);
        assert!((s.q95 - 8.6).abs() < 1e-12);
        assert!((s.sd - 7.5f64.sqrt()).abs() < 1e-12);
        assert!((s.rmse - (285.0f64 / 9.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn identical_series_compare_to_zero() {
        let pts: Vec<RatePoint> = (0..20)
            .map(|i| RatePoint {
                date: d("2020-01-01") + chrono::Days::new(i),
                tenor: if i % 2 == 0 { "1M".into() } else { "3M".into() },
                rate: 0.01 + i as f64 * 1e-4,
            })
            .collect();
        let c = compare_term_rates(&pts, &pts).unwrap();
        assert_eq!(c.len(), 2);
        for s in c.values() {
            assert_eq!((s.rmse, s.mean, s.sd, s.q05, s.q95), (0.0, 0.0, 0.0, 0.0, 0.0));
        }
        assert!(compare_term_rates(&pts[..1], &pts[1..2]).is_err());
    }

    fn fomc_series() -> MonthlyFuturesSeries {
        let mut s = MonthlyFuturesSeries::default();
        // March 2020 contract quoted late February through mid March.
        s.insert((2020, 2), d("2020-02-27"), 0.0158);
        s.insert((2020, 2), d("2020-02-28"), 0.0157);
        s.insert((2020, 3), d("2020-02-27"), 0.0150);
        s.insert((2020, 3), d("2020-02-28"), 0.0140);
        s.insert((2020, 3), d("2020-03-02"), 0.0120);
        s.insert((2020, 3), d("2020-03-13"), 0.0110);
        s.insert((2020, 3), d("2020-03-16"), 0.0080);
        s.insert((2020, 3), d("2020-03-31"), 0.0070);
        s.insert((2020, 4), d("2020-03-30"), 0.0010);
        s.insert((2020, 4), d("2020-03-31"), 0.0005);
        s
    }

    #[test]
    fn fomc_scaling_examples() {
        let s = fomc_series();
        // Day 16 of 31: scale 31/15, prior quote Friday 13th.
        let r = fomc_surprise(&s, d("2020-03-16")).unwrap();
        assert_eq!(r.previous_date, d("2020-03-13"));
        assert!((r.surprise_bp - 31.0 / 15.0 * -30.0).abs() < 1e-9);

        let mut flat = MonthlyFuturesSeries::default();
        flat.insert((2020, 6), d("2020-06-14"), 0.01);
        flat.insert((2020, 6), d("2020-06-15"), 0.01);
        assert_eq!(fomc_surprise(&flat, d("2020-06-15")).unwrap().surprise_bp, 0.0);

        let mut half = MonthlyFuturesSeries::default();
        half.insert((2020, 6), d("2020-06-14"), 0.0110);
        half.insert((2020, 6), d("2020-06-15"), 0.0100);
        assert!((fomc_surprise(&half, d("2020-06-15")).unwrap().surprise_bp + 20.0).abs() < 1e-9);
    }

    #[test]
    fn fomc_month_boundaries() {
        let s = fomc_series();
        // 2 March is not the first; use a meeting on the first via a June fixture.
        let mut june = MonthlyFuturesSeries::default();
        june.insert((2021, 6), d("2021-05-31"), 0.0009);
        june.insert((2021, 6), d("2021-06-01"), 0.0007);
        let r = fomc_surprise(&june, d("2021-06-01")).unwrap();
        assert_eq!(r.previous_date, d("2021-05-31"));
        assert!((r.scale - 30.0 / 29.0).abs() < 1e-15);
        assert!((r.surprise_bp - 30.0 / 29.0 * -2.0).abs() < 1e-9);
        // Last day of March: April contract, unscaled.
        let r = fomc_surprise(&s, d("2020-03-31")).unwrap();
        assert_eq!(r.contract_month, (2020, 4));
        assert_eq!(r.scale, 1.0);
        assert!((r.surprise_bp + 5.0).abs() < 1e-9);
        // No prior quote at all.
        assert!(fomc_surprise(&june, d("2021-05-31")).is_err());
    }

    #[test]
    fn constant_excess_returns() {
        let r = regress_excess_returns(3, &[0.001; 12]).unwrap();
        assert!((r.alpha_bp - 10.0).abs() < 1e-9);
        assert!(r.std_error_bp.abs() < 1e-9);
        assert!((r.annualized_alpha_bp - 40.0).abs() < 1e-9);
        assert!(regress_excess_returns(1, &[0.1]).is_err());
    }

    #[test]
    fn unbiased_futures_have_no_premium() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut series = MonthlyFuturesSeries::default();
        let mut realized = BTreeMap::new();
        let normal = rand_distr::Normal::new(0.0, 0.002).unwrap();
        let months = 506;
        for k in 0..months {
            let (y, m) = shift_month(1980, 1, k);
            realized.insert((y, m), 0.02 + rand_distr::Distribution::sample(&normal, &mut rng));
        }
        for k in 0..months - 6 {
            let (y, m) = shift_month(1980, 1, k);
            let end = NaiveDate::from_ymd_opt(y, m, days_in_month(y, m)).unwrap();
            for n in 1..=6 {
                let cm = shift_month(y, m, n);
                // Expectation of the realized rate plus noise unrelated to it.
                series.insert(cm, end, 0.02 + rand_distr::Distribution::sample(&normal, &mut rng) * 0.1);
            }
        }
        for r in risk_premium(&series, &realized, 6).unwrap() {
            assert_eq!(r.n_obs, 500);
            assert!(r.alpha_bp.abs() < 2.0 * r.std_error_bp, "{r:?}");
        }
    }

    #[test]
    fn monthly_average_is_day_weighted() {
        let cal = Calendar::usny();
        let c = FuturesContract::monthly(2019, 6, &cal).unwrap();
        let fx: crate::futures::AccruedFixings = c.fixing_dates.iter().enumerate().map(|(i, x)| (*x, 0.02 + i as f64 * 1e-4)).collect();
        let got = realized_monthly_average(&fx, 2019, 6, &cal).unwrap();
        // Brute force over calendar days.
        let mut s = 0.0;
        for day in 1..=30 {
            let dd = NaiveDate::from_ymd_opt(2019, 6, day).unwrap();
            s += fx.rates.range(..=dd).next_back().unwrap().1;
        }
        assert!((got - s / 30.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn stats_ignore_order_and_bound_rmse(mut v in proptest::collection::vec(-0.01..0.01f64, 1..60), seed in 0u64..100) {
            let a = ComparisonStats::from_differences(&v).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in (1..v.len()).rev() {
                let j = rng.random_range(0..=i);
                v.swap(i, j);
            }
            let b = ComparisonStats::from_differences(&v).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert!(a.rmse * a.rmse >= a.mean * a.mean * (1.0 - 1e-12));
            prop_assert!(a.q05 <= a.q25 && a.q25 <= a.median && a.median <= a.q75 && a.q75 <= a.q95);
        }

        #[test]
        fn surprise_is_linear_in_price_change(df in -0.005..0.005f64, day in 2u32..30) {
            let meet = NaiveDate::from_ymd_opt(2021, 7, day).unwrap();
            let mk = |k: f64| {
                let mut s = MonthlyFuturesSeries::default();
                s.insert((2021, 7), meet - chrono::Days::new(1), 0.01);
                s.insert((2021, 7), meet, 0.01 + k * df);
                fomc_surprise(&s, meet).unwrap().surprise_bp
            };
            prop_assert!((mk(2.0) - 2.0 * mk(1.0)).abs() <= 1e-9);
        }
    }
}
