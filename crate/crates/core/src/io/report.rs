//! Flat CSV records for every emitted report, plus JSON output.

use std::path::Path;

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::analysis::{ComparisonStats, FomcSurprise};
use crate::error::{Error, Result};
use crate::estimation::RollingEstimate;
use crate::futures::ContractKind;
use crate::io::files::{read_records, write_records};
use crate::mc::{StudyReport, SummaryRow};
use crate::term_structure::{ConvexityMethod, ConvexityReport, TermCurve};

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::Data(format!("cannot create {}: {e}", path.display())))?;
    write_records(std::io::BufWriter::new(f), rows)
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = std::fs::File::open(path).map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    read_records(f, |_: &T| Ok(()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermRateRecord {
    pub date: NaiveDate,
    pub tenor: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub rate: f64,
}

pub fn term_rate_records(curves: &[TermCurve]) -> Vec<TermRateRecord> {
    curves
        .iter()
        .flat_map(|c| {
            c.points.iter().map(move |p| TermRateRecord {
                date: c.as_of,
                tenor: p.tenor.clone(),
                start: p.start,
                end: p.end,
                rate: p.rate,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexityRecord {
    pub as_of: NaiveDate,
    pub contract_id: String,
    pub kind: ContractKind,
    pub accrual_start: NaiveDate,
    pub accrual_end: NaiveDate,
    pub futures_rate: f64,
    pub forward_rate: f64,
    pub adjustment: f64,
    pub closed_form: Option<f64>,
    pub std_error: Option<f64>,
    pub method: ConvexityMethod,
    pub flagged: bool,
}

pub fn convexity_records(r: &ConvexityReport) -> Vec<ConvexityRecord> {
    r.rows
        .iter()
        .map(|row| ConvexityRecord {
            as_of: r.as_of,
            contract_id: row.contract_id.clone(),
            kind: row.kind,
            accrual_start: row.accrual_start,
            accrual_end: row.accrual_end,
            futures_rate: row.value.futures_rate,
            forward_rate: row.value.forward_rate,
            adjustment: row.value.adjustment,
            closed_form: row.value.closed_form,
            std_error: row.value.std_error,
            method: row.value.method,
            flagged: row.value.flagged,
        })
        .collect()
}

/// One re-estimation; factor-specific columns are empty for smaller models
/// and measurement errors are `;`-separated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamHistoryRecord {
    pub date: Option<NaiveDate>,
    pub rows: usize,
    pub loglik: f64,
    pub converged: bool,
    pub lambda: f64,
    pub theta_q: Option<f64>,
    pub sigma1: f64,
    pub sigma2: Option<f64>,
    pub sigma3: Option<f64>,
    pub k1_p: f64,
    pub k2_p: Option<f64>,
    pub k3_p: Option<f64>,
    pub theta1_p: f64,
    pub theta2_p: Option<f64>,
    pub theta3_p: Option<f64>,
    pub x1: f64,
    pub x2: Option<f64>,
    pub x3: Option<f64>,
    pub h_sd: String,
}

pub fn param_history_records(history: &[RollingEstimate]) -> Vec<ParamHistoryRecord> {
    history
        .iter()
        .map(|e| {
            let p = &e.result.params;
            let s = p.sigma_diag();
            let k = p.k_p_diag();
            let th: Vec<f64> = p.theta_p.iter().copied().collect();
            let x = &e.result.final_filter.mean;
            let g = |v: &[f64], i: usize| v.get(i).copied();
            ParamHistoryRecord {
                date: e.date,
                rows: e.end_row + 1,
                loglik: e.result.loglik,
                converged: e.result.convergence.converged,
                lambda: p.lambda,
                theta_q: (p.variant == crate::models::ModelVariant::Vasicek).then(|| p.theta_q[0]),
                sigma1: s[0],
                sigma2: g(&s, 1),
                sigma3: g(&s, 2),
                k1_p: k[0],
                k2_p: g(&k, 1),
                k3_p: g(&k, 2),
                theta1_p: th[0],
                theta2_p: g(&th, 1),
                theta3_p: g(&th, 2),
                x1: x[0],
                x2: g(x, 1),
                x3: g(x, 2),
                h_sd: e
                    .result
                    .measurement_errors
                    .sd
                    .iter()
                    .map(|v| format!("{v:e}"))
                    .collect::<Vec<_>>()
                    .join(";"),
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub group: String,
    pub name: String,
    pub true_value: f64,
    pub rmse: Option<f64>,
    pub mean: f64,
    pub sd: f64,
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
}

fn study_record(group: &str, rmse: Option<f64>, r: &SummaryRow) -> StudyRecord {
    StudyRecord {
        group: group.into(),
        name: r.name.clone(),
        true_value: r.true_value,
        rmse,
        mean: r.mean,
        sd: r.sd,
        q05: r.q05,
        q25: r.q25,
        median: r.median,
        q75: r.q75,
        q95: r.q95,
    }
}

pub fn study_records(r: &StudyReport) -> Vec<StudyRecord> {
    r.params
        .iter()
        .map(|p| study_record("param", None, p))
        .chain(r.states.iter().map(|s| study_record("state_bp", Some(s.rmse_bp), &s.summary)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub tenor: String,
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

pub fn comparison_records<'a, I: IntoIterator<Item = (&'a String, &'a ComparisonStats)>>(stats: I) -> Vec<ComparisonRecord> {
    stats
        .into_iter()
        .map(|(t, s)| ComparisonRecord {
            tenor: t.clone(),
            n: s.n,
            rmse: s.rmse,
            mean: s.mean,
            sd: s.sd,
            q05: s.q05,
            q25: s.q25,
            median: s.median,
            q75: s.q75,
            q95: s.q95,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FomcRecord {
    pub meeting: NaiveDate,
    pub contract_month: String,
    pub previous_date: NaiveDate,
    pub scale: f64,
    pub surprise_bp: f64,
}

pub fn fomc_records(rows: &[FomcSurprise]) -> Vec<FomcRecord> {
    rows.iter()
        .map(|r| FomcRecord {
            meeting: r.meeting,
            contract_month: format!("{}-{:02}", r.contract_month.0, r.contract_month.1),
            previous_date: r.previous_date,
            scale: r.scale,
            surprise_bp: r.surprise_bp,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::RegressionResult;
    use crate::mc::ApproxRow;

    #[test]
    fn records_round_trip_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        let rows = vec![ConvexityRecord {
            as_of: "2020-12-11".parse().unwrap(),
            contract_id: "SR3H21".into(),
            kind: ContractKind::ThreeMonth,
            accrual_start: "2021-03-17".parse().unwrap(),
            accrual_end: "2021-06-16".parse().unwrap(),
            futures_rate: 0.001234567890123,
            forward_rate: 0.0012,
            adjustment: 3.4567890123e-5,
            closed_form: Some(3.4567890123e-5),
            std_error: None,
            method: ConvexityMethod::ClosedForm,
            flagged: false,
        }];
        write_csv(&p, &rows).unwrap();
        assert_eq!(read_csv::<ConvexityRecord>(&p).unwrap(), rows);

        let reg = vec![RegressionResult {
            horizon: 2,
            n_obs: 30,
            alpha_bp: 7.4,
            std_error_bp: 5.1,
            annualized_alpha_bp: 44.4,
            annualized_std_error_bp: 30.6,
        }];
        write_csv(&p, &reg).unwrap();
        assert_eq!(read_csv::<RegressionResult>(&p).unwrap(), reg);

        let approx = vec![ApproxRow {
            contract_id: "SR1F21".into(),
            kind: ContractKind::OneMonth,
            accrual_start: "2021-01-01".parse().unwrap(),
            accrual_end: "2021-02-01".parse().unwrap(),
            approx_rate: 0.1 / 3.0,
            exact_rate: 0.2 / 3.0,
            difference: -0.1 / 3.0,
        }];
        write_csv(&p, &approx).unwrap();
        assert_eq!(read_csv::<ApproxRow>(&p).unwrap(), approx);
    }
}
