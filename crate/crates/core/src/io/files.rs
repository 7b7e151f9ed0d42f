//! CSV inputs: futures quotes, overnight fixings, benchmark term rates and
//! meeting dates.

use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::analysis::RatePoint;
use crate::error::{Error, Result};
use crate::futures::{price_to_rate, AccruedFixings, ContractKind};

/// One settlement price. Accrual dates are optional; when given they
/// override the dates implied by the contract id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuoteRecord {
    pub date: NaiveDate,
    pub contract_id: String,
    pub kind: ContractKind,
    #[serde(default)]
    pub accrual_start: Option<NaiveDate>,
    #[serde(default)]
    pub accrual_end: Option<NaiveDate>,
    /// IMM index points.
    pub price: f64,
}

impl QuoteRecord {
    pub fn rate(&self) -> f64 {
        price_to_rate(self.price)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixingRecord {
    pub date: NaiveDate,
    pub rate: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
struct DateRecord {
    date: NaiveDate,
}

fn parse_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.kind() {
        csv::ErrorKind::Io(_) => Error::Csv(e),
        _ => Error::Parse {
            line,
            msg: e.to_string(),
        },
    }
}

/// Reads a headed CSV into records, reporting the line of the first bad row.
/// `check` validates each record.
pub fn read_records<T, R, F>(reader: R, mut check: F) -> Result<Vec<T>>
where
    T: DeserializeOwned,
    R: Read,
    F: FnMut(&T) -> std::result::Result<(), String>,
{
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(parse_err)?.clone();
    let mut out = Vec::new();
    let mut rec = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut rec) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(parse_err(e)),
        }
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let v: T = rec.deserialize(Some(&headers)).map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        check(&v).map_err(|msg| Error::Parse { line, msg })?;
        out.push(v);
    }
    Ok(out)
}

pub fn write_records<T: Serialize, W: Write>(writer: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))
}

pub fn parse_quotes<R: Read>(reader: R) -> Result<Vec<QuoteRecord>> {
    let rows = read_records(reader, |q: &QuoteRecord| {
        if !(q.price > 50.0 && q.price < 110.0) {
            return Err(format!("price {} for {} outside (50, 110)", q.price, q.contract_id));
        }
        match (q.accrual_start, q.accrual_end) {
            (Some(s), Some(e)) if e <= s => Err(format!("accrual end before start for {}", q.contract_id)),
            (Some(_), None) | (None, Some(_)) => Err(format!("{}: give both accrual dates or neither", q.contract_id)),
            _ => Ok(()),
        }
    })?;
    let mut kinds = std::collections::BTreeMap::new();
    for q in &rows {
        if let Some(k) = kinds.insert(q.contract_id.as_str(), q.kind) {
            if k != q.kind {
                return Err(Error::Data(format!("contract {} listed as both 1M and 3M", q.contract_id)));
            }
        }
    }
    Ok(rows)
}

pub fn read_quotes(path: &Path) -> Result<Vec<QuoteRecord>> {
    parse_quotes(open(path)?)
}

pub fn write_quotes<W: Write>(writer: W, rows: &[QuoteRecord]) -> Result<()> {
    write_records(writer, rows)
}

pub fn parse_fixings<R: Read>(reader: R) -> Result<AccruedFixings> {
    let mut seen = std::collections::BTreeSet::new();
    let rows = read_records(reader, |f: &FixingRecord| {
        if !seen.insert(f.date) {
            return Err(format!("duplicate fixing for {}", f.date));
        }
        if !f.rate.is_finite() {
            return Err("fixing rate is not finite".into());
        }
        Ok(())
    })?;
    Ok(rows.into_iter().map(|f| (f.date, f.rate)).collect())
}

pub fn read_fixings(path: &Path) -> Result<AccruedFixings> {
    parse_fixings(open(path)?)
}

pub fn write_fixings<W: Write>(writer: W, fixings: &AccruedFixings) -> Result<()> {
    let rows: Vec<FixingRecord> = fixings.rates.iter().map(|(d, r)| FixingRecord { date: *d, rate: *r }).collect();
    write_records(writer, &rows)
}

/// Benchmark term rates: `date,tenor,rate` with decimal rates.
pub fn read_benchmark(path: &Path) -> Result<Vec<RatePoint>> {
    read_records(open(path)?, |_: &RatePoint| Ok(()))
}

/// A headed list of dates (`date` column).
pub fn read_dates(path: &Path) -> Result<Vec<NaiveDate>> {
    Ok(read_records(open(path)?, |_: &DateRecord| Ok(()))?
        .into_iter()
        .map(|r| r.date)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const QUOTES: &str = "date,contract_id,kind,accrual_start,accrual_end,price
2019-09-03,SR1U19,1M,,,97.9
2019-09-03,SR3U19,3M,2019-09-18,2019-12-18,98.05
";

    #[test]
    fn price_to_rate_conversion() {
        let q = parse_quotes(QUOTES.as_bytes()).unwrap();
        assert_eq!(q.len(), 2);
        assert!((q[0].rate() - 0.021).abs() < 1e-15);
        assert_eq!(q[0].accrual_start, None);
        assert_eq!(q[1].accrual_end, Some("2019-12-18".parse().unwrap()));
        let r = QuoteRecord { price: 99.7, ..q[0].clone() };
        assert!((r.rate() - 0.003).abs() < 1e-15);
    }

    #[test]
    fn bad_rows_report_line_numbers() {
        let bad = "date,contract_id,kind,accrual_start,accrual_end,price\n2019-09-03,A,1M,,,97.9\n2019-09-04,A,1M,,,300\n";
        match parse_quotes(bad.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let garbled = "date,contract_id,kind,accrual_start,accrual_end,price\n2019-13-03,A,1M,,,97.9\n";
        assert!(matches!(parse_quotes(garbled.as_bytes()), Err(Error::Parse { line: 2, .. })));
        let mixed = "date,contract_id,kind,accrual_start,accrual_end,price\n2019-09-03,A,1M,,,97.9\n2019-09-04,A,3M,,,97.9\n";
        assert!(matches!(parse_quotes(mixed.as_bytes()), Err(Error::Data(_))));
    }

    #[test]
    fn quotes_round_trip() {
        let q = parse_quotes(QUOTES.as_bytes()).unwrap();
        let mut buf = vec![];
        write_quotes(&mut buf, &q).unwrap();
        assert_eq!(parse_quotes(buf.as_slice()).unwrap(), q);
    }

    #[test]
    fn fixings_round_trip_and_duplicates() {
        let text = "date,rate\n2019-09-03,0.0214\n2019-09-04,0.0215\n";
        let f = parse_fixings(text.as_bytes()).unwrap();
        let mut buf = vec![];
        write_fixings(&mut buf, &f).unwrap();
        assert_eq!(parse_fixings(buf.as_slice()).unwrap(), f);
        let dup = "date,rate\n2019-09-03,0.0214\n2019-09-03,0.0215\n";
        assert!(matches!(parse_fixings(dup.as_bytes()), Err(Error::Parse { line: 3, .. })));
    }
}
