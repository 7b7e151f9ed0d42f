//! Futures contract definitions and their reduction to model time.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::term_structure::calendar::{act360, third_wednesday, Calendar, Schedule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ContractKind {
    #[serde(rename = "1M")]
    OneMonth,
    #[serde(rename = "3M")]
    ThreeMonth,
}

impl ContractKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ContractKind::OneMonth => "1M",
            ContractKind::ThreeMonth => "3M",
        }
    }

    pub fn index(self) -> usize {
        match self {
            ContractKind::OneMonth => 0,
            ContractKind::ThreeMonth => 1,
        }
    }
}

impl fmt::Display for ContractKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ContractKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "1M" => Ok(ContractKind::OneMonth),
            "3M" => Ok(ContractKind::ThreeMonth),
            other => Err(Error::Domain(format!("unknown contract kind `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FuturesContract {
    pub kind: ContractKind,
    pub contract_id: String,
    pub accrual_start: NaiveDate,
    pub accrual_end: NaiveDate,
    pub fixing_dates: Vec<NaiveDate>,
    pub day_weights: Vec<f64>,
}

const MONTH_CODES: [char; 12] = ['F', 'G', 'H', 'J', 'K', 'M', 'N', 'Q', 'U', 'V', 'X', 'Z'];

impl FuturesContract {
    pub fn new(
        kind: ContractKind,
        contract_id: impl Into<String>,
        accrual_start: NaiveDate,
        accrual_end: NaiveDate,
        cal: &Calendar,
    ) -> Result<Self> {
        let s = Schedule::new(accrual_start, accrual_end, cal)?;
        Ok(Self {
            kind,
            contract_id: contract_id.into(),
            accrual_start,
            accrual_end,
            fixing_dates: s.fixing_dates,
            day_weights: s.day_weights,
        })
    }

    /// One-month contract on a calendar month, e.g. `SR1U19`.
    pub fn monthly(year: i32, month: u32, cal: &Calendar) -> Result<Self> {
        let start = first_of_month(year, month)?;
        let (ny, nm) = next_month(year, month);
        let end = first_of_month(ny, nm)?;
        let id = format!("SR1{}{:02}", MONTH_CODES[month as usize - 1], year.rem_euclid(100));
        Self::new(ContractKind::OneMonth, id, start, end, cal)
    }

    /// Three-month IMM contract accruing from the third Wednesday of the
    /// reference month to the third Wednesday three months later.
    pub fn quarterly(year: i32, month: u32, cal: &Calendar) -> Result<Self> {
        first_of_month(year, month)?;
        let start = third_wednesday(year, month);
        let (ey, em) = if month > 9 { (year + 1, month - 9) } else { (year, month + 3) };
        let end = third_wednesday(ey, em);
        let id = format!("SR3{}{:02}", MONTH_CODES[month as usize - 1], year.rem_euclid(100));
        Self::new(ContractKind::ThreeMonth, id, start, end, cal)
    }

    pub fn schedule(&self) -> Schedule {
        Schedule {
            start: self.accrual_start,
            end: self.accrual_end,
            fixing_dates: self.fixing_dates.clone(),
            day_weights: self.day_weights.clone(),
        }
    }

    pub fn year_fraction(&self) -> f64 {
        act360(self.accrual_start, self.accrual_end)
    }

    pub fn coverage(&self, i: usize) -> (NaiveDate, NaiveDate) {
        let from = self.fixing_dates[i].max(self.accrual_start);
        let to = self.fixing_dates.get(i + 1).copied().unwrap_or(self.accrual_end);
        (from, to)
    }

    /// Reduces the contract to model time at `valuation`, folding in the
    /// fixings already published.
    ///
    /// A fixing counts as realized when it was published before the
    /// valuation date and covers days before it.
    pub fn window(&self, valuation: NaiveDate, accrued: &AccruedFixings) -> Result<AccrualWindow> {
        if valuation >= self.accrual_end {
            return Err(Error::Domain(format!(
                "contract {} accrual ended {} before valuation {valuation}",
                self.contract_id, self.accrual_end
            )));
        }
        let mut missing = Vec::new();
        let mut realized_sum = 0.0;
        let mut realized_growth = 1.0;
        let mut periods = Vec::new();
        for (i, (&fix, &w)) in self.fixing_dates.iter().zip(&self.day_weights).enumerate() {
            let (from, to) = self.coverage(i);
            if fix < valuation && from < valuation {
                match accrued.get(fix) {
                    Some(r) => {
                        realized_sum += w * r;
                        realized_growth *= 1.0 + w * r;
                    }
                    None => missing.push(fix),
                }
            } else {
                periods.push(Period {
                    start: act360(valuation, from),
                    length: act360(from, to),
                });
            }
        }
        if !missing.is_empty() {
            return Err(Error::MissingFixings(missing));
        }
        Ok(AccrualWindow {
            kind: self.kind,
            start: act360(valuation, self.accrual_start),
            end: act360(valuation, self.accrual_end),
            periods,
            realized_sum,
            realized_growth,
        })
    }
}

fn first_of_month(year: i32, month: u32) -> Result<NaiveDate> {
    NaiveDate::from_ymd_opt(year, month, 1)
        .ok_or_else(|| Error::Domain(format!("invalid contract month {year}-{month}")))
}

pub(crate) fn next_month(year: i32, month: u32) -> (i32, u32) {
    if month == 12 {
        (year + 1, 1)
    } else {
        (year, month + 1)
    }
}


/// Published overnight fixings (decimal rates) keyed by fixing date.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AccruedFixings {
    pub rates: BTreeMap<NaiveDate, f64>,
}

impl AccruedFixings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, d: NaiveDate) -> Option<f64> {
        self.rates.get(&d).copied()
    }

    pub fn insert(&mut self, d: NaiveDate, rate: f64) {
        self.rates.insert(d, rate);
    }

    /// Fixings strictly before `cutoff`.
    pub fn before(&self, cutoff: NaiveDate) -> Self {
        Self {
            rates: self.rates.range(..cutoff).map(|(d, r)| (*d, *r)).collect(),
        }
    }
}

impl FromIterator<(NaiveDate, f64)> for AccruedFixings {
    fn from_iter<I: IntoIterator<Item = (NaiveDate, f64)>>(iter: I) -> Self {
        Self {
            rates: iter.into_iter().collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FuturesQuote {
    pub valuation_date: NaiveDate,
    pub contract_id: String,
    pub rate: f64,
    pub price: f64,
}

impl FuturesQuote {
    pub fn from_rate(valuation_date: NaiveDate, contract_id: impl Into<String>, rate: f64) -> Self {
        Self {
            valuation_date,
            contract_id: contract_id.into(),
            rate,
            price: rate_to_price(rate),
        }
    }

    pub fn from_price(valuation_date: NaiveDate, contract_id: impl Into<String>, price: f64) -> Self {
        Self {
            valuation_date,
            contract_id: contract_id.into(),
            rate: price_to_rate(price),
            price,
        }
    }
}

pub fn rate_to_price(rate: f64) -> f64 {
    100.0 * (1.0 - rate)
}

pub fn price_to_rate(price: f64) -> f64 {
    (100.0 - price) / 100.0
}

/// One unrealized overnight period in model time (years from valuation).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Period {
    pub start: f64,
    pub length: f64,
}

/// A contract seen from the valuation date: accrual bounds in years
/// (negative once accrual has begun), the periods still to be fixed and the
/// contribution of realized fixings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccrualWindow {
    pub kind: ContractKind,
    pub start: f64,
    pub end: f64,
    pub periods: Vec<Period>,
    /// Sum of d_i R_i over realized fixings.
    pub realized_sum: f64,
    /// Product of (1 + d_i R_i) over realized fixings.
    pub realized_growth: f64,
}

impl AccrualWindow {
    /// Contract of `days` calendar days starting `start` years ahead, fixed
    /// daily with weight 1/360.
    pub fn stylized(kind: ContractKind, start: f64, days: u32) -> Self {
        let d = 1.0 / 360.0;
        Self {
            kind,
            start,
            end: start + days as f64 * d,
            periods: (0..days)
                .map(|i| Period {
                    start: start + i as f64 * d,
                    length: d,
                })
                .collect(),
            realized_sum: 0.0,
            realized_growth: 1.0,
        }
    }

    pub fn delta(&self) -> f64 {
        self.end - self.start
    }

    /// Start of the part of the accrual still to be observed.
    pub fn remaining_start(&self) -> f64 {
        self.periods.first().map_or(self.end, |p| p.start)
    }

    pub fn is_started(&self) -> bool {
        self.start < 0.0
    }
}
