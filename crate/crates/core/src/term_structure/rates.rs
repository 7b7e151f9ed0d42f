//! Backward-looking compounded rates and model forward-looking term rates.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::futures::AccruedFixings;
use crate::models::Model;
use crate::term_structure::calendar::{act360, add_months, Calendar, Schedule};

/// Compounded average of the overnight fixings over `[start, end)`,
/// ACT/360 weights.
pub fn backward_rate(fixings: &AccruedFixings, start: NaiveDate, end: NaiveDate, cal: &Calendar) -> Result<f64> {
    let s = Schedule::new(start, end, cal)?;
    let mut growth = 1.0;
    let mut missing = Vec::new();
    for (d, w) in s.fixing_dates.iter().zip(&s.day_weights) {
        match fixings.get(*d) {
            Some(r) => growth *= 1.0 + w * r,
            None => missing.push(*d),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingFixings(missing));
    }
    Ok((growth - 1.0) / s.year_fraction())
}

/// Simple rate over `[s, t]` (years from the state date) implied by model
/// bond prices; `s = 0` gives the spot-starting term rate.
pub fn forward_term_rate(model: &Model, state: &[f64], s: f64, t: f64) -> Result<f64> {
    if !(s >= 0.0 && t > s) {
        return Err(Error::Domain(format!("need 0 <= S < T, got S={s}, T={t}")));
    }
    let ps = model.zcb_price(state, s)?;
    let pt = model.zcb_price(state, t)?;
    Ok((ps / pt - 1.0) / (t - s))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermPoint {
    pub tenor: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermCurve {
    pub as_of: NaiveDate,
    pub points: Vec<TermPoint>,
}

impl TermCurve {
    pub fn rate(&self, tenor: &str) -> Option<f64> {
        self.points.iter().find(|p| p.tenor == tenor).map(|p| p.rate)
    }
}

pub const DEFAULT_TENORS: [u32; 4] = [1, 3, 6, 12];

/// Spot-starting term rates for the given tenors in months. Start is the
/// as-of date, end is modified-following adjusted.
pub fn term_curve(model: &Model, state: &[f64], as_of: NaiveDate, tenors: &[u32], cal: &Calendar) -> Result<TermCurve> {
    let points = tenors
        .iter()
        .map(|&m| {
            if m == 0 {
                return Err(Error::Domain("tenor must be at least one month".into()));
            }
            let end = cal.modified_following(add_months(as_of, m));
            let rate = forward_term_rate(model, state, 0.0, act360(as_of, end))?;
            Ok(TermPoint {
                tenor: format!("{m}M"),
                start: as_of,
                end,
                rate,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TermCurve { as_of, points })
}
