//! Contract universes following CME listing conventions.

use chrono::{Datelike, NaiveDate};

use crate::error::{Error, Result};
use crate::futures::{ContractKind, FuturesContract};
use crate::term_structure::Calendar;

const MONTH_CODES: &str = "FGHJKMNQUVXZ";

fn shift(y: i32, m: u32, n: i32) -> (i32, u32) {
    let z = y * 12 + m as i32 - 1 + n;
    (z.div_euclid(12), (z.rem_euclid(12) + 1) as u32)
}

/// The `n_monthly` one-month contracts from the current month on and the
/// `n_quarterly` nearest IMM quarterly contracts still accruing or ahead.
pub fn select_universe(as_of: NaiveDate, cal: &Calendar, n_monthly: usize, n_quarterly: usize) -> Result<Vec<FuturesContract>> {
    let (y, m) = (as_of.year(), as_of.month());
    let mut out = Vec::with_capacity(n_monthly + n_quarterly);
    for i in 0..n_monthly {
        let (cy, cm) = shift(y, m, i as i32);
        out.push(FuturesContract::monthly(cy, cm, cal)?);
    }
    // A quarterly contract accrues for about three months, so scanning from
    // six months back covers every one still running.
    let (sy, sm) = shift(y, m, -6);
    let (mut qy, mut qm) = shift(sy, sm, ((3 - sm % 3) % 3) as i32);
    let mut taken = 0;
    while taken < n_quarterly {
        let c = FuturesContract::quarterly(qy, qm, cal)?;
        if c.accrual_end > as_of {
            out.push(c);
            taken += 1;
        }
        (qy, qm) = shift(qy, qm, 3);
    }
    Ok(out)
}

/// Grid used for approximation and convexity reports: 13 monthly contracts
/// from the month after `as_of` and 39 quarterly contracts starting on or
/// after it.
pub fn cme_grid(as_of: NaiveDate, cal: &Calendar) -> Result<Vec<FuturesContract>> {
    let (y, m) = (as_of.year(), as_of.month());
    let mut out = Vec::with_capacity(52);
    for i in 1..=13 {
        let (cy, cm) = shift(y, m, i);
        out.push(FuturesContract::monthly(cy, cm, cal)?);
    }
    let (mut qy, mut qm) = shift(y, m, ((3 - m % 3) % 3) as i32);
    while out.len() < 52 {
        let c = FuturesContract::quarterly(qy, qm, cal)?;
        if c.accrual_start >= as_of {
            out.push(c);
        }
        (qy, qm) = shift(qy, qm, 3);
    }
    Ok(out)
}

/// Contract month encoded in an id such as `SR1U19` or `SR3Z20`: a month
/// code followed by a two-digit year at the end.
pub fn parse_contract_month(id: &str) -> Result<(i32, u32)> {
    let bad = || Error::Data(format!("cannot infer contract month from id `{id}`; give accrual dates"));
    let chars: Vec<char> = id.trim().chars().collect();
    if chars.len() < 3 {
        return Err(bad());
    }
    let code = chars[chars.len() - 3].to_ascii_uppercase();
    let yy: String = chars[chars.len() - 2..].iter().collect();
    let month = MONTH_CODES.find(code).ok_or_else(bad)? as u32 + 1;
    let yy: i32 = yy.parse().map_err(|_| bad())?;
    Ok((2000 + yy, month))
}

/// Resolves a contract from explicit accrual dates or, failing those, from
/// its id.
pub fn resolve_contract(
    id: &str,
    kind: ContractKind,
    accrual: Option<(NaiveDate, NaiveDate)>,
    cal: &Calendar,
) -> Result<FuturesContract> {
    if let Some((s, e)) = accrual {
        return FuturesContract::new(kind, id, s, e, cal);
    }
    let (y, m) = parse_contract_month(id)?;
    let mut c = match kind {
        ContractKind::OneMonth => FuturesContract::monthly(y, m, cal)?,
        ContractKind::ThreeMonth => FuturesContract::quarterly(y, m, cal)?,
    };
    c.contract_id = id.to_string();
    Ok(c)
}
