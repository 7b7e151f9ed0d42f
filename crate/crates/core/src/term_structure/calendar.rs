//! Business-day calendar, roll conventions and fixing schedules.

use std::collections::BTreeSet;
use std::path::Path;

use chrono::{Datelike, Days, Months, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Holiday set with Saturday/Sunday weekends.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Calendar {
    holidays: BTreeSet<NaiveDate>,
}

pub const BUILTIN_FIRST_YEAR: i32 = 2018;
pub const BUILTIN_LAST_YEAR: i32 = 2030;

fn nth_weekday(year: i32, month: u32, wd: Weekday, n: u8) -> NaiveDate {
    NaiveDate::from_weekday_of_month_opt(year, month, wd, n).expect("valid nth weekday")
}

fn last_weekday(year: i32, month: u32, wd: Weekday) -> NaiveDate {
    NaiveDate::from_weekday_of_month_opt(year, month, wd, 5)
        .unwrap_or_else(|| nth_weekday(year, month, wd, 4))
}

fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid date")
}

/// Federal Reserve holidays for one year (Sunday holidays move to Monday,
/// Saturday holidays are not observed).
pub fn fed_holidays(year: i32) -> Vec<NaiveDate> {
    let mut fixed = vec![ymd(year, 1, 1), ymd(year, 7, 4), ymd(year, 11, 11), ymd(year, 12, 25)];
    if year >= 2022 {
        fixed.push(ymd(year, 6, 19));
    }
    let mut out: Vec<NaiveDate> = fixed
        .into_iter()
        .filter_map(|d| match d.weekday() {
            Weekday::Sat => None,
            Weekday::Sun => Some(d + Days::new(1)),
            _ => Some(d),
        })
        .collect();
    out.extend([
        nth_weekday(year, 1, Weekday::Mon, 3),
        nth_weekday(year, 2, Weekday::Mon, 3),
        last_weekday(year, 5, Weekday::Mon),
        nth_weekday(year, 9, Weekday::Mon, 1),
        nth_weekday(year, 10, Weekday::Mon, 2),
        nth_weekday(year, 11, Weekday::Thu, 4),
    ]);
    out.sort();
    out
}

impl Calendar {
    pub fn weekends_only() -> Self {
        Self::default()
    }

    /// Built-in New York Fed calendar covering 2018-2030.
    pub fn usny() -> Self {
        Self::from_holidays((BUILTIN_FIRST_YEAR..=BUILTIN_LAST_YEAR).flat_map(fed_holidays))
    }

    pub fn from_holidays<I: IntoIterator<Item = NaiveDate>>(dates: I) -> Self {
        Self {
            holidays: dates.into_iter().collect(),
        }
    }

    /// Parses one ISO date per line; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut holidays = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let d = NaiveDate::parse_from_str(line, "%Y-%m-%d").map_err(|e| Error::Parse {
                line: i + 1,
                msg: format!("bad holiday date `{line}`: {e}"),
            })?;
            holidays.insert(d);
        }
        Ok(Self { holidays })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn holidays(&self) -> impl Iterator<Item = &NaiveDate> {
        self.holidays.iter()
    }

    pub fn is_holiday(&self, d: NaiveDate) -> bool {
        self.holidays.contains(&d)
    }

    pub fn is_business_day(&self, d: NaiveDate) -> bool {
        !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) && !self.is_holiday(d)
    }

    /// First business day on or after `d`.
    pub fn following(&self, mut d: NaiveDate) -> NaiveDate {
        while !self.is_business_day(d) {
            d = d + Days::new(1);
        }
        d
    }

    /// Last business day on or before `d`.
    pub fn preceding(&self, mut d: NaiveDate) -> NaiveDate {
        while !self.is_business_day(d) {
            d = d - Days::new(1);
        }
        d
    }

    pub fn modified_following(&self, d: NaiveDate) -> NaiveDate {
        let f = self.following(d);
        if f.month() != d.month() {
            self.preceding(d)
        } else {
            f
        }
    }

    pub fn next_business_day(&self, d: NaiveDate) -> NaiveDate {
        self.following(d + Days::new(1))
    }

    pub fn previous_business_day(&self, d: NaiveDate) -> NaiveDate {
        self.preceding(d - Days::new(1))
    }

    pub fn add_business_days(&self, mut d: NaiveDate, n: u32) -> NaiveDate {
        for _ in 0..n {
            d = self.next_business_day(d);
        }
        d
    }

    /// Business days in `[from, to)`.
    pub fn business_days(&self, from: NaiveDate, to: NaiveDate) -> Vec<NaiveDate> {
        from.iter_days()
            .take_while(|d| *d < to)
            .filter(|d| self.is_business_day(*d))
            .collect()
    }
}

/// Overnight fixings covering an accrual period `[start, end)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub fixing_dates: Vec<NaiveDate>,
    /// Calendar days each fixing covers inside the period, over 360.
    pub day_weights: Vec<f64>,
}

impl Schedule {
    /// Each day in the period uses the latest fixing published on or before
    /// it, so a non-business start is covered by the preceding business day.
    pub fn new(start: NaiveDate, end: NaiveDate, cal: &Calendar) -> Result<Self> {
        if end <= start {
            return Err(Error::Domain(format!("empty accrual period {start}..{end}")));
        }
        let mut fixing_dates = vec![cal.preceding(start)];
        fixing_dates.extend(cal.business_days(start + Days::new(1), end));
        let day_weights = fixing_dates
            .iter()
            .enumerate()
            .map(|(i, &f)| {
                let from = f.max(start);
                let to = fixing_dates.get(i + 1).copied().unwrap_or(end);
                (to - from).num_days() as f64 / 360.0
            })
            .collect();
        Ok(Self {
            start,
            end,
            fixing_dates,
            day_weights,
        })
    }

    /// Calendar-day span `[from, to)` that fixing `i` covers.
    pub fn coverage(&self, i: usize) -> (NaiveDate, NaiveDate) {
        let from = self.fixing_dates[i].max(self.start);
        let to = self.fixing_dates.get(i + 1).copied().unwrap_or(self.end);
        (from, to)
    }

    pub fn year_fraction(&self) -> f64 {
        act360(self.start, self.end)
    }
}

pub fn act360(from: NaiveDate, to: NaiveDate) -> f64 {
    (to - from).num_days() as f64 / 360.0
}

pub fn add_months(d: NaiveDate, months: u32) -> NaiveDate {
    d.checked_add_months(Months::new(months)).expect("date in range")
}

/// Spot-starting schedule over `tenor_months`, end date modified-following.
pub fn make_schedule(start: NaiveDate, tenor_months: u32, cal: &Calendar) -> Result<Schedule> {
    let end = cal.modified_following(add_months(start, tenor_months));
    Schedule::new(start, end, cal)
}

/// Third Wednesday of a month, the IMM reference date.
pub fn third_wednesday(year: i32, month: u32) -> NaiveDate {
    nth_weekday(year, month, Weekday::Wed, 3)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independently listed 2019 holidays.
    const H2019: [&str; 10] = [
        "2019-01-01", "2019-01-21", "2019-02-18", "2019-05-27", "2019-07-04",
        "2019-09-02", "2019-10-14", "2019-11-11", "2019-11-28", "2019-12-25",
    ];

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    #[test]
    fn builtin_2019_holidays() {
        let got: Vec<NaiveDate> = fed_holidays(2019);
        let want: Vec<NaiveDate> = H2019.iter().map(|s| d(s)).collect();
        assert_eq!(got, want);
        // Juneteenth on a Sunday in 2022 is observed Monday 20 June.
        assert!(fed_holidays(2022).contains(&d("2022-06-20")));
        // July 4 2020 fell on a Saturday: not observed.
        assert!(!fed_holidays(2020).contains(&d("2020-07-03")));
    }

    #[test]
    fn year_schedule_matches_brute_force() {
        let cal = Calendar::usny();
        let hol: BTreeSet<NaiveDate> = H2019.iter().map(|s| d(s)).collect();
        let mut want = Vec::new();
        let mut day = d("2019-01-01");
        while day < d("2020-01-01") {
            let wd = day.weekday().num_days_from_monday();
            if wd < 5 && !hol.contains(&day) {
                want.push(day);
            }
            day = day.succ_opt().unwrap();
        }
        let s = Schedule::new(d("2019-01-01"), d("2020-01-01"), &cal).unwrap();
        // 2019-01-01 is a holiday: the preceding business day covers it.
        assert_eq!(s.fixing_dates[0], d("2018-12-31"));
        assert_eq!(&s.fixing_dates[1..], &want[..]);
        let total: f64 = s.day_weights.iter().sum();
        assert!((total - 365.0 / 360.0).abs() < 1e-12);
    }

    #[test]
    fn friday_weight_and_week_sum() {
        let cal = Calendar::usny();
        let s = Schedule::new(d("2019-06-10"), d("2019-06-17"), &cal).unwrap();
        assert_eq!(s.day_weights, vec![1.0 / 360.0, 1.0 / 360.0, 1.0 / 360.0, 1.0 / 360.0, 3.0 / 360.0]);
        let total: f64 = s.day_weights.iter().sum();
        assert!((total - 7.0 / 360.0).abs() < 1e-15);
    }

    #[test]
    fn modified_following_rolls() {
        let cal = Calendar::usny();
        // Saturday mid-month -> Monday
        assert_eq!(cal.modified_following(d("2019-06-15")), d("2019-06-17"));
        // Saturday month end -> preceding Friday
        assert_eq!(cal.modified_following(d("2019-08-31")), d("2019-08-30"));
        let s = make_schedule(d("2019-05-31"), 3, &cal).unwrap();
        assert_eq!(s.end, d("2019-08-30"));
    }

    #[test]
    fn calendar_file_parsing() {
        let c = Calendar::parse("# holidays\n2024-01-01\n\n2024-12-25 # xmas\n").unwrap();
        assert!(c.is_holiday(d("2024-12-25")));
        assert_eq!(c.holidays().count(), 2);
        match Calendar::parse("2024-01-01\nnope\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn imm_dates() {
        assert_eq!(third_wednesday(2019, 6), d("2019-06-19"));
        assert_eq!(third_wednesday(2019, 9), d("2019-09-18"));
    }
}
