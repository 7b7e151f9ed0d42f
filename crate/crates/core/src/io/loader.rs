//! Builds observation panels from quote and fixing files.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{Observation, ObservationPanel, PanelRow, DEFAULT_DT};
use crate::futures::{AccruedFixings, ContractKind, FuturesContract};
use crate::io::files::QuoteRecord;
use crate::io::universe::resolve_contract;
use crate::term_structure::Calendar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelOptions {
    pub n_monthly: usize,
    pub n_quarterly: usize,
    pub dt: f64,
}

impl Default for PanelOptions {
    fn default() -> Self {
        Self {
            n_monthly: 7,
            n_quarterly: 5,
            dt: DEFAULT_DT,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LoadedPanel {
    pub panel: ObservationPanel,
    pub contracts: BTreeMap<String, FuturesContract>,
    /// Dates with fewer contracts than configured.
    pub flagged: Vec<NaiveDate>,
}

/// Groups quotes by date, keeps the nearest `n_monthly` one-month and
/// `n_quarterly` three-month contracts still accruing, and converts prices
/// to rates. Slots are assigned by proximity within each kind, monthly
/// first.
pub fn load_panel(
    quotes: &[QuoteRecord],
    fixings: &AccruedFixings,
    cal: &Calendar,
    opts: &PanelOptions,
) -> Result<LoadedPanel> {
    let mut contracts: BTreeMap<String, FuturesContract> = BTreeMap::new();
    let mut by_date: BTreeMap<NaiveDate, Vec<&QuoteRecord>> = BTreeMap::new();
    for q in quotes {
        if !contracts.contains_key(&q.contract_id) {
            let accrual = q.accrual_start.zip(q.accrual_end);
            let c = resolve_contract(&q.contract_id, q.kind, accrual, cal)?;
            contracts.insert(q.contract_id.clone(), c);
        }
        by_date.entry(q.date).or_default().push(q);
    }
    if by_date.is_empty() {
        return Err(Error::Data("quote file has no rows".into()));
    }
    let mut rows = Vec::with_capacity(by_date.len());
    let mut flagged = Vec::new();
    for (date, qs) in by_date {
        let mut observations = Vec::new();
        let mut count = 0;
        for (kind, limit, offset) in [
            (ContractKind::OneMonth, opts.n_monthly, 0),
            (ContractKind::ThreeMonth, opts.n_quarterly, opts.n_monthly),
        ] {
            let mut live: Vec<(&FuturesContract, &QuoteRecord)> = qs
                .iter()
                .filter(|q| q.kind == kind)
                .map(|q| (&contracts[&q.contract_id], *q))
                .filter(|(c, _)| c.accrual_end > date)
                .collect();
            live.sort_by_key(|(c, q)| (c.accrual_start, q.contract_id.clone()));
            live.dedup_by_key(|(c, _)| c.contract_id.clone());
            for (j, (c, q)) in live.into_iter().take(limit).enumerate() {
                let window = c.window(date, fixings).map_err(|e| match e {
                    Error::MissingFixings(_) => e,
                    other => Error::Data(format!("{date} {}: {other}", q.contract_id)),
                })?;
                observations.push(Observation {
                    contract_id: q.contract_id.clone(),
                    slot: offset + j,
                    window,
                    rate: q.rate(),
                });
                count += 1;
            }
        }
        if count < opts.n_monthly + opts.n_quarterly {
            flagged.push(date);
        }
        if observations.is_empty() {
            continue;
        }
        rows.push(PanelRow {
            date: Some(date),
            observations,
        });
    }
    let panel = ObservationPanel { rows, dt: opts.dt };
    panel.validate()?;
    Ok(LoadedPanel {
        panel,
        contracts,
        flagged,
    })
}

/// Quotes reproducing a loaded panel, so that loading them again gives the
/// same panel.
pub fn panel_quotes(loaded: &LoadedPanel) -> Vec<QuoteRecord> {
    let mut out = Vec::new();
    for row in &loaded.panel.rows {
        let date = row.date.expect("loaded panels are dated");
        for o in &row.observations {
            let c = &loaded.contracts[&o.contract_id];
            out.push(QuoteRecord {
                date,
                contract_id: o.contract_id.clone(),
                kind: o.kind(),
                accrual_start: Some(c.accrual_start),
                accrual_end: Some(c.accrual_end),
                price: crate::futures::rate_to_price(o.rate),
            });
        }
    }
    out
}
