//! Observation panels: dated rows of futures rates with their contracts.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::futures::{AccrualWindow, ContractKind};

/// Business days per year between panel rows.
pub const DEFAULT_DT: f64 = 1.0 / 250.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub contract_id: String,
    /// Position of the contract in the row's universe (0 = nearest monthly).
    pub slot: usize,
    pub window: AccrualWindow,
    pub rate: f64,
}

impl Observation {
    pub fn kind(&self) -> ContractKind {
        self.window.kind
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelRow {
    pub date: Option<NaiveDate>,
    pub observations: Vec<Observation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationPanel {
    pub rows: Vec<PanelRow>,
    pub dt: f64,
}

impl ObservationPanel {
    pub fn new(rows: Vec<PanelRow>) -> Result<Self> {
        let p = Self { rows, dt: DEFAULT_DT };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::Data("panel has no rows".into()));
        }
        for (i, row) in self.rows.iter().enumerate() {
            let at = || row.date.map_or(format!("row {i}"), |d| d.to_string());
            if row.observations.is_empty() {
                return Err(Error::Data(format!("{}: no observations", at())));
            }
            for o in &row.observations {
                if !(o.rate > -0.05 && o.rate < 0.30) {
                    return Err(Error::Data(format!(
                        "{}: rate {} for {} outside the sanity band",
                        at(),
                        o.rate,
                        o.contract_id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Number of distinct contract slots referenced.
    pub fn n_slots(&self) -> usize {
        self.rows
            .iter()
            .flat_map(|r| r.observations.iter().map(|o| o.slot + 1))
            .max()
            .unwrap_or(0)
    }

    pub fn n_observations(&self) -> usize {
        self.rows.iter().map(|r| r.observations.len()).sum()
    }

    /// Rows `[from, to)` as a new panel.
    pub fn slice(&self, from: usize, to: usize) -> Self {
        Self {
            rows: self.rows[from..to].to_vec(),
            dt: self.dt,
        }
    }
}
