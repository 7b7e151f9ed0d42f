//! Input files, contract universes, run configuration and report output.

pub mod config;
pub mod files;
pub mod loader;
pub mod report;
pub mod universe;

pub use config::{RunConfig, MIN_WINDOW};
pub use files::{
    parse_fixings, parse_quotes, read_benchmark, read_dates, read_fixings, read_quotes, write_fixings, write_quotes,
    FixingRecord, QuoteRecord,
};
pub use loader::{load_panel, panel_quotes, LoadedPanel, PanelOptions};
pub use report::{read_csv, write_csv, write_json};
pub use universe::{cme_grid, parse_contract_month, resolve_contract, select_universe};
