//! Browser bindings: futures curve, convexity curve and approximation check
//! for a parameter set and state entered on the page.

use chrono::NaiveDate;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use sofr_core::futures::{futures_rate, AccruedFixings, ContractKind};
use sofr_core::io::select_universe;
use sofr_core::math::QuadratureScheme;
use sofr_core::mc::approximation_error_report;
use sofr_core::term_structure::{convexity_curve, term_curve, Calendar};
use sofr_core::{Model, ModelParams};

fn model(params_json: &str) -> Result<Model, String> {
    let p: ModelParams = if params_json.trim().is_empty() {
        ModelParams::reference_afns3()
    } else {
        serde_json::from_str(params_json).map_err(|e| e.to_string())?
    };
    Model::new(p).map_err(|e| e.to_string())
}

fn date(s: &str) -> Result<NaiveDate, String> {
    s.trim().parse().map_err(|e| format!("bad date `{s}`: {e}"))
}

#[derive(Serialize)]
struct CurvePoint {
    contract_id: String,
    kind: ContractKind,
    accrual_start: NaiveDate,
    accrual_end: NaiveDate,
    futures_rate: f64,
    price: f64,
}

#[derive(Serialize)]
struct Curves {
    futures: Vec<CurvePoint>,
    term: sofr_core::term_structure::TermCurve,
}

pub fn futures_curve(params_json: &str, state: &[f64], as_of: &str) -> Result<String, String> {
    let m = model(params_json)?;
    let as_of = date(as_of)?;
    let cal = Calendar::usny();
    let quad = QuadratureScheme::default();
    let contracts = select_universe(as_of, &cal, 7, 5).map_err(|e| e.to_string())?;
    let mut futures = vec![];
    for c in contracts.iter().filter(|c| c.accrual_start >= as_of) {
        let w = c.window(as_of, &AccruedFixings::new()).map_err(|e| e.to_string())?;
        let f = futures_rate(&m, state, &w, &quad).map_err(|e| e.to_string())?;
        futures.push(CurvePoint {
            contract_id: c.contract_id.clone(),
            kind: c.kind,
            accrual_start: c.accrual_start,
            accrual_end: c.accrual_end,
            futures_rate: f,
            price: 100.0 * (1.0 - f),
        });
    }
    let term = term_curve(&m, state, as_of, &[1, 3, 6, 12], &cal).map_err(|e| e.to_string())?;
    serde_json::to_string(&Curves { futures, term }).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct ConvexityPoint {
    start: f64,
    futures_rate: f64,
    forward_rate: f64,
    adjustment_bp: f64,
}

pub fn convexity(params_json: &str, state: &[f64], three_month: bool, horizon: f64) -> Result<String, String> {
    let m = model(params_json)?;
    let kind = if three_month { ContractKind::ThreeMonth } else { ContractKind::OneMonth };
    let pts = convexity_curve(&m, state, kind, horizon, 30).map_err(|e| e.to_string())?;
    let out: Vec<ConvexityPoint> = pts
        .into_iter()
        .map(|(s, c)| ConvexityPoint {
            start: s,
            futures_rate: c.futures_rate,
            forward_rate: c.forward_rate,
            adjustment_bp: c.adjustment * 1e4,
        })
        .collect();
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

pub fn approximation(params_json: &str, state: &[f64], as_of: &str) -> Result<String, String> {
    let m = model(params_json)?;
    let as_of = date(as_of)?;
    let grid = sofr_core::io::cme_grid(as_of, &Calendar::usny()).map_err(|e| e.to_string())?;
    let rows = approximation_error_report(&m, state, &grid, as_of).map_err(|e| e.to_string())?;
    serde_json::to_string(&rows).map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = futuresCurve)]
pub fn futures_curve_js(params_json: &str, state: &[f64], as_of: &str) -> Result<String, JsValue> {
    futures_curve(params_json, state, as_of).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = convexityCurve)]
pub fn convexity_js(params_json: &str, state: &[f64], three_month: bool, horizon: f64) -> Result<String, JsValue> {
    convexity(params_json, state, three_month, horizon).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = approximationReport)]
pub fn approximation_js(params_json: &str, state: &[f64], as_of: &str) -> Result<String, JsValue> {
    approximation(params_json, state, as_of).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = referenceParams)]
pub fn reference_params() -> String {
    serde_json::to_string_pretty(&ModelParams::reference_afns3()).expect("serializable")
}
