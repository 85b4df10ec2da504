//! Browser bindings: three operations on a small link, each taking a JSON
//! configuration (absent fields use the library defaults) and returning
//! plot-ready JSON.
//!
//! The plain functions are usable (and tested) natively; the
//! `#[wasm_bindgen]` wrappers only translate errors into JS exceptions.

use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

use simcap::experiments::{capacity_sweep, convergence, low_snr, Curve, ExperimentSpec, Scenario};
use simcap::optimizer::Objective;
use simcap::scene::SystemConfig;

/// Largest meta-atom count per layer the page accepts; keeps one request
/// well under a second or two of compute.
pub const MAX_ATOMS: usize = 64;
pub const MAX_TRIALS: usize = 2000;

fn parse_config(config_json: &str) -> Result<SystemConfig, String> {
    let cfg = SystemConfig::from_json_with_overrides(config_json, &[]).map_err(|e| e.to_string())?;
    if cfg.m_tx > MAX_ATOMS || cfg.n_rx > MAX_ATOMS {
        return Err(format!("the demo is limited to {MAX_ATOMS} meta-atoms per layer"));
    }
    Ok(cfg)
}

fn spec(scenario: Scenario, cfg: SystemConfig, trials: usize, seed: u64) -> Result<ExperimentSpec, String> {
    if trials > MAX_TRIALS {
        return Err(format!("the demo is limited to {MAX_TRIALS} trials"));
    }
    let mut s = ExperimentSpec::new(scenario, cfg);
    s.trials = trials;
    s.seed = seed;
    s.random_profiles = 3;
    s.pga.max_iters = 60;
    Ok(s)
}

fn grid(from_db: f64, to_db: f64, step_db: f64) -> Result<Vec<f64>, String> {
    if !(step_db > 0.0) || !(to_db >= from_db) || (to_db - from_db) / step_db > 200.0 {
        return Err("need from <= to, a positive step and at most 200 points".into());
    }
    let n = ((to_db - from_db) / step_db + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| from_db + step_db * i as f64).collect())
}

#[derive(Serialize)]
struct Series {
    curve: Curve,
    c_lb: Vec<f64>,
    c_mc: Vec<f64>,
    ci: Vec<f64>,
}

/// Lower bound and Monte Carlo capacity of the optimized, random-phase and
/// iid links over an SNR grid (phases optimized mid-grid).
pub fn capacity_curves_json(
    config_json: &str,
    from_db: f64,
    to_db: f64,
    step_db: f64,
    trials: usize,
    seed: u64,
) -> Result<String, String> {
    let cfg = parse_config(config_json)?;
    let pair = (cfg.m_tx, cfg.n_rx);
    let mut s = spec(Scenario::CapacitySweep, cfg, trials, seed)?;
    s.snr_grid_db = grid(from_db, to_db, step_db)?;
    s.mn_pairs = vec![pair];
    let sweep = capacity_sweep(&s).map_err(|e| e.to_string())?;
    let series: Vec<Series> = s
        .curves
        .iter()
        .map(|&curve| {
            let rows: Vec<_> = sweep.rows.iter().filter(|r| r.curve == curve).map(|r| r.report).collect();
            Series {
                curve,
                c_lb: rows.iter().map(|r| r.c_lb).collect(),
                c_mc: rows.iter().map(|r| r.c_mc).collect(),
                ci: rows.iter().map(|r| r.ci).collect(),
            }
        })
        .collect();
    Ok(json!({ "snr_db": s.snr_grid_db, "reference_snr_db": s.sweep_reference_db(), "series": series }).to_string())
}

/// Objective trajectories of `starts` random initializations.
pub fn optimize_json(
    config_json: &str,
    objective: &str,
    starts: usize,
    max_iters: usize,
    seed: u64,
) -> Result<String, String> {
    let cfg = parse_config(config_json)?;
    let mut s = spec(Scenario::Convergence, cfg, 2, seed)?;
    s.objective = objective.parse::<Objective>().map_err(|e| e.to_string())?;
    s.starts = starts.clamp(1, 8);
    s.pga.max_iters = max_iters.min(500);
    let conv = convergence(&s).map_err(|e| e.to_string())?;
    let runs: Vec<_> = conv
        .runs
        .iter()
        .zip(&conv.starts)
        .map(|(run, summary)| json!({ "values": run.values(), "status": summary.status, "stabilization": summary.stabilization }))
        .collect();
    Ok(json!({
        "objective": s.objective.name(),
        "maximize": s.objective.maximize(),
        "reference_snr_db": conv.reference_snr_db,
        "random_mean": conv.random_mean,
        "runs": runs,
    })
    .to_string())
}

/// Analytic low-SNR capacity curves against Eb/N0 plus Monte Carlo points,
/// with each curve's Eb/N0_min and wideband slope.
pub fn low_snr_json(config_json: &str, trials: usize, seed: u64) -> Result<String, String> {
    let cfg = parse_config(config_json)?;
    let s = spec(Scenario::LowSnr, cfg, trials, seed)?;
    let result = low_snr(&s).map_err(|e| e.to_string())?;
    Ok(json!({ "curves": result.curves, "rows": result.rows }).to_string())
}

/// The library's default configuration, shrunk to demo size.
pub fn default_config_json() -> String {
    SystemConfig::from_json_with_overrides(
        "{}",
        &[
            ("n_t".into(), "4".into()),
            ("n_r".into(), "4".into()),
            ("m_tx".into(), "16".into()),
            ("n_rx".into(), "24".into()),
            ("layers_tx".into(), "3".into()),
            ("layers_rx".into(), "3".into()),
        ],
    )
    .expect("demo configuration is valid")
    .to_json()
}

#[wasm_bindgen(js_name = defaultConfig)]
pub fn default_config() -> String {
    default_config_json()
}

#[wasm_bindgen(js_name = capacityCurves)]
pub fn capacity_curves(
    config_json: &str,
    from_db: f64,
    to_db: f64,
    step_db: f64,
    trials: usize,
    seed: u64,
) -> Result<String, JsError> {
    capacity_curves_json(config_json, from_db, to_db, step_db, trials, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn optimize(
    config_json: &str,
    objective: &str,
    starts: usize,
    max_iters: usize,
    seed: u64,
) -> Result<String, JsError> {
    optimize_json(config_json, objective, starts, max_iters, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = lowSnr)]
pub fn low_snr_curves(config_json: &str, trials: usize, seed: u64) -> Result<String, JsError> {
    low_snr_json(config_json, trials, seed).map_err(|e| JsError::new(&e))
}
