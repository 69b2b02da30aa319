//! wasm-bindgen bindings for the browser demo in `www/`.
//!
//! Every export returns a JSON string; errors become JS exceptions.

use qhmft::ed_oracle::{self, ScfConfig};
use qhmft::objective::EnergyProblem;
use qhmft::optimizer::{self, OptimizerConfig};
use qhmft::sweep::{self, Direction, Thresholds, VarianceConfig};
use qhmft::{ModelParams, Objective};
use serde_json::json;
use wasm_bindgen::prelude::*;

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

/// 2x2 reference curve over `[j2_min, j2_max]`, both sweep directions, with
/// detected transitions.
#[wasm_bindgen]
pub fn oracle_curve(j2_min: f64, j2_max: f64, step: f64) -> Result<String, JsError> {
    js(oracle_curve_json(j2_min, j2_max, step))
}

pub fn oracle_curve_json(j2_min: f64, j2_max: f64, step: f64) -> Result<String, String> {
    if !(step > 0.0) || j2_min > j2_max {
        return Err(format!("bad range [{j2_min}, {j2_max}] with step {step}"));
    }
    let grid = sweep::make_grid(j2_min, j2_max, step);
    if grid.len() > 2001 {
        return Err("at most 2001 grid points".into());
    }
    let records = ed_oracle::hmft_sweep(2, 1.0, &grid, &ScfConfig::default(), &[Direction::Up, Direction::Down])
        .map_err(|e| e.to_string())?;
    let transitions = sweep::detect_transitions(&records, &Thresholds::default()).ok();
    let points: Vec<_> = sweep::min_energy_curve(&records)
        .into_iter()
        .map(|r| json!({ "j2": r.j2, "energy": r.energy, "m_neel": r.m_neel, "m_caf": r.m_caf(), "d_x": r.d_x, "d_y": r.d_y }))
        .collect();
    Ok(json!({ "points": points, "transitions": transitions }).to_string())
}

/// Multi-start optimization at one coupling; returns the best start's energy
/// trace and final observables.
#[wasm_bindgen]
pub fn optimize_point(l: usize, m: usize, tied: bool, j2: f64, restarts: usize, seed: u32) -> Result<String, JsError> {
    js(optimize_point_json(l, m, tied, j2, restarts, seed as u64))
}

pub fn optimize_point_json(l: usize, m: usize, tied: bool, j2: f64, restarts: usize, seed: u64) -> Result<String, String> {
    let err = |e: qhmft::Error| e.to_string();
    let objective = Objective::build(l, m, tied, j2).map_err(err)?;
    let objective = objective.with_model(ModelParams::j2(j2).map_err(err)?);
    let config = OptimizerConfig::default();
    let factory = || EnergyProblem::new(&objective, &config);
    let ms = optimizer::multi_start(factory, restarts, seed, &config).map_err(err)?;
    let best = objective.finish(ms.best().clone()).map_err(err)?;
    let trace: Vec<f64> = best.minimum.trace.records.iter().map(|r| r.energy).collect();
    let reference = if l == 2 {
        ed_oracle::self_consistent_hmft(objective.geometry().clone(), *objective.model(), &ScfConfig::default(), None)
            .ok()
            .map(|r| r.best.energy)
    } else {
        None
    };
    Ok(json!({
        "n_params": objective.n_params(),
        "energy": best.report.e_total,
        "reference": reference,
        "status": best.minimum.status(),
        "iterations": best.minimum.iterations,
        "order": best.order,
        "mean_fields": best.report.mean_fields,
        "trace": trace,
    })
    .to_string())
}

/// Mean and variance of the first gradient component at each J2 in
/// `j2_values` over `samples` random initializations.
#[wasm_bindgen]
pub fn gradient_variance(l: usize, m: usize, samples: usize, seed: u32, j2_values: Vec<f64>) -> Result<String, JsError> {
    js(gradient_variance_json(l, m, samples, seed as u64, j2_values))
}

pub fn gradient_variance_json(l: usize, m: usize, samples: usize, seed: u64, j2_values: Vec<f64>) -> Result<String, String> {
    let config = VarianceConfig {
        l,
        m,
        tied: l == 2,
        j2_values,
        n_samples: samples,
        seed,
        scale: sweep::EnergyScale::PerCluster,
        ..VarianceConfig::default()
    };
    let points = sweep::variance_study(&config).map_err(|e| e.to_string())?;
    serde_json::to_string(&points).map_err(|e| e.to_string())
}
