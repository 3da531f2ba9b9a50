//! Browser bindings. Every export returns a JSON string; the page parses it.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use covert_aircomp::baselines::{brute_force_scalar, run_baseline, scalar_mse, Scheme};
use covert_aircomp::covertness::{covert_feasible, covert_roots, dep_pinsker_bound};
use covert_aircomp::model::{sample_channels, SystemConfig};

#[derive(Debug, Serialize)]
pub struct CurvePoint {
    pub epsilon: f64,
    pub x1: f64,
    pub x2: f64,
    pub cap_factor: f64,
    /// Pinsker lower bound on Willie's error at the KLD budget.
    pub min_dep: f64,
}

/// Covert roots over `points` detection coefficients spaced evenly in
/// `[eps_min, eps_max]`.
pub fn covert_curves(eps_min: f64, eps_max: f64, points: usize) -> Result<Vec<CurvePoint>, String> {
    if !(0.0 < eps_min && eps_min <= eps_max) || points < 2 {
        return Err("need 0 < eps_min <= eps_max and at least two points".into());
    }
    (0..points)
        .map(|i| {
            let epsilon = eps_min + (eps_max - eps_min) * i as f64 / (points - 1) as f64;
            let b = covert_roots(epsilon).map_err(|e| e.to_string())?;
            Ok(CurvePoint {
                epsilon,
                x1: b.x1,
                x2: b.x2,
                cap_factor: b.cap_factor,
                min_dep: dep_pinsker_bound(2.0 * epsilon * epsilon),
            })
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct Landscape {
    pub w_max: f64,
    pub v_max: f64,
    pub size: usize,
    /// Row-major over `|v|` (rows) and `|w|` (columns); `null` where the
    /// covert cap is violated.
    pub mse: Vec<Option<f64>>,
    pub best: (f64, f64, f64),
}

/// MSE of a single-antenna link over the magnitude plane, with the
/// grid-search optimum.
pub fn scalar_landscape(seed: u64, p_s_db: f64, epsilon: f64, size: usize) -> Result<Landscape, String> {
    if !(2..=400).contains(&size) {
        return Err("size must lie in 2..=400".into());
    }
    let config = SystemConfig::scalar().with_seed(seed).with_p_s_db(p_s_db).with_epsilon(epsilon);
    config.validate().map_err(|e| e.to_string())?;
    let ch = sample_channels(&config, 0).map_err(|e| e.to_string())?;
    let bounds = covert_roots(epsilon).map_err(|e| e.to_string())?;
    let (w_max, v_max) = (config.p_sensor[0].sqrt(), config.p_ap.sqrt());
    let (g2, f2) = (ch.g_k[0][(0, 0)].norm_sqr(), ch.f[(0, 0)].norm_sqr());
    let step = |max: f64, i: usize| max * i as f64 / (size - 1) as f64;
    let mut mse = Vec::with_capacity(size * size);
    for row in 0..size {
        let v = step(v_max, row);
        for col in 0..size {
            let w = step(w_max, col);
            let ok = covert_feasible(g2 * w * w, f2 * v * v, &bounds, config.sigma2_w);
            mse.push(ok.then(|| scalar_mse(&ch, config.sigma2_a, w, v)));
        }
    }
    let best = brute_force_scalar(&ch, &config, 400).map_err(|e| e.to_string())?;
    Ok(Landscape { w_max, v_max, size, mse, best })
}

#[derive(Debug, Serialize)]
pub struct Trace {
    pub scheme: Scheme,
    pub normalized_mse: Vec<f64>,
    pub penalty: Vec<f64>,
    pub residual: Vec<f64>,
    pub kld_final: f64,
    pub converged: bool,
}

/// Runs one scheme on a two-antenna channel draw and returns its
/// per-iteration normalized MSE.
pub fn cccp_trace(seed: u64, k: usize, p_s_db: f64, epsilon: f64, scheme: &str) -> Result<Trace, String> {
    if !(1..=6).contains(&k) {
        return Err("k must lie in 1..=6".into());
    }
    let scheme: Scheme = scheme.parse().map_err(|e: covert_aircomp::error::Error| e.to_string())?;
    let config = SystemConfig::with_dims(2, k, p_s_db).with_seed(seed).with_epsilon(epsilon);
    let ch = sample_channels(&config, 0).map_err(|e| e.to_string())?;
    let r = run_baseline(scheme, &ch, &config, 0).map_err(|e| e.to_string())?;
    Ok(Trace {
        scheme,
        normalized_mse: r.mse_trace.iter().map(|m| m / k as f64).collect(),
        penalty: r.penalty_trace,
        residual: r.residual_trace,
        kld_final: r.kld_final,
        converged: r.converged,
    })
}

fn to_js<T: Serialize>(value: Result<T, String>) -> Result<String, JsError> {
    let value = value.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = covertCurves)]
pub fn covert_curves_js(eps_min: f64, eps_max: f64, points: usize) -> Result<String, JsError> {
    to_js(covert_curves(eps_min, eps_max, points))
}

#[wasm_bindgen(js_name = scalarLandscape)]
pub fn scalar_landscape_js(seed: u32, p_s_db: f64, epsilon: f64, size: usize) -> Result<String, JsError> {
    to_js(scalar_landscape(seed.into(), p_s_db, epsilon, size))
}

#[wasm_bindgen(js_name = cccpTrace)]
pub fn cccp_trace_js(seed: u32, k: usize, p_s_db: f64, epsilon: f64, scheme: &str) -> Result<String, JsError> {
    to_js(cccp_trace(seed.into(), k, p_s_db, epsilon, scheme))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curves_widen_with_epsilon() {
        let c = covert_curves(0.05, 0.3, 6).unwrap();
        assert_eq!(c.len(), 6);
        assert!(c.windows(2).all(|w| w[1].cap_factor > w[0].cap_factor && w[1].min_dep < w[0].min_dep));
        assert!((c[0].min_dep - 0.95).abs() < 1e-12);
        assert!(covert_curves(0.0, 0.1, 5).is_err());
    }

    #[test]
    fn landscape_masks_infeasible_cells() {
        let l = scalar_landscape(3, 30.0, 0.05, 40).unwrap();
        assert_eq!(l.mse.len(), 1600);
        // Origin is always feasible.
        assert!(l.mse[0].is_some());
        let feasible: Vec<f64> = l.mse.iter().flatten().copied().collect();
        assert!(feasible.iter().all(|&m| m >= l.best.0 - 1e-12));
        assert!(scalar_landscape(3, 10.0, 0.1, 1).is_err());
    }

    #[test]
    fn trace_runs_and_serializes() {
        let t = cccp_trace(1, 2, 10.0, 0.1, "proposed").unwrap();
        assert!(t.normalized_mse.len() >= 2);
        assert!(t.normalized_mse.last().unwrap() <= &t.normalized_mse[0]);
        let json = serde_json::to_string(&t).unwrap();
        assert!(json.contains("\"scheme\":\"proposed\""));
        assert!(cccp_trace(1, 2, 10.0, 0.1, "bogus").is_err());
    }
}
