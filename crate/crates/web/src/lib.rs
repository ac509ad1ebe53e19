//! WebAssembly bindings for the browser demo. Every entry point takes a
//! model as JSON text and returns its result as a JSON string.

use mrplab::construction::{child_seed, rng_from_seed, sample_counting_path};
use mrplab::exact::{count_pmf, joint_interarrival_probability, BoxQuery};
use mrplab::model_file::{bundled, ModelFile};
use mrplab::{MrpModel, QuadratureConfig};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const MAX_GRID: usize = 40;
const MAX_PATHS: usize = 200_000;
const MAX_EVENTS: usize = 100_000;

fn load(model_json: &str) -> Result<MrpModel, String> {
    let file = ModelFile::parse(model_json).map_err(|e| e.to_string())?;
    file.build().map_err(|e| e.to_string())
}

#[derive(Serialize)]
pub struct CdfGrid {
    pub axis: Vec<f64>,
    /// `values[i][j] = P(W_1 <= axis[i], W_2 <= axis[j])`.
    pub values: Vec<Vec<f64>>,
    pub max_asymmetry: f64,
    pub argmax: (f64, f64),
}

/// Joint CDF of `(W_1, W_2)` on an `n x n` grid over `(0, w_max]`.
pub fn cdf_grid(model_json: &str, w_max: f64, n: usize) -> Result<CdfGrid, String> {
    if !(w_max > 0.0 && w_max.is_finite()) {
        return Err("w_max must be positive".into());
    }
    if n == 0 || n > MAX_GRID {
        return Err(format!("grid size must be in 1..={MAX_GRID}"));
    }
    let model = load(model_json)?;
    let cfg = QuadratureConfig::default();
    let axis: Vec<f64> = (1..=n).map(|i| w_max * i as f64 / n as f64).collect();
    let mut values = vec![vec![0.0; n]; n];
    for (i, &a) in axis.iter().enumerate() {
        for (j, &b) in axis.iter().enumerate() {
            values[i][j] = joint_interarrival_probability(&model, &BoxQuery::upper(&[a, b]), &cfg)
                .map_err(|e| e.to_string())?
                .probability;
        }
    }
    let mut max_asymmetry = 0.0;
    let mut argmax = (axis[0], axis[0]);
    for i in 0..n {
        for j in 0..n {
            let d = (values[i][j] - values[j][i]).abs();
            if d > max_asymmetry {
                max_asymmetry = d;
                argmax = (axis[i], axis[j]);
            }
        }
    }
    Ok(CdfGrid {
        axis,
        values,
        max_asymmetry,
        argmax,
    })
}

#[derive(Serialize)]
pub struct PmfComparison {
    pub t: f64,
    pub exact: Vec<f64>,
    pub empirical: Vec<f64>,
    pub n_paths: usize,
}

/// Exact `P(N_t = k)` next to simulated frequencies for `k = 0..=k_max`.
pub fn pmf_comparison(model_json: &str, t: f64, k_max: usize, n_paths: usize, seed: u64) -> Result<PmfComparison, String> {
    if n_paths == 0 || n_paths > MAX_PATHS {
        return Err(format!("paths must be in 1..={MAX_PATHS}"));
    }
    let model = load(model_json)?;
    let cfg = QuadratureConfig::default();
    let exact = (0..=k_max)
        .map(|k| count_pmf(&model, t, k, &cfg).map(|v| v.probability))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let mut counts = vec![0usize; k_max + 1];
    if t > 0.0 {
        for i in 0..n_paths {
            let mut rng = rng_from_seed(child_seed(seed, i as u64));
            let (_, path) = sample_counting_path(&model, t, MAX_EVENTS, &mut rng).map_err(|e| e.to_string())?;
            let k = path.count_at(t).map_err(|e| e.to_string())?;
            if k <= k_max {
                counts[k] += 1;
            }
        }
    } else {
        counts[0] = n_paths;
    }
    Ok(PmfComparison {
        t,
        exact,
        empirical: counts.iter().map(|&c| c as f64 / n_paths as f64).collect(),
        n_paths,
    })
}

#[derive(Serialize)]
pub struct SampledPath {
    pub theta: Vec<f64>,
    /// `(t, N_t)` at the origin, each jump, and the horizon.
    pub steps: Vec<(f64, f64)>,
}

/// A few counting paths on `[0, horizon]`.
pub fn sample_paths(model_json: &str, n_paths: usize, horizon: f64, seed: u64) -> Result<Vec<SampledPath>, String> {
    if n_paths == 0 || n_paths > 50 {
        return Err("paths must be in 1..=50".into());
    }
    let model = load(model_json)?;
    (0..n_paths)
        .map(|i| {
            let mut rng = rng_from_seed(child_seed(seed, i as u64));
            let (theta, path) = sample_counting_path(&model, horizon, MAX_EVENTS, &mut rng).map_err(|e| e.to_string())?;
            Ok(SampledPath {
                theta,
                steps: path.step_samples(),
            })
        })
        .collect()
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = bundledModel)]
pub fn bundled_model(name: &str) -> Result<String, JsValue> {
    bundled(name)
        .map(str::to_string)
        .ok_or_else(|| JsValue::from_str(&format!("no bundled model `{name}`")))
}

#[wasm_bindgen(js_name = cdfGrid)]
pub fn cdf_grid_js(model_json: &str, w_max: f64, n: usize) -> Result<String, JsValue> {
    to_js(cdf_grid(model_json, w_max, n))
}

#[wasm_bindgen(js_name = pmfComparison)]
pub fn pmf_comparison_js(model_json: &str, t: f64, k_max: usize, n_paths: usize, seed: u32) -> Result<String, JsValue> {
    to_js(pmf_comparison(model_json, t, k_max, n_paths, seed as u64))
}

#[wasm_bindgen(js_name = samplePaths)]
pub fn sample_paths_js(model_json: &str, n_paths: usize, horizon: f64, seed: u32) -> Result<String, JsValue> {
    to_js(sample_paths(model_json, n_paths, horizon, seed as u64))
}
