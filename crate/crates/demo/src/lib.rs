//! Browser bindings: Riesz-product heatmap, growth curve, hypothesis check.

use ornstein_core::exact::{rat_int, LatticeVector, MultiIndex, parse_rational};
use ornstein_core::growth::{growth_experiment, GrowthConfig};
use ornstein_core::hypothesis::{check_pair, search_witnesses};
use ornstein_core::norm::{grid_eval, Estimator, EstimatorConfig, TorusFn};
use ornstein_core::riesz::{Oscillator, StructuralProduct};
use serde_json::json;
use wasm_bindgen::prelude::*;

fn parse_freqs(text: &str) -> Result<Vec<LatticeVector>, String> {
    text.split(';')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            let parts: Vec<&str> = t.split(',').map(str::trim).collect();
            match parts.as_slice() {
                [x, y] => Ok(LatticeVector {
                    x: x.parse().map_err(|_| format!("bad coordinate {x:?}"))?,
                    y: y.parse().map_err(|_| format!("bad coordinate {y:?}"))?,
                }),
                _ => Err(format!("expected \"x,y\", got {t:?}")),
            }
        })
        .collect()
}

/// Row-major values of `prod_k (1 + cos 2pi<a_k,x>)` on a `size x size` grid.
pub fn riesz_field(freqs: &str, size: u32) -> Result<Vec<f32>, String> {
    if !(2..=512).contains(&size) {
        return Err("size must lie in 2..=512".into());
    }
    let freqs = parse_freqs(freqs)?;
    if freqs.is_empty() {
        return Err("need at least one frequency".into());
    }
    let n = freqs.len();
    // R_n + 1 as the cosine form with unit weights plus the constant 1
    let form = StructuralProduct::new(freqs, vec![rat_int(1); n], Oscillator::Cosine).map_err(|e| e.to_string())?;
    let (values, _) = grid_eval(TorusFn::Product(&form), size as u64, size as u64).map_err(|e| e.to_string())?;
    Ok(values.iter().map(|v| (v.re + 1.0) as f32).collect())
}

/// Growth table and fit as JSON, estimated by Monte Carlo.
pub fn growth_json(m_max: u32, lacunarity: &str, oscillator: &str, samples: u32, seed: u32) -> Result<String, String> {
    if m_max > 12 {
        return Err("m_max is capped at 12 in the browser".into());
    }
    let est = EstimatorConfig::new(Estimator::Montecarlo, samples as u64, seed as u64);
    let cfg = GrowthConfig::new(
        m_max,
        parse_rational(lacunarity).map_err(|e| e.to_string())?,
        oscillator.parse().map_err(|e: ornstein_core::Error| e.to_string())?,
        est,
    );
    let fit = growth_experiment(&cfg).map_err(|e| e.to_string())?;
    serde_json::to_string(&fit).map_err(|e| e.to_string())
}

/// Hypothesis report as JSON; empty `lambda`/`gamma` triggers a search.
pub fn hypothesis_json(alphas: &str, lambda: &str, gamma: &str) -> Result<String, String> {
    let alphas = MultiIndex::parse_list(alphas).map_err(|e| e.to_string())?;
    let (l, g) = if lambda.trim().is_empty() || gamma.trim().is_empty() {
        match search_witnesses(&alphas, 16).map_err(|e| e.to_string())? {
            Some(pair) => pair,
            None => return Ok(json!({ "found": false }).to_string()),
        }
    } else {
        (MultiIndex::parse(lambda).map_err(|e| e.to_string())?, MultiIndex::parse(gamma).map_err(|e| e.to_string())?)
    };
    let report = check_pair(&alphas, &l, &g).map_err(|e| e.to_string())?;
    Ok(json!({ "found": true, "report": report }).to_string())
}

#[wasm_bindgen(js_name = riesz_field)]
pub fn riesz_field_js(freqs: &str, size: u32) -> Result<Vec<f32>, JsValue> {
    riesz_field(freqs, size).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = growth)]
pub fn growth_js(m_max: u32, lacunarity: &str, oscillator: &str, samples: u32, seed: u32) -> Result<String, JsValue> {
    growth_json(m_max, lacunarity, oscillator, samples, seed).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = check_hypothesis)]
pub fn check_hypothesis_js(alphas: &str, lambda: &str, gamma: &str) -> Result<String, JsValue> {
    hypothesis_json(alphas, lambda, gamma).map_err(|e| JsValue::from_str(&e))
}
