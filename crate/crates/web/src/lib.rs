//! Browser bindings for the demo page in `www/`.
//!
//! Every exported function returns a flat `Float64Array`; the plain Rust
//! versions below do the work and are what the native tests exercise.

use icann_core::integrator::simulate_path;
use icann_core::netfuncs::{NetForm, PotentialWeights, WeightSet};
use icann_core::refmodels::{make_path, trace_tschoegl, trace_yield_surface, PathKind, PathSpec, Plane, TschoeglParams};
use wasm_bindgen::prelude::*;

/// Second- and first-layer sizes of a reduced potential network.
pub const POTENTIAL_W2: usize = 6;
pub const POTENTIAL_W1: usize = 3;

fn parse<T: std::str::FromStr>(s: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| e.to_string())
}

/// `[λ0, σ0, λ1, σ1, …]` of the von Mises / Armstrong–Frederick network
/// along a generated path.
pub fn stress_strain(mu: f64, sigma_y: f64, c: f64, b: f64, case: &str, stretch: f64, steps: usize) -> Result<Vec<f64>, String> {
    if !(mu > 0.0 && sigma_y > 0.0 && c >= 0.0 && b >= 0.0) {
        return Err("need mu > 0, sigma_y > 0, c >= 0, b >= 0".into());
    }
    let kind: PathKind = parse(case)?;
    let spec = PathSpec { stretch, steps_per_ramp: steps, ..PathSpec::default_for(kind) };
    let path = make_path(&spec).map_err(|e| e.to_string())?;
    let ws = WeightSet::von_mises_af(mu, sigma_y, c, b);
    let res = simulate_path(&ws, &path).map_err(|e| e.to_string())?;
    Ok(path.stretches().iter().zip(&res).flat_map(|(l, r)| [*l, r.sigma.xx]).collect())
}

/// Yield surface `g1 = 1` of a reduced potential network in a principal
/// plane, as `[x0, y0, x1, y1, …]` in the plane's own axes.
pub fn yield_trace(w2: &[f64], w1: &[f64], plane: &str, rays: usize) -> Result<Vec<f64>, String> {
    if w2.len() != POTENTIAL_W2 || w1.len() != POTENTIAL_W1 {
        return Err(format!("expected {POTENTIAL_W2} second-layer and {POTENTIAL_W1} first-layer weights"));
    }
    if w2.iter().chain(w1).any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err("weights must be finite and non-negative".into());
    }
    let g = PotentialWeights { form: NetForm::Reduced, w2: w2.to_vec(), w1: w1.to_vec() };
    let plane: Plane = parse(plane)?;
    let pts = trace_yield_surface(&g, plane, rays).map_err(|e| e.to_string())?;
    Ok(project(&pts, plane))
}

/// Paraboloid reference surface in the 11-22 plane followed by the von Mises
/// circle with the same tensile yield stress, the best any even network can
/// do from tension data alone. Returns `[n_reference, x0, y0, …]`.
pub fn tschoegl_overlay(sigma_t: f64, sigma_c: f64, rays: usize) -> Result<Vec<f64>, String> {
    let params = TschoeglParams { sigma_t, sigma_c, ..TschoeglParams::default() };
    params.validate().map_err(|e| e.to_string())?;
    let reference = project(&trace_tschoegl(&params, Plane::S11S22, rays).map_err(|e| e.to_string())?, Plane::S11S22);
    let vm = PotentialWeights::von_mises(1.0 / (sigma_t * sigma_t));
    let fit = project(&trace_yield_surface(&vm, Plane::S11S22, rays).map_err(|e| e.to_string())?, Plane::S11S22);
    let mut out = vec![(reference.len() / 2) as f64];
    out.extend(reference);
    out.extend(fit);
    Ok(out)
}

fn project(pts: &[[f64; 3]], plane: Plane) -> Vec<f64> {
    let (i, j) = plane.axes();
    pts.iter().flat_map(|p| [p[i], p[j]]).collect()
}

#[wasm_bindgen(js_name = stressStrain)]
pub fn stress_strain_js(mu: f64, sigma_y: f64, c: f64, b: f64, case: &str, stretch: f64, steps: usize) -> Result<Vec<f64>, JsError> {
    stress_strain(mu, sigma_y, c, b, case, stretch, steps).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = yieldTrace)]
pub fn yield_trace_js(w2: &[f64], w1: &[f64], plane: &str, rays: usize) -> Result<Vec<f64>, JsError> {
    yield_trace(w2, w1, plane, rays).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = tschoeglOverlay)]
pub fn tschoegl_overlay_js(sigma_t: f64, sigma_c: f64, rays: usize) -> Result<Vec<f64>, JsError> {
    tschoegl_overlay(sigma_t, sigma_c, rays).map_err(|e| JsError::new(&e))
}
