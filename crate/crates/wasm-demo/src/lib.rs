//! Browser bindings: face-bubble evaluation, the augmented Coulomb traction
//! map, and a small two-block sliding solve. Results are returned as JSON text.

use faultalm::bench::state_counts;
use faultalm::bubble::bubble_value;
use faultalm::contact::{augmented_traction, FrictionParams, PenaltyParams};
use faultalm::fem::{CellKind, ElasticMaterial};
use faultalm::mesh::{build_tensor_grid, FaultPlane, SplitOptions};
use faultalm::solver::{solve, DirichletBc, LoadStep, ProblemDefinition, SolverConfig};
use nalgebra::{Vector2, Vector3};
use wasm_bindgen::prelude::*;

fn err(e: faultalm::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Bubble of local face `face` at reference point (ξ, η, ζ).
pub fn bubble(kind: &str, face: usize, xi: f64, eta: f64, zeta: f64) -> faultalm::Result<f64> {
    bubble_value(CellKind::parse(kind)?, face, &[xi, eta, zeta])
}

#[wasm_bindgen(js_name = bubbleValue)]
pub fn bubble_value_js(kind: &str, face: usize, xi: f64, eta: f64, zeta: f64) -> Result<f64, JsError> {
    bubble(kind, face, xi, eta, zeta).map_err(err)
}

/// One evaluation of the augmented traction from the previous traction
/// (t_N, t_1, t_2) and the current jumps.
#[allow(clippy::too_many_arguments)]
pub fn traction_update(
    t_old: [f64; 3],
    g_n: f64,
    dg: [f64; 2],
    eps: f64,
    cohesion: f64,
    angle_deg: f64,
) -> faultalm::Result<String> {
    let fr = FrictionParams::from_degrees(cohesion, angle_deg)?;
    let pen = PenaltyParams { eps_n: eps, eps_t: eps };
    let a = augmented_traction(&Vector3::from(t_old), g_n, &Vector2::from(dg), &pen, &fr, false, 0.0)?;
    Ok(format!(
        "{{\"t_n\":{},\"t_1\":{},\"t_2\":{},\"state\":\"{}\",\"tau_max\":{}}}",
        a.t[0],
        a.t[1],
        a.t[2],
        a.state.as_str(),
        fr.tau_max(a.t[0]).max(0.0)
    ))
}

#[wasm_bindgen(js_name = tractionUpdate)]
#[allow(clippy::too_many_arguments)]
pub fn traction_update_js(
    t_n: f64,
    t_1: f64,
    t_2: f64,
    g_n: f64,
    dg_1: f64,
    dg_2: f64,
    eps: f64,
    cohesion: f64,
    angle_deg: f64,
) -> Result<String, JsError> {
    traction_update([t_n, t_1, t_2], g_n, [dg_1, dg_2], eps, cohesion, angle_deg).map_err(err)
}

/// Two stacked unit blocks; the top face is moved by (sx, sy, sz) with the
/// base clamped. Returns face-state counts and the slip statistics.
pub fn sliding_blocks(kind: &str, n: usize, sx: f64, sy: f64, sz: f64, angle_deg: f64) -> faultalm::Result<String> {
    if !(1..=6).contains(&n) {
        return Err(faultalm::Error::Domain("cells per edge must be 1..=6".into()));
    }
    let kind = CellKind::parse(kind)?;
    let x: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    let z: Vec<f64> = (0..=2 * n).map(|i| i as f64 / n as f64).collect();
    let mesh = build_tensor_grid([&x, &x, &z], kind, &[FaultPlane::new(2, 1.0)], &[], SplitOptions::default())?;
    let mut prob = ProblemDefinition::new(mesh, ElasticMaterial::new(250e6, 0.3)?, FrictionParams::from_degrees(0.0, angle_deg)?, true)?;
    let mut step = LoadStep::default();
    for (c, v) in [sx, sy, sz].into_iter().enumerate() {
        step.dirichlet.push(DirichletBc { set: "zmin".into(), component: c, value: 0.0 });
        step.dirichlet.push(DirichletBc { set: "zmax".into(), component: c, value: v });
    }
    prob.steps = vec![step];
    let sol = solve(&prob, &SolverConfig::default())?;
    let slip: Vec<f64> = sol.faces.iter().map(|f| f.dg_t.norm()).collect();
    let mean = slip.iter().sum::<f64>() / slip.len() as f64;
    let sd = (slip.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / slip.len() as f64).sqrt();
    let [stick, sl, open] = state_counts(&sol.faces);
    let t_n = sol.faces.iter().map(|f| f.t[0]).sum::<f64>() / slip.len() as f64;
    Ok(format!(
        "{{\"faces\":{},\"stick\":{stick},\"slip\":{sl},\"open\":{open},\"mean_slip\":{mean},\"cv\":{},\"mean_t_n\":{t_n},\"newton\":{}}}",
        slip.len(),
        if mean > 0.0 { sd / mean } else { 0.0 },
        sol.report.total_newton()
    ))
}

#[wasm_bindgen(js_name = slidingBlocks)]
pub fn sliding_blocks_js(kind: &str, n: usize, sx: f64, sy: f64, sz: f64, angle_deg: f64) -> Result<String, JsError> {
    sliding_blocks(kind, n, sx, sy, sz, angle_deg).map_err(err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bubble_at_face_centroid() {
        assert!((bubble("hex8", 0, -1.0, 0.0, 0.0).unwrap() - 1.0).abs() < 1e-14);
        assert!(bubble("quad", 0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn open_when_separating() {
        let s = traction_update([-1.0, 0.0, 0.0], 1.0, [0.0, 0.0], 10.0, 0.0, 30.0).unwrap();
        assert!(s.contains("\"state\":\"open\""), "{s}");
        assert!(s.contains("\"t_n\":0"), "{s}");
    }

    #[test]
    fn blocks_slide_uniformly() {
        let s = sliding_blocks("hex8", 2, 0.1, 0.1, 0.0, 5.71).unwrap();
        assert!(s.contains("\"slip\":4"), "{s}");
        assert!(s.contains("\"mean_slip\":0.14142"), "{s}");
    }
}
