//! wasm-bindgen surface for `www/index.html`. Every export takes plain numbers
//! and returns a JSON string; the `*_json` functions are the native versions.

use lievortex::control::{steer, ControlSystem, SteerOptions};
use lievortex::inertia::InertiaOperator;
use lievortex::liecore::{exp, AlgebraElement, GroupElement, Momentum};
use lievortex::reduction::{integrate, IntegrationOptions, ReducedSystem};
use lievortex::vortex::{darboux_decompose, isotropy_basis, probe_vortex_manifold, DEFAULT_RANK_TOL};
use serde_json::json;
use wasm_bindgen::prelude::*;

fn momentum(n: usize, coords: &[f64]) -> Result<Momentum, String> {
    Momentum::from_coords(n, coords).map_err(|e| e.to_string())
}

fn top(u: &[f64]) -> Result<InertiaOperator, String> {
    InertiaOperator::manakov_diagonal(u).map_err(|e| e.to_string())
}

/// Free top with diagonal `U`: body momentum, energy and drift every `h·every`.
pub fn simulate_json(u: &[f64], m: &[f64], t_end: f64, h: f64, every: usize) -> Result<String, String> {
    let n = u.len();
    let a = top(u)?;
    let sys = ReducedSystem::left(a.clone(), momentum(n, m)?).map_err(|e| e.to_string())?;
    let opts = IntegrationOptions { t_end, h, drift_budget: 1e-3, sample_every: every.max(1) };
    let traj = integrate(&sys, &GroupElement::identity(n), &opts).map_err(|e| e.to_string())?;
    let t: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
    let body: Vec<Vec<f64>> = traj.samples.iter().map(|s| s.m_body.coords()).collect();
    let drift: Vec<f64> = traj.samples.iter().map(|s| s.drift.momentum.max(s.drift.energy)).collect();
    Ok(json!({
        "t": t,
        "m_body": body,
        "drift": drift,
        "max_drift": { "momentum": traj.max_drift.momentum, "energy": traj.max_drift.energy },
    })
    .to_string())
}

/// Isotropy algebra, Darboux levels and torus recurrence for a momentum in so(n).
pub fn vortex_json(n: usize, m: &[f64]) -> Result<String, String> {
    let m = momentum(n, m)?;
    let basis = isotropy_basis(&m, DEFAULT_RANK_TOL);
    let report = probe_vortex_manifold(&basis, &GroupElement::identity(n), 8).map_err(|e| e.to_string())?;
    Ok(json!({
        "dimension": basis.dim(),
        "basis": basis.coordinate_rows(),
        "levels": darboux_decompose(&m, DEFAULT_RANK_TOL).h_levels,
        "abelian": report.abelian,
        "recurrence": report.circles,
    })
    .to_string())
}

/// Steers the SO(3) top `U = diag(1,2,3)` from the identity to `exp(target)`
/// with controls along `E12` and `E23`.
pub fn steer_json(m: &[f64], target: &[f64], epsilon: f64, segments: usize, seed: u64) -> Result<String, String> {
    let sys = ReducedSystem::left(top(&[1.0, 2.0, 3.0])?, momentum(3, m)?).map_err(|e| e.to_string())?;
    let dirs = vec![AlgebraElement::elementary(3, 0, 1), AlgebraElement::elementary(3, 1, 2)];
    let csys = ControlSystem::new(sys, dirs, epsilon, segments, 10.0).map_err(|e| e.to_string())?;
    let target = exp(&AlgebraElement::from_coords(3, target).map_err(|e| e.to_string())?);
    let opts = SteerOptions { seed, max_starts: 8, check_rank: false, ..Default::default() };
    let (result, reached) = match steer(&csys, &GroupElement::identity(3), &target, &opts) {
        Ok(r) => (r, true),
        Err(lievortex::control::ControlError::BudgetExhausted(r)) => (*r, false),
        Err(e) => return Err(e.to_string()),
    };
    Ok(json!({
        "reached": reached,
        "distance": result.distance,
        "signal": result.signal.values(),
        "starts_tried": result.starts_tried,
        "iterations": result.iterations,
    })
    .to_string())
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn simulate(u: Vec<f64>, m: Vec<f64>, t_end: f64, h: f64, every: usize) -> Result<String, JsError> {
    js(simulate_json(&u, &m, t_end, h, every))
}

#[wasm_bindgen]
pub fn vortex(n: usize, m: Vec<f64>) -> Result<String, JsError> {
    js(vortex_json(n, &m))
}

#[wasm_bindgen]
pub fn steer_so3(m: Vec<f64>, target: Vec<f64>, epsilon: f64, segments: usize, seed: u64) -> Result<String, JsError> {
    js(steer_json(&m, &target, epsilon, segments, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> serde_json::Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn simulate_conserves() {
        let v = parse(&simulate_json(&[1.0, 2.0, 3.0], &[0.4, -0.3, 0.5], 2.0, 1e-2, 10).unwrap());
        assert_eq!(v["t"].as_array().unwrap().len(), 21);
        assert!(v["max_drift"]["momentum"].as_f64().unwrap() < 1e-8);
    }

    #[test]
    fn vortex_so4() {
        let v = parse(&vortex_json(4, &[1.0, 0.0, 0.0, 0.0, 0.0, 2.0]).unwrap());
        assert_eq!(v["dimension"], 2);
        assert_eq!(v["abelian"], true);
    }

    #[test]
    fn steer_reaches() {
        let v = parse(&steer_json(&[0.4, -0.3, 0.5], &[0.5, -0.4, 0.3], 1.0, 20, 0).unwrap());
        assert_eq!(v["reached"], true);
        assert_eq!(v["signal"].as_array().unwrap().len(), 20);
    }

    #[test]
    fn bad_input_is_an_error() {
        assert!(vortex_json(3, &[1.0]).is_err());
        assert!(simulate_json(&[1.0, -2.0, 3.0], &[0.0; 3], 1.0, 0.1, 1).is_err());
    }
}
