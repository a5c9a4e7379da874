//! Empirical structure of a vortex manifold `{exp(Σ tᵢξᵢ)·g0}`.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use serde::Serialize;

use super::VortexBasis;
use crate::liecore::{raw_exp, GroupElement, LieError};

const MAX_GRID: usize = 4096;
const FD_STEP: f64 = 1e-5;
const JACOBIAN_RANK_TOL: f64 = 1e-6;
const ABELIAN_TOL: f64 = 1e-9;
const RETURN_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CircleReport {
    /// Index of the basis element generating the circle.
    pub index: usize,
    /// Smallest `t > 0` with `exp(tξ)·g0 = g0`, if one was found.
    pub period: Option<f64>,
    /// Smallest distance to `g0` seen past the first half turn.
    pub min_return_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifoldReport {
    pub basis_dim: usize,
    /// Largest numerical rank of the parameterization Jacobian over the grid.
    pub dimension: usize,
    pub grid_points: usize,
    pub abelian: bool,
    pub abelian_residual: f64,
    pub closure_residual: f64,
    pub circles: Vec<CircleReport>,
}

/// Samples the manifold on a grid over `[0, 2π)^r` (`steps` per axis, or a
/// Kronecker sequence of at most 4096 points when the full grid is larger)
/// and traces each coordinate circle for recurrence.
pub fn probe_vortex_manifold(basis: &VortexBasis, g0: &GroupElement, steps: usize) -> Result<ManifoldReport, LieError> {
    crate::liecore::check_dim(basis.n(), g0.dim())?;
    let r = basis.dim();
    let points = grid(r, steps.max(1));
    let ranks = crate::parallel::map(points.clone(), |t| jacobian_rank(basis, g0, &t));
    let dimension = ranks.into_iter().max().unwrap_or(0);

    let abelian_residual = basis.abelian_residual();
    let circles = (0..r).map(|i| trace_circle(i, basis.basis[i].matrix(), g0.matrix())).collect();
    Ok(ManifoldReport {
        basis_dim: r,
        dimension,
        grid_points: points.len(),
        abelian: abelian_residual <= ABELIAN_TOL,
        abelian_residual,
        closure_residual: basis.closure_residual(),
        circles,
    })
}

fn grid(r: usize, steps: usize) -> Vec<Vec<f64>> {
    if r == 0 {
        return vec![Vec::new()];
    }
    let full = (steps as f64).powi(r as i32);
    if full <= MAX_GRID as f64 {
        let total = steps.pow(r as u32);
        (0..total)
            .map(|mut k| {
                (0..r)
                    .map(|_| {
                        let i = k % steps;
                        k /= steps;
                        TAU * i as f64 / steps as f64
                    })
                    .collect()
            })
            .collect()
    } else {
        // additive recurrence with square roots of the first r primes
        let alphas: Vec<f64> = primes(r).into_iter().map(|p| (p as f64).sqrt().fract()).collect();
        (0..MAX_GRID).map(|k| alphas.iter().map(|a| TAU * ((k as f64 + 1.0) * a).fract()).collect()).collect()
    }
}

fn primes(count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut c = 2u64;
    while out.len() < count {
        if out.iter().all(|p| !c.is_multiple_of(*p)) {
            out.push(c);
        }
        c += 1;
    }
    out
}

fn point(basis: &VortexBasis, g0: &GroupElement, t: &[f64]) -> DMatrix<f64> {
    basis.point(t, g0).into_matrix()
}

fn jacobian_rank(basis: &VortexBasis, g0: &GroupElement, t: &[f64]) -> usize {
    let n = basis.n();
    let r = t.len();
    let mut jac = DMatrix::zeros(n * n, r);
    let mut tp = t.to_vec();
    for i in 0..r {
        tp[i] = t[i] + FD_STEP;
        let plus = point(basis, g0, &tp);
        tp[i] = t[i] - FD_STEP;
        let minus = point(basis, g0, &tp);
        tp[i] = t[i];
        let col = (plus - minus) / (2.0 * FD_STEP);
        jac.set_column(i, &DMatrix::from_column_slice(n * n, 1, col.as_slice()).column(0));
    }
    let sv = jac.singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > JACOBIAN_RANK_TOL * max).count()
}

fn trace_circle(index: usize, xi: &DMatrix<f64>, g0: &DMatrix<f64>) -> CircleReport {
    let dist = |t: f64| (raw_exp(&(xi * t)) * g0 - g0).norm();
    let omega = xi.singular_values().max();
    if omega == 0.0 {
        return CircleReport { index, period: None, min_return_distance: 0.0 };
    }
    let pairing_norm = xi.norm() / std::f64::consts::SQRT_2;
    let t_start = PI / omega;
    let t_end = (4.0 * TAU / pairing_norm).max(2.0 * t_start);
    let dt = TAU / (64.0 * omega);
    let count = ((t_end - t_start) / dt).ceil() as usize + 1;
    let samples: Vec<(f64, f64)> = (0..=count)
        .map(|k| {
            let t = t_start + k as f64 * dt;
            (t, dist(t))
        })
        .collect();

    let mut best = f64::INFINITY;
    for k in 1..samples.len() - 1 {
        let (prev, cur, next) = (samples[k - 1].1, samples[k].1, samples[k + 1].1);
        if cur <= prev && cur <= next {
            let (t, d) = golden_min(&dist, samples[k - 1].0, samples[k + 1].0);
            best = best.min(d);
            if d <= RETURN_TOL {
                return CircleReport { index, period: Some(t), min_return_distance: d };
            }
        }
    }
    CircleReport { index, period: None, min_return_distance: best }
}

fn golden_min(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > 1e-13 * b.abs().max(1.0) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    let t = 0.5 * (a + b);
    (t, f(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liecore::{AlgebraElement, Momentum};
    use crate::vortex::{isotropy_basis, DEFAULT_RANK_TOL};

    #[test]
    fn so3_circle_period_is_two_pi() {
        let b = isotropy_basis(&Momentum::elementary(3, 0, 1), DEFAULT_RANK_TOL);
        let rep = probe_vortex_manifold(&b, &GroupElement::identity(3), 16).unwrap();
        assert_eq!(rep.dimension, 1);
        assert!(rep.abelian);
        let period = rep.circles[0].period.unwrap();
        assert!((period - TAU).abs() < 1e-6, "period {period}");
    }

    #[test]
    fn so4_maximal_rank_is_a_two_torus() {
        let m = (&AlgebraElement::elementary(4, 0, 1) + &AlgebraElement::elementary(4, 2, 3).scale(2.0)).to_momentum();
        let b = isotropy_basis(&m, DEFAULT_RANK_TOL);
        let g0 = crate::sampling::random_rotation(&mut crate::sampling::seeded(5), 4);
        let rep = probe_vortex_manifold(&b, &g0, 12).unwrap();
        assert_eq!(rep.dimension, 2);
        assert!(rep.abelian);
        assert_eq!(rep.grid_points, 144);
        for c in &rep.circles {
            assert!((c.period.unwrap() - TAU).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_momentum_fills_the_group() {
        let b = isotropy_basis(&Momentum::zeros(3), DEFAULT_RANK_TOL);
        let rep = probe_vortex_manifold(&b, &GroupElement::identity(3), 6).unwrap();
        assert_eq!(rep.dimension, 3);
        assert!(!rep.abelian);
    }

    #[test]
    fn incommensurate_circle_has_no_period() {
        let xi = (&AlgebraElement::elementary(4, 0, 1) + &AlgebraElement::elementary(4, 2, 3).scale(2f64.sqrt()))
            .matrix()
            .clone();
        let rep = trace_circle(0, &(xi / 3f64.sqrt()), &DMatrix::identity(4, 4));
        assert!(rep.period.is_none());
        assert!(rep.min_return_distance > RETURN_TOL);
    }

    #[test]
    fn kronecker_grid_is_capped() {
        assert_eq!(grid(15, 4).len(), MAX_GRID);
        assert_eq!(grid(2, 5).len(), 25);
    }
}
