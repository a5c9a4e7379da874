//! Chaplygin ball rolling on a horizontal plane.
//!
//! ```text
//! Ṁ = M × ω,   γ̇ = γ × ω,   M = Iω + D γ × (ω × γ)
//! ```
//!
//! The same equations are the generalized Euler equations on SO(3) with the
//! configuration-dependent operator `A(g)⁻¹ = I + D(|γ|²𝟙 - γγᵀ)`, where
//! `γ = gᵀ e₃`; see [`chaplygin_operator_field`].

use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};

use super::{OperatorField, ReductionError};
use crate::inertia::InertiaOperator;
use crate::liecore::GroupElement;

const UNIT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChaplyginState {
    /// Angular momentum in body axes.
    pub momentum: Vector3<f64>,
    /// Unit vertical in body axes.
    pub gamma: Vector3<f64>,
    pub inertia: Matrix3<f64>,
    pub d: f64,
}

impl ChaplyginState {
    pub fn new(
        momentum: Vector3<f64>,
        gamma: Vector3<f64>,
        inertia: Matrix3<f64>,
        d: f64,
    ) -> Result<Self, ReductionError> {
        let norm = gamma.norm();
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(ReductionError::NotUnitVertical { norm });
        }
        if !(d >= 0.0) {
            return Err(ReductionError::InvalidParameters("D must be non-negative"));
        }
        Ok(Self { momentum, gamma, inertia, d })
    }

    /// `I + D(|γ|²𝟙 - γγᵀ)`.
    pub fn mass_matrix(&self) -> Matrix3<f64> {
        mass_matrix(&self.inertia, self.d, &self.gamma)
    }

    /// Solves `M = Iω + Dγ×(ω×γ)` for ω.
    pub fn angular_velocity(&self) -> Result<Vector3<f64>, ReductionError> {
        self.mass_matrix().cholesky().map(|c| c.solve(&self.momentum)).ok_or(ReductionError::SingularMassMatrix)
    }

    pub fn energy(&self) -> Result<f64, ReductionError> {
        Ok(0.5 * self.momentum.dot(&self.angular_velocity()?))
    }
}

fn mass_matrix(inertia: &Matrix3<f64>, d: f64, gamma: &Vector3<f64>) -> Matrix3<f64> {
    inertia + (Matrix3::identity() * gamma.norm_squared() - gamma * gamma.transpose()) * d
}

/// `(Ṁ, γ̇) = (M × ω, γ × ω)`.
pub fn chaplygin_rhs(state: &ChaplyginState) -> Result<(Vector3<f64>, Vector3<f64>), ReductionError> {
    let omega = state.angular_velocity()?;
    Ok((state.momentum.cross(&omega), state.gamma.cross(&omega)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChaplyginSample {
    pub t: f64,
    pub momentum: Vector3<f64>,
    pub gamma: Vector3<f64>,
    pub energy: f64,
}

/// Classical RK4 on `(M, γ)`; every step is sampled.
pub fn integrate_chaplygin(
    initial: &ChaplyginState,
    t_end: f64,
    h: f64,
) -> Result<Vec<ChaplyginSample>, ReductionError> {
    if !(h > 0.0) || !(t_end >= 0.0) {
        return Err(ReductionError::InvalidParameters("need h > 0 and T >= 0"));
    }
    let (steps, h) = crate::integrator::uniform_steps(t_end, h);
    let rhs = |m: Vector3<f64>, g: Vector3<f64>| chaplygin_rhs(&ChaplyginState { momentum: m, gamma: g, ..*initial });

    let mut state = *initial;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(ChaplyginSample { t: 0.0, momentum: state.momentum, gamma: state.gamma, energy: state.energy()? });
    for step in 1..=steps {
        let (m, g) = (state.momentum, state.gamma);
        let (k1m, k1g) = rhs(m, g)?;
        let (k2m, k2g) = rhs(m + k1m * (0.5 * h), g + k1g * (0.5 * h))?;
        let (k3m, k3g) = rhs(m + k2m * (0.5 * h), g + k2g * (0.5 * h))?;
        let (k4m, k4g) = rhs(m + k3m * h, g + k3g * h)?;
        state.momentum = m + (k1m + (k2m + k3m) * 2.0 + k4m) * (h / 6.0);
        state.gamma = g + (k1g + (k2g + k3g) * 2.0 + k4g) * (h / 6.0);
        out.push(ChaplyginSample {
            t: step as f64 * h,
            momentum: state.momentum,
            gamma: state.gamma,
            energy: state.energy()?,
        });
    }
    Ok(out)
}

/// The ball as a configuration-dependent operator on SO(3): `g` maps body to
/// space axes, so the body-frame vertical is `γ = gᵀ e₃`.
pub fn chaplygin_operator_field(inertia: Matrix3<f64>, d: f64) -> OperatorField {
    OperatorField::StateDependent(Arc::new(move |g: &GroupElement| {
        let m = g.matrix();
        let gamma = Vector3::new(m[(2, 0)], m[(2, 1)], m[(2, 2)]);
        InertiaOperator::from_body_tensor(&mass_matrix(&inertia, d, &gamma))
            .expect("SPD inertia plus a PSD rolling term stays SPD")
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(a: f64, b: f64, c: f64) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::new(a, b, c))
    }

    #[test]
    fn free_top_when_d_vanishes() {
        let inertia = diag(1.0, 2.0, 3.0);
        let m = Vector3::new(0.3, -1.0, 0.7);
        let s = ChaplyginState::new(m, Vector3::new(0.0, 0.6, 0.8), inertia, 0.0).unwrap();
        let (dm, _) = chaplygin_rhs(&s).unwrap();
        let omega = inertia.try_inverse().unwrap() * m;
        assert!((dm - m.cross(&omega)).norm() < 1e-15);
    }

    #[test]
    fn principal_axis_alignment_is_an_equilibrium() {
        let e3 = Vector3::z();
        let s = ChaplyginState::new(e3 * 2.0, e3, diag(1.0, 2.0, 3.0), 0.7).unwrap();
        let (dm, dg) = chaplygin_rhs(&s).unwrap();
        assert_eq!(dm.norm(), 0.0);
        assert_eq!(dg.norm(), 0.0);
    }

    #[test]
    fn non_unit_vertical_is_rejected() {
        let err = ChaplyginState::new(Vector3::x(), Vector3::new(0.0, 0.0, 1.1), diag(1.0, 1.0, 1.0), 0.1);
        assert!(matches!(err, Err(ReductionError::NotUnitVertical { .. })));
    }
}
