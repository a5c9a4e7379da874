//! Euler equations on the dual algebra and geodesic flows reduced to the group.
//!
//! For a left-invariant metric the momentum in space `m_s` is a constant of
//! motion, and fixing it turns the geodesic flow on `T*G` into a first-order
//! field on `G` itself:
//!
//! ```text
//! left:  ġ = g (A⁻¹ Ad*_g m_s + λ)
//! right: ġ = (A⁻¹ Ad*_{g⁻¹} m_c + λ) g
//! ```
//!
//! [`integrate`] evolves the body momentum with the Euler equations and
//! reconstructs `g(t)` from it, so the momentum-in-space drift it reports is a
//! genuine consistency check between the two pictures.

mod chaplygin;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::inertia::{InertiaError, InertiaOperator};
use crate::integrator::{coupled_rk4_step, rkmk4_step, uniform_steps, Side};
use crate::liecore::{
    check_dim, commutator, orthogonality_defect, raw_coadjoint, raw_pairing, AlgebraElement, GroupElement, LieError,
    Momentum,
};

pub use chaplygin::{chaplygin_operator_field, chaplygin_rhs, integrate_chaplygin, ChaplyginSample, ChaplyginState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReductionError {
    #[error(transparent)]
    Lie(#[from] LieError),
    #[error(transparent)]
    Inertia(#[from] InertiaError),
    #[error("drift budget exceeded at t = {t}: {quantity} drift {value:e} > {budget:e}")]
    StepRejected { t: f64, quantity: &'static str, value: f64, budget: f64 },
    #[error("Chaplygin mass matrix is singular")]
    SingularMassMatrix,
    #[error("vertical vector has norm {norm}, expected 1")]
    NotUnitVertical { norm: f64 },
    #[error("operator depends on the configuration; use the *_at variant with a group element")]
    StateDependentOperator,
    #[error("invalid integration parameters: {0}")]
    InvalidParameters(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chirality {
    Left,
    Right,
}

/// Configuration-dependent inertia map `g ↦ A(g)`.
pub type OperatorMap = Arc<dyn Fn(&GroupElement) -> InertiaOperator + Send + Sync>;

#[derive(Clone)]
pub enum OperatorField {
    Constant(InertiaOperator),
    StateDependent(OperatorMap),
}

impl fmt::Debug for OperatorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(a) => f.debug_tuple("Constant").field(a).finish(),
            Self::StateDependent(_) => f.write_str("StateDependent(..)"),
        }
    }
}

impl OperatorField {
    fn at(&self, g: &DMatrix<f64>) -> std::borrow::Cow<'_, InertiaOperator> {
        match self {
            Self::Constant(a) => std::borrow::Cow::Borrowed(a),
            Self::StateDependent(f) => std::borrow::Cow::Owned(f(&GroupElement::from_raw(g.clone()))),
        }
    }
}

/// A geodesic flow reduced to the group at a fixed conserved momentum.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    chirality: Chirality,
    operator: OperatorField,
    conserved: Momentum,
    lambda: AlgebraElement,
}

impl ReducedSystem {
    /// Left-invariant metric with momentum in space `m_s`.
    pub fn left(operator: InertiaOperator, m_s: Momentum) -> Result<Self, ReductionError> {
        Self::new(Chirality::Left, OperatorField::Constant(operator), m_s)
    }

    /// Right-invariant metric with momentum in the body `m_c`.
    pub fn right(operator: InertiaOperator, m_c: Momentum) -> Result<Self, ReductionError> {
        Self::new(Chirality::Right, OperatorField::Constant(operator), m_c)
    }

    pub fn new(chirality: Chirality, operator: OperatorField, conserved: Momentum) -> Result<Self, ReductionError> {
        if let OperatorField::Constant(a) = &operator {
            check_dim(a.n(), conserved.dim())?;
        }
        let n = conserved.dim();
        Ok(Self { chirality, operator, conserved, lambda: AlgebraElement::zeros(n) })
    }

    /// Adds the constant drift shift λ (a term `(λ, m)` in the Hamiltonian).
    pub fn with_lambda(mut self, lambda: AlgebraElement) -> Result<Self, ReductionError> {
        check_dim(self.n(), lambda.dim())?;
        self.lambda = lambda;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.conserved.dim()
    }

    pub fn chirality(&self) -> Chirality {
        self.chirality
    }

    pub fn operator(&self) -> &OperatorField {
        &self.operator
    }

    /// `m_s` for left-invariant systems, `m_c` for right-invariant ones.
    pub fn conserved_momentum(&self) -> &Momentum {
        &self.conserved
    }

    pub fn lambda(&self) -> &AlgebraElement {
        &self.lambda
    }

    fn constant_operator(&self) -> Result<&InertiaOperator, ReductionError> {
        match &self.operator {
            OperatorField::Constant(a) => Ok(a),
            OperatorField::StateDependent(_) => Err(ReductionError::StateDependentOperator),
        }
    }

    /// Right-hand side of the Euler equations for a constant operator.
    pub fn euler_rhs(&self, m: &Momentum) -> Result<Momentum, ReductionError> {
        check_dim(self.n(), m.dim())?;
        let a = self.constant_operator()?;
        Ok(Momentum::from_raw(self.raw_euler_rhs(a, m.matrix(), self.lambda.matrix())))
    }

    /// Euler right-hand side with the operator evaluated at `g`.
    pub fn euler_rhs_at(&self, g: &GroupElement, m: &Momentum) -> Result<Momentum, ReductionError> {
        check_dim(self.n(), m.dim())?;
        check_dim(self.n(), g.dim())?;
        let a = self.operator.at(g.matrix());
        Ok(Momentum::from_raw(self.raw_euler_rhs(&a, m.matrix(), self.lambda.matrix())))
    }

    fn raw_euler_rhs(&self, a: &InertiaOperator, m: &DMatrix<f64>, shift: &DMatrix<f64>) -> DMatrix<f64> {
        let omega = a.raw_apply_inverse(m) + shift;
        // ad*_ω m = mω - ωm
        match self.chirality {
            Chirality::Left => commutator(m, &omega),
            Chirality::Right => commutator(&omega, m),
        }
    }

    /// The momentum that moves along the flow: `Ad*_g m_s` (left) or `Ad*_{g⁻¹} m_c` (right).
    pub fn moving_momentum(&self, g: &GroupElement) -> Result<Momentum, ReductionError> {
        check_dim(self.n(), g.dim())?;
        Ok(Momentum::from_raw(self.raw_moving_momentum(g.matrix())))
    }

    fn raw_moving_momentum(&self, g: &DMatrix<f64>) -> DMatrix<f64> {
        match self.chirality {
            Chirality::Left => raw_coadjoint(g, self.conserved.matrix()),
            Chirality::Right => raw_coadjoint(&g.transpose(), self.conserved.matrix()),
        }
    }

    /// Trivialized velocity: `g⁻¹ġ` (left) or `ġ g⁻¹` (right).
    pub fn velocity(&self, g: &GroupElement) -> Result<AlgebraElement, ReductionError> {
        check_dim(self.n(), g.dim())?;
        Ok(AlgebraElement::from_raw(self.raw_velocity(g.matrix(), self.lambda.matrix())))
    }

    pub(crate) fn raw_velocity(&self, g: &DMatrix<f64>, shift: &DMatrix<f64>) -> DMatrix<f64> {
        let a = self.operator.at(g);
        a.raw_apply_inverse(&self.raw_moving_momentum(g)) + shift
    }

    pub(crate) fn side(&self) -> Side {
        match self.chirality {
            Chirality::Left => Side::Right,
            Chirality::Right => Side::Left,
        }
    }

    /// The reduced vector field `v(g)` as an `n×n` tangent matrix at `g`.
    pub fn reduced_field(&self, g: &GroupElement) -> Result<DMatrix<f64>, ReductionError> {
        let w = self.velocity(g)?;
        Ok(match self.chirality {
            Chirality::Left => g.matrix() * w.matrix(),
            Chirality::Right => w.matrix() * g.matrix(),
        })
    }

    /// Recovers the conserved momentum from a point and a velocity on the group
    /// by inverting the reduced-field formula.
    pub fn reconstruct_conserved(&self, g: &GroupElement, g_dot: &DMatrix<f64>) -> Result<Momentum, ReductionError> {
        check_dim(self.n(), g.dim())?;
        let gm = g.matrix();
        let gi = gm.transpose();
        let a = self.operator.at(gm);
        let trivial = match self.chirality {
            Chirality::Left => &gi * g_dot,
            Chirality::Right => g_dot * &gi,
        };
        let body = a.raw_apply(&(crate::liecore::skew_part(&trivial) - self.lambda.matrix()))?;
        Ok(Momentum::from_raw(match self.chirality {
            Chirality::Left => raw_coadjoint(&gi, &body),
            Chirality::Right => raw_coadjoint(gm, &body),
        }))
    }

    /// `H = ½(A⁻¹m, m) + (λ, m)` with the operator evaluated at `g`.
    pub fn hamiltonian(&self, g: &GroupElement, m: &Momentum) -> Result<f64, ReductionError> {
        check_dim(self.n(), m.dim())?;
        Ok(self.raw_hamiltonian(g.matrix(), m.matrix()))
    }

    fn raw_hamiltonian(&self, g: &DMatrix<f64>, m: &DMatrix<f64>) -> f64 {
        self.operator.at(g).raw_energy(m) + raw_pairing(m, self.lambda.matrix())
    }

    /// One RKMK4 step of the reduced field with drift shift replaced by `shift`.
    pub(crate) fn raw_flow_step(&self, g: &DMatrix<f64>, h: f64, shift: &DMatrix<f64>) -> DMatrix<f64> {
        rkmk4_step(g, h, self.side(), |y| self.raw_velocity(y, shift))
    }
}

/// Step size, horizon and drift budgets for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationOptions {
    pub t_end: f64,
    pub h: f64,
    /// Largest tolerated relative drift of momentum or energy, and of orthogonality.
    pub drift_budget: f64,
    /// Keep every `sample_every`-th step (the final state is always kept).
    pub sample_every: usize,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        Self { t_end: 10.0, h: 1e-3, drift_budget: 1e-6, sample_every: 1 }
    }
}

impl IntegrationOptions {
    fn validate(&self) -> Result<(), ReductionError> {
        if !(self.h > 0.0) {
            return Err(ReductionError::InvalidParameters("step h must be positive"));
        }
        if !(self.t_end >= 0.0) {
            return Err(ReductionError::InvalidParameters("horizon T must be non-negative"));
        }
        if self.sample_every == 0 {
            return Err(ReductionError::InvalidParameters("sample_every must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DriftReport {
    /// `‖m_s(t) - m_s(0)‖/‖m_s(0)‖` (absolute when `m_s(0) = 0`), for the conserved momentum.
    pub momentum: f64,
    /// `|H(t) - H(0)|/|H(0)|` (absolute when `H(0) = 0`).
    pub energy: f64,
    /// `‖gᵀg - I‖_F`.
    pub orthogonality: f64,
}

impl DriftReport {
    pub fn entries(&self) -> [(&'static str, f64); 3] {
        [("momentum", self.momentum), ("energy", self.energy), ("orthogonality", self.orthogonality)]
    }

    fn max_with(&self, other: &DriftReport) -> DriftReport {
        DriftReport {
            momentum: self.momentum.max(other.momentum),
            energy: self.energy.max(other.energy),
            orthogonality: self.orthogonality.max(other.orthogonality),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrajectorySample {
    pub t: f64,
    pub g: GroupElement,
    /// The evolving momentum: `m_c` for left-invariant systems, `m_s` for right-invariant ones.
    pub m_body: Momentum,
    pub drift: DriftReport,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub max_drift: DriftReport,
}

impl Trajectory {
    pub fn last(&self) -> &TrajectorySample {
        self.samples.last().expect("trajectory always holds the initial sample")
    }
}

fn relative(diff: f64, reference: f64) -> f64 {
    if reference > 0.0 {
        diff / reference
    } else {
        diff
    }
}

/// Integrates the Euler equations together with the reconstruction `ġ = gω`
/// (or `ġ = ωg`), starting from `g0` and the momentum fixed by `sys`.
pub fn integrate(
    sys: &ReducedSystem,
    g0: &GroupElement,
    opts: &IntegrationOptions,
) -> Result<Trajectory, ReductionError> {
    opts.validate()?;
    check_dim(sys.n(), g0.dim())?;
    let (steps, h) = uniform_steps(opts.t_end, opts.h);

    let conserved0 = sys.conserved.matrix().clone();
    let conserved_norm = conserved0.norm();
    let mut g = g0.matrix().clone();
    let mut m = sys.raw_moving_momentum(&g);
    let h0 = sys.raw_hamiltonian(&g, &m);
    let lambda = sys.lambda.matrix();

    let drift_at = |g: &DMatrix<f64>, m: &DMatrix<f64>| {
        let conserved = match sys.chirality {
            Chirality::Left => raw_coadjoint(&g.transpose(), m),
            Chirality::Right => raw_coadjoint(g, m),
        };
        DriftReport {
            momentum: relative((conserved - &conserved0).norm(), conserved_norm),
            energy: relative((sys.raw_hamiltonian(g, m) - h0).abs(), h0.abs()),
            orthogonality: orthogonality_defect(g),
        }
    };

    let mut samples = vec![TrajectorySample {
        t: 0.0,
        g: g0.clone(),
        m_body: Momentum::from_raw(m.clone()),
        drift: drift_at(&g, &m),
    }];
    let mut max_drift = samples[0].drift;

    for step in 1..=steps {
        let (g_next, m_next) = coupled_rk4_step(
            &g,
            &m,
            h,
            sys.side(),
            |y, mm| sys.operator.at(y).raw_apply_inverse(mm) + lambda,
            |y, mm| sys.raw_euler_rhs(&sys.operator.at(y), mm, lambda),
        );
        g = g_next;
        m = m_next;
        let t = step as f64 * h;
        let drift = drift_at(&g, &m);
        for (quantity, value) in drift.entries() {
            if !(value <= opts.drift_budget) {
                return Err(ReductionError::StepRejected { t, quantity, value, budget: opts.drift_budget });
            }
        }
        max_drift = max_drift.max_with(&drift);
        if step % opts.sample_every == 0 || step == steps {
            samples.push(TrajectorySample {
                t,
                g: GroupElement::from_raw(g.clone()),
                m_body: Momentum::from_raw(m.clone()),
                drift,
            });
        }
    }
    Ok(Trajectory { samples, max_drift })
}

/// Flows the reduced field `ġ = v(g)` for time `t` (negative allowed) with
/// RKMK4 steps no larger than `h`.
pub fn flow_reduced(sys: &ReducedSystem, g0: &GroupElement, t: f64, h: f64) -> Result<GroupElement, ReductionError> {
    check_dim(sys.n(), g0.dim())?;
    if !(h > 0.0) {
        return Err(ReductionError::InvalidParameters("step h must be positive"));
    }
    let (steps, dt) = uniform_steps(t.abs(), h);
    let dt = dt * t.signum();
    let mut g = g0.matrix().clone();
    for _ in 0..steps {
        g = sys.raw_flow_step(&g, dt, sys.lambda.matrix());
    }
    Ok(GroupElement::from_raw(g))
}
