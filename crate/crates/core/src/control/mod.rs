//! Controlled reduced systems `ġ = g(A⁻¹ Ad*_g m_s + λ₀ - Σ uᵢ(t) λᵢ)`:
//! bracket-generating checks, the planar transversality examples, steering
//! with bounded piecewise-constant controls, and vortex-manifold transfer.

mod planar;
mod rank;
mod steer;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::liecore::{check_dim, AlgebraElement, GroupElement, LieError};
use crate::reduction::{Chirality, ReducedSystem, ReductionError};
use crate::signal::{ControlSignal, SignalError};

pub use planar::{
    planar_bracket_rank, planar_rank_of, transversality_probe, PlanarField, Region, TransversalityReport,
};
pub use rank::{lie_rank, two_generator_check, GenerationReport, RankOptions, RankReport, Word};
pub use steer::{
    steer, transfer_with_signal, vortex_transfer, SteerOptions, SteerResult, TransferEntry, TransferReport,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error(transparent)]
    Lie(#[from] LieError),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("signal drives {found} controls but the system has {expected}")]
    ControlCount { expected: usize, found: usize },
    #[error("signal has {found} segments but the system uses {expected}")]
    SegmentCount { expected: usize, found: usize },
    #[error("invalid parameters: {0}")]
    InvalidParameters(&'static str),
    #[error("steering budget exhausted with best distance {:e}", .0.distance)]
    BudgetExhausted(Box<SteerResult>),
}

/// A left-invariant reduced system driven through `control_dirs` with
/// `|uᵢ| ≤ ε`, `segments` constant pieces over `[0, horizon]`, flowed with
/// RKMK4 steps no larger than `h`.
#[derive(Clone)]
pub struct ControlSystem {
    sys: ReducedSystem,
    control_dirs: Vec<AlgebraElement>,
    epsilon: f64,
    segments: usize,
    horizon: f64,
    h: f64,
}

impl std::fmt::Debug for ControlSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ControlSystem")
            .field("n", &self.sys.n())
            .field("controls", &self.control_dirs)
            .field("epsilon", &self.epsilon)
            .field("segments", &self.segments)
            .field("horizon", &self.horizon)
            .field("h", &self.h)
            .finish()
    }
}

impl ControlSystem {
    pub fn new(
        sys: ReducedSystem,
        control_dirs: Vec<AlgebraElement>,
        epsilon: f64,
        segments: usize,
        horizon: f64,
    ) -> Result<Self, ControlError> {
        if sys.chirality() != Chirality::Left {
            return Err(ControlError::InvalidParameters("controlled systems are left-invariant"));
        }
        for c in &control_dirs {
            check_dim(sys.n(), c.dim())?;
        }
        if !(epsilon > 0.0) || segments == 0 || !(horizon > 0.0 && horizon.is_finite()) {
            return Err(ControlError::InvalidParameters("need ε > 0, N ≥ 1 and 0 < T < ∞"));
        }
        Ok(Self { sys, control_dirs, epsilon, segments, horizon, h: 0.02 })
    }

    /// Sets the flow step (default 0.02).
    pub fn with_step(mut self, h: f64) -> Result<Self, ControlError> {
        if !(h > 0.0) {
            return Err(ControlError::InvalidParameters("flow step must be positive"));
        }
        self.h = h;
        Ok(self)
    }

    pub fn system(&self) -> &ReducedSystem {
        &self.sys
    }

    pub fn n(&self) -> usize {
        self.sys.n()
    }

    pub fn control_dirs(&self) -> &[AlgebraElement] {
        &self.control_dirs
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn zero_signal(&self) -> ControlSignal {
        ControlSignal::zeros(self.segments, self.control_dirs.len().max(1), self.horizon)
            .expect("validated at construction")
    }

    pub fn check_signal(&self, signal: &ControlSignal) -> Result<(), ControlError> {
        let k = self.control_dirs.len().max(1);
        if signal.controls() != k {
            return Err(ControlError::ControlCount { expected: k, found: signal.controls() });
        }
        if signal.segments() != self.segments {
            return Err(ControlError::SegmentCount { expected: self.segments, found: signal.segments() });
        }
        if (signal.horizon() - self.horizon).abs() > 1e-12 * self.horizon {
            return Err(ControlError::InvalidParameters("signal horizon differs from the system horizon"));
        }
        signal.check_bound(self.epsilon)?;
        Ok(())
    }

    /// Effective shift `λ₀ - Σ uᵢ λᵢ` on a segment.
    fn shift(&self, values: &[f64]) -> DMatrix<f64> {
        let mut out = self.sys.lambda().matrix().clone();
        for (c, u) in self.control_dirs.iter().zip(values) {
            out -= c.matrix() * *u;
        }
        out
    }

    fn steps_per_segment(&self) -> (usize, f64) {
        crate::integrator::uniform_steps(self.horizon / self.segments as f64, self.h)
    }

    /// Flows one segment with controls `values` for signed duration `sign · T/N`.
    pub(crate) fn raw_segment(&self, g: &DMatrix<f64>, values: &[f64], sign: f64) -> DMatrix<f64> {
        let (steps, dt) = self.steps_per_segment();
        let shift = self.shift(values);
        let mut g = g.clone();
        for _ in 0..steps {
            g = self.sys.raw_flow_step(&g, sign * dt, &shift);
        }
        g
    }

    /// States at every breakpoint, `N + 1` entries starting with `g0`.
    pub(crate) fn raw_segment_states(&self, g0: &DMatrix<f64>, values: &[Vec<f64>]) -> Vec<DMatrix<f64>> {
        let mut out = Vec::with_capacity(values.len() + 1);
        out.push(g0.clone());
        for row in values {
            let next = self.raw_segment(out.last().expect("nonempty"), row, 1.0);
            out.push(next);
        }
        out
    }

    /// The controlled flow `Φ_u` over `[0, T]`.
    pub fn flow(&self, g0: &GroupElement, signal: &ControlSignal) -> Result<GroupElement, ControlError> {
        check_dim(self.n(), g0.dim())?;
        self.check_signal(signal)?;
        let states = self.raw_segment_states(g0.matrix(), signal.values());
        Ok(GroupElement::from_raw(states.into_iter().last().expect("nonempty")))
    }

    /// All breakpoint states of [`flow`](Self::flow).
    pub fn flow_breakpoints(
        &self,
        g0: &GroupElement,
        signal: &ControlSignal,
    ) -> Result<Vec<GroupElement>, ControlError> {
        check_dim(self.n(), g0.dim())?;
        self.check_signal(signal)?;
        Ok(self.raw_segment_states(g0.matrix(), signal.values()).into_iter().map(GroupElement::from_raw).collect())
    }

    /// Runs the signal backwards in time from `g_end`, undoing [`flow`](Self::flow).
    pub fn flow_reversed(&self, g_end: &GroupElement, signal: &ControlSignal) -> Result<GroupElement, ControlError> {
        check_dim(self.n(), g_end.dim())?;
        self.check_signal(signal)?;
        let mut g = g_end.matrix().clone();
        for row in signal.values().iter().rev() {
            g = self.raw_segment(&g, row, -1.0);
        }
        Ok(GroupElement::from_raw(g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inertia::InertiaOperator;
    use crate::liecore::{exp, Momentum};

    fn top() -> InertiaOperator {
        InertiaOperator::manakov_diagonal(&[1.0, 2.0, 3.0]).unwrap()
    }

    #[test]
    fn pure_control_flow_is_exact() {
        let sys = ReducedSystem::left(top(), Momentum::zeros(3)).unwrap();
        let lam = AlgebraElement::elementary(3, 0, 2);
        let csys = ControlSystem::new(sys, vec![lam.clone()], 1.0, 5, 2.0).unwrap();
        let sig = ControlSignal::constant(5, &[0.3], 2.0).unwrap();
        let g = csys.flow(&GroupElement::identity(3), &sig).unwrap();
        assert!(g.distance(&exp(&lam.scale(-0.6))) < 1e-13);
    }

    #[test]
    fn reversed_flow_undoes_forward_flow() {
        let m = Momentum::from_coords(3, &[0.4, -0.2, 0.7]).unwrap();
        let sys = ReducedSystem::left(top(), m).unwrap();
        let dirs = vec![AlgebraElement::elementary(3, 0, 1), AlgebraElement::elementary(3, 1, 2)];
        let csys = ControlSystem::new(sys, dirs, 1.0, 4, 3.0).unwrap();
        let sig =
            ControlSignal::new(vec![vec![0.5, -0.2], vec![0.1, 0.9], vec![-1.0, 0.0], vec![0.3, 0.3]], 3.0).unwrap();
        let g0 = exp(&AlgebraElement::from_coords(3, &[0.3, 1.0, -0.4]).unwrap());
        let g1 = csys.flow(&g0, &sig).unwrap();
        assert!(csys.flow_reversed(&g1, &sig).unwrap().distance(&g0) < 1e-6);
    }

    #[test]
    fn signal_shape_is_checked() {
        let sys = ReducedSystem::left(top(), Momentum::zeros(3)).unwrap();
        let csys = ControlSystem::new(sys, vec![AlgebraElement::elementary(3, 0, 1)], 0.5, 2, 1.0).unwrap();
        let g = GroupElement::identity(3);
        let wide = ControlSignal::zeros(2, 2, 1.0).unwrap();
        assert!(matches!(csys.flow(&g, &wide), Err(ControlError::ControlCount { .. })));
        let strong = ControlSignal::constant(2, &[0.6], 1.0).unwrap();
        assert!(matches!(csys.flow(&g, &strong), Err(ControlError::Signal(SignalError::BoundViolated { .. }))));
        let short = ControlSignal::zeros(3, 1, 1.0).unwrap();
        assert!(matches!(csys.flow(&g, &short), Err(ControlError::SegmentCount { .. })));
    }
}
