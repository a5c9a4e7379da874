//! Whittaker reduction of rigid-body flows on SO(n), vortex manifolds of the
//! reduced fields, and steering with bounded piecewise-constant controls.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod inertia;
mod integrator;
pub mod liecore;
mod parallel;
pub mod reduction;
pub mod sampling;
pub mod signal;
pub mod stiefel;
pub mod vortex;

use thiserror::Error;

/// Any error raised by the library, tagged with the module it came from.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("liecore: {0}")]
    Lie(#[from] liecore::LieError),
    #[error("inertia: {0}")]
    Inertia(#[from] inertia::InertiaError),
    #[error("reduction: {0}")]
    Reduction(#[from] reduction::ReductionError),
    #[error("signal: {0}")]
    Signal(#[from] signal::SignalError),
    #[error("stiefel_top: {0}")]
    Stiefel(#[from] stiefel::StiefelError),
    #[error("control: {0}")]
    Control(#[from] control::ControlError),
}

impl Error {
    /// Whether the error reports an exhausted numerical budget (drift or steering).
    pub fn is_budget(&self) -> bool {
        matches!(
            self,
            Error::Reduction(reduction::ReductionError::StepRejected { .. })
                | Error::Stiefel(stiefel::StiefelError::DriftExceeded { .. })
                | Error::Control(control::ControlError::BudgetExhausted(_))
                | Error::Control(control::ControlError::Reduction(reduction::ReductionError::StepRejected { .. }))
        )
    }
}
