//! Piecewise-constant control signals on a uniform breakpoint grid.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SignalError {
    #[error("time {t} is outside the signal horizon [0, {horizon}]")]
    HorizonExceeded { t: f64, horizon: f64 },
    #[error("signal needs at least one segment and one control channel")]
    Empty,
    #[error("segment {segment} has {found} values, expected {expected}")]
    RaggedRow { segment: usize, expected: usize, found: usize },
    #[error("horizon must be positive and finite, got {0}")]
    BadHorizon(f64),
    #[error("segment {segment} has sup-norm {value} above the bound {bound}")]
    BoundViolated { segment: usize, value: f64, bound: f64 },
}

/// `u(t) = values[j]` on `[jT/N, (j+1)T/N)`; the last segment is closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSignal {
    values: Vec<Vec<f64>>,
    horizon: f64,
}

impl ControlSignal {
    pub fn new(values: Vec<Vec<f64>>, horizon: f64) -> Result<Self, SignalError> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(SignalError::BadHorizon(horizon));
        }
        let k = values.first().map_or(0, Vec::len);
        if k == 0 {
            return Err(SignalError::Empty);
        }
        if let Some((segment, row)) = values.iter().enumerate().find(|(_, r)| r.len() != k) {
            return Err(SignalError::RaggedRow { segment, expected: k, found: row.len() });
        }
        Ok(Self { values, horizon })
    }

    pub fn zeros(segments: usize, controls: usize, horizon: f64) -> Result<Self, SignalError> {
        Self::new(vec![vec![0.0; controls]; segments], horizon)
    }

    pub fn constant(segments: usize, u: &[f64], horizon: f64) -> Result<Self, SignalError> {
        Self::new(vec![u.to_vec(); segments], horizon)
    }

    /// Builds from a flat row-major `N×k` vector.
    pub fn from_flat(flat: &[f64], controls: usize, horizon: f64) -> Result<Self, SignalError> {
        if controls == 0 || flat.is_empty() || !flat.len().is_multiple_of(controls) {
            return Err(SignalError::Empty);
        }
        Self::new(flat.chunks(controls).map(<[f64]>::to_vec).collect(), horizon)
    }

    pub fn flat(&self) -> Vec<f64> {
        self.values.concat()
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn segments(&self) -> usize {
        self.values.len()
    }

    pub fn controls(&self) -> usize {
        self.values[0].len()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn segment_duration(&self) -> f64 {
        self.horizon / self.segments() as f64
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        (0..=self.segments()).map(|j| self.horizon * j as f64 / self.segments() as f64).collect()
    }

    pub fn segment_index(&self, t: f64) -> Result<usize, SignalError> {
        if !(t >= 0.0 && t <= self.horizon * (1.0 + 1e-12)) {
            return Err(SignalError::HorizonExceeded { t, horizon: self.horizon });
        }
        Ok(((t / self.segment_duration()) as usize).min(self.segments() - 1))
    }

    pub fn value_at(&self, t: f64) -> Result<&[f64], SignalError> {
        Ok(&self.values[self.segment_index(t)?])
    }

    /// Largest `|u_i|` over all segments.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().flatten().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Checks every segment against the box `|u_i| ≤ bound`.
    pub fn check_bound(&self, bound: f64) -> Result<(), SignalError> {
        for (segment, row) in self.values.iter().enumerate() {
            let value = row.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            if value > bound {
                return Err(SignalError::BoundViolated { segment, value, bound });
            }
        }
        Ok(())
    }

    /// Splits `[0, t_end]` at the breakpoints into `(segment, steps, dt)` runs
    /// with `dt ≤ h`, so that no step straddles a jump of `u`.
    pub(crate) fn schedule(&self, t_end: f64, h: f64) -> Result<Vec<(usize, usize, f64)>, SignalError> {
        if t_end > self.horizon * (1.0 + 1e-12) {
            return Err(SignalError::HorizonExceeded { t: t_end, horizon: self.horizon });
        }
        let mut out = Vec::new();
        for (j, w) in self.breakpoints().windows(2).enumerate() {
            let end = w[1].min(t_end);
            if end <= w[0] {
                break;
            }
            let (steps, dt) = crate::integrator::uniform_steps(end - w[0], h);
            out.push((j, steps, dt));
        }
        Ok(out)
    }

    /// Segments in reverse order; running it backwards in time retraces the forward flow.
    pub fn reversed(&self) -> Self {
        Self { values: self.values.iter().rev().cloned().collect(), horizon: self.horizon }
    }
}
