//! Runge–Kutta–Munthe-Kaas steps of order four.
//!
//! The unknown lives in a matrix space acted on by SO(n) from one side;
//! stages are combined in the algebra and mapped back with the exponential,
//! so orthogonality (or a Gram matrix) is preserved up to the accuracy of
//! `exp` regardless of step size.

use nalgebra::DMatrix;

use crate::liecore::{commutator, raw_exp};

/// Which side the group acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Side {
    /// `y' = y ω(y)`, advanced as `y exp(Θ)`.
    Right,
    /// `y' = ω(y) y`, advanced as `exp(Θ) y`.
    Left,
}

/// `dexp⁻¹` truncated after the second bracket, which is enough for order four.
fn dexpinv(theta: &DMatrix<f64>, k: &DMatrix<f64>, side: Side) -> DMatrix<f64> {
    let c1 = commutator(theta, k);
    let c2 = commutator(theta, &c1);
    match side {
        Side::Right => k + c1 * 0.5 + c2 * (1.0 / 12.0),
        Side::Left => k - c1 * 0.5 + c2 * (1.0 / 12.0),
    }
}

pub(crate) fn act(y: &DMatrix<f64>, theta: &DMatrix<f64>, side: Side) -> DMatrix<f64> {
    let e = raw_exp(theta);
    match side {
        Side::Right => y * e,
        Side::Left => e * y,
    }
}

/// One RKMK4 step. Returns the new point.
pub(crate) fn rkmk4_step<F>(y: &DMatrix<f64>, h: f64, side: Side, mut field: F) -> DMatrix<f64>
where
    F: FnMut(&DMatrix<f64>) -> DMatrix<f64>,
{
    let k1 = field(y);
    let t2 = &k1 * (0.5 * h);
    let k2 = dexpinv(&t2, &field(&act(y, &t2, side)), side);
    let t3 = &k2 * (0.5 * h);
    let k3 = dexpinv(&t3, &field(&act(y, &t3, side)), side);
    let t4 = &k3 * h;
    let k4 = dexpinv(&t4, &field(&act(y, &t4, side)), side);
    let theta = (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
    act(y, &theta, side)
}

/// One step of a coupled system: `y` advanced on the group with velocity
/// `ω(y, m)`, `m` advanced by classical RK4 with rate `f(y, m)`.
pub(crate) fn coupled_rk4_step<W, F>(
    y: &DMatrix<f64>,
    m: &DMatrix<f64>,
    h: f64,
    side: Side,
    mut velocity: W,
    mut rate: F,
) -> (DMatrix<f64>, DMatrix<f64>)
where
    W: FnMut(&DMatrix<f64>, &DMatrix<f64>) -> DMatrix<f64>,
    F: FnMut(&DMatrix<f64>, &DMatrix<f64>) -> DMatrix<f64>,
{
    let w1 = velocity(y, m);
    let r1 = rate(y, m);

    let t2 = &w1 * (0.5 * h);
    let y2 = act(y, &t2, side);
    let m2 = m + &r1 * (0.5 * h);
    let w2 = dexpinv(&t2, &velocity(&y2, &m2), side);
    let r2 = rate(&y2, &m2);

    let t3 = &w2 * (0.5 * h);
    let y3 = act(y, &t3, side);
    let m3 = m + &r2 * (0.5 * h);
    let w3 = dexpinv(&t3, &velocity(&y3, &m3), side);
    let r3 = rate(&y3, &m3);

    let t4 = &w3 * h;
    let y4 = act(y, &t4, side);
    let m4 = m + &r3 * h;
    let w4 = dexpinv(&t4, &velocity(&y4, &m4), side);
    let r4 = rate(&y4, &m4);

    let theta = (w1 + (w2 + w3) * 2.0 + w4) * (h / 6.0);
    let m_next = m + (r1 + (r2 + r3) * 2.0 + r4) * (h / 6.0);
    (act(y, &theta, side), m_next)
}

/// Uniform grid with `ceil(t_end/h)` steps of size `t_end/steps`.
pub(crate) fn uniform_steps(t_end: f64, h: f64) -> (usize, f64) {
    if t_end <= 0.0 {
        return (0, 0.0);
    }
    let steps = ((t_end / h) - 1e-9).ceil().max(1.0) as usize;
    (steps, t_end / steps as f64)
}
