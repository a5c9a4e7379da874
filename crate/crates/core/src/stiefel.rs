//! The n-dimensional Manakov top in redundant body-frame Darboux coordinates.
//!
//! With `M_c = 𝒳ᵀ𝒴 - 𝒴ᵀ𝒳` and `Ω_c = U M_c + M_c U` the rows evolve by
//! `𝒳̇ = 𝒳Ω_c`, `𝒴̇ = 𝒴Ω_c`; internal controls subtract `Σ uᵢ(t)Λᵢ` from Ω_c.
//! The frame moves by right multiplication with a rotation, so the Gram
//! matrix of the stacked rows is a constant of motion.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::integrator::{rkmk4_step, uniform_steps, Side};
use crate::liecore::{check_dim, AlgebraElement, GroupElement, LieError, Momentum};
use crate::signal::{ControlSignal, SignalError};
use crate::vortex::DarbouxFrame;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StiefelError {
    #[error(transparent)]
    Lie(#[from] LieError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("𝒳 is {xr}×{xc} but 𝒴 is {yr}×{yc}")]
    Shape { xr: usize, xc: usize, yr: usize, yc: usize },
    #[error("U must be a symmetric n×n matrix")]
    BadOperator,
    #[error("signal drives {found} controls but the top has {expected}")]
    ControlCount { expected: usize, found: usize },
    #[error("signal sup-norm {value} exceeds the bound {bound}")]
    BoundViolated { value: f64, bound: f64 },
    #[error("Gram drift {value:e} exceeds the budget {budget:e} at t = {t}")]
    DriftExceeded { t: f64, value: f64, budget: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParameters(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StiefelState {
    x: DMatrix<f64>,
    y: DMatrix<f64>,
    gram0: DMatrix<f64>,
}

impl StiefelState {
    /// Records the Gram matrix of `(x⁽¹⁾, y⁽¹⁾, x⁽²⁾, …)` as the reference.
    pub fn new(x: DMatrix<f64>, y: DMatrix<f64>) -> Result<Self, StiefelError> {
        if x.shape() != y.shape() || x.ncols() == 0 {
            return Err(StiefelError::Shape { xr: x.nrows(), xc: x.ncols(), yr: y.nrows(), yc: y.ncols() });
        }
        let gram0 = gram(&x, &y);
        Ok(Self { x, y, gram0 })
    }

    /// Body-frame state of a space-fixed frame seen from `g`: `𝒳_body = 𝒳_space g`.
    pub fn from_frame(frame: &DarbouxFrame, g: &GroupElement) -> Result<Self, StiefelError> {
        check_dim(frame.n(), g.dim())?;
        Self::new(&frame.x * g.matrix(), &frame.y * g.matrix())
    }

    fn with_reference(&self, x: DMatrix<f64>, y: DMatrix<f64>) -> Self {
        Self { x, y, gram0: self.gram0.clone() }
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.ncols()
    }

    /// Number of Darboux blocks, `k/2`.
    pub fn blocks(&self) -> usize {
        self.x.nrows()
    }

    pub fn gram(&self) -> DMatrix<f64> {
        gram(&self.x, &self.y)
    }

    pub fn gram0(&self) -> &DMatrix<f64> {
        &self.gram0
    }

    /// `‖𝒵𝒵ᵀ - gram0‖_F`.
    pub fn gram_drift(&self) -> f64 {
        (self.gram() - &self.gram0).norm()
    }

    /// Singular values of `M_c`, descending (each Darboux level appears twice).
    pub fn spectrum(&self) -> Vec<f64> {
        let mut s: Vec<f64> = reconstruct_momentum(self).matrix().singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    /// Rotates block `l` in its own plane by `h_l s`, which is the body-frame
    /// image of the space shift `exp(s x⁽ˡ⁾∧y⁽ˡ⁾)` (`h_l = |x⁽ˡ⁾|²`).
    pub fn vortex_shift(&self, l: usize, s: f64) -> Self {
        let h = self.x.row(l).norm_squared();
        let (sn, cs) = (h * s).sin_cos();
        let (xl, yl) = (self.x.row(l).into_owned(), self.y.row(l).into_owned());
        let mut x = self.x.clone();
        let mut y = self.y.clone();
        x.set_row(l, &(&xl * cs + &yl * sn));
        y.set_row(l, &(&yl * cs - &xl * sn));
        self.with_reference(x, y)
    }

    /// Interleaved rows `x⁽¹⁾, y⁽¹⁾, …`.
    pub fn stacked(&self) -> DMatrix<f64> {
        crate::vortex::stack_rows(&self.x, &self.y)
    }

    fn with_stacked(&self, z: &DMatrix<f64>) -> Self {
        let r = self.blocks();
        let x = DMatrix::from_fn(r, self.n(), |l, j| z[(2 * l, j)]);
        let y = DMatrix::from_fn(r, self.n(), |l, j| z[(2 * l + 1, j)]);
        self.with_reference(x, y)
    }
}

fn gram(x: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    let z = crate::vortex::stack_rows(x, y);
    &z * z.transpose()
}

/// `M_c = 𝒳ᵀ𝒴 - 𝒴ᵀ𝒳`.
pub fn reconstruct_momentum(state: &StiefelState) -> Momentum {
    Momentum::from_raw(state.x.transpose() * &state.y - state.y.transpose() * &state.x)
}

fn check_u(u: &DMatrix<f64>, n: usize) -> Result<(), StiefelError> {
    if u.shape() != (n, n) || (u - u.transpose()).amax() > 1e-12 * u.amax().max(1.0) {
        return Err(StiefelError::BadOperator);
    }
    Ok(())
}

fn omega(u: &DMatrix<f64>, m: &DMatrix<f64>) -> DMatrix<f64> {
    u * m + m * u
}

/// `𝒳̇ = 𝒳[U M_c + 𝒳ᵀ𝒴 U]`, `𝒴̇ = 𝒴[U M_c - 𝒴ᵀ𝒳 U]`, evaluated in this form.
/// On Darboux frames (`𝒳𝒴ᵀ = 0`) it coincides with `(𝒳Ω_c, 𝒴Ω_c)`.
pub fn stiefel_rhs(state: &StiefelState, u: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>), StiefelError> {
    check_u(u, state.n())?;
    let (x, y) = (&state.x, &state.y);
    let m = reconstruct_momentum(state).into_matrix();
    let um = u * &m;
    let dx = x * (&um + x.transpose() * y * u);
    let dy = y * (&um - y.transpose() * x * u);
    Ok((dx, dy))
}

/// A Manakov top with internal controls `u(t)` along fixed directions `Λᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlledTop {
    u: DMatrix<f64>,
    controls: Vec<AlgebraElement>,
    bound: f64,
    signal: Option<ControlSignal>,
}

impl ControlledTop {
    /// Uncontrolled top; `U` may be any symmetric matrix, including zero.
    pub fn free(u: DMatrix<f64>) -> Result<Self, StiefelError> {
        check_u(&u, u.nrows())?;
        Ok(Self { u, controls: Vec::new(), bound: f64::INFINITY, signal: None })
    }

    pub fn new(
        u: DMatrix<f64>,
        controls: Vec<AlgebraElement>,
        bound: f64,
        signal: ControlSignal,
    ) -> Result<Self, StiefelError> {
        check_u(&u, u.nrows())?;
        for c in &controls {
            check_dim(u.nrows(), c.dim())?;
        }
        if signal.controls() != controls.len() {
            return Err(StiefelError::ControlCount { expected: controls.len(), found: signal.controls() });
        }
        if !(bound > 0.0) {
            return Err(StiefelError::InvalidParameters("control bound must be positive"));
        }
        if signal.sup_norm() > bound {
            return Err(StiefelError::BoundViolated { value: signal.sup_norm(), bound });
        }
        Ok(Self { u, controls, bound, signal: Some(signal) })
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn controls(&self) -> &[AlgebraElement] {
        &self.controls
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn signal(&self) -> Option<&ControlSignal> {
        self.signal.as_ref()
    }

    fn control_term(&self, values: &[f64]) -> DMatrix<f64> {
        let n = self.u.nrows();
        let mut out = DMatrix::zeros(n, n);
        for (c, v) in self.controls.iter().zip(values) {
            out += c.matrix() * *v;
        }
        out
    }

    /// `Σ uᵢ(t) Λᵢ`; zero for an uncontrolled top.
    pub fn control_at(&self, t: f64) -> Result<DMatrix<f64>, StiefelError> {
        match &self.signal {
            Some(s) => Ok(self.control_term(s.value_at(t)?)),
            None => Ok(DMatrix::zeros(self.u.nrows(), self.u.nrows())),
        }
    }
}

/// [`stiefel_rhs`] minus `(𝒳Λ(t), 𝒴Λ(t))` with `Λ(t) = Σ uᵢ(t)Λᵢ`.
pub fn controlled_rhs(
    state: &StiefelState,
    top: &ControlledTop,
    t: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>), StiefelError> {
    check_dim(top.u.nrows(), state.n())?;
    let lam = top.control_at(t)?;
    let (dx, dy) = stiefel_rhs(state, &top.u)?;
    Ok((dx - &state.x * &lam, dy - &state.y * &lam))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StiefelOptions {
    pub t_end: f64,
    pub h: f64,
    pub drift_budget: f64,
    pub sample_every: usize,
}

impl Default for StiefelOptions {
    fn default() -> Self {
        Self { t_end: 10.0, h: 1e-3, drift_budget: 1e-6, sample_every: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StiefelSample {
    pub t: f64,
    pub state: StiefelState,
    pub gram_drift: f64,
    pub spectrum: Vec<f64>,
}

/// RKMK4 on the stacked rows with velocity `Ω_c - Λ(t)`. Steps never straddle
/// a control breakpoint.
pub fn integrate_stiefel(
    initial: &StiefelState,
    top: &ControlledTop,
    opts: &StiefelOptions,
) -> Result<Vec<StiefelSample>, StiefelError> {
    check_dim(top.u.nrows(), initial.n())?;
    if !(opts.h > 0.0) || !(opts.t_end >= 0.0) || opts.sample_every == 0 {
        return Err(StiefelError::InvalidParameters("need h > 0, T >= 0 and sample_every >= 1"));
    }
    let runs: Vec<(DMatrix<f64>, usize, f64)> = match &top.signal {
        Some(sig) => sig
            .schedule(opts.t_end, opts.h)?
            .into_iter()
            .map(|(j, steps, dt)| (top.control_term(&sig.values()[j]), steps, dt))
            .collect(),
        None if opts.t_end > 0.0 => {
            let (steps, dt) = uniform_steps(opts.t_end, opts.h);
            vec![(DMatrix::zeros(initial.n(), initial.n()), steps, dt)]
        }
        None => Vec::new(),
    };

    let sample =
        |t: f64, s: StiefelState| StiefelSample { t, gram_drift: s.gram_drift(), spectrum: s.spectrum(), state: s };
    let mut out = vec![sample(0.0, initial.clone())];
    let mut z = initial.stacked();
    let mut t = 0.0;
    let mut count = 0usize;
    let total: usize = runs.iter().map(|r| r.1).sum();
    for (lam, steps, dt) in &runs {
        for _ in 0..*steps {
            z = rkmk4_step(&z, *dt, Side::Right, |z| {
                let m = stacked_momentum(z);
                omega(&top.u, &m) - lam
            });
            t += dt;
            count += 1;
            let state = initial.with_stacked(&z);
            let drift = state.gram_drift();
            if !(drift <= opts.drift_budget) {
                return Err(StiefelError::DriftExceeded { t, value: drift, budget: opts.drift_budget });
            }
            if count.is_multiple_of(opts.sample_every) || count == total {
                out.push(sample(t, state));
            }
        }
    }
    Ok(out)
}

fn stacked_momentum(z: &DMatrix<f64>) -> DMatrix<f64> {
    let n = z.ncols();
    let mut m = DMatrix::zeros(n, n);
    for l in 0..z.nrows() / 2 {
        let x = z.row(2 * l).transpose();
        let y = z.row(2 * l + 1).transpose();
        m += &x * y.transpose() - &y * x.transpose();
    }
    m
}

/// Recovers `g` from a body frame of maximal rank (`k ≥ n - 1`) given the
/// space frame, by orthogonal Procrustes on `𝒵_body = 𝒵_space g`.
pub fn group_from_frame(space: &DarbouxFrame, body: &StiefelState) -> Result<GroupElement, StiefelError> {
    check_dim(space.n(), body.n())?;
    let n = space.n();
    if space.k() + 1 < n || body.blocks() != space.h_levels.len() {
        return Err(StiefelError::InvalidParameters("group recovery needs a maximal-rank frame"));
    }
    let zs = crate::vortex::stack_rows(&space.x, &space.y);
    let zb = body.stacked();
    let svd = (zs.transpose() * zb).svd(true, true);
    let (u, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let mut g = &u * &vt;
    if g.determinant() < 0.0 {
        // the missing direction in odd dimension is fixed by det g = 1
        let mut d = DMatrix::<f64>::identity(n, n);
        let (k, _) = svd.singular_values.argmin();
        d[(k, k)] = -1.0;
        g = u * d * vt;
    }
    Ok(GroupElement::from_raw(g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liecore::exp;
    use crate::sampling::{random_momentum, random_rotation, seeded};
    use crate::vortex::darboux_decompose;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(v))
    }

    fn random_state(seed: u64, n: usize) -> StiefelState {
        let mut rng = seeded(seed);
        let frame = darboux_decompose(&random_momentum(&mut rng, n, 1.0), 1e-9);
        StiefelState::from_frame(&frame, &random_rotation(&mut rng, n)).unwrap()
    }

    #[test]
    fn zero_momentum_is_at_rest() {
        let s = StiefelState::new(DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]), DMatrix::zeros(1, 3)).unwrap();
        let (dx, dy) = stiefel_rhs(&s, &diag(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(dx.norm() + dy.norm(), 0.0);
    }

    #[test]
    fn printed_form_equals_poisson_form_on_frames() {
        let u = diag(&[0.7, 1.3, 2.0, 2.9, 3.4]);
        for seed in 0..20 {
            let s = random_state(seed, 5);
            let m = reconstruct_momentum(&s).into_matrix();
            let w = omega(&u, &m);
            let (dx, dy) = stiefel_rhs(&s, &u).unwrap();
            assert!((dx - s.x() * &w).norm() < 1e-12);
            assert!((dy - s.y() * &w).norm() < 1e-12);
        }
    }

    #[test]
    fn elementary_reconstruction() {
        let s = StiefelState::new(
            DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]),
            DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 0.0]),
        )
        .unwrap();
        assert_eq!(reconstruct_momentum(&s), Momentum::elementary(3, 0, 1));
    }

    #[test]
    fn zero_control_matches_free_rhs() {
        let s = random_state(2, 4);
        let u = diag(&[1.0, 2.0, 3.0, 4.0]);
        let sig = ControlSignal::zeros(4, 1, 1.0).unwrap();
        let top = ControlledTop::new(u.clone(), vec![AlgebraElement::elementary(4, 0, 1)], 1.0, sig).unwrap();
        assert_eq!(controlled_rhs(&s, &top, 0.3).unwrap(), stiefel_rhs(&s, &u).unwrap());
        assert!(matches!(
            controlled_rhs(&s, &top, 1.5),
            Err(StiefelError::Signal(SignalError::HorizonExceeded { .. }))
        ));
    }

    #[test]
    fn pure_control_drive_is_a_right_rotation() {
        let s = random_state(4, 4);
        let lam = AlgebraElement::elementary(4, 1, 2);
        let c = 0.4;
        let top = ControlledTop::new(
            DMatrix::zeros(4, 4),
            vec![lam.clone()],
            1.0,
            ControlSignal::constant(3, &[c], 2.0).unwrap(),
        )
        .unwrap();
        let out = integrate_stiefel(&s, &top, &StiefelOptions { t_end: 2.0, h: 0.01, ..Default::default() }).unwrap();
        let last = &out.last().unwrap().state;
        let r = exp(&lam.scale(-2.0 * c));
        assert!((last.x() - s.x() * r.matrix()).norm() < 1e-12);
        assert!(last.gram_drift() < 1e-13);
    }

    #[test]
    fn vortex_shift_is_the_space_left_shift() {
        let mut rng = seeded(8);
        let frame = darboux_decompose(&random_momentum(&mut rng, 4, 1.0), 1e-9);
        let g = random_rotation(&mut rng, 4);
        let s = StiefelState::from_frame(&frame, &g).unwrap();
        for l in 0..2 {
            let shifted_g = exp(&frame.block_generator(l).scale(0.7)).matrix() * g.matrix();
            let expected = StiefelState::from_frame(&frame, &GroupElement::from_raw(shifted_g)).unwrap();
            let got = s.vortex_shift(l, 0.7);
            assert!((got.x() - expected.x()).norm() < 1e-12);
            assert!((got.y() - expected.y()).norm() < 1e-12);
        }
    }

    #[test]
    fn group_recovery_from_maximal_frame() {
        for (n, seed) in [(3, 1), (4, 2), (5, 3)] {
            let mut rng = seeded(seed);
            let frame = darboux_decompose(&random_momentum(&mut rng, n, 1.0), 1e-9);
            let g = random_rotation(&mut rng, n);
            let s = StiefelState::from_frame(&frame, &g).unwrap();
            let back = group_from_frame(&frame, &s).unwrap();
            assert!(back.distance(&g) < 1e-10, "n = {n}");
        }
    }
}
