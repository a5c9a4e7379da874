//! Seeded random sampling of algebra and group elements.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::liecore::{algebra_dim, raw_exp, AlgebraElement, GroupElement, Momentum};

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Coordinates uniform in `[-scale, scale]`.
pub fn random_coords<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> Vec<f64> {
    (0..algebra_dim(n)).map(|_| rng.random_range(-scale..=scale)).collect()
}

pub fn random_algebra<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> AlgebraElement {
    AlgebraElement::from_coords(n, &random_coords(rng, n, scale)).expect("coordinate count matches")
}

pub fn random_momentum<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> Momentum {
    Momentum::from_coords(n, &random_coords(rng, n, scale)).expect("coordinate count matches")
}

/// Rotation `exp(ξ)` with ξ coordinates uniform in `[-π, π]`.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R, n: usize) -> GroupElement {
    let xi = random_algebra(rng, n, std::f64::consts::PI);
    GroupElement::from_raw(raw_exp(xi.matrix()))
}

/// Random symmetric positive-definite `n×n` matrix with spectrum in `[lo, hi]`.
pub fn random_spd<R: Rng + ?Sized>(rng: &mut R, n: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let q = if n >= 2 { random_rotation(rng, n).into_matrix() } else { DMatrix::identity(n, n) };
    let d = DMatrix::from_fn(n, n, |i, j| if i == j { rng.random_range(lo..=hi) } else { 0.0 });
    let m = &q * d * q.transpose();
    (&m + m.transpose()) * 0.5
}
