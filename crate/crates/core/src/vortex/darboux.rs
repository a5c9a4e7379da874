//! Real canonical form of a skew matrix as a sum of wedge products.

use nalgebra::{DMatrix, DVector};

use crate::liecore::{AlgebraElement, Momentum};

/// `M = Σ x⁽ˡ⁾∧y⁽ˡ⁾ = 𝒳ᵀ𝒴 - 𝒴ᵀ𝒳` with mutually orthogonal rows and
/// `|x⁽ˡ⁾|² = |y⁽ˡ⁾|² = h_l`, blocks sorted by decreasing `h_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct DarbouxFrame {
    /// `(k/2) × n`.
    pub x: DMatrix<f64>,
    /// `(k/2) × n`.
    pub y: DMatrix<f64>,
    pub h_levels: Vec<f64>,
}

impl DarbouxFrame {
    pub fn n(&self) -> usize {
        self.x.ncols()
    }

    /// Rank of the decomposed momentum.
    pub fn k(&self) -> usize {
        2 * self.h_levels.len()
    }

    pub fn reconstruct(&self) -> Momentum {
        Momentum::from_raw(self.x.transpose() * &self.y - self.y.transpose() * &self.x)
    }

    /// `x⁽ˡ⁾∧y⁽ˡ⁾ = x yᵀ - y xᵀ`. Its right-invariant field moves only block `l`
    /// in body coordinates, as `ẋ = |x|² y, ẏ = -|y|² x`.
    pub fn block_generator(&self, l: usize) -> AlgebraElement {
        let x = self.x.row(l).transpose();
        let y = self.y.row(l).transpose();
        AlgebraElement::from_raw(&x * y.transpose() - &y * x.transpose())
    }

    /// Largest deviation of the stacked-row Gram matrix from `diag(h_1, h_1, h_2, h_2, …)`.
    pub fn gram_defect(&self) -> f64 {
        let z = stack_rows(&self.x, &self.y);
        let mut expected = DMatrix::zeros(z.nrows(), z.nrows());
        for (l, h) in self.h_levels.iter().enumerate() {
            expected[(2 * l, 2 * l)] = *h;
            expected[(2 * l + 1, 2 * l + 1)] = *h;
        }
        (&z * z.transpose() - expected).amax()
    }
}

/// Interleaves rows as `x⁽¹⁾, y⁽¹⁾, x⁽²⁾, y⁽²⁾, …`.
pub(crate) fn stack_rows(x: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    let mut z = DMatrix::zeros(2 * x.nrows(), x.ncols());
    for l in 0..x.nrows() {
        z.set_row(2 * l, &x.row(l));
        z.set_row(2 * l + 1, &y.row(l));
    }
    z
}

/// Blocks whose level is at most `rank_tol · max level` are dropped.
pub fn darboux_decompose(m: &Momentum, rank_tol: f64) -> DarbouxFrame {
    let n = m.dim();
    let (q, t) = m.matrix().clone().schur().unpack();

    let mut blocks: Vec<(f64, DVector<f64>, DVector<f64>)> = Vec::new();
    let mut i = 0;
    while i < n {
        let split = i + 1 == n || t[(i + 1, i)].abs() <= f64::EPSILON * t.norm();
        if split {
            i += 1;
            continue;
        }
        // block b·(q_i∧q_{i+1}) with b taken as the skew part of the 2×2 block
        let b = 0.5 * (t[(i, i + 1)] - t[(i + 1, i)]);
        let (u, v) = (q.column(i).into_owned(), q.column(i + 1).into_owned());
        if b >= 0.0 {
            blocks.push((b, u, v));
        } else {
            blocks.push((-b, v, u));
        }
        i += 2;
    }

    let h_max = blocks.iter().map(|b| b.0).fold(0.0, f64::max);
    blocks.retain(|b| b.0 > rank_tol * h_max && b.0 > 0.0);
    blocks.sort_by(|a, b| b.0.total_cmp(&a.0));

    let r = blocks.len();
    let mut x = DMatrix::zeros(r, n);
    let mut y = DMatrix::zeros(r, n);
    let mut h_levels = Vec::with_capacity(r);
    for (l, (h, u, v)) in blocks.into_iter().enumerate() {
        let (u, v) = fix_phase(u, v);
        let s = h.sqrt();
        x.set_row(l, &(u * s).transpose());
        y.set_row(l, &(v * s).transpose());
        h_levels.push(h);
    }
    DarbouxFrame { x, y, h_levels }
}

/// Rotates the orthonormal pair within its plane (which keeps `u∧v` fixed)
/// so that at the first coordinate where the pair is nonzero, `u` is
/// positive and `v` vanishes.
fn fix_phase(u: DVector<f64>, v: DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let Some(i) = (0..u.len()).find(|&i| u[i].hypot(v[i]) > 1e-8) else {
        return (u, v);
    };
    let r = u[i].hypot(v[i]);
    let (c, s) = (u[i] / r, v[i] / r);
    (&u * c + &v * s, &v * c - &u * s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liecore::AlgebraElement;

    fn close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn single_block_is_the_coordinate_pair() {
        let f = darboux_decompose(&Momentum::elementary(3, 0, 1), 1e-9);
        assert_eq!(f.k(), 2);
        assert!((f.h_levels[0] - 1.0).abs() < 1e-14);
        assert!(close(&f.x, &DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]), 1e-12));
        assert!(close(&f.y, &DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 0.0]), 1e-12));
    }

    #[test]
    fn scaled_block() {
        let f = darboux_decompose(&Momentum::elementary(3, 0, 1).scale(3.0), 1e-9);
        assert!((f.h_levels[0] - 3.0).abs() < 1e-13);
        let s = 3f64.sqrt();
        assert!(close(&f.x, &DMatrix::from_row_slice(1, 3, &[s, 0.0, 0.0]), 1e-12));
        assert!(close(&f.y, &DMatrix::from_row_slice(1, 3, &[0.0, s, 0.0]), 1e-12));
    }

    #[test]
    fn levels_sorted_and_zero_momentum_empty() {
        let m = (&AlgebraElement::elementary(5, 0, 1) + &AlgebraElement::elementary(5, 2, 4).scale(2.5)).to_momentum();
        let f = darboux_decompose(&m, 1e-9);
        assert_eq!(f.k(), 4);
        assert!((f.h_levels[0] - 2.5).abs() < 1e-13 && (f.h_levels[1] - 1.0).abs() < 1e-13);
        assert!(f.gram_defect() < 1e-12);
        assert!(close(f.reconstruct().matrix(), m.matrix(), 1e-12));
        assert_eq!(darboux_decompose(&Momentum::zeros(4), 1e-9).k(), 0);
    }

    #[test]
    fn negative_orientation_is_absorbed() {
        let m = Momentum::elementary(4, 1, 3).scale(-2.0);
        let f = darboux_decompose(&m, 1e-9);
        assert!(close(f.reconstruct().matrix(), m.matrix(), 1e-12));
        assert!(f.x.row(0).iter().find(|c| c.abs() > 1e-8).unwrap() > &0.0);
    }

    #[test]
    fn redundant_vortex_field_matches_right_invariant_push() {
        let m = Momentum::from_coords(4, &[0.4, -1.0, 0.3, 0.8, 0.2, -0.6]).unwrap();
        let f = darboux_decompose(&m, 1e-9);
        for l in 0..f.h_levels.len() {
            let xi = f.block_generator(l);
            // body rows move as -ξ applied to each space vector (here g = I)
            let dx = -(xi.matrix() * f.x.transpose()).transpose();
            let dy = -(xi.matrix() * f.y.transpose()).transpose();
            for j in 0..f.h_levels.len() {
                let (ex, ey) = if j == l {
                    (f.y.row(j) * f.h_levels[j], f.x.row(j) * -f.h_levels[j])
                } else {
                    (f.y.row(j) * 0.0, f.x.row(j) * 0.0)
                };
                assert!((dx.row(j) - ex).norm() < 1e-12);
                assert!((dy.row(j) - ey).norm() < 1e-12);
            }
        }
    }
}
