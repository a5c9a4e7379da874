//! Vortex (isotropy) algebras of a fixed momentum and their manifolds.
//!
//! A right-invariant field `w(g) = ξ g` commutes with the reduced field of a
//! left-invariant system exactly when `ad*_ξ m_s = 0`. The set of such ξ is
//! the isotropy algebra of `m_s`; it is closed under brackets, so the fields
//! integrate to vortex manifolds `exp(h)·g0`, which are tori when `m_s` has
//! maximal rank with distinct Darboux levels.

mod darboux;
mod probe;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::liecore::{
    algebra_dim, check_dim, commutator, raw_exp, skew_from_coords, upper_coords, AlgebraBasis, AlgebraElement,
    GroupElement, LieError, Momentum,
};
use crate::reduction::{ReducedSystem, ReductionError};

pub(crate) use darboux::stack_rows;
pub use darboux::{darboux_decompose, DarbouxFrame};
pub use probe::{probe_vortex_manifold, CircleReport, ManifoldReport};

/// Default relative singular-value cutoff for the isotropy nullspace.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Orthonormal basis of the isotropy algebra `{ξ : ad*_ξ m_s = 0}`.
#[derive(Debug, Clone)]
pub struct VortexBasis {
    pub m_s: Momentum,
    pub basis: Vec<AlgebraElement>,
    pub rank_tol: f64,
    /// Singular values of `ξ ↦ [m_s, ξ]` on the elementary-skew coordinates, descending.
    pub singular_values: Vec<f64>,
}

/// Sign convention: the first coordinate above `1e-8` in magnitude is positive.
pub(crate) fn canonical_sign(v: &mut [f64]) {
    if let Some(first) = v.iter().copied().find(|c| c.abs() > 1e-8) {
        if first < 0.0 {
            v.iter_mut().for_each(|c| *c = -*c);
        }
    }
}

/// Nullspace of `ξ ↦ ad*_ξ m_s` via SVD on coordinates.
///
/// The returned basis is rotated to diagonalize `ξ ↦ -m_s ξ m_s` on the
/// nullspace, which aligns it with the Darboux block generators whenever the
/// levels are distinct; elements are ordered by decreasing eigenvalue.
pub fn isotropy_basis(m_s: &Momentum, rank_tol: f64) -> VortexBasis {
    let n = m_s.dim();
    let d = algebra_dim(n);
    let m = m_s.matrix();
    let elements = AlgebraBasis::new(n).elements();
    let mut op = DMatrix::zeros(d, d);
    for (k, e) in elements.iter().enumerate() {
        let col = upper_coords(&commutator(m, e.matrix()));
        op.set_column(k, &DVector::from_vec(col));
    }
    let svd = op.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let singular_values: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
    let sigma_max = singular_values.first().copied().unwrap_or(0.0);

    let null: Vec<DVector<f64>> = if sigma_max == 0.0 {
        (0..d).map(|k| DVector::from_fn(d, |i, _| if i == k { 1.0 } else { 0.0 })).collect()
    } else {
        order
            .iter()
            .filter(|&&k| svd.singular_values[k] <= rank_tol * sigma_max)
            .map(|&k| v_t.row(k).transpose())
            .collect()
    };

    let basis = if sigma_max == 0.0 { elements } else { align_with_levels(n, m, &null) };
    VortexBasis { m_s: m_s.clone(), basis, rank_tol, singular_values }
}

fn align_with_levels(n: usize, m: &DMatrix<f64>, null: &[DVector<f64>]) -> Vec<AlgebraElement> {
    let r = null.len();
    if r == 0 {
        return Vec::new();
    }
    let mats: Vec<DMatrix<f64>> = null.iter().map(|v| skew_from_coords(n, v.as_slice())).collect();
    let images: Vec<DVector<f64>> = mats.iter().map(|x| DVector::from_vec(upper_coords(&(-(m * x * m))))).collect();
    let gram = DMatrix::from_fn(r, r, |i, j| 0.5 * (null[i].dot(&images[j]) + null[j].dot(&images[i])));
    let eig = SymmetricEigen::new(gram);
    let mut idx: Vec<usize> = (0..r).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    idx.iter()
        .map(|&k| {
            let col = eig.eigenvectors.column(k);
            let mut coords = DVector::<f64>::zeros(null[0].len());
            for (i, v) in null.iter().enumerate() {
                coords += v * col[i];
            }
            let mut c: Vec<f64> = (coords.normalize()).iter().copied().collect();
            canonical_sign(&mut c);
            AlgebraElement::from_coords(n, &c).expect("coordinate count matches")
        })
        .collect()
}

impl VortexBasis {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn n(&self) -> usize {
        self.m_s.dim()
    }

    /// Basis as rows of elementary-skew coordinates.
    pub fn coordinate_rows(&self) -> Vec<Vec<f64>> {
        self.basis.iter().map(AlgebraElement::coords).collect()
    }

    /// Largest `‖[m_s, ξ]‖ / (‖m_s‖ ‖ξ‖)` over the basis (Frobenius norms).
    pub fn isotropy_residual(&self) -> f64 {
        let mn = self.m_s.norm();
        if mn == 0.0 {
            return 0.0;
        }
        self.basis
            .iter()
            .map(|x| commutator(self.m_s.matrix(), x.matrix()).norm() / (mn * x.norm()))
            .fold(0.0, f64::max)
    }

    /// Component of `η` orthogonal to the span, in pairing norm.
    pub fn orthogonal_residual(&self, eta: &AlgebraElement) -> f64 {
        let c = DVector::from_vec(eta.coords());
        let mut rest = c.clone();
        for x in &self.basis {
            let b = DVector::from_vec(x.coords());
            rest -= &b * b.dot(&c);
        }
        rest.norm()
    }

    /// Largest out-of-span component of `[ξ_i, ξ_j]` over basis pairs.
    pub fn closure_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim() {
            for j in (i + 1)..self.dim() {
                let b = AlgebraElement::from_raw(commutator(self.basis[i].matrix(), self.basis[j].matrix()));
                worst = worst.max(self.orthogonal_residual(&b));
            }
        }
        worst
    }

    /// Largest `‖[ξ_i, ξ_j]‖` over basis pairs (pairing norm).
    pub fn abelian_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim() {
            for j in (i + 1)..self.dim() {
                let b = commutator(self.basis[i].matrix(), self.basis[j].matrix());
                worst = worst.max(b.norm() / std::f64::consts::SQRT_2);
            }
        }
        worst
    }

    /// Left translate of `g0` by `exp(Σ t_i ξ_i)`.
    pub fn point(&self, params: &[f64], g0: &GroupElement) -> GroupElement {
        let n = self.n();
        let mut x = DMatrix::zeros(n, n);
        for (t, xi) in params.iter().zip(&self.basis) {
            x += xi.matrix() * *t;
        }
        GroupElement::from_raw(raw_exp(&x) * g0.matrix())
    }
}

/// Right-invariant field `w(g) = ξ g`.
pub fn vortex_field(xi: &AlgebraElement, g: &GroupElement) -> Result<DMatrix<f64>, LieError> {
    check_dim(xi.dim(), g.dim())?;
    Ok(xi.matrix() * g.matrix())
}

/// Four-point flow-composition estimate of `‖[v, w](g)‖` for the reduced
/// field `v` and the right-invariant field `w` of ξ:
/// `‖φ^w_{-δ} φ^v_{-δ} φ^w_δ φ^v_δ (g) - g‖ / δ²`.
pub fn commutation_residual(
    sys: &ReducedSystem,
    xi: &AlgebraElement,
    g: &GroupElement,
    delta: f64,
) -> Result<f64, ReductionError> {
    check_dim(sys.n(), xi.dim())?;
    check_dim(sys.n(), g.dim())?;
    if !(delta > 0.0) {
        return Err(ReductionError::InvalidParameters("delta must be positive"));
    }
    let fwd = raw_exp(&(xi.matrix() * delta));
    let back = fwd.transpose();
    let shift = sys.lambda().matrix();
    let p1 = sys.raw_flow_step(g.matrix(), delta, shift);
    let p2 = &fwd * p1;
    let p3 = sys.raw_flow_step(&p2, -delta, shift);
    let p4 = back * p3;
    Ok((p4 - g.matrix()).norm() / (delta * delta))
}

/// Natural scale `‖v(g)‖_F ‖ξ‖_F` for [`commutation_residual`].
pub fn bracket_scale(sys: &ReducedSystem, xi: &AlgebraElement, g: &GroupElement) -> Result<f64, ReductionError> {
    Ok(sys.reduced_field(g)?.norm() * xi.norm())
}
