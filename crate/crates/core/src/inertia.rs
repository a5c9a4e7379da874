//! Inertia operators `A: so(n) → so(n)*`.
//!
//! Two representations are supported: a dense SPD matrix acting on the
//! elementary-skew coordinates, and the Manakov form defined through its
//! inverse `A⁻¹M = UM + MU` with `U` symmetric positive definite. The
//! Manakov inverse is the Sylvester solve `UM + MU = ω`, done once per call
//! in the eigenbasis of `U` where it is an entrywise division by `u_i + u_j`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, Matrix3, SymmetricEigen};
use thiserror::Error;

use crate::liecore::{
    algebra_dim, check_dim, raw_pairing, skew_from_coords, skew_part, upper_coords, AlgebraElement, LieError, Momentum,
    MAX_DIM,
};

const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InertiaError {
    #[error(transparent)]
    Lie(#[from] LieError),
    #[error("operator matrix is not symmetric (|A - A^T| = {residual:e})")]
    NotSymmetric { residual: f64 },
    #[error("operator is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("operator matrix has shape {rows}x{cols}, expected {expected}x{expected}")]
    Shape { rows: usize, cols: usize, expected: usize },
    #[error("Sylvester solve failed: u_i + u_j = {sum:e} is not positive")]
    SylvesterSolveFailed { sum: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InertiaKind {
    Dense,
    Manakov,
}

#[derive(Clone, Debug)]
enum Repr {
    Dense { matrix: DMatrix<f64>, cholesky: Cholesky<f64, Dyn> },
    Manakov { u: DMatrix<f64>, eigenvectors: DMatrix<f64>, eigenvalues: DVector<f64> },
}

/// A symmetric positive-definite inertia operator on so(n).
#[derive(Clone, Debug)]
pub struct InertiaOperator {
    n: usize,
    repr: Repr,
}

fn symmetry_residual(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).norm()
}

fn check_n(n: usize) -> Result<(), InertiaError> {
    if (2..=MAX_DIM).contains(&n) {
        Ok(())
    } else {
        Err(LieError::UnsupportedDimension(n).into())
    }
}

impl InertiaOperator {
    /// Dense operator: `matrix` is `d×d` on the lexicographic `E_ij` coordinates.
    pub fn dense(n: usize, matrix: DMatrix<f64>) -> Result<Self, InertiaError> {
        check_n(n)?;
        let d = algebra_dim(n);
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(InertiaError::Shape { rows: matrix.nrows(), cols: matrix.ncols(), expected: d });
        }
        let residual = symmetry_residual(&matrix);
        if residual > SYMMETRY_TOL * matrix.norm().max(1.0) {
            return Err(InertiaError::NotSymmetric { residual });
        }
        let matrix = (&matrix + matrix.transpose()) * 0.5;
        let min_eigenvalue = matrix.clone().symmetric_eigenvalues().min();
        if min_eigenvalue <= 0.0 {
            return Err(InertiaError::NotPositiveDefinite { min_eigenvalue });
        }
        let cholesky = Cholesky::new(matrix.clone()).ok_or(InertiaError::NotPositiveDefinite { min_eigenvalue })?;
        Ok(Self { n, repr: Repr::Dense { matrix, cholesky } })
    }

    /// Manakov operator with `A⁻¹M = UM + MU`.
    pub fn manakov(u: DMatrix<f64>) -> Result<Self, InertiaError> {
        if u.nrows() != u.ncols() {
            return Err(LieError::NotSquare { rows: u.nrows(), cols: u.ncols() }.into());
        }
        let n = u.nrows();
        check_n(n)?;
        let residual = symmetry_residual(&u);
        if residual > SYMMETRY_TOL * u.norm().max(1.0) {
            return Err(InertiaError::NotSymmetric { residual });
        }
        let u = (&u + u.transpose()) * 0.5;
        let eig = SymmetricEigen::new(u.clone());
        let min_eigenvalue = eig.eigenvalues.min();
        if min_eigenvalue <= 0.0 {
            return Err(InertiaError::NotPositiveDefinite { min_eigenvalue });
        }
        Ok(Self { n, repr: Repr::Manakov { u, eigenvectors: eig.eigenvectors, eigenvalues: eig.eigenvalues } })
    }

    pub fn manakov_diagonal(u: &[f64]) -> Result<Self, InertiaError> {
        Self::manakov(DMatrix::from_diagonal(&DVector::from_column_slice(u)))
    }

    /// Rigid-body inertia tensor on ℝ³ (acting on angular-velocity vectors),
    /// transported to so(3) through the hat map.
    pub fn from_body_tensor(tensor: &Matrix3<f64>) -> Result<Self, InertiaError> {
        // coordinates (c12, c13, c23) of hat(v) are (-v3, v2, -v1)
        let p = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, -1.0, 0.0, 1.0, 0.0, -1.0, 0.0, 0.0]);
        let t = DMatrix::from_iterator(3, 3, tensor.iter().copied());
        Self::dense(3, &p * t * p.transpose())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> InertiaKind {
        match self.repr {
            Repr::Dense { .. } => InertiaKind::Dense,
            Repr::Manakov { .. } => InertiaKind::Manakov,
        }
    }

    /// The Manakov matrix `U`, if this is a Manakov operator.
    pub fn manakov_u(&self) -> Option<&DMatrix<f64>> {
        match &self.repr {
            Repr::Manakov { u, .. } => Some(u),
            Repr::Dense { .. } => None,
        }
    }

    /// `ω = A⁻¹ m`.
    pub fn apply_inverse(&self, m: &Momentum) -> Result<AlgebraElement, LieError> {
        check_dim(self.n, m.dim())?;
        Ok(AlgebraElement::from_raw(self.raw_apply_inverse(m.matrix())))
    }

    pub(crate) fn raw_apply_inverse(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.repr {
            Repr::Manakov { u, .. } => u * m + m * u,
            Repr::Dense { cholesky, .. } => {
                let c = DVector::from_vec(upper_coords(m));
                let w = cholesky.solve(&c);
                skew_from_coords(self.n, w.as_slice())
            }
        }
    }

    /// `m = A ω`.
    pub fn apply(&self, omega: &AlgebraElement) -> Result<Momentum, InertiaError> {
        check_dim(self.n, omega.dim())?;
        Ok(Momentum::from_raw(self.raw_apply(omega.matrix())?))
    }

    pub(crate) fn raw_apply(&self, omega: &DMatrix<f64>) -> Result<DMatrix<f64>, InertiaError> {
        match &self.repr {
            Repr::Manakov { eigenvectors: q, eigenvalues, .. } => {
                let mut w = q.transpose() * omega * q;
                for i in 0..self.n {
                    for j in 0..self.n {
                        let sum = eigenvalues[i] + eigenvalues[j];
                        if sum <= 0.0 {
                            return Err(InertiaError::SylvesterSolveFailed { sum });
                        }
                        w[(i, j)] /= sum;
                    }
                }
                Ok(skew_part(&(q * w * q.transpose())))
            }
            Repr::Dense { matrix, .. } => {
                let c = DVector::from_vec(upper_coords(omega));
                Ok(skew_from_coords(self.n, (matrix * c).as_slice()))
            }
        }
    }

    /// Kinetic energy `½ (m, A⁻¹m)`.
    pub fn energy(&self, m: &Momentum) -> Result<f64, LieError> {
        check_dim(self.n, m.dim())?;
        Ok(self.raw_energy(m.matrix()))
    }

    pub(crate) fn raw_energy(&self, m: &DMatrix<f64>) -> f64 {
        0.5 * raw_pairing(m, &self.raw_apply_inverse(m))
    }

    /// Matrix of `A` on the elementary-skew coordinates.
    pub fn coordinate_matrix(&self) -> DMatrix<f64> {
        match &self.repr {
            Repr::Dense { matrix, .. } => matrix.clone(),
            Repr::Manakov { .. } => {
                let inv = self.inverse_coordinate_matrix();
                inv.try_inverse().expect("Manakov operator is invertible")
            }
        }
    }

    /// Matrix of `A⁻¹` on the elementary-skew coordinates.
    pub fn inverse_coordinate_matrix(&self) -> DMatrix<f64> {
        let d = algebra_dim(self.n);
        let mut out = DMatrix::zeros(d, d);
        let mut unit = vec![0.0; d];
        for k in 0..d {
            unit.iter_mut().for_each(|v| *v = 0.0);
            unit[k] = 1.0;
            let col = upper_coords(&self.raw_apply_inverse(&skew_from_coords(self.n, &unit)));
            out.set_column(k, &DVector::from_vec(col));
        }
        out
    }
}
