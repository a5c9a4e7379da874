//! Matrix kernel for SO(n) and so(n).
//!
//! Algebra elements and momenta are both stored as skew-symmetric `n×n`
//! matrices. The dual algebra is identified with the algebra through the
//! trace pairing `(m, ξ) = -½ tr(m ξ)`, under which the elementary skews
//! `E_ij = e_i e_jᵀ - e_j e_iᵀ` (`i < j`) form an orthonormal basis and the
//! coordinates of a skew matrix are simply its strict upper triangle.
//!
//! With this convention the coadjoint operators take the closed forms
//! `ad*_ξ m = m ξ - ξ m` and `Ad*_g m = g⁻¹ m g`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use thiserror::Error;

/// Default tolerance on `‖X + Xᵀ‖_F` (relative to `max(1, ‖X‖_F)`).
pub const SKEW_TOL: f64 = 1e-12;
/// Default tolerance on `‖gᵀg - I‖_F` for group elements.
pub const ORTH_TOL: f64 = 1e-10;
/// Largest supported matrix dimension.
pub const MAX_DIM: usize = 12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LieError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension {0} is outside the supported range 2..={MAX_DIM}")]
    UnsupportedDimension(usize),
    #[error("matrix is not skew-symmetric (|X + X^T| = {residual:e})")]
    NotSkew { residual: f64 },
    #[error("matrix is not orthogonal (|g^T g - I| = {residual:e})")]
    NotOrthogonal { residual: f64 },
    #[error("matrix has non-positive determinant {det}")]
    NotSpecial { det: f64 },
    #[error("expected {expected} coordinates, found {found}")]
    CoordinateCount { expected: usize, found: usize },
    #[error("matrix logarithm undefined (rotation angle at or beyond pi)")]
    LogUndefined,
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<(), LieError> {
    if expected == found {
        Ok(())
    } else {
        Err(LieError::DimensionMismatch { expected, found })
    }
}

fn check_square(m: &DMatrix<f64>) -> Result<usize, LieError> {
    if m.nrows() != m.ncols() {
        return Err(LieError::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    let n = m.nrows();
    if !(2..=MAX_DIM).contains(&n) {
        return Err(LieError::UnsupportedDimension(n));
    }
    Ok(n)
}

/// Dimension of so(n).
pub fn algebra_dim(n: usize) -> usize {
    n * (n - 1) / 2
}

/// `(X - Xᵀ)/2`.
pub(crate) fn skew_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m - m.transpose()) * 0.5
}

pub(crate) fn commutator(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a * b - b * a
}

pub(crate) fn upper_coords(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(algebra_dim(n));
    for i in 0..n {
        for j in (i + 1)..n {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub(crate) fn skew_from_coords(n: usize, coords: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            m[(i, j)] = coords[k];
            m[(j, i)] = -coords[k];
            k += 1;
        }
    }
    m
}

macro_rules! skew_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, PartialEq)]
        pub struct $name(DMatrix<f64>);

        impl $name {
            /// Validates skew-symmetry with the default tolerance.
            pub fn new(matrix: DMatrix<f64>) -> Result<Self, LieError> {
                Self::with_tolerance(matrix, SKEW_TOL)
            }

            pub fn with_tolerance(matrix: DMatrix<f64>, tol: f64) -> Result<Self, LieError> {
                check_square(&matrix)?;
                let residual = (&matrix + matrix.transpose()).norm();
                if residual > tol * matrix.norm().max(1.0) {
                    return Err(LieError::NotSkew { residual });
                }
                Ok(Self(skew_part(&matrix)))
            }

            /// Skew-symmetrizes the input without validation.
            pub fn from_matrix_lossy(matrix: &DMatrix<f64>) -> Self {
                Self(skew_part(matrix))
            }

            pub(crate) fn from_raw(matrix: DMatrix<f64>) -> Self {
                Self(matrix)
            }

            pub fn zeros(n: usize) -> Self {
                Self(DMatrix::zeros(n, n))
            }

            /// Builds `Σ c_ij E_ij` from coordinates in lexicographic `(i, j)`, `i < j`, order.
            pub fn from_coords(n: usize, coords: &[f64]) -> Result<Self, LieError> {
                if !(2..=MAX_DIM).contains(&n) {
                    return Err(LieError::UnsupportedDimension(n));
                }
                let d = algebra_dim(n);
                if coords.len() != d {
                    return Err(LieError::CoordinateCount { expected: d, found: coords.len() });
                }
                Ok(Self(skew_from_coords(n, coords)))
            }

            /// Elementary skew `E_ij` (zero-based indices, `i != j`).
            pub fn elementary(n: usize, i: usize, j: usize) -> Self {
                assert!(i < n && j < n && i != j, "invalid elementary index ({i}, {j}) for n = {n}");
                let mut m = DMatrix::zeros(n, n);
                m[(i, j)] = 1.0;
                m[(j, i)] = -1.0;
                Self(m)
            }

            pub fn coords(&self) -> Vec<f64> {
                upper_coords(&self.0)
            }

            pub fn dim(&self) -> usize {
                self.0.nrows()
            }

            pub fn matrix(&self) -> &DMatrix<f64> {
                &self.0
            }

            pub fn into_matrix(self) -> DMatrix<f64> {
                self.0
            }

            /// Frobenius norm of the matrix.
            pub fn norm(&self) -> f64 {
                self.0.norm()
            }

            /// Norm induced by the pairing; equals the Euclidean norm of the coordinates.
            pub fn pairing_norm(&self) -> f64 {
                self.0.norm() / std::f64::consts::SQRT_2
            }

            pub fn scale(&self, s: f64) -> Self {
                Self(&self.0 * s)
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({:?})", stringify!($name), self.coords())
            }
        }

        impl Add for &$name {
            type Output = $name;
            fn add(self, rhs: Self) -> $name {
                $name(&self.0 + &rhs.0)
            }
        }

        impl Sub for &$name {
            type Output = $name;
            fn sub(self, rhs: Self) -> $name {
                $name(&self.0 - &rhs.0)
            }
        }

        impl Add for $name {
            type Output = $name;
            fn add(self, rhs: Self) -> $name {
                $name(self.0 + rhs.0)
            }
        }

        impl Sub for $name {
            type Output = $name;
            fn sub(self, rhs: Self) -> $name {
                $name(self.0 - rhs.0)
            }
        }

        impl Neg for &$name {
            type Output = $name;
            fn neg(self) -> $name {
                $name(-&self.0)
            }
        }

        impl Mul<f64> for &$name {
            type Output = $name;
            fn mul(self, s: f64) -> $name {
                $name(&self.0 * s)
            }
        }
    };
}

skew_newtype!(
    /// An element ξ of so(n): angular velocities, drift shifts, control directions.
    AlgebraElement
);

skew_newtype!(
    /// A covector m of so(n)*, stored as a skew matrix under the trace pairing.
    Momentum
);

impl AlgebraElement {
    /// The same matrix read as a covector through the pairing.
    pub fn to_momentum(&self) -> Momentum {
        Momentum(self.0.clone())
    }
}

impl Momentum {
    pub fn to_algebra(&self) -> AlgebraElement {
        AlgebraElement(self.0.clone())
    }
}

/// A point of SO(n).
#[derive(Clone, PartialEq)]
pub struct GroupElement(DMatrix<f64>);

impl GroupElement {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self, LieError> {
        Self::with_tolerance(matrix, ORTH_TOL)
    }

    pub fn with_tolerance(matrix: DMatrix<f64>, tol: f64) -> Result<Self, LieError> {
        let n = check_square(&matrix)?;
        let residual = orthogonality_defect(&matrix);
        if residual > tol {
            return Err(LieError::NotOrthogonal { residual });
        }
        let det = matrix.determinant();
        if det <= 0.0 {
            return Err(LieError::NotSpecial { det });
        }
        debug_assert_eq!(n, matrix.nrows());
        Ok(Self(matrix))
    }

    pub(crate) fn from_raw(matrix: DMatrix<f64>) -> Self {
        Self(matrix)
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn inverse(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn compose(&self, rhs: &GroupElement) -> Result<Self, LieError> {
        check_dim(self.dim(), rhs.dim())?;
        Ok(Self(&self.0 * &rhs.0))
    }

    /// `‖gᵀg - I‖_F`.
    pub fn orthogonality_defect(&self) -> f64 {
        orthogonality_defect(&self.0)
    }

    /// Frobenius distance `‖g - h‖_F`.
    pub fn distance(&self, other: &GroupElement) -> f64 {
        (&self.0 - &other.0).norm()
    }
}

impl fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GroupElement({:?})", self.0.as_slice())
    }
}

impl Mul for &GroupElement {
    type Output = GroupElement;
    fn mul(self, rhs: Self) -> GroupElement {
        GroupElement(&self.0 * &rhs.0)
    }
}

pub(crate) fn orthogonality_defect(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    (m.transpose() * m - DMatrix::<f64>::identity(n, n)).norm()
}

/// Elementary skew basis of so(n) in lexicographic `(i, j)`, `i < j`, order.
#[derive(Debug, Clone)]
pub struct AlgebraBasis {
    n: usize,
    pairs: Vec<(usize, usize)>,
}

impl AlgebraBasis {
    pub fn new(n: usize) -> Self {
        let pairs = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
        Self { n, pairs }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn element(&self, k: usize) -> AlgebraElement {
        let (i, j) = self.pairs[k];
        AlgebraElement::elementary(self.n, i, j)
    }

    pub fn elements(&self) -> Vec<AlgebraElement> {
        (0..self.len()).map(|k| self.element(k)).collect()
    }
}

/// `(m, ξ) = -½ tr(m ξ)`.
pub fn pairing(m: &Momentum, xi: &AlgebraElement) -> Result<f64, LieError> {
    check_dim(m.dim(), xi.dim())?;
    Ok(raw_pairing(&m.0, &xi.0))
}

pub(crate) fn raw_pairing(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    // -½ tr(a b) = ½ Σ a_ij b_ij for skew b
    0.5 * a.dot(b)
}

/// `ad_ξ η = ξη - ηξ`.
pub fn ad(xi: &AlgebraElement, eta: &AlgebraElement) -> Result<AlgebraElement, LieError> {
    check_dim(xi.dim(), eta.dim())?;
    Ok(AlgebraElement(commutator(&xi.0, &eta.0)))
}

/// `ad*_ξ m = mξ - ξm`.
pub fn ad_star(xi: &AlgebraElement, m: &Momentum) -> Result<Momentum, LieError> {
    check_dim(xi.dim(), m.dim())?;
    Ok(Momentum(commutator(&m.0, &xi.0)))
}

/// `Ad_g ξ = g ξ g⁻¹`.
pub fn adjoint_action(g: &GroupElement, xi: &AlgebraElement) -> Result<AlgebraElement, LieError> {
    check_dim(g.dim(), xi.dim())?;
    Ok(AlgebraElement(skew_part(&(&g.0 * &xi.0 * g.0.transpose()))))
}

/// `Ad*_g m = g⁻¹ m g`. Body momentum is `Ad*_g m_s`.
pub fn coadjoint_action(g: &GroupElement, m: &Momentum) -> Result<Momentum, LieError> {
    check_dim(g.dim(), m.dim())?;
    Ok(Momentum(raw_coadjoint(&g.0, &m.0)))
}

pub(crate) fn raw_coadjoint(g: &DMatrix<f64>, m: &DMatrix<f64>) -> DMatrix<f64> {
    skew_part(&(g.transpose() * m * g))
}

/// Matrix exponential of a skew matrix.
pub fn exp(xi: &AlgebraElement) -> GroupElement {
    GroupElement(raw_exp(&xi.0))
}

pub(crate) fn raw_exp(x: &DMatrix<f64>) -> DMatrix<f64> {
    match x.nrows() {
        2 => {
            let t = x[(1, 0)];
            let (s, c) = t.sin_cos();
            DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
        }
        3 => rodrigues(x),
        _ => scaling_and_squaring(x),
    }
}

fn rodrigues(x: &DMatrix<f64>) -> DMatrix<f64> {
    let theta2 = 0.5 * x.norm_squared();
    let theta = theta2.sqrt();
    let (a, b) = if theta < 1e-4 {
        // sin θ/θ and (1 - cos θ)/θ² to O(θ⁶)
        (1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0, 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    let x2 = x * x;
    let mut out = DMatrix::identity(3, 3);
    out += x * a;
    out += x2 * b;
    out
}

const TAYLOR_DEGREE: usize = 18;

fn scaling_and_squaring(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let norm = x.norm();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = x / 2f64.powi(squarings as i32);
    let id = DMatrix::<f64>::identity(n, n);
    let mut acc = id.clone();
    for k in (1..=TAYLOR_DEGREE).rev() {
        acc = &id + (&scaled * acc) / (k as f64);
    }
    for _ in 0..squarings {
        acc = &acc * &acc;
    }
    if squarings > 0 {
        // one Newton–Schulz polar step pulls squaring roundoff back onto SO(n)
        let gram = acc.transpose() * &acc;
        acc = &acc * (id * 3.0 - gram) * 0.5;
    }
    acc
}

/// Principal matrix logarithm, defined for rotation angles strictly below π.
pub fn log(g: &GroupElement) -> Result<AlgebraElement, LieError> {
    let n = g.dim();
    let id = DMatrix::<f64>::identity(n, n);
    // an eigenvalue -1 (half turn) has no real principal logarithm
    if (&g.0 + &id).determinant().abs() < 1e-12 {
        return Err(LieError::LogUndefined);
    }
    let mut y = g.0.clone();
    let mut halvings = 0;
    while (&y - &id).norm() > 0.1 {
        y = principal_sqrt(&y).ok_or(LieError::LogUndefined)?;
        halvings += 1;
        if halvings > 60 {
            return Err(LieError::LogUndefined);
        }
    }
    // log(I + X) = Σ (-1)^{k+1} X^k / k
    let x = &y - &id;
    let mut term = x.clone();
    let mut acc = x.clone();
    for k in 2..=40 {
        term = &term * &x;
        let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
        acc += &term * (sign / k as f64);
    }
    acc *= 2f64.powi(halvings);
    Ok(AlgebraElement(skew_part(&acc)))
}

fn principal_sqrt(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    // Denman–Beavers iteration
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = DMatrix::<f64>::identity(n, n);
    for _ in 0..100 {
        let yi = y.clone().try_inverse()?;
        let zi = z.clone().try_inverse()?;
        let y_next = (&y + zi) * 0.5;
        let z_next = (&z + yi) * 0.5;
        let change = (&y_next - &y).norm();
        y = y_next;
        z = z_next;
        if !y.iter().all(|v| v.is_finite()) {
            return None;
        }
        if change < 1e-15 * y.norm().max(1.0) {
            return Some(y);
        }
    }
    None
}
