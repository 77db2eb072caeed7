//! Tolerance-aware dense linear algebra shared by the rest of the crate.
//!
//! Every classification in this crate bottoms out in an eigenvalue or
//! singular-value count. The zero band is always
//! `max(abs_floor, rel_eps * scale)` where `scale` is the spectral norm of
//! the matrix under test (or a caller-supplied reference scale, whichever is
//! larger).

use nalgebra::{DMatrix, SymmetricEigen, SVD};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;

/// Zero-band policy for eigenvalue and singular-value counting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TolerancePolicy {
    pub rel_eps: f64,
    pub abs_floor: f64,
}

impl Default for TolerancePolicy {
    fn default() -> Self {
        Self {
            rel_eps: 1e-9,
            abs_floor: 1e-12,
        }
    }
}

impl TolerancePolicy {
    pub fn new(rel_eps: f64, abs_floor: f64) -> Result<Self> {
        if !(rel_eps > 0.0 && rel_eps.is_finite()) || !(abs_floor > 0.0 && abs_floor.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "tolerances must be positive and finite (rel_eps = {rel_eps}, abs_floor = {abs_floor})"
            )));
        }
        Ok(Self { rel_eps, abs_floor })
    }

    /// Width of the zero band for a matrix of the given scale.
    pub fn threshold(&self, scale: f64) -> f64 {
        self.abs_floor.max(self.rel_eps * scale.abs())
    }

    pub fn is_zero(&self, value: f64, scale: f64) -> bool {
        value.abs() <= self.threshold(scale)
    }
}

/// Dense real symmetric matrix. Symmetrized as `(S + Sᵀ)/2` on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix(DMatrix<f64>);

impl SymmetricMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "symmetric matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self::symmetrize(m))
    }

    pub(crate) fn symmetrize(m: DMatrix<f64>) -> Self {
        let t = m.transpose();
        Self((m + t) * 0.5)
    }

    pub fn from_row_slice(n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                data.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(n, n, data))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self(DMatrix::from_fn(n, n, |i, j| if i == j { diag[i] } else { 0.0 }))
    }

    /// `diag(1_p, -1_q)`.
    pub fn i_pq(p: usize, q: usize) -> Self {
        let mut diag = vec![1.0; p];
        diag.extend(std::iter::repeat_n(-1.0, q));
        Self::from_diagonal(&diag)
    }

    /// `diag(1_r, -1_s, 0)` of size `n`.
    pub fn i_rs_padded(n: usize, r: usize, s: usize) -> Self {
        let mut diag = vec![0.0; n];
        for (i, v) in diag.iter_mut().enumerate() {
            if i < r {
                *v = 1.0;
            } else if i < r + s {
                *v = -1.0;
            }
        }
        Self::from_diagonal(&diag)
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn scale(&self, c: f64) -> Self {
        Self(&self.0 * c)
    }

    /// Congruence `h S hᵀ`.
    pub fn congruence(&self, h: &DMatrix<f64>) -> Result<Self> {
        if h.ncols() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "congruence by {}x{} on a {}x{} form",
                h.nrows(),
                h.ncols(),
                self.n(),
                self.n()
            )));
        }
        Ok(Self::symmetrize(h * &self.0 * h.transpose()))
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let eig = checked_eigen(&self.0)?;
        let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        values.sort_by(f64::total_cmp);
        Ok(values)
    }
}

/// Inertia of a symmetric matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature {
    pub pos: usize,
    pub neg: usize,
    pub zero: usize,
}

impl Signature {
    pub fn n(&self) -> usize {
        self.pos + self.neg + self.zero
    }

    pub fn rank(&self) -> usize {
        self.pos + self.neg
    }
}

impl std::fmt::Display for Signature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(+{}, -{}, 0:{})", self.pos, self.neg, self.zero)
    }
}

fn checked_eigen(m: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!(
            "non-finite entry in {}x{} matrix handed to the eigensolver",
            m.nrows(),
            m.ncols()
        )));
    }
    SymmetricEigen::try_new(m.clone(), EIGEN_EPS, EIGEN_MAX_ITER).ok_or_else(|| {
        Error::Numerical(format!(
            "symmetric eigensolver did not converge (dim {}, condition estimate {:e})",
            m.nrows(),
            condition_number(m)
        ))
    })
}

/// Signature with the zero band taken against the spectral norm of `s`.
pub fn signature(s: &SymmetricMatrix, tol: &TolerancePolicy) -> Result<Signature> {
    signature_scaled(s, tol, 0.0)
}

/// Signature with the zero band taken against `max(spectral_norm(s), reference_scale)`.
pub fn signature_scaled(
    s: &SymmetricMatrix,
    tol: &TolerancePolicy,
    reference_scale: f64,
) -> Result<Signature> {
    let values = s.eigenvalues()?;
    Ok(count_inertia(&values, tol, reference_scale))
}

pub(crate) fn count_inertia(values: &[f64], tol: &TolerancePolicy, reference_scale: f64) -> Signature {
    let spectral = values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let band = tol.threshold(spectral.max(reference_scale));
    let mut sig = Signature {
        pos: 0,
        neg: 0,
        zero: 0,
    };
    for &v in values {
        if v.abs() <= band {
            sig.zero += 1;
        } else if v > 0.0 {
            sig.pos += 1;
        } else {
            sig.neg += 1;
        }
    }
    sig
}

/// Numerical rank: singular values above the band relative to the largest one.
pub fn rank(m: &DMatrix<f64>, tol: &TolerancePolicy) -> usize {
    let sv = singular_values(m);
    let largest = sv.iter().fold(0.0f64, |acc, v| acc.max(*v));
    let band = tol.threshold(largest);
    sv.iter().filter(|&&v| v > band).count()
}

pub(crate) fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    match SVD::try_new(m.clone(), false, false, EIGEN_EPS, EIGEN_MAX_ITER) {
        Some(svd) => svd.singular_values.iter().copied().collect(),
        None => Vec::new(),
    }
}

/// 2-norm condition number (infinite for singular input).
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = singular_values(m);
    let max = sv.iter().fold(0.0f64, |a, v| a.max(*v));
    let min = sv.iter().fold(f64::INFINITY, |a, v| a.min(*v));
    if min == 0.0 || sv.is_empty() {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    singular_values(m).into_iter().fold(0.0, f64::max)
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: &TolerancePolicy) -> bool {
    m.nrows() == m.ncols() && max_abs(&(m - m.transpose())) <= tol.threshold(max_abs(m))
}

pub fn inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical(format!("{}x{} matrix is not invertible", m.nrows(), m.ncols())))
}

/// Solves `a x = b` by LU.
pub fn solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() != a.ncols() || a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "solve with {}x{} system and {}x{} right-hand side",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Numerical("linear solve hit a singular pivot".into()))
}

/// Principal square root of a symmetric positive definite matrix.
pub fn spd_sqrt(m: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    let eig = checked_eigen(m.as_matrix())?;
    if eig.eigenvalues.iter().any(|&v| v <= 0.0) {
        return Err(Error::InvariantViolation(
            "principal square root requested for a matrix that is not positive definite".into(),
        ));
    }
    let q = &eig.eigenvectors;
    let roots = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    Ok(SymmetricMatrix::symmetrize(q * roots * q.transpose()))
}

/// Orthonormal basis of the column span (thin QR, columns with positive R diagonal).
pub fn orthonormalize_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    let qr = m.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..q.ncols().min(r.nrows()) {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Orthogonal projector onto the column span of `m` (assumed full column rank).
pub fn column_projector(m: &DMatrix<f64>) -> DMatrix<f64> {
    let q = orthonormalize_columns(m);
    &q * q.transpose()
}

/// Block-diagonal `diag(a, b)`.
pub fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = DMatrix::zeros(ra + rb, ca + cb);
    out.view_mut((0, 0), (ra, ca)).copy_from(a);
    out.view_mut((ra, ca), (rb, cb)).copy_from(b);
    out
}

/// Assembles `[[a, b], [c, d]]`.
pub fn from_blocks(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    d: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if a.nrows() != b.nrows() || c.nrows() != d.nrows() || a.ncols() != c.ncols() || b.ncols() != d.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "incompatible blocks {:?} {:?} / {:?} {:?}",
            a.shape(),
            b.shape(),
            c.shape(),
            d.shape()
        )));
    }
    let (r1, c1) = a.shape();
    let (r2, c2) = d.shape();
    let mut out = DMatrix::zeros(r1 + r2, c1 + c2);
    out.view_mut((0, 0), (r1, c1)).copy_from(a);
    out.view_mut((0, c1), (r1, c2)).copy_from(b);
    out.view_mut((r1, 0), (r2, c1)).copy_from(c);
    out.view_mut((r1, c1), (r2, c2)).copy_from(d);
    Ok(out)
}

/// `|x|^e`, with `0^0 = 1` and `0^e = 0` for `Re e > 0`; `None` at a pole.
pub fn abs_pow(x: f64, e: Complex64) -> Option<Complex64> {
    let x = x.abs();
    if x == 0.0 {
        if e.re > 0.0 {
            Some(Complex64::new(0.0, 0.0))
        } else if e == Complex64::new(0.0, 0.0) {
            Some(Complex64::new(1.0, 0.0))
        } else {
            None
        }
    } else {
        Some((e * x.ln()).exp())
    }
}

/// Pairwise (cascade) summation; the result depends only on the order of `values`.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 16;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// `det [[z, y], [yᵀ, 0]]`.
pub fn bordered_determinant(z: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
    let d = y.ncols();
    let border = from_blocks(z, y, &y.transpose(), &DMatrix::zeros(d, d))?;
    Ok(border.determinant())
}
