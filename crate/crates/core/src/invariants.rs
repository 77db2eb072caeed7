//! Relative invariants `ψ₁ = det z` and `ψ₂ = det z · det(yᵀ z⁻¹ y)`, the
//! kernel `K^{α,β}`, the minor expansion of `det(yᵀ z y)`, and the
//! generalized Pochhammer symbol.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{abs_pow, bordered_determinant, pairwise_sum, solve, SymmetricMatrix, TolerancePolicy};

const MINOR_EXPANSION_MAX_N: usize = 12;

fn check_pair(z: &SymmetricMatrix, y: &DMatrix<f64>) -> Result<()> {
    if y.nrows() != z.n() || y.ncols() > z.n() {
        return Err(Error::DimensionMismatch(format!(
            "y must be n x d with d <= n = {}, got {:?}",
            z.n(),
            y.shape()
        )));
    }
    Ok(())
}

pub fn psi1(z: &SymmetricMatrix) -> f64 {
    z.determinant()
}

/// `ψ₂ = (−1)^d det [[z, y], [yᵀ, 0]]`, a polynomial in `(z, y)`.
pub fn psi2(z: &SymmetricMatrix, y: &DMatrix<f64>) -> Result<f64> {
    check_pair(z, y)?;
    let sign = if y.ncols().is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok(sign * bordered_determinant(z.as_matrix(), y)?)
}

/// `ψ₂ = det z · det(yᵀ z⁻¹ y)`, valid for invertible `z`.
pub fn psi2_product(z: &SymmetricMatrix, y: &DMatrix<f64>, tol: &TolerancePolicy) -> Result<f64> {
    check_pair(z, y)?;
    let det = z.determinant();
    let threshold = singular_threshold(z, tol);
    if !(det.abs() > threshold) {
        return Err(Error::SingularZ { det, threshold });
    }
    let w = solve(z.as_matrix(), y)?;
    Ok(det * (y.transpose() * w).determinant())
}

fn singular_threshold(z: &SymmetricMatrix, tol: &TolerancePolicy) -> f64 {
    let rows: f64 = z.as_matrix().row_iter().map(|r| r.norm()).product();
    tol.rel_eps * rows
}

/// `K^{α,β}(z, y) = |det z|^{α−β} |det [[z, y], [yᵀ, 0]]|^β`, complex exponents.
pub fn kernel_k_complex(
    z: &SymmetricMatrix,
    y: &DMatrix<f64>,
    alpha: Complex64,
    beta: Complex64,
    tol: &TolerancePolicy,
) -> Result<Complex64> {
    check_pair(z, y)?;
    let det = z.determinant();
    let bd = bordered_determinant(z.as_matrix(), y)?;
    let threshold = singular_threshold(z, tol);
    let z_part = if det.abs() > threshold {
        abs_pow(det.abs(), alpha - beta)
    } else {
        // block route: only finite when the exponent of |det z| is nonnegative
        if (alpha - beta).re < 0.0 {
            None
        } else {
            abs_pow(det.abs(), alpha - beta)
        }
    }
    .ok_or(Error::SingularZ { det, threshold })?;
    let y_part = abs_pow(bd.abs(), beta)
        .ok_or_else(|| Error::Numerical("kernel pole: restricted form is degenerate with Re(beta) < 0".into()))?;
    Ok(z_part * y_part)
}

/// Real kernel. The signed variant `det z^{α−β} · det[[z, y], [yᵀ, 0]]^β`
/// needs integer exponents.
pub fn kernel_k(
    z: &SymmetricMatrix,
    y: &DMatrix<f64>,
    alpha: f64,
    beta: f64,
    signed: bool,
    tol: &TolerancePolicy,
) -> Result<f64> {
    if !signed {
        let v = kernel_k_complex(z, y, Complex64::new(alpha, 0.0), Complex64::new(beta, 0.0), tol)?;
        return Ok(v.re);
    }
    if alpha.fract() != 0.0 || beta.fract() != 0.0 {
        return Err(Error::InvalidInput(format!(
            "signed kernel needs integer exponents, got alpha = {alpha}, beta = {beta}"
        )));
    }
    check_pair(z, y)?;
    let det = z.determinant();
    let bd = bordered_determinant(z.as_matrix(), y)?;
    let e1 = (alpha - beta) as i32;
    let e2 = beta as i32;
    if e1 < 0 && det == 0.0 {
        return Err(Error::SingularZ {
            det,
            threshold: singular_threshold(z, tol),
        });
    }
    if e2 < 0 && bd == 0.0 {
        return Err(Error::Numerical("kernel pole: restricted form is degenerate with beta < 0".into()));
    }
    Ok(det.powi(e1) * bd.powi(e2))
}

/// All `d`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, d: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for i in start..=(n - left) {
            cur.push(i);
            rec(i + 1, n, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if d <= n {
        rec(0, n, d, &mut Vec::with_capacity(d), &mut out);
    }
    out
}

fn minor(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> f64 {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])]).determinant()
}

/// `Σ_{I,J} det z_{IJ} · det y_{I} · det y_{J}`, which equals `det(yᵀ z y)`.
pub fn minor_expansion(z: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
    let n = z.nrows();
    let d = y.ncols();
    if z.ncols() != n || y.nrows() != n || d > n {
        return Err(Error::DimensionMismatch(format!(
            "minor expansion needs square z and n x d y with d <= n, got {:?} and {:?}",
            z.shape(),
            y.shape()
        )));
    }
    if n > MINOR_EXPANSION_MAX_N {
        return Err(Error::InvalidInput(format!(
            "minor expansion is capped at n = {MINOR_EXPANSION_MAX_N}, got n = {n}"
        )));
    }
    let all_cols: Vec<usize> = (0..d).collect();
    let subsets = combinations(n, d);
    let y_minors: Vec<f64> = subsets.iter().map(|s| minor(y, s, &all_cols)).collect();
    let partials: Vec<f64> = subsets
        .par_iter()
        .zip(y_minors.par_iter())
        .map(|(rows, &yi)| {
            if yi == 0.0 {
                return 0.0;
            }
            let terms: Vec<f64> = subsets
                .iter()
                .zip(&y_minors)
                .map(|(cols, &yj)| if yj == 0.0 { 0.0 } else { minor(z, rows, cols) * yi * yj })
                .collect();
            pairwise_sum(&terms)
        })
        .collect();
    Ok(pairwise_sum(&partials))
}

/// Exponents `(m₁, m₂)` of the relative invariant `ψ₁^{m₁} ψ₂^{m₂}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharacterPair {
    pub m1: u32,
    pub m2: u32,
}

impl CharacterPair {
    pub fn evaluate(&self, z: &SymmetricMatrix, y: &DMatrix<f64>) -> Result<f64> {
        Ok(psi1(z).powi(self.m1 as i32) * psi2(z, y)?.powi(self.m2 as i32))
    }

    /// Factor picked up under `(z, y) ↦ (h z hᵀ, h y mᵀ)`:
    /// `(det h)^{2(m₁+m₂)} (det m)^{2m₂}`.
    pub fn character(&self, h: &DMatrix<f64>, m: &DMatrix<f64>) -> f64 {
        let dh = h.determinant();
        let dm = m.determinant();
        dh.powi(2 * (self.m1 + self.m2) as i32) * dm.powi(2 * self.m2 as i32)
    }
}

/// Weakly decreasing tuple of nonnegative integers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(parts: Vec<u32>) -> Result<Self> {
        if parts.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidInput(format!("multi-index {parts:?} is not weakly decreasing")));
        }
        Ok(Self(parts))
    }

    pub fn parts(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// All multi-indices of length `n` with entries at most `max`.
    pub fn all(n: usize, max: u32) -> Vec<Self> {
        fn rec(n: usize, bound: u32, cur: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
            if cur.len() == n {
                out.push(MultiIndex(cur.clone()));
                return;
            }
            for v in (0..=bound).rev() {
                cur.push(v);
                rec(n, v, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(n, max, &mut Vec::with_capacity(n), &mut out);
        out
    }
}

/// Rising factorial `x (x + 1) ⋯ (x + k − 1)`.
pub fn rising_factorial(x: f64, k: u32) -> f64 {
    (0..k).map(|j| x + j as f64).product()
}

/// `(ν)_a = Π_i (ν − (i−1)/2)_{αᵢ}`.
pub fn pochhammer_general(nu: f64, a: &MultiIndex) -> f64 {
    a.0
        .iter()
        .enumerate()
        .map(|(i, &k)| rising_factorial(nu - i as f64 / 2.0, k))
        .product()
}

/// For integer `ν ≤ 0`: `(ν)_a = 0` exactly when `α₁ > −ν`.
pub fn pochhammer_vanishes(nu: i64, a: &MultiIndex) -> Result<bool> {
    if nu > 0 {
        return Err(Error::InvalidInput(format!("vanishing criterion needs nu <= 0, got {nu}")));
    }
    Ok(a.0.first().is_some_and(|&a1| i64::from(a1) > -nu))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> TolerancePolicy {
        TolerancePolicy::default()
    }

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn psi_examples() {
        assert_eq!(psi1(&SymmetricMatrix::identity(3)), 1.0);
        assert_eq!(psi1(&SymmetricMatrix::i_pq(1, 1)), -1.0);
        let y = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, 1.0, 3.0, -1.0]);
        let gram = (y.transpose() * &y).determinant();
        assert!((psi2(&SymmetricMatrix::identity(3), &y).unwrap() - gram).abs() < 1e-12);
        assert_eq!(psi2(&SymmetricMatrix::i_pq(1, 1), &col(&[1.0, 1.0])).unwrap(), 0.0);
    }

    #[test]
    fn psi2_routes_agree() {
        let z = SymmetricMatrix::from_row_slice(2, &[2.0, 1.0, 1.0, -3.0]).unwrap();
        let y = col(&[0.5, 2.0]);
        let a = psi2(&z, &y).unwrap();
        let b = psi2_product(&z, &y, &tol()).unwrap();
        assert!((a - b).abs() <= 1e-12 * a.abs());
        assert!(matches!(
            psi2_product(&SymmetricMatrix::zeros(2), &y, &tol()),
            Err(Error::SingularZ { .. })
        ));
    }

    #[test]
    fn kernel_examples() {
        let z = SymmetricMatrix::from_diagonal(&[4.0]);
        let y = col(&[3.0]);
        assert!((kernel_k(&z, &y, 2.0, 1.0, false, &tol()).unwrap() - 36.0).abs() < 1e-12);
        assert_eq!(kernel_k(&z, &y, 0.0, 0.0, false, &tol()).unwrap(), 1.0);
        // signed: 4^1 · (−9)^1
        assert_eq!(kernel_k(&z, &y, 2.0, 1.0, true, &tol()).unwrap(), -36.0);
        assert!(kernel_k(&z, &y, 1.5, 1.0, true, &tol()).is_err());
        let y2 = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, 1.0, 3.0, -1.0]);
        let gram = (y2.transpose() * &y2).determinant();
        let k = kernel_k(&SymmetricMatrix::identity(3), &y2, 1.0, 0.5, false, &tol()).unwrap();
        assert!((k - gram.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn kernel_singular_z() {
        let z = SymmetricMatrix::zeros(2);
        let y = col(&[1.0, 0.0]);
        assert!(matches!(
            kernel_k(&z, &y, 0.0, 1.0, false, &tol()),
            Err(Error::SingularZ { .. })
        ));
        // nonnegative exponent on |det z|: the block route stays finite
        let z = SymmetricMatrix::from_diagonal(&[0.0, 1.0]);
        assert_eq!(kernel_k(&z, &y, 1.0, 0.0, false, &tol()).unwrap(), 0.0);
    }

    #[test]
    fn minor_expansion_examples() {
        let z = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let y = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -1.0, 0.5]);
        let direct = (y.transpose() * &z * &y).determinant();
        assert!((minor_expansion(&z, &y).unwrap() - direct).abs() < 1e-12);
        let y = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, 1.0, 3.0, -1.0]);
        let gram = (y.transpose() * &y).determinant();
        assert!((minor_expansion(&DMatrix::identity(3, 3), &y).unwrap() - gram).abs() < 1e-12);
        assert!(minor_expansion(&DMatrix::identity(13, 13), &DMatrix::zeros(13, 1)).is_err());
    }

    #[test]
    fn combination_counts() {
        assert_eq!(combinations(4, 2).len(), 6);
        assert_eq!(combinations(3, 0), vec![Vec::<usize>::new()]);
        assert_eq!(combinations(3, 3), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn pochhammer_examples() {
        let zeros = MultiIndex::new(vec![0, 0, 0]).unwrap();
        assert_eq!(pochhammer_general(3.7, &zeros), 1.0);
        let a = MultiIndex::new(vec![3, 0]).unwrap();
        assert_eq!(pochhammer_general(-2.0, &a), 0.0);
        assert!(pochhammer_vanishes(-2, &a).unwrap());
        let a = MultiIndex::new(vec![2, 1]).unwrap();
        assert_eq!(pochhammer_general(1.0, &a), 1.0);
        let a = MultiIndex::new(vec![2, 2]).unwrap();
        assert!(!pochhammer_vanishes(-2, &a).unwrap());
        assert_ne!(pochhammer_general(-2.0, &a), 0.0);
        assert!(pochhammer_vanishes(0, &MultiIndex::new(vec![1, 0]).unwrap()).unwrap());
        assert!(MultiIndex::new(vec![1, 2]).is_err());
        assert!(pochhammer_vanishes(1, &zeros).is_err());
    }

    #[test]
    fn multi_index_enumeration() {
        // partitions with at most 2 parts, each <= 2
        assert_eq!(MultiIndex::all(2, 2).len(), 6);
        assert_eq!(MultiIndex::all(1, 8).len(), 9);
    }
}
