//! Elements of `Sp(2n, R)`, the Siegel parabolic, `K`, the Weyl
//! representatives `w_k`, and the fractional linear action on `Sym_n(R)`.
//!
//! Block convention throughout: `g = [[a, b], [c, d]]` with `n x n` blocks and
//! `J = [[0, -1], [1, 0]]`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numerics::{
    from_blocks, inverse, max_abs, spd_sqrt, SymmetricMatrix, TolerancePolicy,
};

pub fn j_matrix(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = -1.0;
        j[(n + i, i)] = 1.0;
    }
    j
}

fn block(m: &DMatrix<f64>, n: usize, row: usize, col: usize) -> DMatrix<f64> {
    m.view((row * n, col * n), (n, n)).into_owned()
}

/// A `2n x 2n` real matrix with `gᵀ J g = J`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticElement {
    n: usize,
    m: DMatrix<f64>,
}

impl SymplecticElement {
    /// Validates membership with both the Gram test and the block test.
    pub fn new(m: DMatrix<f64>, tol: &TolerancePolicy) -> Result<Self> {
        if !is_symplectic(&m, tol)? {
            return Err(Error::InvariantViolation(format!(
                "matrix is not symplectic (Gram residual {:e})",
                gram_residual(&m)
            )));
        }
        let n = m.nrows() / 2;
        Ok(Self { n, m })
    }

    pub fn from_blocks(
        a: &DMatrix<f64>,
        b: &DMatrix<f64>,
        c: &DMatrix<f64>,
        d: &DMatrix<f64>,
        tol: &TolerancePolicy,
    ) -> Result<Self> {
        Self::new(from_blocks(a, b, c, d)?, tol)
    }

    /// Wraps a matrix known to be symplectic by construction.
    pub(crate) fn from_matrix_unchecked(m: DMatrix<f64>) -> Self {
        debug_assert!(m.nrows() == m.ncols() && m.nrows().is_multiple_of(2));
        Self { n: m.nrows() / 2, m }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_matrix_unchecked(DMatrix::identity(2 * n, 2 * n))
    }

    pub fn j(n: usize) -> Self {
        Self::from_matrix_unchecked(j_matrix(n))
    }

    /// Levi element `[[h, 0], [0, hᵀ⁻¹]]`.
    pub fn levi(h: &DMatrix<f64>) -> Result<Self> {
        let n = h.nrows();
        if h.ncols() != n {
            return Err(Error::DimensionMismatch(format!("Levi block must be square, got {:?}", h.shape())));
        }
        let hti = inverse(&h.transpose())?;
        let z = DMatrix::zeros(n, n);
        Ok(Self::from_matrix_unchecked(from_blocks(h, &z, &z, &hti)?))
    }

    /// `[[1, s], [0, 1]]`.
    pub fn unipotent_upper(s: &SymmetricMatrix) -> Self {
        let n = s.n();
        let i = DMatrix::identity(n, n);
        let z = DMatrix::zeros(n, n);
        Self::from_matrix_unchecked(from_blocks(&i, s.as_matrix(), &z, &i).expect("square blocks"))
    }

    /// `[[1, 0], [s, 1]]`, the element `v(s)` of the opposite unipotent radical.
    pub fn unipotent_lower(s: &SymmetricMatrix) -> Self {
        let n = s.n();
        let i = DMatrix::identity(n, n);
        let z = DMatrix::zeros(n, n);
        Self::from_matrix_unchecked(from_blocks(&i, &z, s.as_matrix(), &i).expect("square blocks"))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn a(&self) -> DMatrix<f64> {
        block(&self.m, self.n, 0, 0)
    }

    pub fn b(&self) -> DMatrix<f64> {
        block(&self.m, self.n, 0, 1)
    }

    pub fn c(&self) -> DMatrix<f64> {
        block(&self.m, self.n, 1, 0)
    }

    pub fn d(&self) -> DMatrix<f64> {
        block(&self.m, self.n, 1, 1)
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "symplectic product of mismatched sizes");
        Self::from_matrix_unchecked(&self.m * &other.m)
    }

    pub fn inverse(&self) -> Self {
        sp_inverse(self)
    }

    /// True when the off-diagonal blocks vanish exactly, i.e. `g` lies in the Levi factor.
    pub fn is_levi(&self) -> bool {
        self.b().iter().all(|v| *v == 0.0) && self.c().iter().all(|v| *v == 0.0)
    }
}

/// Siegel parabolic element `[[x, z], [0, xᵀ⁻¹]]` with `x⁻¹ z` symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SiegelParabolicElement {
    x: DMatrix<f64>,
    z_blk: DMatrix<f64>,
}

impl SiegelParabolicElement {
    pub fn new(x: DMatrix<f64>, z_blk: DMatrix<f64>, tol: &TolerancePolicy) -> Result<Self> {
        let n = x.nrows();
        if x.ncols() != n || z_blk.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "parabolic blocks {:?} and {:?}",
                x.shape(),
                z_blk.shape()
            )));
        }
        let xinv = inverse(&x)?;
        let s = &xinv * &z_blk;
        if max_abs(&(&s - s.transpose())) > tol.threshold(max_abs(&s).max(1.0)) {
            return Err(Error::InvariantViolation(
                "x⁻¹ z is not symmetric, so p is not in P_S".into(),
            ));
        }
        Ok(Self { x, z_blk })
    }

    /// `levi(x) · [[1, s], [0, 1]] = [[x, x s], [0, xᵀ⁻¹]]`.
    pub fn from_levi_and_translation(x: DMatrix<f64>, s: &SymmetricMatrix) -> Result<Self> {
        inverse(&x)?;
        let z_blk = &x * s.as_matrix();
        Ok(Self { x, z_blk })
    }

    pub fn levi(x: DMatrix<f64>) -> Result<Self> {
        let n = x.nrows();
        Self::from_levi_and_translation(x, &SymmetricMatrix::zeros(n))
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn z_blk(&self) -> &DMatrix<f64> {
        &self.z_blk
    }

    /// The lower-right block `xᵀ⁻¹`.
    pub fn y(&self) -> DMatrix<f64> {
        inverse(&self.x.transpose()).expect("x invertible by construction")
    }

    pub fn to_symplectic(&self) -> SymplecticElement {
        let n = self.n();
        let m = from_blocks(&self.x, &self.z_blk, &DMatrix::zeros(n, n), &self.y()).expect("square blocks");
        SymplecticElement::from_matrix_unchecked(m)
    }
}

fn gram_residual(g: &DMatrix<f64>) -> f64 {
    let n = g.nrows() / 2;
    let j = j_matrix(n);
    max_abs(&(g.transpose() * &j * g - j))
}

fn block_residual(g: &DMatrix<f64>) -> f64 {
    let n = g.nrows() / 2;
    let (a, b, c, d) = (block(g, n, 0, 0), block(g, n, 0, 1), block(g, n, 1, 0), block(g, n, 1, 1));
    let ac = a.transpose() * &c;
    let bd = b.transpose() * &d;
    let unit = a.transpose() * &d - c.transpose() * &b - DMatrix::identity(n, n);
    max_abs(&(&ac - ac.transpose()))
        .max(max_abs(&(&bd - bd.transpose())))
        .max(max_abs(&unit))
}

/// Membership in `Sp(2n, R)`.
///
/// Runs the Gram test `‖gᵀJg − J‖ ≤ tol` and the block test
/// (`aᵀc`, `bᵀd` symmetric, `aᵀd − cᵀb = 1`) against the same threshold and
/// fails loudly if the two disagree.
pub fn is_symplectic(g: &DMatrix<f64>, tol: &TolerancePolicy) -> Result<bool> {
    if g.nrows() != g.ncols() || !g.nrows().is_multiple_of(2) || g.nrows() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "symplectic test needs a nonempty square even-dimensional matrix, got {:?}",
            g.shape()
        )));
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Ok(false);
    }
    let scale = max_abs(g).max(1.0);
    let threshold = tol.threshold(scale * scale);
    let gram = gram_residual(g) <= threshold;
    let blocks = block_residual(g) <= threshold;
    if gram != blocks {
        return Err(Error::Numerical(format!(
            "Gram test ({:e}) and block test ({:e}) disagree at threshold {threshold:e}",
            gram_residual(g),
            block_residual(g)
        )));
    }
    Ok(gram)
}

/// `g⁻¹ = [[dᵀ, −bᵀ], [−cᵀ, aᵀ]]`.
pub fn sp_inverse(g: &SymplecticElement) -> SymplecticElement {
    let m = from_blocks(
        &g.d().transpose(),
        &(-g.b().transpose()),
        &(-g.c().transpose()),
        &g.a().transpose(),
    )
    .expect("square blocks");
    SymplecticElement::from_matrix_unchecked(m)
}

/// `g⁻¹ p g` by the closed block formula (with `y = xᵀ⁻¹`).
pub fn conjugate_parabolic(g: &SymplecticElement, p: &SiegelParabolicElement) -> SymplecticElement {
    let (a, b, c, d) = (g.a(), g.b(), g.c(), g.d());
    let (at, bt, ct, dt) = (a.transpose(), b.transpose(), c.transpose(), d.transpose());
    let x = p.x();
    let z = p.z_blk();
    let y = p.y();
    let top_left = &dt * x * &a + &dt * z * &c - &bt * &y * &c;
    let top_right = &dt * x * &b + &dt * z * &d - &bt * &y * &d;
    let bottom_left = -(&ct * x * &a) - &ct * z * &c + &at * &y * &c;
    let bottom_right = -(&ct * x * &b) - &ct * z * &d + &at * &y * &d;
    SymplecticElement::from_matrix_unchecked(
        from_blocks(&top_left, &top_right, &bottom_left, &bottom_right).expect("square blocks"),
    )
}

/// Membership in `K = Sp(2n, R) ∩ O(2n)`: `d = a`, `b = −c`, `aᵀb` symmetric, `aᵀa + bᵀb = 1`.
pub fn is_in_k(g: &SymplecticElement, tol: &TolerancePolicy) -> bool {
    let (a, b, c, d) = (g.a(), g.b(), g.c(), g.d());
    let n = g.n();
    let threshold = tol.threshold(max_abs(g.matrix()).max(1.0));
    let ab = a.transpose() * &b;
    let unit = a.transpose() * &a + b.transpose() * &b - DMatrix::identity(n, n);
    max_abs(&(&d - &a)) <= threshold
        && max_abs(&(&b + &c)) <= threshold
        && max_abs(&(&ab - ab.transpose())) <= threshold
        && max_abs(&unit) <= threshold
}

/// Weyl representative `w_k` of the `k`-th Bruhat cell.
#[derive(Debug, Clone, PartialEq)]
pub struct WeylRep {
    pub n: usize,
    pub k: usize,
    pub matrix: DMatrix<f64>,
}

impl From<WeylRep> for SymplecticElement {
    fn from(w: WeylRep) -> Self {
        SymplecticElement::from_matrix_unchecked(w.matrix)
    }
}

/// `w_k` with `a = d = diag(0_{n−k}, 1_k)` and `c = −b = diag(1_{n−k}, 0_k)`.
pub fn weyl_rep(n: usize, k: usize) -> Result<WeylRep> {
    if k > n {
        return Err(Error::ConstraintViolation(format!("Weyl index k = {k} exceeds n = {n}")));
    }
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    let m_k = n - k;
    for i in 0..m_k {
        m[(i, n + i)] = -1.0;
        m[(n + i, i)] = 1.0;
    }
    for i in m_k..n {
        m[(i, i)] = 1.0;
        m[(n + i, n + i)] = 1.0;
    }
    Ok(WeylRep { n, k, matrix: m })
}

/// Fractional linear action `g·z = −(a z − b)(c z − d)⁻¹`.
///
/// Fails with [`Error::SingularDenominator`] when `|det(cz − d)|` is below
/// `rel_eps` times the product of the row norms of `cz − d`.
pub fn fractional_action(
    g: &SymplecticElement,
    z: &SymmetricMatrix,
    tol: &TolerancePolicy,
) -> Result<SymmetricMatrix> {
    if z.n() != g.n() {
        return Err(Error::DimensionMismatch(format!(
            "fractional action of Sp({}) on Sym_{}",
            2 * g.n(),
            z.n()
        )));
    }
    let zm = z.as_matrix();
    let den = g.c() * zm - g.d();
    let num = g.a() * zm - g.b();
    let row_product: f64 = den.row_iter().map(|r| r.norm()).product();
    let det = den.determinant();
    let threshold = tol.rel_eps * row_product;
    if !(det.abs() > threshold) {
        return Err(Error::SingularDenominator { det, threshold });
    }
    // X = num · den⁻¹  ⇔  denᵀ Xᵀ = numᵀ
    let xt = den
        .transpose()
        .lu()
        .solve(&num.transpose())
        .ok_or(Error::SingularDenominator { det, threshold })?;
    Ok(SymmetricMatrix::symmetrize(-xt.transpose()))
}

/// Factors of `v(z) = [[1, 0], [z, 1]] = k · ma · n`.
#[derive(Debug, Clone)]
pub struct IwasawaFactors {
    pub k: SymplecticElement,
    pub ma: SymplecticElement,
    pub n_elem: SymplecticElement,
    /// `det(1 + z²)^{1/2n}`
    pub alpha: f64,
    /// Principal square root of `1 + z²`.
    pub h: SymmetricMatrix,
}

impl IwasawaFactors {
    pub fn product(&self) -> DMatrix<f64> {
        self.k.matrix() * self.ma.matrix() * self.n_elem.matrix()
    }
}

pub fn iwasawa_vz(z: &SymmetricMatrix) -> Result<IwasawaFactors> {
    let n = z.n();
    let zm = z.as_matrix();
    let one = DMatrix::identity(n, n);
    let one_plus = SymmetricMatrix::symmetrize(&one + zm * zm);
    let h = spd_sqrt(&one_plus)?;
    let hinv = inverse(h.as_matrix())?;
    let k = from_blocks(&hinv, &(-(&hinv * zm)), &(&hinv * zm), &hinv)?;
    let ma = SymplecticElement::levi(h.as_matrix())?;
    let upper = hinv.transpose() * zm * &hinv;
    let n_elem = from_blocks(&one, &upper, &DMatrix::zeros(n, n), &one)?;
    let alpha = one_plus.determinant().powf(1.0 / (2.0 * n as f64));
    Ok(IwasawaFactors {
        k: SymplecticElement::from_matrix_unchecked(k),
        ma,
        n_elem: SymplecticElement::from_matrix_unchecked(n_elem),
        alpha,
        h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, data.len() / rows, data)
    }

    #[test]
    fn membership_examples() {
        let tol = TolerancePolicy::default();
        assert!(is_symplectic(&DMatrix::identity(4, 4), &tol).unwrap());
        assert!(is_symplectic(&j_matrix(3), &tol).unwrap());
        assert!(is_symplectic(&m(2, &[1.0, 1.0, 0.0, 1.0]), &tol).unwrap());
        assert!(!is_symplectic(&m(2, &[2.0, 0.0, 0.0, 1.0]), &tol).unwrap());
        assert!(matches!(
            is_symplectic(&DMatrix::identity(3, 3), &tol),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn inverse_examples() {
        let tol = TolerancePolicy::default();
        let g = SymplecticElement::new(m(2, &[1.0, 1.0, 0.0, 1.0]), &tol).unwrap();
        assert_eq!(sp_inverse(&g).matrix(), &m(2, &[1.0, -1.0, 0.0, 1.0]));
        let j = SymplecticElement::j(2);
        assert_eq!(sp_inverse(&j).matrix(), &(-j_matrix(2)));
        let id = SymplecticElement::identity(3);
        assert_eq!(sp_inverse(&id), id);
    }

    #[test]
    fn conjugation_by_j_swaps_levi_blocks() {
        let x = m(2, &[2.0, 1.0, 0.5, 3.0]);
        let p = SiegelParabolicElement::levi(x.clone()).unwrap();
        let out = conjugate_parabolic(&SymplecticElement::j(2), &p);
        let xti = inverse(&x.transpose()).unwrap();
        assert!(max_abs(&(out.a() - xti)) < 1e-14);
        assert!(max_abs(&(out.d() - x)) < 1e-14);
        assert!(max_abs(&out.b()) < 1e-14 && max_abs(&out.c()) < 1e-14);
        let same = conjugate_parabolic(&SymplecticElement::identity(2), &p);
        assert!(max_abs(&(same.matrix() - p.to_symplectic().matrix())) < 1e-14);
    }

    #[test]
    fn parabolic_constructor_checks_symmetry() {
        let tol = TolerancePolicy::default();
        let x = m(2, &[1.0, 1.0, 0.0, 1.0]);
        // x⁻¹ z symmetric with z = x s
        let s = m(2, &[1.0, 2.0, 2.0, -1.0]);
        assert!(SiegelParabolicElement::new(x.clone(), &x * &s, &tol).is_ok());
        assert!(SiegelParabolicElement::new(x, m(2, &[0.0, 1.0, 0.0, 0.0]), &tol).is_err());
    }

    #[test]
    fn k_membership_examples() {
        let tol = TolerancePolicy::default();
        assert!(is_in_k(&SymplecticElement::identity(2), &tol));
        assert!(is_in_k(&SymplecticElement::j(2), &tol));
        let g = SymplecticElement::new(m(2, &[2.0, 0.0, 0.0, 0.5]), &tol).unwrap();
        assert!(!is_in_k(&g, &tol));
    }

    #[test]
    fn weyl_rep_examples() {
        assert_eq!(weyl_rep(3, 3).unwrap().matrix, DMatrix::identity(6, 6));
        assert_eq!(weyl_rep(3, 0).unwrap().matrix, j_matrix(3));
        #[rustfmt::skip]
        let expected = m(4, &[
            0.0, 0.0, -1.0, 0.0,
            0.0, 1.0,  0.0, 0.0,
            1.0, 0.0,  0.0, 0.0,
            0.0, 0.0,  0.0, 1.0,
        ]);
        assert_eq!(weyl_rep(2, 1).unwrap().matrix, expected);
        assert!(weyl_rep(2, 3).is_err());
    }

    #[test]
    fn fractional_action_examples() {
        let tol = TolerancePolicy::default();
        let z = SymmetricMatrix::from_row_slice(2, &[2.0, 1.0, 1.0, 3.0]).unwrap();
        let out = fractional_action(&SymplecticElement::identity(2), &z, &tol).unwrap();
        assert!(max_abs(&(out.as_matrix() - z.as_matrix())) < 1e-14);

        let out = fractional_action(&SymplecticElement::j(2), &z, &tol).unwrap();
        let minus_inv = -inverse(z.as_matrix()).unwrap();
        assert!(max_abs(&(out.as_matrix() - minus_inv)) < 1e-14);

        let g = SymplecticElement::new(m(2, &[1.0, 1.0, 0.0, 1.0]), &tol).unwrap();
        let out = fractional_action(&g, &SymmetricMatrix::from_diagonal(&[3.0]), &tol).unwrap();
        assert_eq!(out.as_matrix()[(0, 0)], 2.0);

        // J on a singular z leaves the chart
        let err = fractional_action(&SymplecticElement::j(1), &SymmetricMatrix::zeros(1), &tol);
        assert!(matches!(err, Err(Error::SingularDenominator { .. })));
    }

    #[test]
    fn iwasawa_scalar_example() {
        let f = iwasawa_vz(&SymmetricMatrix::from_diagonal(&[1.0])).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((f.h.as_matrix()[(0, 0)] - 2f64.sqrt()).abs() < 1e-15);
        assert!(max_abs(&(f.k.matrix() - m(2, &[r, -r, r, r]))) < 1e-15);
        assert!((f.alpha - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn iwasawa_at_zero_is_trivial() {
        let f = iwasawa_vz(&SymmetricMatrix::zeros(3)).unwrap();
        assert_eq!(f.k.matrix(), &DMatrix::identity(6, 6));
        assert_eq!(f.ma.matrix(), &DMatrix::identity(6, 6));
        assert_eq!(f.n_elem.matrix(), &DMatrix::identity(6, 6));
        assert_eq!(f.alpha, 1.0);
    }
}
