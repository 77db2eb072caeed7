//! Lagrangian subspaces of `R^{2n}`, the `L = GL_n` orbit invariant `(k; r, s)`,
//! orbit representatives, and the `L`-action on the affine cells `N_w`.
//!
//! A frame `[[U], [L]]` spans `λ`; `U` holds the `V⁺` components and `L` the
//! `V⁻` components. The Levi element `[[h, 0], [0, hᵀ⁻¹]]` sends `U ↦ hU`,
//! `L ↦ hᵀ⁻¹L`, so the form `B = Lᵀ U` transforms by congruence and its
//! signature is the orbit invariant.
//!
//! Sign convention: `frame_from_z(z)` spans `{(z x, x)}` and carries
//! `B = z`; the representative `V^{(k;r,s)}` carries `B = [[−ζ, 0], [0, 0]]`
//! with `ζ = diag(I_{r,s}, 0)`. Hence the label is
//! `(k; r, s) = (k; sig(B).neg, sig(B).pos)`.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    column_projector, count_inertia, from_blocks, max_abs, orthonormalize_columns, singular_values,
    spectral_norm, SymmetricMatrix, TolerancePolicy,
};
use crate::symplectic::{weyl_rep, SymplecticElement};

/// Frame `[[U], [L]]` of a Lagrangian subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianFrame {
    n: usize,
    up: DMatrix<f64>,
    low: DMatrix<f64>,
}

impl LagrangianFrame {
    /// Validates full rank and isotropy (`Lᵀ U` symmetric).
    pub fn new(up: DMatrix<f64>, low: DMatrix<f64>, tol: &TolerancePolicy) -> Result<Self> {
        let n = up.nrows();
        if up.shape() != (n, n) || low.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "frame blocks must be n x n, got {:?} and {:?}",
                up.shape(),
                low.shape()
            )));
        }
        let frame = Self { n, up, low };
        let stacked = frame.stacked();
        if crate::numerics::rank(&stacked, tol) != n {
            return Err(Error::InvariantViolation("frame does not have full column rank".into()));
        }
        if !frame.is_isotropic(tol) {
            return Err(Error::InvariantViolation(format!(
                "span is not isotropic (residual {:e})",
                frame.isotropy_residual()
            )));
        }
        Ok(frame)
    }

    /// Splits a stacked `2n x n` matrix into a frame.
    pub fn from_stacked(m: &DMatrix<f64>, tol: &TolerancePolicy) -> Result<Self> {
        let n = m.ncols();
        if m.nrows() != 2 * n {
            return Err(Error::DimensionMismatch(format!("frame must be 2n x n, got {:?}", m.shape())));
        }
        Self::new(m.rows(0, n).into_owned(), m.rows(n, n).into_owned(), tol)
    }

    fn from_stacked_unchecked(m: DMatrix<f64>) -> Self {
        let n = m.ncols();
        Self {
            n,
            up: m.rows(0, n).into_owned(),
            low: m.rows(n, n).into_owned(),
        }
    }

    /// `V⁺ = span(e_1, ..., e_n)`.
    pub fn v_plus(n: usize) -> Self {
        Self {
            n,
            up: DMatrix::identity(n, n),
            low: DMatrix::zeros(n, n),
        }
    }

    /// `V⁻ = span(e_{n+1}, ..., e_{2n})`.
    pub fn v_minus(n: usize) -> Self {
        Self {
            n,
            up: DMatrix::zeros(n, n),
            low: DMatrix::identity(n, n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn up(&self) -> &DMatrix<f64> {
        &self.up
    }

    pub fn low(&self) -> &DMatrix<f64> {
        &self.low
    }

    pub fn stacked(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(2 * self.n, self.n);
        m.rows_mut(0, self.n).copy_from(&self.up);
        m.rows_mut(self.n, self.n).copy_from(&self.low);
        m
    }

    /// `max |Lᵀ U − Uᵀ L|`, the entries of `Fᵀ J F`.
    pub fn isotropy_residual(&self) -> f64 {
        let b = self.low.transpose() * &self.up;
        max_abs(&(&b - b.transpose()))
    }

    fn scale(&self) -> f64 {
        spectral_norm(&self.stacked()).max(f64::MIN_POSITIVE)
    }

    fn is_isotropic(&self, tol: &TolerancePolicy) -> bool {
        let s = self.scale();
        self.isotropy_residual() <= tol.threshold(s * s)
    }

    /// Same frame with orthonormal columns (same span).
    pub fn orthonormalized(&self) -> Self {
        Self::from_stacked_unchecked(orthonormalize_columns(&self.stacked()))
    }

    /// Right multiplication by an invertible `n x n` basis change.
    pub fn rebased(&self, g: &DMatrix<f64>) -> Self {
        Self {
            n: self.n,
            up: &self.up * g,
            low: &self.low * g,
        }
    }

    /// Orthogonal projector onto the span.
    pub fn projector(&self) -> DMatrix<f64> {
        column_projector(&self.stacked())
    }

    /// Whether two frames span the same subspace.
    pub fn same_span(&self, other: &Self, tol: &TolerancePolicy) -> bool {
        self.n == other.n && max_abs(&(self.projector() - other.projector())) <= tol.threshold(1.0)
    }

    /// `B = Lᵀ U`, symmetric for a Lagrangian frame.
    pub fn form(&self) -> SymmetricMatrix {
        SymmetricMatrix::symmetrize(self.low.transpose() * &self.up)
    }
}

pub fn is_lagrangian(frame: &LagrangianFrame, tol: &TolerancePolicy) -> bool {
    crate::numerics::rank(&frame.stacked(), tol) == frame.n && frame.is_isotropic(tol)
}

/// `{(z x, x)}`: `U = z`, `L = 1`.
pub fn frame_from_z(z: &SymmetricMatrix) -> LagrangianFrame {
    let n = z.n();
    LagrangianFrame {
        n,
        up: z.as_matrix().clone(),
        low: DMatrix::identity(n, n),
    }
}

/// `g · λ`, returned with orthonormal columns.
pub fn act(g: &SymplecticElement, frame: &LagrangianFrame) -> Result<LagrangianFrame> {
    if g.n() != frame.n {
        return Err(Error::DimensionMismatch(format!(
            "Sp({}) acting on a frame in R^{}",
            2 * g.n(),
            2 * frame.n
        )));
    }
    Ok(LagrangianFrame::from_stacked_unchecked(orthonormalize_columns(
        &(g.matrix() * frame.stacked()),
    )))
}

/// Label `(k; r, s)` of an `L`-orbit on the Lagrangian Grassmannian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LambdaOrbitLabel {
    pub k: usize,
    pub r: usize,
    pub s: usize,
}

impl LambdaOrbitLabel {
    pub fn new(n: usize, k: usize, r: usize, s: usize) -> Result<Self> {
        if k > n || r + s > n - k {
            return Err(Error::ConstraintViolation(format!(
                "label (k={k}, r={r}, s={s}) needs k <= n and r + s <= n - k with n = {n}"
            )));
        }
        Ok(Self { k, r, s })
    }
}

impl fmt::Display for LambdaOrbitLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(k={}, r={}, s={})", self.k, self.r, self.s)
    }
}

/// `k = n − rank(L) = dim(λ ∩ V⁺)`.
pub fn bruhat_index(frame: &LagrangianFrame, tol: &TolerancePolicy) -> usize {
    let band = tol.threshold(frame.scale());
    let rank = singular_values(&frame.low).iter().filter(|&&v| v > band).count();
    frame.n - rank
}

pub fn orbit_invariant(frame: &LagrangianFrame, tol: &TolerancePolicy) -> Result<LambdaOrbitLabel> {
    let k = bruhat_index(frame, tol);
    let scale = frame.scale();
    let values = frame.form().eigenvalues()?;
    let sig = count_inertia(&values, tol, scale * scale);
    if sig.rank() > frame.n - k {
        return Err(Error::Numerical(format!(
            "form rank {} exceeds n - k = {} (frame too ill-conditioned for the tolerance)",
            sig.rank(),
            frame.n - k
        )));
    }
    Ok(LambdaOrbitLabel {
        k,
        r: sig.neg,
        s: sig.pos,
    })
}

/// `V^{(k;r,s)} = {(−ζ v, w, v, 0)}` with `U = diag(−ζ, 1_k)` and `L = diag(1_{n−k}, 0_k)`.
pub fn representative_frame(n: usize, k: usize, r: usize, s: usize) -> Result<LagrangianFrame> {
    LambdaOrbitLabel::new(n, k, r, s)?;
    let m = n - k;
    let zeta = SymmetricMatrix::i_rs_padded(m, r, s);
    let mut up = DMatrix::zeros(n, n);
    up.view_mut((0, 0), (m, m)).copy_from(&(-zeta.as_matrix()));
    let mut low = DMatrix::zeros(n, n);
    for i in 0..m {
        low[(i, i)] = 1.0;
    }
    for i in m..n {
        up[(i, i)] = 1.0;
    }
    Ok(LagrangianFrame { n, up, low })
}

/// All labels in order of `k`, then `r + s`, then decreasing `r`.
pub fn enumerate_orbit_labels(n: usize) -> Result<Vec<LambdaOrbitLabel>> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let mut out = Vec::new();
    for k in 0..=n {
        for total in 0..=(n - k) {
            for r in (0..=total).rev() {
                out.push(LambdaOrbitLabel { k, r, s: total - r });
            }
        }
    }
    Ok(out)
}

/// Point `η = [[ζ, ξ], [ξᵀ, 0_k]]` of the affine cell `N_{w_k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellPoint {
    pub n: usize,
    pub k: usize,
    pub zeta: SymmetricMatrix,
    pub xi: DMatrix<f64>,
}

impl CellPoint {
    pub fn new(zeta: SymmetricMatrix, xi: DMatrix<f64>) -> Result<Self> {
        let m = zeta.n();
        if xi.nrows() != m {
            return Err(Error::DimensionMismatch(format!(
                "xi has {} rows, zeta is {m} x {m}",
                xi.nrows()
            )));
        }
        let k = xi.ncols();
        Ok(Self { n: m + k, k, zeta, xi })
    }

    pub fn eta(&self) -> SymmetricMatrix {
        let zero = DMatrix::zeros(self.k, self.k);
        let m = from_blocks(self.zeta.as_matrix(), &self.xi, &self.xi.transpose(), &zero)
            .expect("blocks sized by construction");
        SymmetricMatrix::symmetrize(m)
    }

    /// Frame of `w_k · v(η) · V⁺`.
    pub fn frame(&self) -> LagrangianFrame {
        let w = weyl_rep(self.n, self.k).expect("k <= n by construction");
        let n = self.n;
        let mut first = DMatrix::zeros(2 * n, n);
        first.rows_mut(0, n).fill_with_identity();
        first.rows_mut(n, n).copy_from(self.eta().as_matrix());
        LagrangianFrame::from_stacked_unchecked(w.matrix * first)
    }
}

/// Splits `h` into blocks `(h₁, h₂, h₃, h₄)` of sizes `(n−k, k)`.
pub fn split_blocks(
    h: &DMatrix<f64>,
    k: usize,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let n = h.nrows();
    let m = n - k;
    (
        h.view((0, 0), (m, m)).into_owned(),
        h.view((0, m), (m, k)).into_owned(),
        h.view((m, 0), (k, m)).into_owned(),
        h.view((m, m), (k, k)).into_owned(),
    )
}

/// `L`-action on the cell: `ξ' = (−h₂ + h₁ξ)(h₄ − h₃ξ)⁻¹` and
/// `ζ' = (h₁ + ξ'h₃) ζ (h₁ + ξ'h₃)ᵀ`.
pub fn l_action_on_cell(h: &DMatrix<f64>, point: &CellPoint, tol: &TolerancePolicy) -> Result<CellPoint> {
    let n = point.n;
    if h.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!("h must be {n} x {n}, got {:?}", h.shape())));
    }
    let (h1, h2, h3, h4) = split_blocks(h, point.k);
    let den = &h4 - &h3 * &point.xi;
    let num = &h1 * &point.xi - &h2;
    let xi_new = if point.k == 0 {
        num
    } else {
        let row_product: f64 = den.row_iter().map(|r| r.norm()).product();
        let det = den.determinant();
        let threshold = tol.rel_eps * row_product;
        if !(det.abs() > threshold) {
            return Err(Error::SingularDenominator { det, threshold });
        }
        den.transpose()
            .lu()
            .solve(&num.transpose())
            .ok_or(Error::SingularDenominator { det, threshold })?
            .transpose()
    };
    let t = &h1 + &xi_new * &h3;
    let a = &t * point.zeta.as_matrix() * t.transpose();
    let asym = max_abs(&(&a - a.transpose()));
    if asym > tol.threshold(max_abs(&a).max(1.0)) {
        return Err(Error::Numerical(format!("updated zeta is not symmetric (residual {asym:e})")));
    }
    CellPoint::new(SymmetricMatrix::symmetrize(a), xi_new)
}

/// Membership of `h` in the stabilizer of `V^{(k;r,s)}`: `h₂ = 0` and `h₁ ζ h₁ᵀ = ζ`.
pub fn stabilizer_membership(h: &DMatrix<f64>, label: &LambdaOrbitLabel, tol: &TolerancePolicy) -> bool {
    let n = h.nrows();
    if h.ncols() != n || label.k > n || label.r + label.s > n - label.k {
        return false;
    }
    let (h1, h2, _, _) = split_blocks(h, label.k);
    let zeta = SymmetricMatrix::i_rs_padded(n - label.k, label.r, label.s);
    let scale = max_abs(h).max(1.0);
    let iso = &h1 * zeta.as_matrix() * h1.transpose() - zeta.as_matrix();
    max_abs(&h2) <= tol.threshold(scale) && max_abs(&iso) <= tol.threshold(scale * scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> TolerancePolicy {
        TolerancePolicy::default()
    }

    #[test]
    fn frame_from_zero_is_v_minus() {
        let f = frame_from_z(&SymmetricMatrix::zeros(2));
        assert!(f.same_span(&LagrangianFrame::v_minus(2), &tol()));
        assert_eq!(frame_from_z(&SymmetricMatrix::identity(2)).isotropy_residual(), 0.0);
    }

    #[test]
    fn j_sends_v_minus_to_v_plus() {
        let f = act(&SymplecticElement::j(3), &LagrangianFrame::v_minus(3)).unwrap();
        assert!(f.same_span(&LagrangianFrame::v_plus(3), &tol()));
        assert!(is_lagrangian(&f, &tol()));
    }

    #[test]
    fn bruhat_index_examples() {
        assert_eq!(bruhat_index(&LagrangianFrame::v_plus(3), &tol()), 3);
        let z = SymmetricMatrix::from_row_slice(2, &[1.0, 2.0, 2.0, 0.0]).unwrap();
        assert_eq!(bruhat_index(&frame_from_z(&z), &tol()), 0);
        assert_eq!(bruhat_index(&representative_frame(3, 2, 1, 0).unwrap(), &tol()), 2);
    }

    #[test]
    fn orbit_invariant_examples() {
        let label = orbit_invariant(&LagrangianFrame::v_plus(2), &tol()).unwrap();
        assert_eq!(label, LambdaOrbitLabel { k: 2, r: 0, s: 0 });
        let label = orbit_invariant(&frame_from_z(&SymmetricMatrix::i_pq(1, 1)), &tol()).unwrap();
        assert_eq!((label.k, label.r, label.s), (0, 1, 1));
        // B = z = I₂ is positive, so the label counts it in s
        let label = orbit_invariant(&frame_from_z(&SymmetricMatrix::identity(2)), &tol()).unwrap();
        assert_eq!(label, LambdaOrbitLabel { k: 0, r: 0, s: 2 });
    }

    #[test]
    fn representative_round_trip() {
        for n in 1..=4 {
            for label in enumerate_orbit_labels(n).unwrap() {
                let f = representative_frame(n, label.k, label.r, label.s).unwrap();
                assert!(is_lagrangian(&f, &tol()));
                assert_eq!(orbit_invariant(&f, &tol()).unwrap(), label);
            }
        }
    }

    #[test]
    fn representative_with_k_zero_is_graph_of_minus_zeta() {
        let f = representative_frame(3, 0, 2, 1).unwrap();
        let z = SymmetricMatrix::i_pq(2, 1).scale(-1.0);
        assert!(f.same_span(&frame_from_z(&z), &tol()));
    }

    #[test]
    fn representative_3_1_1_0() {
        let f = representative_frame(3, 1, 1, 0).unwrap();
        #[rustfmt::skip]
        let expected = DMatrix::from_row_slice(6, 3, &[
            -1.0, 0.0, 0.0,
             0.0, 0.0, 0.0,
             0.0, 0.0, 1.0,
             1.0, 0.0, 0.0,
             0.0, 1.0, 0.0,
             0.0, 0.0, 0.0,
        ]);
        assert_eq!(f.stacked(), expected);
    }

    #[test]
    fn representative_rejects_bad_labels() {
        assert!(matches!(representative_frame(2, 1, 1, 1), Err(Error::ConstraintViolation(_))));
        assert!(representative_frame(2, 3, 0, 0).is_err());
    }

    #[test]
    fn enumeration_counts() {
        let labels = enumerate_orbit_labels(1).unwrap();
        let expected = [(0, 0, 0), (0, 1, 0), (0, 0, 1), (1, 0, 0)];
        let got: Vec<_> = labels.iter().map(|l| (l.k, l.r, l.s)).collect();
        assert_eq!(got, expected);
        assert_eq!(enumerate_orbit_labels(2).unwrap().len(), 10);
        assert!(enumerate_orbit_labels(0).is_err());
    }

    #[test]
    fn cell_action_identity_and_levi() {
        let zeta = SymmetricMatrix::from_row_slice(2, &[1.0, 0.5, 0.5, -2.0]).unwrap();
        let xi = DMatrix::from_row_slice(2, 1, &[0.3, -0.7]);
        let pt = CellPoint::new(zeta, xi).unwrap();
        let same = l_action_on_cell(&DMatrix::identity(3, 3), &pt, &tol()).unwrap();
        assert_eq!(same, pt);

        let h1 = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 1.0]);
        let h4 = DMatrix::from_element(1, 1, 4.0);
        let h = crate::numerics::block_diag(&h1, &h4);
        let out = l_action_on_cell(&h, &pt, &tol()).unwrap();
        let xi_expected = &h1 * &pt.xi / 4.0;
        let zeta_expected = &h1 * pt.zeta.as_matrix() * h1.transpose();
        assert!(max_abs(&(out.xi - xi_expected)) < 1e-14);
        assert!(max_abs(&(out.zeta.as_matrix() - zeta_expected)) < 1e-14);
    }

    #[test]
    fn cell_action_detects_chart_exit() {
        let pt = CellPoint::new(SymmetricMatrix::zeros(1), DMatrix::from_element(1, 1, 1.0)).unwrap();
        // h₄ − h₃ξ = 1 − 1 = 0
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0 + 1e-300]);
        let err = l_action_on_cell(&h, &pt, &tol());
        assert!(matches!(err, Err(Error::SingularDenominator { .. })));
    }

    #[test]
    fn cell_frame_carries_the_label() {
        let zeta = SymmetricMatrix::i_rs_padded(2, 1, 0);
        let pt = CellPoint::new(zeta, DMatrix::from_row_slice(2, 1, &[0.4, 1.5])).unwrap();
        let label = orbit_invariant(&pt.frame(), &tol()).unwrap();
        assert_eq!(label, LambdaOrbitLabel { k: 1, r: 1, s: 0 });
    }

    #[test]
    fn stabilizer_examples() {
        for n in 1..=3 {
            for label in enumerate_orbit_labels(n).unwrap() {
                assert!(stabilizer_membership(&DMatrix::identity(n, n), &label, &tol()));
            }
        }
        let l11 = LambdaOrbitLabel { k: 0, r: 1, s: 1 };
        assert!(stabilizer_membership(&DMatrix::from_diagonal(&nalgebra::dvector![1.0, -1.0]), &l11, &tol()));
        let l20 = LambdaOrbitLabel { k: 0, r: 2, s: 0 };
        let swap = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(stabilizer_membership(&swap, &l20, &tol()));
        assert!(!stabilizer_membership(&DMatrix::from_diagonal(&nalgebra::dvector![2.0, 1.0]), &l20, &tol()));
    }
}
