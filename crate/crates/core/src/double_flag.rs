//! `L`-orbits on the double flag variety, classified in the open Bruhat
//! stratum by the pair `(sig z, sig yᵀ z⁻¹ y)`.

use std::fmt;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    orthonormalize_columns, rank, signature, signature_scaled, solve, spectral_norm, SymmetricMatrix, TolerancePolicy,
};
use crate::random::well_conditioned_gl;

/// A point `(z, y)` of `Sym_n × M_{n,d}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairPoint {
    pub z: SymmetricMatrix,
    pub y: DMatrix<f64>,
}

impl PairPoint {
    pub fn new(z: SymmetricMatrix, y: DMatrix<f64>) -> Result<Self> {
        if y.nrows() != z.n() || y.ncols() == 0 || y.ncols() > z.n() {
            return Err(Error::DimensionMismatch(format!(
                "y must be n x d with 1 <= d <= n = {}, got {:?}",
                z.n(),
                y.shape()
            )));
        }
        Ok(Self { z, y })
    }

    pub fn n(&self) -> usize {
        self.z.n()
    }

    pub fn d(&self) -> usize {
        self.y.ncols()
    }

    /// `(h, m) · (z, y) = (h z hᵀ, h y mᵀ)`.
    pub fn act(&self, h: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<Self> {
        if m.shape() != (self.d(), self.d()) {
            return Err(Error::DimensionMismatch(format!("m must be d x d, got {:?}", m.shape())));
        }
        let z = self.z.congruence(h)?;
        Ok(Self {
            z,
            y: h * &self.y * m.transpose(),
        })
    }
}

/// Label `(p, q; s, t)` plus the nullity `kdef` of the restricted form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DoubleOrbitLabel {
    pub p: usize,
    pub q: usize,
    pub s: usize,
    pub t: usize,
    pub kdef: usize,
}

impl DoubleOrbitLabel {
    pub fn n(&self) -> usize {
        self.p + self.q
    }

    pub fn d(&self) -> usize {
        self.s + self.t + self.kdef
    }

    /// The degenerate-orbit inequalities `t + p ≥ d`, `s + q ≥ d`, `s + t ≤ d`.
    pub fn satisfies_constraints(&self) -> bool {
        let d = self.d();
        self.t + self.p >= d && self.s + self.q >= d && self.s + self.t <= d
    }
}

impl fmt::Display for DoubleOrbitLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.kdef == 0 {
            write!(f, "({},{};{},{})", self.p, self.q, self.s, self.t)
        } else {
            write!(f, "({},{};{},{},{})", self.p, self.q, self.s, self.t, self.kdef)
        }
    }
}

pub fn is_open(label: &DoubleOrbitLabel) -> bool {
    label.kdef == 0
}

pub fn classify_pair(pt: &PairPoint, tol: &TolerancePolicy) -> Result<DoubleOrbitLabel> {
    let d = pt.d();
    let y_rank = rank(&pt.y, tol);
    if y_rank < d {
        return Err(Error::RankDeficientY { rank: y_rank, d });
    }
    let z_sig = signature(&pt.z, tol)?;
    let det = pt.z.determinant();
    let row_product: f64 = pt.z.as_matrix().row_iter().map(|r| r.norm()).product();
    let threshold = tol.rel_eps * row_product;
    if z_sig.zero > 0 || !(det.abs() > threshold) {
        return Err(Error::SingularZ { det, threshold });
    }
    // The label depends only on span(y); an orthonormal basis keeps the
    // conditioning of y out of the form.
    let basis = orthonormalize_columns(&pt.y);
    let w = solve(pt.z.as_matrix(), &basis)?;
    let form = SymmetricMatrix::symmetrize(basis.transpose() * &w);
    let scale = spectral_norm(&w);
    let sig = signature_scaled(&form, tol, scale)?;
    let label = DoubleOrbitLabel {
        p: z_sig.pos,
        q: z_sig.neg,
        s: sig.pos,
        t: sig.neg,
        kdef: sig.zero,
    };
    if !label.satisfies_constraints() {
        return Err(Error::Numerical(format!(
            "classified label {label} violates the orbit inequalities (ill-conditioned input)"
        )));
    }
    Ok(label)
}

/// All open orbits: `p + q = n`, `s + t = d`, `s ≤ p`, `t ≤ q`, ordered by `p` then `s`.
pub fn enumerate_open_orbits(n: usize, d: usize) -> Result<Vec<DoubleOrbitLabel>> {
    if d == 0 || d > n {
        return Err(Error::InvalidInput(format!("need 1 <= d <= n, got n = {n}, d = {d}")));
    }
    let mut out = Vec::new();
    for p in 0..=n {
        let q = n - p;
        for s in 0..=d.min(p) {
            let t = d - s;
            if t <= q {
                out.push(DoubleOrbitLabel { p, q, s, t, kdef: 0 });
            }
        }
    }
    Ok(out)
}

/// `z = I_{p,q}`; `y` selects `e_1..e_s` and `e_{p+1}..e_{p+t}`.
pub fn representative_pair(label: &DoubleOrbitLabel) -> Result<PairPoint> {
    let DoubleOrbitLabel { p, q, s, t, kdef } = *label;
    if kdef != 0 || s > p || t > q || s + t == 0 {
        return Err(Error::ConstraintViolation(format!(
            "no canonical representative for {label}: need kdef = 0, s <= p, t <= q, d >= 1"
        )));
    }
    let n = p + q;
    let d = s + t;
    let mut y = DMatrix::zeros(n, d);
    for j in 0..s {
        y[(j, j)] = 1.0;
    }
    for j in 0..t {
        y[(p + j, s + j)] = 1.0;
    }
    PairPoint::new(SymmetricMatrix::i_pq(p, q), y)
}

/// Outcome of an invariance sweep; `failures` holds printable counterexamples.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InvarianceReport {
    pub trials: usize,
    pub failures: Vec<String>,
}

impl InvarianceReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Applies random `(h, m) ∈ GL_n × GL_d` to the representative of `label` and
/// checks the classification does not move.
pub fn orbit_invariance_check<R: Rng + ?Sized>(
    label: &DoubleOrbitLabel,
    trials: usize,
    tol: &TolerancePolicy,
    rng: &mut R,
) -> Result<InvarianceReport> {
    let rep = representative_pair(label)?;
    let (n, d) = (rep.n(), rep.d());
    let mut report = InvarianceReport {
        trials,
        failures: Vec::new(),
    };
    for trial in 0..trials {
        let h = well_conditioned_gl(n, 10.0, rng);
        let m = well_conditioned_gl(d, 10.0, rng);
        let moved = rep.act(&h, &m)?;
        match classify_pair(&moved, tol) {
            Ok(got) if got == *label => {}
            Ok(got) => report
                .failures
                .push(format!("trial {trial}: {label} moved to {got} under h = {h:?}, m = {m:?}")),
            Err(e) => report.failures.push(format!("trial {trial}: {label} failed to classify: {e}")),
        }
    }
    Ok(report)
}
