//! Degenerate principal series of `G = Sp(2n, R)` (noncompact picture on
//! `Sym_n`) and of `L = GL_n` (functions on rank-`d` frames), their actions,
//! characters, Hilbert norms, and the convergence regions of the kernel
//! operators.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc::{self, Estimate, QuadratureSpec};
use crate::numerics::{abs_pow, orthonormalize_columns, signature, singular_values, solve, SymmetricMatrix, TolerancePolicy};
use crate::random::{gaussian_matrix, haar_unitary};
use crate::symplectic::{fractional_action, SiegelParabolicElement, SymplecticElement};

/// `(ν, μ)`; `ν₀`, `μ₀` are the real parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamPair {
    pub nu: Complex64,
    pub mu: Complex64,
}

impl ParamPair {
    pub fn real(nu: f64, mu: f64) -> Self {
        Self {
            nu: Complex64::new(nu, 0.0),
            mu: Complex64::new(mu, 0.0),
        }
    }

    pub fn nu0(&self) -> f64 {
        self.nu.re
    }

    pub fn mu0(&self) -> f64 {
        self.mu.re
    }
}

/// `χ_{P_S}(p) = |det x|^ν`.
pub fn chi_ps(p: &SiegelParabolicElement, nu: Complex64) -> Complex64 {
    abs_pow(p.x().determinant(), nu).expect("Levi block is invertible")
}

/// `χ_Q(k) = |det k|^μ` for the `d x d` block.
pub fn chi_q(k: &DMatrix<f64>, mu: Complex64) -> Result<Complex64> {
    abs_pow(k.determinant(), mu).ok_or_else(|| Error::InvalidInput("χ_Q evaluated on a singular block".into()))
}

/// Declared support of a function on `Sym_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Support {
    All,
    Orbit { p: usize, q: usize },
}

impl fmt::Display for Support {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Support::All => write!(f, "Sym_n"),
            Support::Orbit { p, q } => write!(f, "Omega({p},{q})"),
        }
    }
}

/// Whether `z` lies in the open orbit `Ω(p, q)`.
pub fn in_orbit(z: &SymmetricMatrix, p: usize, q: usize, tol: &TolerancePolicy) -> Result<bool> {
    let sig = signature(z, tol)?;
    Ok(sig.zero == 0 && sig.pos == p && sig.neg == q)
}

type GEval = dyn Fn(&SymmetricMatrix) -> Result<Complex64> + Send + Sync;
type LEval = dyn Fn(&DMatrix<f64>) -> Result<Complex64> + Send + Sync;

/// Function on `Sym_n(R)` with a declared support and, optionally, a
/// Frobenius-norm shell `[r_min, r_max]` outside of which it vanishes.
#[derive(Clone)]
pub struct GFunction {
    n: usize,
    support: Support,
    radial: Option<(f64, f64)>,
    eval: Arc<GEval>,
}

impl fmt::Debug for GFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GFunction")
            .field("n", &self.n)
            .field("support", &self.support)
            .field("radial", &self.radial)
            .finish_non_exhaustive()
    }
}

impl GFunction {
    pub fn new<F>(n: usize, support: Support, eval: F) -> Self
    where
        F: Fn(&SymmetricMatrix) -> Result<Complex64> + Send + Sync + 'static,
    {
        Self {
            n,
            support,
            radial: None,
            eval: Arc::new(eval),
        }
    }

    pub fn with_radial_support(mut self, r_min: f64, r_max: f64) -> Self {
        self.radial = Some((r_min, r_max));
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn support(&self) -> Support {
        self.support
    }

    pub fn radial_support(&self) -> Option<(f64, f64)> {
        self.radial
    }

    pub fn evaluate(&self, z: &SymmetricMatrix) -> Result<Complex64> {
        if z.n() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "function on Sym_{} evaluated at a {}x{} matrix",
                self.n,
                z.n(),
                z.n()
            )));
        }
        (self.eval)(z)
    }

    pub fn zero(n: usize) -> Self {
        Self::new(n, Support::All, |_| Ok(Complex64::new(0.0, 0.0)))
    }

    pub fn constant(n: usize, c: Complex64) -> Self {
        Self::new(n, Support::All, move |_| Ok(c))
    }

    /// `exp(−tr z²)` on `Ω(p, q)`, zero elsewhere.
    pub fn gaussian_on_orbit(p: usize, q: usize) -> Self {
        let tol = TolerancePolicy::default();
        Self::new(p + q, Support::Orbit { p, q }, move |z| {
            if !in_orbit(z, p, q, &tol)? {
                return Ok(Complex64::new(0.0, 0.0));
            }
            let tr = z.as_matrix().iter().map(|v| v * v).sum::<f64>();
            Ok(Complex64::new((-tr).exp(), 0.0))
        })
    }

    /// Indicator of `r_min ≤ ‖z‖_F ≤ r_max` on `Ω(p, q)`; for `n = 1, p = 1`
    /// this is the indicator of `[r_min, r_max]`.
    pub fn shell_on_orbit(p: usize, q: usize, r_min: f64, r_max: f64) -> Self {
        let tol = TolerancePolicy::default();
        Self::new(p + q, Support::Orbit { p, q }, move |z| {
            let r = z.frobenius_norm();
            let inside = r >= r_min && r <= r_max && in_orbit(z, p, q, &tol)?;
            Ok(Complex64::new(if inside { 1.0 } else { 0.0 }, 0.0))
        })
        .with_radial_support(r_min, r_max)
    }
}

/// Function on rank-`d` frames, homogeneous of degree `−μ`:
/// `F(y k) = |det k|^{−μ} F(y)`.
#[derive(Clone)]
pub struct LFunction {
    n: usize,
    d: usize,
    mu: Complex64,
    eval: Arc<LEval>,
}

impl fmt::Debug for LFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LFunction")
            .field("n", &self.n)
            .field("d", &self.d)
            .field("mu", &self.mu)
            .finish_non_exhaustive()
    }
}

impl LFunction {
    pub fn new<F>(n: usize, d: usize, mu: Complex64, eval: F) -> Self
    where
        F: Fn(&DMatrix<f64>) -> Result<Complex64> + Send + Sync + 'static,
    {
        Self {
            n,
            d,
            mu,
            eval: Arc::new(eval),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn mu(&self) -> Complex64 {
        self.mu
    }

    pub fn evaluate(&self, y: &DMatrix<f64>) -> Result<Complex64> {
        if y.shape() != (self.n, self.d) {
            return Err(Error::DimensionMismatch(format!(
                "function on {}x{} frames evaluated at {:?}",
                self.n,
                self.d,
                y.shape()
            )));
        }
        (self.eval)(y)
    }

    pub fn zero(n: usize, d: usize, mu: Complex64) -> Self {
        Self::new(n, d, mu, |_| Ok(Complex64::new(0.0, 0.0)))
    }

    /// The `O(n)`-invariant vector `|det yᵀy|^{−μ/2}`, equal to 1 on the Stiefel manifold.
    pub fn spherical(n: usize, d: usize, mu: Complex64) -> Self {
        Self::new(n, d, mu, move |y| {
            let g = (y.transpose() * y).determinant();
            abs_pow(g, -mu / 2.0).ok_or(Error::RankDeficientY { rank: 0, d })
        })
    }

    /// `|det y_top|^m · |det yᵀy|^{−(μ+m)/2}` where `y_top` is the top `d x d` block.
    pub fn minor_power(n: usize, d: usize, mu: Complex64, m: f64) -> Self {
        Self::new(n, d, mu, move |y| {
            let top = y.rows(0, d).determinant();
            let g = (y.transpose() * y).determinant();
            let tail = abs_pow(g, -(mu + m) / 2.0).ok_or(Error::RankDeficientY { rank: 0, d })?;
            Ok(Complex64::new(top.abs().powf(m), 0.0) * tail)
        })
    }

    /// Pointwise `a·F + b·G` (same `n`, `d`, `μ`).
    pub fn linear_combination(a: Complex64, f: &LFunction, b: Complex64, g: &LFunction) -> Result<Self> {
        if (f.n, f.d) != (g.n, g.d) || f.mu != g.mu {
            return Err(Error::DimensionMismatch("combining functions from different spaces".into()));
        }
        let (f, g) = (f.clone(), g.clone());
        Ok(Self::new(f.n, f.d, f.mu, move |y| Ok(a * f.evaluate(y)? + b * g.evaluate(y)?)))
    }
}

/// Checks `F(y k) = |det k|^{−μ} F(y)` at random probes; returns the largest relative deviation.
pub fn homogeneity_deviation<R: Rng + ?Sized>(f: &LFunction, probes: usize, rng: &mut R) -> Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..probes {
        let y = gaussian_matrix(f.n, f.d, rng);
        let k = crate::random::well_conditioned_gl(f.d, 10.0, rng);
        let lhs = f.evaluate(&(&y * &k))?;
        let rhs = chi_q(&k, -f.mu)? * f.evaluate(&y)?;
        let scale = lhs.norm().max(rhs.norm()).max(f64::MIN_POSITIVE);
        worst = worst.max((lhs - rhs).norm() / scale);
    }
    Ok(worst)
}

/// `π_ν^G(g) f (z) = |det(a + z c)|^{−ν} f(g⁻¹ · z)`.
pub fn apply_pi_g(g: &SymplecticElement, nu: Complex64, f: &GFunction) -> Result<GFunction> {
    if g.n() != f.n {
        return Err(Error::DimensionMismatch(format!(
            "Sp({}) acting on functions on Sym_{}",
            2 * g.n(),
            f.n
        )));
    }
    let a = g.a();
    let c = g.c();
    let g_inv = g.inverse();
    let inner = f.clone();
    let tol = TolerancePolicy::default();
    let levi = g.is_levi();
    let eval = move |z: &SymmetricMatrix| -> Result<Complex64> {
        let m = &a + z.as_matrix() * &c;
        let det = m.determinant();
        let factor = abs_pow(det, -nu).ok_or(Error::SingularDenominator { det, threshold: 0.0 })?;
        let w = fractional_action(&g_inv, z, &tol)?;
        Ok(factor * inner.evaluate(&w)?)
    };
    let mut out = GFunction::new(f.n, if levi { f.support } else { Support::All }, eval);
    if levi {
        if let Some((r_min, r_max)) = f.radial {
            let sv = singular_values(&g.a());
            let s_max = sv.iter().fold(0.0f64, |m, v| m.max(*v));
            let s_min = sv.iter().fold(f64::INFINITY, |m, v| m.min(*v));
            out.radial = Some((r_min * s_min * s_min, r_max * s_max * s_max));
        }
    }
    Ok(out)
}

/// `π_μ^L(a) F (y) = F(a⁻¹ y)`.
pub fn apply_pi_l(a: &DMatrix<f64>, f: &LFunction) -> Result<LFunction> {
    if a.shape() != (f.n, f.n) {
        return Err(Error::DimensionMismatch(format!("a must be {n}x{n}, got {:?}", a.shape(), n = f.n)));
    }
    crate::numerics::inverse(a)?;
    let a = a.clone();
    let inner = f.clone();
    Ok(LFunction::new(f.n, f.d, f.mu, move |y| inner.evaluate(&solve(&a, y)?)))
}

/// `ln Γ(k/2)` for a positive integer `k`, by the recursion `Γ(x + 1) = x Γ(x)`.
pub fn ln_gamma_half(k: usize) -> f64 {
    assert!(k > 0, "Γ(0) is a pole");
    let mut x = if k.is_multiple_of(2) { 1.0 } else { 0.5 };
    let mut acc = if k.is_multiple_of(2) { 0.0 } else { 0.5 * std::f64::consts::PI.ln() };
    while 2.0 * x < k as f64 {
        acc += x.ln();
        x += 1.0;
    }
    acc
}

/// `ln Z_n` where `Z_n = ∫_{Sym_n} det(1 + z²)^{−(n+1)/2} dz`.
pub fn ln_cauchy_normalizer(n: usize) -> f64 {
    let nf = n as f64;
    let ln_pi = std::f64::consts::PI.ln();
    let ln_fact: f64 = (1..=n).map(|j| (j as f64).ln()).sum();
    let gammas: f64 = (1..=n).map(ln_gamma_half).sum();
    nf * (nf + 1.0) / 4.0 * ln_pi - ln_fact - gammas + nf * ln_pi - nf * (nf - 1.0) / 2.0 * 2f64.ln()
        + ln_gamma_half(n + 2)
        - nf * ln_gamma_half(3)
}

/// Draw from the density `det(1 + z²)^{−(n+1)/2} / Z_n` on `Sym_n`:
/// `z = Im(U) Re(U)⁻¹` with `U` Haar unitary.
pub fn sample_matrix_cauchy<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<SymmetricMatrix> {
    let u = haar_unitary(n, rng);
    let re = u.map(|c| c.re);
    let im = u.map(|c| c.im);
    // z = Y X⁻¹  ⇔  Xᵀ zᵀ = Yᵀ
    let zt = solve(&re.transpose(), &im.transpose())?;
    Ok(SymmetricMatrix::symmetrize(zt.transpose()))
}

/// `ln det(1 + z²)`.
pub fn ln_det_one_plus_sq(z: &SymmetricMatrix) -> Result<f64> {
    Ok(z.eigenvalues()?.iter().map(|l| (l * l).ln_1p()).sum())
}

/// Estimate of `‖f‖² = ∫ |f(z)|² det(1 + z²)^{ν₀ − (n+1)/2} dz` by importance
/// sampling from the matrix-Cauchy density.
pub fn norm_g(f: &GFunction, nu0: f64, spec: &QuadratureSpec) -> Result<Estimate> {
    let n = f.n;
    let ln_z = ln_cauchy_normalizer(n);
    let out = mc::run(spec, 1, &[0], |rng, buf| {
        let z = sample_matrix_cauchy(n, rng)?;
        let v = f.evaluate(&z)?.norm_sqr();
        buf[0] = if v == 0.0 {
            0.0
        } else {
            v * (ln_z + nu0 * ln_det_one_plus_sq(&z)?).exp()
        };
        Ok(())
    })?;
    Ok(out.channels[0])
}

/// Orthogonally invariant draw from the Stiefel manifold `S_{n,d}`.
pub fn sample_stiefel<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> DMatrix<f64> {
    orthonormalize_columns(&gaussian_matrix(n, d, rng))
}

/// Estimate of `‖F‖² = ∫_{S_{n,d}} |F|² dσ` with `σ` a probability measure.
pub fn norm_l(f: &LFunction, spec: &QuadratureSpec) -> Result<Estimate> {
    let (n, d) = (f.n, f.d);
    let out = mc::run(spec, 1, &[], |rng, buf| {
        buf[0] = f.evaluate(&sample_stiefel(n, d, rng))?.norm_sqr();
        Ok(())
    })?;
    Ok(out.channels[0])
}

/// The four inequalities of a convergence region with their margins
/// (positive margin = satisfied with room).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionReport {
    pub names: [&'static str; 4],
    pub margins: [f64; 4],
    pub strict: [bool; 4],
}

impl RegionReport {
    pub fn satisfied(&self, i: usize) -> bool {
        if self.strict[i] {
            self.margins[i] > 0.0
        } else {
            self.margins[i] >= 0.0
        }
    }

    pub fn holds(&self) -> bool {
        (0..4).all(|i| self.satisfied(i))
    }
}

fn half_dim(n: usize) -> f64 {
    (n * (n + 1)) as f64 / 2.0
}

/// Region where `𝒫` is bounded: `nν₀ ± dμ₀ > n(n+1)/2`, `ν₀ + μ₀ ≥ n + 1`, `μ₀ ≤ 0`.
pub fn region_p_report(nu0: f64, mu0: f64, n: usize, d: usize) -> RegionReport {
    let (nf, df) = (n as f64, d as f64);
    RegionReport {
        names: ["n*nu + d*mu > n(n+1)/2", "n*nu - d*mu > n(n+1)/2", "nu + mu >= n + 1", "mu <= 0"],
        margins: [
            nf * nu0 + df * mu0 - half_dim(n),
            nf * nu0 - df * mu0 - half_dim(n),
            nu0 + mu0 - (nf + 1.0),
            -mu0,
        ],
        strict: [true, true, false, false],
    }
}

/// Region where `𝒬` is bounded: `nν₀ ± dμ₀ < n(n+1)/2`, `ν₀ + μ₀ ≤ n − d`, `μ₀ ≥ n`.
pub fn region_q_report(nu0: f64, mu0: f64, n: usize, d: usize) -> RegionReport {
    let (nf, df) = (n as f64, d as f64);
    RegionReport {
        names: ["n*nu + d*mu < n(n+1)/2", "n*nu - d*mu < n(n+1)/2", "nu + mu <= n - d", "mu >= n"],
        margins: [
            half_dim(n) - (nf * nu0 + df * mu0),
            half_dim(n) - (nf * nu0 - df * mu0),
            (nf - df) - (nu0 + mu0),
            mu0 - nf,
        ],
        strict: [true, true, false, false],
    }
}

pub fn region_p(nu0: f64, mu0: f64, n: usize, d: usize) -> bool {
    region_p_report(nu0, mu0, n, d).holds()
}

pub fn region_q(nu0: f64, mu0: f64, n: usize, d: usize) -> bool {
    let report = region_q_report(nu0, mu0, n, d);
    // the two spherical inequalities force the two radial ones
    debug_assert!(
        !(report.satisfied(2) && report.satisfied(3)) || (report.satisfied(0) && report.satisfied(1)),
        "spherical Q inequalities hold without the radial ones at ({nu0}, {mu0}, {n}, {d})"
    );
    report.holds()
}
