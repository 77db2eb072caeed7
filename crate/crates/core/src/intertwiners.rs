//! The kernel operators `𝒫: π_ν^G → π_μ^L` and `𝒬: π_μ^L → π_ν^G`, their
//! parameter dictionaries, the Cauchy–Schwarz majorant integrals that control
//! their boundedness, and two-sided checks of the intertwining relations.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::invariants::kernel_k_complex;
use crate::mc::{self, composite_gauss_legendre, grows_every_round, ComplexEstimate, Estimate, QuadratureRule, QuadratureSpec};
use crate::numerics::{abs_pow, bordered_determinant, SymmetricMatrix, TolerancePolicy};
use crate::principal_series::{
    in_orbit, ln_cauchy_normalizer, ln_det_one_plus_sq, ln_gamma_half, region_p, region_q,
    sample_matrix_cauchy, sample_stiefel, GFunction, LFunction,
};
use crate::symplectic::{fractional_action, SymplecticElement};

/// Gauss–Legendre order per panel for deterministic rules.
const GL_ORDER: usize = 20;

/// Truncations `[−T, T]` of `t = ln r` used by the bound integrals.
pub const BOUND_TRUNCATIONS: [f64; 5] = [4.0, 8.0, 16.0, 32.0, 64.0];

/// Number of standard errors allowed between the two sides of a check.
pub const SIGMA_THRESHOLD: f64 = 3.0;

/// Relative tolerance for checks run with a deterministic rule.
pub const DETERMINISTIC_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Dictionary {
    /// `ν = 2α`, `μ = −2β`.
    P,
    /// `α = −(ν + d)/2`, `β = (μ − n)/2`.
    Q,
}

/// Kernel exponents `(α, β)` tied to `(ν, μ)` by one of the two dictionaries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub alpha: Complex64,
    pub beta: Complex64,
    pub dictionary: Dictionary,
    pub n: usize,
    pub d: usize,
}

impl KernelParams {
    pub fn p_side(nu: Complex64, mu: Complex64, n: usize, d: usize) -> Self {
        Self {
            alpha: nu / 2.0,
            beta: -mu / 2.0,
            dictionary: Dictionary::P,
            n,
            d,
        }
    }

    pub fn q_side(nu: Complex64, mu: Complex64, n: usize, d: usize) -> Self {
        Self {
            alpha: -(nu + d as f64) / 2.0,
            beta: (mu - n as f64) / 2.0,
            dictionary: Dictionary::Q,
            n,
            d,
        }
    }

    pub fn nu(&self) -> Complex64 {
        match self.dictionary {
            Dictionary::P => self.alpha * 2.0,
            Dictionary::Q => -(self.alpha * 2.0) - self.d as f64,
        }
    }

    pub fn mu(&self) -> Complex64 {
        match self.dictionary {
            Dictionary::P => -(self.beta * 2.0),
            Dictionary::Q => self.beta * 2.0 + self.n as f64,
        }
    }
}

/// The open orbit `Ω(p, q)` with the measure `dω = |det z|^{−(n+1)/2} dz`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OrbitIntegrationDomain {
    pub n: usize,
    pub p: usize,
    pub q: usize,
}

impl OrbitIntegrationDomain {
    pub fn new(p: usize, q: usize) -> Result<Self> {
        if p + q == 0 {
            return Err(Error::InvalidInput("orbit domain needs n = p + q >= 1".into()));
        }
        Ok(Self { n: p + q, p, q })
    }
}

/// `d` leading columns of the identity: the reference point of `Ξ_d`.
pub fn reference_frame(n: usize, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |i, j| if i == j { 1.0 } else { 0.0 })
}

fn channels_to_estimates(est: &[Estimate], values: usize) -> Vec<ComplexEstimate> {
    (0..values)
        .map(|k| ComplexEstimate {
            re: est[3 * k],
            im: est[3 * k + 1],
        })
        .collect()
}

/// Integrates `values` complex functions of `z` against `dω` over `Ω(p, q)`.
///
/// `eval(z, out)` fills `out` with the integrands *without* the `dω` density.
/// Monte-Carlo draws `z` from the matrix-Cauchy density; the Gauss–Legendre
/// rule (`n = 1` only) integrates over `±[r_min, r_max]`.
fn integrate_over_orbit<F>(
    domain: &OrbitIntegrationDomain,
    values: usize,
    spec: &QuadratureSpec,
    radial: Option<(f64, f64)>,
    eval: F,
) -> Result<Vec<ComplexEstimate>>
where
    F: Fn(&SymmetricMatrix, &mut [Complex64]) -> Result<()> + Sync,
{
    let n = domain.n;
    let tol = TolerancePolicy::default();
    let half = (n as f64 + 1.0) / 2.0;
    match spec.rule {
        QuadratureRule::GaussLegendre { panels } => {
            if n != 1 {
                return Err(Error::InvalidInput("Gauss–Legendre rule is only available for n = 1".into()));
            }
            let (r_min, r_max) = radial.ok_or_else(|| {
                Error::InvalidInput("Gauss–Legendre rule needs a function with bounded radial support".into())
            })?;
            let sign = if domain.p == 1 { 1.0 } else { -1.0 };
            let mut acc = vec![Complex64::new(0.0, 0.0); values];
            let mut buf = vec![Complex64::new(0.0, 0.0); values];
            for (r, w) in composite_gauss_legendre(r_min.max(0.0), r_max, panels, GL_ORDER) {
                if r <= 0.0 {
                    continue;
                }
                let z = SymmetricMatrix::from_diagonal(&[sign * r]);
                buf.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
                eval(&z, &mut buf)?;
                let density = w * r.powf(-half);
                for (a, b) in acc.iter_mut().zip(&buf) {
                    *a += b * density;
                }
            }
            Ok(acc.iter().map(|v| ComplexEstimate::exact(v.re, v.im)).collect())
        }
        QuadratureRule::MonteCarlo => {
            let ln_z = ln_cauchy_normalizer(n);
            let monitor: Vec<usize> = (0..values).map(|k| 3 * k + 2).collect();
            let out = mc::run(spec, 3 * values, &monitor, |rng, out| {
                let z = sample_matrix_cauchy(n, rng)?;
                if !in_orbit(&z, domain.p, domain.q, &tol)? {
                    return Ok(());
                }
                let mut buf = vec![Complex64::new(0.0, 0.0); values];
                eval(&z, &mut buf)?;
                let ln_weight = ln_z + half * ln_det_one_plus_sq(&z)? - half * z.determinant().abs().ln();
                let weight = ln_weight.exp();
                for (k, v) in buf.iter().enumerate() {
                    let v = v * weight;
                    out[3 * k] = v.re;
                    out[3 * k + 1] = v.im;
                    out[3 * k + 2] = v.norm();
                }
                Ok(())
            })?;
            Ok(channels_to_estimates(&out.channels, values))
        }
    }
}

/// Integrates `values` complex functions of `y` against the probability
/// measure `σ` on the Stiefel manifold. For `n = 1` the measure is the two
/// points `±1` and the result is exact.
fn integrate_over_stiefel<F>(n: usize, d: usize, values: usize, spec: &QuadratureSpec, eval: F) -> Result<Vec<ComplexEstimate>>
where
    F: Fn(&DMatrix<f64>, &mut [Complex64]) -> Result<()> + Sync,
{
    if n == 1 {
        let mut acc = vec![Complex64::new(0.0, 0.0); values];
        let mut buf = vec![Complex64::new(0.0, 0.0); values];
        for s in [1.0, -1.0] {
            buf.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            eval(&DMatrix::from_element(1, 1, s), &mut buf)?;
            for (a, b) in acc.iter_mut().zip(&buf) {
                *a += b * 0.5;
            }
        }
        return Ok(acc.iter().map(|v| ComplexEstimate::exact(v.re, v.im)).collect());
    }
    let monitor: Vec<usize> = (0..values).map(|k| 3 * k + 2).collect();
    let out = mc::run(spec, 3 * values, &monitor, |rng, out| {
        let y = sample_stiefel(n, d, rng);
        let mut buf = vec![Complex64::new(0.0, 0.0); values];
        eval(&y, &mut buf)?;
        for (k, v) in buf.iter().enumerate() {
            out[3 * k] = v.re;
            out[3 * k + 1] = v.im;
            out[3 * k + 2] = v.norm();
        }
        Ok(())
    })?;
    Ok(channels_to_estimates(&out.channels, values))
}

/// `𝒫 f (y) = ∫_{Ω(p,q)} f(z) K^{α,β}(z, y) dω(z)`.
#[derive(Debug, Clone)]
pub struct POperator {
    f: GFunction,
    params: KernelParams,
    domain: OrbitIntegrationDomain,
    spec: QuadratureSpec,
}

pub fn operator_p(
    f: &GFunction,
    params: KernelParams,
    domain: OrbitIntegrationDomain,
    spec: QuadratureSpec,
) -> Result<POperator> {
    if f.n() != domain.n || params.n != domain.n {
        return Err(Error::DimensionMismatch(format!(
            "function on Sym_{}, kernel for n = {}, domain in Sym_{}",
            f.n(),
            params.n,
            domain.n
        )));
    }
    Ok(POperator {
        f: f.clone(),
        params,
        domain,
        spec,
    })
}

impl POperator {
    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    /// Values at several probes, computed from one shared set of samples.
    pub fn evaluate_many(&self, probes: &[DMatrix<f64>]) -> Result<Vec<ComplexEstimate>> {
        for y in probes {
            if y.shape() != (self.params.n, self.params.d) {
                return Err(Error::DimensionMismatch(format!(
                    "probe must be {}x{}, got {:?}",
                    self.params.n,
                    self.params.d,
                    y.shape()
                )));
            }
        }
        let tol = TolerancePolicy::default();
        let (alpha, beta) = (self.params.alpha, self.params.beta);
        integrate_over_orbit(&self.domain, probes.len(), &self.spec, self.f.radial_support(), |z, out| {
            let fz = self.f.evaluate(z)?;
            if fz == Complex64::new(0.0, 0.0) {
                return Ok(());
            }
            for (slot, y) in out.iter_mut().zip(probes) {
                *slot = fz * kernel_k_complex(z, y, alpha, beta, &tol)?;
            }
            Ok(())
        })
    }

    pub fn evaluate(&self, y: &DMatrix<f64>) -> Result<ComplexEstimate> {
        Ok(self.evaluate_many(std::slice::from_ref(y))?[0])
    }
}

/// `𝒬 F (z) = ∫_{S_{n,d}} F(y) K^{α,β}(z, y) dσ(y)` with the `Q` dictionary.
#[derive(Debug, Clone)]
pub struct QOperator {
    f: LFunction,
    params: KernelParams,
    spec: QuadratureSpec,
}

pub fn operator_q(f: &LFunction, nu: Complex64, mu: Complex64, spec: QuadratureSpec) -> Result<QOperator> {
    let (n, d) = (f.n(), f.d());
    if mu.re < n as f64 || nu.re + mu.re > (n - d) as f64 {
        return Err(Error::ConstraintViolation(format!(
            "Q operator needs Re mu >= n and Re(nu + mu) <= n - d, got nu = {nu}, mu = {mu}, n = {n}, d = {d}"
        )));
    }
    if f.mu() != mu {
        return Err(Error::InvalidInput(format!(
            "function has homogeneity mu = {}, operator built for mu = {mu}",
            f.mu()
        )));
    }
    Ok(QOperator {
        f: f.clone(),
        params: KernelParams::q_side(nu, mu, n, d),
        spec,
    })
}

impl QOperator {
    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn evaluate_many(&self, probes: &[SymmetricMatrix]) -> Result<Vec<ComplexEstimate>> {
        if let Some(z) = probes.iter().find(|z| z.n() != self.params.n) {
            return Err(Error::DimensionMismatch(format!(
                "probe in Sym_{}, operator on Sym_{}",
                z.n(),
                self.params.n
            )));
        }
        let tol = TolerancePolicy::default();
        let (alpha, beta) = (self.params.alpha, self.params.beta);
        integrate_over_stiefel(self.params.n, self.params.d, probes.len(), &self.spec, |y, out| {
            let fy = self.f.evaluate(y)?;
            if fy == Complex64::new(0.0, 0.0) {
                return Ok(());
            }
            for (slot, z) in out.iter_mut().zip(probes) {
                *slot = fy * kernel_k_complex(z, y, alpha, beta, &tol)?;
            }
            Ok(())
        })
    }

    pub fn evaluate(&self, z: &SymmetricMatrix) -> Result<ComplexEstimate> {
        Ok(self.evaluate_many(std::slice::from_ref(z))?[0])
    }
}

/// Integer points ordered by `|ν| + |μ|`, then `ν`, then `μ`, within `|ν|, |μ| ≤ radius`.
fn integer_grid(radius: i64) -> Vec<(i64, i64)> {
    let mut pts: Vec<(i64, i64)> = (-radius..=radius)
        .flat_map(|nu| (-radius..=radius).map(move |mu| (nu, mu)))
        .collect();
    pts.sort_by_key(|&(nu, mu)| (nu.abs() + mu.abs(), nu, mu));
    pts
}

/// Smallest integer point of the `P` region with `μ < 0` (so the kernel depends on `y`).
pub fn grid_search_region_p(n: usize, d: usize) -> Option<(f64, f64)> {
    integer_grid(4 * n as i64 + 8)
        .into_iter()
        .find(|&(nu, mu)| mu < 0 && region_p(nu as f64, mu as f64, n, d))
        .map(|(nu, mu)| (nu as f64, mu as f64))
}

/// Smallest integer point of the `Q` region with `μ > n` (so the kernel depends on `y`).
pub fn grid_search_region_q(n: usize, d: usize) -> Option<(f64, f64)> {
    integer_grid(4 * n as i64 + 8)
        .into_iter()
        .find(|&(nu, mu)| mu > n as i64 && region_q(nu as f64, mu as f64, n, d))
        .map(|(nu, mu)| (nu as f64, mu as f64))
}

/// Both sides of an intertwining relation at one probe point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeComparison {
    pub lhs: ComplexEstimate,
    pub rhs: ComplexEstimate,
    /// Estimate of `lhs − rhs` from common random numbers.
    pub diff: ComplexEstimate,
}

impl ProbeComparison {
    pub fn deviation(&self) -> f64 {
        self.diff.abs_mean()
    }

    pub fn relative_deviation(&self) -> f64 {
        let scale = self.lhs.abs_mean().max(self.rhs.abs_mean());
        if scale == 0.0 {
            self.deviation()
        } else {
            self.deviation() / scale
        }
    }

    /// Deviation in units of the standard error of the difference.
    pub fn sigmas(&self) -> f64 {
        let se = self.diff.se();
        if se == 0.0 {
            if self.deviation() == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.deviation() / se
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntertwineReport {
    pub probes: Vec<ProbeComparison>,
    pub deterministic: bool,
    pub passed: bool,
}

impl IntertwineReport {
    fn new(probes: Vec<ProbeComparison>, deterministic: bool) -> Self {
        let passed = probes.iter().all(|c| {
            if deterministic || c.diff.se() == 0.0 {
                c.relative_deviation() <= DETERMINISTIC_TOL
            } else {
                c.deviation() <= SIGMA_THRESHOLD * c.diff.se()
            }
        });
        Self {
            probes,
            deterministic,
            passed,
        }
    }

    pub fn max_relative_deviation(&self) -> f64 {
        self.probes.iter().map(ProbeComparison::relative_deviation).fold(0.0, f64::max)
    }

    pub fn max_sigmas(&self) -> f64 {
        self.probes.iter().map(ProbeComparison::sigmas).fold(0.0, f64::max)
    }
}

fn triples(values: &[ComplexEstimate]) -> Vec<ProbeComparison> {
    values
        .chunks(3)
        .map(|c| ProbeComparison {
            lhs: c[0],
            rhs: c[1],
            diff: c[2],
        })
        .collect()
}

/// Compares `𝒫(π_ν^G(levi h) f)(y)` with `π_μ^L(h)(𝒫 f)(y) = 𝒫 f(h⁻¹ y)`.
pub fn check_intertwine_p(
    h: &DMatrix<f64>,
    nu: f64,
    mu: f64,
    f: &GFunction,
    probes: &[DMatrix<f64>],
    domain: OrbitIntegrationDomain,
    spec: &QuadratureSpec,
) -> Result<IntertwineReport> {
    let (n, d) = (domain.n, probes.first().map_or(0, |y| y.ncols()));
    if probes.is_empty() || d == 0 || d > n {
        return Err(Error::InvalidInput("check needs at least one n x d probe with 1 <= d <= n".into()));
    }
    if !region_p(nu, mu, n, d) {
        return Err(Error::ConstraintViolation(format!(
            "(nu, mu) = ({nu}, {mu}) is outside the P region for n = {n}, d = {d}"
        )));
    }
    let nu_c = Complex64::new(nu, 0.0);
    let params = KernelParams::p_side(nu_c, Complex64::new(mu, 0.0), n, d);
    let levi = SymplecticElement::levi(h)?;
    let moved = crate::principal_series::apply_pi_g(&levi, nu_c, f)?;
    let pulled: Vec<DMatrix<f64>> = probes
        .iter()
        .map(|y| crate::numerics::solve(h, y))
        .collect::<Result<_>>()?;

    if let QuadratureRule::GaussLegendre { .. } = spec.rule {
        let lhs = operator_p(&moved, params, domain, *spec)?.evaluate_many(probes)?;
        let rhs = operator_p(f, params, domain, *spec)?.evaluate_many(&pulled)?;
        let comparisons = lhs
            .iter()
            .zip(&rhs)
            .map(|(l, r)| ProbeComparison {
                lhs: *l,
                rhs: *r,
                diff: ComplexEstimate::exact(l.re.mean - r.re.mean, l.im.mean - r.im.mean),
            })
            .collect();
        return Ok(IntertwineReport::new(comparisons, true));
    }

    let tol = TolerancePolicy::default();
    let (alpha, beta) = (params.alpha, params.beta);
    let values = integrate_over_orbit(&domain, 3 * probes.len(), spec, None, |z, out| {
        let fz = f.evaluate(z)?;
        let mz = moved.evaluate(z)?;
        for (k, (y, yp)) in probes.iter().zip(&pulled).enumerate() {
            let l = if mz == Complex64::new(0.0, 0.0) {
                mz
            } else {
                mz * kernel_k_complex(z, y, alpha, beta, &tol)?
            };
            let r = if fz == Complex64::new(0.0, 0.0) {
                fz
            } else {
                fz * kernel_k_complex(z, yp, alpha, beta, &tol)?
            };
            out[3 * k] = l;
            out[3 * k + 1] = r;
            out[3 * k + 2] = l - r;
        }
        Ok(())
    })?;
    Ok(IntertwineReport::new(triples(&values), false))
}

/// Compares `𝒬(π_μ^L(h) F)(z)` with `π_ν^G(levi h)(𝒬 F)(z)`.
pub fn check_intertwine_q(
    h: &DMatrix<f64>,
    nu: f64,
    mu: f64,
    f: &LFunction,
    probes: &[SymmetricMatrix],
    spec: &QuadratureSpec,
) -> Result<IntertwineReport> {
    let (n, d) = (f.n(), f.d());
    if probes.is_empty() {
        return Err(Error::InvalidInput("check needs at least one probe".into()));
    }
    if !region_q(nu, mu, n, d) {
        return Err(Error::ConstraintViolation(format!(
            "(nu, mu) = ({nu}, {mu}) is outside the Q region for n = {n}, d = {d}"
        )));
    }
    let nu_c = Complex64::new(nu, 0.0);
    let mu_c = Complex64::new(mu, 0.0);
    let op = operator_q(f, nu_c, mu_c, *spec)?;
    let (alpha, beta) = (op.params.alpha, op.params.beta);
    let levi = SymplecticElement::levi(h)?;
    let levi_inv = levi.inverse();
    let tol = TolerancePolicy::default();
    let factor = abs_pow(h.determinant(), -nu_c)
        .ok_or_else(|| Error::InvalidInput("h must be invertible".into()))?;
    let pulled: Vec<SymmetricMatrix> = probes
        .iter()
        .map(|z| fractional_action(&levi_inv, z, &tol))
        .collect::<Result<_>>()?;
    let moved = crate::principal_series::apply_pi_l(h, f)?;
    let values = integrate_over_stiefel(n, d, 3 * probes.len(), spec, |y, out| {
        let fy = f.evaluate(y)?;
        let my = moved.evaluate(y)?;
        for (k, (z, zp)) in probes.iter().zip(&pulled).enumerate() {
            let l = my * kernel_k_complex(z, y, alpha, beta, &tol)?;
            let r = factor * fy * kernel_k_complex(zp, y, alpha, beta, &tol)?;
            out[3 * k] = l;
            out[3 * k + 1] = r;
            out[3 * k + 2] = l - r;
        }
        Ok(())
    })?;
    let deterministic = n == 1;
    Ok(IntertwineReport::new(triples(&values), deterministic))
}

/// Majorant integral estimate with the values at each truncation `[−T, T]` of `ln r`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundEstimate {
    pub value: f64,
    pub se: f64,
    pub truncations: Vec<(f64, f64)>,
}

/// Exponents of `|det z|^a · |det[[z, y], [yᵀ, 0]]|^b · det(1 + z²)^c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MajorantExponents {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl MajorantExponents {
    /// `|det z|^{ν+μ−(n+1)} |bd|^{−μ} det(1+z²)^{−(ν−(n+1)/2)}`.
    pub fn p_side(nu0: f64, mu0: f64, n: usize) -> Self {
        let nf = n as f64;
        Self {
            a: nu0 + mu0 - (nf + 1.0),
            b: -mu0,
            c: -(nu0 - (nf + 1.0) / 2.0),
        }
    }

    /// `|det z|^{−(ν+μ)+n−d} |bd|^{μ−n} det(1+z²)^{ν−(n+1)/2}`.
    pub fn q_side(nu0: f64, mu0: f64, n: usize, d: usize) -> Self {
        let nf = n as f64;
        Self {
            a: -(nu0 + mu0) + nf - d as f64,
            b: mu0 - nf,
            c: nu0 - (nf + 1.0) / 2.0,
        }
    }

    /// Exponent of `r` in `r^{N−1} dr` times the homogeneous factors, plus one:
    /// the integrand behaves like `r^{E−1}` at the origin.
    pub fn radial_exponent_at_zero(&self, n: usize, d: usize) -> f64 {
        let big_n = (n * (n + 1)) as f64 / 2.0;
        big_n + n as f64 * self.a + (n - d) as f64 * self.b
    }
}

/// `ln(1 + eˣ)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Uniform point on the unit sphere of `Sym_n` for the Frobenius norm.
fn sample_unit_symmetric<R: Rng + ?Sized>(n: usize, rng: &mut R) -> SymmetricMatrix {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = rng.sample::<f64, _>(StandardNormal);
        for j in (i + 1)..n {
            let v = rng.sample::<f64, _>(StandardNormal) * std::f64::consts::FRAC_1_SQRT_2;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    let norm = m.norm();
    SymmetricMatrix::symmetrize(m / norm)
}

struct RadialGrid {
    nodes: Vec<(f64, f64)>,
}

impl RadialGrid {
    fn new() -> Self {
        let t_max = BOUND_TRUNCATIONS[BOUND_TRUNCATIONS.len() - 1];
        Self {
            nodes: composite_gauss_legendre(-t_max, t_max, 2 * t_max as usize, 16),
        }
    }

    /// `∫_{−T}^{T} exp(E t + c Σ ln(1 + e^{2t} λᵢ²) + offset) dt` for every truncation.
    fn integrate(&self, e: f64, c: f64, eigen: &[f64], offset: f64, out: &mut [f64]) {
        let ln_sq: Vec<f64> = eigen.iter().map(|l| (l * l).ln()).collect();
        out.iter_mut().for_each(|v| *v = 0.0);
        for &(t, w) in &self.nodes {
            let mut log = e * t + offset;
            for &ls in &ln_sq {
                log += c * softplus(2.0 * t + ls);
            }
            let v = w * log.exp();
            for (slot, &big_t) in out.iter_mut().zip(BOUND_TRUNCATIONS.iter()) {
                if t.abs() <= big_t {
                    *slot += v;
                }
            }
        }
    }
}

/// Polar evaluation of `∫ |det z|^a |bd(z, y₀)|^b det(1+z²)^c dz` over `Ω(p, q)`
/// (or all of `Sym_n`), at the reference frame `y₀`.
///
/// With Frobenius-isometric coordinates `dz = 2^{−n(n−1)/4} r^{N−1} dr dS(Θ)`;
/// the angular average is exact for `n = 1` and Monte-Carlo otherwise, the
/// radial integral is deterministic in `t = ln r`. Divergence is declared
/// when the value grows by more than 1.5× at every doubling of the
/// truncation, or when the angular average shows infinite-mean growth.
pub fn majorant_integral(
    exps: MajorantExponents,
    n: usize,
    d: usize,
    orbit: Option<(usize, usize)>,
    spec: &QuadratureSpec,
) -> Result<BoundEstimate> {
    if n == 0 || d == 0 || d > n {
        return Err(Error::InvalidInput(format!("need 1 <= d <= n, got n = {n}, d = {d}")));
    }
    if let Some((p, q)) = orbit {
        if p + q != n {
            return Err(Error::InvalidInput(format!("orbit ({p},{q}) is not in Sym_{n}")));
        }
    }
    let big_n = n * (n + 1) / 2;
    let e = exps.radial_exponent_at_zero(n, d);
    let ln_const = -((n * (n - 1)) as f64 / 4.0) * 2f64.ln() + 2f64.ln()
        + big_n as f64 / 2.0 * std::f64::consts::PI.ln()
        - ln_gamma_half(big_n);
    let y0 = reference_frame(n, d);
    let grid = RadialGrid::new();
    let tol = TolerancePolicy::default();
    let k = BOUND_TRUNCATIONS.len();

    let angular = |theta: &SymmetricMatrix, out: &mut [f64]| -> Result<()> {
        if let Some((p, q)) = orbit {
            if !in_orbit(theta, p, q, &tol)? {
                return Ok(());
            }
        }
        let eigen = theta.eigenvalues()?;
        let det: f64 = eigen.iter().product();
        let bd = bordered_determinant(theta.as_matrix(), &y0)?;
        let mut offset = ln_const;
        if exps.a != 0.0 {
            offset += exps.a * det.abs().ln();
        }
        if exps.b != 0.0 {
            offset += exps.b * bd.abs().ln();
        }
        grid.integrate(e, exps.c, &eigen, offset, out);
        Ok(())
    };

    let (values, se) = if n == 1 {
        let mut acc = vec![0.0; k];
        let mut buf = vec![0.0; k];
        for s in [1.0, -1.0] {
            buf.iter_mut().for_each(|v| *v = 0.0);
            angular(&SymmetricMatrix::from_diagonal(&[s]), &mut buf)?;
            for (a, b) in acc.iter_mut().zip(&buf) {
                *a += 0.5 * b;
            }
        }
        (acc, 0.0)
    } else {
        let out = mc::run(spec, k, &[k - 1], |rng, out| {
            let theta = sample_unit_symmetric(n, rng);
            angular(&theta, out)
        })?;
        let se = out.channels[k - 1].se;
        (out.channels.iter().map(|c| c.mean).collect::<Vec<_>>(), se)
    };
    if grows_every_round(&values) {
        return Err(Error::DivergenceSuspected { estimates: values });
    }
    Ok(BoundEstimate {
        value: values[k - 1],
        se,
        truncations: BOUND_TRUNCATIONS.iter().copied().zip(values).collect(),
    })
}

/// `∫_{Ω(p,q)} |K|² dω²-majorant` for `𝒫`; `‖𝒫 f‖_L² ≤ value · ‖f‖_G²`.
pub fn bound_estimate_p(
    nu0: f64,
    mu0: f64,
    n: usize,
    d: usize,
    p: usize,
    q: usize,
    spec: &QuadratureSpec,
) -> Result<BoundEstimate> {
    majorant_integral(MajorantExponents::p_side(nu0, mu0, n), n, d, Some((p, q)), spec)
}

/// `∫_{Sym_n} ∫_{S_{n,d}} |K|² det(1+z²)^{ν₀−(n+1)/2}`; `‖𝒬 F‖_G² ≤ value · ‖F‖_L²`.
///
/// The integrand is invariant under `y ↦ o y` for `o ∈ O(n)` after the
/// substitution `z ↦ o z oᵀ`, so the Stiefel average equals its value at `y₀`.
pub fn bound_estimate_q(nu0: f64, mu0: f64, n: usize, d: usize, spec: &QuadratureSpec) -> Result<BoundEstimate> {
    majorant_integral(MajorantExponents::q_side(nu0, mu0, n, d), n, d, None, spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn dictionaries_round_trip() {
        let p = KernelParams::p_side(c(4.0), c(-2.0), 1, 1);
        assert_eq!((p.alpha, p.beta), (c(2.0), c(1.0)));
        assert_eq!((p.nu(), p.mu()), (c(4.0), c(-2.0)));
        let q = KernelParams::q_side(c(-3.0), c(4.0), 2, 1);
        assert_eq!((q.alpha, q.beta), (c(1.0), c(1.0)));
        assert_eq!((q.nu(), q.mu()), (c(-3.0), c(4.0)));
    }

    #[test]
    fn scalar_p_operator_closed_form() {
        let f = GFunction::shell_on_orbit(1, 0, 1.0, 2.0);
        let domain = OrbitIntegrationDomain::new(1, 0).unwrap();
        let op = operator_p(&f, KernelParams::p_side(c(4.0), c(-2.0), 1, 1), domain, QuadratureSpec::gauss_legendre(4)).unwrap();
        for y in [0.5, 1.0, -3.0] {
            let v = op.evaluate(&DMatrix::from_element(1, 1, y)).unwrap();
            assert!((v.re.mean - y * y).abs() < 1e-12 * y * y);
        }
    }

    #[test]
    fn zero_function_maps_to_zero() {
        let domain = OrbitIntegrationDomain::new(1, 1).unwrap();
        let op = operator_p(&GFunction::zero(2), KernelParams::p_side(c(4.0), c(-1.0), 2, 1), domain, QuadratureSpec::monte_carlo(2000, 1)).unwrap();
        let v = op.evaluate(&reference_frame(2, 1)).unwrap();
        assert_eq!(v.abs_mean(), 0.0);
        let op = operator_q(&LFunction::zero(2, 1, c(4.0)), c(-3.0), c(4.0), QuadratureSpec::monte_carlo(2000, 1)).unwrap();
        assert_eq!(op.evaluate(&SymmetricMatrix::identity(2)).unwrap().abs_mean(), 0.0);
    }

    #[test]
    fn q_operator_with_trivial_kernel_is_constant() {
        let f = LFunction::spherical(3, 2, c(3.0));
        let op = operator_q(&f, c(-2.0), c(3.0), QuadratureSpec::monte_carlo(4000, 2)).unwrap();
        let probes = [SymmetricMatrix::identity(3), SymmetricMatrix::i_pq(1, 2).scale(5.0)];
        let v = op.evaluate_many(&probes).unwrap();
        assert_eq!(v[0], v[1]);
        assert!((v[0].re.mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn q_operator_rejects_parameters_outside_continuity_range() {
        let f = LFunction::spherical(2, 1, c(1.0));
        assert!(matches!(
            operator_q(&f, c(0.0), c(1.0), QuadratureSpec::monte_carlo(10, 0)),
            Err(Error::ConstraintViolation(_))
        ));
    }

    #[test]
    fn bound_verdicts_scalar() {
        let spec = QuadratureSpec::monte_carlo(1000, 0);
        assert!(bound_estimate_p(4.0, -2.0, 1, 1, 1, 0, &spec).is_ok());
        assert!(matches!(
            bound_estimate_p(0.5, 0.0, 1, 1, 1, 0, &spec),
            Err(Error::DivergenceSuspected { .. })
        ));
    }

    #[test]
    fn bound_scalar_value() {
        // ν = 4, μ = −2: ∫_0^∞ (1 + z²)^{−3} dz = 3π/16
        let b = bound_estimate_p(4.0, -2.0, 1, 1, 1, 0, &QuadratureSpec::monte_carlo(1, 0)).unwrap();
        assert!((b.value - 3.0 * std::f64::consts::PI / 16.0).abs() < 1e-10, "{b:?}");
    }

    #[test]
    fn softplus_is_stable() {
        assert_eq!(softplus(1000.0), 1000.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!(softplus(-1000.0) >= 0.0);
    }

    #[test]
    fn scalar_p_intertwining_is_exact() {
        let f = GFunction::shell_on_orbit(1, 0, 1.0, 2.0);
        let domain = OrbitIntegrationDomain::new(1, 0).unwrap();
        let probes: Vec<_> = [0.7, 1.0, 2.5].iter().map(|&y| DMatrix::from_element(1, 1, y)).collect();
        for h in [0.5, 1.5, -2.0] {
            let h = DMatrix::from_element(1, 1, h);
            let r = check_intertwine_p(&h, 4.0, -2.0, &f, &probes, domain, &QuadratureSpec::gauss_legendre(8)).unwrap();
            assert!(r.passed && r.deterministic, "{r:?}");
            for (c, y) in r.probes.iter().zip(&probes) {
                let want = (y[0] / h[0]).powi(2);
                assert!((c.rhs.re.mean - want).abs() < 1e-10 * want);
            }
        }
    }

    #[test]
    fn p_check_rejects_points_outside_region() {
        let f = GFunction::gaussian_on_orbit(1, 0);
        let domain = OrbitIntegrationDomain::new(1, 0).unwrap();
        let y = [DMatrix::from_element(1, 1, 1.0)];
        let h = DMatrix::from_element(1, 1, 2.0);
        assert!(matches!(
            check_intertwine_p(&h, 0.5, 0.0, &f, &y, domain, &QuadratureSpec::gauss_legendre(4)),
            Err(Error::ConstraintViolation(_))
        ));
    }

    #[test]
    fn p_intertwining_small_budget() {
        let f = GFunction::gaussian_on_orbit(2, 0);
        let domain = OrbitIntegrationDomain::new(2, 0).unwrap();
        let h = DMatrix::from_row_slice(2, 2, &[1.2, 0.3, -0.4, 0.9]);
        let probes = [reference_frame(2, 1), DMatrix::from_column_slice(2, 1, &[0.6, -0.8])];
        let r = check_intertwine_p(&h, 4.0, -1.0, &f, &probes, domain, &QuadratureSpec::monte_carlo(40_000, 5)).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn q_intertwining_small_budget() {
        let f = LFunction::minor_power(2, 1, c(4.0), 2.0);
        let h = DMatrix::from_row_slice(2, 2, &[1.1, -0.2, 0.5, 0.8]);
        let probes = [SymmetricMatrix::identity(2), SymmetricMatrix::i_pq(1, 1).scale(0.5)];
        let r = check_intertwine_q(&h, -3.0, 4.0, &f, &probes, &QuadratureSpec::monte_carlo(40_000, 6)).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(!r.deterministic);
    }

    #[test]
    fn p_operator_homogeneity() {
        // 𝒫f(t y) = |t|^{2βd} 𝒫f(y)
        let f = GFunction::gaussian_on_orbit(1, 1);
        let domain = OrbitIntegrationDomain::new(1, 1).unwrap();
        let op = operator_p(&f, KernelParams::p_side(c(4.0), c(-1.0), 2, 1), domain, QuadratureSpec::monte_carlo(4000, 3)).unwrap();
        let y = DMatrix::from_column_slice(2, 1, &[0.3, 0.9]);
        let v = op.evaluate_many(&[y.clone(), &y * 2.0]).unwrap();
        assert!((v[1].re.mean - 2.0 * v[0].re.mean).abs() < 1e-10 * v[0].re.mean.abs());
    }

    #[test]
    fn bound_verdicts_rank_two() {
        let spec = QuadratureSpec::monte_carlo(20_000, 4);
        let b = bound_estimate_q(-3.0, 4.0, 2, 1, &spec).unwrap();
        assert!(b.value.is_finite() && b.value > 0.0);
        assert!(matches!(
            bound_estimate_q(3.0, 2.0, 2, 1, &spec),
            Err(Error::DivergenceSuspected { .. })
        ));
        assert!(bound_estimate_p(4.0, -1.0, 2, 1, 2, 0, &spec).is_ok());
    }

    #[test]
    fn grid_search_points() {
        assert_eq!(grid_search_region_p(1, 1), Some((3.0, -1.0)));
        assert_eq!(grid_search_region_p(2, 1), Some((4.0, -1.0)));
        let (nu, mu) = grid_search_region_q(2, 1).unwrap();
        assert!(region_q(nu, mu, 2, 1));
    }
}
