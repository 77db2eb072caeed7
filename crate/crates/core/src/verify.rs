//! Property-verification suites. Every suite is a pure function of its
//! configuration, so the rendered report is byte-identical across runs and
//! worker counts.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::double_flag::{classify_pair, enumerate_open_orbits, orbit_invariance_check, representative_pair, PairPoint};
use crate::error::{Error, Result};
use crate::intertwiners::{
    bound_estimate_p, bound_estimate_q, check_intertwine_p, check_intertwine_q, grid_search_region_p, operator_q,
    IntertwineReport, MajorantExponents, OrbitIntegrationDomain,
};
use crate::invariants::{
    kernel_k, minor_expansion, pochhammer_general, pochhammer_vanishes, psi1, psi2, psi2_product, CharacterPair,
    MultiIndex,
};
use crate::lagrangian::{
    act, enumerate_orbit_labels, l_action_on_cell, orbit_invariant, representative_frame, CellPoint,
};
use crate::mc::QuadratureSpec;
use crate::numerics::{bordered_determinant, inverse, max_abs, signature, SymmetricMatrix, TolerancePolicy};
use crate::principal_series::{region_p, region_q, sample_stiefel, GFunction, LFunction};
use crate::random::{gaussian_matrix, orthogonal, stream_rng, symmetric, symmetric_with_signature, symplectic, well_conditioned_gl};
use crate::symplectic::{
    fractional_action, is_in_k, is_symplectic, iwasawa_vz, sp_inverse, weyl_rep, SiegelParabolicElement,
    SymplecticElement,
};

pub const SUITES: [&str; 10] = [
    "symplectic-identities",
    "iwasawa",
    "orbit-census",
    "cell-action",
    "double-flag",
    "determinant-identities",
    "pochhammer",
    "intertwine-P",
    "intertwine-Q",
    "convergence-region",
];

/// Counterexamples kept per failing check.
const MAX_DUMP: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyConfig {
    pub seed: u64,
    pub budget: u64,
    pub workers: usize,
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub tol: TolerancePolicy,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            budget: 100_000,
            workers: 1,
            n: None,
            d: None,
            tol: TolerancePolicy::default(),
        }
    }
}

impl VerifyConfig {
    fn rng(&self, stream: u64) -> ChaCha8Rng {
        stream_rng(self.seed, stream)
    }

    fn mc(&self, stream: u64) -> QuadratureSpec {
        QuadratureSpec::monte_carlo(self.budget, self.seed.wrapping_add(stream)).with_workers(self.workers)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub detail: String,
    pub failures: Vec<String>,
    pub failure_count: usize,
}

impl CheckResult {
    fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            detail: String::new(),
            failures: Vec::new(),
            failure_count: 0,
        }
    }

    fn fail(&mut self, msg: impl Into<String>) {
        self.failure_count += 1;
        if self.failures.len() < MAX_DUMP {
            self.failures.push(msg.into());
        }
    }

    fn expect(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            self.fail(msg());
        }
    }

    fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    pub fn passed(&self) -> bool {
        self.failure_count == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<CheckResult>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn render(&self, cfg: &VerifyConfig) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "suite {} seed={} budget={}", self.suite, cfg.seed, cfg.budget);
        for c in &self.checks {
            let status = if c.passed() { "PASS" } else { "FAIL" };
            if c.detail.is_empty() {
                let _ = writeln!(out, "  {status} {}", c.name);
            } else {
                let _ = writeln!(out, "  {status} {}: {}", c.name, c.detail);
            }
            if !c.passed() {
                let _ = writeln!(out, "    {} failure(s)", c.failure_count);
                for f in &c.failures {
                    let _ = writeln!(out, "    counterexample: {f}");
                }
            }
        }
        let ok = self.checks.iter().filter(|c| c.passed()).count();
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        let _ = writeln!(out, "result: {verdict} ({ok}/{} checks)", self.checks.len());
        out
    }
}

pub fn run_suite(name: &str, cfg: &VerifyConfig) -> Result<SuiteReport> {
    let checks = match name {
        "symplectic-identities" => symplectic_identities(cfg)?,
        "iwasawa" => iwasawa(cfg)?,
        "orbit-census" => orbit_census(cfg)?,
        "cell-action" => cell_action(cfg)?,
        "double-flag" => double_flag(cfg)?,
        "determinant-identities" => determinant_identities(cfg)?,
        "pochhammer" => pochhammer(cfg)?,
        "intertwine-P" => intertwine_p(cfg)?,
        "intertwine-Q" => intertwine_q(cfg)?,
        "convergence-region" => convergence_region(cfg)?,
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown suite '{other}'; known suites: {}",
                SUITES.join(", ")
            )))
        }
    };
    Ok(SuiteReport {
        suite: name.to_string(),
        checks,
    })
}

fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    max_abs(&(a - b)) / max_abs(a).max(max_abs(b)).max(1.0)
}

fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn random_siegel<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<SiegelParabolicElement> {
    let x = well_conditioned_gl(n, 4.0, rng);
    SiegelParabolicElement::from_levi_and_translation(x, &symmetric(n, rng).scale(0.5))
}

/// Symmetric matrix with eigenvalues of modulus in `[1/2, 2]` and signature `(p, q)`.
fn conditioned_symmetric<R: Rng + ?Sized>(p: usize, q: usize, rng: &mut R) -> SymmetricMatrix {
    let n = p + q;
    let o = orthogonal(n, rng);
    let diag: Vec<f64> = (0..n)
        .map(|i| {
            let v = rng.random_range(0.5..2.0);
            if i < p {
                v
            } else {
                -v
            }
        })
        .collect();
    SymmetricMatrix::symmetrize(&o * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag)) * o.transpose())
}

fn symplectic_identities(cfg: &VerifyConfig) -> Result<Vec<CheckResult>> {
    let tol = cfg.tol;
    let mut rng = cfg.rng(1);
    let mut agree = CheckResult::new("block test agrees with Gram test on 500 elements, n <= 4");
    let mut inv = CheckResult::new("sp_inverse residual below 1e-10");
    let mut conj = CheckResult::new("conjugate_parabolic matches triple product to 1e-10");
    let mut invol = CheckResult::new("sp_inverse is an involution to 1e-12");
    let (mut worst_inv, mut worst_conj) = (0.0f64, 0.0f64);
    for i in 0..500 {
        let n = 1 + i % 4;
        let g = symplectic(n, 4, &mut rng);
        match is_symplectic(g.matrix(), &tol) {
            Ok(true) => {}
            other => agree.fail(format!("element {i} (n = {n}): {other:?}")),
        }
        let bent = g.matrix() * (1.0 + 1e-3);
        match is_symplectic(&bent, &tol) {
            Ok(false) => {}
            other => agree.fail(format!("perturbed element {i} (n = {n}): {other:?}")),
        }
        let gi = sp_inverse(&g);
        let r = max_abs(&(g.matrix() * gi.matrix() - DMatrix::identity(2 * n, 2 * n)));
        worst_inv = worst_inv.max(r);
        inv.expect(r < 1e-10, || format!("element {i}: residual {r:.3e}"));
        let back = sp_inverse(&gi);
        let r2 = max_abs(&(back.matrix() - g.matrix()));
        invol.expect(r2 < 1e-12, || format!("element {i}: residual {r2:.3e}"));
        let p = random_siegel(n, &mut rng)?;
        let closed = crate::symplectic::conjugate_parabolic(&g, &p);
        let triple = gi.matrix() * p.to_symplectic().matrix() * g.matrix();
        let e = rel_diff(closed.matrix(), &triple);
        worst_conj = worst_conj.max(e);
        conj.expect(e < 1e-10, || format!("element {i}: relative deviation {e:.3e}"));
    }
    let inv = inv.with_detail(format!("max {worst_inv:.1e}"));
    let conj = conj.with_detail(format!("max {worst_conj:.1e}"));

    let mut cocycle = CheckResult::new("fractional action is a cocycle on 100 pairs, n <= 3");
    let mut skipped = 0;
    for i in 0..100 {
        let n = 1 + i % 3;
        let g1 = symplectic(n, 3, &mut rng);
        let g2 = symplectic(n, 3, &mut rng);
        let z = symmetric(n, &mut rng);
        let direct = fractional_action(&g1.mul(&g2), &z, &tol);
        let nested = fractional_action(&g2, &z, &tol).and_then(|w| fractional_action(&g1, &w, &tol));
        match (direct, nested) {
            (Ok(a), Ok(b)) => {
                let e = rel_diff(a.as_matrix(), b.as_matrix());
                cocycle.expect(e < 1e-8, || format!("pair {i}: relative deviation {e:.3e}"));
            }
            (Err(Error::SingularDenominator { .. }), _) | (_, Err(Error::SingularDenominator { .. })) => skipped += 1,
            (a, b) => cocycle.fail(format!("pair {i}: {a:?} / {b:?}")),
        }
    }
    let cocycle = cocycle.with_detail(format!("{skipped} pairs outside the chart"));

    let mut weyl = CheckResult::new("every w_k is symplectic, 0 <= k <= n <= 6");
    for n in 1..=6 {
        for k in 0..=n {
            let w = weyl_rep(n, k)?;
            weyl.expect(is_symplectic(&w.matrix, &tol)? , || format!("w_{k} for n = {n}"));
        }
    }
    Ok(vec![agree, inv, invol, conj, cocycle, weyl])
}

fn iwasawa(cfg: &VerifyConfig) -> Result<Vec<CheckResult>> {
    let tol = cfg.tol;
    let mut rng = cfg.rng(2);
    let mut recon = CheckResult::new("v(z) = k m a n reconstructs to 1e-10 on 200 z, n <= 4");
    let mut in_k = CheckResult::new("k factor lies in K");
    let mut alpha = CheckResult::new("alpha equals det(1 + z^2)^(1/2n) to 1e-12");
    let mut shapes = CheckResult::new("ma is Levi with positive definite h, n factor has symmetric corner");
    let mut worst = 0.0f64;
    for i in 0..200 {
        let n = 1 + i % 4;
        let z = symmetric(n, &mut rng);
        let f = iwasawa_vz(&z)?;
        let v = SymplecticElement::unipotent_lower(&z);
        let r = max_abs(&(f.product() - v.matrix()));
        worst = worst.max(r);
        recon.expect(r < 1e-10, || format!("z #{i}: residual {r:.3e}"));
        in_k.expect(is_in_k(&f.k, &tol), || format!("z #{i}: k = {}", f.k.matrix()));
        let eig = z.eigenvalues()?;
        let want: f64 = eig.iter().map(|l| (1.0 + l * l).powf(1.0 / (2.0 * n as f64))).product();
        let e = rel_err(f.alpha, want);
        alpha.expect(e < 1e-12, || format!("z #{i}: alpha {} vs {want}", f.alpha));
        let h_sig = signature(&f.h, &tol)?;
        let corner = f.n_elem.b();
        let asym = max_abs(&(&corner - corner.transpose()));
        shapes.expect(f.ma.is_levi() && h_sig.pos == n && asym < 1e-10, || {
            format!("z #{i}: levi {}, sig h {h_sig}, corner asymmetry {asym:.3e}", f.ma.is_levi())
        });
    }
    let recon = recon.with_detail(format!("max {worst:.1e}"));
    Ok(vec![recon, in_k, alpha, shapes])
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn orbit_census(cfg: &VerifyConfig) -> Result<Vec<CheckResult>> {
    let tol = cfg.tol;
    let mut rng = cfg.rng(3);
    let mut counts = CheckResult::new("label counts equal sum_k C(n-k+2, 2) for n <= 4");
    let mut listed = Vec::new();
    for n in 1..=4 {
        let got = enumerate_orbit_labels(n)?.len();
        let want: usize = (0..=n).map(|k| binomial(n - k + 2, 2)).sum();
        listed.push(got.to_string());
        counts.expect(got == want, || format!("n = {n}: {got} labels, expected {want}"));
    }
    let counts = counts.with_detail(listed.join(", "));
    let mut round = CheckResult::new("orbit_invariant inverts representative_frame");
    let mut separation = CheckResult::new("distinct labels give distinct invariants");
    let mut stable = CheckResult::new("invariants stable under 200 Levi actions per label");
    let mut rebase = CheckResult::new("invariants independent of the frame basis");
    for n in 1..=4 {
        let labels = enumerate_orbit_labels(n)?;
        let mut seen = BTreeSet::new();
        for label in &labels {
            let rep = representative_frame(n, label.k, label.r, label.s)?;
            let got = orbit_invariant(&rep, &tol)?;
            round.expect(got == *label, || format!("{label} read back as {got}"));
            seen.insert(got);
            for t in 0..200 {
                let h = well_conditioned_gl(n, 100.0, &mut rng);
                let moved = act(&SymplecticElement::levi(&h)?, &rep)?;
                match orbit_invariant(&moved, &tol) {
                    Ok(got) if got == *label => {}
                    other => stable.fail(format!("{label}, trial {t}: {other:?}")),
                }
            }
            let g = well_conditioned_gl(n, 100.0, &mut rng);
            match orbit_invariant(&rep.rebased(&g), &tol) {
                Ok(got) if got == *label => {}
                other => rebase.fail(format!("{label}: {other:?}")),
            }
        }
        separation.expect(seen.len() == labels.len(), || format!("n = {n}: {} invariants for {} labels", seen.len(), labels.len()));
    }
    Ok(vec![counts, round, separation, stable, rebase])
}

/// `η' = M₂₁ M₁₁⁻¹` for `M = w_k⁻¹ · levi(h) · w_k · v(η)`.
pub fn cell_action_by_frames(h: &DMatrix<f64>, point: &CellPoint) -> Result<SymmetricMatrix> {
    let n = point.n;
    let w = SymplecticElement::from(weyl_rep(n, point.k)?);
    let m = w
        .inverse()
        .mul(&SymplecticElement::levi(h)?)
        .mul(&w)
        .mul(&SymplecticElement::unipotent_lower(&point.eta()));
    let g = m.matrix();
    let m11 = g.view((0, 0), (n, n)).into_owned();
    let m21 = g.view((n, 0), (n, n)).into_owned();
    Ok(SymmetricMatrix::symmetrize(m21 * inverse(&m11)?))
}

fn random_cell_point<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<CellPoint> {
    let zeta = symmetric(n - k, rng);
    let xi = gaussian_matrix(n - k, k, rng) * 0.5;
    CellPoint::new(zeta, xi)
}

fn cell_action(cfg: &VerifyConfig) -> Result<Vec<CheckResult>> {
    let tol = cfg.tol;
    let mut rng = cfg.rng(4);
    let mut oracle = CheckResult::new("closed-form cell action matches frame oracle to 1e-9, n <= 3, all k");
    let mut worst = 0.0f64;
    let mut trials = 0;
    for n in 1..=3 {
        for k in 0..=n {
            for t in 0..100 {
                let h = well_conditioned_gl(n, 10.0, &mut rng);
                let pt = random_cell_point(n, k, &mut rng)?;
                match (l_action_on_cell(&h, &pt, &tol), cell_action_by_frames(&h, &pt)) {
                    (Ok(a), Ok(b)) => {
                        trials += 1;
                        let e = rel_diff(a.eta().as_matrix(), b.as_matrix());
                        worst = worst.max(e);
                        oracle.expect(e < 1e-9, || format!("n = {n}, k = {k}, trial {t}: deviation {e:.3e}"));
                    }
                    (Err(Error::SingularDenominator { .. }), _) => {}
                    (a, b) => oracle.fail(format!("n = {n}, k = {k}, trial {t}: {a:?} / {b:?}")),
                }
            }
        }
    }
    let oracle = oracle.with_detail(format!("{trials} points, max {worst:.1e}"));
    let mut law = CheckResult::new("acting by h then h' equals acting by h'h, 50 triples per (n, k)");
    for n in 1..=3 {
        for k in 0..=n {
            for t in 0..50 {
                let h = well_conditioned_gl(n, 10.0, &mut rng);
                let h2 = well_conditioned_gl(n, 10.0, &mut rng);
                let pt = random_cell_point(n, k, &mut rng)?;
                let nested = l_action_on_cell(&h, &pt, &tol).and_then(|q| l_action_on_cell(&h2, &q, &tol));
                let direct = l_action_on_cell(&(&h2 * &h), &pt, &tol);
                match (nested, direct) {
                    (Ok(a), Ok(b)) => {
                        let e = rel_diff(a.eta().as_matrix(), b.eta().as_matrix());
                        law.expect(e < 1e-8, || format!("n = {n}, k = {k}, trial {t}: deviation {e:.3e}"));
                    }
                    (Err(Error::SingularDenominator { .. }), _) | (_, Err(Error::SingularDenominator { .. })) => {}
                    (a, b) => law.fail(format!("n = {n}, k = {k}, trial {t}: {a:?} / {b:?}")),
                }
            }
        }
    }
    Ok(vec![oracle, law])
}

fn double_flag(cfg: &VerifyConfig) -> Result<Vec<CheckResult>> {
    let tol = cfg.tol;
    let mut rng = cfg.rng(5);
    let mut count = CheckResult::new("enumerate_open_orbits(2, 1) has 4 labels");
    let labels = enumerate_open_orbits(2, 1)?;
    count.expect(labels.len() == 4, || format!("got {}", labels.len()));
    let mut lattice = CheckResult::new("open-orbit counts match brute-force lattice count, n <= 5");
    let mut round = CheckResult::new("classify_pair inverts representative_pair, n <= 4");
    let mut invariance = CheckResult::new("labels stable under 200 random (h, m) actions");
    for n in 1..=5 {
        for d in 1..=n {
            let labels = enumerate_open_orbits(n, d)?;
            let mut brute = 0;
            for p in 0..=n {
                for s in 0..=d {
                    let (q, t) = (n - p, d - s);
                    if s <= p && t <= q {
                        brute += 1;
                    }
                }
            }
            lattice.expect(labels.len() == brute, || format!("n = {n}, d = {d}: {} vs {brute}", labels.len()));
            if n > 4 {
                continue;
            }
            for label in &labels {
                let got = classify_pair(&representative_pair(label)?, &tol)?;
                round.expect(got == *label, || format!("{label} read back as {got}"));
                let report = orbit_invariance_check(label, 200, &tol, &mut rng)?;
                for f in report.failures {
                    invariance.fail(f);
                }
            }
        }
    }
    let mut constraints = CheckResult::new("orbit inequalities hold on 10^4 random pairs, n <= 5");
    for i in 0..10_000 {
        let n = 1 + i % 5;
        let d = 1 + (i / 5) % n;
        let p = rng.random_range(0..=n);
        let z = symmetric_with_signature(p, n - p, &mut rng);
        let y = gaussian_matrix(n, d, &mut rng);
        match classify_pair(&PairPoint::new(z, y)?, &tol) {
            Ok(label) => constraints.expect(label.satisfies_constraints(), || format!("pair {i}: {label}")),
            Err(e) => constraints.fail(format!("pair {i}: {e}")),
        }
    }
    Ok(vec![count, lattice, round, invariance, constraints])
}

fn determinant_identities(cfg: &VerifyConfig) -> Result<Vec<CheckResult>> {
    let tol = cfg.tol;
    let mut rng = cfg.rng(6);
    let mut routes = CheckResult::new("psi2 product route matches block route to 1e-10, n <= 6");
    let mut worst = 0.0f64;
    for i in 0..300 {
        let n = 1 + i % 6;
        let d = 1 + (i / 6) % n;
        let p = rng.random_range(0..=n);
        let z = conditioned_symmetric(p, n - p, &mut rng);
        let y = sample_stiefel(n, d, &mut rng);
        let e = rel_err(psi2(&z, &y)?, psi2_product(&z, &y, &tol)?);
        worst = worst.max(e);
        routes.expect(e < 1e-10, || format!("n = {n}, d = {d}: deviation {e:.3e}"));
    }
    let routes = routes.with_detail(format!("max {worst:.1e}"));

    let mut minors = CheckResult::new("minor expansion equals det(y^T z y) to 1e-10, n <= 6, d <= 3");
    for i in 0..300 {
        let n = 1 + i % 6;
        let d = 1 + (i / 6) % n.min(3);
        let z = gaussian_matrix(n, n, &mut rng);
        let y = gaussian_matrix(n, d, &mut rng);
        let direct = (y.transpose() * &z * &y).determinant();
        let expanded = minor_expansion(&z, &y)?;
        let scale = max_abs(&z).powi(d as i32) * max_abs(&y).powi(2 * d as i32);
        let e = (direct - expanded).abs() / scale.max(direct.abs()).max(1.0);
        minors.expect(e < 1e-10, || format!("n = {n}, d = {d}: {direct} vs {expanded}"));
    }

    let mut equiv = CheckResult::new("psi1, psi2 pick up (det h)^2 and (det h)^2 (det m)^2 on 200 instances");
    for i in 0..200 {
        let n = 1 + i % 4;
        let d = 1 + (i / 4) % n;
        let z = symmetric(n, &mut rng);
        let y = gaussian_matrix(n, d, &mut rng);
        let h = well_conditioned_gl(n, 10.0, &mut rng);
        let m = well_conditioned_gl(d, 10.0, &mut rng);
        let moved = PairPoint::new(z.clone(), y.clone())?.act(&h, &m)?;
        let (dh, dm) = (h.determinant(), m.determinant());
        let e1 = rel_err(psi1(&moved.z), dh * dh * psi1(&z));
        let e2 = rel_err(psi2(&moved.z, &moved.y)?, dh * dh * dm * dm * psi2(&z, &y)?);
        equiv.expect(e1 < 1e-9 && e2 < 1e-9, || format!("instance {i}: deviations {e1:.3e}, {e2:.3e}"));
        let chi = CharacterPair { m1: 1, m2: 1 };
        let e3 = rel_err(chi.evaluate(&moved.z, &moved.y)?, chi.character(&h, &m) * chi.evaluate(&z, &y)?);
        equiv.expect(e3 < 1e-8, || format!("instance {i}: character deviation {e3:.3e}"));
    }

    let mut poly = CheckResult::new("psi2 is affine along a path through singular z");
    for i in 0..20 {
        let n = 2 + i % 3;
        let d = 1 + i % (n - 1);
        let mut base = symmetric(n, &mut rng).into_inner();
        let y = gaussian_matrix(n, d, &mut rng);
        let at = |t: f64, base: &mut DMatrix<f64>| -> Result<f64> {
            base[(0, 0)] = 0.0;
            let zero_det = SymmetricMatrix::symmetrize(base.clone()).determinant();
            // shift the corner so that det z vanishes at t = 0
            let minor = base.view((1, 1), (n - 1, n - 1)).determinant();
            let c = if minor != 0.0 { -zero_det / minor } else { 0.0 };
            base[(0, 0)] = c + t;
            psi2(&SymmetricMatrix::symmetrize(base.clone()), &y)
        };
        let v0 = at(0.0, &mut base)?;
        let v1 = at(1.0, &mut base)?;
        for t in [-1e-3, 1e-8, 0.5] {
            let vt = at(t, &mut base)?;
            let want = v0 + t * (v1 - v0);
            let e = (vt - want).abs() / v0.abs().max(v1.abs()).max(1.0);
            poly.expect(vt.is_finite() && e < 1e-10, || format!("path {i}, t = {t}: {vt} vs {want}"));
        }
    }

    let mut signed = CheckResult::new("signed kernel equals (-1)^(d m2) psi1^m1 psi2^m2 on integer instances");
    for i in 0..200 {
        let n = 1 + i % 3;
        let d = 1 + (i / 3) % n;
        let z = SymmetricMatrix::symmetrize(DMatrix::from_fn(n, n, |_, _| rng.random_range(-2..=2) as f64));
        let z = SymmetricMatrix::symmetrize((z.as_matrix() + z.as_matrix().transpose()) * 0.5);
        let z = SymmetricMatrix::symmetrize(z.as_matrix().map(f64::round));
        let y = DMatrix::from_fn(n, d, |_, _| rng.random_range(-2..=2) as f64);
        let (m1, m2) = (rng.random_range(0..=2u32), rng.random_range(0..=2u32));
        let got = kernel_k(&z, &y, (m1 + m2) as f64, m2 as f64, true, &tol)?;
        let sign = if (d as u32 * m2).is_multiple_of(2) { 1.0 } else { -1.0 };
        let want = sign * psi1(&z).powi(m1 as i32) * psi2(&z, &y)?.powi(m2 as i32);
        signed.expect(got.round() == want.round() && (got - got.round()).abs() < 1e-6, || {
            format!("instance {i}: {got} vs {want}")
        });
    }

    let mut polar = CheckResult::new("bordered determinant is homogeneous of degree n - d in z");
    for i in 0..100 {
        let n = 1 + i % 4;
        let d = 1 + (i / 4) % n;
        let theta = symmetric(n, &mut rng);
        let y = sample_stiefel(n, d, &mut rng);
        let r: f64 = rng.random_range(0.1..10.0);
        let lhs = bordered_determinant(theta.scale(r).as_matrix(), &y)?;
        let rhs = r.powi((n - d) as i32) * bordered_determinant(theta.as_matrix(), &y)?;
        let e = rel_err(lhs, rhs);
        polar.expect(e < 1e-10, || format!("instance {i}: deviation {e:.3e}"));
    }
    Ok(vec![routes, minors, equiv, poly, signed, polar])
}

fn pochhammer(_cfg: &VerifyConfig) -> Result<Vec<CheckResult>> {
    let mut check = CheckResult::new("vanishing criterion matches direct evaluation, nu in 0..-6, a1 <= 8, n <= 3");
    let mut cases = 0;
    for nu in (-6..=0).rev() {
        for n in 1..=3 {
            for a in MultiIndex::all(n, 8) {
                cases += 1;
                let predicted = pochhammer_vanishes(nu, &a)?;
                let value = pochhammer_general(nu as f64, &a);
                check.expect(predicted == (value == 0.0), || {
                    format!("nu = {nu}, a = {:?}: predicted {predicted}, value {value}", a.parts())
                });
            }
        }
    }
    Ok(vec![check.with_detail(format!("{cases} cases"))])
}

fn report_line(name: &str, report: &IntertwineReport) -> CheckResult {
    let mut check = CheckResult::new(name);
    check.detail = if report.deterministic {
        format!("max relative deviation {:.3e}", report.max_relative_deviation())
    } else {
        format!("max {:.2} standard errors", report.max_sigmas())
    };
    for (i, c) in report.probes.iter().enumerate() {
        let ok = if report.deterministic {
            c.relative_deviation() <= crate::intertwiners::DETERMINISTIC_TOL
        } else {
            c.deviation() <= crate::intertwiners::SIGMA_THRESHOLD * c.diff.se()
        };
        check.expect(ok, || {
            format!(
                "probe {i}: lhs {:.6e}, rhs {:.6e}, diff {:.3e} +- {:.3e}",
                c.lhs.re.mean, c.rhs.re.mean, c.diff.re.mean, c.diff.se()
            )
        });
    }
    check
}

fn dims(cfg: &VerifyConfig) -> Result<(usize, usize)> {
    let n = cfg.n.unwrap_or(1);
    let d = cfg.d.unwrap_or(1);
    if n == 0 || d == 0 || d > n {
        return Err(Error::InvalidInput(format!("need 1 <= d <= n, got n = {n}, d = {d}")));
    }
    Ok((n, d))
}

fn intertwine_p(cfg: &VerifyConfig) -> Result<Vec<CheckResult>> {
    let (n, d) = dims(cfg)?;
    let mut rng = cfg.rng(8);
    if n == 1 {
        let f = GFunction::shell_on_orbit(1, 0, 1.0, 2.0);
        let domain = OrbitIntegrationDomain::new(1, 0)?;
        let probes: Vec<_> = [0.7, 1.0, -2.5].iter().map(|&y| DMatrix::from_element(1, 1, y)).collect();
        let mut out = Vec::new();
        let mut closed = CheckResult::new("both sides equal (y/h)^2 at (nu, mu) = (4, -2)");
        let mut worst = 0.0f64;
        for h in [0.5, 1.5, -2.0] {
            let hm = DMatrix::from_element(1, 1, h);
            let report = check_intertwine_p(&hm, 4.0, -2.0, &f, &probes, domain, &QuadratureSpec::gauss_legendre(8))?;
            for (c, y) in report.probes.iter().zip(&probes) {
                let want = (y[0] / h).powi(2);
                let e = rel_err(c.lhs.re.mean, want).max(rel_err(c.rhs.re.mean, want));
                worst = worst.max(e);
                closed.expect(e < 1e-8, || format!("h = {h}, y = {}: {} / {} vs {want}", y[0], c.lhs.re.mean, c.rhs.re.mean));
            }
            out.push(report_line(&format!("intertwining relation at h = {h}"), &report));
        }
        closed.detail = format!("max relative deviation {worst:.3e}");
        out.insert(0, closed);
        return Ok(out);
    }
    let (nu, mu) = grid_search_region_p(n, d)
        .ok_or_else(|| Error::ConstraintViolation(format!("no integer P-region point found for n = {n}, d = {d}")))?;
    let mut found = CheckResult::new("grid-searched parameter point lies in the P region");
    found.detail = format!("(nu, mu) = ({nu}, {mu})");
    found.expect(region_p(nu, mu, n, d), || "grid search returned a point outside the region".into());
    let h = well_conditioned_gl(n, 4.0, &mut rng);
    let probes: Vec<_> = (0..3).map(|_| sample_stiefel(n, d, &mut rng)).collect();
    let domain = OrbitIntegrationDomain::new(n, 0)?;
    let f = GFunction::gaussian_on_orbit(n, 0);
    let report = check_intertwine_p(&h, nu, mu, &f, &probes, domain, &cfg.mc(80))?;
    Ok(vec![found, report_line("intertwining relation within 3 standard errors", &report)])
}

fn intertwine_q(cfg: &VerifyConfig) -> Result<Vec<CheckResult>> {
    let (n, d) = dims(cfg)?;
    let mut rng = cfg.rng(9);
    let (nf, df) = (n as f64, d as f64);
    let mut out = Vec::new();

    // trivial kernel: the image is exactly constant
    let f = LFunction::minor_power(n, d, Complex64::new(nf, 0.0), 2.0);
    let op = operator_q(&f, Complex64::new(-df, 0.0), Complex64::new(nf, 0.0), cfg.mc(90))?;
    let probes: Vec<SymmetricMatrix> = (0..3)
        .map(|i| {
            let p = i % (n + 1);
            symmetric_with_signature(p, n - p, &mut rng)
        })
        .collect();
    let values = op.evaluate_many(&probes)?;
    let mut constant = CheckResult::new("image under the trivial kernel is exactly constant");
    constant.detail = format!("value {:.6e}", values[0].re.mean);
    for (i, v) in values.iter().enumerate() {
        constant.expect(v == &values[0], || format!("probe {i}: {} vs {}", v.re.mean, values[0].re.mean));
    }
    out.push(constant);
    let h = well_conditioned_gl(n, 4.0, &mut rng);
    let report = check_intertwine_q(&h, -df, nf, &f, &probes, &cfg.mc(91))?;
    out.push(report_line("intertwining relation at (nu, mu) = (-d, n)", &report));

    let (nu, mu) = if n == 2 && d == 1 {
        (-3.0, 4.0)
    } else {
        crate::intertwiners::grid_search_region_q(n, d)
            .ok_or_else(|| Error::ConstraintViolation(format!("no integer Q-region point found for n = {n}, d = {d}")))?
    };
    let mut found = CheckResult::new("parameter point lies in the Q region");
    found.detail = format!("(nu, mu) = ({nu}, {mu})");
    found.expect(region_q(nu, mu, n, d), || "point outside the region".into());
    out.push(found);
    let f = LFunction::minor_power(n, d, Complex64::new(mu, 0.0), 2.0);
    let report = check_intertwine_q(&h, nu, mu, &f, &probes, &cfg.mc(92))?;
    let name = if report.deterministic {
        "intertwining relation, exact two-point average"
    } else {
        "intertwining relation within 3 standard errors"
    };
    out.push(report_line(name, &report));
    Ok(out)
}

fn convergence_region(cfg: &VerifyConfig) -> Result<Vec<CheckResult>> {
    let spec = QuadratureSpec::monte_carlo(cfg.budget.min(20_000), cfg.seed).with_workers(cfg.workers);
    let mut verdicts = CheckResult::new("n = 1 bound verdicts match the one-dimensional criteria");
    let mut tally = (0, 0);
    for (side, grid) in [("P", [-0.5, 0.5, 1.5]), ("Q", [-1.5, -0.5, 0.5])] {
        for &u in &grid {
            for &v in &grid {
                let nu = (u + v) / 2.0 + 1.0;
                let mu = (u - v) / 2.0;
                let exps = if side == "P" {
                    MajorantExponents::p_side(nu, mu, 1)
                } else {
                    MajorantExponents::q_side(nu, mu, 1, 1)
                };
                let e0 = exps.radial_exponent_at_zero(1, 1);
                let analytic = e0 > 0.0 && e0 + 2.0 * exps.c < 0.0;
                let result = if side == "P" {
                    bound_estimate_p(nu, mu, 1, 1, 1, 0, &spec)
                } else {
                    bound_estimate_q(nu, mu, 1, 1, &spec)
                };
                let finite = match result {
                    Ok(b) => b.value.is_finite(),
                    Err(Error::DivergenceSuspected { .. }) => false,
                    Err(e) => return Err(e),
                };
                if finite {
                    tally.0 += 1;
                } else {
                    tally.1 += 1;
                }
                verdicts.expect(finite == analytic, || {
                    format!("{side} at (nu, mu) = ({nu}, {mu}): computed finite = {finite}, analytic {analytic}")
                });
            }
        }
    }
    verdicts.detail = format!("{} finite, {} divergent", tally.0, tally.1);

    let mut disjoint = CheckResult::new("P and Q regions are disjoint on a 10^4-point grid, n <= 4");
    let mut implication = CheckResult::new("Q-region points give nonnegative kernel exponents");
    for n in 1..=4 {
        for d in 1..=n {
            for i in 0..100 {
                for j in 0..100 {
                    let nu = -10.0 + 20.0 * i as f64 / 99.0;
                    let mu = -10.0 + 20.0 * j as f64 / 99.0;
                    let (p, q) = (region_p(nu, mu, n, d), region_q(nu, mu, n, d));
                    disjoint.expect(!(p && q), || format!("({nu}, {mu}) in both for n = {n}, d = {d}"));
                    if q {
                        let amb = ((n - d) as f64 - (nu + mu)) / 2.0;
                        let beta = (mu - n as f64) / 2.0;
                        implication.expect(amb >= 0.0 && beta >= 0.0, || format!("({nu}, {mu}), n = {n}, d = {d}"));
                    }
                }
            }
        }
    }

    let mut rank_two = CheckResult::new("n = 2 bound integrals finite at the tested region points");
    let q = bound_estimate_q(-3.0, 4.0, 2, 1, &spec)?;
    let p = bound_estimate_p(4.0, -1.0, 2, 1, 2, 0, &spec)?;
    rank_two.detail = format!("Q(-3, 4) = {:.4e} +- {:.1e}, P(4, -1) = {:.4e} +- {:.1e}", q.value, q.se, p.value, p.se);
    rank_two.expect(q.value.is_finite() && p.value.is_finite(), || "non-finite value".into());
    Ok(vec![verdicts, disjoint, implication, rank_two])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_suites_pass() {
        let cfg = VerifyConfig::default();
        for name in ["symplectic-identities", "iwasawa", "pochhammer", "intertwine-P"] {
            let report = run_suite(name, &cfg).unwrap();
            assert!(report.passed(), "{}", report.render(&cfg));
        }
    }

    #[test]
    fn unknown_suite_is_rejected() {
        assert!(matches!(run_suite("nope", &VerifyConfig::default()), Err(Error::InvalidInput(_))));
    }
}
