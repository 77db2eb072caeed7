//! Command-line front end. `run` parses arguments, writes a plain-text report
//! and returns the process exit code.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::double_flag::{classify_pair, enumerate_open_orbits, is_open, PairPoint};
use crate::error::{Error, Result};
use crate::intertwiners::{
    bound_estimate_p, bound_estimate_q, check_intertwine_p, check_intertwine_q, grid_search_region_p,
    grid_search_region_q, operator_p, operator_q, reference_frame, KernelParams, OrbitIntegrationDomain,
};
use crate::lagrangian::{bruhat_index, enumerate_orbit_labels, orbit_invariant, LagrangianFrame};
use crate::mc::{ComplexEstimate, QuadratureSpec};
use crate::numerics::{is_symmetric, signature, solve, SymmetricMatrix, TolerancePolicy};
use crate::principal_series::{region_p_report, region_q_report, GFunction, LFunction, RegionReport};
use crate::random::{stream_rng, well_conditioned_gl};
use crate::symplectic::is_symplectic;
use crate::verify::{run_suite, VerifyConfig, SUITES};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

const DEFAULT_BUDGET: u64 = 100_000;

#[derive(Debug, Parser)]
#[command(name = "dflag", version, about = "Orbits, relative invariants and intertwining operators on the double flag variety")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Seed for every random stream; required by randomized commands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Total Monte-Carlo sample budget.
    #[arg(long, global = true)]
    pub budget: Option<u64>,
    /// Worker threads for Monte-Carlo estimators (results do not depend on it).
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,
    #[arg(long = "tol-rel", global = true, default_value_t = 1e-9)]
    pub tol_rel: f64,
    #[arg(long = "tol-abs", global = true, default_value_t = 1e-12)]
    pub tol_abs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Side {
    #[value(name = "P", alias = "p")]
    P,
    #[value(name = "Q", alias = "q")]
    Q,
}

#[derive(Debug, Clone, Args)]
pub struct Dims {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct Params {
    #[arg(long, allow_hyphen_values = true)]
    pub nu: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    /// Kernel exponent alpha (alternative to --nu via the operator's dictionary).
    #[arg(long, allow_hyphen_values = true, conflicts_with = "nu")]
    pub alpha: Option<f64>,
    /// Kernel exponent beta (alternative to --mu via the operator's dictionary).
    #[arg(long, allow_hyphen_values = true, conflicts_with = "mu")]
    pub beta: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Orbit label of a Lagrangian frame or of a pair (z, y).
    Classify {
        /// 2n x n frame [[U], [L]].
        #[arg(long, conflicts_with_all = ["z", "y"])]
        frame: Option<PathBuf>,
        /// Symmetric n x n matrix.
        #[arg(long, requires = "y")]
        z: Option<PathBuf>,
        /// n x d matrix of rank d.
        #[arg(long, requires = "z")]
        y: Option<PathBuf>,
    },
    /// Orbit labels on the Lagrangian Grassmannian, or open orbits on the double flag variety with --d.
    Enumerate {
        #[command(flatten)]
        dims: Dims,
    },
    /// Which convergence region contains (nu, mu).
    Region {
        #[command(flatten)]
        dims: Dims,
        #[command(flatten)]
        params: Params,
    },
    /// Evaluate the P operator on a test function supported on Omega(p, q).
    EvalP {
        #[command(flatten)]
        dims: Dims,
        #[command(flatten)]
        params: Params,
        #[arg(long)]
        p: Option<usize>,
        #[arg(long)]
        q: Option<usize>,
        /// Probe frame (n x d); defaults to the first d coordinate vectors.
        #[arg(long)]
        y: Option<PathBuf>,
    },
    /// Evaluate the Q operator on a test function on the Stiefel manifold.
    EvalQ {
        #[command(flatten)]
        dims: Dims,
        #[command(flatten)]
        params: Params,
        /// Probe point (symmetric n x n); defaults to the identity.
        #[arg(long)]
        z: Option<PathBuf>,
    },
    /// Two-sided check of an intertwining relation.
    CheckIntertwine {
        #[arg(value_enum)]
        side: Side,
        #[command(flatten)]
        dims: Dims,
        #[command(flatten)]
        params: Params,
    },
    /// Cauchy-Schwarz majorant integral controlling boundedness.
    Bound {
        #[arg(value_enum)]
        side: Side,
        #[command(flatten)]
        dims: Dims,
        #[command(flatten)]
        params: Params,
        #[arg(long)]
        p: Option<usize>,
        #[arg(long)]
        q: Option<usize>,
    },
    /// Run a property-verification suite (or "all").
    Verify {
        suite: String,
        #[command(flatten)]
        dims: Dims,
    },
}

/// Matrix file: `{"rows": r, "cols": c, "data": [row-major], "kind": ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixFile {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<MatrixKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixKind {
    Symmetric,
    Symplectic,
    Frame,
    Rect,
}

impl MatrixFile {
    pub fn from_matrix(m: &DMatrix<f64>, kind: Option<MatrixKind>) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.transpose().iter().copied().collect(),
            kind,
        }
    }

    pub fn parse(text: &str, tol: &TolerancePolicy) -> Result<Self> {
        let file: Self = serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("malformed matrix file: {e}")))?;
        file.validate(tol)?;
        Ok(file)
    }

    pub fn load(path: &Path, tol: &TolerancePolicy) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, tol)
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn validate(&self, tol: &TolerancePolicy) -> Result<()> {
        if self.rows == 0 || self.cols == 0 || self.data.len() != self.rows * self.cols {
            return Err(Error::DimensionMismatch(format!(
                "matrix file declares {}x{} but holds {} entries",
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("matrix file holds non-finite entries".into()));
        }
        let m = self.matrix();
        match self.kind {
            None | Some(MatrixKind::Rect) => Ok(()),
            Some(MatrixKind::Symmetric) => {
                if m.nrows() != m.ncols() || !is_symmetric(&m, tol) {
                    return Err(Error::InvariantViolation("matrix tagged symmetric is not symmetric".into()));
                }
                Ok(())
            }
            Some(MatrixKind::Symplectic) => {
                if is_symplectic(&m, tol)? {
                    Ok(())
                } else {
                    Err(Error::InvariantViolation("matrix tagged symplectic fails g^T J g = J".into()))
                }
            }
            Some(MatrixKind::Frame) => LagrangianFrame::from_stacked(&m, tol).map(|_| ()),
        }
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::DimensionMismatch(_)
        | Error::InvariantViolation(_)
        | Error::ConstraintViolation(_)
        | Error::RankDeficientY { .. }
        | Error::InvalidInput(_) => EXIT_USAGE,
        Error::SingularDenominator { .. }
        | Error::SingularZ { .. }
        | Error::Numerical(_)
        | Error::DivergenceSuspected { .. } => EXIT_NUMERICAL,
    }
}

/// Parses `args` (including the program name), runs the command and writes its report.
pub fn run<I, S>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(out, "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let mut text = String::new();
    let code = match dispatch(&cli, &mut text) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(text, "error: {e}");
            exit_code(&e)
        }
    };
    let _ = out.write_all(text.as_bytes());
    code
}

fn tolerance(common: &Common) -> Result<TolerancePolicy> {
    TolerancePolicy::new(common.tol_rel, common.tol_abs)
}

fn require_seed(common: &Common, what: &str) -> Result<u64> {
    common
        .seed
        .ok_or_else(|| Error::InvalidInput(format!("{what} is randomized and needs --seed")))
}

fn dims(dims: &Dims, default_d: bool) -> Result<(usize, usize)> {
    let n = dims.n.ok_or_else(|| Error::InvalidInput("--n is required".into()))?;
    let d = match dims.d {
        Some(d) => d,
        None if default_d => 1,
        None => return Err(Error::InvalidInput("--d is required".into())),
    };
    if n == 0 || d == 0 || d > n {
        return Err(Error::InvalidInput(format!("need 1 <= d <= n, got n = {n}, d = {d}")));
    }
    Ok((n, d))
}

/// `(ν, μ)` from the flags, converting `(α, β)` through the side's dictionary.
fn nu_mu(params: &Params, side: Side, n: usize, d: usize) -> Result<Option<(f64, f64)>> {
    let nu = match (params.nu, params.alpha) {
        (Some(nu), _) => Some(nu),
        (None, Some(a)) => Some(match side {
            Side::P => 2.0 * a,
            Side::Q => -2.0 * a - d as f64,
        }),
        (None, None) => None,
    };
    let mu = match (params.mu, params.beta) {
        (Some(mu), _) => Some(mu),
        (None, Some(b)) => Some(match side {
            Side::P => -2.0 * b,
            Side::Q => 2.0 * b + n as f64,
        }),
        (None, None) => None,
    };
    match (nu, mu) {
        (Some(nu), Some(mu)) => Ok(Some((nu, mu))),
        (None, None) => Ok(None),
        _ => Err(Error::InvalidInput("give both nu (or alpha) and mu (or beta)".into())),
    }
}

fn required_nu_mu(params: &Params, side: Side, n: usize, d: usize) -> Result<(f64, f64)> {
    nu_mu(params, side, n, d)?.ok_or_else(|| Error::InvalidInput("--nu/--alpha and --mu/--beta are required".into()))
}

fn orbit(p: Option<usize>, q: Option<usize>, n: usize) -> Result<(usize, usize)> {
    let (p, q) = match (p, q) {
        (Some(p), Some(q)) => (p, q),
        (Some(p), None) if p <= n => (p, n - p),
        (None, Some(q)) if q <= n => (n - q, q),
        (None, None) => (n, 0),
        _ => return Err(Error::InvalidInput(format!("orbit does not fit in Sym_{n}"))),
    };
    if p + q != n {
        return Err(Error::InvalidInput(format!("--p + --q must equal n = {n}, got {p} + {q}")));
    }
    Ok((p, q))
}

fn mc_spec(common: &Common, seed: u64) -> QuadratureSpec {
    QuadratureSpec::monte_carlo(common.budget.unwrap_or(DEFAULT_BUDGET), seed).with_workers(common.workers)
}

fn fmt_estimate(e: &ComplexEstimate) -> String {
    if e.se() == 0.0 {
        format!("{:.12e} + {:.12e}i (exact rule)", e.re.mean, e.im.mean)
    } else {
        format!("{:.8e} + {:.8e}i +- {:.2e} ({} samples)", e.re.mean, e.im.mean, e.se(), e.re.samples)
    }
}

fn dispatch(cli: &Cli, out: &mut String) -> Result<i32> {
    let common = &cli.common;
    let tol = tolerance(common)?;
    match &cli.command {
        Command::Classify { frame, z, y } => cmd_classify(frame.as_deref(), z.as_deref(), y.as_deref(), &tol, out),
        Command::Enumerate { dims } => cmd_enumerate(dims.n, dims.d, out),
        Command::Region { dims: dm, params } => {
            let (n, d) = dims(dm, true)?;
            let (nu, mu) = required_nu_mu(params, Side::P, n, d)?;
            cmd_region(nu, mu, n, d, out)
        }
        Command::EvalP { dims: dm, params, p, q, y } => {
            let (n, d) = dims(dm, true)?;
            let (nu, mu) = required_nu_mu(params, Side::P, n, d)?;
            let (p, q) = orbit(*p, *q, n)?;
            let probe = match y {
                Some(path) => MatrixFile::load(path, &tol)?.matrix(),
                None => reference_frame(n, d),
            };
            if probe.shape() != (n, d) {
                return Err(Error::DimensionMismatch(format!("probe must be {n}x{d}, got {:?}", probe.shape())));
            }
            let f = GFunction::shell_on_orbit(p, q, 1.0, 2.0);
            let spec = if n == 1 {
                QuadratureSpec::gauss_legendre(8)
            } else {
                mc_spec(common, require_seed(common, "eval-p for n >= 2")?)
            };
            let domain = OrbitIntegrationDomain::new(p, q)?;
            let params = KernelParams::p_side(Complex64::new(nu, 0.0), Complex64::new(mu, 0.0), n, d);
            let v = operator_p(&f, params, domain, spec)?.evaluate(&probe)?;
            let _ = writeln!(out, "function: indicator of {p},{q}-orbit shell 1 <= |z| <= 2");
            let _ = writeln!(out, "kernel: alpha = {}, beta = {}", params.alpha.re, params.beta.re);
            let _ = writeln!(out, "value: {}", fmt_estimate(&v));
            Ok(EXIT_OK)
        }
        Command::EvalQ { dims: dm, params, z } => {
            let (n, d) = dims(dm, true)?;
            let (nu, mu) = required_nu_mu(params, Side::Q, n, d)?;
            let probe = match z {
                Some(path) => SymmetricMatrix::new(MatrixFile::load(path, &tol)?.matrix())?,
                None => SymmetricMatrix::identity(n),
            };
            let spec = if n == 1 {
                QuadratureSpec::monte_carlo(1, 0)
            } else {
                mc_spec(common, require_seed(common, "eval-q for n >= 2")?)
            };
            let f = LFunction::minor_power(n, d, Complex64::new(mu, 0.0), 2.0);
            let op = operator_q(&f, Complex64::new(nu, 0.0), Complex64::new(mu, 0.0), spec)?;
            let v = op.evaluate(&probe)?;
            let _ = writeln!(out, "function: |det y_top|^2 |det y^T y|^(-(mu + 2)/2)");
            let _ = writeln!(out, "kernel: alpha = {}, beta = {}", op.params().alpha.re, op.params().beta.re);
            let _ = writeln!(out, "value: {}", fmt_estimate(&v));
            Ok(EXIT_OK)
        }
        Command::CheckIntertwine { side, dims: dm, params } => {
            let (n, d) = dims(dm, true)?;
            let seed = require_seed(common, "check-intertwine")?;
            cmd_check_intertwine(*side, n, d, nu_mu(params, *side, n, d)?, seed, common, out)
        }
        Command::Bound { side, dims: dm, params, p, q } => {
            let (n, d) = dims(dm, true)?;
            let (nu, mu) = required_nu_mu(params, *side, n, d)?;
            let seed = if n == 1 { 0 } else { require_seed(common, "bound for n >= 2")? };
            let spec = mc_spec(common, seed);
            let result = match side {
                Side::P => {
                    let (p, q) = orbit(*p, *q, n)?;
                    bound_estimate_p(nu, mu, n, d, p, q, &spec)
                }
                Side::Q => bound_estimate_q(nu, mu, n, d, &spec),
            };
            match result {
                Ok(b) => {
                    let _ = writeln!(out, "verdict: finite");
                    let _ = writeln!(out, "value: {:.10e} +- {:.2e}", b.value, b.se);
                    for (t, v) in &b.truncations {
                        let _ = writeln!(out, "  |ln r| <= {t}: {v:.10e}");
                    }
                }
                Err(Error::DivergenceSuspected { estimates }) => {
                    let _ = writeln!(out, "verdict: divergence suspected");
                    for v in estimates {
                        let _ = writeln!(out, "  running estimate: {v:.6e}");
                    }
                }
                Err(e) => return Err(e),
            }
            Ok(EXIT_OK)
        }
        Command::Verify { suite, dims } => {
            let cfg = VerifyConfig {
                seed: common.seed.unwrap_or(0),
                budget: common.budget.unwrap_or(DEFAULT_BUDGET),
                workers: common.workers.max(1),
                n: dims.n,
                d: dims.d,
                tol,
            };
            cmd_verify(suite, &cfg, out)
        }
    }
}

pub fn cmd_classify(
    frame: Option<&Path>,
    z: Option<&Path>,
    y: Option<&Path>,
    tol: &TolerancePolicy,
    out: &mut String,
) -> Result<i32> {
    if let Some(path) = frame {
        let frame = LagrangianFrame::from_stacked(&MatrixFile::load(path, tol)?.matrix(), tol)?;
        let label = orbit_invariant(&frame, tol)?;
        let form = frame.orthonormalized().form();
        let _ = writeln!(out, "{label}");
        let _ = writeln!(out, "bruhat index: {}", bruhat_index(&frame, tol));
        let _ = writeln!(out, "form eigenvalues: {}", fmt_values(&form.eigenvalues()?));
        return Ok(EXIT_OK);
    }
    let (Some(zp), Some(yp)) = (z, y) else {
        return Err(Error::InvalidInput("classify needs --frame or both --z and --y".into()));
    };
    let zm = MatrixFile::load(zp, tol)?.matrix();
    if !is_symmetric(&zm, tol) {
        return Err(Error::InvariantViolation("z must be a symmetric matrix".into()));
    }
    let z = SymmetricMatrix::new(zm)?;
    let y = MatrixFile::load(yp, tol)?.matrix();
    let pt = PairPoint::new(z, y)?;
    let label = classify_pair(&pt, tol)?;
    let openness = if is_open(&label) { "open" } else { "degenerate" };
    let _ = writeln!(out, "{label} {openness}");
    let _ = writeln!(out, "signature of z: {}", signature(&pt.z, tol)?);
    let _ = writeln!(out, "z eigenvalues: {}", fmt_values(&pt.z.eigenvalues()?));
    let restricted = SymmetricMatrix::symmetrize(pt.y.transpose() * solve(pt.z.as_matrix(), &pt.y)?);
    let _ = writeln!(out, "restricted form eigenvalues: {}", fmt_values(&restricted.eigenvalues()?));
    Ok(EXIT_OK)
}

fn fmt_values(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.6e}")).collect::<Vec<_>>().join(" ")
}

pub fn cmd_enumerate(n: Option<usize>, d: Option<usize>, out: &mut String) -> Result<i32> {
    let n = n.filter(|&n| n >= 1).ok_or_else(|| Error::InvalidInput("--n must be at least 1".into()))?;
    match d {
        None => {
            let labels = enumerate_orbit_labels(n)?;
            let _ = writeln!(out, "{:>3} {:>3} {:>3}", "k", "r", "s");
            for l in &labels {
                let _ = writeln!(out, "{:>3} {:>3} {:>3}", l.k, l.r, l.s);
            }
            for k in 0..=n {
                let count = labels.iter().filter(|l| l.k == k).count();
                let want = (n - k + 2) * (n - k + 1) / 2;
                let _ = writeln!(out, "cell k={k}: {count} orbits (expected {want})");
            }
            let _ = writeln!(out, "total: {}", labels.len());
        }
        Some(d) => {
            let labels = enumerate_open_orbits(n, d)?;
            let _ = writeln!(out, "{:>3} {:>3} {:>3} {:>3}", "p", "q", "s", "t");
            for l in &labels {
                let _ = writeln!(out, "{:>3} {:>3} {:>3} {:>3}", l.p, l.q, l.s, l.t);
            }
            let _ = writeln!(out, "total: {}", labels.len());
        }
    }
    Ok(EXIT_OK)
}

fn write_margins(out: &mut String, name: &str, report: &RegionReport) {
    for i in 0..4 {
        let mark = if report.satisfied(i) { "ok" } else { "violated" };
        let _ = writeln!(out, "  {name}: {:<26} margin {:+.6} {mark}", report.names[i], report.margins[i]);
    }
}

pub fn cmd_region(nu: f64, mu: f64, n: usize, d: usize, out: &mut String) -> Result<i32> {
    let p = region_p_report(nu, mu, n, d);
    let q = region_q_report(nu, mu, n, d);
    let verdict = match (p.holds(), q.holds()) {
        (true, false) => "P",
        (false, true) => "Q",
        (false, false) => "neither",
        (true, true) => return Err(Error::InvariantViolation("point lies in both regions".into())),
    };
    let _ = writeln!(out, "{verdict}");
    write_margins(out, "P", &p);
    write_margins(out, "Q", &q);
    Ok(EXIT_OK)
}

fn cmd_check_intertwine(
    side: Side,
    n: usize,
    d: usize,
    point: Option<(f64, f64)>,
    seed: u64,
    common: &Common,
    out: &mut String,
) -> Result<i32> {
    let mut rng = stream_rng(seed, 100);
    let h = well_conditioned_gl(n, 4.0, &mut rng);
    let spec = mc_spec(common, seed);
    let report = match side {
        Side::P => {
            let (nu, mu) = match point {
                Some(pt) => pt,
                None => grid_search_region_p(n, d)
                    .ok_or_else(|| Error::ConstraintViolation("no integer P-region point found".into()))?,
            };
            let _ = writeln!(out, "(nu, mu) = ({nu}, {mu})");
            if n == 1 {
                let f = GFunction::shell_on_orbit(1, 0, 1.0, 2.0);
                let probes: Vec<_> = [0.7, 1.0, -2.5].iter().map(|&v| DMatrix::from_element(1, 1, v)).collect();
                check_intertwine_p(&h, nu, mu, &f, &probes, OrbitIntegrationDomain::new(1, 0)?, &QuadratureSpec::gauss_legendre(8))?
            } else {
                let probes: Vec<_> = (0..3).map(|_| crate::principal_series::sample_stiefel(n, d, &mut rng)).collect();
                let f = GFunction::gaussian_on_orbit(n, 0);
                check_intertwine_p(&h, nu, mu, &f, &probes, OrbitIntegrationDomain::new(n, 0)?, &spec)?
            }
        }
        Side::Q => {
            let (nu, mu) = match point {
                Some(pt) => pt,
                None => grid_search_region_q(n, d)
                    .ok_or_else(|| Error::ConstraintViolation("no integer Q-region point found".into()))?,
            };
            let _ = writeln!(out, "(nu, mu) = ({nu}, {mu})");
            let f = LFunction::minor_power(n, d, Complex64::new(mu, 0.0), 2.0);
            let probes: Vec<_> = (0..3)
                .map(|i| crate::random::symmetric_with_signature(i % (n + 1), n - i % (n + 1), &mut rng))
                .collect();
            check_intertwine_q(&h, nu, mu, &f, &probes, &spec)?
        }
    };
    for (i, c) in report.probes.iter().enumerate() {
        let _ = writeln!(out, "probe {i}: lhs {}", fmt_estimate(&c.lhs));
        let _ = writeln!(out, "         rhs {}", fmt_estimate(&c.rhs));
        if report.deterministic {
            let _ = writeln!(out, "         relative deviation {:.3e}", c.relative_deviation());
        } else {
            let _ = writeln!(out, "         difference {:.3e} ({:.2} standard errors)", c.deviation(), c.sigmas());
        }
    }
    let _ = writeln!(out, "{}", if report.passed { "PASS" } else { "FAIL" });
    Ok(if report.passed { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

pub fn cmd_verify(suite: &str, cfg: &VerifyConfig, out: &mut String) -> Result<i32> {
    let names: Vec<&str> = if suite == "all" { SUITES.to_vec() } else { vec![suite] };
    if let Some(bad) = names.iter().find(|s| !SUITES.contains(s)) {
        return Err(Error::InvalidInput(format!(
            "unknown suite '{bad}'; known suites: all, {}",
            SUITES.join(", ")
        )));
    }
    let mut failed = false;
    for name in names {
        let report = run_suite(name, cfg)?;
        failed |= !report.passed();
        out.push_str(&report.render(cfg));
    }
    Ok(if failed { EXIT_VERIFY_FAILED } else { EXIT_OK })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String) {
        let mut buf = Vec::new();
        let code = run(std::iter::once("dflag").chain(args.iter().copied()), &mut buf);
        (code, String::from_utf8(buf).unwrap())
    }

    #[test]
    fn region_verdicts() {
        assert!(run_str(&["region", "--nu", "4", "--mu", "-2", "--n", "1", "--d", "1"]).1.starts_with("P\n"));
        assert!(run_str(&["region", "--nu", "-3", "--mu", "4", "--n", "2", "--d", "1"]).1.starts_with("Q\n"));
        assert!(run_str(&["region", "--nu", "0", "--mu", "0", "--n", "2", "--d", "1"]).1.starts_with("neither\n"));
    }

    #[test]
    fn enumerate_tables() {
        let (code, out) = run_str(&["enumerate", "--n", "2"]);
        assert_eq!(code, 0);
        assert!(out.contains("total: 10"));
        assert!(run_str(&["enumerate", "--n", "2", "--d", "1"]).1.contains("total: 4"));
        assert_eq!(run_str(&["enumerate", "--n", "0"]).0, EXIT_USAGE);
    }

    #[test]
    fn usage_errors() {
        assert_eq!(run_str(&["verify", "nope"]).0, EXIT_USAGE);
        assert_eq!(run_str(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(run_str(&["check-intertwine", "P", "--n", "2"]).0, EXIT_USAGE);
        assert_eq!(run_str(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn matrix_file_validation() {
        let tol = TolerancePolicy::default();
        assert!(MatrixFile::parse(r#"{"rows":2,"cols":2,"data":[1,0,0]}"#, &tol).is_err());
        assert!(MatrixFile::parse(r#"{"rows":2,"cols":2,"data":[1,2,3,4],"kind":"symmetric"}"#, &tol).is_err());
        let m = MatrixFile::parse(r#"{"rows":2,"cols":1,"data":[1,2],"kind":"rect"}"#, &tol).unwrap();
        assert_eq!(m.matrix(), DMatrix::from_column_slice(2, 1, &[1.0, 2.0]));
        let round = MatrixFile::from_matrix(&m.matrix(), Some(MatrixKind::Rect));
        assert_eq!(round, m);
    }
}
