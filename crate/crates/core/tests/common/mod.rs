//! Independent oracles shared by the integration tests. None of them call the
//! library routine they are used to check.

#![allow(dead_code)]

use std::f64::consts::PI;

use dflag::lagrangian::CellPoint;
use dflag::numerics::SymmetricMatrix;
use dflag::symplectic::{SiegelParabolicElement, SymplecticElement};
use nalgebra::DMatrix;

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

pub fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    max_abs(&(a - b)) / max_abs(a).max(max_abs(b)).max(1.0)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

pub fn j(n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        m[(i, n + i)] = -1.0;
        m[(n + i, i)] = 1.0;
    }
    m
}

/// `‖gᵀ J g − J‖_max`.
pub fn gram_residual(g: &DMatrix<f64>) -> f64 {
    let jm = j(g.nrows() / 2);
    max_abs(&(g.transpose() * &jm * g - jm))
}

/// `g⁻¹ p g` by general LU inversion.
pub fn conjugate_by_triple_product(g: &SymplecticElement, p: &SiegelParabolicElement) -> DMatrix<f64> {
    let gi = g.matrix().clone().try_inverse().expect("invertible");
    gi * p.to_symplectic().matrix() * g.matrix()
}

/// `levi(h) = diag(h, h⁻ᵀ)` assembled entrywise.
pub fn levi_matrix(h: &DMatrix<f64>) -> DMatrix<f64> {
    let n = h.nrows();
    let hit = h.clone().try_inverse().expect("invertible").transpose();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(h);
    m.view_mut((n, n), (n, n)).copy_from(&hit);
    m
}

/// `w_k` assembled entrywise: `a = d = diag(0, 1_k)`, `c = −b = diag(1_{n−k}, 0)`.
pub fn weyl_matrix(n: usize, k: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n - k {
        m[(i, n + i)] = -1.0;
        m[(n + i, i)] = 1.0;
    }
    for i in n - k..n {
        m[(i, i)] = 1.0;
        m[(n + i, n + i)] = 1.0;
    }
    m
}

/// Moves the frame `w_k [[1], [η]]` by `levi(h)`, pulls it back by `w_k⁻¹` and
/// reads off the new chart coordinate `η' = Y X⁻¹`.
pub fn cell_action_oracle(h: &DMatrix<f64>, point: &CellPoint) -> DMatrix<f64> {
    let n = point.n;
    let w = weyl_matrix(n, point.k);
    let mut frame = DMatrix::zeros(2 * n, n);
    frame.view_mut((0, 0), (n, n)).fill_with_identity();
    frame.view_mut((n, 0), (n, n)).copy_from(point.eta().as_matrix());
    let moved = w.transpose() * levi_matrix(h) * &w * frame;
    let x = moved.view((0, 0), (n, n)).into_owned();
    let y = moved.view((n, 0), (n, n)).into_owned();
    y * x.try_inverse().expect("point stays in the chart")
}

fn subsets(n: usize, d: usize) -> Vec<Vec<usize>> {
    if d == 0 {
        return vec![vec![]];
    }
    if n < d {
        return vec![];
    }
    let mut out = subsets(n - 1, d);
    for mut s in subsets(n - 1, d - 1) {
        s.push(n - 1);
        out.push(s);
    }
    out
}

fn minor(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> f64 {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])]).determinant()
}

/// `det(yᵀ z y) = Σ_{I,J} det(y_I)ᵀ det(z_{IJ}) det(y_J)` over `d`-subsets.
pub fn cauchy_binet(z: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    let (n, d) = y.shape();
    let all: Vec<usize> = (0..d).collect();
    let sets = subsets(n, d);
    let mut total = 0.0;
    for i in &sets {
        let yi = minor(y, i, &all);
        for jset in &sets {
            total += yi * minor(z, i, jset) * minor(y, jset, &all);
        }
    }
    total
}

/// Composite Gauss–Legendre nodes on `[a, b]` (order 10), from tabulated values.
pub fn gl_nodes(a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
    const X: [f64; 5] = [
        0.148_874_338_981_631_2,
        0.433_395_394_129_247_2,
        0.679_409_568_299_024_4,
        0.865_063_366_688_984_5,
        0.973_906_528_517_171_7,
    ];
    const W: [f64; 5] = [
        0.295_524_224_714_752_9,
        0.269_266_719_309_996_4,
        0.219_086_362_515_982,
        0.149_451_349_150_580_6,
        0.066_671_344_308_688_1,
    ];
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * 10);
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for k in 0..5 {
            for s in [-1.0, 1.0] {
                out.push((mid + s * X[k] * h / 2.0, W[k] * h / 2.0));
            }
        }
    }
    out
}

/// `∫_ℝ g(λ) dλ` with `λ = tan θ`.
pub fn integrate_line<F: Fn(f64) -> f64>(g: F, panels: usize) -> f64 {
    gl_nodes(-PI / 2.0, PI / 2.0, panels)
        .into_iter()
        .map(|(t, w)| {
            let c = t.cos();
            w * g(t.tan()) / (c * c)
        })
        .sum()
}

/// `∫_{Sym_2} f(z) dz` for `f` depending on `z` only through its eigenvalues
/// and the angle `ψ` between the first eigenvector and `e₁`:
/// `dz = |λ₁ − λ₂| dλ₁ dλ₂ dψ` with `λ₁ > λ₂`, `ψ ∈ [0, π)`.
/// `g(λ₁, λ₂)` must already include the `ψ` integral; the domain is
/// `λ₁ > λ₂ > lower` (`lower = −∞` for all of `Sym_2`).
pub fn integrate_sym2<F: Fn(f64, f64) -> f64>(g: F, lower: f64, panels: usize) -> f64 {
    let t_lo = lower.atan();
    let mut total = 0.0;
    for (t1, w1) in gl_nodes(t_lo, PI / 2.0, panels) {
        let l1 = t1.tan();
        let j1 = 1.0 / (t1.cos() * t1.cos());
        for (t2, w2) in gl_nodes(t_lo, t1, panels) {
            let l2 = t2.tan();
            let j2 = 1.0 / (t2.cos() * t2.cos());
            total += w1 * w2 * j1 * j2 * (l1 - l2) * g(l1, l2);
        }
    }
    total
}

/// Majorant integral for the `Q` side at `n = 2, d = 1`, `(ν, μ) = (−3, 4)`:
/// integrand `|bd(z, e₁)|² det(1 + z²)^{−9/2}`, `bd = −(λ₂ cos²ψ + λ₁ sin²ψ)`.
/// The `ψ` average of `(A cos² + B sin²)²` is `(3A² + 2AB + 3B²)/8`.
pub fn q_bound_n2_oracle() -> f64 {
    integrate_sym2(
        |l1, l2| {
            let ang = PI * (3.0 * l2 * l2 + 2.0 * l1 * l2 + 3.0 * l1 * l1) / 8.0;
            ang * ((1.0 + l1 * l1) * (1.0 + l2 * l2)).powf(-4.5)
        },
        f64::NEG_INFINITY,
        60,
    )
}

/// Majorant integral for the `P` side at `n = 2, d = 1`, `(ν, μ) = (4, −1)` on
/// the positive-definite orbit: integrand `|bd(z, e₁)| det(1 + z²)^{−5/2}`.
pub fn p_bound_n2_oracle() -> f64 {
    integrate_sym2(
        |l1, l2| {
            PI * (l1 + l2) / 2.0 * ((1.0 + l1 * l1) * (1.0 + l2 * l2)).powf(-2.5)
        },
        0.0,
        60,
    )
}

/// Uniform average over the unit circle by the trapezoid rule (spectrally
/// accurate for smooth periodic integrands).
pub fn circle_average<F: Fn(f64, f64) -> f64>(f: F, points: usize) -> f64 {
    let sum: f64 = (0..points)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / points as f64;
            f(t.cos(), t.sin())
        })
        .sum();
    sum / points as f64
}

/// `𝒬F(z)` at `n = 2, d = 1` for `F(y) = |y₁|^m |y|^{−(μ+m)}` and the kernel
/// `|det z|^{α−β} |yᵀ adj(z) y|^β` (the bordered determinant of `(z, y)` is
/// `−yᵀ adj(z) y`).
pub fn q_operator_circle(z: &SymmetricMatrix, nu: f64, mu: f64, m: f64, points: usize) -> f64 {
    let alpha = -(nu + 1.0) / 2.0;
    let beta = (mu - 2.0) / 2.0;
    let zm = z.as_matrix();
    let det = zm[(0, 0)] * zm[(1, 1)] - zm[(0, 1)] * zm[(1, 0)];
    circle_average(
        |c, s| {
            let adj_form = zm[(1, 1)] * c * c - 2.0 * zm[(0, 1)] * c * s + zm[(0, 0)] * s * s;
            c.abs().powf(m) * det.abs().powf(alpha - beta) * adj_form.abs().powf(beta)
        },
        points,
    )
}

/// `𝒫f(e₁)` at `n = 2, d = 1`, `(ν, μ) = (4, −1)` for `f = exp(−tr z²)` on the
/// positive-definite orbit: `∫ f(z) |bd(z, e₁)|^{1/2} dz` in eigen-coordinates.
pub fn p_operator_gaussian_n2_oracle() -> f64 {
    let psi = gl_nodes(0.0, PI, 4);
    integrate_sym2(
        |l1, l2| {
            let ang: f64 = psi
                .iter()
                .map(|&(p, w)| {
                    let (c, s) = (p.cos(), p.sin());
                    w * (l2 * c * c + l1 * s * s).sqrt()
                })
                .sum();
            ang * (-(l1 * l1 + l2 * l2)).exp()
        },
        0.0,
        30,
    )
}
