//! Random generators for group elements, frames and symmetric matrices.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::numerics::{orthonormalize_columns, SymmetricMatrix};
use crate::symplectic::SymplecticElement;

/// Seeded stream `stream` of the root `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with sign fix).
pub fn orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    orthonormalize_columns(&gaussian_matrix(n, n, rng))
}

/// `O₁ diag(σ) O₂` with `σᵢ ∈ [1/sqrt(c), sqrt(c)]`, so the condition number is at most `max_cond`.
pub fn well_conditioned_gl<R: Rng + ?Sized>(n: usize, max_cond: f64, rng: &mut R) -> DMatrix<f64> {
    let half = max_cond.max(1.0).sqrt().ln();
    let o1 = orthogonal(n, rng);
    let o2 = orthogonal(n, rng);
    let mut sigma = DMatrix::zeros(n, n);
    for i in 0..n {
        sigma[(i, i)] = rng.random_range(-half..=half).exp();
    }
    o1 * sigma * o2
}

/// Symmetric matrix with independent standard normal entries on and above the diagonal.
pub fn symmetric<R: Rng + ?Sized>(n: usize, rng: &mut R) -> SymmetricMatrix {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v: f64 = rng.sample(StandardNormal);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    SymmetricMatrix::symmetrize(m)
}

/// Invertible symmetric matrix `h I_{p,q} hᵀ` with `h` well conditioned.
pub fn symmetric_with_signature<R: Rng + ?Sized>(p: usize, q: usize, rng: &mut R) -> SymmetricMatrix {
    let h = well_conditioned_gl(p + q, 10.0, rng);
    SymmetricMatrix::i_pq(p, q)
        .congruence(&h)
        .expect("square congruence")
}

/// Haar-distributed unitary matrix (Mezzadri's QR recipe).
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<Complex64> {
    let g = DMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im)
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let rjj = r[(j, j)];
        let norm = rjj.norm();
        if norm > 0.0 {
            let phase = rjj / norm;
            for i in 0..n {
                q[(i, j)] *= phase;
            }
        }
    }
    q
}

/// Random symplectic element built as a product of Levi, unipotent and Weyl generators.
pub fn symplectic<R: Rng + ?Sized>(n: usize, factors: usize, rng: &mut R) -> SymplecticElement {
    let mut g = SymplecticElement::identity(n);
    for _ in 0..factors {
        let pick = rng.random_range(0..4u8);
        let next = match pick {
            0 => SymplecticElement::levi(&well_conditioned_gl(n, 4.0, rng)).expect("invertible"),
            1 => SymplecticElement::unipotent_upper(&symmetric(n, rng).scale(0.5)),
            2 => SymplecticElement::unipotent_lower(&symmetric(n, rng).scale(0.5)),
            _ => {
                let k = rng.random_range(0..=n);
                SymplecticElement::from(crate::symplectic::weyl_rep(n, k).expect("k in range"))
            }
        };
        g = g.mul(&next);
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{condition_number, max_abs};

    #[test]
    fn orthogonal_is_orthogonal() {
        let mut rng = stream_rng(7, 0);
        let o = orthogonal(4, &mut rng);
        assert!(max_abs(&(o.transpose() * &o - DMatrix::identity(4, 4))) < 1e-12);
    }

    #[test]
    fn gl_condition_is_bounded() {
        let mut rng = stream_rng(7, 1);
        for _ in 0..50 {
            let h = well_conditioned_gl(5, 1e3, &mut rng);
            assert!(condition_number(&h) <= 1e3 * (1.0 + 1e-9));
        }
    }

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = stream_rng(7, 2);
        let u = haar_unitary(3, &mut rng);
        let prod = u.adjoint() * &u;
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - Complex64::new(expect, 0.0)).norm() < 1e-12);
            }
        }
    }
}
