//! Numerical toolkit for the double flag variety `Sp(2n, R)/P_S × GL_n(R)/Q`:
//! symplectic group identities, orbit classification by signatures,
//! relative invariants and the kernel intertwiners between degenerate
//! principal series.

// `!(x > t)` is used deliberately so that NaN fails the test.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod double_flag;
pub mod error;
pub mod intertwiners;
pub mod invariants;
pub mod lagrangian;
pub mod mc;
pub mod numerics;
pub mod principal_series;
pub mod random;
pub mod symplectic;
pub mod verify;

pub use error::{Error, Result};
pub use numerics::{Signature, SymmetricMatrix, TolerancePolicy};
