//! Minimal residual iteration (GMRES(1)) and restarted Anderson acceleration
//! with window one, together with the spectral machinery that predicts their
//! asymptotic root-convergence factors.
//!
//! Module map:
//!
//! * [`linalg`]: dense vectors/matrices, the step length `α(v)` and the
//!   one-step residual map `Φ(v)`.
//! * [`spectral`]: grouped symmetric eigendecomposition (cyclic Jacobi) and
//!   real Schur blocks of skew-symmetric matrices.
//! * [`solvers`]: GMRES(1), rAA(1) and the plain stationary iteration, with
//!   full iteration traces.
//! * [`theory`]: closed-form convergence factors and constructors/verifiers
//!   for the eigenpairs of the vector-dependent maps `𝓘₂`, `Π`, `Ψ`, `Υ`.
//! * [`exact`]: rational-arithmetic checks of the rAA(1) counterexamples.
//! * [`experiments`]: seeded ensembles, structured runs and CSV output.

pub mod error;
pub mod exact;
pub mod experiments;
pub mod linalg;
pub mod solvers;
pub mod spectral;
pub mod theory;

pub use error::{Error, Result};
pub use linalg::{alpha, phi_map, DenseMatrix, DenseVector};
