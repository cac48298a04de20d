//! Spectral laboratory for hyperbolic nonlinear Schrödinger equations on
//! anisotropic tori `T^d`.
//!
//! The crate is organised bottom-up:
//!
//! * [`lattice`]: signatures, the signed quadratic symbol, admissibility
//!   arithmetic, cutoff profiles and frequency projections.
//! * [`field`]: spectral fields, spatial sampling and space-time norms.
//! * [`propagator`]: the exact free flow, the hyperbolic Galilean boost and
//!   Duhamel quadrature.
//! * [`weyl`]: the truncated kernel as a product of quadratic Weyl sums,
//!   Dirichlet approximation and major-arc analysis.
//! * [`strichartz`]: scaling sweeps and multilinear ratio experiments.
//! * [`nls`]: split-step and Picard solvers with conservation diagnostics.
//!
//! Every data-parallel loop goes through [`Execution`], which runs on rayon
//! when the `parallel` feature is enabled and sequentially otherwise. Both
//! modes produce bit-identical results.

pub mod error;
pub mod exec;
pub mod field;
mod fft;
pub mod lattice;
pub mod nls;
pub mod propagator;
pub mod seed;
pub mod stats;
pub mod strichartz;
pub mod weyl;

pub use error::{LabError, Result};
pub use exec::Execution;
pub use field::{SpectralField, TensorField};
pub use lattice::{CutoffProfile, Signature, Weight};

pub use num_complex::Complex64;
