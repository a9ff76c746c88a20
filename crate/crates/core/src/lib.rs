//! Grid laboratory for generalized nonlocal perimeters
//!
//! `Per_K(E) = ∫_E ∫_{R^N \ E} K(x - y) dx dy`
//!
//! The crate evaluates this energy on uniform lattices for a library of
//! interaction kernels, computes isoperimetric profiles through symmetric
//! decreasing rearrangement, solves the relaxed volume-constrained problem
//! by constrained ascent on the interaction quadratic form, and audits
//! candidate minimizers against first- and second-variation conditions.
//!
//! Modules map onto the pipeline:
//!
//! * [`grid`]: lattices, fields, FFT convolution and its brute-force oracle.
//! * [`kernels`]: kernel specs, cell-pair tabulation, integrability and
//!   positivity audits, kernel rearrangement.
//! * [`perimeter`]: `Per_K`, the relaxed energy, `J_K`, coarea and
//!   submodularity identities.
//! * [`rearrange`]: set rearrangement, discrete balls, the profile `g(m)`.
//! * [`solver`]: capped-simplex projection, bathtub maximizer, projected
//!   gradient and Frank-Wolfe ascent, multi-start minimization.
//! * [`certify`]: potential audits, optimality certificates, Poincaré checks.
//! * [`config`] and [`run`]: the INI-style run configuration and the CLI driver.

pub mod certify;
pub mod checks;
pub mod config;
pub mod error;
pub mod grid;
pub mod kernels;
pub mod perimeter;
pub mod rearrange;
pub mod run;
pub mod solver;
mod sum;

pub use error::{Error, Result};
pub use grid::{Field, GridSpec, Mode};
pub use kernels::{KernelSpec, KernelTable};
