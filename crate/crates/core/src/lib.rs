//! Desk-scale simulation and verification of sub-diffusion in Hilbert space.
//!
//! The driving noise throughout is the time-changed Q-Wiener process
//!
//! ```text
//! W_{E_t} = Σ_j λ_j^{1/2} w_j(E_t) f_j,
//! ```
//!
//! where `E_t` is the inverse of a β-stable subordinator and the `w_j` are
//! independent standard Brownian motions. Everything lives in the eigenbasis
//! of the covariance operator `Q`, truncated at a finite level, so a path is
//! just a matrix of coordinate values and all operator algebra is dense
//! matrix algebra on small dimensions.
//!
//! Module map:
//! - [`subordinator`] — stable increments, inverse paths, moments of `E_t`,
//!   Mittag-Leffler evaluation, Laplace subordination checks.
//! - [`spectral`] — covariance bases, Q-Wiener and time-changed Q-Wiener
//!   paths, quadratic variation.
//! - [`integrator`] — Itô integrals against `W_{E_t}`, the isometry, both
//!   change-of-variable formulas, and the Itô-formula residual.
//! - [`sde`] — Euler-Maruyama on either clock, the duality check, and mild
//!   solutions via the semigroup.
//! - [`fpk`] — Caputo derivatives, the Kolmogorov operator on cylindrical
//!   test functionals, fractional Fokker-Planck residuals, and the
//!   subordination identity.
//! - [`walsh`] — finite-dimensional covariance-kernel space, the operator
//!   `J`, and the equality of the martingale-measure, cylindrical, and
//!   Q-Wiener integrals.

pub mod error;
pub mod fpk;
pub mod grid;
pub mod integrator;
pub mod rng;
pub mod sde;
pub mod spectral;
pub mod stats;
pub mod subordinator;
pub mod walsh;

pub use error::{Error, Result};
