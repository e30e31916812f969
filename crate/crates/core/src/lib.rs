//! Spectral-Galerkin laboratory for the stochastic heat equation
//!
//! ```text
//! dX = A X dt + b(X) dt + (-A)^θ F(X) dt + σ(X) dW,   X(0) = x,
//! ```
//!
//! on `(0, 1)` with Dirichlet boundary, where `A` is the Dirichlet Laplacian
//! (or minus the bilaplacian), `W` a cylindrical Wiener process and the
//! coefficients are Nemytskii maps that are merely Hölder continuous.
//!
//! The crate is organised bottom-up:
//!
//! * [`spectral`]: the diagonal operator algebra (eigenvalues, semigroup,
//!   fractional powers) and the orthonormal sine transform between modal
//!   coefficients and nodal values.
//! * [`noise`]: counter-based, reproducible Wiener increments and exact
//!   Ornstein-Uhlenbeck convolution samples.
//! * [`coefficients`]: the catalogue of scalar coefficient functions,
//!   their mollification and the sup-scan estimators (uniform gap, Hölder
//!   constant, dissipativity constant).
//! * [`integrator`]: exponential-Euler time stepping of the mild formulation,
//!   including the feedback-controlled partner used by the coupling.
//! * [`coupling`]: exponent selection, the capped distance `d_{N,γ}` and
//!   the relative entropy / total variation bookkeeping.
//! * [`statistics`]: exact-assignment Wasserstein distances, bootstrap
//!   standard errors, regression fits and the Lyapunov drift fit.
//! * [`experiments`]: seeded recipes producing [`experiments::ExperimentReport`]s.
//!
//! Monte Carlo batches fan out over paths with rayon when the `parallel`
//! feature is enabled (the default) and fall back to a sequential loop
//! otherwise. Every random number is a pure function of
//! `(seed, path, label, step)`, so results do not depend on the number of
//! worker threads.

// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coefficients;
pub mod coupling;
mod error;
pub mod experiments;
pub mod integrator;
pub mod noise;
pub mod par;
pub mod reaction_diffusion;
pub mod spectral;
pub mod statistics;

pub use error::{Error, Result};
pub use spectral::{Field, SpectralGrid, SpectrumKind};
