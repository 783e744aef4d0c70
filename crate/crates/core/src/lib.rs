//! Weighted Fekete configurations and the objects that govern their spacing.
//!
//! Conventions used throughout the crate:
//!
//! * `Δ` is one quarter of the standard Laplacian, so `Δ|ζ|² = 1`.
//! * `dA = d²ζ / π` is area measure normalized so the unit disk has mass one.
//! * Planar vectors (gradients) are encoded as complex numbers `x + iy`.
//!
//! The crate is organized bottom-up: [`potential`] and [`quadrature`] are the
//! primitives, [`equilibrium`] builds droplets and equilibrium measures,
//! [`fekete`] minimizes the discrete energy, [`kernels`] builds reproducing
//! kernels of weighted polynomial spaces, [`limits`] holds the universal
//! limiting kernels, and [`density`] ties everything together into
//! Beurling–Landau density diagnostics.

// `!(x > 0.0)` is the intended form: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod density;
pub mod equilibrium;
mod error;
pub mod fekete;
pub mod kernels;
pub mod limits;
pub mod potential;
pub mod quadrature;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub use equilibrium::{Droplet, EquilibriumMeasure};
pub use fekete::{Configuration, SolverConfig, SolverReport};
pub use kernels::{KernelModel, RescaleFrame, WeightedBasis};
pub use potential::{Potential, PotentialSpec};
pub use quadrature::{Grid2D, Quadrature1D};

/// `1/√e`, the separation constant for Fekete families.
pub const SEPARATION_BOUND: f64 = 0.606_530_659_712_633_4;
