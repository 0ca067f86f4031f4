//! Spectral toolkit for 3D incompressible Navier-Stokes on the periodic box
//! in Gevrey-weighted Fourier ℓ¹ spaces.
//!
//! The crate computes the `Z^ρ_{a,σ}` norm family, builds local mild
//! solutions by Picard iteration of the Duhamel map, marches solutions in
//! time with an exponential integrator while monitoring a priori bounds, and
//! checks the product and Duhamel estimates as exact lattice inequalities.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evolve;
pub mod field;
pub mod fixedpoint;
pub mod lattice;
pub mod nonlinear;
pub mod norms;
pub mod semigroup;
pub mod snapshot;
mod transform;
pub mod verify;

pub use error::{Error, Result};
pub use field::{
    divergence_residual, enforce_hermitian, leray_project, random_divfree_field, random_scalar_field,
    ScalarField, SpectralVectorField,
};
pub use lattice::{build_lattice, FrequencyLattice};
pub use nonlinear::{bilinear_b, convolve_direct, convolve_fast, ConvolutionMethod, TensorField};
pub use norms::{gevrey_weight, lemma4_constant, z_norm, GevreyParams};
pub use evolve::{simulate, SimConfig, Stepper, TimeSeries};
pub use fixedpoint::{choose_parameters, picard_solve, ContractionCondition, PicardParams, Trajectory};
pub use verify::MarginReport;
