//! Adjoint-POD reduced-order models for parabolic inverse source and
//! backward problems on the unit-free square `[0, pi]^2`.
//!
//! The pipeline is: full-order P1 finite elements ([`assembly`],
//! [`timestep`]), an adjoint trajectory driven by the measurement
//! ([`reduced`]), a POD basis from its snapshots ([`pod`]), and a
//! Tikhonov inversion restricted to that basis ([`inverse`]).
//! [`theory`] checks the span and projection-error statements against
//! the analytic eigenexpansion in [`spectral`].

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod config;
pub mod error;
pub mod experiment;
pub mod field;
pub mod inverse;
pub mod mesh;
pub mod pod;
pub mod reduced;
pub mod shapes;
pub mod spectral;
pub mod theory;
pub mod timestep;

pub use error::{Error, Result};
