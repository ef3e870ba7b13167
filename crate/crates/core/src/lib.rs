//! Pseudospectral simulation of penalized biharmonic wave maps from a
//! periodic domain into the unit sphere `S^l ⊂ R^{l+1}`.
//!
//! The constrained flow is approximated by the unconstrained equation
//! `u_tt + Δ²u + ε⁻¹ ∇F(u) = 0` with a Ginzburg–Landau type penalty `F`.

pub mod config;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod field;
pub mod initial;
pub mod snapshot;
pub mod spectral;
pub mod sphere;

pub use config::SimConfig;
pub use dynamics::{IntegratorConfig, Scheme, State, Variant};
pub use error::{Error, Result};
pub use field::{Field, GridSpec, ScalarField};
pub use spectral::SpectralWorkspace;
pub use sphere::PenaltyParams;
