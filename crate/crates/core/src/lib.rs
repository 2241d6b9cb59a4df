//! Vacuum particle creation of a conformally coupled massive scalar field in
//! homogeneous anisotropic (Bianchi I) backgrounds.
//!
//! * [`background`]: scale-factor models and per-mode geometry.
//! * [`kinetics`]: single-mode evolution in kinetic, Bogoliubov and
//!   oscillator form, with the maps between them.
//! * [`stress_tensor`]: momentum-space quadrature of the normally ordered
//!   energy-momentum tensor.
//! * [`cli`]: configuration, commands and tabular output.

// `!(x > 0.0)` is the validation idiom here: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod background;
pub mod cli;
pub mod error;
pub mod kinetics;
pub mod ode;
pub mod stress_tensor;

pub use error::{Error, Result};
