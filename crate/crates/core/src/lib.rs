//! Pseudo-spectral laboratory for the Cahn–Hilliard equation with shear flow
//! on the torus [0, 2π)².
//!
//! Layers, bottom up: [`spectral`] (grids, fields, FFTs), [`operators`]
//! (the tendency and shear profiles), [`integrators`] (exponential RK4 with
//! step control), [`semigroup`] (linear decay rates and mixing),
//! [`experiments`] (scenarios, sweeps, the bootstrap monitor and threshold
//! reports). [`config`] reads the TOML run files.
//!
//! The guide in `book/` is compiled as doc-tests.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod integrators;
pub mod io;
pub mod operators;
pub mod semigroup;
pub mod spectral;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/grids-and-fields.md")]
    mod grids_and_fields {}
    #[doc = include_str!("../../../book/src/the-equation.md")]
    mod the_equation {}
    #[doc = include_str!("../../../book/src/time-stepping.md")]
    mod time_stepping {}
    #[doc = include_str!("../../../book/src/enhanced-dissipation.md")]
    mod enhanced_dissipation {}
    #[doc = include_str!("../../../book/src/bootstrap-and-thresholds.md")]
    mod bootstrap_and_thresholds {}
    #[doc = include_str!("../../../book/src/running-experiments.md")]
    mod running_experiments {}
}
