//! Instantaneous WKB reflection and transmission coefficients for
//! one-dimensional scattering potentials.

pub mod commands;
pub mod config;
pub mod error;
pub mod format;
pub mod iwkb;
pub mod numerics;
pub mod oracle;
pub mod piecewise;
pub mod potential;
pub mod wkb;

pub use error::{Error, ErrorKind, Result};
