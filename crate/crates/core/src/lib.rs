//! Airborne optical sectioning over procedurally generated forests: forest
//! synthesis, ray-cast binary aerial imaging, synthetic-aperture integration
//! and parameter sweeps.

// `!(x > 0.0)` style guards reject NaN together with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod forest;
pub mod geometry;
pub mod imaging;
pub mod integration;
pub mod oracle;
pub mod pgm;
pub mod sampling;
pub mod scene;
pub mod sweep;

pub use error::{Error, Result};

/// Vector types used throughout the public API.
pub use glam;
