//! Orbitally stable motion primitives.
//!
//! A motion policy is the pullback of supercritical-Hopf latent dynamics
//! through a learned, conditioned bijective encoder:
//!
//! ```text
//! ẋ = f_s(x) · J_Ψ(x; z)⁻¹ · f_y(Ψ(x; z))
//! ```
//!
//! The crate is split along the pipeline: [`latent`] dynamics and their
//! stability certificates, the coupling-flow [`encoder`], the composed
//! [`policy`] with online shaping, [`training`] losses and optimizer,
//! [`data`] ingestion and synthetic oracles, [`eval`] metrics and the
//! convergence protocol, and multi-policy phase [`sync`].

pub mod data;
pub mod encoder;
mod error;
pub mod eval;
pub mod latent;
pub(crate) mod linalg;
pub mod mlp;
pub mod policy;
pub mod sync;
pub mod training;

pub use error::{Error, Result};

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle(angle: f64) -> f64 {
    use std::f64::consts::PI;
    let wrapped = (angle + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if wrapped >= PI {
        wrapped - 2.0 * PI
    } else {
        wrapped
    }
}

pub(crate) fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
