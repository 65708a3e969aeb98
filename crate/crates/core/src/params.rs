//! Physical parameters of the model.

use crate::error::{Error, Result};

/// Gravitational parameter of the smaller primary and rotation rate of the
/// synodic frame. Both are kept symbolic so that dimensional consistency of
/// every derived formula can be checked by scaling tests; the customary unit
/// system sets both to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Gravitational parameter mu (length^3 / time^2).
    pub mu: f64,
    /// Rotation rate omega (1 / time).
    pub omega: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams { mu: 1.0, omega: 1.0 }
    }
}

impl ModelParams {
    pub fn new(mu: f64, omega: f64) -> Result<Self> {
        if !(mu > 0.0) || !(omega > 0.0) {
            return Err(Error::InvalidParams { mu, omega });
        }
        Ok(ModelParams { mu, omega })
    }

    /// Radius of the gravitational sphere of influence, (mu / 3 omega^2)^(1/3).
    pub fn hill_radius(&self) -> f64 {
        (self.mu / (3.0 * self.omega * self.omega)).cbrt()
    }
}
