use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_RHO0: f64 = 1e-3;

fn default_rho0() -> f64 {
    DEFAULT_RHO0
}

/// Power-law path gain `c_dec * max(rho, rho0)^(-alpha)`.
///
/// `rho0 = 0` gives the unclamped law, which is singular at zero distance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttenuationSpec {
    pub alpha: f64,
    pub c_dec: f64,
    #[serde(default = "default_rho0")]
    pub rho0: f64,
}

impl Default for AttenuationSpec {
    fn default() -> Self {
        AttenuationSpec {
            alpha: 2.0,
            c_dec: 1.0,
            rho0: DEFAULT_RHO0,
        }
    }
}

impl AttenuationSpec {
    pub fn validate(&self, path: &str) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::config(format!("{path}.alpha"), "must be finite and positive"));
        }
        if !(self.c_dec.is_finite() && self.c_dec > 0.0) {
            return Err(Error::config(format!("{path}.c_dec"), "must be finite and positive"));
        }
        if !(self.rho0.is_finite() && self.rho0 >= 0.0) {
            return Err(Error::config(format!("{path}.rho0"), "must be finite and nonnegative"));
        }
        Ok(())
    }

    /// Gain at distance `rho`. Returns `None` at the singularity `rho == 0`
    /// with no cutoff.
    pub fn try_gain(&self, rho: f64) -> Option<f64> {
        let r = rho.max(self.rho0);
        if r <= 0.0 {
            return None;
        }
        Some(self.c_dec * r.powf(-self.alpha))
    }

    pub fn gain(&self, rho: f64) -> Result<f64> {
        if !(rho >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "distance must be nonnegative, got {rho}"
            )));
        }
        self.try_gain(rho)
            .ok_or_else(|| Error::InvalidArgument("zero distance with rho0 = 0 is singular".into()))
    }
}
