use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mass-critical power of the nonlinearity.
pub const MASS_CRITICAL_P: f64 = 14.0 / 3.0;

/// Nonlinearity exponent `p` and standing-wave frequency `omega`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamSpec", into = "ParamSpec")]
pub struct ModelParams {
    p: f64,
    omega: f64,
}

#[derive(Serialize, Deserialize)]
struct ParamSpec {
    p: f64,
    #[serde(default = "one")]
    omega: f64,
}

fn one() -> f64 {
    1.0
}

impl TryFrom<ParamSpec> for ModelParams {
    type Error = Error;
    fn try_from(s: ParamSpec) -> Result<Self> {
        ModelParams::new(s.p, s.omega)
    }
}

impl From<ModelParams> for ParamSpec {
    fn from(m: ModelParams) -> Self {
        ParamSpec {
            p: m.p,
            omega: m.omega,
        }
    }
}

impl ModelParams {
    pub fn new(p: f64, omega: f64) -> Result<Self> {
        if !(p.is_finite() && p > 2.0) {
            return Err(Error::InvalidParams(format!("p = {p} must exceed 2")));
        }
        if !omega.is_finite() {
            return Err(Error::InvalidParams(format!("omega = {omega} is not finite")));
        }
        Ok(Self { p, omega })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn with_omega(&self, omega: f64) -> Result<Self> {
        Self::new(self.p, omega)
    }

    /// Nontrivial standing waves exist only for positive frequency.
    pub fn require_positive_omega(&self) -> Result<()> {
        if self.omega > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!(
                "omega = {} must be positive for standing waves",
                self.omega
            )))
        }
    }

    /// Integer exponents in `{3, 4, 5, 6}` get 2/3-rule dealiasing by default.
    pub fn dealias_by_default(&self) -> bool {
        [3.0, 4.0, 5.0, 6.0].contains(&self.p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates() {
        assert!(ModelParams::new(2.0, 1.0).is_err());
        assert!(ModelParams::new(f64::NAN, 1.0).is_err());
        assert!(ModelParams::new(3.0, f64::INFINITY).is_err());
        let m = ModelParams::new(3.0, -1.0).unwrap();
        assert!(m.require_positive_omega().is_err());
        assert!(ModelParams::new(3.0, 0.5).unwrap().require_positive_omega().is_ok());
    }

    #[test]
    fn dealias_default() {
        assert!(ModelParams::new(4.0, 1.0).unwrap().dealias_by_default());
        assert!(!ModelParams::new(14.0 / 3.0, 1.0).unwrap().dealias_by_default());
    }

    #[test]
    fn omega_defaults_to_one() {
        let m: ModelParams = serde_json::from_str(r#"{"p": 4}"#).unwrap();
        assert_eq!(m.omega(), 1.0);
        assert!(serde_json::from_str::<ModelParams>(r#"{"p": 1.5}"#).is_err());
    }
}
