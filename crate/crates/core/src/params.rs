use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("threshold p = {0} must lie strictly between 0 and 1")]
    Threshold(f64),
    #[error("fitness bound y = {0} must lie in [0, 1]")]
    Bound(f64),
    #[error("{0}")]
    Invalid(String),
}

/// Avalanche threshold `p`, strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Threshold(f64);

impl Threshold {
    pub fn new(p: f64) -> Result<Self, ParamError> {
        if p > 0.0 && p < 1.0 {
            Ok(Threshold(p))
        } else {
            Err(ParamError::Threshold(p))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Threshold {
    type Error = ParamError;
    fn try_from(p: f64) -> Result<Self, Self::Error> {
        Threshold::new(p)
    }
}

impl From<Threshold> for f64 {
    fn from(p: Threshold) -> f64 {
        p.0
    }
}

/// Parameter `y` of the uniform distribution on `(y, 1)`; `y = 1` is the
/// point mass at 1.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct FitnessBound(f64);

impl FitnessBound {
    pub const ZERO: FitnessBound = FitnessBound(0.0);
    pub const ONE: FitnessBound = FitnessBound(1.0);

    pub fn new(y: f64) -> Result<Self, ParamError> {
        if (0.0..=1.0).contains(&y) {
            Ok(FitnessBound(y))
        } else {
            Err(ParamError::Bound(y))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    /// Fitness realized from a uniform variate `u`.
    #[inline]
    pub fn realize(self, u: f64) -> f64 {
        self.0 + (1.0 - self.0) * u
    }

    /// Law after conditioning on the fitness exceeding `m`.
    #[inline]
    pub fn conditioned_above(self, m: f64) -> FitnessBound {
        FitnessBound(self.0.max(m))
    }

    /// The uniform that realizes fitness `m` under this bound: `(m - y) / (1 - y)`.
    #[inline]
    pub fn uniform_for(self, m: f64) -> f64 {
        (m - self.0) / (1.0 - self.0)
    }
}

/// Range and step limits standing in for "the avalanche never ends".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caps {
    pub range: usize,
    pub steps: u64,
}

impl Caps {
    pub fn new(range: usize, steps: u64) -> Result<Self, ParamError> {
        if range == 0 || steps == 0 {
            return Err(ParamError::Invalid("caps must be positive".into()));
        }
        Ok(Caps { range, steps })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_bounds() {
        assert!(Threshold::new(0.0).is_err());
        assert!(Threshold::new(1.0).is_err());
        assert!(Threshold::new(f64::NAN).is_err());
        assert_eq!(Threshold::new(0.5).unwrap().get(), 0.5);
        assert!(serde_json::from_str::<Threshold>("1.5").is_err());
    }

    #[test]
    fn bound_helpers() {
        let y = FitnessBound::new(0.2).unwrap();
        assert!((y.uniform_for(0.5) - 3.0 / 8.0).abs() < 1e-15);
        assert!((y.realize(3.0 / 8.0) - 0.5).abs() < 1e-15);
        assert_eq!(y.conditioned_above(0.1), y);
        assert_eq!(y.conditioned_above(0.7).get(), 0.7);
        assert!(FitnessBound::new(1.01).is_err());
        assert_eq!(FitnessBound::ONE.realize(0.3), 1.0);
    }
}
