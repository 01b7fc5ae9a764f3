//! Probability upper bounds carried in linear and natural-log form.
//!
//! Bounds in this crate routinely reach the 1e-18 range and products of many
//! small factors can go much lower, so every product is accumulated as a sum
//! of logarithms and only materialized as a linear value at the end.

use serde::{Deserialize, Serialize};

use crate::error::{CertError, Result};

/// A probability upper bound in `[0, 1]`.
///
/// `log_value` is the natural log of `value`; the zero bound is represented
/// by `log_value == -inf` in memory and by `null` in serialized form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProbBoundRepr", into = "ProbBoundRepr")]
pub struct ProbBound {
    value: f64,
    log_value: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProbBoundRepr {
    value: f64,
    log_value: Option<f64>,
}

impl From<ProbBound> for ProbBoundRepr {
    fn from(b: ProbBound) -> Self {
        ProbBoundRepr {
            value: b.value,
            log_value: b.log_value(),
        }
    }
}

impl TryFrom<ProbBoundRepr> for ProbBound {
    type Error = CertError;

    fn try_from(r: ProbBoundRepr) -> Result<Self> {
        if !(0.0..=1.0).contains(&r.value) {
            return Err(CertError::validation(format!(
                "bound value {} outside [0, 1]",
                r.value
            )));
        }
        match r.log_value {
            None if r.value == 0.0 => Ok(ProbBound::ZERO),
            None => Err(CertError::validation("nonzero bound without log_value")),
            Some(l) if l.is_finite() && l <= 0.0 && consistent(r.value, l) => Ok(ProbBound {
                value: r.value,
                log_value: l,
            }),
            Some(l) => Err(CertError::validation(format!(
                "log_value {l} inconsistent with value {}",
                r.value
            ))),
        }
    }
}

fn consistent(value: f64, log_value: f64) -> bool {
    (log_value.exp() - value).abs() <= 1e-12 * value.max(f64::MIN_POSITIVE)
}

impl ProbBound {
    pub const ZERO: ProbBound = ProbBound {
        value: 0.0,
        log_value: f64::NEG_INFINITY,
    };

    pub const ONE: ProbBound = ProbBound {
        value: 1.0,
        log_value: 0.0,
    };

    /// Builds a bound from a linear value, clipping anything above 1.
    pub fn from_linear(value: f64) -> Result<Self> {
        if value.is_nan() || value < 0.0 {
            return Err(CertError::validation(format!(
                "probability bound {value} is not a nonnegative number"
            )));
        }
        if value >= 1.0 {
            return Ok(ProbBound::ONE);
        }
        if value == 0.0 {
            return Ok(ProbBound::ZERO);
        }
        Ok(ProbBound {
            value,
            log_value: value.ln(),
        })
    }

    /// Builds a bound from its natural log, clipping anything above 0.
    /// `-inf` yields the zero bound.
    pub fn from_log(log_value: f64) -> Result<Self> {
        if log_value.is_nan() {
            return Err(CertError::validation("log bound is NaN"));
        }
        if log_value >= 0.0 {
            return Ok(ProbBound::ONE);
        }
        if log_value == f64::NEG_INFINITY {
            return Ok(ProbBound::ZERO);
        }
        Ok(ProbBound {
            value: log_value.exp(),
            log_value,
        })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    /// Natural log of the bound; `None` for the zero bound.
    pub fn log_value(&self) -> Option<f64> {
        if self.is_zero() {
            None
        } else {
            Some(self.log_value)
        }
    }

    /// Natural log with `-inf` for zero, convenient for arithmetic.
    pub fn ln(&self) -> f64 {
        self.log_value
    }

    /// True only for the exact zero bound. A bound whose linear value
    /// underflows still carries a finite log and is not zero.
    pub fn is_zero(&self) -> bool {
        self.log_value == f64::NEG_INFINITY
    }
}

/// `min(1, prod_t scale_t * factor_t)` accumulated in log space.
///
/// A single term is passed through linearly so that a one-factor product
/// with unit scale is bit-identical to the factor itself.
pub(crate) fn scaled_product(terms: &[(f64, f64)]) -> Result<ProbBound> {
    if terms.iter().any(|&(c, p)| c == 0.0 || p == 0.0) {
        return Ok(ProbBound::ZERO);
    }
    if let [(c, p)] = terms {
        return ProbBound::from_linear(c * p);
    }
    let log_sum: f64 = terms.iter().map(|&(c, p)| c.ln() + p.ln()).sum();
    ProbBound::from_log(log_sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_has_no_log() {
        let z = ProbBound::from_linear(0.0).unwrap();
        assert!(z.is_zero());
        assert_eq!(z.log_value(), None);
        assert_eq!(ProbBound::from_log(f64::NEG_INFINITY).unwrap(), z);
    }

    #[test]
    fn clips_above_one() {
        assert_eq!(ProbBound::from_linear(3.5).unwrap(), ProbBound::ONE);
        assert_eq!(ProbBound::from_log(0.2).unwrap(), ProbBound::ONE);
    }

    #[test]
    fn rejects_negative_and_nan() {
        assert!(ProbBound::from_linear(-1e-9).is_err());
        assert!(ProbBound::from_linear(f64::NAN).is_err());
        assert!(ProbBound::from_log(f64::NAN).is_err());
    }

    #[test]
    fn tiny_products_do_not_underflow() {
        let terms = vec![(1.0, 1e-200); 3];
        let b = scaled_product(&terms).unwrap();
        assert!(!b.is_zero());
        assert!((b.ln() - 3.0 * (1e-200f64).ln()).abs() < 1e-9);
        let back: ProbBound = serde_json::from_str(&serde_json::to_string(&b).unwrap()).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn json_roundtrip_and_zero_is_null() {
        let b = ProbBound::from_linear(1.331e-18).unwrap();
        let s = serde_json::to_string(&b).unwrap();
        let back: ProbBound = serde_json::from_str(&s).unwrap();
        assert_eq!(b, back);

        let z = serde_json::to_string(&ProbBound::ZERO).unwrap();
        assert_eq!(z, r#"{"value":0.0,"log_value":null}"#);
        assert!(serde_json::from_str::<ProbBound>(r#"{"value":0.5,"log_value":null}"#).is_err());
    }
}
