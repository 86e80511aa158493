//! Classified results of norm accumulations.
//!
//! A norm is only useful to the renormalization protocols when it is a
//! positive normal float. Everything else collapses into one of two states:
//! `Overflow` (the accumulation left the representable range or produced NaN)
//! or `Underflow` (zero, subnormal, or, for the entrywise sum, non-positive).

use serde::{Deserialize, Serialize};

/// Smallest value treated as non-zero. Subnormals count as zero.
pub const UNDERFLOW_THRESHOLD: f64 = f64::MIN_POSITIVE;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum NormValue {
    /// A positive normal float.
    Finite {
        value: f64,
    },
    Overflow,
    /// `negative_total` is set when an entrywise sum came out negative or
    /// cancelled to zero against negative entries. Only the linear method
    /// produces it.
    Underflow {
        negative_total: bool,
    },
}

impl NormValue {
    /// Classifies an accumulated quantity that is non-negative by construction
    /// (a sum of squares, a trace of a Gram matrix).
    pub fn from_square_sum(acc: f64) -> Self {
        if !acc.is_finite() {
            NormValue::Overflow
        } else if acc < UNDERFLOW_THRESHOLD {
            NormValue::Underflow {
                negative_total: false,
            }
        } else {
            NormValue::Finite { value: acc }
        }
    }

    /// Classifies a plain entrywise sum. `saw_negative` reports whether any
    /// summand was negative, so that cancellation to zero is flagged too.
    pub fn from_entry_sum(acc: f64, saw_negative: bool) -> Self {
        if !acc.is_finite() {
            NormValue::Overflow
        } else if acc < UNDERFLOW_THRESHOLD {
            NormValue::Underflow {
                negative_total: acc < 0.0 || saw_negative,
            }
        } else {
            NormValue::Finite { value: acc }
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            NormValue::Finite { value } => Some(value),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, NormValue::Finite { .. })
    }

    pub fn is_overflow(self) -> bool {
        matches!(self, NormValue::Overflow)
    }

    pub fn is_underflow(self) -> bool {
        matches!(self, NormValue::Underflow { .. })
    }

    pub fn negative_total(self) -> bool {
        matches!(
            self,
            NormValue::Underflow {
                negative_total: true
            }
        )
    }

    /// Natural log of the value, with `+inf` for overflow and `-inf` for
    /// underflow.
    pub fn ln(self) -> f64 {
        match self {
            NormValue::Finite { value } => value.ln(),
            NormValue::Overflow => f64::INFINITY,
            NormValue::Underflow { .. } => f64::NEG_INFINITY,
        }
    }

    /// Square root of a finite value; the states pass through unchanged.
    pub fn sqrt(self) -> Self {
        match self {
            NormValue::Finite { value } => NormValue::Finite {
                value: value.sqrt(),
            },
            other => other,
        }
    }
}

impl std::fmt::Display for NormValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NormValue::Finite { value } => write!(f, "{value:e}"),
            NormValue::Overflow => f.write_str("overflow"),
            NormValue::Underflow {
                negative_total: false,
            } => f.write_str("underflow"),
            NormValue::Underflow {
                negative_total: true,
            } => f.write_str("underflow (negative total)"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_sum_boundaries() {
        assert_eq!(
            NormValue::from_square_sum(25.0),
            NormValue::Finite { value: 25.0 }
        );
        assert!(NormValue::from_square_sum(f64::INFINITY).is_overflow());
        assert!(NormValue::from_square_sum(f64::NAN).is_overflow());
        assert!(NormValue::from_square_sum(0.0).is_underflow());
        // largest subnormal is still "zero"
        let sub = f64::MIN_POSITIVE - f64::from_bits(1);
        assert!(NormValue::from_square_sum(sub).is_underflow());
        assert!(NormValue::from_square_sum(f64::MIN_POSITIVE).is_finite());
        assert!(NormValue::from_square_sum(f64::MAX).is_finite());
    }

    #[test]
    fn entry_sum_flags_negative_totals() {
        let v = NormValue::from_entry_sum(-3.0, true);
        assert!(v.is_underflow());
        assert!(v.negative_total());
        assert!(NormValue::from_entry_sum(0.0, true).negative_total());
        assert!(!NormValue::from_entry_sum(0.0, false).negative_total());
        assert!(NormValue::from_entry_sum(f64::NEG_INFINITY, true).is_overflow());
        assert!(!NormValue::from_entry_sum(2.0, true).negative_total());
    }
}
