//! Exponents of the `l_alpha` losses and their Hoelder conjugates.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::linalg::{norm1, norm2, norm_inf};

/// An exponent `q` in `[1, inf]` of an `l_q` norm.
///
/// The three polyhedral/quadratic cases get dedicated variants so that the
/// exact paths can match on them; every other value lives in `Other`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NormIndex {
    One,
    Two,
    Inf,
    /// A finite exponent in `(1, inf)` other than 2.
    Other(f64),
}

impl NormIndex {
    /// Canonicalizes a raw exponent. Returns `None` outside `[1, inf]`.
    pub fn from_value(q: f64) -> Option<NormIndex> {
        if q.is_nan() || q < 1.0 {
            None
        } else if q == 1.0 {
            Some(NormIndex::One)
        } else if q == 2.0 {
            Some(NormIndex::Two)
        } else if q.is_infinite() {
            Some(NormIndex::Inf)
        } else {
            Some(NormIndex::Other(q))
        }
    }

    /// Builds the exponent from its reciprocal `1/q` in `[0, 1]`.
    pub fn from_inverse(inv: f64) -> Option<NormIndex> {
        if !(0.0..=1.0).contains(&inv) {
            return None;
        }
        if inv == 0.0 {
            Some(NormIndex::Inf)
        } else if inv == 1.0 {
            Some(NormIndex::One)
        } else if (inv - 0.5).abs() < 1e-12 {
            Some(NormIndex::Two)
        } else {
            NormIndex::from_value(1.0 / inv)
        }
    }

    pub fn value(self) -> f64 {
        match self {
            NormIndex::One => 1.0,
            NormIndex::Two => 2.0,
            NormIndex::Inf => f64::INFINITY,
            NormIndex::Other(q) => q,
        }
    }

    /// `1/q`, with `1/inf = 0`.
    pub fn inverse(self) -> f64 {
        match self {
            NormIndex::One => 1.0,
            NormIndex::Two => 0.5,
            NormIndex::Inf => 0.0,
            NormIndex::Other(q) => 1.0 / q,
        }
    }

    /// The Hoelder conjugate `r` with `1/q + 1/r = 1`.
    pub fn conjugate(self) -> NormIndex {
        match self {
            NormIndex::One => NormIndex::Inf,
            NormIndex::Two => NormIndex::Two,
            NormIndex::Inf => NormIndex::One,
            NormIndex::Other(q) => NormIndex::from_value(q / (q - 1.0)).unwrap_or(NormIndex::Inf),
        }
    }

    /// True for the cases solved exactly by linear programming.
    pub fn is_polyhedral(self) -> bool {
        matches!(self, NormIndex::One | NormIndex::Inf)
    }

    pub fn norm(self, v: &[f64]) -> f64 {
        match self {
            NormIndex::One => norm1(v),
            NormIndex::Two => norm2(v),
            NormIndex::Inf => norm_inf(v),
            NormIndex::Other(q) => {
                let scale = norm_inf(v);
                if scale == 0.0 {
                    return 0.0;
                }
                scale * v.iter().map(|x| (x.abs() / scale).powf(q)).sum::<f64>().powf(1.0 / q)
            }
        }
    }
}

impl fmt::Display for NormIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormIndex::One => write!(f, "1"),
            NormIndex::Two => write!(f, "2"),
            NormIndex::Inf => write!(f, "inf"),
            NormIndex::Other(q) => write!(f, "{q}"),
        }
    }
}

impl FromStr for NormIndex {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_ascii_lowercase();
        if t == "inf" || t == "infinity" || t == "∞" {
            return Ok(NormIndex::Inf);
        }
        let q: f64 = t.parse().map_err(|_| format!("invalid norm exponent '{s}'"))?;
        NormIndex::from_value(q).ok_or_else(|| format!("norm exponent must lie in [1, inf], got '{s}'"))
    }
}

impl Serialize for NormIndex {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for NormIndex {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conjugate_pairs() {
        assert_eq!(NormIndex::Inf.conjugate(), NormIndex::One);
        assert_eq!(NormIndex::One.conjugate(), NormIndex::Inf);
        assert_eq!(NormIndex::Two.conjugate(), NormIndex::Two);
        let NormIndex::Other(r) = NormIndex::Other(3.0).conjugate() else {
            panic!("expected finite conjugate")
        };
        assert!((r - 1.5).abs() < 1e-15);
    }

    #[test]
    fn parse_and_inverse() {
        assert_eq!("inf".parse::<NormIndex>().unwrap(), NormIndex::Inf);
        assert_eq!("2".parse::<NormIndex>().unwrap(), NormIndex::Two);
        assert!("0.5".parse::<NormIndex>().is_err());
        assert_eq!(NormIndex::from_inverse(0.0), Some(NormIndex::Inf));
        assert_eq!(NormIndex::from_inverse(0.5), Some(NormIndex::Two));
        assert_eq!(NormIndex::from_inverse(1.0), Some(NormIndex::One));
        assert!(NormIndex::from_inverse(1.5).is_none());
    }

    #[test]
    fn norms_agree_with_definitions() {
        let v = [3.0, -4.0];
        assert_eq!(NormIndex::One.norm(&v), 7.0);
        assert_eq!(NormIndex::Two.norm(&v), 5.0);
        assert_eq!(NormIndex::Inf.norm(&v), 4.0);
        let q3 = NormIndex::Other(3.0).norm(&v);
        assert!((q3 - (27.0f64 + 64.0).powf(1.0 / 3.0)).abs() < 1e-12);
    }
}
