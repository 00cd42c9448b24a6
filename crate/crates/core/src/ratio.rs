//! Exact count ratios with one-decimal percentage rendering.

use std::fmt;

use serde::{Serialize, Serializer};

/// Tie-breaking rule used when a percentage lands exactly halfway between
/// two one-decimal values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rounding {
    HalfUp,
    HalfEven,
}

/// A non-negative rational `numerator / denominator`. A zero denominator is
/// the `0/0` sentinel for degenerate (empty) groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Ratio {
    pub numerator: u64,
    pub denominator: u64,
}

impl Ratio {
    pub fn new(numerator: u64, denominator: u64) -> Self {
        Ratio {
            numerator,
            denominator,
        }
    }

    pub fn is_undefined(&self) -> bool {
        self.denominator == 0
    }

    pub fn to_f64(&self) -> Option<f64> {
        (!self.is_undefined()).then(|| self.numerator as f64 / self.denominator as f64)
    }

    /// Percentage in tenths of a percent, rounded exactly from the integers.
    pub fn percent_tenths(&self, rounding: Rounding) -> Option<u64> {
        if self.is_undefined() {
            return None;
        }
        let scaled = self.numerator as u128 * 1000;
        let den = self.denominator as u128;
        let (q, r) = (scaled / den, scaled % den);
        let round_up = match rounding {
            Rounding::HalfUp => 2 * r >= den,
            Rounding::HalfEven => 2 * r > den || (2 * r == den && q % 2 == 1),
        };
        Some((q + round_up as u128) as u64)
    }

    /// One-decimal percentage string without the `%` sign, or `"n/a"` for `0/0`.
    pub fn percent(&self, rounding: Rounding) -> String {
        match self.percent_tenths(rounding) {
            Some(t) => format!("{}.{}", t / 10, t % 10),
            None => "n/a".to_string(),
        }
    }

    /// Exact equality of two ratios as rational numbers.
    pub fn same_value(&self, other: &Ratio) -> bool {
        if self.is_undefined() || other.is_undefined() {
            return self.is_undefined() && other.is_undefined();
        }
        self.numerator as u128 * other.denominator as u128
            == other.numerator as u128 * self.denominator as u128
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator)
    }
}

impl Serialize for Ratio {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut s = serializer.serialize_struct("Ratio", 3)?;
        s.serialize_field("numerator", &self.numerator)?;
        s.serialize_field("denominator", &self.denominator)?;
        s.serialize_field("value", &self.to_f64())?;
        s.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_up_and_half_even_differ_only_on_ties() {
        let bias = Ratio::new(141, 400);
        assert_eq!(bias.percent(Rounding::HalfUp), "35.3");
        assert_eq!(bias.percent(Rounding::HalfEven), "35.2");
        assert_eq!(Ratio::new(99, 400).percent(Rounding::HalfEven), "24.8");
        assert_eq!(Ratio::new(21, 400).percent(Rounding::HalfEven), "5.2");
        assert_eq!(Ratio::new(21, 400).percent(Rounding::HalfUp), "5.3");
        assert_eq!(Ratio::new(1, 3).percent(Rounding::HalfUp), "33.3");
        assert_eq!(Ratio::new(2, 3).percent(Rounding::HalfEven), "66.7");
    }

    #[test]
    fn zero_denominator_is_a_sentinel() {
        let r = Ratio::new(0, 0);
        assert!(r.is_undefined());
        assert_eq!(r.to_f64(), None);
        assert_eq!(r.percent(Rounding::HalfUp), "n/a");
        assert_eq!(r.to_string(), "0/0");
    }

    #[test]
    fn same_value_compares_as_rationals() {
        assert!(Ratio::new(9, 21).same_value(&Ratio::new(3, 7)));
        assert!(!Ratio::new(9, 21).same_value(&Ratio::new(9, 20)));
    }
}
