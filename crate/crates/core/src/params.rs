use core::fmt;
use core::str::FromStr;

use alloc::string::ToString;
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;

use crate::error::{Error, Result};

/// The coin bias `p` of BCD(p) together with `q = 1 - p` and the odds
/// `r = p / q`.
///
/// When built from a ratio of integers (or a decimal string) the exact value
/// is kept so that the closed forms can also be evaluated in rational
/// arithmetic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignParams {
    p: f64,
    q: f64,
    ratio: Option<(u64, u64)>,
}

impl DesignParams {
    /// Float-only parameters. Exact arithmetic is unavailable for these.
    pub fn new(p: f64) -> Result<Self> {
        if !(0.5..=1.0).contains(&p) {
            return Err(Error::InvalidBias(p));
        }
        Ok(Self {
            p,
            q: 1.0 - p,
            ratio: None,
        })
    }

    /// `p = num / den`, reduced to lowest terms.
    pub fn from_ratio(num: u64, den: u64) -> Result<Self> {
        // 1/2 <= num/den <= 1
        if den == 0 || num > den || num.checked_mul(2).is_some_and(|t| t < den) {
            return Err(Error::InvalidRatio { num, den });
        }
        let g = num.gcd(&den);
        let (num, den) = (num / g, den / g);
        Ok(Self {
            p: num as f64 / den as f64,
            q: (den - num) as f64 / den as f64,
            ratio: Some((num, den)),
        })
    }

    /// Complete randomization.
    pub fn fair() -> Self {
        Self {
            p: 0.5,
            q: 0.5,
            ratio: Some((1, 2)),
        }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Odds `p / q`; infinite at `p = 1`.
    pub fn r(&self) -> f64 {
        if self.q == 0.0 {
            f64::INFINITY
        } else {
            self.p / self.q
        }
    }

    pub fn is_fair(&self) -> bool {
        self.p == 0.5
    }

    /// Permuted blocks of size two.
    pub fn is_deterministic(&self) -> bool {
        self.q == 0.0
    }

    /// `(num, den)` in lowest terms, when known.
    pub fn ratio(&self) -> Option<(u64, u64)> {
        self.ratio
    }

    pub fn is_exact(&self) -> bool {
        self.ratio.is_some()
    }

    pub fn p_exact(&self) -> Result<BigRational> {
        let (num, den) = self.ratio.ok_or(Error::NotRational)?;
        Ok(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn q_exact(&self) -> Result<BigRational> {
        let (num, den) = self.ratio.ok_or(Error::NotRational)?;
        Ok(BigRational::new(BigInt::from(den - num), BigInt::from(den)))
    }
}

impl fmt::Display for DesignParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.ratio {
            Some((n, d)) if !is_short_decimal(d) => write!(f, "{n}/{d}"),
            _ => write!(f, "{}", self.p),
        }
    }
}

/// Whether `x / d` has a short terminating decimal expansion, which `f64`
/// display reproduces exactly.
fn is_short_decimal(d: u64) -> bool {
    if d > 1_000_000_000_000 {
        return false;
    }
    let mut d = d;
    for f in [2, 5] {
        while d.is_multiple_of(f) {
            d /= f;
        }
    }
    d == 1
}

/// Accepts `"2/3"`, `"0.7"`, `"1"`. Decimals keep their exact value unless
/// the denominator would overflow `u64`, in which case only the float is kept.
impl FromStr for DesignParams {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let err = || Error::Parse(s.to_string());
        if let Some((num, den)) = s.split_once('/') {
            let num: u64 = num.trim().parse().map_err(|_| err())?;
            let den: u64 = den.trim().parse().map_err(|_| err())?;
            return Self::from_ratio(num, den);
        }
        let value: f64 = s.parse().map_err(|_| err())?;
        if !value.is_finite() {
            return Err(err());
        }
        let (int_part, frac_part) = s.split_once('.').unwrap_or((s, ""));
        let digits_ok = !int_part.is_empty()
            && int_part.bytes().all(|b| b.is_ascii_digit())
            && frac_part.bytes().all(|b| b.is_ascii_digit());
        if digits_ok && frac_part.len() <= 18 {
            let den = 10u64.pow(frac_part.len() as u32);
            let int: u64 = int_part.parse().map_err(|_| err())?;
            let frac: u64 = if frac_part.is_empty() {
                0
            } else {
                frac_part.parse().map_err(|_| err())?
            };
            let num = int.checked_mul(den).and_then(|v| v.checked_add(frac));
            if let Some(num) = num {
                return match Self::from_ratio(num, den) {
                    Err(Error::InvalidRatio { .. }) => Err(Error::InvalidBias(value)),
                    other => other,
                };
            }
        }
        Self::new(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range() {
        assert!(DesignParams::new(0.49).is_err());
        assert!(DesignParams::new(1.01).is_err());
        assert!(DesignParams::new(f64::NAN).is_err());
        assert!(DesignParams::from_ratio(1, 3).is_err());
        assert!(DesignParams::from_ratio(4, 3).is_err());
        assert!(DesignParams::from_ratio(1, 0).is_err());
        assert_eq!("0.3".parse::<DesignParams>(), Err(Error::InvalidBias(0.3)));
    }

    #[test]
    fn derived_quantities() {
        let d = DesignParams::from_ratio(4, 6).unwrap();
        assert_eq!(d.ratio(), Some((2, 3)));
        assert_eq!(d.r(), 2.0);
        assert_eq!(d.q_exact().unwrap(), BigRational::new(1.into(), 3.into()));
        assert!(DesignParams::from_ratio(1, 1).unwrap().r().is_infinite());
        assert!(DesignParams::fair().is_fair());
    }

    #[test]
    fn parses_decimals_and_fractions() {
        let d: DesignParams = "0.7".parse().unwrap();
        assert_eq!(d.ratio(), Some((7, 10)));
        assert_eq!(d.q(), 0.3);
        let d: DesignParams = "2/3".parse().unwrap();
        assert_eq!(d.ratio(), Some((2, 3)));
        assert_eq!(std::format!("{d}"), "2/3");
        let d: DesignParams = "1".parse().unwrap();
        assert!(d.is_deterministic());
        let d: DesignParams = "0.7071067811865475244008".parse().unwrap();
        assert!(!d.is_exact());
        assert!("abc".parse::<DesignParams>().is_err());
    }

    #[test]
    fn display_round_trips() {
        for (n, d, shown) in [
            (3, 5, "0.6"),
            (7, 10, "0.7"),
            (2, 3, "2/3"),
            (1, 1, "1"),
            (5, 8, "0.625"),
            (5, 6, "5/6"),
        ] {
            let params = DesignParams::from_ratio(n, d).unwrap();
            assert_eq!(std::format!("{params}"), shown);
            assert_eq!(
                shown.parse::<DesignParams>().unwrap().ratio(),
                params.ratio()
            );
        }
    }
}
