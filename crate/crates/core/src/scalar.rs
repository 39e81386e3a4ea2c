//! Scalar types used for distances and thresholds.
//!
//! Every metric in this crate takes values in a dyadic or small-denominator
//! rational set, so the same code runs on `f32`, `f64` and the exact
//! rational [`Exact`]. Comparisons against thresholds are the only
//! operations that matter for the analyses; arithmetic is kept to a minimum.

use std::fmt::{Debug, Display};

use num_rational::Ratio;
use num_traits::{Num, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Exact rational scalar.
pub type Exact = Ratio<i64>;

/// Largest dyadic exponent representable by every scalar backend.
pub const MAX_DYADIC_EXPONENT: u32 = 62;

/// Numeric type for distances and thresholds.
pub trait Scalar:
    Num + Clone + PartialOrd + Debug + Display + Send + Sync + Serialize + DeserializeOwned + 'static
{
    /// `num / den`, rounded to nearest for floating types.
    fn from_ratio(num: i64, den: i64) -> Self;

    /// `2^-k`. Exact for every `k <= MAX_DYADIC_EXPONENT`.
    fn pow2_neg(k: u32) -> Self;

    fn to_f64(&self) -> f64;

    /// Best representation of a float. `None` for non-finite input.
    fn from_f64(x: f64) -> Option<Self>;

    /// Parses `"0.25"`, `"1/4"`, `"2^-2"` or anything [`str::parse::<f64>`] accepts.
    fn parse_scalar(s: &str) -> Option<Self> {
        let s = s.trim();
        if let Some(exp) = s.strip_prefix("2^-") {
            let k: u32 = exp.trim().parse().ok()?;
            return (k <= MAX_DYADIC_EXPONENT).then(|| Self::pow2_neg(k));
        }
        if let Some((num, den)) = s.split_once('/') {
            let num: i64 = num.trim().parse().ok()?;
            let den: i64 = den.trim().parse().ok()?;
            return (den != 0).then(|| Self::from_ratio(num, den));
        }
        Self::from_f64(s.parse().ok()?)
    }
}

macro_rules! impl_float_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            fn from_ratio(num: i64, den: i64) -> Self {
                (num as f64 / den as f64) as $t
            }

            fn pow2_neg(k: u32) -> Self {
                (2.0 as $t).powi(-(k as i32))
            }

            fn to_f64(&self) -> f64 {
                *self as f64
            }

            fn from_f64(x: f64) -> Option<Self> {
                x.is_finite().then_some(x as $t)
            }
        }
    };
}

impl_float_scalar!(f32);
impl_float_scalar!(f64);

impl Scalar for Exact {
    fn from_ratio(num: i64, den: i64) -> Self {
        Ratio::new(num, den)
    }

    fn pow2_neg(k: u32) -> Self {
        assert!(
            k <= MAX_DYADIC_EXPONENT,
            "2^-{k} is not representable as Ratio<i64>"
        );
        Ratio::new(1, 1i64 << k)
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn from_f64(x: f64) -> Option<Self> {
        if !x.is_finite() {
            return None;
        }
        // Binary fractions first so inputs like 0.015625 stay exact.
        let scaled = x * (1u64 << 40) as f64;
        if scaled.fract() == 0.0 && scaled.abs() < i64::MAX as f64 {
            return Some(Ratio::new(scaled as i64, 1i64 << 40));
        }
        Ratio::approximate_float(x)
    }
}

/// Larger of two partially ordered values (first wins on ties or NaN).
pub fn max_of<T: PartialOrd + Clone>(a: &T, b: &T) -> T {
    if b > a {
        b.clone()
    } else {
        a.clone()
    }
}

/// Smaller of two partially ordered values (first wins on ties or NaN).
pub fn min_of<T: PartialOrd + Clone>(a: &T, b: &T) -> T {
    if b < a {
        b.clone()
    } else {
        a.clone()
    }
}

/// Maximum of an iterator, `zero` if empty.
pub fn sup<T: Scalar>(values: impl IntoIterator<Item = T>) -> T {
    values
        .into_iter()
        .fold(T::zero(), |acc, v| if v > acc { v } else { acc })
}

/// Number of `t >= 0` with `2^-t > threshold`, capped at `cap + 1`.
///
/// Equivalently the smallest `t` with `2^-t <= threshold`.
pub(crate) fn dyadic_floor_exponent<T: Scalar>(threshold: &T, cap: u32) -> u32 {
    (0..=cap)
        .find(|&t| T::pow2_neg(t) <= *threshold)
        .unwrap_or(cap + 1)
}

/// Smallest `t >= 0` with `2^-t < threshold`, capped at `cap + 1`.
pub(crate) fn dyadic_strict_exponent<T: Scalar>(threshold: &T, cap: u32) -> u32 {
    (0..=cap)
        .find(|&t| T::pow2_neg(t) < *threshold)
        .unwrap_or(cap + 1)
}
