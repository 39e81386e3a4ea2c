//! Eventually periodic points of the full shift on `alphabet` symbols.
//!
//! The metric on sequences is `d(u, v) = 2^-(j-1)` where `j` is the first
//! (1-based) index at which `u` and `v` differ, and `d(u, u) = 0`.

use std::fmt;

use num_integer::Integer;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::SystemError;
use crate::scalar::Scalar;

const SYMBOL_CHARS: &[u8] = b"0123456789abcdefghijklmnopqrstuvwxyz";

/// Largest alphabet with a one-character textual encoding.
pub const MAX_ALPHABET: u8 = 36;

/// Random access to the symbols of a one-sided sequence.
pub trait SymbolSource {
    fn symbol(&self, index: usize) -> u8;
}

/// Number of consecutive positions `start, start+1, ...` where `a` and `b`
/// agree, stopping at `cap`.
pub fn agreement_run<A, B>(a: &A, b: &B, start: usize, cap: u32) -> u32
where
    A: SymbolSource + ?Sized,
    B: SymbolSource + ?Sized,
{
    let mut run = 0;
    while run < cap && a.symbol(start + run as usize) == b.symbol(start + run as usize) {
        run += 1;
    }
    run
}

/// The sequence `preperiod · period^∞`, always held in canonical form
/// (minimal period, then minimal preperiod).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SymbolicPoint {
    preperiod: Vec<u8>,
    period: Vec<u8>,
    alphabet: u8,
}

impl SymbolicPoint {
    pub fn new(preperiod: Vec<u8>, period: Vec<u8>, alphabet: u8) -> Result<Self, SystemError> {
        if !(2..=MAX_ALPHABET).contains(&alphabet) {
            return Err(SystemError::invalid(
                "alphabet",
                format!("must be in 2..={MAX_ALPHABET}, got {alphabet}"),
            ));
        }
        if period.is_empty() {
            return Err(SystemError::invalid("period", "must be nonempty"));
        }
        if let Some(&s) = preperiod.iter().chain(&period).find(|&&s| s >= alphabet) {
            return Err(SystemError::invalid(
                "symbol",
                format!("{s} outside alphabet of size {alphabet}"),
            ));
        }
        let mut point = SymbolicPoint {
            preperiod,
            period,
            alphabet,
        };
        point.canonicalize();
        Ok(point)
    }

    /// The fixed point `s^∞`.
    pub fn constant(symbol: u8, alphabet: u8) -> Result<Self, SystemError> {
        Self::new(Vec::new(), vec![symbol], alphabet)
    }

    /// Parses the textual form used in JSON (`"01"`, `"1"`).
    pub fn parse(preperiod: &str, period: &str, alphabet: u8) -> Result<Self, SystemError> {
        Self::new(decode(preperiod)?, decode(period)?, alphabet)
    }

    /// Uniformly random preperiod length in `0..=max_pre` and period length
    /// in `1..=max_period`, symbols uniform.
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        alphabet: u8,
        max_pre: usize,
        max_period: usize,
    ) -> Result<Self, SystemError> {
        let pre_len = rng.random_range(0..=max_pre);
        let per_len = rng.random_range(1..=max_period.max(1));
        let pre = (0..pre_len).map(|_| rng.random_range(0..alphabet)).collect();
        let per = (0..per_len).map(|_| rng.random_range(0..alphabet)).collect();
        Self::new(pre, per, alphabet)
    }

    fn canonicalize(&mut self) {
        let len = self.period.len();
        if let Some(p) = (1..=len)
            .filter(|p| len % p == 0)
            .find(|&p| (p..len).all(|i| self.period[i] == self.period[i - p]))
        {
            self.period.truncate(p);
        }
        while let Some(&last) = self.preperiod.last() {
            if last != *self.period.last().expect("period is nonempty") {
                break;
            }
            self.preperiod.pop();
            self.period.rotate_right(1);
        }
    }

    pub fn preperiod(&self) -> &[u8] {
        &self.preperiod
    }

    pub fn period(&self) -> &[u8] {
        &self.period
    }

    pub fn alphabet(&self) -> u8 {
        self.alphabet
    }

    /// The first `len` symbols.
    pub fn prefix(&self, len: usize) -> Vec<u8> {
        (0..len).map(|i| self.symbol(i)).collect()
    }

    /// `σ^k` applied to this point.
    pub fn shifted(&self, k: usize) -> SymbolicPoint {
        if k <= self.preperiod.len() {
            return SymbolicPoint {
                preperiod: self.preperiod[k..].to_vec(),
                period: self.period.clone(),
                alphabet: self.alphabet,
            };
        }
        let mut period = self.period.clone();
        let r = (k - self.preperiod.len()) % period.len();
        period.rotate_left(r);
        SymbolicPoint {
            preperiod: Vec::new(),
            period,
            alphabet: self.alphabet,
        }
    }

    /// `s · self`. Shifting the result gives back `self`.
    pub fn prepend(&self, symbol: u8) -> Result<SymbolicPoint, SystemError> {
        let mut pre = Vec::with_capacity(self.preperiod.len() + 1);
        pre.push(symbol);
        pre.extend_from_slice(&self.preperiod);
        Self::new(pre, self.period.clone(), self.alphabet)
    }

    /// First (1-based) index at which the two sequences differ; `None` when equal.
    pub fn first_difference(&self, other: &SymbolicPoint) -> Option<usize> {
        if self == other {
            return None;
        }
        // Both sequences are periodic past the longer preperiod with period
        // dividing the lcm, so distinct canonical points must differ before this.
        let bound = self.preperiod.len().max(other.preperiod.len())
            + self.period.len().lcm(&other.period.len());
        (0..bound)
            .find(|&i| self.symbol(i) != other.symbol(i))
            .map(|i| i + 1)
    }
}

impl SymbolSource for SymbolicPoint {
    fn symbol(&self, index: usize) -> u8 {
        match self.preperiod.get(index) {
            Some(&s) => s,
            None => self.period[(index - self.preperiod.len()) % self.period.len()],
        }
    }
}

impl SymbolSource for [u8] {
    fn symbol(&self, index: usize) -> u8 {
        self[index]
    }
}

impl fmt::Debug for SymbolicPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for SymbolicPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const SHOWN: usize = 32;
        let pre = encode(&self.preperiod[..self.preperiod.len().min(SHOWN)]);
        let ellipsis = if self.preperiod.len() > SHOWN { "…" } else { "" };
        write!(f, "{pre}{ellipsis}({})^∞", encode(&self.period))
    }
}

#[derive(Serialize, Deserialize)]
struct SymbolicPointRepr {
    preperiod: String,
    period: String,
    alphabet: u8,
}

impl Serialize for SymbolicPoint {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        SymbolicPointRepr {
            preperiod: encode(&self.preperiod),
            period: encode(&self.period),
            alphabet: self.alphabet,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SymbolicPoint {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = SymbolicPointRepr::deserialize(deserializer)?;
        SymbolicPoint::parse(&repr.preperiod, &repr.period, repr.alphabet)
            .map_err(serde::de::Error::custom)
    }
}

fn encode(symbols: &[u8]) -> String {
    symbols
        .iter()
        .map(|&s| SYMBOL_CHARS[s as usize] as char)
        .collect()
}

fn decode(text: &str) -> Result<Vec<u8>, SystemError> {
    text.bytes()
        .map(|c| {
            SYMBOL_CHARS
                .iter()
                .position(|&x| x == c.to_ascii_lowercase())
                .map(|p| p as u8)
                .ok_or_else(|| SystemError::invalid("symbol", format!("bad character {:?}", c as char)))
        })
        .collect()
}

/// The full shift `σ` on `alphabet^ℕ`, acting exactly on eventually periodic points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SymbolicSystem {
    alphabet: u8,
}

impl SymbolicSystem {
    pub fn new(alphabet: u8) -> Result<Self, SystemError> {
        if !(2..=MAX_ALPHABET).contains(&alphabet) {
            return Err(SystemError::invalid(
                "alphabet",
                format!("must be in 2..={MAX_ALPHABET}, got {alphabet}"),
            ));
        }
        Ok(SymbolicSystem { alphabet })
    }

    pub fn alphabet(&self) -> u8 {
        self.alphabet
    }

    pub fn shift(&self, point: &SymbolicPoint) -> SymbolicPoint {
        point.shifted(1)
    }

    /// `(x, σx, ..., σ^n x)`.
    pub fn orbit(&self, point: &SymbolicPoint, n: usize) -> Vec<SymbolicPoint> {
        (0..=n).map(|k| point.shifted(k)).collect()
    }

    /// Exponent `t` with `d(a, b) = 2^-t`, or `None` when `a == b`.
    pub fn distance_exponent(&self, a: &SymbolicPoint, b: &SymbolicPoint) -> Option<usize> {
        a.first_difference(b).map(|j| j - 1)
    }

    /// Exact distance. Panics for [`crate::Exact`] when the points agree on
    /// more than 62 leading symbols.
    pub fn distance<T: Scalar>(&self, a: &SymbolicPoint, b: &SymbolicPoint) -> T {
        match self.distance_exponent(a, b) {
            None => T::zero(),
            Some(t) => T::pow2_neg(u32::try_from(t).unwrap_or(u32::MAX)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Exact;

    fn pt(pre: &str, per: &str) -> SymbolicPoint {
        SymbolicPoint::parse(pre, per, 2).unwrap()
    }

    #[test]
    fn canonical_forms() {
        assert_eq!(pt("01", "1"), pt("0", "1"));
        assert_eq!(pt("", "0101"), pt("", "01"));
        assert_eq!(pt("1", "01").preperiod(), b"");
        assert_eq!(pt("1", "01").period(), &[1, 0]);
        assert_eq!(pt("0011", "011").preperiod(), &[0]);
    }

    #[test]
    fn shift_drops_leading_symbol() {
        let x = pt("01", "1");
        let y = x.shifted(1);
        assert_eq!(y, pt("", "1"));
        assert_eq!(y.preperiod(), b"");
        assert_eq!(pt("", "01").shifted(3), pt("", "10"));
    }

    #[test]
    fn metric_examples() {
        let sys = SymbolicSystem::new(2).unwrap();
        let zero = pt("", "0");
        let one_zero = pt("1", "0");
        assert_eq!(sys.distance::<Exact>(&zero, &one_zero), Exact::new(1, 1));
        assert_eq!(sys.distance::<Exact>(&zero, &zero), Exact::new(0, 1));
        assert_eq!(sys.distance::<f64>(&pt("001", "0"), &zero), 0.25);
    }

    #[test]
    fn rejects_bad_points() {
        assert!(SymbolicPoint::new(vec![], vec![], 2).is_err());
        assert!(SymbolicPoint::new(vec![2], vec![0], 2).is_err());
        assert!(SymbolicPoint::new(vec![], vec![0], 1).is_err());
        assert!(SymbolicPoint::parse("0x", "1", 2).is_err());
    }

    #[test]
    fn serde_text_form() {
        let x = pt("0110", "10");
        let json = serde_json::to_string(&x).unwrap();
        assert_eq!(json, r#"{"preperiod":"01","period":"10","alphabet":2}"#);
        let back: SymbolicPoint = serde_json::from_str(&json).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn agreement_runs() {
        let a = pt("0001", "0");
        let b = pt("", "0");
        assert_eq!(agreement_run(&a, &b, 0, 10), 3);
        assert_eq!(agreement_run(&a, &b, 4, 10), 10);
        assert_eq!(agreement_run(&a, &b, 3, 10), 0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_point() -> impl Strategy<Value = SymbolicPoint> {
            (
                proptest::collection::vec(0u8..3, 0..6),
                proptest::collection::vec(0u8..3, 1..6),
            )
                .prop_map(|(pre, per)| SymbolicPoint::new(pre, per, 3).unwrap())
        }

        proptest! {
            #[test]
            fn shift_inverts_prepend(x in arb_point(), s in 0u8..3) {
                let y = x.prepend(s).unwrap();
                prop_assert_eq!(y.symbol(0), s);
                prop_assert_eq!(y.shifted(1), x);
            }

            #[test]
            fn canonical_form_preserves_sequence(
                pre in proptest::collection::vec(0u8..3, 0..6),
                per in proptest::collection::vec(0u8..3, 1..6),
            ) {
                let p = SymbolicPoint::new(pre.clone(), per.clone(), 3).unwrap();
                for i in 0..40 {
                    let raw = if i < pre.len() { pre[i] } else { per[(i - pre.len()) % per.len()] };
                    prop_assert_eq!(p.symbol(i), raw);
                }
            }

            #[test]
            fn first_difference_matches_scan(a in arb_point(), b in arb_point()) {
                let scan = (0..200).find(|&i| a.symbol(i) != b.symbol(i)).map(|i| i + 1);
                prop_assert_eq!(a.first_difference(&b), scan);
            }
        }
    }
}
