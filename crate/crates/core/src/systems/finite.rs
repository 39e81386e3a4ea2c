use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::SystemError;
use crate::scalar::{dyadic_floor_exponent, Scalar};

/// Largest state count the finite backends accept.
pub const MAX_STATES: usize = 1 << 16;

/// How the distance between two states is computed.
#[derive(Debug, Clone, PartialEq)]
pub enum Metric<T> {
    /// Grid `i/L` on the circle: `min(|i-j|, L-|i-j|) / L`.
    Circle { size: usize },
    /// Grid `i/L`, `i = 0..=L`, on the unit interval: `|i-j| / L`.
    Interval { size: usize },
    /// `Z/2^depth` with `d(x, y) = 2^-ν₂(x-y)`.
    Dyadic { depth: u32 },
    /// Words of length `len`: `2^-(j-1)` for the first differing index `j`.
    WordPrefix { len: usize, alphabet: usize },
    /// Row-major distance matrix.
    Matrix { n: usize, values: Vec<T> },
}

/// Representative of a state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum Coordinate {
    Grid { index: usize, size: usize },
    Residue(u64),
    Word(Vec<u8>),
    Label(usize),
}

impl Coordinate {
    pub fn label(&self) -> String {
        match self {
            Coordinate::Grid { index, size } => format!("{index}/{size}"),
            Coordinate::Residue(r) => r.to_string(),
            Coordinate::Word(w) => w.iter().map(|s| char::from(b'0' + s)).collect(),
            Coordinate::Label(i) => i.to_string(),
        }
    }
}

/// Backend tag, echoed parameters and the worst-case image rounding.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemMeta<T> {
    pub backend: String,
    pub params: serde_json::Value,
    /// Upper bound on `|f(x) - image(x)|` introduced by snapping to the grid.
    pub rounding_bound: T,
}

/// Successor rule on shift words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WordMap {
    /// `w₁…w_L → w₂…w_L s` for every symbol `s` (multivalued).
    #[default]
    DeBruijn,
    /// `w₁…w_L → w₂…w_L w₁`: the exact shift on the periodic points `w^∞`.
    Rotation,
}

/// A dynamical system on `0..n` with a metric and a successor relation.
#[derive(Debug, Clone)]
pub struct FiniteSystem<T> {
    coords: Vec<Coordinate>,
    metric: Metric<T>,
    successors: Vec<Vec<usize>>,
    single_valued: bool,
    meta: SystemMeta<T>,
}

impl<T: Scalar> FiniteSystem<T> {
    fn assemble(
        coords: Vec<Coordinate>,
        metric: Metric<T>,
        successors: Vec<Vec<usize>>,
        meta: SystemMeta<T>,
    ) -> Self {
        let single_valued = successors.iter().all(|s| s.len() == 1);
        FiniteSystem {
            coords,
            metric,
            successors,
            single_valued,
            meta,
        }
    }

    fn meta(backend: &str, params: serde_json::Value) -> SystemMeta<T> {
        SystemMeta {
            backend: backend.to_string(),
            params,
            rounding_bound: T::zero(),
        }
    }

    /// Dyadic odometer `x ↦ x + 1` on `Z/2^depth`.
    pub fn odometer(depth: u32) -> Result<Self, SystemError> {
        if !(1..=16).contains(&depth) {
            return Err(SystemError::invalid("k", format!("must be in 1..=16, got {depth}")));
        }
        let n = 1usize << depth;
        let coords = (0..n as u64).map(Coordinate::Residue).collect();
        let successors = (0..n).map(|x| vec![(x + 1) % n]).collect();
        Ok(Self::assemble(
            coords,
            Metric::Dyadic { depth },
            successors,
            Self::meta("odometer", serde_json::json!({ "k": depth })),
        ))
    }

    /// Doubling map `i ↦ 2i mod L` on the circle grid.
    pub fn doubling(size: usize) -> Result<Self, SystemError> {
        check_grid_size(size)?;
        let coords = (0..size).map(|index| Coordinate::Grid { index, size }).collect();
        let successors = (0..size).map(|i| vec![(2 * i) % size]).collect();
        Ok(Self::assemble(
            coords,
            Metric::Circle { size },
            successors,
            Self::meta("doubling", serde_json::json!({ "L": size })),
        ))
    }

    /// Tent map `x ↦ 1 - |1 - 2x|` on the grid `i/L`, `i = 0..=L`.
    ///
    /// The grid is invariant, so the rounding bound is zero.
    pub fn tent(size: usize) -> Result<Self, SystemError> {
        check_grid_size(size)?;
        let coords = (0..=size).map(|index| Coordinate::Grid { index, size }).collect();
        let successors = (0..=size)
            .map(|i| vec![size - (size as i64 - 2 * i as i64).unsigned_abs() as usize])
            .collect();
        Ok(Self::assemble(
            coords,
            Metric::Interval { size },
            successors,
            Self::meta("tent", serde_json::json!({ "L": size })),
        ))
    }

    /// Logistic map `x ↦ 4x(1-x)` with images rounded to the nearest grid point.
    pub fn logistic(size: usize) -> Result<Self, SystemError> {
        check_grid_size(size)?;
        let l = size as i64;
        let mut worst = (0i64, 1i64);
        let mut successors = Vec::with_capacity(size + 1);
        for i in 0..=l {
            // 4 i (L - i) / L, rounded half up.
            let twice = 8 * i * (l - i);
            let j = (twice + l) / (2 * l);
            let err = (4 * i * (l - i) - j * l).abs();
            if err * worst.1 > worst.0 * l * l {
                worst = (err, l * l);
            }
            successors.push(vec![j as usize]);
        }
        let coords = (0..=size).map(|index| Coordinate::Grid { index, size }).collect();
        let mut meta = Self::meta("logistic", serde_json::json!({ "L": size }));
        meta.rounding_bound = T::from_ratio(worst.0, worst.1);
        Ok(Self::assemble(coords, Metric::Interval { size }, successors, meta))
    }

    /// All words of length `len` over `alphabet` symbols, first symbol most significant.
    pub fn shift_words(len: usize, alphabet: usize, map: WordMap) -> Result<Self, SystemError> {
        if !(2..=36).contains(&alphabet) {
            return Err(SystemError::invalid("alphabet", format!("must be in 2..=36, got {alphabet}")));
        }
        if len == 0 {
            return Err(SystemError::invalid("L", "must be at least 1"));
        }
        let n = (alphabet as u128)
            .checked_pow(len as u32)
            .filter(|&n| n <= MAX_STATES as u128)
            .ok_or_else(|| SystemError::invalid("L", format!("{alphabet}^{len} words exceeds {MAX_STATES}")))?
            as usize;
        let top = n / alphabet;
        let coords = (0..n).map(|w| Coordinate::Word(word_digits(w, len, alphabet))).collect();
        let successors = (0..n)
            .map(|w| {
                let tail = (w % top) * alphabet;
                match map {
                    WordMap::DeBruijn => (0..alphabet).map(|s| tail + s).collect(),
                    WordMap::Rotation => vec![tail + w / top],
                }
            })
            .collect();
        Ok(Self::assemble(
            coords,
            Metric::WordPrefix { len, alphabet },
            successors,
            Self::meta(
                "shift_words",
                serde_json::json!({ "L": len, "alphabet": alphabet, "map": map }),
            ),
        ))
    }

    /// Arbitrary system from a distance matrix and successor lists.
    pub fn explicit(distances: Vec<Vec<T>>, successors: Vec<Vec<usize>>) -> Result<Self, SystemError> {
        let n = distances.len();
        if n == 0 || n > MAX_STATES {
            return Err(SystemError::invalid("distances", format!("state count {n} out of range")));
        }
        if successors.len() != n {
            return Err(SystemError::InvalidSuccessors(format!(
                "{} successor lists for {n} states",
                successors.len()
            )));
        }
        let mut values = Vec::with_capacity(n * n);
        for (i, row) in distances.into_iter().enumerate() {
            if row.len() != n {
                return Err(SystemError::InvalidMetric(format!("row {i} has length {}", row.len())));
            }
            values.extend(row);
        }
        let mut successors = successors;
        for (x, succ) in successors.iter_mut().enumerate() {
            if succ.is_empty() {
                return Err(SystemError::InvalidSuccessors(format!("state {x} has no successor")));
            }
            if let Some(&bad) = succ.iter().find(|&&s| s >= n) {
                return Err(SystemError::InvalidSuccessors(format!("state {x} maps to {bad} >= {n}")));
            }
            succ.sort_unstable();
            succ.dedup();
        }
        let system = Self::assemble(
            (0..n).map(Coordinate::Label).collect(),
            Metric::Matrix { n, values },
            successors,
            Self::meta("explicit", serde_json::json!({ "n": n })),
        );
        system.verify_metric_axioms(4096, 0).map_err(SystemError::InvalidMetric)?;
        Ok(system)
    }

    pub fn len(&self) -> usize {
        self.successors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.successors.is_empty()
    }

    pub fn coords(&self) -> &[Coordinate] {
        &self.coords
    }

    pub fn metric_kind(&self) -> &Metric<T> {
        &self.metric
    }

    pub fn meta_info(&self) -> &SystemMeta<T> {
        &self.meta
    }

    pub fn is_single_valued(&self) -> bool {
        self.single_valued
    }

    pub fn require_single_valued(&self) -> Result<(), SystemError> {
        if self.single_valued {
            Ok(())
        } else {
            Err(SystemError::Multivalued)
        }
    }

    pub fn step(&self, x: usize) -> &[usize] {
        &self.successors[x]
    }

    pub fn successors(&self) -> &[Vec<usize>] {
        &self.successors
    }

    /// The unique successor. Only meaningful on single-valued systems.
    #[inline]
    pub fn image(&self, x: usize) -> usize {
        self.successors[x][0]
    }

    /// `(x, f(x), ..., f^n(x))`.
    pub fn orbit(&self, x: usize, n: usize) -> Result<Vec<usize>, SystemError> {
        self.require_single_valued()?;
        self.check_state(x)?;
        let mut out = Vec::with_capacity(n + 1);
        let mut cur = x;
        out.push(cur);
        for _ in 0..n {
            cur = self.image(cur);
            out.push(cur);
        }
        Ok(out)
    }

    /// `f^k(x)`.
    pub fn iterate(&self, x: usize, k: usize) -> usize {
        (0..k).fold(x, |cur, _| self.image(cur))
    }

    pub fn check_state(&self, x: usize) -> Result<(), SystemError> {
        if x < self.len() {
            Ok(())
        } else {
            Err(SystemError::StateOutOfRange { state: x, n: self.len() })
        }
    }

    pub fn distance(&self, a: usize, b: usize) -> T {
        match &self.metric {
            Metric::Circle { size } => {
                let k = a.abs_diff(b);
                T::from_ratio(k.min(size - k) as i64, *size as i64)
            }
            Metric::Interval { size } => T::from_ratio(a.abs_diff(b) as i64, *size as i64),
            Metric::Dyadic { depth } => {
                let mask = (1usize << depth) - 1;
                let diff = a.wrapping_sub(b) & mask;
                if diff == 0 {
                    T::zero()
                } else {
                    T::pow2_neg(diff.trailing_zeros())
                }
            }
            Metric::WordPrefix { len, alphabet } => {
                if a == b {
                    return T::zero();
                }
                let mut block = self.len() / alphabet;
                for j in 0..*len {
                    if a / block % alphabet != b / block % alphabet {
                        return T::pow2_neg(j as u32);
                    }
                    block /= alphabet;
                }
                unreachable!("distinct words differ somewhere")
            }
            Metric::Matrix { n, values } => values[a * n + b].clone(),
        }
    }

    /// Sorted states `v` with `d(center, v) <= radius`.
    pub fn ball(&self, center: usize, radius: &T) -> Vec<usize> {
        if *radius < T::zero() {
            return Vec::new();
        }
        match &self.metric {
            Metric::Circle { size } => {
                let k = self.max_grid_offset(radius, size / 2, *size);
                if 2 * k + 1 >= *size {
                    return (0..*size).collect();
                }
                let mut out: Vec<usize> = (0..=2 * k).map(|o| (center + size + o - k) % size).collect();
                out.sort_unstable();
                out
            }
            Metric::Interval { size } => {
                let k = self.max_grid_offset(radius, *size, *size);
                (center.saturating_sub(k)..=(center + k).min(*size)).collect()
            }
            Metric::Dyadic { depth } => {
                let t = dyadic_floor_exponent(radius, *depth);
                if t >= *depth {
                    return vec![center];
                }
                let step = 1usize << t;
                (0..self.len() >> t).map(|q| q * step + center % step).collect()
            }
            Metric::WordPrefix { len, alphabet } => {
                let t = dyadic_floor_exponent(radius, *len as u32) as usize;
                if t >= *len {
                    return vec![center];
                }
                let block = alphabet.pow((len - t) as u32);
                let start = center / block * block;
                (start..start + block).collect()
            }
            Metric::Matrix { n, values } => (0..*n).filter(|&v| values[center * n + v] <= *radius).collect(),
        }
    }

    /// Sorted states `v` with `d(center, v) < radius`.
    pub fn open_ball(&self, center: usize, radius: &T) -> Vec<usize> {
        let mut out = self.ball(center, radius);
        out.retain(|&v| self.distance(center, v) < *radius);
        out
    }

    /// Largest `k <= limit` with `k / size <= radius`.
    fn max_grid_offset(&self, radius: &T, limit: usize, size: usize) -> usize {
        let approx = (radius.to_f64() * size as f64).floor();
        let mut k = if approx.is_finite() && approx > 0.0 {
            (approx as usize).min(limit)
        } else {
            0
        };
        while k < limit && T::from_ratio(k as i64 + 1, size as i64) <= *radius {
            k += 1;
        }
        while k > 0 && T::from_ratio(k as i64, size as i64) > *radius {
            k -= 1;
        }
        k
    }

    pub fn diameter(&self) -> T {
        match &self.metric {
            Metric::Circle { size } => T::from_ratio((size / 2) as i64, *size as i64),
            Metric::Interval { .. } | Metric::Dyadic { .. } | Metric::WordPrefix { .. } => T::one(),
            Metric::Matrix { values, .. } => crate::scalar::sup(values.iter().cloned()),
        }
    }

    /// Smallest positive distance between two states.
    pub fn resolution(&self) -> T {
        match &self.metric {
            Metric::Circle { size } | Metric::Interval { size } => T::from_ratio(1, *size as i64),
            Metric::Dyadic { depth } => T::pow2_neg(depth - 1),
            Metric::WordPrefix { len, .. } => T::pow2_neg(*len as u32 - 1),
            Metric::Matrix { values, .. } => values
                .iter()
                .filter(|v| **v > T::zero())
                .fold(None, |acc: Option<T>, v| match acc {
                    Some(a) if a <= *v => Some(a),
                    _ => Some(v.clone()),
                })
                .unwrap_or_else(T::zero),
        }
    }

    /// Checks identity, symmetry and nonnegativity on every pair when
    /// `n <= 1024` (sampled pairs otherwise) and the triangle inequality on
    /// all triples when `n <= 64` (`samples` random triples otherwise).
    pub fn verify_metric_axioms(&self, samples: usize, seed: u64) -> Result<(), String> {
        let n = self.len();
        let zero = T::zero();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let check_pair = |a: usize, b: usize| -> Result<(), String> {
            let d = self.distance(a, b);
            if d < zero {
                return Err(format!("d({a},{b}) = {d} is negative"));
            }
            if (a == b) != (d == zero) {
                return Err(format!("d({a},{b}) = {d} violates identity of indiscernibles"));
            }
            if d != self.distance(b, a) {
                return Err(format!("d({a},{b}) != d({b},{a})"));
            }
            Ok(())
        };
        if n <= 1024 {
            for a in 0..n {
                for b in a..n {
                    check_pair(a, b)?;
                }
            }
        } else {
            for _ in 0..samples {
                check_pair(rng.random_range(0..n), rng.random_range(0..n))?;
            }
        }
        let check_triple = |a: usize, b: usize, c: usize| -> Result<(), String> {
            if self.distance(a, c) > self.distance(a, b) + self.distance(b, c) {
                return Err(format!("triangle inequality fails on ({a},{b},{c})"));
            }
            Ok(())
        };
        if n <= 64 {
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        check_triple(a, b, c)?;
                    }
                }
            }
        } else {
            for _ in 0..samples {
                check_triple(rng.random_range(0..n), rng.random_range(0..n), rng.random_range(0..n))?;
            }
        }
        Ok(())
    }
}

fn check_grid_size(size: usize) -> Result<(), SystemError> {
    if size < 2 || !size.is_power_of_two() || size > MAX_STATES {
        return Err(SystemError::invalid(
            "L",
            format!("grid size must be a power of two in 2..={MAX_STATES}, got {size}"),
        ));
    }
    Ok(())
}

fn word_digits(mut w: usize, len: usize, alphabet: usize) -> Vec<u8> {
    let mut digits = vec![0u8; len];
    for slot in digits.iter_mut().rev() {
        *slot = (w % alphabet) as u8;
        w /= alphabet;
    }
    digits
}
