//! Distributional chaos of type 1: exact density statistics along joint
//! orbits, the scrambled-tuple test, distal-tuple search and the block
//! constructor for scrambled tuples on the full shift.
//!
//! For a tuple `(x_1, …, x_n)` and horizon `M`,
//!
//! ```text
//! Φ_prox(ε, m) = |{0 <= k < m : max_{i<j} d(f^k x_i, f^k x_j) < ε}| / m
//! Φ_sep(δ, m)  = |{0 <= k < m : min_{i<j} d(f^k x_i, f^k x_j) > δ}| / m
//! ```
//!
//! Counts are kept as integers. On the full shift the distance at time `k`
//! is `2^-r` with `r` the length of the common run starting at `k`, so both
//! tests reduce to comparing capped run lengths with an exponent.

use std::cmp::Ordering;
use std::fmt::Write as _;

use num_rational::Ratio;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cyclic::CyclicDecomposition;
use crate::scalar::{dyadic_floor_exponent, dyadic_strict_exponent, Scalar, MAX_DYADIC_EXPONENT};
use crate::shadowing::trial_rng;
use crate::systems::{FiniteSystem, SymbolSource, SymbolicPoint, SymbolicSystem, SystemError};

/// Longest common run tracked on the full shift.
pub const RUN_CAP: u32 = MAX_DYADIC_EXPONENT;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Dc1Error {
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("tuples need at least two points, got {0}")]
    TupleTooSmall(usize),
    #[error("horizon must be at least 1")]
    EmptyHorizon,
    #[error("minimum window {min_window} exceeds the horizon {horizon}")]
    WindowTooLarge { min_window: usize, horizon: usize },
    #[error("epsilon list must be nonempty and strictly descending")]
    EpsilonsNotDescending,
    #[error("eta must lie in (0, 1), got {0}")]
    InvalidEta(String),
    #[error("threshold {0} is below the resolution of the symbolic run cap")]
    ThresholdTooSmall(String),
    #[error("points use different alphabets")]
    MixedAlphabets,
    #[error("targets {0} and {1} coincide")]
    RepeatedTarget(usize, usize),
    #[error("depth {depth} cannot reach density above {level}: best {proximal} proximal, {separated} separated")]
    DepthTooSmall {
        depth: usize,
        level: String,
        proximal: f64,
        separated: f64,
    },
    #[error("tuple does not reach class {target} within {period} steps")]
    ClassUnreachable { target: usize, period: usize },
    #[error("tuple coordinates lie in different classes")]
    MixedClasses,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Proximal,
    Separated,
}

/// `count / window` as an exact fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Density {
    pub count: u64,
    pub window: u64,
    pub value: f64,
}

impl Density {
    pub fn new(count: u64, window: u64) -> Self {
        Density {
            count,
            window,
            value: count as f64 / window as f64,
        }
    }

    pub fn exact(&self) -> Ratio<i64> {
        Ratio::new(self.count as i64, self.window as i64)
    }

    /// `count / window > level`.
    pub fn exceeds<T: Scalar>(&self, level: &T) -> bool {
        T::from_ratio(self.count as i64, self.window as i64) > *level
    }

    pub fn compare(&self, other: &Density) -> Ordering {
        (self.count as u128 * other.window as u128).cmp(&(other.count as u128 * self.window as u128))
    }
}

/// `Φ(m)` for `m = 1..=horizon`, stored as cumulative counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityProfile<T> {
    pub kind: ProfileKind,
    pub threshold: T,
    pub horizon: usize,
    #[serde(skip)]
    counts: Vec<u32>,
    /// Largest `Φ(m)` over the whole horizon and its smallest attaining `m`.
    pub sup_value: Density,
    pub argmax: usize,
}

impl<T: Scalar> DensityProfile<T> {
    fn from_hits(kind: ProfileKind, threshold: T, hits: impl Iterator<Item = bool>) -> Self {
        let mut counts = Vec::new();
        let mut c = 0u32;
        for hit in hits {
            c += u32::from(hit);
            counts.push(c);
        }
        let horizon = counts.len();
        let mut profile = DensityProfile {
            kind,
            threshold,
            horizon,
            counts,
            sup_value: Density::new(0, 1),
            argmax: 1,
        };
        let (sup_value, argmax) = profile.sup_over(1);
        profile.sup_value = sup_value;
        profile.argmax = argmax;
        profile
    }

    /// Number of hits among `k < m`.
    pub fn count(&self, m: usize) -> u64 {
        self.counts[m - 1] as u64
    }

    pub fn value(&self, m: usize) -> Density {
        Density::new(self.count(m), m as u64)
    }

    pub fn values(&self) -> impl Iterator<Item = Density> + '_ {
        (1..=self.horizon).map(|m| self.value(m))
    }

    /// Largest `Φ(m)` over `from <= m <= horizon`, smallest `m` on ties.
    pub fn sup_over(&self, from: usize) -> (Density, usize) {
        let mut best = (Density::new(0, 1), from.max(1));
        for m in from.max(1)..=self.horizon {
            let d = self.value(m);
            if d.compare(&best.0) == Ordering::Greater {
                best = (d, m);
            }
        }
        best
    }
}

/// Per-time extremes of pairwise distance along a joint orbit.
#[derive(Debug, Clone)]
pub enum TupleTrace<T> {
    /// Minimum and maximum pairwise distance at each time.
    Metric { min: Vec<T>, max: Vec<T> },
    /// Minimum and maximum pairwise common-run length (capped) at each time.
    Runs { min: Vec<u8>, max: Vec<u8> },
}

impl<T: Scalar> TupleTrace<T> {
    pub fn horizon(&self) -> usize {
        match self {
            TupleTrace::Metric { min, .. } => min.len(),
            TupleTrace::Runs { min, .. } => min.len(),
        }
    }

    /// Joint orbit of distinct-or-not states of a single-valued system.
    pub fn finite(system: &FiniteSystem<T>, states: &[usize], horizon: usize) -> Result<Self, Dc1Error> {
        system.require_single_valued()?;
        check_tuple(states.len(), horizon)?;
        for &x in states {
            system.check_state(x)?;
        }
        let mut current = states.to_vec();
        let mut min = Vec::with_capacity(horizon);
        let mut max = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let mut lo: Option<T> = None;
            let mut hi: Option<T> = None;
            for i in 0..current.len() {
                for j in i + 1..current.len() {
                    let d = system.distance(current[i], current[j]);
                    if lo.as_ref().is_none_or(|l| d < *l) {
                        lo = Some(d.clone());
                    }
                    if hi.as_ref().is_none_or(|h| d > *h) {
                        hi = Some(d);
                    }
                }
            }
            min.push(lo.expect("at least one pair"));
            max.push(hi.expect("at least one pair"));
            for x in current.iter_mut() {
                *x = system.image(*x);
            }
        }
        Ok(TupleTrace::Metric { min, max })
    }

    /// Runs of the shifted points, read from the first `horizon + RUN_CAP`
    /// symbols of each point.
    pub fn symbolic(points: &[SymbolicPoint], horizon: usize) -> Result<Self, Dc1Error> {
        check_tuple(points.len(), horizon)?;
        if points.iter().any(|p| p.alphabet() != points[0].alphabet()) {
            return Err(Dc1Error::MixedAlphabets);
        }
        let span = horizon + RUN_CAP as usize;
        let words: Vec<Vec<u8>> = points.par_iter().map(|p| p.prefix(span)).collect();
        let pairs: Vec<(usize, usize)> = (0..points.len())
            .flat_map(|i| (i + 1..points.len()).map(move |j| (i, j)))
            .collect();
        let runs: Vec<Vec<u8>> = pairs
            .par_iter()
            .map(|&(i, j)| {
                let (a, b) = (&points[i], &points[j]);
                let mut next = agreement_tail(a, b, span);
                let mut out = vec![0u8; horizon];
                for k in (0..span).rev() {
                    let run = if words[i][k] != words[j][k] { 0 } else { (next + 1).min(RUN_CAP as u8) };
                    if k < horizon {
                        out[k] = run;
                    }
                    next = run;
                }
                out
            })
            .collect();
        let mut min = runs[0].clone();
        let mut max = runs[0].clone();
        for r in &runs[1..] {
            for k in 0..horizon {
                min[k] = min[k].min(r[k]);
                max[k] = max[k].max(r[k]);
            }
        }
        Ok(TupleTrace::Runs { min, max })
    }

    pub fn proximal(&self, epsilon: &T) -> Result<DensityProfile<T>, Dc1Error> {
        let kind = ProfileKind::Proximal;
        Ok(match self {
            TupleTrace::Metric { max, .. } => DensityProfile::from_hits(kind, epsilon.clone(), max.iter().map(|d| d < epsilon)),
            TupleTrace::Runs { min, .. } => {
                // max d < ε  ⟺  min run >= r with r least such that 2^-r < ε
                let r = dyadic_strict_exponent(epsilon, RUN_CAP);
                if r > RUN_CAP {
                    return Err(Dc1Error::ThresholdTooSmall(epsilon.to_string()));
                }
                DensityProfile::from_hits(kind, epsilon.clone(), min.iter().map(|&run| run as u32 >= r))
            }
        })
    }

    pub fn separated(&self, delta: &T) -> Result<DensityProfile<T>, Dc1Error> {
        let kind = ProfileKind::Separated;
        Ok(match self {
            TupleTrace::Metric { min, .. } => DensityProfile::from_hits(kind, delta.clone(), min.iter().map(|d| d > delta)),
            TupleTrace::Runs { max, .. } => {
                // min d > δ  ⟺  max run < t with t least such that 2^-t <= δ
                let t = dyadic_floor_exponent(delta, RUN_CAP);
                if t > RUN_CAP {
                    return Err(Dc1Error::ThresholdTooSmall(delta.to_string()));
                }
                DensityProfile::from_hits(kind, delta.clone(), max.iter().map(|&run| (run as u32) < t))
            }
        })
    }
}

fn agreement_tail(a: &SymbolicPoint, b: &SymbolicPoint, start: usize) -> u8 {
    crate::systems::agreement_run(a, b, start, RUN_CAP) as u8
}

fn check_tuple(n: usize, horizon: usize) -> Result<(), Dc1Error> {
    if n < 2 {
        return Err(Dc1Error::TupleTooSmall(n));
    }
    if horizon == 0 {
        return Err(Dc1Error::EmptyHorizon);
    }
    Ok(())
}

pub fn proximal_profile<T: Scalar>(
    system: &FiniteSystem<T>,
    states: &[usize],
    epsilon: &T,
    horizon: usize,
) -> Result<DensityProfile<T>, Dc1Error> {
    TupleTrace::finite(system, states, horizon)?.proximal(epsilon)
}

pub fn separated_profile<T: Scalar>(
    system: &FiniteSystem<T>,
    states: &[usize],
    delta: &T,
    horizon: usize,
) -> Result<DensityProfile<T>, Dc1Error> {
    TupleTrace::finite(system, states, horizon)?.separated(delta)
}

pub fn proximal_profile_symbolic<T: Scalar>(
    points: &[SymbolicPoint],
    epsilon: &T,
    horizon: usize,
) -> Result<DensityProfile<T>, Dc1Error> {
    TupleTrace::symbolic(points, horizon)?.proximal(epsilon)
}

pub fn separated_profile_symbolic<T: Scalar>(
    points: &[SymbolicPoint],
    delta: &T,
    horizon: usize,
) -> Result<DensityProfile<T>, Dc1Error> {
    TupleTrace::symbolic(points, horizon)?.separated(delta)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dc1Params<T> {
    pub delta_n: T,
    /// Strictly descending.
    pub epsilons: Vec<T>,
    pub horizon: usize,
    pub eta: T,
    /// Windows `m` shorter than this are ignored when taking suprema.
    pub min_window: usize,
}

impl<T: Scalar> Dc1Params<T> {
    fn validate(&self) -> Result<(), Dc1Error> {
        if self.horizon == 0 {
            return Err(Dc1Error::EmptyHorizon);
        }
        if self.min_window > self.horizon {
            return Err(Dc1Error::WindowTooLarge {
                min_window: self.min_window,
                horizon: self.horizon,
            });
        }
        if self.epsilons.is_empty() || self.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Dc1Error::EpsilonsNotDescending);
        }
        if self.eta <= T::zero() || self.eta >= T::one() {
            return Err(Dc1Error::InvalidEta(self.eta.to_string()));
        }
        Ok(())
    }
}

/// Best density for one threshold within the admissible windows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityWitness<T> {
    pub threshold: T,
    pub density: Density,
    pub m: usize,
    pub passed: bool,
}

/// Outcome of the scrambled-tuple test; `accepted` iff every witness passed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScrambledCertificate<T, P> {
    pub tuple: Vec<P>,
    pub delta_n: T,
    pub eta: T,
    pub horizon: usize,
    pub min_window: usize,
    pub proximal: Vec<DensityWitness<T>>,
    pub separated: DensityWitness<T>,
    pub accepted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failing_clause: Option<String>,
    /// Whether all coordinates share a finest-level class, when known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub same_class: Option<bool>,
}

/// Accepts iff for every `ε` some window `m` has proximal density above
/// `1 - η`, and some window has separated density above `1 - η` at `δ_n`.
pub fn dc1_test<T: Scalar, P>(
    trace: &TupleTrace<T>,
    tuple: Vec<P>,
    params: &Dc1Params<T>,
) -> Result<ScrambledCertificate<T, P>, Dc1Error> {
    params.validate()?;
    if trace.horizon() < params.horizon {
        return Err(Dc1Error::EmptyHorizon);
    }
    let level = T::one() - params.eta.clone();
    let witness = |profile: DensityProfile<T>| {
        let (density, m) = profile.sup_over(params.min_window);
        DensityWitness {
            passed: density.exceeds(&level),
            threshold: profile.threshold,
            density,
            m,
        }
    };
    let truncated;
    let trace = if trace.horizon() == params.horizon {
        trace
    } else {
        truncated = truncate(trace, params.horizon);
        &truncated
    };
    let proximal = params
        .epsilons
        .par_iter()
        .map(|e| trace.proximal(e).map(&witness))
        .collect::<Result<Vec<_>, _>>()?;
    let separated = witness(trace.separated(&params.delta_n)?);
    let failing_clause = proximal
        .iter()
        .find(|w| !w.passed)
        .map(|w| format!("proximal density at epsilon = {} is at most 1 - eta", w.threshold))
        .or_else(|| (!separated.passed).then(|| format!("separated density at delta = {} is at most 1 - eta", separated.threshold)));
    Ok(ScrambledCertificate {
        tuple,
        delta_n: params.delta_n.clone(),
        eta: params.eta.clone(),
        horizon: params.horizon,
        min_window: params.min_window,
        accepted: failing_clause.is_none(),
        failing_clause,
        proximal,
        separated,
        same_class: None,
    })
}

fn truncate<T: Scalar>(trace: &TupleTrace<T>, horizon: usize) -> TupleTrace<T> {
    match trace {
        TupleTrace::Metric { min, max } => TupleTrace::Metric {
            min: min[..horizon].to_vec(),
            max: max[..horizon].to_vec(),
        },
        TupleTrace::Runs { min, max } => TupleTrace::Runs {
            min: min[..horizon].to_vec(),
            max: max[..horizon].to_vec(),
        },
    }
}

pub fn dc1_test_finite<T: Scalar>(
    system: &FiniteSystem<T>,
    states: &[usize],
    params: &Dc1Params<T>,
    classes: Option<&CyclicDecomposition<T>>,
) -> Result<ScrambledCertificate<T, usize>, Dc1Error> {
    let trace = TupleTrace::finite(system, states, params.horizon)?;
    let mut cert = dc1_test(&trace, states.to_vec(), params)?;
    cert.same_class = classes.map(|c| states.iter().all(|&x| c.class_of[x] == c.class_of[states[0]]));
    Ok(cert)
}

pub fn dc1_test_symbolic<T: Scalar>(
    points: &[SymbolicPoint],
    params: &Dc1Params<T>,
) -> Result<ScrambledCertificate<T, SymbolicPoint>, Dc1Error> {
    let trace = TupleTrace::symbolic(points, params.horizon)?;
    let mut cert = dc1_test(&trace, points.to_vec(), params)?;
    // The full shift is a single class at every scale.
    cert.same_class = Some(true);
    Ok(cert)
}

/// `0^{b} 1^{b^2} 0^{b^3} …` for `depth` blocks, then `0^∞`, paired with `0^∞`.
pub fn geometric_block_pair(base: usize, depth: u32) -> Result<(SymbolicPoint, SymbolicPoint), Dc1Error> {
    let mut pre = Vec::new();
    let mut len = 1usize;
    for j in 0..depth {
        len *= base;
        pre.extend(std::iter::repeat_n((j % 2) as u8, len));
    }
    let zero = SymbolicPoint::constant(0, 2)?;
    Ok((zero, SymbolicPoint::new(pre, vec![0], 2)?))
}

/// Lengths `L_1, …, L_depth` of the alternating blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum BlockRule {
    /// `L_1 = first`, `L_j = j · (L_1 + … + L_{j-1})`.
    Factorial { first: usize },
    /// `L_j = first · ratio^(j-1)`; caps block-end densities near `1 - 1/ratio`.
    Geometric { first: usize, ratio: usize },
}

impl Default for BlockRule {
    fn default() -> Self {
        BlockRule::Factorial { first: 10 }
    }
}

impl BlockRule {
    pub fn lengths(&self, depth: usize) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::with_capacity(depth);
        let mut total = 0usize;
        for j in 1..=depth {
            let len = match *self {
                BlockRule::Factorial { first } => if j == 1 { first } else { j * total },
                BlockRule::Geometric { first, ratio } => first * ratio.pow(j as u32 - 1),
            };
            total += len;
            out.push(len);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstructionParams<T> {
    pub epsilon: T,
    pub depth: usize,
    pub rule: BlockRule,
    /// Sequence copied during proximal blocks and after the last block.
    pub reference: Option<SymbolicPoint>,
    /// Smallest proximal threshold the tuple must certify.
    pub certify_epsilon: T,
    pub eta: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstructedTuple<T> {
    pub points: Vec<SymbolicPoint>,
    pub prefix_len: usize,
    pub blocks: Vec<usize>,
    /// Any `window` consecutive symbols of a separated block tell the
    /// coordinates apart.
    pub window: usize,
    /// `prefix_len + Σ blocks`: the last position written by the blocks.
    pub horizon: usize,
    /// Predicted best block-end densities.
    pub predicted_proximal: f64,
    pub predicted_separated: f64,
    /// `d(points[i], targets[i])`.
    pub target_distances: Vec<T>,
}

/// Coordinate `i` is the first `⌈log₂(1/ε)⌉` symbols of target `i`, then
/// alternating blocks: odd blocks copy the reference at the same absolute
/// positions, even blocks cycle through the base-`alphabet` digits of `i`.
/// The reference continues after the last block.
pub fn construct_scrambled_tuple<T: Scalar>(
    targets: &[SymbolicPoint],
    params: &ConstructionParams<T>,
) -> Result<ConstructedTuple<T>, Dc1Error> {
    let n = targets.len();
    if n < 2 {
        return Err(Dc1Error::TupleTooSmall(n));
    }
    let alphabet = targets[0].alphabet();
    if targets.iter().any(|t| t.alphabet() != alphabet) {
        return Err(Dc1Error::MixedAlphabets);
    }
    let mut window = 1;
    while (alphabet as usize).pow(window as u32) < n {
        window += 1;
    }
    for i in 0..n {
        for j in i + 1..n {
            if targets[i] == targets[j] {
                return Err(Dc1Error::RepeatedTarget(i, j));
            }
        }
    }
    let prefix_len = dyadic_floor_exponent(&params.epsilon, RUN_CAP) as usize;
    if prefix_len > RUN_CAP as usize {
        return Err(Dc1Error::ThresholdTooSmall(params.epsilon.to_string()));
    }
    let loss = dyadic_strict_exponent(&params.certify_epsilon, RUN_CAP) as usize;
    if loss > RUN_CAP as usize {
        return Err(Dc1Error::ThresholdTooSmall(params.certify_epsilon.to_string()));
    }
    let blocks = params.rule.lengths(params.depth);
    let (predicted_proximal, predicted_separated) = predicted_densities(prefix_len, &blocks, loss, window - 1);
    let level = (T::one() - params.eta.clone()).to_f64();
    if params.depth < 2 || predicted_proximal <= level || predicted_separated <= level {
        return Err(Dc1Error::DepthTooSmall {
            depth: params.depth,
            level: level.to_string(),
            proximal: predicted_proximal,
            separated: predicted_separated,
        });
    }
    let reference = match &params.reference {
        Some(r) if r.alphabet() == alphabet => r.clone(),
        Some(_) => return Err(Dc1Error::MixedAlphabets),
        None => SymbolicPoint::constant(0, alphabet)?,
    };
    let horizon = prefix_len + blocks.iter().sum::<usize>();
    let system = SymbolicSystem::new(alphabet)?;
    let tail = reference.shifted(horizon);
    let mut points = Vec::with_capacity(n);
    let mut target_distances = Vec::with_capacity(n);
    for (i, target) in targets.iter().enumerate() {
        let digits: Vec<u8> = (0..window)
            .map(|k| ((i / (alphabet as usize).pow(k as u32)) % alphabet as usize) as u8)
            .collect();
        let mut pre = target.prefix(prefix_len);
        pre.reserve(horizon - prefix_len);
        for (j, &len) in blocks.iter().enumerate() {
            let start = pre.len();
            if j % 2 == 0 {
                pre.extend((start..start + len).map(|k| reference.symbol(k)));
            } else {
                pre.extend((start..start + len).map(|k| digits[k % window]));
            }
        }
        let point = SymbolicPoint::new(pre, tail.period().to_vec(), alphabet)?;
        let point = if tail.preperiod().is_empty() {
            point
        } else {
            let mut full = point.prefix(horizon);
            full.extend_from_slice(tail.preperiod());
            SymbolicPoint::new(full, tail.period().to_vec(), alphabet)?
        };
        target_distances.push(system.distance(&point, target));
        points.push(point);
    }
    Ok(ConstructedTuple {
        points,
        prefix_len,
        blocks,
        window,
        horizon,
        predicted_proximal,
        predicted_separated,
        target_distances,
    })
}

/// Best densities over block ends, charging the prefix against both phases
/// and the last `loss` (resp. `sep_loss`) positions of every proximal
/// (resp. separated) block against that phase.
fn predicted_densities(prefix: usize, blocks: &[usize], loss: usize, sep_loss: usize) -> (f64, f64) {
    let (mut prox, mut sep, mut end) = (0usize, 0usize, prefix);
    let (mut best_prox, mut best_sep) = (0f64, 0f64);
    for (j, &len) in blocks.iter().enumerate() {
        end += len;
        if j % 2 == 0 {
            prox += len.saturating_sub(loss);
            best_prox = best_prox.max(prox as f64 / end as f64);
        } else {
            sep += len.saturating_sub(sep_loss);
            best_sep = best_sep.max(sep as f64 / end as f64);
        }
    }
    (best_prox, best_sep)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplingReport {
    pub n: usize,
    pub samples: usize,
    pub certified: usize,
    pub rate: f64,
    pub failures: Vec<usize>,
    /// Smallest witnessed densities across samples.
    pub min_proximal: f64,
    pub min_separated: f64,
    pub max_horizon: usize,
}

/// Draws `samples` random target tuples, builds a scrambled tuple within
/// `construction.epsilon` of each and tests it.
pub fn residual_sampling_check<T: Scalar>(
    system: &SymbolicSystem,
    n: usize,
    samples: usize,
    construction: &ConstructionParams<T>,
    test: &Dc1Params<T>,
    seed: u64,
) -> Result<SamplingReport, Dc1Error> {
    let outcomes = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = trial_rng(seed, s as u64);
            let targets = random_targets(&mut rng, system.alphabet(), n)?;
            let tuple = construct_scrambled_tuple(&targets, construction)?;
            let within = tuple.target_distances.iter().all(|d| *d <= construction.epsilon);
            let params = Dc1Params {
                horizon: test.horizon.max(tuple.horizon),
                ..test.clone()
            };
            let cert = dc1_test_symbolic(&tuple.points, &params)?;
            let prox = cert.proximal.iter().map(|w| w.density.value).fold(1f64, f64::min);
            Ok((cert.accepted && within, prox, cert.separated.density.value, params.horizon))
        })
        .collect::<Result<Vec<_>, Dc1Error>>()?;
    let certified = outcomes.iter().filter(|o| o.0).count();
    Ok(SamplingReport {
        n,
        samples,
        certified,
        rate: if samples == 0 { 0.0 } else { certified as f64 / samples as f64 },
        failures: outcomes.iter().enumerate().filter(|(_, o)| !o.0).map(|(i, _)| i).collect(),
        min_proximal: outcomes.iter().map(|o| o.1).fold(1f64, f64::min),
        min_separated: outcomes.iter().map(|o| o.2).fold(1f64, f64::min),
        max_horizon: outcomes.iter().map(|o| o.3).max().unwrap_or(0),
    })
}

/// `n` pairwise distinct random eventually periodic points.
pub fn random_targets<R: Rng>(rng: &mut R, alphabet: u8, n: usize) -> Result<Vec<SymbolicPoint>, Dc1Error> {
    let mut out: Vec<SymbolicPoint> = Vec::with_capacity(n);
    while out.len() < n {
        let p = SymbolicPoint::random(rng, alphabet, 8, 8)?;
        if !out.contains(&p) {
            out.push(p);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistalTuple<T> {
    pub points: Vec<usize>,
    pub r: T,
    /// Steps `k` for which the bound was checked.
    pub horizon: usize,
    /// The joint orbit closed its cycle within the horizon, so the bound
    /// holds for all `k`.
    pub exact: bool,
}

/// Preperiod and period of every state's orbit.
fn orbit_shapes<T: Scalar>(system: &FiniteSystem<T>) -> Vec<(usize, usize)> {
    let n = system.len();
    let mut shape: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut on_path = vec![usize::MAX; n];
    for x in 0..n {
        let mut path = Vec::new();
        let mut y = x;
        while shape[y].is_none() && on_path[y] == usize::MAX {
            on_path[y] = path.len();
            path.push(y);
            y = system.image(y);
        }
        if let Some((pre, per)) = shape[y] {
            for (i, &p) in path.iter().enumerate() {
                shape[p] = Some((pre + path.len() - i, per));
            }
        } else {
            let start = on_path[y];
            let per = path.len() - start;
            for (i, &p) in path.iter().enumerate() {
                shape[p] = Some((start.saturating_sub(i), per));
            }
        }
        for &p in &path {
            on_path[p] = usize::MAX;
        }
    }
    shape.into_iter().map(|s| s.expect("every state visited")).collect()
}

/// Tuples of distinct states from `class` whose joint orbit keeps every
/// pairwise distance at least `r` for `k < horizon`, in lexicographic order,
/// stopping after `limit` results.
pub fn find_distal_tuples<T: Scalar>(
    system: &FiniteSystem<T>,
    class: &[usize],
    n: usize,
    r: &T,
    horizon: usize,
    limit: Option<usize>,
) -> Result<Vec<DistalTuple<T>>, Dc1Error> {
    system.require_single_valued()?;
    if n < 2 {
        return Err(Dc1Error::TupleTooSmall(n));
    }
    let mut members = class.to_vec();
    members.sort_unstable();
    members.dedup();
    let shapes = orbit_shapes(system);
    let mut found = Vec::new();
    let mut idx: Vec<usize> = (0..n).collect();
    if members.len() < n {
        return Ok(found);
    }
    loop {
        let tuple: Vec<usize> = idx.iter().map(|&i| members[i]).collect();
        if let Some(t) = check_distal(system, &shapes, &tuple, r, horizon) {
            found.push(t);
            if limit.is_some_and(|l| found.len() >= l) {
                break;
            }
        }
        // Next combination in lexicographic order.
        let mut i = n;
        while i > 0 && idx[i - 1] == members.len() - n + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        idx[i - 1] += 1;
        for j in i..n {
            idx[j] = idx[j - 1] + 1;
        }
    }
    Ok(found)
}

fn check_distal<T: Scalar>(
    system: &FiniteSystem<T>,
    shapes: &[(usize, usize)],
    tuple: &[usize],
    r: &T,
    horizon: usize,
) -> Option<DistalTuple<T>> {
    use num_integer::Integer;
    let pre = tuple.iter().map(|&x| shapes[x].0).max().unwrap_or(0);
    let period = tuple.iter().fold(1usize, |acc, &x| acc.lcm(&shapes[x].1));
    let closes = pre.saturating_add(period);
    let steps = horizon.min(closes);
    let mut cur = tuple.to_vec();
    for _ in 0..steps {
        for i in 0..cur.len() {
            for j in i + 1..cur.len() {
                if system.distance(cur[i], cur[j]) < *r {
                    return None;
                }
            }
        }
        for x in cur.iter_mut() {
            *x = system.image(*x);
        }
    }
    Some(DistalTuple {
        points: tuple.to_vec(),
        r: r.clone(),
        horizon: steps,
        exact: closes <= horizon,
    })
}

/// Pushes a distal tuple forward until all coordinates lie in class
/// `target`. Returns the shifted tuple and the number of steps.
pub fn transport_distal<T: Scalar>(
    system: &FiniteSystem<T>,
    classes: &CyclicDecomposition<T>,
    tuple: &DistalTuple<T>,
    target: usize,
) -> Result<(DistalTuple<T>, usize), Dc1Error> {
    let same = |pts: &[usize]| pts.iter().all(|&x| classes.class_of[x] == classes.class_of[pts[0]]);
    if !same(&tuple.points) {
        return Err(Dc1Error::MixedClasses);
    }
    let mut pts = tuple.points.clone();
    for k in 0..classes.period {
        if classes.class_of[pts[0]] == target {
            return Ok((
                DistalTuple {
                    points: pts,
                    r: tuple.r.clone(),
                    horizon: tuple.horizon.saturating_sub(k),
                    exact: tuple.exact,
                },
                k,
            ));
        }
        for x in pts.iter_mut() {
            *x = system.image(*x);
        }
    }
    Err(Dc1Error::ClassUnreachable {
        target,
        period: classes.period,
    })
}

/// `m,<label>,…` rows of `Φ(m)` sampled every `stride` windows.
pub fn profiles_csv<T: Scalar>(profiles: &[(&str, &DensityProfile<T>)], stride: usize) -> String {
    let mut out = String::from("m");
    for (label, _) in profiles {
        out.push(',');
        out.push_str(label);
    }
    out.push('\n');
    let horizon = profiles.iter().map(|(_, p)| p.horizon).min().unwrap_or(0);
    let stride = stride.max(1);
    let mut m = 1;
    while m <= horizon {
        let _ = write!(out, "{m}");
        for (_, p) in profiles {
            let d = p.value(m);
            let _ = write!(out, ",{}", d.value);
        }
        out.push('\n');
        if m == horizon {
            break;
        }
        m = (m + stride).min(horizon);
    }
    out
}
