//! Pseudo-orbits, exhaustive shadow search and the constructive procedures
//! built on top of them: projection onto class-constrained orbits,
//! asymptotic joins and a finite-horizon s-limit check.
//!
//! All searches scan every admissible starting state. `limsup` quantities
//! are reported as maxima over a declared final window of the horizon.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::chain_graph::{build_chain_graph, ChainGraph};
use crate::cyclic::{continuity_modulus, transient_bound, CyclicDecomposition, CyclicError, EquivalenceLadder};
use crate::scalar::{dyadic_strict_exponent, sup, Scalar, MAX_DYADIC_EXPONENT};
use crate::systems::{FiniteSystem, SymbolicPoint, SymbolicSystem, SystemError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShadowError {
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Cyclic(#[from] CyclicError),
    #[error("pseudo-orbit must contain at least one state")]
    EmptyOrbit,
    #[error("step {index} has error {error} above the declared delta {delta}")]
    StepTooLarge { index: usize, error: String, delta: String },
    #[error("step {index} leaves the class of the true image")]
    ClassViolation { index: usize },
    #[error("no class member within beta = {beta} of state {index}")]
    NoClassMember { index: usize, beta: String },
    #[error("a class decomposition is required for class-constrained search")]
    MissingClasses,
    #[error("{x} and {y} are not in the same finest class")]
    DifferentClasses { x: usize, y: usize },
    #[error("no chain of length {len} from {from} to {to}")]
    ChainNotFound { from: usize, to: usize, len: usize },
    #[error("no shadow within epsilon = {epsilon}")]
    ShadowNotFound { epsilon: String },
    #[error("trials must be at least 1")]
    NoTrials,
}

/// Error envelope `e_i <= max(initial * 2^-floor(i / halving), floor)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayProfile<T> {
    pub initial: T,
    pub halving: usize,
    pub floor: T,
}

impl<T: Scalar> DecayProfile<T> {
    pub fn envelope(&self, i: usize) -> T {
        let halvings = (i / self.halving.max(1)).min(MAX_DYADIC_EXPONENT as usize) as u32;
        let e = self.initial.clone() * T::pow2_neg(halvings);
        if e < self.floor {
            self.floor.clone()
        } else {
            e
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PseudoOrbit<T> {
    pub states: Vec<usize>,
    /// `errors[i] = d(f(x_i), x_{i+1})`.
    pub errors: Vec<T>,
    pub delta: T,
    pub class_constrained: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay: Option<DecayProfile<T>>,
}

impl<T: Scalar> PseudoOrbit<T> {
    /// Records the step errors of `states` and checks them against `delta`.
    pub fn from_states(system: &FiniteSystem<T>, states: Vec<usize>, delta: T) -> Result<Self, ShadowError> {
        system.require_single_valued()?;
        if states.is_empty() {
            return Err(ShadowError::EmptyOrbit);
        }
        for &x in &states {
            system.check_state(x)?;
        }
        let errors = step_errors(system, &states);
        if let Some((index, e)) = errors.iter().enumerate().find(|(_, e)| **e > delta) {
            return Err(ShadowError::StepTooLarge {
                index,
                error: e.to_string(),
                delta: delta.to_string(),
            });
        }
        Ok(PseudoOrbit {
            states,
            errors,
            delta,
            class_constrained: false,
            decay: None,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn max_error(&self) -> T {
        sup(self.errors.iter().cloned())
    }

    /// Whether every jump stays in the class of the true image.
    pub fn respects_classes(&self, system: &FiniteSystem<T>, classes: &CyclicDecomposition<T>) -> bool {
        self.states
            .windows(2)
            .all(|w| classes.class_of[system.image(w[0])] == classes.class_of[w[1]])
    }

    /// Re-checks the recorded errors, the delta bound, the class constraint
    /// and the decay envelope.
    pub fn validate(&self, system: &FiniteSystem<T>, classes: Option<&CyclicDecomposition<T>>) -> Result<(), ShadowError> {
        let fresh = step_errors(system, &self.states);
        for (index, e) in fresh.iter().enumerate() {
            let cap = match &self.decay {
                Some(p) => p.envelope(index),
                None => self.delta.clone(),
            };
            if *e != self.errors[index] || *e > self.delta || *e > cap {
                return Err(ShadowError::StepTooLarge {
                    index,
                    error: e.to_string(),
                    delta: cap.to_string(),
                });
            }
        }
        if self.class_constrained {
            let classes = classes.ok_or(ShadowError::MissingClasses)?;
            if let Some(index) = (0..self.states.len().saturating_sub(1))
                .find(|&i| classes.class_of[system.image(self.states[i])] != classes.class_of[self.states[i + 1]])
            {
                return Err(ShadowError::ClassViolation { index });
            }
        }
        Ok(())
    }
}

fn step_errors<T: Scalar>(system: &FiniteSystem<T>, states: &[usize]) -> Vec<T> {
    states
        .windows(2)
        .map(|w| system.distance(system.image(w[0]), w[1]))
        .collect()
}

/// Generator for trial `stream` of a seeded experiment.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn sample_orbit<T: Scalar, R: Rng>(
    system: &FiniteSystem<T>,
    len: usize,
    rng: &mut R,
    mut radius: impl FnMut(usize) -> T,
    mut admissible: impl FnMut(usize, usize) -> bool,
) -> Result<Vec<usize>, ShadowError> {
    system.require_single_valued()?;
    if len == 0 {
        return Err(ShadowError::EmptyOrbit);
    }
    let mut states = Vec::with_capacity(len);
    states.push(rng.random_range(0..system.len()));
    for i in 0..len - 1 {
        let target = system.image(states[i]);
        let r = radius(i);
        let ball: Vec<usize> = system
            .ball(target, &r)
            .into_iter()
            .filter(|&y| admissible(target, y))
            .collect();
        // `target` itself is always admissible, so the ball is never empty.
        states.push(*ball.choose(rng).expect("ball contains the image"));
    }
    Ok(states)
}

/// A δ-pseudo-orbit with a uniform start and each `x_{i+1}` uniform in the
/// closed δ-ball around `f(x_i)`.
pub fn random_pseudo_orbit<T: Scalar>(
    system: &FiniteSystem<T>,
    delta: &T,
    len: usize,
    seed: u64,
) -> Result<PseudoOrbit<T>, ShadowError> {
    random_pseudo_orbit_with(system, delta, len, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn random_pseudo_orbit_with<T: Scalar, R: Rng>(
    system: &FiniteSystem<T>,
    delta: &T,
    len: usize,
    rng: &mut R,
) -> Result<PseudoOrbit<T>, ShadowError> {
    let states = sample_orbit(system, len, rng, |_| delta.clone(), |_, _| true)?;
    PseudoOrbit::from_states(system, states, delta.clone())
}

/// As [`random_pseudo_orbit`], with each jump kept inside the class of the
/// true image.
pub fn random_class_pseudo_orbit<T: Scalar, R: Rng>(
    system: &FiniteSystem<T>,
    classes: &CyclicDecomposition<T>,
    delta: &T,
    len: usize,
    rng: &mut R,
) -> Result<PseudoOrbit<T>, ShadowError> {
    let states = sample_orbit(system, len, rng, |_| delta.clone(), |t, y| {
        classes.class_of[t] == classes.class_of[y]
    })?;
    let mut orbit = PseudoOrbit::from_states(system, states, delta.clone())?;
    orbit.class_constrained = true;
    Ok(orbit)
}

/// A limit pseudo-orbit whose step `i` is drawn from the ball of radius
/// `profile.envelope(i)`.
pub fn random_decaying_pseudo_orbit<T: Scalar, R: Rng>(
    system: &FiniteSystem<T>,
    profile: &DecayProfile<T>,
    len: usize,
    rng: &mut R,
) -> Result<PseudoOrbit<T>, ShadowError> {
    let states = sample_orbit(system, len, rng, |i| profile.envelope(i), |_, _| true)?;
    let mut orbit = PseudoOrbit::from_states(system, states, profile.initial.clone())?;
    orbit.decay = Some(profile.clone());
    Ok(orbit)
}

/// A chain `from = c_0 → … → c_len = to` in `graph`, found by forward
/// reachability layers and backward reconstruction.
pub fn chain_of_length<T: Scalar>(graph: &ChainGraph<T>, from: usize, to: usize, len: usize) -> Option<Vec<usize>> {
    let n = graph.len();
    if from >= n || to >= n || len == 0 {
        return None;
    }
    let mut layers = Vec::with_capacity(len + 1);
    let mut current = vec![false; n];
    current[from] = true;
    layers.push(current);
    for _ in 0..len {
        let prev = layers.last().expect("nonempty");
        let mut next = vec![false; n];
        for u in (0..n).filter(|&u| prev[u]) {
            for &v in graph.out(u) {
                next[v] = true;
            }
        }
        layers.push(next);
    }
    if !layers[len][to] {
        return None;
    }
    let mut chain = vec![to; len + 1];
    for step in (0..len).rev() {
        let v = chain[step + 1];
        chain[step] = (0..n)
            .find(|&u| layers[step][u] && graph.has_edge(u, v))
            .expect("reachable layer has a predecessor");
    }
    Some(chain)
}

/// Result of an exhaustive shadow search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShadowingResult<T> {
    pub shadow: usize,
    pub sup_error: T,
    /// `errors[i] = d(f^i(z), x_i)`.
    pub errors: Vec<T>,
    /// `x_0 ∼ z` at the finest level, when classes were supplied.
    pub class_matched: Option<bool>,
    /// Max error over the final quarter of the horizon.
    pub tail_error: T,
    pub horizon: usize,
}

impl<T: Scalar> ShadowingResult<T> {
    /// Recomputes the trace from `orbit(z)` and compares.
    pub fn verify(&self, system: &FiniteSystem<T>, orbit: &PseudoOrbit<T>) -> bool {
        let trace = tracking_errors(system, self.shadow, &orbit.states);
        trace == self.errors && sup(trace.iter().cloned()) == self.sup_error
    }
}

/// Index where the final quarter of a horizon of `len` steps begins.
pub fn tail_start(len: usize) -> usize {
    len - (len / 4).max(1).min(len)
}

pub fn tracking_errors<T: Scalar>(system: &FiniteSystem<T>, z: usize, states: &[usize]) -> Vec<T> {
    let mut errors = Vec::with_capacity(states.len());
    let mut w = z;
    for &x in states {
        errors.push(system.distance(w, x));
        w = system.image(w);
    }
    errors
}

/// Sup error of `z`, abandoning as soon as it exceeds `bound`.
fn bounded_sup<T: Scalar>(system: &FiniteSystem<T>, z: usize, states: &[usize], bound: Option<&T>) -> Option<T> {
    let mut w = z;
    let mut best = T::zero();
    for &x in states {
        let e = system.distance(w, x);
        if bound.is_some_and(|b| e > *b) {
            return None;
        }
        if e > best {
            best = e;
        }
        w = system.image(w);
    }
    Some(best)
}

fn candidates<T: Scalar>(
    system: &FiniteSystem<T>,
    x0: usize,
    classes: Option<&CyclicDecomposition<T>>,
    require_class: bool,
) -> Result<Vec<usize>, ShadowError> {
    if require_class {
        let classes = classes.ok_or(ShadowError::MissingClasses)?;
        Ok(classes.class_members(x0).to_vec())
    } else {
        Ok((0..system.len()).collect())
    }
}

fn result_for<T: Scalar>(
    system: &FiniteSystem<T>,
    orbit: &PseudoOrbit<T>,
    z: usize,
    classes: Option<&CyclicDecomposition<T>>,
) -> ShadowingResult<T> {
    let errors = tracking_errors(system, z, &orbit.states);
    let tail_error = sup(errors[tail_start(errors.len())..].iter().cloned());
    ShadowingResult {
        shadow: z,
        sup_error: sup(errors.iter().cloned()),
        class_matched: classes.map(|c| c.class_of[z] == c.class_of[orbit.states[0]]),
        tail_error,
        horizon: errors.len(),
        errors,
    }
}

/// The start minimizing the sup error over all admissible candidates
/// (smallest index on ties). With `bound`, candidates exceeding it are
/// dropped early and `None` means nothing is within the bound.
pub fn best_shadow<T: Scalar>(
    system: &FiniteSystem<T>,
    orbit: &PseudoOrbit<T>,
    classes: Option<&CyclicDecomposition<T>>,
    require_class: bool,
    bound: Option<&T>,
) -> Result<Option<ShadowingResult<T>>, ShadowError> {
    system.require_single_valued()?;
    if orbit.is_empty() {
        return Err(ShadowError::EmptyOrbit);
    }
    let starts = candidates(system, orbit.states[0], classes, require_class)?;
    let best = starts
        .par_iter()
        .filter_map(|&z| bounded_sup(system, z, &orbit.states, bound).map(|e| (z, e)))
        .reduce_with(|a, b| {
            if b.1 < a.1 || (b.1 == a.1 && b.0 < a.0) {
                b
            } else {
                a
            }
        });
    Ok(best.map(|(z, _)| result_for(system, orbit, z, classes)))
}

/// The best shadow, returned only when its sup error is at most `epsilon`.
pub fn find_shadow<T: Scalar>(
    system: &FiniteSystem<T>,
    orbit: &PseudoOrbit<T>,
    epsilon: &T,
    classes: Option<&CyclicDecomposition<T>>,
    require_class: bool,
) -> Result<Option<ShadowingResult<T>>, ShadowError> {
    best_shadow(system, orbit, classes, require_class, Some(epsilon))
}

/// Thresholds for projecting a pseudo-orbit onto class-constrained orbits
/// at tolerance `gamma`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionThreshold<T> {
    pub gamma: T,
    /// `β <= γ/3` with `d(a, b) < β ⇒ d(f a, f b) < γ/3`.
    pub beta: T,
    /// Largest coarse ladder δ below `β` whose classes sit inside the
    /// β-neighbourhood of the finest classes; `None` when no level qualifies.
    pub delta: Option<T>,
}

pub fn projection_threshold<T: Scalar>(
    system: &FiniteSystem<T>,
    ladder: &EquivalenceLadder<T>,
    gamma: &T,
) -> Result<ProjectionThreshold<T>, ShadowError> {
    system.require_single_valued()?;
    let third = gamma.clone() / T::from_ratio(3, 1);
    let n = system.len();
    let beta = (0..n)
        .into_par_iter()
        .map(|a| {
            let fa = system.image(a);
            let mut local = third.clone();
            for b in system.open_ball(a, &third) {
                let d = system.distance(a, b);
                if d < local && system.distance(fa, system.image(b)) >= third {
                    local = d;
                }
            }
            local
        })
        .reduce_with(|a, b| if b < a { b } else { a })
        .unwrap_or(third);
    let delta = match continuity_modulus(system, ladder, &beta) {
        Ok(_) => {
            let levels = ladder.levels();
            let coarse = if levels.len() == 1 { levels } else { &levels[..levels.len() - 1] };
            coarse
                .iter()
                .filter(|l| l.delta < beta)
                .find(|l| crate::cyclic::classes_within(system, l, ladder.finest(), &beta))
                .map(|l| l.delta.clone())
        }
        Err(CyclicError::ContinuityFailure { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(ProjectionThreshold {
        gamma: gamma.clone(),
        beta,
        delta,
    })
}

/// Output of [`approximate_by_class_orbit`] with its clause checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassApproximation<T> {
    pub orbit: PseudoOrbit<T>,
    pub threshold: ProjectionThreshold<T>,
    /// `sup_i d(x_i, y_i)`.
    pub sup_distance: T,
    pub same_start: bool,
    pub within_gamma: bool,
    pub class_constrained: bool,
    pub in_orbit_classes: bool,
}

impl<T> ClassApproximation<T> {
    pub fn all_clauses(&self) -> bool {
        self.same_start && self.within_gamma && self.class_constrained && self.in_orbit_classes
    }
}

/// Replaces each `x_i` (`i >= 1`) by the nearest member of the finest class
/// of `f^i(x_0)`, failing when none lies within `β`. `y_0 = x_0`.
pub fn approximate_by_class_orbit<T: Scalar>(
    system: &FiniteSystem<T>,
    ladder: &EquivalenceLadder<T>,
    orbit: &PseudoOrbit<T>,
    gamma: &T,
) -> Result<ClassApproximation<T>, ShadowError> {
    if orbit.is_empty() {
        return Err(ShadowError::EmptyOrbit);
    }
    let threshold = projection_threshold(system, ladder, gamma)?;
    let finest = ladder.finest();
    let x0 = orbit.states[0];
    let true_orbit = system.orbit(x0, orbit.len() - 1)?;
    let mut states = Vec::with_capacity(orbit.len());
    states.push(x0);
    for (i, &x) in orbit.states.iter().enumerate().skip(1) {
        let class = finest.class_members(true_orbit[i]);
        if threshold.beta > T::zero() && finest.class_of[x] == finest.class_of[true_orbit[i]] {
            states.push(x);
            continue;
        }
        let (y, d) = class
            .iter()
            .map(|&y| (y, system.distance(x, y)))
            .reduce(|a, b| if b.1 < a.1 { b } else { a })
            .expect("classes are nonempty");
        if d >= threshold.beta {
            return Err(ShadowError::NoClassMember {
                index: i,
                beta: threshold.beta.to_string(),
            });
        }
        states.push(y);
    }
    let errors = step_errors(system, &states);
    let approx = PseudoOrbit {
        delta: sup(errors.iter().cloned()),
        errors,
        states,
        class_constrained: true,
        decay: None,
    };
    let sup_distance = sup(orbit.states.iter().zip(&approx.states).map(|(&x, &y)| system.distance(x, y)));
    let in_orbit_classes = approx
        .states
        .iter()
        .zip(&true_orbit)
        .all(|(&y, &t)| finest.class_of[y] == finest.class_of[t]);
    Ok(ClassApproximation {
        same_start: approx.states[0] == x0,
        within_gamma: sup_distance < *gamma,
        class_constrained: approx.respects_classes(system, finest),
        in_orbit_classes,
        sup_distance,
        orbit: approx,
        threshold,
    })
}

/// Projection followed by a class-constrained shadow search of the
/// projected orbit at `epsilon / 2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompositeShadow<T> {
    pub approximation: ClassApproximation<T>,
    /// Shadow of the projected orbit; `None` when the search failed.
    pub class_shadow: Option<ShadowingResult<T>>,
    /// Errors of the same shadow against the original orbit.
    pub original_errors: Vec<T>,
    pub original_sup: T,
    /// `d(f^i z, x_i) <= ε/2 + sup d(x_i, y_i) < ε` holds at every step.
    pub within_epsilon: bool,
}

pub fn composite_shadow<T: Scalar>(
    system: &FiniteSystem<T>,
    ladder: &EquivalenceLadder<T>,
    orbit: &PseudoOrbit<T>,
    epsilon: &T,
    gamma: &T,
) -> Result<CompositeShadow<T>, ShadowError> {
    let approximation = approximate_by_class_orbit(system, ladder, orbit, gamma)?;
    let half = epsilon.clone() / T::from_ratio(2, 1);
    let class_shadow = find_shadow(system, &approximation.orbit, &half, Some(ladder.finest()), true)?;
    let (original_errors, original_sup, within_epsilon) = match &class_shadow {
        Some(s) => {
            let errors = tracking_errors(system, s.shadow, &orbit.states);
            let bound = half.clone() + approximation.sup_distance.clone();
            let within = errors.iter().all(|e| *e <= bound && *e < *epsilon);
            let total = sup(errors.iter().cloned());
            (errors, total, within)
        }
        None => (Vec::new(), T::zero(), false),
    };
    Ok(CompositeShadow {
        approximation,
        class_shadow,
        original_errors,
        original_sup,
        within_epsilon,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModulusLevel<T> {
    pub delta: T,
    pub shadowed: usize,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModulusEstimate<T> {
    pub epsilon: T,
    /// Largest tested δ at which every trial was shadowed; zero when only
    /// the degenerate δ = 0 level works.
    pub delta_hat: T,
    pub degenerate: bool,
    pub trials: usize,
    pub len: usize,
    pub require_class: bool,
    pub levels: Vec<ModulusLevel<T>>,
}

/// Sweeps `deltas` from the largest down, sampling `trials` pseudo-orbits of
/// length `len` per level (class-constrained when `require_class`).
#[allow(clippy::too_many_arguments)]
pub fn shadowing_modulus<T: Scalar>(
    system: &FiniteSystem<T>,
    deltas: &[T],
    classes: Option<&CyclicDecomposition<T>>,
    epsilon: &T,
    trials: usize,
    len: usize,
    require_class: bool,
    seed: u64,
) -> Result<ModulusEstimate<T>, ShadowError> {
    if trials == 0 {
        return Err(ShadowError::NoTrials);
    }
    if require_class && classes.is_none() {
        return Err(ShadowError::MissingClasses);
    }
    let mut sorted = deltas.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("comparable thresholds"));
    let mut levels = Vec::new();
    let mut delta_hat = None;
    for (j, delta) in sorted.iter().enumerate() {
        let outcomes = (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = trial_rng(seed, (j * trials + t) as u64);
                let orbit = match classes.filter(|_| require_class) {
                    Some(c) => random_class_pseudo_orbit(system, c, delta, len, &mut rng)?,
                    None => random_pseudo_orbit_with(system, delta, len, &mut rng)?,
                };
                Ok(find_shadow(system, &orbit, epsilon, classes, require_class)?.is_some())
            })
            .collect::<Result<Vec<bool>, ShadowError>>()?;
        let shadowed = outcomes.iter().filter(|&&ok| ok).count();
        levels.push(ModulusLevel {
            delta: delta.clone(),
            shadowed,
            trials,
        });
        if shadowed == trials {
            delta_hat = Some(delta.clone());
            break;
        }
    }
    Ok(ModulusEstimate {
        epsilon: epsilon.clone(),
        degenerate: delta_hat.is_none(),
        delta_hat: delta_hat.unwrap_or_else(T::zero),
        trials,
        len,
        require_class,
        levels,
    })
}

/// Evidence that `z` starts near `y` and is eventually asymptotic to `x`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JoinCertificate<T, P> {
    pub z: P,
    /// `d(y, z)`.
    pub head_distance: T,
    /// `max d(f^k x, f^k z)` over the second half of the horizon.
    pub tail_sup: T,
    pub horizon: usize,
    /// Length `mN` of the connecting chain.
    pub chain_len: usize,
    pub holds: bool,
}

/// Chains `y` to `f^{mN}(x)` in exactly `mN` steps, follows `x`'s true orbit
/// to the horizon and class-shadows the result.
pub fn asymptotic_join<T: Scalar>(
    system: &FiniteSystem<T>,
    ladder: &EquivalenceLadder<T>,
    x: usize,
    y: usize,
    epsilon: &T,
    horizon: usize,
) -> Result<JoinCertificate<T, usize>, ShadowError> {
    system.require_single_valued()?;
    system.check_state(x)?;
    system.check_state(y)?;
    let finest = ladder.finest();
    if finest.class_of[x] != finest.class_of[y] {
        return Err(ShadowError::DifferentClasses { x, y });
    }
    let graph = build_chain_graph(system, &finest.delta);
    let blocks = transient_bound(&graph, finest)?;
    let chain_len = finest.period * blocks;
    let target = system.iterate(x, chain_len);
    let chain = chain_of_length(&graph, y, target, chain_len).ok_or(ShadowError::ChainNotFound {
        from: y,
        to: target,
        len: chain_len,
    })?;
    let horizon = horizon.max(chain_len + 1);
    let mut states = chain;
    let mut w = target;
    while states.len() < horizon {
        w = system.image(w);
        states.push(w);
    }
    states.truncate(horizon);
    let errors = step_errors(system, &states);
    let orbit = PseudoOrbit {
        delta: sup(errors.iter().cloned()),
        errors,
        states,
        class_constrained: true,
        decay: None,
    };
    let shadow = find_shadow(system, &orbit, epsilon, Some(finest), true)?
        .ok_or_else(|| ShadowError::ShadowNotFound {
            epsilon: epsilon.to_string(),
        })?;
    let z = shadow.shadow;
    let head_distance = system.distance(y, z);
    let (xs, zs) = (system.orbit(x, horizon - 1)?, system.orbit(z, horizon - 1)?);
    let tail_sup = sup((horizon / 2..horizon).map(|k| system.distance(xs[k], zs[k])));
    Ok(JoinCertificate {
        holds: head_distance < *epsilon && tail_sup < *epsilon,
        z,
        head_distance,
        tail_sup,
        horizon,
        chain_len,
    })
}

/// The symbolic join `z = y_0 … y_{p-1} σ^p(x)` with `p` the least length
/// for which `2^-p < ε`. Exact: `σ^k z = σ^k x` for every `k >= p`.
pub fn asymptotic_join_symbolic<T: Scalar>(
    system: &SymbolicSystem,
    x: &SymbolicPoint,
    y: &SymbolicPoint,
    epsilon: &T,
    horizon: usize,
) -> Result<JoinCertificate<T, SymbolicPoint>, ShadowError> {
    let p = dyadic_strict_exponent(epsilon, MAX_DYADIC_EXPONENT) as usize;
    let mut z = x.shifted(p);
    for &s in y.prefix(p).iter().rev() {
        z = z.prepend(s)?;
    }
    let horizon = horizon.max(2 * p + 2);
    let head_distance: T = system.distance(y, &z);
    let tail_sup = sup((horizon / 2..horizon).map(|k| system.distance::<T>(&x.shifted(k), &z.shifted(k))));
    Ok(JoinCertificate {
        holds: head_distance < *epsilon && tail_sup < *epsilon,
        z,
        head_distance,
        tail_sup,
        horizon,
        chain_len: p,
    })
}

/// Finite-horizon proxy for s-limit shadowing: some start must ε-shadow the
/// orbit with final-quarter error at most `tail_tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SLimitVerdict<T> {
    pub holds: bool,
    pub shadow: Option<ShadowingResult<T>>,
    pub tail_tolerance: T,
    pub horizon: usize,
    pub window: &'static str,
}

pub fn s_limit_check<T: Scalar>(
    system: &FiniteSystem<T>,
    orbit: &PseudoOrbit<T>,
    epsilon: &T,
    tail_tolerance: &T,
) -> Result<SLimitVerdict<T>, ShadowError> {
    system.require_single_valued()?;
    if orbit.is_empty() {
        return Err(ShadowError::EmptyOrbit);
    }
    let start = tail_start(orbit.len());
    let best = (0..system.len())
        .into_par_iter()
        .filter_map(|z| {
            let errors = tracking_errors(system, z, &orbit.states);
            let total = sup(errors.iter().cloned());
            if total > *epsilon {
                return None;
            }
            Some((z, sup(errors[start..].iter().cloned())))
        })
        .reduce_with(|a, b| {
            if b.1 < a.1 || (b.1 == a.1 && b.0 < a.0) {
                b
            } else {
                a
            }
        });
    let shadow = best.map(|(z, _)| result_for(system, orbit, z, None));
    Ok(SLimitVerdict {
        holds: shadow.as_ref().is_some_and(|s| s.tail_error <= *tail_tolerance),
        shadow,
        tail_tolerance: tail_tolerance.clone(),
        horizon: orbit.len(),
        window: "final quarter",
    })
}

/// A symbolic δ-pseudo-orbit: `x_{i+1}` keeps the symbols of `σ(x_i)` that
/// `d <= δ` forces and continues with a fresh random point.
pub fn random_symbolic_pseudo_orbit<T: Scalar, R: Rng>(
    system: &SymbolicSystem,
    delta: &T,
    len: usize,
    rng: &mut R,
) -> Result<Vec<SymbolicPoint>, ShadowError> {
    if len == 0 {
        return Err(ShadowError::EmptyOrbit);
    }
    let keep = crate::scalar::dyadic_floor_exponent(delta, MAX_DYADIC_EXPONENT) as usize;
    let alphabet = system.alphabet();
    let mut orbit = vec![SymbolicPoint::random(rng, alphabet, 8, 8)?];
    while orbit.len() < len {
        let image = system.shift(orbit.last().expect("nonempty"));
        let mut next = SymbolicPoint::random(rng, alphabet, 8, 8)?;
        for &s in image.prefix(keep).iter().rev() {
            next = next.prepend(s)?;
        }
        orbit.push(next);
    }
    Ok(orbit)
}

/// Exact shadow of a symbolic pseudo-orbit: `z_i` is the first symbol of
/// `x_i`, followed by the last point verbatim.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymbolicShadow<T> {
    pub shadow: SymbolicPoint,
    pub errors: Vec<T>,
    pub sup_error: T,
}

pub fn shadow_symbolic<T: Scalar>(
    system: &SymbolicSystem,
    orbit: &[SymbolicPoint],
) -> Result<SymbolicShadow<T>, ShadowError> {
    let (last, head) = orbit.split_last().ok_or(ShadowError::EmptyOrbit)?;
    let mut z = last.clone();
    for x in head.iter().rev() {
        z = z.prepend(x.prefix(1)[0])?;
    }
    let errors: Vec<T> = orbit
        .iter()
        .enumerate()
        .map(|(i, x)| system.distance(&z.shifted(i), x))
        .collect();
    Ok(SymbolicShadow {
        sup_error: sup(errors.iter().cloned()),
        shadow: z,
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cyclic::{decompose, refine_ladder};
    use crate::systems::WordMap;
    use crate::Exact;

    fn r(n: i64, d: i64) -> Exact {
        Exact::new(n, d)
    }

    fn three_cycle() -> FiniteSystem<Exact> {
        let d = (0..3)
            .map(|i| (0..3).map(|j| if i == j { r(0, 1) } else { r(1, 1) }).collect())
            .collect();
        FiniteSystem::explicit(d, vec![vec![1], vec![2], vec![0]]).unwrap()
    }

    fn two_fixed_points() -> FiniteSystem<Exact> {
        FiniteSystem::explicit(
            vec![vec![r(0, 1), r(1, 1)], vec![r(1, 1), r(0, 1)]],
            vec![vec![0], vec![1]],
        )
        .unwrap()
    }

    #[test]
    fn zero_delta_is_true_orbit() {
        let sys = FiniteSystem::<Exact>::doubling(64).unwrap();
        let orbit = random_pseudo_orbit(&sys, &r(0, 1), 20, 7).unwrap();
        assert_eq!(orbit.states, sys.orbit(orbit.states[0], 19).unwrap());
        let s = find_shadow(&sys, &orbit, &r(0, 1), None, false).unwrap().unwrap();
        assert_eq!(s.sup_error, r(0, 1));
        assert_eq!(s.shadow, orbit.states[0]);
        assert!(s.verify(&sys, &orbit));
    }

    #[test]
    fn odometer_steps() {
        let sys = FiniteSystem::<Exact>::odometer(3).unwrap();
        let orbit = random_pseudo_orbit(&sys, &r(1, 4), 6, 11).unwrap();
        for w in orbit.states.windows(2) {
            let step = (w[1] + 8 - w[0]) % 8;
            assert!(step == 1 || step == 5, "{:?}", orbit.states);
        }
        assert!(orbit.validate(&sys, None).is_ok());
    }

    #[test]
    fn doubling_step_errors() {
        let sys = FiniteSystem::<Exact>::doubling(1024).unwrap();
        let orbit = random_pseudo_orbit(&sys, &r(4, 1024), 100, 3).unwrap();
        assert_eq!(orbit.errors.len(), 99);
        for (i, w) in orbit.states.windows(2).enumerate() {
            let e = sys.distance(sys.image(w[0]), w[1]);
            assert_eq!(e, orbit.errors[i]);
            assert!(e <= r(4, 1024));
        }
    }

    #[test]
    fn chains_of_exact_length() {
        let sys = three_cycle();
        let g = build_chain_graph(&sys, &r(1, 2));
        assert_eq!(chain_of_length(&g, 0, 0, 3), Some(vec![0, 1, 2, 0]));
        assert_eq!(chain_of_length(&g, 0, 0, 4), None);
        let odo = FiniteSystem::<Exact>::odometer(3).unwrap();
        let g = build_chain_graph(&odo, &r(1, 4));
        assert_eq!(chain_of_length(&g, 0, 4, 4), Some(vec![0, 1, 2, 3, 4]));
    }

    #[test]
    fn two_fixed_points_cannot_be_shadowed() {
        let sys = two_fixed_points();
        let orbit = PseudoOrbit::from_states(&sys, vec![0, 1, 0, 1], r(1, 1)).unwrap();
        assert_eq!(find_shadow(&sys, &orbit, &r(1, 3), None, false).unwrap(), None);
        assert!(matches!(
            PseudoOrbit::from_states(&sys, vec![0, 1], r(1, 2)),
            Err(ShadowError::StepTooLarge { index: 0, .. })
        ));
    }

    #[test]
    fn class_search_stays_in_class() {
        let sys = FiniteSystem::<Exact>::odometer(3).unwrap();
        let ladder = refine_ladder(&sys, &[r(1, 1), r(1, 2), r(1, 4)]).unwrap();
        let finest = ladder.finest();
        let mut rng = trial_rng(5, 0);
        for _ in 0..20 {
            let orbit = random_class_pseudo_orbit(&sys, finest, &r(1, 4), 12, &mut rng).unwrap();
            assert!(orbit.validate(&sys, Some(finest)).is_ok());
            if let Some(s) = find_shadow(&sys, &orbit, &r(1, 1), Some(finest), true).unwrap() {
                assert_eq!(s.class_matched, Some(true));
                assert!(s.verify(&sys, &orbit));
            }
        }
    }

    #[test]
    fn best_shadow_matches_brute_force() {
        let sys = FiniteSystem::<Exact>::tent(32).unwrap();
        for seed in 0..10 {
            let orbit = random_pseudo_orbit(&sys, &r(2, 32), 15, seed).unwrap();
            let best = best_shadow(&sys, &orbit, None, false, None).unwrap().unwrap();
            let oracle = (0..sys.len())
                .map(|z| sup(tracking_errors(&sys, z, &orbit.states)))
                .fold(None::<Exact>, |acc, e| Some(acc.map_or(e, |a| a.min(e))))
                .unwrap();
            assert_eq!(best.sup_error, oracle);
            assert!(best.verify(&sys, &orbit));
        }
    }

    #[test]
    fn shift_words_projection_is_identity() {
        let sys = FiniteSystem::<Exact>::shift_words(6, 2, WordMap::Rotation).unwrap();
        let ladder = refine_ladder(&sys, &[r(1, 1), r(1, 2), r(1, 4)]).unwrap();
        assert_eq!(ladder.finest().period, 1);
        let orbit = random_pseudo_orbit(&sys, &r(1, 8), 30, 1).unwrap();
        let approx = approximate_by_class_orbit(&sys, &ladder, &orbit, &r(1, 2)).unwrap();
        assert_eq!(approx.orbit.states, orbit.states);
        assert_eq!(approx.sup_distance, r(0, 1));
        assert!(approx.all_clauses());
    }

    #[test]
    fn odometer_projection_tracks_classes() {
        let sys = FiniteSystem::<Exact>::odometer(3).unwrap();
        let ladder = refine_ladder(&sys, &[r(1, 1), r(1, 2), r(1, 4)]).unwrap();
        let gamma = r(3, 5);
        let threshold = projection_threshold(&sys, &ladder, &gamma).unwrap();
        assert_eq!(threshold.beta, r(1, 5));
        let delta = threshold.delta.clone().unwrap_or(r(1, 8));
        for seed in 0..20 {
            let orbit = random_pseudo_orbit(&sys, &delta, 16, seed).unwrap();
            let approx = approximate_by_class_orbit(&sys, &ladder, &orbit, &gamma).unwrap();
            assert!(approx.all_clauses());
            let x0 = orbit.states[0];
            for (i, &y) in approx.orbit.states.iter().enumerate() {
                assert_eq!(y % 4, (x0 + i) % 4);
            }
        }
    }

    #[test]
    fn projection_reports_failing_index() {
        let sys = FiniteSystem::<Exact>::odometer(3).unwrap();
        let ladder = refine_ladder(&sys, &[r(1, 1), r(1, 2), r(1, 4), r(1, 10)]).unwrap();
        let orbit = PseudoOrbit::from_states(&sys, vec![0, 5, 6], r(1, 4)).unwrap();
        assert!(matches!(
            approximate_by_class_orbit(&sys, &ladder, &orbit, &r(3, 5)),
            Err(ShadowError::NoClassMember { index: 1, .. })
        ));
    }

    #[test]
    fn modulus_trivial_and_isometry() {
        let sys = FiniteSystem::<Exact>::odometer(4).unwrap();
        let deltas = [r(1, 2), r(1, 4), r(1, 8), r(1, 16), r(1, 32)];
        let est = shadowing_modulus(&sys, &deltas, None, &r(2, 1), 5, 20, false, 1).unwrap();
        assert_eq!(est.delta_hat, r(1, 2));
        let ladder = refine_ladder(&sys, &deltas).unwrap();
        let est = shadowing_modulus(&sys, &deltas, Some(ladder.finest()), &r(1, 10), 10, 20, true, 1).unwrap();
        assert!(est.delta_hat >= r(1, 16));
        assert!(!est.degenerate);
    }

    #[test]
    fn join_of_equal_points() {
        let sys = three_cycle();
        let ladder = refine_ladder(&sys, &[r(1, 2)]).unwrap();
        let cert = asymptotic_join(&sys, &ladder, 1, 1, &r(1, 2), 20).unwrap();
        assert_eq!(cert.z, 1);
        assert_eq!(cert.head_distance, r(0, 1));
        assert_eq!(cert.tail_sup, r(0, 1));
        assert!(cert.holds);
        assert!(matches!(
            asymptotic_join(&sys, &ladder, 0, 1, &r(1, 2), 20),
            Err(ShadowError::DifferentClasses { .. })
        ));
    }

    #[test]
    fn symbolic_join_is_exact() {
        let sys = SymbolicSystem::new(2).unwrap();
        let mut rng = trial_rng(9, 0);
        for _ in 0..20 {
            let x = SymbolicPoint::random(&mut rng, 2, 6, 5).unwrap();
            let y = SymbolicPoint::random(&mut rng, 2, 6, 5).unwrap();
            let cert = asymptotic_join_symbolic::<Exact>(&sys, &x, &y, &r(1, 32), 60).unwrap();
            assert!(cert.holds);
            assert!(cert.head_distance < r(1, 32));
            for k in cert.chain_len..cert.horizon {
                assert_eq!(cert.z.shifted(k), x.shifted(k));
            }
        }
    }

    #[test]
    fn symbolic_pseudo_orbits_are_shadowed() {
        let sys = SymbolicSystem::new(3).unwrap();
        let mut rng = trial_rng(2, 0);
        let delta = r(1, 8);
        let orbit = random_symbolic_pseudo_orbit(&sys, &delta, 25, &mut rng).unwrap();
        for w in orbit.windows(2) {
            assert!(sys.distance::<Exact>(&sys.shift(&w[0]), &w[1]) <= delta);
        }
        let s = shadow_symbolic::<Exact>(&sys, &orbit).unwrap();
        assert!(s.sup_error <= r(1, 2) * delta);
    }

    #[test]
    fn symbolic_shadow_of_true_orbit() {
        let sys = SymbolicSystem::new(2).unwrap();
        let x = SymbolicPoint::parse("0110", "10", 2).unwrap();
        let s = shadow_symbolic::<Exact>(&sys, &sys.orbit(&x, 10)).unwrap();
        assert_eq!(s.shadow, x);
        assert_eq!(s.sup_error, r(0, 1));
    }

    #[test]
    fn s_limit_examples() {
        let sys = FiniteSystem::<Exact>::tent(64).unwrap();
        let orbit = random_pseudo_orbit(&sys, &r(0, 1), 40, 2).unwrap();
        let v = s_limit_check(&sys, &orbit, &r(1, 10), &r(0, 1)).unwrap();
        assert!(v.holds);
        assert_eq!(v.shadow.unwrap().tail_error, r(0, 1));

        let sys = two_fixed_points();
        let orbit = PseudoOrbit::from_states(&sys, vec![0, 1, 0, 1, 0, 1, 0, 1], r(1, 1)).unwrap();
        assert!(!s_limit_check(&sys, &orbit, &r(2, 1), &r(1, 2)).unwrap().holds);
    }

    #[test]
    fn decay_envelope() {
        let p = DecayProfile {
            initial: r(1, 4),
            halving: 20,
            floor: r(0, 1),
        };
        assert_eq!(p.envelope(0), r(1, 4));
        assert_eq!(p.envelope(19), r(1, 4));
        assert_eq!(p.envelope(40), r(1, 16));
        let sys = FiniteSystem::<Exact>::doubling(256).unwrap();
        let orbit = random_decaying_pseudo_orbit(&sys, &p, 100, &mut trial_rng(1, 1)).unwrap();
        assert!(orbit.validate(&sys, None).is_ok());
        let _ = decompose(&build_chain_graph(&sys, &r(1, 4))).unwrap();
    }
}
