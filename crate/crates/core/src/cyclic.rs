//! Cyclic decompositions of strongly connected δ-chain graphs.
//!
//! For a strongly connected graph the period `m` is the gcd of all cycle
//! lengths. Labelling every state with its BFS depth from a root modulo `m`
//! gives the classes `D₀, …, D_{m-1}`: each edge moves class `i` to class
//! `i + 1 (mod m)`, and two states are `∼_δ`-equivalent iff they share a
//! class. A descending ladder of thresholds yields nested decompositions
//! whose finest level stands in for the limit relation `∼`.

use std::collections::VecDeque;

use num_integer::Integer;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::chain_graph::{build_chain_graph, scc, ChainGraph};
use crate::scalar::Scalar;
use crate::systems::FiniteSystem;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CyclicError {
    #[error("graph is not strongly connected ({components} components)")]
    NotStronglyConnected { components: usize },
    #[error("period {given} does not match the graph period {actual}")]
    PeriodMismatch { given: usize, actual: usize },
    #[error("transient bound not reached within {cap} iterations")]
    TransientCapExceeded { cap: usize },
    #[error("level {level} (delta = {delta}) is not chain transitive")]
    NotChainTransitive { level: usize, delta: String },
    #[error("no ladder level satisfies the class inclusion at epsilon = {epsilon}")]
    ContinuityFailure { epsilon: String },
    #[error("ladder thresholds must be strictly descending")]
    NotDescending,
    #[error("ladder is empty")]
    EmptyLadder,
    #[error("level {level} is not a refinement of level {coarser}")]
    NotNested { level: usize, coarser: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CyclicDecomposition<T> {
    pub delta: T,
    pub period: usize,
    pub class_of: Vec<usize>,
    pub classes: Vec<Vec<usize>>,
}

impl<T> CyclicDecomposition<T> {
    pub fn class_sizes(&self) -> Vec<usize> {
        self.classes.iter().map(Vec::len).collect()
    }

    pub fn class_members(&self, x: usize) -> &[usize] {
        &self.classes[self.class_of[x]]
    }
}

fn bfs_levels<T: Scalar>(graph: &ChainGraph<T>, root: usize) -> Vec<Option<usize>> {
    let mut level = vec![None; graph.len()];
    let mut queue = VecDeque::new();
    level[root] = Some(0);
    queue.push_back(root);
    while let Some(u) = queue.pop_front() {
        let lu = level[u].expect("queued states have a level");
        for &v in graph.out(u) {
            if level[v].is_none() {
                level[v] = Some(lu + 1);
                queue.push_back(v);
            }
        }
    }
    level
}

fn require_strongly_connected<T: Scalar>(graph: &ChainGraph<T>) -> Result<(), CyclicError> {
    let components = if graph.is_empty() { 0 } else { scc(graph).count() };
    if components == 1 {
        Ok(())
    } else {
        Err(CyclicError::NotStronglyConnected { components })
    }
}

/// gcd over edges `(u, v)` of `ℓ(u) + 1 - ℓ(v)` for BFS depths `ℓ`.
fn period_from_levels<T: Scalar>(graph: &ChainGraph<T>, level: &[Option<usize>]) -> usize {
    let mut g = 0usize;
    for u in 0..graph.len() {
        let lu = level[u].expect("strongly connected") as i64;
        for &v in graph.out(u) {
            let lv = level[v].expect("strongly connected") as i64;
            g = g.gcd(&((lu + 1 - lv).unsigned_abs() as usize));
        }
    }
    g
}

/// Gcd of the lengths of all cycles.
pub fn period<T: Scalar>(graph: &ChainGraph<T>) -> Result<usize, CyclicError> {
    require_strongly_connected(graph)?;
    Ok(period_from_levels(graph, &bfs_levels(graph, 0)))
}

/// Classes `BFS depth (mod m)` from root 0, so state 0 is in class 0.
pub fn cyclic_classes<T: Scalar>(graph: &ChainGraph<T>, m: usize) -> Result<CyclicDecomposition<T>, CyclicError> {
    require_strongly_connected(graph)?;
    let level = bfs_levels(graph, 0);
    let actual = period_from_levels(graph, &level);
    if m != actual {
        return Err(CyclicError::PeriodMismatch { given: m, actual });
    }
    let class_of: Vec<usize> = level.iter().map(|l| l.expect("strongly connected") % m).collect();
    let mut classes = vec![Vec::new(); m];
    for (x, &c) in class_of.iter().enumerate() {
        classes[c].push(x);
    }
    Ok(CyclicDecomposition {
        delta: graph.delta().clone(),
        period: m,
        class_of,
        classes,
    })
}

/// Period and classes in one call.
pub fn decompose<T: Scalar>(graph: &ChainGraph<T>) -> Result<CyclicDecomposition<T>, CyclicError> {
    let m = period(graph)?;
    cyclic_classes(graph, m)
}

/// `x ∼_δ y`.
pub fn sim_delta<T>(decomp: &CyclicDecomposition<T>, x: usize, y: usize) -> bool {
    decomp.class_of[x] == decomp.class_of[y]
}

type Bits = Vec<u64>;

fn bits_with(n: usize, members: impl IntoIterator<Item = usize>) -> Bits {
    let mut b = vec![0u64; n.div_ceil(64)];
    for x in members {
        b[x / 64] |= 1 << (x % 64);
    }
    b
}

fn image_bits<T: Scalar>(graph: &ChainGraph<T>, set: &Bits) -> Bits {
    let mut out = vec![0u64; set.len()];
    for (w, &word) in set.iter().enumerate() {
        let mut word = word;
        while word != 0 {
            let u = w * 64 + word.trailing_zeros() as usize;
            word &= word - 1;
            for &v in graph.out(u) {
                out[v / 64] |= 1 << (v % 64);
            }
        }
    }
    out
}

/// Smallest `N >= 1` such that for every `n >= N` and every same-class pair
/// `(x, y)` there is a δ-chain of length exactly `m·n` from `x` to `y`.
///
/// Row `x` of the reachability relation after `n` blocks of `m` steps is
/// iterated until it equals the class of `x`; once full it stays full,
/// because every state has an `m`-step predecessor in its own class.
pub fn transient_bound<T: Scalar>(graph: &ChainGraph<T>, decomp: &CyclicDecomposition<T>) -> Result<usize, CyclicError> {
    require_strongly_connected(graph)?;
    let n = graph.len();
    let cap = n * n;
    let class_bits: Vec<Bits> = decomp.classes.iter().map(|c| bits_with(n, c.iter().copied())).collect();
    let per_state: Vec<Option<usize>> = (0..n)
        .into_par_iter()
        .map(|x| {
            let target = &class_bits[decomp.class_of[x]];
            let mut row = bits_with(n, [x]);
            for blocks in 1..=cap {
                for _ in 0..decomp.period {
                    row = image_bits(graph, &row);
                }
                if &row == target {
                    return Some(blocks);
                }
            }
            None
        })
        .collect();
    per_state
        .into_iter()
        .try_fold(1usize, |acc, b| b.map(|b| acc.max(b)))
        .ok_or(CyclicError::TransientCapExceeded { cap })
}

/// Nested cyclic decompositions over strictly descending thresholds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceLadder<T> {
    levels: Vec<CyclicDecomposition<T>>,
}

/// Where a ladder stopped because a level was not chain transitive.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderStop<T> {
    pub level: usize,
    pub delta: T,
    pub components: usize,
}

impl<T: Scalar> EquivalenceLadder<T> {
    /// Wraps precomputed levels, checking order and nesting.
    pub fn from_levels(levels: Vec<CyclicDecomposition<T>>) -> Result<Self, CyclicError> {
        if levels.is_empty() {
            return Err(CyclicError::EmptyLadder);
        }
        if levels.windows(2).any(|w| w[1].delta >= w[0].delta) {
            return Err(CyclicError::NotDescending);
        }
        let ladder = EquivalenceLadder { levels };
        ladder.check_nested()?;
        Ok(ladder)
    }

    pub fn levels(&self) -> &[CyclicDecomposition<T>] {
        &self.levels
    }

    pub fn deltas(&self) -> Vec<T> {
        self.levels.iter().map(|l| l.delta.clone()).collect()
    }

    pub fn finest(&self) -> &CyclicDecomposition<T> {
        self.levels.last().expect("ladder is nonempty")
    }

    pub fn periods(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.period).collect()
    }

    /// Each class at level `j + 1` lies inside a single class at level `j`.
    pub fn check_nested(&self) -> Result<(), CyclicError> {
        for (j, pair) in self.levels.windows(2).enumerate() {
            let (coarse, fine) = (&pair[0], &pair[1]);
            for class in &fine.classes {
                let owner = coarse.class_of[class[0]];
                if class.iter().any(|&x| coarse.class_of[x] != owner) {
                    return Err(CyclicError::NotNested { level: j + 1, coarser: j });
                }
            }
        }
        Ok(())
    }
}

/// Builds every level, stopping before the first one that is not chain
/// transitive.
pub fn refine_ladder_partial<T: Scalar>(
    system: &FiniteSystem<T>,
    deltas: &[T],
) -> Result<(Option<EquivalenceLadder<T>>, Option<LadderStop<T>>), CyclicError> {
    if deltas.is_empty() {
        return Err(CyclicError::EmptyLadder);
    }
    if deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(CyclicError::NotDescending);
    }
    let mut levels = Vec::with_capacity(deltas.len());
    let mut stop = None;
    for (level, delta) in deltas.iter().enumerate() {
        let graph = build_chain_graph(system, delta);
        match decompose(&graph) {
            Ok(d) => levels.push(d),
            Err(CyclicError::NotStronglyConnected { components }) => {
                stop = Some(LadderStop {
                    level,
                    delta: delta.clone(),
                    components,
                });
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let ladder = if levels.is_empty() {
        None
    } else {
        Some(EquivalenceLadder::from_levels(levels)?)
    };
    Ok((ladder, stop))
}

/// Builds the ladder; every level must be chain transitive.
pub fn refine_ladder<T: Scalar>(system: &FiniteSystem<T>, deltas: &[T]) -> Result<EquivalenceLadder<T>, CyclicError> {
    match refine_ladder_partial(system, deltas)? {
        (Some(ladder), None) => Ok(ladder),
        (_, Some(stop)) => Err(CyclicError::NotChainTransitive {
            level: stop.level,
            delta: stop.delta.to_string(),
        }),
        (None, None) => Err(CyclicError::EmptyLadder),
    }
}

/// `start, start·ratio, …` for `levels` terms.
pub fn geometric_ladder<T: Scalar>(start: &T, ratio: &T, levels: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(levels);
    let mut cur = start.clone();
    for _ in 0..levels {
        out.push(cur.clone());
        cur = cur * ratio.clone();
    }
    out
}

/// `diameter / 2^j`, down to and including the first term at or below the
/// system's resolution.
pub fn default_ladder<T: Scalar>(system: &FiniteSystem<T>) -> Vec<T> {
    let resolution = system.resolution();
    let half = T::from_ratio(1, 2);
    let mut out = Vec::new();
    let mut cur = system.diameter();
    loop {
        out.push(cur.clone());
        if cur <= resolution || out.len() >= 64 {
            break;
        }
        cur = cur * half.clone();
    }
    out
}

/// The finest-level class of `x`: the computable stand-in for `D(x)`.
pub fn class_d<T: Scalar>(ladder: &EquivalenceLadder<T>, x: usize) -> &[usize] {
    ladder.finest().class_members(x)
}

/// Whether every member of `coarse`'s class of `x` lies in
/// `B_ε(D(x)) = D(x) ∪ {y : d(y, D(x)) < ε}` for every `x`.
pub fn classes_within<T: Scalar>(
    system: &FiniteSystem<T>,
    coarse: &CyclicDecomposition<T>,
    finest: &CyclicDecomposition<T>,
    epsilon: &T,
) -> bool {
    finest.classes.par_iter().enumerate().all(|(f, members)| {
        let rep = members[0];
        coarse.class_members(rep).iter().all(|&y| {
            finest.class_of[y] == f || members.iter().any(|&a| system.distance(y, a) < *epsilon)
        })
    })
}

/// Largest ladder δ, strictly coarser than the finest level, with
/// `D^δ(x) ⊆ B_ε(D(x))` for all `x`. A single-level ladder returns its δ.
pub fn continuity_modulus<T: Scalar>(
    system: &FiniteSystem<T>,
    ladder: &EquivalenceLadder<T>,
    epsilon: &T,
) -> Result<T, CyclicError> {
    let levels = ladder.levels();
    let finest = ladder.finest();
    let candidates = if levels.len() == 1 { levels } else { &levels[..levels.len() - 1] };
    candidates
        .iter()
        .find(|level| classes_within(system, level, finest, epsilon))
        .map(|level| level.delta.clone())
        .ok_or_else(|| CyclicError::ContinuityFailure {
            epsilon: epsilon.to_string(),
        })
}

/// Whether equal-length δ-chains from `x` and `y` reach a common state.
pub fn chains_meet<T: Scalar>(graph: &ChainGraph<T>, x: usize, y: usize) -> bool {
    let n = graph.len();
    if x == y {
        return true;
    }
    let mut seen = vec![0u64; (n * n).div_ceil(64)];
    let mark = |seen: &mut Vec<u64>, a: usize, b: usize| -> bool {
        let i = a * n + b;
        let fresh = seen[i / 64] & (1 << (i % 64)) == 0;
        seen[i / 64] |= 1 << (i % 64);
        fresh
    };
    let mut queue = VecDeque::new();
    mark(&mut seen, x, y);
    queue.push_back((x, y));
    while let Some((a, b)) = queue.pop_front() {
        for &a2 in graph.out(a) {
            for &b2 in graph.out(b) {
                if a2 == b2 {
                    return true;
                }
                if mark(&mut seen, a2, b2) {
                    queue.push_back((a2, b2));
                }
            }
        }
    }
    false
}

/// Chain proximality at every listed threshold.
pub fn chain_proximal<T: Scalar>(system: &FiniteSystem<T>, x: usize, y: usize, deltas: &[T]) -> bool {
    deltas
        .iter()
        .all(|delta| chains_meet(&build_chain_graph(system, delta), x, y))
}
