//! Entropy from greedy `(n, ε)`-spanning sets under the Bowen metric
//! `d_n(x, y) = max_{0 <= k < n} d(f^k x, f^k y)`.
//!
//! Greedy counts are upper bounds on the minimal spanning counts; only the
//! growth rate is used, as a least-squares slope of `ln N(n, ε)` in `n`.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::scalar::Scalar;
use crate::systems::{FiniteSystem, SystemError};

/// Slopes at or below this many nats per step count as zero entropy.
pub const POSITIVE_SLOPE_FLOOR: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EntropyError {
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("need at least 3 distinct horizons, got {0}")]
    TooFewHorizons(usize),
    #[error("horizons must be at least 1")]
    ZeroHorizon,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyEstimate<T> {
    pub epsilon: T,
    pub horizons: Vec<usize>,
    pub counts: Vec<usize>,
    /// Least-squares slope of `ln N` against `n`, in nats per step, floored at 0.
    pub slope: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
    pub positive: bool,
}

impl<T: Scalar> EntropyEstimate<T> {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,count\n");
        for (n, c) in self.horizons.iter().zip(&self.counts) {
            out.push_str(&format!("{n},{c}\n"));
        }
        out
    }
}

/// `table[k][x] = f^k(x)` for `k < n`.
fn orbit_table<T: Scalar>(system: &FiniteSystem<T>, n: usize) -> Vec<Vec<usize>> {
    let mut table = Vec::with_capacity(n);
    table.push((0..system.len()).collect::<Vec<_>>());
    for k in 1..n {
        let next = table[k - 1].iter().map(|&x| system.image(x)).collect();
        table.push(next);
    }
    table
}

fn bowen_within<T: Scalar>(system: &FiniteSystem<T>, table: &[Vec<usize>], n: usize, x: usize, y: usize, epsilon: &T) -> bool {
    (0..n).all(|k| system.distance(table[k][x], table[k][y]) <= *epsilon)
}

fn greedy_count<T: Scalar>(system: &FiniteSystem<T>, table: &[Vec<usize>], n: usize, epsilon: &T) -> usize {
    let mut covered = vec![false; system.len()];
    let mut count = 0;
    for x in 0..system.len() {
        if covered[x] {
            continue;
        }
        count += 1;
        // Bowen balls sit inside the time-0 ball.
        for y in system.ball(x, epsilon) {
            if !covered[y] && bowen_within(system, table, n, x, y, epsilon) {
                covered[y] = true;
            }
        }
    }
    count
}

/// Size of the greedy spanning set that repeatedly takes the smallest
/// uncovered state and covers its closed Bowen ball of radius `epsilon`.
pub fn spanning_count<T: Scalar>(system: &FiniteSystem<T>, n: usize, epsilon: &T) -> Result<usize, EntropyError> {
    system.require_single_valued()?;
    if n == 0 {
        return Err(EntropyError::ZeroHorizon);
    }
    Ok(greedy_count(system, &orbit_table(system, n), n, epsilon))
}

/// Least-squares slope and RMS residual of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum();
    (slope, (rss / k).sqrt())
}

pub fn entropy_estimate<T: Scalar>(
    system: &FiniteSystem<T>,
    epsilon: &T,
    horizons: &[usize],
) -> Result<EntropyEstimate<T>, EntropyError> {
    system.require_single_valued()?;
    let mut horizons = horizons.to_vec();
    horizons.sort_unstable();
    horizons.dedup();
    if horizons.len() < 3 {
        return Err(EntropyError::TooFewHorizons(horizons.len()));
    }
    if horizons[0] == 0 {
        return Err(EntropyError::ZeroHorizon);
    }
    let table = orbit_table(system, *horizons.last().expect("nonempty"));
    let counts: Vec<usize> = horizons
        .par_iter()
        .map(|&n| greedy_count(system, &table, n, epsilon))
        .collect();
    let xs: Vec<f64> = horizons.iter().map(|&n| n as f64).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let (slope, residual) = fit_slope(&xs, &ys);
    let slope = slope.max(0.0);
    Ok(EntropyEstimate {
        epsilon: epsilon.clone(),
        horizons,
        counts,
        positive: slope > POSITIVE_SLOPE_FLOOR,
        slope,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::WordMap;
    use crate::Exact;

    fn r(n: i64, d: i64) -> Exact {
        Exact::new(n, d)
    }

    /// Smallest spanning set by exhaustive subset search.
    fn minimal_count(system: &FiniteSystem<Exact>, n: usize, epsilon: &Exact) -> usize {
        let table = orbit_table(system, n);
        let size = system.len();
        let covers: Vec<u64> = (0..size)
            .map(|x| {
                (0..size)
                    .filter(|&y| bowen_within(system, &table, n, x, y, epsilon))
                    .fold(0u64, |m, y| m | 1 << y)
            })
            .collect();
        let full = if size == 64 { u64::MAX } else { (1u64 << size) - 1 };
        for k in 1..=size {
            let mut idx: Vec<usize> = (0..k).collect();
            loop {
                if idx.iter().fold(0u64, |m, &i| m | covers[i]) == full {
                    return k;
                }
                let mut i = k;
                while i > 0 && idx[i - 1] == size - k + i - 1 {
                    i -= 1;
                }
                if i == 0 {
                    break;
                }
                idx[i - 1] += 1;
                for j in i..k {
                    idx[j] = idx[j - 1] + 1;
                }
            }
        }
        size
    }

    #[test]
    fn trivial_counts() {
        let sys = FiniteSystem::<Exact>::doubling(64).unwrap();
        assert_eq!(spanning_count(&sys, 1, &r(1, 2)).unwrap(), 1);
        let id = FiniteSystem::<Exact>::explicit(
            (0..4).map(|i| (0..4).map(|j| r((i as i64 - j as i64).abs(), 4)).collect()).collect(),
            (0..4).map(|i| vec![i]).collect(),
        )
        .unwrap();
        let c1 = spanning_count(&id, 1, &r(1, 4)).unwrap();
        assert!((2..10).all(|n| spanning_count(&id, n, &r(1, 4)).unwrap() == c1));
    }

    #[test]
    fn greedy_bounds_minimal() {
        let sys = FiniteSystem::<Exact>::doubling(16).unwrap();
        for n in 1..4 {
            for eps in [r(1, 8), r(1, 4)] {
                let greedy = spanning_count(&sys, n, &eps).unwrap();
                let minimal = minimal_count(&sys, n, &eps);
                assert!(minimal <= greedy && greedy <= 2 * minimal, "n={n} eps={eps}: {minimal} {greedy}");
            }
        }
    }

    #[test]
    fn monotone_in_n_and_epsilon() {
        let sys = FiniteSystem::<Exact>::tent(256).unwrap();
        let eps = [r(1, 4), r(1, 8), r(1, 16)];
        let grid: Vec<Vec<usize>> = eps
            .iter()
            .map(|e| (1..7).map(|n| spanning_count(&sys, n, e).unwrap()).collect())
            .collect();
        for row in &grid {
            assert!(row.windows(2).all(|w| w[0] <= w[1]));
        }
        for n in 0..6 {
            assert!(grid[0][n] <= grid[1][n] && grid[1][n] <= grid[2][n]);
        }
    }

    #[test]
    fn doubling_count_scale() {
        let sys = FiniteSystem::<f64>::doubling(1 << 14).unwrap();
        let c = spanning_count(&sys, 6, &0.0625).unwrap();
        // Bowen balls have half-width ε·2^-(n-1), so about 2^(n-1)/ε greedy balls.
        let predicted = 32.0 / 0.0625;
        assert!((c as f64) > predicted / 2.0 && (c as f64) < predicted * 2.0, "{c}");
    }

    #[test]
    fn slopes() {
        let words = FiniteSystem::<Exact>::shift_words(12, 2, WordMap::Rotation).unwrap();
        let est = entropy_estimate(&words, &r(1, 2), &(2..=10).collect::<Vec<_>>()).unwrap();
        assert!((est.slope - 2f64.ln()).abs() < 1e-9);
        assert!(est.residual < 1e-9);
        let odo = FiniteSystem::<Exact>::odometer(6).unwrap();
        let est = entropy_estimate(&odo, &r(1, 8), &[2, 4, 6, 8]).unwrap();
        assert_eq!(est.slope, 0.0);
        assert!(!est.positive);
        assert!(est.to_csv().starts_with("n,count\n2,"));
        assert_eq!(entropy_estimate(&odo, &r(1, 8), &[2, 2, 3]), Err(EntropyError::TooFewHorizons(2)));
    }
}
