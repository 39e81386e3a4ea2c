//! End-to-end acceptance checks. Runs without the test harness so every
//! check prints one PASS/FAIL line; exits nonzero if any check fails.

use std::error::Error as StdError;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use num_integer::Integer;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use chainscope::chain_graph::{build_chain_graph, scc, ChainGraph};
use chainscope::cyclic::{
    continuity_modulus, decompose, default_ladder, period, refine_ladder, refine_ladder_partial, sim_delta,
    transient_bound, CyclicDecomposition,
};
use chainscope::dc1::{
    geometric_block_pair, proximal_profile_symbolic, residual_sampling_check, separated_profile_symbolic,
    BlockRule, ConstructionParams, Dc1Params, TupleTrace,
};
use chainscope::entropy::entropy_estimate;
use chainscope::report::{finite_view, scan_pairs};
use chainscope::shadowing::{
    approximate_by_class_orbit, chain_of_length, composite_shadow, find_shadow, random_pseudo_orbit_with,
    trial_rng,
};
use chainscope::systems::{SymbolicSystem, WordMap};
use chainscope::{load_system, Exact, FiniteSystem, Scalar, SystemSpec};

type Outcome = Result<(bool, String), Box<dyn StdError>>;

const ENTROPY_REL_TOL: f64 = 0.15;
const ZERO_ENTROPY_CEILING: f64 = 0.05;
const DC1_DENSITY_FLOOR: f64 = 8.0 / 9.0;

fn r(n: i64, d: i64) -> Exact {
    Exact::new(n, d)
}

fn odometer(k: u32) -> FiniteSystem<Exact> {
    FiniteSystem::odometer(k).expect("odometer")
}

fn period3() -> FiniteSystem<Exact> {
    FiniteSystem::explicit(
        (0..3).map(|i| (0..3).map(|j| if i == j { r(0, 1) } else { r(1, 1) }).collect()).collect(),
        vec![vec![1], vec![2], vec![0]],
    )
    .expect("3-cycle")
}

/// gcd of the lengths `k <= n` of closed walks; every simple cycle has
/// length at most `n` and every closed walk splits into simple cycles.
fn closed_walk_gcd(adj: &[Vec<usize>]) -> usize {
    let n = adj.len();
    let mut reach: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|j| i == j).collect()).collect();
    let mut g = 0;
    for k in 1..=n {
        reach = reach
            .iter()
            .map(|row| {
                let mut next = vec![false; n];
                for (u, _) in row.iter().enumerate().filter(|(_, &b)| b) {
                    for &v in &adj[u] {
                        next[v] = true;
                    }
                }
                next
            })
            .collect();
        if (0..n).any(|i| reach[i][i]) {
            g = g.gcd(&k);
        }
    }
    g
}

fn random_strong_graph(rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    loop {
        let n = rng.random_range(1..=12);
        let p = rng.random_range(0.08..0.5);
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        // A random Hamiltonian cycle half the time, so high periods show up.
        if rng.random_bool(0.5) {
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            for i in 0..n {
                adj[perm[i]].push(perm[(i + 1) % n]);
            }
        }
        for u in 0..n {
            for v in 0..n {
                if rng.random_bool(p * 0.5) && !adj[u].contains(&v) {
                    adj[u].push(v);
                }
            }
        }
        let graph = ChainGraph::from_adjacency(r(1, 1), adj.clone());
        if scc(&graph).count() == 1 && graph.edge_count() > 0 {
            return adj;
        }
    }
}

fn period_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = 0;
    let mut seen = std::collections::BTreeSet::new();
    for _ in 0..200 {
        let adj = random_strong_graph(&mut rng);
        let expected = closed_walk_gcd(&adj);
        let got = period(&ChainGraph::from_adjacency(r(1, 1), adj))?;
        seen.insert(expected);
        if got != expected {
            mismatches += 1;
        }
    }
    Ok((mismatches == 0, format!("200 graphs, {mismatches} mismatches, periods seen {seen:?}")))
}

/// Whether every same-class pair is joined by a chain of length exactly
/// `len`, by set iteration over the adjacency lists.
fn all_pairs_at_length(graph: &ChainGraph<Exact>, decomp: &CyclicDecomposition<Exact>, len: usize) -> bool {
    (0..graph.len()).all(|x| {
        let mut row = vec![false; graph.len()];
        row[x] = true;
        for _ in 0..len {
            let mut next = vec![false; graph.len()];
            for u in (0..graph.len()).filter(|&u| row[u]) {
                for &v in graph.out(u) {
                    next[v] = true;
                }
            }
            row = next;
        }
        decomp.class_members(x).iter().all(|&y| row[y])
    })
}

fn odometer_ladder() -> Outcome {
    let sys = odometer(3);
    let mut notes = Vec::new();
    let mut ok = true;
    for (delta, m) in [(r(1, 10), 8), (r(1, 4), 4), (r(1, 2), 2), (r(1, 1), 1)] {
        let graph = build_chain_graph(&sys, &delta);
        let d = decompose(&graph)?;
        let residues = (0..8).all(|x| (0..8).all(|y| (d.class_of[x] == d.class_of[y]) == (x % m == y % m)));
        let edges = (0..8).all(|u| graph.out(u).iter().all(|&v| d.class_of[v] == (d.class_of[u] + 1) % m));
        ok &= d.period == m && residues && edges && d.classes.len() == m;
        notes.push(format!("m({delta})={}", d.period));
    }
    let graph = build_chain_graph(&sys, &r(1, 4));
    let d = decompose(&graph)?;
    let n = transient_bound(&graph, &d)?;
    // N = 1 is minimal by definition; the oracle confirms every block count up to 8.
    let dp = (1..=8).all(|b| all_pairs_at_length(&graph, &d, b * d.period));
    ok &= n == 1 && dp;
    notes.push(format!("N(1/4)={n}, length-DP {}", if dp { "agrees" } else { "disagrees" }));
    Ok((ok, notes.join(", ")))
}

fn builtin_systems() -> Vec<(&'static str, FiniteSystem<Exact>)> {
    let words = |map| FiniteSystem::shift_words(6, 2, map).expect("words");
    vec![
        ("odometer k=4", odometer(4)),
        ("doubling L=256", FiniteSystem::doubling(256).expect("doubling")),
        ("tent L=128", FiniteSystem::tent(128).expect("tent")),
        ("logistic L=128", FiniteSystem::logistic(128).expect("logistic")),
        ("rotation words L=6", words(WordMap::Rotation)),
        ("explicit 3-cycle", period3()),
    ]
}

fn ladder_monotone() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for (name, sys) in builtin_systems() {
        let (ladder, _) = refine_ladder_partial(&sys, &default_ladder(&sys))?;
        let Some(ladder) = ladder else {
            notes.push(format!("{name}: no level"));
            ok = false;
            continue;
        };
        let levels = ladder.levels();
        let nested = levels.windows(2).all(|w| {
            w[1].classes.iter().all(|fine| {
                w[0].classes.iter().filter(|coarse| fine.iter().all(|x| coarse.contains(x))).count() == 1
            })
        });
        ok &= nested;
        notes.push(format!("{name}: {} levels{}", levels.len(), if nested { "" } else { " NOT nested" }));
    }
    Ok((ok, notes.join("; ")))
}

fn chain_is_valid(sys: &FiniteSystem<Exact>, chain: &[usize], delta: &Exact) -> bool {
    chain.windows(2).all(|w| sys.distance(sys.image(w[0]), w[1]) <= *delta)
}

fn chain_properties() -> Outcome {
    let cases = vec![
        ("odometer k=3 δ=1/4", odometer(3), r(1, 4)),
        ("odometer k=4 δ=1/2", odometer(4), r(1, 2)),
        ("doubling L=1024 δ=2/L", FiniteSystem::doubling(1024)?, r(2, 1024)),
        ("tent L=256 δ=1/64", FiniteSystem::tent(256)?, r(1, 64)),
        ("explicit 3-cycle δ=1/2", period3(), r(1, 2)),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut notes = Vec::new();
    let mut ok = true;
    for (name, sys, delta) in cases {
        let graph = build_chain_graph(&sys, &delta);
        let d = decompose(&graph)?;
        let n_bound = transient_bound(&graph, &d)?;
        let size = sys.len();
        let close = (0..size)
            .all(|x| (0..size).all(|y| sys.distance(x, y) > delta || sim_delta(&d, x, y)));
        let mut self_missing = 0;
        for x in 0..size {
            for n in (n_bound..).take_while(|n| n * d.period <= 64) {
                match chain_of_length(&graph, x, x, n * d.period) {
                    Some(c) if c.len() == n * d.period + 1 && chain_is_valid(&sys, &c, &delta) => {}
                    _ => self_missing += 1,
                }
            }
        }
        let mut pair_failures = 0;
        for _ in 0..100 {
            let x = rng.random_range(0..size);
            let class = d.class_members(x);
            let y = class[rng.random_range(0..class.len())];
            let n = n_bound + rng.random_range(0..4);
            let len = n * d.period;
            match chain_of_length(&graph, x, y, len) {
                Some(c) if c[0] == x && c[len] == y && chain_is_valid(&sys, &c, &delta) => {}
                _ => pair_failures += 1,
            }
        }
        ok &= close && self_missing == 0 && pair_failures == 0;
        notes.push(format!(
            "{name}: m={} N={n_bound} close⇒∼ {close}, self-chain gaps {self_missing}, pair failures {pair_failures}",
            d.period
        ));
    }
    Ok((ok, notes.join("; ")))
}

fn continuity() -> Outcome {
    let sys = odometer(3);
    let ladder = refine_ladder(&sys, &[r(1, 1), r(1, 2), r(1, 4), r(1, 10)])?;
    let eps = r(3, 10);
    let delta = continuity_modulus(&sys, &ladder, &eps)?;
    let coarse = ladder.levels().iter().find(|l| l.delta == delta).expect("level");
    let finest = ladder.finest();
    // D^δ(x) ⊆ D(x) ∪ {y : d(y, D(x)) < ε}, checked point by point.
    let inclusion = (0..sys.len()).all(|x| {
        coarse.class_members(x).iter().all(|&y| {
            finest.class_members(x).iter().any(|&a| a == y || sys.distance(y, a) < eps)
        })
    });
    Ok((delta == r(1, 4) && inclusion, format!("δ(0.3)={delta}, exhaustive inclusion {inclusion}")))
}

fn class_projection() -> Outcome {
    let cases = vec![
        ("odometer k=3", odometer(3), vec![r(1, 1), r(1, 2), r(1, 4)], r(1, 4), r(3, 10), 60),
        (
            "doubling L=4096",
            FiniteSystem::doubling(4096)?,
            vec![r(1, 2), r(1, 4), r(1, 8), r(1, 16)],
            r(2, 1000),
            r(1, 100),
            200,
        ),
    ];
    let mut notes = Vec::new();
    let mut ok = true;
    for (name, sys, deltas, delta, gamma, len) in cases {
        let ladder = refine_ladder(&sys, &deltas)?;
        let mut failures = 0;
        for t in 0..100 {
            let orbit = random_pseudo_orbit_with(&sys, &delta, len, &mut trial_rng(6, t))?;
            match approximate_by_class_orbit(&sys, &ladder, &orbit, &gamma) {
                Ok(a) if a.same_start && a.within_gamma && a.class_constrained => {}
                _ => failures += 1,
            }
        }
        ok &= failures == 0;
        notes.push(format!("{name}: {failures}/100 failures"));
    }
    Ok((ok, notes.join("; ")))
}

/// `sup_i d(f^i z, x_i)` by direct iteration.
fn recomputed_sup(sys: &FiniteSystem<Exact>, z: usize, states: &[usize]) -> Exact {
    let mut y = z;
    let mut best = r(0, 1);
    for &x in states {
        best = best.max(sys.distance(y, x));
        y = sys.image(y);
    }
    best
}

fn composite() -> Outcome {
    let sys = FiniteSystem::<Exact>::doubling(4096)?;
    let ladder = refine_ladder(&sys, &default_ladder(&sys))?;
    let (eps, delta) = (r(1, 100), r(2, 1000));
    let gamma = eps.clone() / r(2, 1);
    let mut failures = 0;
    let mut mismatched = 0;
    for t in 0..100 {
        let orbit = random_pseudo_orbit_with(&sys, &delta, 200, &mut trial_rng(7, t))?;
        match composite_shadow(&sys, &ladder, &orbit, &eps, &gamma) {
            Ok(c) => match &c.class_shadow {
                Some(s) => {
                    let sup = recomputed_sup(&sys, s.shadow, &orbit.states);
                    if sup != c.original_sup {
                        mismatched += 1;
                    }
                    if !(c.within_epsilon && sup < eps) {
                        failures += 1;
                    }
                }
                None => failures += 1,
            },
            Err(_) => failures += 1,
        }
    }
    Ok((
        failures == 0 && mismatched == 0,
        format!("{failures}/100 not ε-shadowed, {mismatched} recount mismatches"),
    ))
}

fn shadowing_constant() -> Outcome {
    let sys = FiniteSystem::<Exact>::doubling(4096)?;
    let delta = r(4, 1000);
    let bound = delta.clone() * r(5, 2);
    let mut failures = 0;
    let mut worst: Option<Exact> = None;
    for t in 0..100 {
        let orbit = random_pseudo_orbit_with(&sys, &delta, 200, &mut trial_rng(8, t))?;
        match find_shadow(&sys, &orbit, &bound, None, false)? {
            Some(s) if recomputed_sup(&sys, s.shadow, &orbit.states) <= bound => {}
            _ => failures += 1,
        }
        if t < 5 {
            let best = chainscope::shadowing::best_shadow(&sys, &orbit, None, false, None)?.expect("nonempty");
            worst = Some(worst.map_or(best.sup_error.clone(), |w: Exact| w.max(best.sup_error)));
        }
    }
    let worst = worst.map(|w| format!("{:.4}", w.to_f64())).unwrap_or_default();
    Ok((
        failures == 0,
        format!("{failures}/100 not 2.5δ-shadowed; best sup error over first 5 trials up to {worst}"),
    ))
}

fn dc1_counts() -> Outcome {
    let (a, b) = geometric_block_pair(10, 4)?;
    let pair = [a, b];
    let prox = proximal_profile_symbolic::<Exact>(&pair, &r(3, 5), 1110)?;
    let sep = separated_profile_symbolic::<Exact>(&pair, &r(2, 5), 1110)?;
    // Recount: d > 0.4 iff the sequences differ at position 0 or 1, d < 0.6 iff they agree at 0.
    let b_seq = |i: usize| -> u8 { pair[1].prefix(i + 2)[i] };
    let recount = |m: usize, pred: &dyn Fn(usize) -> bool| (0..m).filter(|&i| pred(i)).count() as i64;
    let agree0 = |i: usize| b_seq(i) == 0;
    let differ01 = |i: usize| b_seq(i) != 0 || b_seq(i + 1) != 0;
    let got = [prox.value(10).exact(), sep.value(110).exact(), prox.value(1110).exact()];
    let oracle = [
        Ratio::new(recount(10, &agree0), 10),
        Ratio::new(recount(110, &differ01), 110),
        Ratio::new(recount(1110, &agree0), 1110),
    ];
    let expected = [Ratio::new(1, 1), Ratio::new(100, 110), Ratio::new(1010, 1110)];
    Ok((
        got == expected && got == oracle,
        format!(
            "Φ_prox(0.6,10)={}, Φ_sep(0.4,110)={}, Φ_prox(0.6,1110)={}; recount {}/{}/{}; expected 1, 100/110, 1010/1110",
            got[0], got[1], got[2], oracle[0], oracle[1], oracle[2]
        ),
    ))
}

fn dc1_sampling() -> Outcome {
    let system = SymbolicSystem::new(2)?;
    let construction = ConstructionParams {
        epsilon: r(1, 32),
        depth: 8,
        rule: BlockRule::default(),
        reference: None,
        certify_epsilon: r(1, 64),
        eta: r(3, 25),
    };
    let test = Dc1Params {
        delta_n: r(2, 5),
        epsilons: (1..=6).map(|k| r(1, 1 << k)).collect(),
        horizon: 100_000,
        eta: r(3, 25),
        min_window: 100_000,
    };
    let mut notes = Vec::new();
    let mut ok = true;
    for (n, samples) in [(2, 50), (3, 20)] {
        let rep = residual_sampling_check(&system, n, samples, &construction, &test, 10 + n as u64)?;
        ok &= rep.rate == 1.0
            && rep.min_proximal >= DC1_DENSITY_FLOOR
            && rep.min_separated >= DC1_DENSITY_FLOOR
            && rep.max_horizon <= 2_000_000;
        notes.push(format!(
            "n={n}: {}/{} certified, min prox {:.4}, min sep {:.4}, horizon {}",
            rep.certified, rep.samples, rep.min_proximal, rep.min_separated, rep.max_horizon
        ));
    }
    Ok((ok, notes.join("; ")))
}

fn odometer_negative() -> Outcome {
    let sys = odometer(6);
    let params = Dc1Params {
        delta_n: r(2, 5),
        epsilons: (1..=6).map(|k| r(1, 1 << k)).collect(),
        horizon: 256,
        eta: r(3, 25),
        min_window: 1,
    };
    let scan = scan_pairs(&sys, &params, None, usize::MAX, 0)?;
    let mut constant = true;
    for x in 0..sys.len() {
        for y in x + 1..sys.len() {
            let trace = TupleTrace::finite(&sys, &[x, y], 256)?;
            for e in params.epsilons.iter().chain([&params.delta_n]) {
                for p in [trace.proximal(e)?, trace.separated(e)?] {
                    let first = p.value(1).exact();
                    constant &= p.values().all(|v| v.exact() == first);
                }
            }
        }
    }
    Ok((
        scan.exhaustive && scan.certified == 0 && constant,
        format!(
            "{} pairs (exhaustive {}), {} certified, profiles constant {constant}",
            scan.pairs_tested, scan.exhaustive, scan.certified
        ),
    ))
}

fn entropy_gate() -> Outcome {
    let ln2 = 2f64.ln();
    let full_spec = SystemSpec::from_json(r#"{"backend":"full_shift","params":{"word_len":12}}"#)?;
    let (full, _) = finite_view(&full_spec, load_system::<Exact>(&full_spec)?)?;
    let doubling = FiniteSystem::<f64>::doubling(1 << 14)?;
    let dbl = entropy_estimate(&doubling, &0.0625, &[2, 3, 4, 5, 6])?.slope;
    let fs = entropy_estimate(&full, &r(1, 2), &(2..=10).collect::<Vec<_>>())?.slope;
    let odo = entropy_estimate(&odometer(6), &r(1, 8), &(2..=8).collect::<Vec<_>>())?.slope;
    let cyc = entropy_estimate(&period3(), &r(1, 2), &(2..=8).collect::<Vec<_>>())?.slope;
    let near = |s: f64| (s - ln2).abs() <= ENTROPY_REL_TOL * ln2;
    Ok((
        near(dbl) && near(fs) && odo < ZERO_ENTROPY_CEILING && cyc < ZERO_ENTROPY_CEILING,
        format!("doubling {dbl:.4}, full shift {fs:.4}, odometer {odo:.4}, 3-cycle {cyc:.4} (ln 2 = {ln2:.4})"),
    ))
}

fn determinism() -> Outcome {
    let dir = std::env::temp_dir().join(format!("chainscope-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let mut notes = Vec::new();
    let mut ok = true;
    for (name, spec) in [
        ("odometer", r#"{"backend":"odometer","params":{"k":4}}"#),
        ("doubling", r#"{"backend":"doubling","params":{"L":256}}"#),
        ("full_shift", r#"{"backend":"full_shift","params":{}}"#),
    ] {
        let path = dir.join(format!("{name}.json"));
        std::fs::write(&path, spec)?;
        let run = || {
            Command::new(env!("CARGO_BIN_EXE_chainscope"))
                .args(["analyze", "--seed", "42", "--system"])
                .arg(&path)
                .output()
        };
        let (a, b) = (run()?, run()?);
        let same = a.status.success() && b.status.success() && a.stdout == b.stdout && !a.stdout.is_empty();
        ok &= same;
        notes.push(format!("{name}: {} bytes, identical {same}", a.stdout.len()));
    }
    std::fs::remove_dir_all(&dir)?;
    Ok((ok, notes.join("; ")))
}

fn main() -> ExitCode {
    let checks: [(&str, fn() -> Outcome, Duration); 13] = [
        ("period_matches_cycle_gcd", period_oracle, Duration::from_secs(10)),
        ("odometer_ladder", odometer_ladder, Duration::from_secs(1)),
        ("ladder_classes_nested", ladder_monotone, Duration::from_secs(6)),
        ("chain_properties", chain_properties, Duration::from_secs(30)),
        ("continuity_modulus_odometer", continuity, Duration::from_secs(1)),
        ("class_orbit_projection", class_projection, Duration::from_secs(30)),
        ("composite_shadow_doubling", composite, Duration::from_secs(300)),
        ("shadowing_constant_doubling", shadowing_constant, Duration::from_secs(300)),
        ("dc1_exact_counts", dc1_counts, Duration::from_secs(1)),
        ("dc1_sampling_full_shift", dc1_sampling, Duration::from_secs(600)),
        ("odometer_no_dc1_pairs", odometer_negative, Duration::from_secs(10)),
        ("entropy_slopes", entropy_gate, Duration::from_secs(120)),
        ("analyze_deterministic", determinism, Duration::from_secs(120)),
    ];
    let mut failed = 0;
    for (i, (name, check, budget)) in checks.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let (pass, detail) = match outcome {
            Ok((pass, detail)) => (pass && elapsed <= *budget, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!(
            "[{:02}] {name}: {} ({:.2}s of {}s) {detail}",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("{} passed, {failed} failed", checks.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
