//! End-to-end analysis pipeline, its JSON report and graph exports.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::chain_graph::{build_chain_graph, ChainGraph};
use crate::cyclic::{
    continuity_modulus, default_ladder, geometric_ladder, refine_ladder_partial, transient_bound, CyclicDecomposition,
    CyclicError, LadderStop,
};
use crate::dc1::{
    dc1_test_finite, residual_sampling_check, BlockRule, ConstructionParams, Dc1Params, SamplingReport,
    ScrambledCertificate,
};
use crate::entropy::{entropy_estimate, EntropyEstimate};
use crate::error::Error;
use crate::scalar::Scalar;
use crate::shadowing::{shadowing_modulus, ModulusEstimate};
use crate::systems::{load_system, FiniteSystem, ScalarInput, System, SystemSpec, WordMap};

pub const TOOL_NAME: &str = "chainscope";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

fn parse_scalar<T: Scalar>(what: &str, input: &ScalarInput) -> Result<T, Error> {
    input
        .to_scalar()
        .ok_or_else(|| Error::Config(format!("{what}: {input:?} is not a number")))
}

fn parse_list<T: Scalar>(what: &str, inputs: &[ScalarInput]) -> Result<Vec<T>, Error> {
    inputs.iter().map(|i| parse_scalar(what, i)).collect()
}

/// A ladder as explicit thresholds, as `start:factor:levels` text, or as
/// the same three numbers in an object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LadderConfig {
    Deltas(Vec<ScalarInput>),
    Geometric {
        start: ScalarInput,
        factor: ScalarInput,
        levels: usize,
    },
    Text(String),
}

impl LadderConfig {
    pub fn deltas<T: Scalar>(&self) -> Result<Vec<T>, Error> {
        match self {
            LadderConfig::Deltas(d) => parse_list("ladder", d),
            LadderConfig::Geometric { start, factor, levels } => Ok(geometric_ladder(
                &parse_scalar("ladder start", start)?,
                &parse_scalar("ladder factor", factor)?,
                *levels,
            )),
            LadderConfig::Text(text) => parse_ladder_text(text),
        }
    }
}

/// Parses `start:factor:levels`, e.g. `1:0.5:4`.
pub fn parse_ladder_text<T: Scalar>(text: &str) -> Result<Vec<T>, Error> {
    let bad = || Error::Config(format!("ladder {text:?} is not start:factor:levels"));
    let parts: Vec<&str> = text.split(':').collect();
    let [start, factor, levels] = parts[..] else {
        return Err(bad());
    };
    let start = T::parse_scalar(start).ok_or_else(bad)?;
    let factor = T::parse_scalar(factor).ok_or_else(bad)?;
    let levels: usize = levels.trim().parse().map_err(|_| bad())?;
    if levels == 0 || factor <= T::zero() || factor >= T::one() || start <= T::zero() {
        return Err(bad());
    }
    Ok(geometric_ladder(&start, &factor, levels))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShadowConfig {
    /// Defaults to a quarter of the diameter.
    pub epsilon: Option<ScalarInput>,
    pub trials: usize,
    pub len: usize,
    pub require_class: bool,
}

impl Default for ShadowConfig {
    fn default() -> Self {
        ShadowConfig {
            epsilon: None,
            trials: 20,
            len: 50,
            require_class: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContinuityConfig {
    /// Defaults to `6/5` of every ladder threshold coarser than the finest.
    pub epsilons: Option<Vec<ScalarInput>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EntropyConfig {
    /// Defaults to a quarter of the diameter.
    pub epsilon: Option<ScalarInput>,
    pub horizons: Vec<usize>,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        EntropyConfig {
            epsilon: None,
            horizons: (2..=6).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Dc1Config {
    /// Defaults to 0.4 times the diameter.
    pub delta_n: Option<ScalarInput>,
    /// Defaults to the diameter times `2^-1 … 2^-6`.
    pub epsilons: Option<Vec<ScalarInput>>,
    pub eta: ScalarInput,
    pub horizon: usize,
    pub min_window: usize,
    /// Pair budget for the scan on finite systems.
    pub max_pairs: usize,
    /// Certificates kept in the report.
    pub keep: usize,
    pub sampling: SamplingConfig,
}

impl Default for Dc1Config {
    fn default() -> Self {
        Dc1Config {
            delta_n: None,
            epsilons: None,
            eta: ScalarInput::Text("0.12".into()),
            horizon: 512,
            min_window: 1,
            max_pairs: 2000,
            keep: 3,
            sampling: SamplingConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    pub tuple_sizes: Vec<usize>,
    pub samples: usize,
    pub epsilon: ScalarInput,
    pub certify_epsilon: ScalarInput,
    pub depth: usize,
    pub min_window: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            tuple_sizes: vec![2],
            samples: 3,
            epsilon: ScalarInput::Text("2^-5".into()),
            certify_epsilon: ScalarInput::Text("2^-6".into()),
            depth: 8,
            min_window: 100_000,
        }
    }
}

/// Every tunable of `analyze`. Missing fields take their defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub ladder: Option<LadderConfig>,
    pub seed: u64,
    pub shadow: ShadowConfig,
    pub continuity: ContinuityConfig,
    pub entropy: EntropyConfig,
    pub dc1: Dc1Config,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Seeds {
    pub base: u64,
    pub shadowing: u64,
    pub dc1: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderLevel<T> {
    pub delta: T,
    pub chain_transitive: bool,
    pub period: Option<usize>,
    pub class_sizes: Vec<usize>,
    pub transient_bound: Option<usize>,
    pub edges: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityRow<T> {
    pub epsilon: T,
    pub delta: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairScan<T> {
    pub pairs_tested: usize,
    pub exhaustive: bool,
    pub certified: usize,
    pub params: Dc1Params<T>,
    pub certificates: Vec<ScrambledCertificate<T, usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Yes,
    No,
    NotAttempted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub status: Status,
    pub basis: String,
}

impl Verdict {
    fn new(ok: bool, basis: impl Into<String>) -> Self {
        Verdict {
            status: if ok { Status::Yes } else { Status::No },
            basis: basis.into(),
        }
    }

    fn skipped(basis: impl Into<String>) -> Self {
        Verdict {
            status: Status::NotAttempted,
            basis: basis.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Hypotheses {
    pub chain_transitive: Verdict,
    pub shadowing_along_classes: Verdict,
    pub continuity: Verdict,
    pub positive_entropy: Verdict,
    pub scrambled_sampling: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport<T> {
    pub tool: ToolInfo,
    pub system: SystemSpec,
    pub scalar: &'static str,
    pub seeds: Seeds,
    /// Finite system the graph analyses ran on, when it differs from the spec.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub proxy: Option<String>,
    pub states: usize,
    pub ladder: Vec<LadderLevel<T>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ladder_stop: Option<LadderStop<T>>,
    pub continuity: Vec<ContinuityRow<T>>,
    pub shadowing: Option<ModulusEstimate<T>>,
    pub dc1_pairs: Option<PairScan<T>>,
    pub dc1_sampling: Vec<SamplingReport>,
    pub entropy: Option<EntropyEstimate<T>>,
    pub hypotheses: Hypotheses,
}

/// Name of the scalar type in reports.
pub fn scalar_name<T: 'static>() -> &'static str {
    let id = std::any::TypeId::of::<T>();
    if id == std::any::TypeId::of::<f64>() {
        "f64"
    } else if id == std::any::TypeId::of::<f32>() {
        "f32"
    } else {
        "exact"
    }
}

/// The finite system graph analyses run on: the system itself, or a
/// rotation-word proxy for the full shift.
pub fn finite_view<T: Scalar>(spec: &SystemSpec, system: System<T>) -> Result<(FiniteSystem<T>, Option<String>), Error> {
    Ok(match (system, spec) {
        (System::Finite(f), _) => (f, None),
        (System::Symbolic(s), SystemSpec::FullShift(p)) => (
            FiniteSystem::shift_words(p.word_len, s.alphabet() as usize, WordMap::Rotation)?,
            Some(format!("shift_words L={} alphabet={} map=rotation", p.word_len, s.alphabet())),
        ),
        (System::Symbolic(_), _) => return Err(Error::Config("symbolic system without a full_shift spec".into())),
    })
}

pub fn run_analyze<T: Scalar>(spec: &SystemSpec, config: &AnalysisConfig) -> Result<AnalysisReport<T>, Error> {
    let loaded = load_system::<T>(spec)?;
    let symbolic = loaded.as_symbolic().ok().copied();
    let (system, proxy) = finite_view(spec, loaded)?;
    let diameter = system.diameter();
    let scaled = |num: i64, den: i64| diameter.clone() * T::from_ratio(num, den);
    let seeds = Seeds {
        base: config.seed,
        shadowing: config.seed,
        dc1: config.seed.wrapping_add(1),
    };

    let deltas = match &config.ladder {
        Some(l) => l.deltas()?,
        None => default_ladder(&system),
    };
    let (ladder, ladder_stop) = refine_ladder_partial(&system, &deltas)?;
    let mut levels = Vec::new();
    if let Some(l) = &ladder {
        for d in l.levels() {
            let graph = build_chain_graph(&system, &d.delta);
            levels.push(LadderLevel {
                delta: d.delta.clone(),
                chain_transitive: true,
                period: Some(d.period),
                class_sizes: d.class_sizes(),
                transient_bound: Some(transient_bound(&graph, d)?),
                edges: graph.edge_count(),
            });
        }
    }
    if let Some(stop) = &ladder_stop {
        levels.push(LadderLevel {
            delta: stop.delta.clone(),
            chain_transitive: false,
            period: None,
            class_sizes: Vec::new(),
            transient_bound: None,
            edges: build_chain_graph(&system, &stop.delta).edge_count(),
        });
    }
    let chain_transitive = match &ladder_stop {
        None => Verdict::new(true, format!("all {} ladder levels are strongly connected", levels.len())),
        Some(s) => Verdict::new(
            false,
            format!("level {} (delta = {}) has {} strongly connected components", s.level, s.delta, s.components),
        ),
    };

    let mut continuity = Vec::new();
    if let Some(l) = &ladder {
        let continuity_eps = match &config.continuity.epsilons {
            Some(e) => parse_list("continuity epsilon", e)?,
            None => {
                let coarse = &l.levels()[..l.levels().len().max(2) - 1];
                coarse.iter().map(|d| d.delta.clone() * T::from_ratio(6, 5)).collect()
            }
        };
        for e in continuity_eps {
            let delta = match continuity_modulus(&system, l, &e) {
                Ok(d) => Some(d),
                Err(CyclicError::ContinuityFailure { .. }) => None,
                Err(err) => return Err(err.into()),
            };
            continuity.push(ContinuityRow { epsilon: e, delta });
        }
    }
    let continuity_verdict = if ladder.is_none() {
        Verdict::skipped("no chain-transitive ladder level")
    } else {
        let failed: Vec<String> = continuity
            .iter()
            .filter(|r| r.delta.is_none())
            .map(|r| r.epsilon.to_string())
            .collect();
        if failed.is_empty() {
            Verdict::new(true, format!("modulus found for all {} epsilons", continuity.len()))
        } else {
            Verdict::new(false, format!("no ladder level works at epsilon = {}", failed.join(", ")))
        }
    };

    let single_valued = system.is_single_valued();
    let shadowing = match (&ladder, single_valued) {
        (Some(l), true) => {
            let eps = match &config.shadow.epsilon {
                Some(e) => parse_scalar("shadow epsilon", e)?,
                None => scaled(1, 4),
            };
            Some(shadowing_modulus(
                &system,
                &l.deltas(),
                Some(l.finest()),
                &eps,
                config.shadow.trials,
                config.shadow.len,
                config.shadow.require_class,
                seeds.shadowing,
            )?)
        }
        _ => None,
    };
    let shadowing_verdict = match &shadowing {
        Some(m) if !m.degenerate => Verdict::new(
            true,
            format!(
                "empirical: every sampled pseudo-orbit at delta = {} was {}-shadowed ({} trials, length {})",
                m.delta_hat, m.epsilon, m.trials, m.len
            ),
        ),
        Some(m) => Verdict::new(
            false,
            format!("empirical: no tested delta passed all {} trials at epsilon = {}", m.trials, m.epsilon),
        ),
        None if !single_valued => Verdict::skipped("system is multivalued"),
        None => Verdict::skipped("no chain-transitive ladder level"),
    };

    let entropy = if single_valued {
        let eps = match &config.entropy.epsilon {
            Some(e) => parse_scalar("entropy epsilon", e)?,
            None => scaled(1, 4),
        };
        Some(entropy_estimate(&system, &eps, &config.entropy.horizons)?)
    } else {
        None
    };
    let entropy_verdict = match &entropy {
        Some(e) => Verdict::new(
            e.positive,
            format!("spanning-count slope {:.4} nats/step at epsilon = {}", e.slope, e.epsilon),
        ),
        None => Verdict::skipped("system is multivalued"),
    };

    let dc1_cfg = &config.dc1;
    let eta: T = parse_scalar("dc1 eta", &dc1_cfg.eta)?;
    let delta_n = match &dc1_cfg.delta_n {
        Some(d) => parse_scalar("dc1 delta_n", d)?,
        None => scaled(2, 5),
    };
    let epsilons = match &dc1_cfg.epsilons {
        Some(e) => parse_list("dc1 epsilon", e)?,
        None => (1..=6).map(|k| diameter.clone() * T::pow2_neg(k)).collect(),
    };
    let mut dc1_pairs = None;
    let mut dc1_sampling = Vec::new();
    let sampling_verdict;
    if let Some(shift) = symbolic {
        let s = &dc1_cfg.sampling;
        let construction = ConstructionParams {
            epsilon: parse_scalar("sampling epsilon", &s.epsilon)?,
            depth: s.depth,
            rule: BlockRule::default(),
            reference: None,
            certify_epsilon: parse_scalar("sampling certify_epsilon", &s.certify_epsilon)?,
            eta: eta.clone(),
        };
        let test = Dc1Params {
            delta_n: delta_n.clone(),
            epsilons: epsilons.clone(),
            horizon: s.min_window.max(1),
            eta: eta.clone(),
            min_window: s.min_window,
        };
        for (i, &n) in s.tuple_sizes.iter().enumerate() {
            dc1_sampling.push(residual_sampling_check(
                &shift,
                n,
                s.samples,
                &construction,
                &test,
                seeds.dc1.wrapping_add(i as u64),
            )?);
        }
        let all = dc1_sampling.iter().all(|r| r.rate == 1.0);
        let rates: Vec<String> = dc1_sampling.iter().map(|r| format!("n={}: {}", r.n, r.rate)).collect();
        sampling_verdict = Verdict::new(all, format!("certified rate {}", rates.join(", ")));
    } else {
        sampling_verdict = Verdict::skipped("scrambled-tuple sampling runs on the full shift only");
        if single_valued {
            let params = Dc1Params {
                delta_n,
                epsilons,
                horizon: dc1_cfg.horizon,
                eta,
                min_window: dc1_cfg.min_window,
            };
            let finest = ladder.as_ref().map(|l| l.finest());
            dc1_pairs = Some(scan_pairs(&system, &params, finest, dc1_cfg.max_pairs, dc1_cfg.keep)?);
        }
    }

    Ok(AnalysisReport {
        tool: ToolInfo {
            name: TOOL_NAME,
            version: TOOL_VERSION,
        },
        system: spec.clone(),
        scalar: scalar_name::<T>(),
        seeds,
        proxy,
        states: system.len(),
        ladder: levels,
        ladder_stop,
        continuity,
        shadowing,
        dc1_pairs,
        dc1_sampling,
        entropy,
        hypotheses: Hypotheses {
            chain_transitive,
            shadowing_along_classes: shadowing_verdict,
            continuity: continuity_verdict,
            positive_entropy: entropy_verdict,
            scrambled_sampling: sampling_verdict,
        },
    })
}

/// Tests pairs `x < y` in lexicographic order until `max_pairs` have run.
pub fn scan_pairs<T: Scalar>(
    system: &FiniteSystem<T>,
    params: &Dc1Params<T>,
    classes: Option<&CyclicDecomposition<T>>,
    max_pairs: usize,
    keep: usize,
) -> Result<PairScan<T>, Error> {
    let n = system.len();
    let total = n * n.saturating_sub(1) / 2;
    let mut certificates = Vec::new();
    let mut certified = 0;
    let mut tested = 0;
    'outer: for x in 0..n {
        for y in x + 1..n {
            if tested == max_pairs {
                break 'outer;
            }
            tested += 1;
            let cert = dc1_test_finite(system, &[x, y], params, classes)?;
            if cert.accepted {
                certified += 1;
                if certificates.len() < keep {
                    certificates.push(cert);
                }
            }
        }
    }
    Ok(PairScan {
        pairs_tested: tested,
        exhaustive: tested == total,
        certified,
        params: params.clone(),
        certificates,
    })
}

/// Pretty JSON with a trailing newline.
pub fn emit_json<S: Serialize>(value: &S) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    text
}

const PALETTE: usize = 12;

/// Graphviz digraph; states are filled by class when a decomposition is given.
pub fn graph_dot<T: Scalar>(graph: &ChainGraph<T>, decomp: Option<&CyclicDecomposition<T>>) -> String {
    let mut out = String::from("digraph chain {\n");
    let _ = writeln!(out, "  graph [label=\"delta = {}\"];", graph.delta());
    if let Some(d) = decomp {
        let _ = writeln!(out, "  node [style=filled, colorscheme=set312];");
        for x in 0..graph.len() {
            let c = d.class_of[x];
            let _ = writeln!(out, "  {x} [class={c}, fillcolor={}];", c % PALETTE + 1);
        }
    } else {
        for x in 0..graph.len() {
            let _ = writeln!(out, "  {x};");
        }
    }
    for u in 0..graph.len() {
        for &v in graph.out(u) {
            let _ = writeln!(out, "  {u} -> {v};");
        }
    }
    out.push_str("}\n");
    out
}

/// One row per edge; class columns are empty without a decomposition.
pub fn graph_csv<T: Scalar>(graph: &ChainGraph<T>, decomp: Option<&CyclicDecomposition<T>>) -> String {
    let mut out = String::from("source,target,source_class,target_class\n");
    let class = |x: usize| decomp.map(|d| d.class_of[x].to_string()).unwrap_or_default();
    for u in 0..graph.len() {
        for &v in graph.out(u) {
            let _ = writeln!(out, "{u},{v},{},{}", class(u), class(v));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphExport<'a, T> {
    pub delta: &'a T,
    pub states: usize,
    pub adjacency: &'a [Vec<usize>],
    pub decomposition: Option<&'a CyclicDecomposition<T>>,
}

pub fn graph_json<T: Scalar>(graph: &ChainGraph<T>, decomp: Option<&CyclicDecomposition<T>>) -> String {
    emit_json(&GraphExport {
        delta: graph.delta(),
        states: graph.len(),
        adjacency: graph.adjacency(),
        decomposition: decomp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cyclic::decompose;
    use crate::Exact;

    fn spec(text: &str) -> SystemSpec {
        SystemSpec::from_json(text).unwrap()
    }

    #[test]
    fn ladder_text() {
        assert_eq!(
            parse_ladder_text::<Exact>("1:1/2:3").unwrap(),
            vec![Exact::new(1, 1), Exact::new(1, 2), Exact::new(1, 4)]
        );
        assert!(parse_ladder_text::<f64>("1:2:3").is_err());
        assert!(parse_ladder_text::<f64>("1:0.5").is_err());
        let cfg: AnalysisConfig = serde_json::from_str(r#"{"ladder":"0.5:0.5:2"}"#).unwrap();
        assert_eq!(cfg.ladder.unwrap().deltas::<f64>().unwrap(), vec![0.5, 0.25]);
        let cfg: AnalysisConfig = serde_json::from_str(r#"{"ladder":[1, "1/4"]}"#).unwrap();
        assert_eq!(cfg.ladder.unwrap().deltas::<f64>().unwrap(), vec![1.0, 0.25]);
        assert!(serde_json::from_str::<AnalysisConfig>(r#"{"bogus":1}"#).is_err());
    }

    #[test]
    fn three_cycle_dot() {
        let sys = FiniteSystem::<Exact>::explicit(
            (0..3)
                .map(|i| (0..3).map(|j| Exact::from_integer(i64::from(i != j))).collect())
                .collect(),
            vec![vec![1], vec![2], vec![0]],
        )
        .unwrap();
        let g = build_chain_graph(&sys, &Exact::new(1, 2));
        let d = decompose(&g).unwrap();
        let dot = graph_dot(&g, Some(&d));
        assert_eq!(dot.matches("->").count(), 3);
        assert_eq!(dot.matches("fillcolor=").count(), 3);
        assert_eq!(graph_csv(&g, Some(&d)).lines().count(), 4);
    }

    #[test]
    fn odometer_report() {
        let cfg = AnalysisConfig {
            ladder: Some(LadderConfig::Text("1:0.5:3".into())),
            ..AnalysisConfig::default()
        };
        let report = run_analyze::<Exact>(&spec(r#"{"backend":"odometer","params":{"k":3}}"#), &cfg).unwrap();
        let h = &report.hypotheses;
        assert_eq!(h.chain_transitive.status, Status::Yes);
        assert_eq!(h.shadowing_along_classes.status, Status::Yes);
        assert_eq!(h.continuity.status, Status::Yes);
        assert_eq!(h.positive_entropy.status, Status::No);
        assert_eq!(h.scrambled_sampling.status, Status::NotAttempted);
        assert_eq!(report.ladder.iter().map(|l| l.period).collect::<Vec<_>>(), vec![Some(1), Some(2), Some(4)]);
        let scan = report.dc1_pairs.as_ref().unwrap();
        assert!(scan.exhaustive);
        assert_eq!(scan.certified, 0);
    }

    #[test]
    fn report_round_trips() {
        let report = run_analyze::<f64>(&spec(r#"{"backend":"tent","params":{"L":32}}"#), &AnalysisConfig::default()).unwrap();
        let text = emit_json(&report);
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(emit_json(&value), text);
    }

    #[test]
    fn full_shift_report() {
        let mut cfg = AnalysisConfig::default();
        cfg.dc1.sampling.samples = 1;
        let report = run_analyze::<f64>(&spec(r#"{"backend":"full_shift","params":{}}"#), &cfg).unwrap();
        let h = &report.hypotheses;
        assert_eq!(h.chain_transitive.status, Status::Yes);
        assert_eq!(h.positive_entropy.status, Status::Yes);
        assert_eq!(h.scrambled_sampling.status, Status::Yes, "{}", h.scrambled_sampling.basis);
        assert!(report.proxy.is_some());
    }
}
