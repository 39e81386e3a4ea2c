use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use chainscope::chain_graph::build_chain_graph;
use chainscope::cyclic::{decompose, default_ladder, refine_ladder};
use chainscope::dc1::{
    construct_scrambled_tuple, dc1_test_finite, dc1_test_symbolic, profiles_csv, random_targets,
    residual_sampling_check, BlockRule, ConstructionParams, Dc1Params, TupleTrace,
};
use chainscope::entropy::entropy_estimate;
use chainscope::report::{
    emit_json, finite_view, graph_csv, graph_dot, graph_json, parse_ladder_text, run_analyze, AnalysisConfig,
    LadderConfig,
};
use chainscope::shadowing::{
    find_shadow, random_class_pseudo_orbit, random_pseudo_orbit_with, random_symbolic_pseudo_orbit, shadow_symbolic,
    trial_rng, PseudoOrbit, ShadowingResult, SymbolicShadow,
};
use chainscope::systems::{SymbolicPoint, SymbolicSystem, System};
use chainscope::{load_system, Error, Exact, Scalar, SystemSpec};

#[derive(Parser)]
#[command(name = "chainscope", version, about = "Chain-transitivity, shadowing and DC1 analyses")]
struct Cli {
    /// Use exact rationals instead of f64 for distances.
    #[arg(long, global = true)]
    exact: bool,
    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline with a verdict per hypothesis.
    Analyze(AnalyzeArgs),
    /// Shadow random pseudo-orbits.
    Shadow(ShadowArgs),
    /// Scrambled tuples: construct, test or sample.
    Dc1 {
        #[command(subcommand)]
        command: Dc1Command,
    },
    /// Spanning-count entropy estimate.
    Entropy(EntropyArgs),
    /// Chain graph and cyclic classes at one threshold.
    Export(ExportArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    system: PathBuf,
    /// Analysis config JSON; an "analysis" object in the system file also works.
    #[arg(long)]
    config: Option<PathBuf>,
    /// start:factor:levels
    #[arg(long)]
    ladder: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ShadowArgs {
    #[arg(long)]
    system: PathBuf,
    #[arg(long)]
    delta: String,
    #[arg(long)]
    epsilon: String,
    #[arg(long, default_value_t = 50)]
    len: usize,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    /// Keep jumps inside classes and require the shadow in the start's class.
    #[arg(long)]
    class_constrained: bool,
    /// Ladder used for classes (start:factor:levels).
    #[arg(long)]
    ladder: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Dc1Command {
    /// Build a scrambled tuple near given or random targets on the full shift.
    Construct(ConstructArgs),
    /// Test a tuple read from JSON.
    Test(TestArgs),
    /// Construct and test tuples near random targets.
    Sample(SampleArgs),
}

#[derive(Args)]
struct BlockArgs {
    #[arg(long, default_value = "2^-5")]
    epsilon: String,
    #[arg(long, default_value_t = 8)]
    depth: usize,
    #[arg(long, default_value = "0.12")]
    eta: String,
    /// Smallest proximal threshold the construction must certify.
    #[arg(long, default_value = "2^-6")]
    certify_epsilon: String,
    /// Geometric block ratio instead of the factorial rule.
    #[arg(long)]
    geometric: Option<usize>,
}

#[derive(Args)]
struct ConstructArgs {
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    alphabet: u8,
    /// JSON array of target points; random targets when omitted.
    #[arg(long)]
    targets: Option<PathBuf>,
    #[command(flatten)]
    blocks: BlockArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TestParamArgs {
    #[arg(long, default_value = "0.4")]
    delta_n: String,
    /// Comma-separated, strictly descending.
    #[arg(long, default_value = "2^-1,2^-2,2^-3,2^-4,2^-5,2^-6")]
    epsilons: String,
    #[arg(long, default_value = "0.12")]
    eta: String,
    #[arg(long, default_value_t = 1)]
    min_window: usize,
}

#[derive(Args)]
struct TestArgs {
    #[arg(long)]
    system: PathBuf,
    /// JSON array of states or points, or an object with a "points" array.
    #[arg(long)]
    tuple: PathBuf,
    #[arg(long, default_value_t = 1000)]
    horizon: usize,
    #[command(flatten)]
    params: TestParamArgs,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Row spacing of the CSV curves.
    #[arg(long, default_value_t = 1)]
    stride: usize,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    samples: usize,
    #[arg(long, default_value_t = 2)]
    alphabet: u8,
    #[command(flatten)]
    blocks: BlockArgs,
    #[arg(long, default_value = "0.4")]
    delta_n: String,
    #[arg(long, default_value = "2^-1,2^-2,2^-3,2^-4,2^-5,2^-6")]
    epsilons: String,
    #[arg(long, default_value_t = 100_000)]
    min_window: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EntropyArgs {
    #[arg(long)]
    system: PathBuf,
    #[arg(long)]
    epsilon: String,
    /// `a:b` for the range a..=b, or a comma-separated list.
    #[arg(long, default_value = "2:6")]
    horizons: String,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    system: PathBuf,
    /// Threshold of the chain graph; the finest default-ladder level when omitted.
    #[arg(long)]
    delta: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Dot)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Dot,
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))
}

fn read_json(path: &Path) -> Result<Value, Error> {
    serde_json::from_str(&read(path)?).map_err(|e| config_error(format!("{}: {e}", path.display())))
}

/// The system spec, plus any embedded "analysis" config.
fn read_system(path: &Path) -> Result<(SystemSpec, Option<Value>), Error> {
    let mut value = read_json(path)?;
    let analysis = value.as_object_mut().and_then(|o| o.remove("analysis"));
    Ok((SystemSpec::from_value(value)?, analysis))
}

fn scalar<T: Scalar>(what: &str, text: &str) -> Result<T, Error> {
    T::parse_scalar(text).ok_or_else(|| config_error(format!("{what}: {text:?} is not a number")))
}

fn scalar_list<T: Scalar>(what: &str, text: &str) -> Result<Vec<T>, Error> {
    text.split(',').map(|s| scalar(what, s)).collect()
}

fn horizons(text: &str) -> Result<Vec<usize>, Error> {
    let bad = || config_error(format!("horizons: {text:?}"));
    if let Some((a, b)) = text.split_once(':') {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        Ok((a..=b).collect())
    } else {
        text.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
    }
}

fn deserialize<D: for<'de> Deserialize<'de>>(what: &str, value: Value) -> Result<D, Error> {
    serde_json::from_value(value).map_err(|e| config_error(format!("{what}: {e}")))
}

fn block_params<T: Scalar>(b: &BlockArgs) -> Result<ConstructionParams<T>, Error> {
    Ok(ConstructionParams {
        epsilon: scalar("epsilon", &b.epsilon)?,
        depth: b.depth,
        rule: match b.geometric {
            Some(ratio) => BlockRule::Geometric { first: 10, ratio },
            None => BlockRule::default(),
        },
        reference: None,
        certify_epsilon: scalar("certify-epsilon", &b.certify_epsilon)?,
        eta: scalar("eta", &b.eta)?,
    })
}

#[derive(Serialize)]
struct ShadowTrial<T> {
    trial: usize,
    orbit: PseudoOrbit<T>,
    shadow: Option<ShadowingResult<T>>,
}

#[derive(Serialize)]
struct SymbolicTrial<T> {
    trial: usize,
    orbit: Vec<SymbolicPoint>,
    shadow: SymbolicShadow<T>,
    shadowed: bool,
}

#[derive(Serialize)]
struct ShadowOutput<'a, T, R> {
    system: &'a SystemSpec,
    delta: T,
    epsilon: T,
    len: usize,
    trials: usize,
    class_constrained: bool,
    seed: u64,
    shadowed: usize,
    results: Vec<R>,
}

fn run_shadow<T: Scalar>(args: &ShadowArgs) -> Result<String, Error> {
    let (spec, _) = read_system(&args.system)?;
    let delta: T = scalar("delta", &args.delta)?;
    let epsilon: T = scalar("epsilon", &args.epsilon)?;
    match load_system::<T>(&spec)? {
        System::Symbolic(sys) => {
            let mut results = Vec::new();
            for t in 0..args.trials {
                let mut rng = trial_rng(args.seed, t as u64);
                let orbit = random_symbolic_pseudo_orbit(&sys, &delta, args.len, &mut rng)?;
                let shadow = shadow_symbolic::<T>(&sys, &orbit)?;
                results.push(SymbolicTrial {
                    trial: t,
                    shadowed: shadow.sup_error <= epsilon,
                    orbit,
                    shadow,
                });
            }
            Ok(emit_json(&ShadowOutput {
                system: &spec,
                shadowed: results.iter().filter(|r| r.shadowed).count(),
                delta,
                epsilon,
                len: args.len,
                trials: args.trials,
                class_constrained: args.class_constrained,
                seed: args.seed,
                results,
            }))
        }
        System::Finite(sys) => {
            let classes = if args.class_constrained {
                let deltas = match &args.ladder {
                    Some(l) => parse_ladder_text(l)?,
                    None => default_ladder(&sys),
                };
                Some(refine_ladder(&sys, &deltas)?.finest().clone())
            } else {
                None
            };
            let mut results = Vec::new();
            for t in 0..args.trials {
                let mut rng = trial_rng(args.seed, t as u64);
                let orbit = match &classes {
                    Some(c) => random_class_pseudo_orbit(&sys, c, &delta, args.len, &mut rng)?,
                    None => random_pseudo_orbit_with(&sys, &delta, args.len, &mut rng)?,
                };
                let shadow = find_shadow(&sys, &orbit, &epsilon, classes.as_ref(), args.class_constrained)?;
                results.push(ShadowTrial { trial: t, orbit, shadow });
            }
            Ok(emit_json(&ShadowOutput {
                system: &spec,
                shadowed: results.iter().filter(|r| r.shadow.is_some()).count(),
                delta,
                epsilon,
                len: args.len,
                trials: args.trials,
                class_constrained: args.class_constrained,
                seed: args.seed,
                results,
            }))
        }
    }
}

fn run_analyze_cmd<T: Scalar>(args: &AnalyzeArgs) -> Result<String, Error> {
    let (spec, embedded) = read_system(&args.system)?;
    let mut config: AnalysisConfig = match (&args.config, embedded) {
        (Some(path), _) => deserialize("config", read_json(path)?)?,
        (None, Some(v)) => deserialize("analysis", v)?,
        (None, None) => AnalysisConfig::default(),
    };
    if let Some(l) = &args.ladder {
        config.ladder = Some(LadderConfig::Text(l.clone()));
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    Ok(emit_json(&run_analyze::<T>(&spec, &config)?))
}

fn test_params<T: Scalar>(horizon: usize, p: &TestParamArgs) -> Result<Dc1Params<T>, Error> {
    Ok(Dc1Params {
        delta_n: scalar("delta-n", &p.delta_n)?,
        epsilons: scalar_list("epsilons", &p.epsilons)?,
        horizon,
        eta: scalar("eta", &p.eta)?,
        min_window: p.min_window,
    })
}

fn run_dc1<T: Scalar>(command: &Dc1Command) -> Result<String, Error> {
    match command {
        Dc1Command::Construct(args) => {
            let targets: Vec<SymbolicPoint> = match &args.targets {
                Some(path) => deserialize("targets", read_json(path)?)?,
                None => random_targets(&mut ChaCha8Rng::seed_from_u64(args.seed), args.alphabet, args.n)?,
            };
            let tuple = construct_scrambled_tuple(&targets, &block_params::<T>(&args.blocks)?)?;
            Ok(emit_json(&tuple))
        }
        Dc1Command::Test(args) => {
            let (spec, _) = read_system(&args.system)?;
            let params = test_params::<T>(args.horizon, &args.params)?;
            let mut tuple = read_json(&args.tuple)?;
            if let Some(points) = tuple.get_mut("points") {
                tuple = points.take();
            }
            let (trace, cert) = match load_system::<T>(&spec)? {
                System::Symbolic(_) => {
                    let points: Vec<SymbolicPoint> = deserialize("tuple", tuple)?;
                    let trace = TupleTrace::symbolic(&points, params.horizon)?;
                    (trace, emit_json(&dc1_test_symbolic(&points, &params)?))
                }
                System::Finite(sys) => {
                    let states: Vec<usize> = deserialize("tuple", tuple)?;
                    let trace = TupleTrace::finite(&sys, &states, params.horizon)?;
                    (trace, emit_json(&dc1_test_finite(&sys, &states, &params, None)?))
                }
            };
            if args.format != Format::Csv {
                return Ok(cert);
            }
            let mut profiles = Vec::new();
            for e in &params.epsilons {
                profiles.push((format!("proximal_{e}"), trace.proximal(e)?));
            }
            profiles.push((format!("separated_{}", params.delta_n), trace.separated(&params.delta_n)?));
            let labelled: Vec<(&str, _)> = profiles.iter().map(|(l, p)| (l.as_str(), p)).collect();
            Ok(profiles_csv(&labelled, args.stride))
        }
        Dc1Command::Sample(args) => {
            let system = SymbolicSystem::new(args.alphabet)?;
            let construction = block_params::<T>(&args.blocks)?;
            let test = Dc1Params {
                delta_n: scalar("delta-n", &args.delta_n)?,
                epsilons: scalar_list("epsilons", &args.epsilons)?,
                horizon: args.min_window.max(1),
                eta: construction.eta.clone(),
                min_window: args.min_window,
            };
            let report = residual_sampling_check(&system, args.n, args.samples, &construction, &test, args.seed)?;
            Ok(emit_json(&report))
        }
    }
}

fn run_entropy<T: Scalar>(args: &EntropyArgs) -> Result<String, Error> {
    let (spec, _) = read_system(&args.system)?;
    let (sys, _) = finite_view(&spec, load_system::<T>(&spec)?)?;
    let est = entropy_estimate(&sys, &scalar::<T>("epsilon", &args.epsilon)?, &horizons(&args.horizons)?)?;
    Ok(match args.format {
        Format::Csv => est.to_csv(),
        _ => emit_json(&est),
    })
}

fn run_export<T: Scalar>(args: &ExportArgs) -> Result<String, Error> {
    let (spec, _) = read_system(&args.system)?;
    let (sys, _) = finite_view(&spec, load_system::<T>(&spec)?)?;
    let delta: T = match &args.delta {
        Some(d) => scalar("delta", d)?,
        None => default_ladder(&sys).pop().expect("ladder is nonempty"),
    };
    let graph = build_chain_graph(&sys, &delta);
    let decomp = decompose(&graph).ok();
    Ok(match args.format {
        Format::Dot => graph_dot(&graph, decomp.as_ref()),
        Format::Csv => graph_csv(&graph, decomp.as_ref()),
        Format::Json => graph_json(&graph, decomp.as_ref()),
    })
}

fn run<T: Scalar>(cli: &Cli) -> Result<String, Error> {
    match &cli.command {
        Command::Analyze(a) => run_analyze_cmd::<T>(a),
        Command::Shadow(a) => run_shadow::<T>(a),
        Command::Dc1 { command } => run_dc1::<T>(command),
        Command::Entropy(a) => run_entropy::<T>(a),
        Command::Export(a) => run_export::<T>(a),
    }
}

fn configure_threads() -> Result<(), Error> {
    if let Ok(text) = std::env::var("CHAINSCOPE_THREADS") {
        let n: usize = text
            .trim()
            .parse()
            .map_err(|_| config_error(format!("CHAINSCOPE_THREADS={text:?} is not a thread count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| config_error(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| if cli.exact { run::<Exact>(&cli) } else { run::<f64>(&cli) });
    let output = match result {
        Ok(text) => text,
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": e.report() }));
            return ExitCode::from(2);
        }
    };
    let written = match &cli.out {
        Some(path) => fs::write(path, output.as_bytes()),
        None => std::io::stdout().write_all(output.as_bytes()),
    };
    match written {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": { "module": "io", "message": e.to_string() } }));
            ExitCode::from(2)
        }
    }
}
