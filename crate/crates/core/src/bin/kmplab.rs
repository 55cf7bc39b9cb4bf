//! Batch experiment runner: builds graphs from flags or a key=value
//! config file, dispatches the packaged experiments, and writes CSV data
//! plus a JSON run summary.
//!
//! Every setting can come from the command line or from `--config <file>`
//! (flags win); the fully resolved configuration is echoed into the
//! summary for provenance. Exit codes: 0 on success, 1 on validation or
//! I/O errors, 2 when `--assert` is set and the run's statistical verdict
//! fails.

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use kmp_lab::config::{
    self, parse_f64_list, parse_particles, parse_permutation, parse_seed, parse_temps,
    parse_usize_list, KeyValueFile,
};
use kmp_lab::experiments::{
    run_coupling_check, run_duality_check, run_exact_moments, run_hydrostatic, run_independence,
    run_perfect_sim_eta, run_simulate, run_stationary_sample, DualityKind, RunArtifacts,
    SamplerKind, SimKind,
};
use kmp_lab::report::Summary;
use kmp_lab::{path_graph, Graph};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "kmplab",
    version,
    about = "Simulation laboratory for boundary-driven energy redistribution models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate process trajectories and record sampled configurations
    Simulate(SimulateArgs),
    /// Draw exact stationary samples (opinion, energy, or eta)
    StationarySample(StationarySampleArgs),
    /// Perfect simulation of the disagreement process from edge permutations
    PerfectSimEta(PerfectSimEtaArgs),
    /// Solve the exact second-moment system and compare with closed forms
    ExactMoments(ExactMomentsArgs),
    /// Monte Carlo check of the moment dualities
    DualityCheck(DualityCheckArgs),
    /// Hydrostatic profile statistics across lattice sizes
    Hydrostatic(HydrostaticArgs),
    /// Probe independence of the hidden-temperature pair at a fixed time
    Independence(IndependenceArgs),
    /// Stationarity audit of the continuous-discrete coupling
    CouplingCheck(CouplingCheckArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Run seed, decimal or 0x-prefixed hexadecimal
    #[arg(long)]
    seed: Option<String>,
    /// Number of Monte Carlo replicas
    #[arg(long)]
    replicas: Option<usize>,
    /// Exit with code 2 when the statistical verdict fails
    #[arg(long)]
    assert: bool,
    /// Output directory (default: $KMPLAB_OUT, else the current directory)
    #[arg(long)]
    out: Option<PathBuf>,
    /// key = value configuration file; flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct GraphArgs {
    /// Path graph with this many edges (vertices 0..=N)
    #[arg(long)]
    path: Option<usize>,
    /// Boundary temperatures as "T-,T+" (default 1,2)
    #[arg(long)]
    temps: Option<String>,
    /// Graph description file with vertices/edges/boundary keys
    #[arg(long, conflicts_with_all = ["path", "temps"])]
    graph: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    graph: GraphArgs,
    /// Process kind: kmp, kmp-original, joint, opinion, opinion-mean, eta,
    /// discrete, or absorbed
    #[arg(long)]
    kind: Option<String>,
    /// Simulation time horizon
    #[arg(long)]
    horizon: Option<f64>,
    /// Number of evenly spaced sample times, endpoints included
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args)]
struct StationarySampleArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    graph: GraphArgs,
    /// Sampler: opinion, energy, or eta
    #[arg(long)]
    sampler: Option<String>,
}

#[derive(Args)]
struct PerfectSimEtaArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    graph: GraphArgs,
    /// Explicit edge permutation "r1,r2,..." (ranks 1..=edges); omit to
    /// sample random permutations and audit the exact marginals
    #[arg(long)]
    perm: Option<String>,
}

#[derive(Args)]
struct ExactMomentsArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Path length (number of edges)
    #[arg(long)]
    path: Option<usize>,
    /// Boundary temperatures as "T-,T+" (default 0,1)
    #[arg(long)]
    temps: Option<String>,
}

#[derive(Args)]
struct DualityCheckArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    graph: GraphArgs,
    /// Identity to check: opinion, continuous, or both
    #[arg(long)]
    kind: Option<String>,
    /// Comma-separated evaluation times (default 0,1,5)
    #[arg(long)]
    times: Option<String>,
    /// Dual particle placement "vertex:count,..." (default: one particle
    /// at the first interior vertex)
    #[arg(long)]
    particles: Option<String>,
}

#[derive(Args)]
struct HydrostaticArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated lattice sizes (default 5,10,20,40)
    #[arg(long)]
    sizes: Option<String>,
    /// Boundary temperatures as "T-,T+" (default 0,1)
    #[arg(long)]
    temps: Option<String>,
}

#[derive(Args)]
struct IndependenceArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    graph: GraphArgs,
    /// Evaluation time
    #[arg(long)]
    time: Option<f64>,
}

#[derive(Args)]
struct CouplingCheckArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    graph: GraphArgs,
    /// Events to drive each replica through
    #[arg(long)]
    events: Option<usize>,
    /// Replicas whose intervals and points are dumped to CSV
    #[arg(long)]
    dump_replicas: Option<usize>,
}

/// Settings resolver: command-line flags override config-file values
/// override defaults, and every resolved value is recorded for the
/// summary's provenance echo.
struct Settings {
    kv: KeyValueFile,
    echo: Vec<(String, String)>,
}

impl Settings {
    fn load(config: Option<&Path>) -> Result<Self> {
        let kv = match config {
            Some(path) => KeyValueFile::load(path)?,
            None => KeyValueFile::empty(),
        };
        Ok(Settings { kv, echo: Vec::new() })
    }

    fn record(&mut self, key: &str, value: String) {
        self.echo.push((key.to_string(), value));
    }

    // Each resolver reads the file key even when the flag overrides it,
    // so overridden keys are still recognised (and still validated).

    fn string(&mut self, key: &str, flag: Option<String>, default: &str) -> String {
        let file = self.kv.get(key);
        let v = flag.or(file).unwrap_or_else(|| default.to_string());
        self.record(key, v.clone());
        v
    }

    fn opt_string(&mut self, key: &str, flag: Option<String>) -> Option<String> {
        let file = self.kv.get(key);
        let v = flag.or(file);
        if let Some(v) = &v {
            self.record(key, v.clone());
        }
        v
    }

    fn usize(&mut self, key: &str, flag: Option<usize>, default: usize) -> Result<usize> {
        let file = self.kv.get_usize(key)?;
        let v = flag.or(file).unwrap_or(default);
        self.record(key, v.to_string());
        Ok(v)
    }

    fn f64(&mut self, key: &str, flag: Option<f64>, default: f64) -> Result<f64> {
        let file = self.kv.get_f64(key)?;
        let v = flag.or(file).unwrap_or(default);
        self.record(key, v.to_string());
        Ok(v)
    }

    /// Resolve the output directory: flag, then file, then $KMPLAB_OUT,
    /// then the current directory; created if missing.
    fn out_dir(&mut self, flag: Option<PathBuf>) -> Result<PathBuf> {
        let file = self.kv.get("out").map(PathBuf::from);
        let dir = flag
            .or(file)
            .or_else(|| std::env::var_os("KMPLAB_OUT").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&dir)
            .with_context(|| format!("could not create output directory {}", dir.display()))?;
        self.record("out", dir.display().to_string());
        Ok(dir)
    }

    /// Build the run graph: an explicit description file wins, otherwise
    /// a path graph from `path` and `temps`.
    fn graph(&mut self, args: &GraphArgs) -> Result<Graph> {
        let file_graph = self.kv.get("graph").map(PathBuf::from);
        let file_path = self.kv.get_usize("path")?;
        let file_temps = self.kv.get("temps");
        if let Some(path) = args.graph.clone().or(file_graph) {
            self.record("graph", path.display().to_string());
            return Ok(config::graph_from_file(&path)?);
        }
        let n = args
            .path
            .or(file_path)
            .ok_or_else(|| anyhow!("no graph given: use --path N or --graph FILE"))?;
        let temps = args.temps.clone().or(file_temps).unwrap_or_else(|| {
            // Both reservoirs away from zero so every boundary law is a
            // nondegenerate exponential.
            "1,2".to_string()
        });
        let (t_minus, t_plus) = parse_temps(&temps)?;
        self.record("path", n.to_string());
        self.record("temps", temps);
        Ok(path_graph(n, t_minus, t_plus)?)
    }

    /// Reject config-file keys that no getter consumed.
    fn finish(&self) -> Result<()> {
        Ok(self.kv.finish()?)
    }
}

/// Everything a subcommand hands back for the shared epilogue.
struct Prepared {
    name: &'static str,
    seed: u64,
    assert: bool,
    out_dir: PathBuf,
    settings: Settings,
    artifacts: RunArtifacts,
}

fn seed_and_replicas(
    settings: &mut Settings,
    common: &CommonArgs,
    default_replicas: usize,
) -> Result<(u64, usize)> {
    let seed_text = settings.string("seed", common.seed.clone(), "1");
    let seed = parse_seed(&seed_text)?;
    let replicas = settings.usize("replicas", common.replicas, default_replicas)?;
    Ok((seed, replicas))
}

fn run(cli: Cli) -> Result<bool> {
    let run_start = std::time::Instant::now();
    let prepared = match cli.command {
        Command::Simulate(args) => {
            let mut settings = Settings::load(args.common.config.as_deref())?;
            let (seed, replicas) = seed_and_replicas(&mut settings, &args.common, 1)?;
            let out_dir = settings.out_dir(args.common.out.clone())?;
            let graph = settings.graph(&args.graph)?;
            let kind = SimKind::parse(&settings.string("kind", args.kind, "kmp"))?;
            let horizon = settings.f64("horizon", args.horizon, 1.0)?;
            let samples = settings.usize("samples", args.samples, 11)?;
            settings.finish()?;
            let artifacts =
                run_simulate(&graph, kind, horizon, samples, replicas, seed, &out_dir)?;
            Prepared { name: "simulate", seed, assert: args.common.assert, out_dir, settings, artifacts }
        }
        Command::StationarySample(args) => {
            let mut settings = Settings::load(args.common.config.as_deref())?;
            let (seed, replicas) = seed_and_replicas(&mut settings, &args.common, 100)?;
            let out_dir = settings.out_dir(args.common.out.clone())?;
            let graph = settings.graph(&args.graph)?;
            let sampler = SamplerKind::parse(&settings.string("sampler", args.sampler, "opinion"))?;
            settings.finish()?;
            let artifacts = run_stationary_sample(&graph, sampler, replicas, seed, &out_dir)?;
            Prepared {
                name: "stationary-sample",
                seed,
                assert: args.common.assert,
                out_dir,
                settings,
                artifacts,
            }
        }
        Command::PerfectSimEta(args) => {
            let mut settings = Settings::load(args.common.config.as_deref())?;
            let (seed, replicas) = seed_and_replicas(&mut settings, &args.common, 10_000)?;
            let out_dir = settings.out_dir(args.common.out.clone())?;
            let graph = settings.graph(&args.graph)?;
            let perm = settings
                .opt_string("perm", args.perm)
                .map(|text| parse_permutation(&text))
                .transpose()?;
            settings.finish()?;
            let artifacts =
                run_perfect_sim_eta(&graph, perm.as_deref(), replicas, seed, &out_dir)?;
            if let Some(eta) = artifacts.details.get("eta").and_then(|v| v.as_str()) {
                println!("{eta}");
            }
            Prepared {
                name: "perfect-sim-eta",
                seed,
                assert: args.common.assert,
                out_dir,
                settings,
                artifacts,
            }
        }
        Command::ExactMoments(args) => {
            let mut settings = Settings::load(args.common.config.as_deref())?;
            let (seed, _) = seed_and_replicas(&mut settings, &args.common, 1)?;
            let out_dir = settings.out_dir(args.common.out.clone())?;
            let n = match args.path {
                Some(n) => n,
                None => settings
                    .kv
                    .get_usize("path")?
                    .ok_or_else(|| anyhow!("missing --path N"))?,
            };
            settings.record("path", n.to_string());
            let temps = settings.string("temps", args.temps, "0,1");
            let (t_minus, t_plus) = parse_temps(&temps)?;
            settings.finish()?;
            let artifacts = run_exact_moments(n, t_minus, t_plus, &out_dir)?;
            Prepared {
                name: "exact-moments",
                seed,
                assert: args.common.assert,
                out_dir,
                settings,
                artifacts,
            }
        }
        Command::DualityCheck(args) => {
            let mut settings = Settings::load(args.common.config.as_deref())?;
            let (seed, replicas) = seed_and_replicas(&mut settings, &args.common, 10_000)?;
            let out_dir = settings.out_dir(args.common.out.clone())?;
            let graph = settings.graph(&args.graph)?;
            let kind = DualityKind::parse(&settings.string("kind", args.kind, "both"))?;
            let times = parse_f64_list(&settings.string("times", args.times, "0,1,5"))?;
            let particles = settings
                .opt_string("particles", args.particles)
                .map(|text| parse_particles(&text))
                .transpose()?;
            settings.finish()?;
            let artifacts = run_duality_check(
                &graph,
                kind,
                &times,
                particles.as_deref(),
                replicas,
                seed,
                &out_dir,
            )?;
            Prepared {
                name: "duality-check",
                seed,
                assert: args.common.assert,
                out_dir,
                settings,
                artifacts,
            }
        }
        Command::Hydrostatic(args) => {
            let mut settings = Settings::load(args.common.config.as_deref())?;
            let (seed, replicas) = seed_and_replicas(&mut settings, &args.common, 1000)?;
            let out_dir = settings.out_dir(args.common.out.clone())?;
            let sizes = parse_usize_list(&settings.string("sizes", args.sizes, "5,10,20,40"))?;
            let temps = settings.string("temps", args.temps, "0,1");
            let (t_minus, t_plus) = parse_temps(&temps)?;
            settings.finish()?;
            let artifacts =
                run_hydrostatic(&sizes, replicas, t_minus, t_plus, seed, &out_dir)?;
            Prepared {
                name: "hydrostatic",
                seed,
                assert: args.common.assert,
                out_dir,
                settings,
                artifacts,
            }
        }
        Command::Independence(args) => {
            let mut settings = Settings::load(args.common.config.as_deref())?;
            let (seed, replicas) = seed_and_replicas(&mut settings, &args.common, 10_000)?;
            let out_dir = settings.out_dir(args.common.out.clone())?;
            let graph = settings.graph(&args.graph)?;
            let time = settings.f64("time", args.time, 1.0)?;
            settings.finish()?;
            let artifacts = run_independence(&graph, time, replicas, seed, &out_dir)?;
            Prepared {
                name: "independence",
                seed,
                assert: args.common.assert,
                out_dir,
                settings,
                artifacts,
            }
        }
        Command::CouplingCheck(args) => {
            let mut settings = Settings::load(args.common.config.as_deref())?;
            let (seed, replicas) = seed_and_replicas(&mut settings, &args.common, 2000)?;
            let out_dir = settings.out_dir(args.common.out.clone())?;
            let graph = settings.graph(&args.graph)?;
            let events = settings.usize("events", args.events, 1000)?;
            let dump = settings.usize("dump-replicas", args.dump_replicas, 10)?;
            settings.finish()?;
            let artifacts =
                run_coupling_check(&graph, events, replicas, dump, seed, &out_dir)?;
            Prepared {
                name: "coupling-check",
                seed,
                assert: args.common.assert,
                out_dir,
                settings,
                artifacts,
            }
        }
    };

    let Prepared { name, seed, assert, out_dir, settings, artifacts } = prepared;
    let mut summary = Summary::new(name, seed);
    summary.set_started(run_start);
    summary.config_echo(settings.echo.iter().map(|(k, v)| (k.as_str(), v.clone())));
    summary.set("details", artifacts.details);
    if let Some(passed) = artifacts.passed {
        summary.set("passed", json!(passed));
    }
    summary.outputs(&artifacts.csv_paths);
    let summary_path = out_dir.join(format!("{name}-summary.json"));
    summary.write(&summary_path)?;
    for path in &artifacts.csv_paths {
        eprintln!("wrote {}", path.display());
    }
    eprintln!("wrote {}", summary_path.display());
    Ok(assert && artifacts.passed == Some(false))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // Exit 2 is reserved for statistical verdicts; argument errors exit 1.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("statistical verdict failed (--assert)");
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
