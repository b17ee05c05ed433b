use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use te_core::demands::{generate, sidecar, DemandConfig, FlashConfig};
use te_core::experiment::{comparison_csv, prepare, run_one, RunSpec};
use te_core::{
    bundled, read_tm_sequence, read_topology, write_tm_sequence, AlgorithmKind, Error, McfError, RaeckeError, Recovery,
    SimConfig, SimError, Topology,
};

#[derive(Parser)]
#[command(name = "te", version, about = "Traffic engineering experiments on wide-area topologies")]
struct Cli {
    /// Print progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate algorithms against actual and predicted matrices.
    Run(RunArgs),
    /// Generate actual and predicted matrix sequences.
    GenDemands(GenArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// Topology file, or the name of a bundled topology.
    #[arg(long)]
    topo: String,
    /// Actual traffic matrices, one per line.
    #[arg(long)]
    tms: PathBuf,
    /// Predicted traffic matrices; defaults to the actual ones.
    #[arg(long)]
    pred: Option<PathBuf>,
    /// Comma-separated algorithm names.
    #[arg(long, value_delimiter = ',', required = true)]
    algos: Vec<String>,
    /// Paths kept per pair (unconstrained when absent).
    #[arg(long)]
    budget: Option<usize>,
    /// Rescale so the first matrix has optimal congestion 0.4·S.
    #[arg(long)]
    scale: Option<f64>,
    /// Simultaneous link failures per matrix.
    #[arg(long, default_value_t = 0)]
    fail_num: usize,
    #[arg(long, default_value = "none", value_parser = ["none", "local", "global"])]
    recovery: String,
    /// Flash crowd magnitude; 0 disables it.
    #[arg(long, default_value_t = 0.0)]
    flash_beta: f64,
    /// Steps of delay before flash recovery sees demand.
    #[arg(long, default_value_t = 8)]
    flash_lag: u64,
    #[arg(long, default_value_t = 200)]
    flash_recovery_period: u64,
    /// Perturb predicted matrices by this relative weight error.
    #[arg(long)]
    prediction_error: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Steps per matrix.
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    #[arg(long, env = "TE_OUT_DIR", default_value = "te-out")]
    out: PathBuf,
    /// Parallel runs; defaults to the number of cores.
    #[arg(long, env = "TE_JOBS")]
    jobs: Option<usize>,
    /// Multiplicative optimality gap of the flow solver.
    #[arg(long, default_value_t = 0.05)]
    accuracy: f64,
    /// Phase cap of the flow solver.
    #[arg(long, default_value_t = 5000)]
    max_phases: usize,
    /// Fail with exit code 3 when a solver misses its accuracy target.
    #[arg(long)]
    strict: bool,
    /// Include solver wall-clock times in outputs (not reproducible).
    #[arg(long)]
    timings: bool,
    /// Also write per-step totals.
    #[arg(long)]
    step_csv: bool,
}

#[derive(clap::Args)]
struct GenArgs {
    /// Topology file, or the name of a bundled topology.
    #[arg(long)]
    topo: String,
    #[arg(long, default_value_t = 24)]
    num_tms: usize,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Flash crowd magnitude added to the actual matrices.
    #[arg(long, default_value_t = 0.0)]
    flash_beta: f64,
    /// Relative weight error of the predicted matrices.
    #[arg(long, default_value_t = 0.0)]
    prediction_error: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "TE_OUT_DIR", default_value = "te-out")]
    out: PathBuf,
    /// File name prefix; defaults to `<topo>__S<S>__eps<ε>__seed<seed>`.
    #[arg(long)]
    prefix: Option<String>,
}

struct Failure {
    stage: &'static str,
    error: String,
    code: u8,
}

impl Failure {
    fn input(stage: &'static str, error: impl ToString) -> Self {
        Failure { stage, error: error.to_string(), code: 2 }
    }

    fn from_error(stage: &'static str, e: Error) -> Self {
        let code = match &e {
            Error::Mcf(McfError::PhaseLimit { .. })
            | Error::Sim(SimError::Mcf(McfError::PhaseLimit { .. }))
            | Error::Demand(te_core::DemandError::Mcf(McfError::PhaseLimit { .. }))
            | Error::Raecke(RaeckeError::IterationLimit(_))
            | Error::Sim(SimError::Raecke(RaeckeError::IterationLimit(_))) => 3,
            _ => 2,
        };
        Failure { stage, error: e.to_string(), code }
    }
}

fn load_topology(arg: &str) -> Result<Topology, Failure> {
    let path = Path::new(arg);
    if !path.exists() {
        if let Some(t) = bundled::topology(arg) {
            return Ok(t);
        }
    }
    read_topology(path).map_err(|e| Failure::input("topology", e))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::input("output", format!("{}: {e}", path.display())))
}

fn run(args: RunArgs, verbose: bool) -> Result<(), Failure> {
    let topology = load_topology(&args.topo)?;
    let algorithms = args
        .algos
        .iter()
        .map(|a| a.parse::<AlgorithmKind>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::input("algorithms", e))?;
    let actual = read_tm_sequence(&topology, &args.tms).map_err(|e| Failure::input("actual matrices", e))?;
    let predicted = match &args.pred {
        Some(p) => Some(read_tm_sequence(&topology, p).map_err(|e| Failure::input("predicted matrices", e))?),
        None => None,
    };
    let mut sim = SimConfig::seeded(args.seed);
    sim.steps_per_tm = args.steps;
    sim.phi = args.fail_num;
    sim.budget = args.budget;
    sim.recovery = args.recovery.parse::<Recovery>().map_err(|e| Failure::input("flags", e))?;
    sim.flash_lag = args.flash_lag;
    sim.flash_recovery_period = args.flash_recovery_period;
    sim.mw.accuracy = args.accuracy;
    sim.mw.max_phases = args.max_phases;
    sim.mw.strict = args.strict;
    if args.flash_beta > 0.0 {
        sim.flash = Some(FlashConfig { beta: args.flash_beta, sink_seed: args.seed, ..FlashConfig::default() });
    }
    let spec = RunSpec {
        topology,
        actual,
        predicted,
        algorithms,
        sim,
        scale: args.scale,
        prediction_error: args.prediction_error,
    };
    let (actual, predicted) = prepare(&spec).map_err(|e| Failure::from_error("input preparation", e))?;
    fs::create_dir_all(&args.out).map_err(|e| Failure::input("output", format!("{}: {e}", args.out.display())))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Failure::input("flags", e))?;
    let results: Vec<_> = pool.install(|| {
        spec.algorithms
            .par_iter()
            .map(|kind| {
                if verbose {
                    eprintln!("simulating {kind}");
                }
                run_one(&spec, *kind, &actual, &predicted)
            })
            .collect()
    });

    let mut summaries = Vec::new();
    let mut seen = BTreeSet::new();
    for r in results {
        let out = r.map_err(|e| Failure::from_error("simulation", e.into()))?;
        if !seen.insert(out.stem.clone()) {
            continue;
        }
        let summary = if args.timings { out.summary.clone() } else { out.summary.clone().without_timings() };
        write(&args.out.join(format!("{}.csv", out.stem)), &out.report.to_csv())?;
        write(&args.out.join(format!("{}.json", out.stem)), &(summary.to_json() + "\n"))?;
        if args.step_csv {
            write(&args.out.join(format!("{}.steps.csv", out.stem)), &out.report.steps_csv())?;
        }
        if verbose {
            eprintln!("{}: throughput {:.4}", out.stem, summary.throughput);
        }
        summaries.push(summary);
    }
    write(&args.out.join("comparison.csv"), &comparison_csv(&summaries, args.timings))?;
    let all = serde_json::to_string_pretty(&summaries).expect("summaries serialize");
    write(&args.out.join("summary.json"), &(all + "\n"))?;
    Ok(())
}

fn gen_demands(args: GenArgs, verbose: bool) -> Result<(), Failure> {
    let topo = load_topology(&args.topo)?;
    let cfg = DemandConfig {
        num_tms: args.num_tms,
        scale: args.scale,
        epsilon: args.prediction_error,
        seed: args.seed,
        flash: (args.flash_beta > 0.0)
            .then(|| FlashConfig { beta: args.flash_beta, sink_seed: args.seed, ..FlashConfig::default() }),
        ..DemandConfig::default()
    };
    let set = generate(&topo, &cfg).map_err(|e| Failure::from_error("demand generation", e.into()))?;
    let prefix = args.prefix.unwrap_or_else(|| {
        format!("{}__S{}__eps{}__seed{}", topo.name(), args.scale, args.prediction_error, args.seed)
    });
    fs::create_dir_all(&args.out).map_err(|e| Failure::input("output", format!("{}: {e}", args.out.display())))?;
    write(&args.out.join(format!("{prefix}.actual.tms")), &write_tm_sequence(&set.actual))?;
    write(&args.out.join(format!("{prefix}.predicted.tms")), &write_tm_sequence(&set.predicted))?;
    write(&args.out.join(format!("{prefix}.meta.json")), &sidecar(&topo, &cfg, &set))?;
    if verbose {
        eprintln!("wrote {} matrices with prefix {prefix}", set.actual.len());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a, cli.verbose),
        Command::GenDemands(a) => gen_demands(a, cli.verbose),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("te: {} failed: {}", f.stage, f.error);
            ExitCode::from(f.code)
        }
    }
}
