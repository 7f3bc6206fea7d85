//! Command-line front end: trace generation, classification,
//! characterization tables, design-space listing, simulation, sweeps, and
//! canned studies.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use sahm::characterize::{
    self, transition_shares, write_coverage_csv, write_intervals_csv, write_transitions_csv,
    DEFAULT_INTERVAL_BUCKETS,
};
use sahm::chip::{enumerate_design_space, ChipConfig};
use sahm::report::{verify_against, write_events_csv, write_sweep_csv, write_sweep_json, Workload};
use sahm::repro;
use sahm::sched::{PolicyConfig, PolicyKind};
use sahm::sim::{simulate, simulate_quiet, SimParams};
use sahm::state::{derive_percentile_cutoffs, CutoffSet};
use sahm::trace::{
    component_clustered_workload, generate_trace, read_trace, read_traces_from_paths, write_trace,
    write_trace_to, SyntheticSpec, Trace,
};

#[derive(Parser)]
#[command(
    name = "sahm",
    version,
    about = "Trace-driven study of state-aware scheduling on chips with component-specialized cores"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic per-epoch counter trace from a Markov state model
    GenTrace(GenTraceArgs),
    /// Print the behavioral state label of every epoch in a trace
    Classify(ClassifyArgs),
    /// Derive per-metric cutoffs at a percentile of the pooled epoch values
    DeriveCutoffs(DeriveCutoffsArgs),
    /// Per-application state residency shares
    Coverage(CoverageArgs),
    /// State-to-state transition shares
    Transitions(TransitionsArgs),
    /// Same-state run-length statistics
    Intervals(IntervalsArgs),
    /// List every chip in the design space spanned by the given speedup levels
    EnumerateConfigs(EnumerateArgs),
    /// Simulate one workload on one chip under one scheduling policy
    Simulate(SimulateArgs),
    /// Run a grid of simulations and emit one table row per run
    Sweep(SweepArgs),
    /// Canned studies with fixed output filenames
    Repro(ReproArgs),
}

#[derive(Args)]
struct GenTraceArgs {
    /// Destination CSV (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 600)]
    epochs: usize,
    /// Probability of staying in the same state from one epoch to the next
    #[arg(long, default_value_t = 0.84)]
    self_transition: f64,
    #[arg(long, default_value_t = repro::DEFAULT_SEED)]
    seed: u64,
    /// Cutoff preset name (intuitive, p25, p50) or JSON file
    #[arg(long, default_value = "intuitive")]
    cutoffs: String,
    /// state:weight pairs, e.g. 0:0.2,1:0.3,9:0.5 (uniform when omitted)
    #[arg(long)]
    weights: Option<String>,
    /// Trace name recorded in the CSV (derived from the seed when omitted)
    #[arg(long)]
    name: Option<String>,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Trace CSV to classify
    #[arg(long)]
    trace: PathBuf,
    #[arg(long, default_value = "intuitive")]
    cutoffs: String,
    #[arg(long, default_value_t = 100)]
    epoch_ms: u32,
}

#[derive(Args)]
struct DeriveCutoffsArgs {
    /// Trace CSV files and/or directories of them
    #[arg(long, required = true, num_args = 1..)]
    traces: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.25)]
    percentile: f64,
    /// Destination JSON (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    epoch_ms: u32,
}

#[derive(Args)]
struct CoverageArgs {
    #[arg(long, required = true, num_args = 1..)]
    traces: Vec<PathBuf>,
    #[arg(long, default_value = "intuitive")]
    cutoffs: String,
    /// Destination CSV (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    epoch_ms: u32,
}

#[derive(Args)]
struct TransitionsArgs {
    #[arg(long, required = true, num_args = 1..)]
    traces: Vec<PathBuf>,
    #[arg(long, default_value = "intuitive")]
    cutoffs: String,
    /// Report shares of off-diagonal (state-changing) transitions only
    #[arg(long)]
    exclude_diagonal: bool,
    /// Destination CSV (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    epoch_ms: u32,
}

#[derive(Args)]
struct IntervalsArgs {
    #[arg(long, required = true, num_args = 1..)]
    traces: Vec<PathBuf>,
    #[arg(long, default_value = "intuitive")]
    cutoffs: String,
    /// Run-length bucket lower bounds, strictly increasing from 1
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_INTERVAL_BUCKETS)]
    buckets: Vec<u64>,
    /// Destination CSV (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    epoch_ms: u32,
}

#[derive(Args)]
struct EnumerateArgs {
    /// Speedup levels available per specialized core, e.g. 0.1,0.2,0.3
    #[arg(long, required = true, value_delimiter = ',', num_args = 1..)]
    levels: Vec<f64>,
    /// Also write the full configurations as JSON
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Trace CSV files and/or directories of them (one program each)
    #[arg(long, required = true, num_args = 1..)]
    traces: Vec<PathBuf>,
    /// Chip preset name (baseline, canonical30, realistic39) or JSON file
    #[arg(long, default_value = "canonical30")]
    chip: String,
    /// blind, greedy, inertia, oracle, or oracle-inertia
    #[arg(long, default_value = "greedy")]
    policy: String,
    /// Scheduler invocations a program is pinned after migrating
    /// (inertia policies only; default 5)
    #[arg(long)]
    inertia_schedulings: Option<u32>,
    #[arg(long, default_value = "intuitive")]
    cutoffs: String,
    /// Stall charged to a program each time it changes cores
    #[arg(long, default_value_t = 0.0)]
    migration_cost_ms: f64,
    #[arg(long, default_value_t = 10)]
    timestep_ms: u64,
    #[arg(long, default_value_t = 100)]
    epoch_ms: u32,
    /// Simulated wall-clock length (longest trace when omitted)
    #[arg(long)]
    horizon_ms: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for result.json (and events.csv.gz)
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Also write the per-step event log, gzip-compressed
    #[arg(long)]
    log_events: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, required = true, num_args = 1..)]
    traces: Vec<PathBuf>,
    /// Run each trace as its own single-program workload
    #[arg(long)]
    per_trace: bool,
    /// Workload label when all traces run together
    #[arg(long, default_value = "mix")]
    workload_name: String,
    /// Chip preset names or JSON files
    #[arg(long, required = true, value_delimiter = ',', num_args = 1..)]
    chips: Vec<String>,
    #[arg(long, required = true, value_delimiter = ',', num_args = 1..)]
    policies: Vec<String>,
    /// Applied to the inertia policies in --policies
    #[arg(long)]
    inertia_schedulings: Option<u32>,
    /// Migration costs in ms
    #[arg(long, required = true, value_delimiter = ',', num_args = 1..)]
    costs: Vec<f64>,
    #[arg(long, default_value = "intuitive")]
    cutoffs: String,
    #[arg(long, default_value_t = 10)]
    timestep_ms: u64,
    #[arg(long, default_value_t = 100)]
    epoch_ms: u32,
    #[arg(long)]
    horizon_ms: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
    /// Destination file (sweep.csv or sweep.json when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct ReproArgs {
    /// Which study to run
    #[arg(value_enum)]
    preset: PresetName,
    /// Trace CSV files and/or directories (synthetic workload when omitted)
    #[arg(long, num_args = 1..)]
    traces: Vec<PathBuf>,
    /// Synthetic trace count when --traces is omitted
    /// (default 12; 39 for realistic-ladder)
    #[arg(long)]
    synth: Option<usize>,
    /// Epochs per synthetic trace
    #[arg(long, default_value_t = 240)]
    epochs: usize,
    /// Share of epochs synthetic programs spend in the all-LOW state
    #[arg(long, default_value_t = 0.08)]
    low_share: f64,
    #[arg(long, default_value_t = 0.84)]
    self_transition: f64,
    #[arg(long, default_value_t = repro::DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value = "intuitive")]
    cutoffs: String,
    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    epoch_ms: u32,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PresetName {
    LimitStudy,
    Breadth,
    GeneralistVsSpecialized,
    RealisticLadder,
}

fn main() -> Result<()> {
    env_logger::init();
    match Cli::parse().command {
        Command::GenTrace(args) => gen_trace(args),
        Command::Classify(args) => classify_cmd(args),
        Command::DeriveCutoffs(args) => derive_cutoffs_cmd(args),
        Command::Coverage(args) => coverage_cmd(args),
        Command::Transitions(args) => transitions_cmd(args),
        Command::Intervals(args) => intervals_cmd(args),
        Command::EnumerateConfigs(args) => enumerate_cmd(args),
        Command::Simulate(args) => simulate_cmd(args),
        Command::Sweep(args) => sweep_cmd(args),
        Command::Repro(args) => repro_cmd(args),
    }
}

/// Opens --out for writing, or stdout when omitted.
fn open_out(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    match path {
        Some(path) => {
            let file =
                File::create(path).with_context(|| format!("creating {}", path.display()))?;
            Ok(Box::new(BufWriter::new(file)))
        }
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn load_traces(paths: &[PathBuf], epoch_ms: u32) -> Result<Vec<Trace>> {
    let traces = read_traces_from_paths(paths, epoch_ms).context("reading traces")?;
    if traces.is_empty() {
        bail!("no trace CSVs found under the given --traces paths");
    }
    Ok(traces)
}

fn parse_weights(spec: Option<&str>) -> Result<[f64; 16]> {
    let Some(spec) = spec else {
        return Ok([1.0; 16]);
    };
    let mut weights = [0.0f64; 16];
    for part in spec.split(',') {
        let (state, weight) = part
            .split_once(':')
            .with_context(|| format!("weight `{part}` is not state:weight"))?;
        let index: usize = state
            .trim()
            .parse()
            .with_context(|| format!("bad state index in `{part}`"))?;
        if index >= 16 {
            bail!("state index {index} out of range 0..=15 in `{part}`");
        }
        let value: f64 = weight
            .trim()
            .parse()
            .with_context(|| format!("bad weight in `{part}`"))?;
        weights[index] = value;
    }
    Ok(weights)
}

fn gen_trace(args: GenTraceArgs) -> Result<()> {
    let cutoffs = CutoffSet::resolve(&args.cutoffs)?;
    let weights = parse_weights(args.weights.as_deref())?;
    let spec = SyntheticSpec::new(weights, args.self_transition, args.epochs, args.seed)?;
    let mut trace = generate_trace(&spec, &cutoffs)?;
    if let Some(name) = args.name {
        trace = trace.with_name(name)?;
    }
    match &args.out {
        Some(path) => {
            write_trace(&trace, path)?;
            println!("wrote {}", path.display());
        }
        None => write_trace_to(&trace, io::stdout().lock(), "stdout")?,
    }
    Ok(())
}

fn classify_cmd(args: ClassifyArgs) -> Result<()> {
    let cutoffs = CutoffSet::resolve(&args.cutoffs)?;
    let trace = read_trace(&args.trace, args.epoch_ms)?;
    let mut out = io::stdout().lock();
    for state in trace.states(&cutoffs) {
        writeln!(out, "{}", state.label())?;
    }
    Ok(())
}

fn derive_cutoffs_cmd(args: DeriveCutoffsArgs) -> Result<()> {
    let traces = load_traces(&args.traces, args.epoch_ms)?;
    let cutoffs = derive_percentile_cutoffs(&traces, args.percentile)?;
    match &args.out {
        Some(path) => {
            cutoffs.save(path)?;
            println!("wrote {}", path.display());
        }
        None => {
            let mut out = io::stdout().lock();
            serde_json::to_writer_pretty(&mut out, &cutoffs)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

fn coverage_cmd(args: CoverageArgs) -> Result<()> {
    let cutoffs = CutoffSet::resolve(&args.cutoffs)?;
    let traces = load_traces(&args.traces, args.epoch_ms)?;
    let table = characterize::coverage(&traces, &cutoffs)?;
    write_coverage_csv(open_out(args.out.as_ref())?, &table)?;
    Ok(())
}

fn transitions_cmd(args: TransitionsArgs) -> Result<()> {
    let cutoffs = CutoffSet::resolve(&args.cutoffs)?;
    let traces = load_traces(&args.traces, args.epoch_ms)?;
    let matrix = characterize::transitions(&traces, &cutoffs);
    let shares = transition_shares(&matrix, args.exclude_diagonal)?;
    write_transitions_csv(open_out(args.out.as_ref())?, &shares)?;
    Ok(())
}

fn intervals_cmd(args: IntervalsArgs) -> Result<()> {
    let cutoffs = CutoffSet::resolve(&args.cutoffs)?;
    let traces = load_traces(&args.traces, args.epoch_ms)?;
    let stats = characterize::intervals(&traces, &cutoffs, &args.buckets)?;
    write_intervals_csv(open_out(args.out.as_ref())?, &stats)?;
    Ok(())
}

#[derive(Serialize)]
struct ConfigListing {
    name: String,
    cores: Vec<sahm::chip::CoreGroup>,
}

fn enumerate_cmd(args: EnumerateArgs) -> Result<()> {
    let configs = enumerate_design_space(&args.levels)?;
    let mut out = io::stdout().lock();
    for chip in &configs {
        writeln!(out, "{}", chip.name())?;
    }
    if let Some(path) = &args.out {
        let listing: Vec<ConfigListing> = configs
            .iter()
            .map(|chip| ConfigListing {
                name: chip.name().to_string(),
                cores: chip.to_groups(),
            })
            .collect();
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut writer = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut writer, &listing)?;
        writeln!(writer)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn simulate_cmd(args: SimulateArgs) -> Result<()> {
    let cutoffs = CutoffSet::resolve(&args.cutoffs)?;
    let chip = ChipConfig::resolve(&args.chip)?;
    let kind: PolicyKind = args.policy.parse()?;
    let policy = PolicyConfig::new(kind, args.inertia_schedulings)?;
    let traces = load_traces(&args.traces, args.epoch_ms)?;
    let params = SimParams {
        timestep_ms: args.timestep_ms,
        epoch_ms: u64::from(args.epoch_ms),
        migration_cost_ms: args.migration_cost_ms,
        horizon_ms: args.horizon_ms,
        seed: args.seed,
    };
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let result_path = args.out.join("result.json");

    let result = if args.log_events {
        let (result, log) = simulate(&traces, &chip, policy, &cutoffs, &params)?;
        verify_against(&log, &result).context("event log failed self-check")?;
        let events_path = args.out.join("events.csv.gz");
        let file = File::create(&events_path)
            .with_context(|| format!("creating {}", events_path.display()))?;
        let mut encoder =
            flate2::write::GzEncoder::new(BufWriter::new(file), flate2::Compression::default());
        let names: Vec<String> = result.programs.iter().map(|p| p.name.clone()).collect();
        write_events_csv(&log, &names, &mut encoder)?;
        encoder.try_finish()?;
        println!("wrote {}", events_path.display());
        result
    } else {
        simulate_quiet(&traces, &chip, policy, &cutoffs, &params)?
    };

    let file = File::create(&result_path)
        .with_context(|| format!("creating {}", result_path.display()))?;
    let mut writer = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut writer, &result)?;
    writeln!(writer)?;
    println!("wrote {}", result_path.display());
    println!(
        "system speedup {:.4} across {} programs ({} migrations/s, {:.1}% matched)",
        result.system_speedup,
        result.programs.len(),
        result.migrations_per_sec,
        100.0 * result.epoch_utilization,
    );
    Ok(())
}

/// Parses policy names, applying --inertia-schedulings to the inertia
/// policies only; setting it without any inertia policy is an error.
fn build_policies(names: &[String], inertia: Option<u32>) -> Result<Vec<PolicyConfig>> {
    let kinds: Vec<PolicyKind> = names
        .iter()
        .map(|name| name.parse::<PolicyKind>().map_err(anyhow::Error::from))
        .collect::<Result<_>>()?;
    if inertia.is_some() && !kinds.iter().any(|kind| kind.uses_inertia()) {
        bail!("--inertia-schedulings was set but no inertia policy is listed");
    }
    kinds
        .into_iter()
        .map(|kind| {
            let setting = if kind.uses_inertia() { inertia } else { None };
            PolicyConfig::new(kind, setting).map_err(anyhow::Error::from)
        })
        .collect()
}

fn sweep_cmd(args: SweepArgs) -> Result<()> {
    let cutoffs = CutoffSet::resolve(&args.cutoffs)?;
    let traces = load_traces(&args.traces, args.epoch_ms)?;
    let workloads: Vec<Workload> = if args.per_trace {
        sahm::report::per_trace_workloads(&traces)
    } else {
        vec![Workload::new(args.workload_name.clone(), traces)]
    };
    let chips: Vec<ChipConfig> = args
        .chips
        .iter()
        .map(|spec| ChipConfig::resolve(spec).map_err(anyhow::Error::from))
        .collect::<Result<_>>()?;
    let policies = build_policies(&args.policies, args.inertia_schedulings)?;
    let params = SimParams {
        timestep_ms: args.timestep_ms,
        epoch_ms: u64::from(args.epoch_ms),
        migration_cost_ms: 0.0,
        horizon_ms: args.horizon_ms,
        seed: args.seed,
    };
    let rows = sahm::report::sweep(
        &workloads,
        &chips,
        &policies,
        &args.costs,
        &cutoffs,
        &params,
    )?;
    let default_name = match args.format {
        OutputFormat::Csv => "sweep.csv",
        OutputFormat::Json => "sweep.json",
    };
    let path = args.out.unwrap_or_else(|| PathBuf::from(default_name));
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    let writer = BufWriter::new(file);
    match args.format {
        OutputFormat::Csv => write_sweep_csv(&rows, writer)?,
        OutputFormat::Json => write_sweep_json(&rows, writer)?,
    }
    println!("wrote {} ({} rows)", path.display(), rows.len());
    Ok(())
}

fn repro_cmd(args: ReproArgs) -> Result<()> {
    let cutoffs = CutoffSet::resolve(&args.cutoffs)?;
    let traces = if args.traces.is_empty() {
        let count = args.synth.unwrap_or(match args.preset {
            PresetName::RealisticLadder => 39,
            _ => 12,
        });
        component_clustered_workload(
            count,
            args.epochs,
            args.low_share,
            args.self_transition,
            args.seed,
            &cutoffs,
        )?
    } else {
        load_traces(&args.traces, args.epoch_ms)?
    };
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let path = match args.preset {
        PresetName::LimitStudy => repro::limit_study(&traces, &cutoffs, &args.out)?,
        PresetName::Breadth => repro::breadth(&traces, &cutoffs, &args.out)?,
        PresetName::GeneralistVsSpecialized => {
            repro::generalist_vs_specialized(&traces, &cutoffs, &args.out)?
        }
        PresetName::RealisticLadder => repro::realistic_ladder(&traces, &cutoffs, &args.out)?,
    };
    println!("wrote {}", path.display());
    Ok(())
}
