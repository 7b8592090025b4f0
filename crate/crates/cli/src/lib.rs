//! Command implementations behind the `specsim` binary.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use specsim_core::config::{ForwardingPolicy, SimConfig};
use specsim_core::lsu::ArcticWhitelist;
use specsim_core::report::RunReport;
use specsim_core::scenarios::{
    self, build, load_scenario_file, run_benign, run_matrix, run_scenario, GadgetOptions,
    MatrixSpec, Mitigation, RunOptions, Scenario, ScenarioError, ScenarioRun, BENIGN, BUNDLED,
    ROP_VARIANT,
};
use specsim_core::trace;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_TIMEOUT: i32 = 3;
pub const EXIT_UNWRITABLE: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> CliError {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "specsim",
    version,
    about = "Speculative out-of-order core simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and print its report as a JSON line.
    Run(RunArgs),
    /// Run the scenario x policy x mitigation cross product.
    Matrix(MatrixArgs),
    /// Run one scenario and write its event trace (one JSON record per line).
    Trace(TraceArgs),
    /// Pretty-print a trace file.
    ShowTrace { path: PathBuf },
    /// List the bundled scenarios.
    List,
}

/// Simulator knobs. Applied over the defaults in this order: the file named
/// by `SPECSIM_CONFIG`, `--config`, the scenario file's settings, `--preset`,
/// then individual flags.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// key=value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `default` or `smt_half`.
    #[arg(long)]
    pub preset: Option<String>,
    /// Reorder buffer entries (micro-ops) [default: 224]
    #[arg(long)]
    pub rob_capacity: Option<String>,
    /// Micro-ops starting execution per cycle [default: 8]
    #[arg(long)]
    pub issue_width: Option<String>,
    /// Micro-ops retired per cycle [default: 4]
    #[arg(long)]
    pub retire_width: Option<String>,
    /// Store buffer entries [default: 56]
    #[arg(long)]
    pub sb_capacity: Option<String>,
    /// Outstanding L1 misses [default: 10]
    #[arg(long)]
    pub mshr_count: Option<String>,
    /// Return stack buffer entries [default: 16]
    #[arg(long)]
    pub rsb_depth: Option<String>,
    /// Branch history table counters [default: 1024]
    #[arg(long)]
    pub bht_size: Option<String>,
    /// baseline, slothbear_stores, slothbear_loads, sloth_marked or arctic_sloth
    #[arg(long)]
    pub forwarding_policy: Option<String>,
    /// lazy, eager or forward_zero
    #[arg(long)]
    pub tlb_enforcement: Option<String>,
    /// Miss latency [default: 300]
    #[arg(long)]
    pub dram_latency_cycles: Option<String>,
    /// Hit latency [default: 4]
    #[arg(long)]
    pub l1_latency_cycles: Option<String>,
    /// Receiver timer resolution [default: 1]
    #[arg(long)]
    pub timer_granularity_cycles: Option<String>,
    /// L1 sets [default: 64]
    #[arg(long)]
    pub cache_sets: Option<String>,
    /// L1 ways [default: 8]
    #[arg(long)]
    pub cache_ways: Option<String>,
    /// Seed for random program generation
    #[arg(long)]
    pub seed: Option<String>,
    /// Cycles per call before giving up [default: 1000000]
    #[arg(long)]
    pub cycle_limit: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ScenarioArgs {
    /// Bundled scenario name (see `list`).
    pub scenario: Option<String>,
    /// Scenario description file instead of a bundled name.
    #[arg(long, conflicts_with = "scenario")]
    pub scenario_file: Option<PathBuf>,
    /// none, fence, coarse_mask or exact_mask.
    #[arg(long, default_value = "none")]
    pub mitigation: String,
    /// Secret byte planted by bundled scenarios.
    #[arg(long)]
    pub secret: Option<u8>,
    /// Probe lines per secret value, for coarse timers.
    #[arg(long)]
    pub amplification: Option<usize>,
    /// Nops between the mispredicted branch and the leaking code.
    #[arg(long)]
    pub padding: Option<usize>,
    /// Arctic whitelist file to load (one hex pc per line).
    #[arg(long)]
    pub whitelist: Option<PathBuf>,
    /// Write the loads the arctic policy learned (merged with the loaded
    /// whitelist) to this file.
    #[arg(long)]
    pub save_whitelist: Option<PathBuf>,
    /// Compare committed state with the in-order reference after every call.
    #[arg(long)]
    pub check_arch: bool,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Also print a human-readable line.
    #[arg(long)]
    pub table: bool,
}

#[derive(Debug, Clone, Args)]
pub struct MatrixArgs {
    /// Comma-separated scenario names (default: all bundled).
    #[arg(long, value_delimiter = ',')]
    pub scenarios: Vec<String>,
    /// Comma-separated forwarding policies (default: all)
    #[arg(long, value_delimiter = ',')]
    pub policies: Vec<String>,
    /// Comma-separated mitigations (default: all)
    #[arg(long, value_delimiter = ',')]
    pub mitigations: Vec<String>,
    /// Leave out the benchmark rows.
    #[arg(long)]
    pub no_benign: bool,
    /// Compare every cell's committed state with the in-order reference
    #[arg(long)]
    pub check_arch: bool,
    /// Line-delimited JSON instead of the table.
    #[arg(long)]
    pub json: bool,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Clone, Args)]
pub struct TraceArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, short)]
    pub out: PathBuf,
}

pub fn resolve_config(
    a: &ConfigArgs,
    scenario: &[(String, String)],
) -> Result<SimConfig, CliError> {
    let mut cfg = SimConfig::default();
    let bad = |what: &dyn std::fmt::Display, e: &dyn std::fmt::Display| {
        CliError::usage(format!("{what}: {e}"))
    };
    let mut files = Vec::new();
    if let Some(env) = std::env::var_os("SPECSIM_CONFIG") {
        files.push(PathBuf::from(env));
    }
    files.extend(a.config.clone());
    for f in files {
        let text = fs::read_to_string(&f).map_err(|e| bad(&f.display(), &e))?;
        cfg.apply_kv(&text).map_err(|e| bad(&f.display(), &e))?;
    }
    for (k, v) in scenario {
        cfg.set(k, v).map_err(|e| bad(&"scenario file", &e))?;
    }
    if let Some(p) = &a.preset {
        cfg.set("preset", p).map_err(|e| bad(&"--preset", &e))?;
    }
    let flags = [
        ("rob_capacity", &a.rob_capacity),
        ("issue_width", &a.issue_width),
        ("retire_width", &a.retire_width),
        ("sb_capacity", &a.sb_capacity),
        ("mshr_count", &a.mshr_count),
        ("rsb_depth", &a.rsb_depth),
        ("bht_size", &a.bht_size),
        ("forwarding_policy", &a.forwarding_policy),
        ("tlb_enforcement", &a.tlb_enforcement),
        ("dram_latency_cycles", &a.dram_latency_cycles),
        ("l1_latency_cycles", &a.l1_latency_cycles),
        ("timer_granularity_cycles", &a.timer_granularity_cycles),
        ("cache_sets", &a.cache_sets),
        ("cache_ways", &a.cache_ways),
        ("seed", &a.seed),
        ("cycle_limit", &a.cycle_limit),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, v)
                .map_err(|e| bad(&format!("--{}", key.replace('_', "-")), &e))?;
        }
    }
    cfg.validate().map_err(|e| bad(&"configuration", &e))?;
    Ok(cfg)
}

enum Target {
    Attack(Box<Scenario>),
    Benign,
}

fn resolve_scenario(a: &ScenarioArgs) -> Result<Target, CliError> {
    if let Some(path) = &a.scenario_file {
        return load_scenario_file(path)
            .map(|s| Target::Attack(Box::new(s)))
            .map_err(|e| CliError::usage(format!("scenario file: {e}")));
    }
    let name = a
        .scenario
        .as_deref()
        .ok_or_else(|| CliError::usage("a scenario name or --scenario-file is required"))?;
    if name == BENIGN {
        return Ok(Target::Benign);
    }
    let mut o = GadgetOptions::default();
    if let Some(s) = a.secret {
        o.secret = s;
    }
    if let Some(n) = a.amplification {
        o.amplification = n;
    }
    if let Some(n) = a.padding {
        o.padding = n;
    }
    build(name, &o)
        .map(|s| Target::Attack(Box::new(s)))
        .ok_or_else(|| CliError::usage(format!("unknown scenario `{name}` (try `specsim list`)")))
}

struct Job {
    target: Target,
    cfg: SimConfig,
    opts: RunOptions,
}

fn prepare(a: &ScenarioArgs, c: &ConfigArgs, trace: bool) -> Result<Job, CliError> {
    let target = resolve_scenario(a)?;
    let cfg = match &target {
        Target::Attack(s) => resolve_config(c, &s.config)?,
        Target::Benign => resolve_config(c, &[])?,
    };
    let mitigation: Mitigation = a.mitigation.parse().map_err(CliError::usage)?;
    let whitelist: BTreeSet<u64> = match &a.whitelist {
        Some(p) => ArcticWhitelist::load(p)
            .map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?,
        None => BTreeSet::new(),
    };
    if matches!(target, Target::Benign) && mitigation != Mitigation::None {
        return Err(CliError::usage("the benchmark takes no mitigation"));
    }
    let opts = RunOptions {
        mitigation: Some(mitigation),
        whitelist,
        trace,
        check_arch: a.check_arch,
    };
    Ok(Job { target, cfg, opts })
}

fn execute(a: &ScenarioArgs, job: &Job) -> Result<ScenarioRun, CliError> {
    let run = match &job.target {
        Target::Attack(s) => run_scenario(s, &job.cfg, &job.opts),
        Target::Benign => run_benign(&job.cfg, &job.opts),
    };
    if let Some(p) = &a.save_whitelist {
        let merged: BTreeSet<u64> = job.opts.whitelist.union(&run.learned).copied().collect();
        ArcticWhitelist::save(p, &merged).map_err(|e| CliError {
            code: EXIT_UNWRITABLE,
            message: format!("{}: {e}", p.display()),
        })?;
    }
    Ok(run)
}

fn timeout_check(run: &ScenarioRun) -> Result<(), CliError> {
    match &run.error {
        Some(ScenarioError::Timeout(n)) => Err(CliError {
            code: EXIT_TIMEOUT,
            message: format!("timed out after {n} cycles in one call"),
        }),
        Some(e) => Err(CliError::usage(e.to_string())),
        None => Ok(()),
    }
}

/// Report line (plus the table line with `--table`). A timed-out run still
/// prints its report before the error.
pub fn cmd_run(a: &RunArgs) -> Result<String, (String, CliError)> {
    let job = prepare(&a.scenario, &a.config, false).map_err(|e| (String::new(), e))?;
    let run = execute(&a.scenario, &job).map_err(|e| (String::new(), e))?;
    let mut out = run.report.to_json();
    out.push('\n');
    if a.table {
        out.push_str(&run.report.row());
        out.push('\n');
    }
    timeout_check(&run).map_err(|e| (out.clone(), e))?;
    Ok(out)
}

/// The selected members of `all`, in the order of `all`.
fn parse_list<T>(
    items: &[String],
    all: &[T],
    parse: impl Fn(&str) -> Result<T, String>,
) -> Result<Vec<T>, CliError>
where
    T: Copy + PartialEq,
{
    if items.is_empty() {
        return Ok(all.to_vec());
    }
    let chosen = items
        .iter()
        .map(|s| parse(s).map_err(CliError::usage))
        .collect::<Result<Vec<T>, _>>()?;
    Ok(all.iter().copied().filter(|t| chosen.contains(t)).collect())
}

pub fn matrix_reports(a: &MatrixArgs) -> Result<Vec<RunReport>, CliError> {
    let cfg = resolve_config(&a.config, &[])?;
    let known: Vec<&str> = BUNDLED.iter().copied().chain([ROP_VARIANT]).collect();
    let names = if a.scenarios.is_empty() {
        BUNDLED.to_vec()
    } else {
        parse_list(&a.scenarios, &known, |n| {
            known
                .iter()
                .copied()
                .find(|k| *k == n)
                .ok_or_else(|| format!("unknown scenario `{n}`"))
        })?
    };
    let spec = MatrixSpec {
        scenarios: names
            .iter()
            .map(|n| scenarios::bundled(n).expect("known name"))
            .collect(),
        policies: parse_list(&a.policies, &ForwardingPolicy::ALL, |s| {
            s.parse()
                .map_err(|e: specsim_core::config::ConfigError| e.to_string())
        })?,
        mitigations: parse_list(&a.mitigations, &Mitigation::ALL, |s| s.parse())?,
        benign: !a.no_benign,
        check_arch: a.check_arch,
    };
    Ok(run_matrix(&spec, &cfg))
}

pub fn cmd_matrix(a: &MatrixArgs) -> Result<String, CliError> {
    let reports = matrix_reports(a)?;
    let mut out = String::new();
    if !a.json {
        out.push_str(&format!(
            "{:<20} {:<17} {:<12} {:<13} {:>9} outcome\n",
            "scenario", "policy", "mitigation", "tlb", "cycles"
        ));
    }
    for r in &reports {
        out.push_str(&if a.json { r.to_json() } else { r.row() });
        out.push('\n');
    }
    Ok(out)
}

pub fn cmd_trace(a: &TraceArgs) -> Result<String, CliError> {
    let job = prepare(&a.scenario, &a.config, true)?;
    let unwritable = |e: std::io::Error| CliError {
        code: EXIT_UNWRITABLE,
        message: format!("{}: {e}", a.out.display()),
    };
    let mut file = fs::File::create(&a.out).map_err(unwritable)?;
    let run = execute(&a.scenario, &job)?;
    file.write_all(trace::to_json_lines(&run.trace).as_bytes())
        .map_err(unwritable)?;
    timeout_check(&run)?;
    Ok(format!(
        "{} events written to {}\n{}\n",
        run.trace.len(),
        a.out.display(),
        run.report.to_json()
    ))
}

pub fn cmd_show_trace(path: &Path) -> Result<String, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    let events = trace::parse_json_lines(&text)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    Ok(trace::pretty(&events))
}

pub fn cmd_list() -> String {
    let mut out = String::new();
    for n in BUNDLED.iter().chain([&ROP_VARIANT, &BENIGN]) {
        out.push_str(n);
        out.push('\n');
    }
    out
}

/// Runs a parsed command line; returns stdout text, stderr text and the exit
/// code.
pub fn dispatch(cli: Cli) -> (String, String, i32) {
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Matrix(a) => cmd_matrix(a).map_err(|e| (String::new(), e)),
        Command::Trace(a) => cmd_trace(a).map_err(|e| (String::new(), e)),
        Command::ShowTrace { path } => cmd_show_trace(path).map_err(|e| (String::new(), e)),
        Command::List => Ok(cmd_list()),
    };
    match result {
        Ok(out) => (out, String::new(), 0),
        Err((out, e)) => (out, format!("specsim: {}\n", e.message), e.code),
    }
}
