//! `swapdp`: build scenarios, solve them, evaluate and sweep policies.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use swapdp_core::exact::{backward_induction_with, BenchmarkPolicy, BiOptions, PolicyTable};
use swapdp_core::flat::{flat_backward_induction, FlatPolicyTable};
use swapdp_core::report::{build_report, report_csv, report_text, ReportOptions};
use swapdp_core::rl::{greedy_policy, greedy_scoring, train, RLConfig, Scoring};
use swapdp_core::sim::{
    simulate_flat_paths, simulate_paths, sweep, sweep_csv, sweep_range, MetricsSummary,
    SimulationOutput, SolverKind, SweepParam,
};
use swapdp_core::tables;
use swapdp_core::{Error, Scenario, ScenarioConfig};

const EXIT_FAILURE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_CAPACITY: u8 = 3;
const EXIT_INCOMPATIBLE: u8 = 4;

#[derive(Parser)]
#[command(
    name = "swapdp",
    version,
    about = "Battery swap station planning with two demand classes"
)]
struct Cli {
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true, env = "SWAPDP_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scenario construction.
    #[command(subcommand)]
    Scenario(ScenarioCommand),
    /// Solve a scenario and write value and policy tables.
    Solve {
        #[arg(value_parser = ["bi", "rl", "flat"])]
        solver: String,
        #[command(flatten)]
        args: SolveArgs,
    },
    /// Simulate a solved policy.
    Evaluate(EvaluateArgs),
    /// Solve and simulate over a parameter range.
    Sweep(SweepArgs),
    /// Print this build's headline numbers next to the reference values.
    Report(ReportArgs),
}

#[derive(Subcommand)]
enum ScenarioCommand {
    Build {
        #[arg(long)]
        hospitals: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Scenario JSON; rates go to `<stem>.rates.csv` beside it.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    rl_config: Option<PathBuf>,
    /// Largest fleet the exact solver accepts.
    #[arg(long, default_value_t = swapdp_core::exact::DEFAULT_MAX_FLEET)]
    max_fleet: usize,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// A `solve` output directory, a `policy.bin` file, or `benchmark`.
    #[arg(long)]
    policy: String,
    #[arg(long, default_value_t = 500)]
    paths: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Metrics CSV.
    #[arg(long)]
    out: PathBuf,
    /// Per-path CSV dump.
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, value_parser = ["fleet_size", "rho21"])]
    param: String,
    #[arg(long)]
    from: f64,
    #[arg(long)]
    to: f64,
    #[arg(long, default_value_t = 1.0)]
    step: f64,
    #[arg(long, default_value = "bi", value_parser = ["bi", "rl", "benchmark", "flat"])]
    solver: String,
    #[arg(long, default_value_t = 500)]
    paths: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    rl_config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value_t = 500)]
    paths: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Include the RL rows, trained with this configuration.
    #[arg(long)]
    rl_config: Option<PathBuf>,
    #[arg(long, default_value_t = 400)]
    flat_search_limit: usize,
    #[arg(long, default_value_t = swapdp_core::exact::DEFAULT_MAX_FLEET)]
    max_fleet: usize,
    /// Also write the comparison as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Everything needed to rerun a command and check its outputs.
#[derive(Serialize)]
struct RunManifest {
    command: String,
    args: Vec<String>,
    version: &'static str,
    scenario_hash: Option<String>,
    config: serde_json::Value,
    seeds: BTreeMap<String, u64>,
    /// File name to hex SHA-256.
    artifacts: BTreeMap<String, String>,
    timings: BTreeMap<String, f64>,
    peak_memory_estimate_bytes: u64,
}

impl RunManifest {
    fn new(command: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            args: std::env::args().skip(1).collect(),
            version: env!("CARGO_PKG_VERSION"),
            scenario_hash: None,
            config: serde_json::Value::Null,
            seeds: BTreeMap::new(),
            artifacts: BTreeMap::new(),
            timings: BTreeMap::new(),
            peak_memory_estimate_bytes: 0,
        }
    }

    fn write_artifact(&mut self, path: &Path, bytes: &[u8]) -> swapdp_core::Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, bytes)?;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        self.artifacts.insert(name, hex(&Sha256::digest(bytes)));
        Ok(())
    }

    fn save(&self, path: &Path) -> swapdp_core::Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn read_text(path: &Path) -> swapdp_core::Result<String> {
    fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn load_scenario(path: &Path) -> swapdp_core::Result<Scenario> {
    Scenario::from_json(&read_text(path)?)
}

fn load_rl_config(path: Option<&Path>) -> swapdp_core::Result<RLConfig> {
    match path {
        Some(p) => RLConfig::from_json(&read_text(p)?),
        None => Ok(RLConfig::default()),
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn cmd_scenario_build(hospitals: &Path, config: &Path, out: &Path) -> swapdp_core::Result<()> {
    let start = Instant::now();
    let cfg = ScenarioConfig::from_json(&read_text(config)?)?;
    let file = fs::File::open(hospitals).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", hospitals.display()),
        ))
    })?;
    let scenario = Scenario::build(file, cfg)?;
    let mut m = RunManifest::new("scenario build");
    m.scenario_hash = Some(scenario.hash());
    m.config = serde_json::to_value(&scenario.config)?;
    m.write_artifact(out, scenario.to_json().as_bytes())?;
    m.write_artifact(&sibling(out, ".rates.csv"), scenario.rates_csv().as_bytes())?;
    m.timings
        .insert("total_seconds".into(), start.elapsed().as_secs_f64());
    m.save(&sibling(out, ".manifest.json"))
}

fn table_bytes(fleet: usize, horizon: usize) -> u64 {
    ((fleet + 1) * (fleet + 2) / 2 * horizon) as u64
}

fn cmd_solve(solver: &str, args: &SolveArgs) -> swapdp_core::Result<()> {
    let start = Instant::now();
    let scenario = load_scenario(&args.scenario)?;
    let out = &args.out;
    fs::create_dir_all(out)?;
    let mut m = RunManifest::new(&format!("solve {solver}"));
    m.scenario_hash = Some(scenario.hash());
    let cells = table_bytes(scenario.model.fleet_size, scenario.model.horizon);
    let mut config =
        serde_json::json!({ "scenario": scenario.config, "max_fleet": args.max_fleet });
    match solver {
        "bi" => {
            let (values, policy) = backward_induction_with(
                &scenario,
                &BiOptions {
                    max_fleet: args.max_fleet,
                },
            )?;
            m.timings
                .insert("solve_seconds".into(), start.elapsed().as_secs_f64());
            write_classified(&mut m, out, &values, &policy)?;
            m.peak_memory_estimate_bytes = cells * (8 + 24);
        }
        "rl" => {
            let rl = load_rl_config(args.rl_config.as_deref())?;
            let table = train(&scenario, &rl)?;
            m.timings
                .insert("train_seconds".into(), start.elapsed().as_secs_f64());
            let policy = greedy_policy(&scenario, &table, &rl)?;
            let scoring = match greedy_scoring(&scenario.model, &rl) {
                Scoring::Exact => "exact".to_string(),
                Scoring::Sampled(n) => format!("sampled:{n}"),
            };
            m.seeds.insert("rl".into(), rl.seed);
            config["rl"] = serde_json::to_value(&rl)?;
            config["greedy_scoring"] = serde_json::Value::String(scoring);
            config["explore_decisions"] = table.explore_decisions.into();
            config["total_decisions"] = table.total_decisions.into();
            write_classified(&mut m, out, &table.values, &policy)?;
            m.write_artifact(
                &out.join("approx_values.csv"),
                tables::approx_csv(&table).as_bytes(),
            )?;
            m.write_artifact(&out.join("trace.csv"), tables::trace_csv(&table).as_bytes())?;
            m.peak_memory_estimate_bytes = cells * (8 + 8 + 48 + 24);
        }
        "flat" => {
            let (values, policy) = flat_backward_induction(&scenario)?;
            m.timings
                .insert("solve_seconds".into(), start.elapsed().as_secs_f64());
            m.write_artifact(
                &out.join("values.csv"),
                tables::flat_value_csv(&values).as_bytes(),
            )?;
            m.write_artifact(
                &out.join("policy.csv"),
                tables::flat_policy_csv(&policy).as_bytes(),
            )?;
            m.write_artifact(&out.join("policy.bin"), &tables::flat_policy_bin(&policy))?;
            m.peak_memory_estimate_bytes =
                ((scenario.model.fleet_size + 1) * scenario.model.horizon * 16) as u64;
        }
        _ => unreachable!("clap restricts solver names"),
    }
    m.config = config;
    m.timings
        .insert("total_seconds".into(), start.elapsed().as_secs_f64());
    m.save(&out.join("manifest.json"))
}

fn write_classified(
    m: &mut RunManifest,
    out: &Path,
    values: &swapdp_core::ValueTable,
    policy: &PolicyTable,
) -> swapdp_core::Result<()> {
    m.write_artifact(
        &out.join("values.csv"),
        tables::value_csv(values).as_bytes(),
    )?;
    m.write_artifact(
        &out.join("policy.csv"),
        tables::policy_csv(policy).as_bytes(),
    )?;
    m.write_artifact(&out.join("values.bin"), &tables::value_bin(values))?;
    m.write_artifact(&out.join("policy.bin"), &tables::policy_bin(policy))
}

enum LoadedPolicy {
    Classified(PolicyTable),
    Flat(FlatPolicyTable),
    Benchmark,
}

/// The policy, its solver tag and the SHA-256 of the file it came from.
fn load_policy(
    spec: &str,
    scenario: &Scenario,
) -> swapdp_core::Result<(LoadedPolicy, String, Option<String>)> {
    if spec == "benchmark" {
        return Ok((LoadedPolicy::Benchmark, "benchmark".into(), None));
    }
    let mut path = PathBuf::from(spec);
    if path.is_dir() {
        path = path.join("policy.bin");
    }
    let bytes = fs::read(&path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    if !tables::is_container(&bytes) {
        return Err(Error::InvalidInput(format!(
            "{} is not a policy container; pass a `solve` output directory or its policy.bin",
            path.display()
        )));
    }
    let header = tables::decode_container(&bytes)?;
    tables::check_hash(&header.scenario_hash, &scenario.hash())?;
    let solver = header.solver.clone();
    let digest = Some(hex(&Sha256::digest(&bytes)));
    match header.kind {
        tables::ArtifactKind::Policy => Ok((
            LoadedPolicy::Classified(tables::read_policy_bin(&bytes)?),
            solver,
            digest,
        )),
        tables::ArtifactKind::FlatPolicy => Ok((
            LoadedPolicy::Flat(tables::read_flat_policy_bin(&bytes)?),
            solver,
            digest,
        )),
        tables::ArtifactKind::Values => Err(Error::Incompatible(format!(
            "{} holds a value table, not a policy",
            path.display()
        ))),
    }
}

fn cmd_evaluate(args: &EvaluateArgs) -> swapdp_core::Result<()> {
    let start = Instant::now();
    let scenario = load_scenario(&args.scenario)?;
    let (policy, solver, policy_sha256) = load_policy(&args.policy, &scenario)?;
    let keep = args.dump.is_some();
    let output: SimulationOutput = match &policy {
        LoadedPolicy::Classified(p) => simulate_paths(&scenario, p, args.paths, args.seed, keep)?,
        LoadedPolicy::Flat(p) => simulate_flat_paths(&scenario, p, args.paths, args.seed, keep)?,
        LoadedPolicy::Benchmark => simulate_paths(
            &scenario,
            &BenchmarkPolicy {
                fleet: scenario.model.fleet_size,
            },
            args.paths,
            args.seed,
            keep,
        )?,
    };
    let mut m = RunManifest::new("evaluate");
    m.scenario_hash = Some(scenario.hash());
    m.seeds.insert("paths".into(), args.seed);
    m.config = serde_json::json!({ "solver": solver, "policy_sha256": policy_sha256, "paths": args.paths });
    let csv = format!(
        "{}\n{}\n",
        MetricsSummary::csv_header(),
        output
            .summary
            .csv_row(&scenario.model.fleet_size.to_string(), &solver)
    );
    m.write_artifact(&args.out, csv.as_bytes())?;
    if let Some(dump) = &args.dump {
        m.write_artifact(dump, output.dump_csv().as_bytes())?;
    }
    m.peak_memory_estimate_bytes =
        (output.paths.len() * (scenario.model.horizon * 96 + 128)) as u64;
    m.timings
        .insert("total_seconds".into(), start.elapsed().as_secs_f64());
    m.save(&sibling(&args.out, ".manifest.json"))
}

fn cmd_sweep(args: &SweepArgs) -> swapdp_core::Result<()> {
    let start = Instant::now();
    let scenario = load_scenario(&args.scenario)?;
    let param = SweepParam::parse(&args.param)?;
    let solver = SolverKind::parse(&args.solver)?;
    let rl = load_rl_config(args.rl_config.as_deref())?;
    let values = sweep_range(args.from, args.to, args.step)?;
    let rows = sweep(
        &scenario, param, &values, solver, args.paths, args.seed, &rl,
    )?;
    let mut m = RunManifest::new("sweep");
    m.scenario_hash = Some(scenario.hash());
    m.seeds.insert("paths".into(), args.seed);
    if solver == SolverKind::Rl {
        m.seeds.insert("rl".into(), rl.seed);
    }
    m.config = serde_json::json!({
        "param": param.name(),
        "values": values,
        "solver": solver.name(),
        "paths": args.paths,
        "rl": if solver == SolverKind::Rl { serde_json::to_value(&rl)? } else { serde_json::Value::Null },
    });
    m.write_artifact(&args.out, sweep_csv(&rows, solver).as_bytes())?;
    m.timings
        .insert("total_seconds".into(), start.elapsed().as_secs_f64());
    m.save(&sibling(&args.out, ".manifest.json"))
}

fn cmd_report(args: &ReportArgs) -> swapdp_core::Result<()> {
    let scenario = load_scenario(&args.scenario)?;
    let rl = match &args.rl_config {
        Some(p) => Some(load_rl_config(Some(p))?),
        None => None,
    };
    let opts = ReportOptions {
        n_paths: args.paths,
        seed: args.seed,
        rl,
        flat_search_limit: args.flat_search_limit,
        bi: BiOptions {
            max_fleet: args.max_fleet,
        },
    };
    let rows = build_report(&scenario, &opts)?;
    print!("{}", report_text(&rows));
    if let Some(out) = &args.out {
        let mut m = RunManifest::new("report");
        m.scenario_hash = Some(scenario.hash());
        m.seeds.insert("paths".into(), args.seed);
        m.write_artifact(out, report_csv(&rows).as_bytes())?;
        m.save(&sibling(out, ".manifest.json"))?;
    }
    Ok(())
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidInput(_) | Error::Parse { .. } | Error::Json(_) | Error::Csv(_) => {
            EXIT_VALIDATION
        }
        Error::Capacity { .. } => EXIT_CAPACITY,
        Error::Incompatible(_) => EXIT_INCOMPATIBLE,
        Error::Io(_) => EXIT_FAILURE,
    }
}

fn run(cli: Cli) -> swapdp_core::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidInput("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidInput(format!("cannot start thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Scenario(ScenarioCommand::Build {
            hospitals,
            config,
            out,
        }) => cmd_scenario_build(hospitals, config, out),
        Command::Solve { solver, args } => cmd_solve(solver, args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
