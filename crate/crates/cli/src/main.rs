//! `idsup`: run verification suites, build partition trees, sweep the divergence example.
//!
//! Exit codes: 0 when every check passed, 1 when any check failed or a tree
//! failed validation, 2 on configuration errors.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use idsup_core::lab::{self, run_example_ex_sweep, CheckResult, ExampleExParams};
use idsup_core::majorizing::MeasureOnT;
use idsup_core::metric::PhiFamily;
use idsup_core::partition::{beta_functional, build_partition_tree};
use idsup_core::scenario::{load_scenario, make_example_ex, random_scenario, ScenarioConfig};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "idsup", version, about = "Chaining bounds and Monte Carlo checks for infinitely divisible suprema")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run registry checks on scenarios and write a report.
    Run(RunArgs),
    /// Build and validate the labelled partition tree of one scenario.
    Partition(PartitionArgs),
    /// Sweep the divergence example and write the table.
    SweepExampleEx(SweepArgs),
    /// Write a generated scenario as a JSON file usable with `--scenario`.
    Scenario(ScenarioArgs),
}

#[derive(clap::Args)]
struct ScenarioArgs {
    #[command(flatten)]
    sources: Sources,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
enum Format {
    Jsonl,
    Csv,
}

#[derive(clap::Args)]
struct Sources {
    /// Scenario file (repeatable).
    #[arg(long = "scenario")]
    scenarios: Vec<PathBuf>,
    /// Generated scenario, e.g. `random:seed=7,atoms=6,points=4` or
    /// `example_ex:x_min=1,x_max=100,atoms=1000` (repeatable).
    #[arg(long = "generate")]
    generate: Vec<String>,
    /// Overrides the seed of every scenario.
    #[arg(long, env = "IDSUP_SEED")]
    seed: Option<u64>,
    /// Overrides the replication count of every scenario.
    #[arg(long)]
    reps: Option<usize>,
}

#[derive(clap::Args)]
struct RunArgs {
    #[command(flatten)]
    sources: Sources,
    /// Comma-separated check names, or `all`.
    #[arg(long, default_value = "all")]
    checks: String,
    /// Report path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "jsonl")]
    format: Format,
}

#[derive(clap::Args)]
struct PartitionArgs {
    #[command(flatten)]
    sources: Sources,
    /// `uniform` or comma-separated weights summing to 1.
    #[arg(long, default_value = "uniform")]
    mu: String,
    /// Deepest level; defaults to one past the first all-singleton level, at most 6.
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SweepArgs {
    /// Comma-separated decreasing lower endpoints.
    #[arg(long, default_value = "0.5,0.2,0.1,0.05,0.02")]
    x_min: String,
    #[arg(long, default_value_t = 10.0)]
    x_max: f64,
    #[arg(long, default_value_t = 20_000)]
    reps: usize,
    #[arg(long, env = "IDSUP_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

/// Configuration problem: reported on stderr, exit code 2.
struct ConfigError(String);

impl<E: std::fmt::Display> From<E> for ConfigError {
    fn from(e: E) -> ConfigError {
        ConfigError(e.to_string())
    }
}

/// Echoed as the first record of every report.
#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    scenarios: Vec<String>,
    checks: Vec<String>,
    seed: Option<u64>,
    replications: Option<usize>,
    out: Option<String>,
    format: Format,
}

#[derive(Serialize)]
struct Record<'a> {
    scenario: &'a str,
    check: &'a str,
    name: &'a str,
    lhs: f64,
    rhs: f64,
    slack_or_constant: f64,
    passed: bool,
    std_errors_used: f64,
    replications: usize,
    note: &'a str,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Partition(args) => cmd_partition(args),
        Command::SweepExampleEx(args) => cmd_sweep(args),
        Command::Scenario(args) => cmd_scenario(args),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(ConfigError(msg)) => {
            eprintln!("idsup: {msg}");
            ExitCode::from(2)
        }
    }
}

fn parse_kv(spec: &str) -> Result<(String, Vec<(String, String)>), ConfigError> {
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let pairs = rest
        .split(',')
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| ConfigError(format!("malformed generator field {p:?} in {spec:?}")))
        })
        .collect::<Result<_, _>>()?;
    Ok((kind.to_string(), pairs))
}

fn field<T: std::str::FromStr>(pairs: &[(String, String)], key: &str, default: T) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    match pairs.iter().find(|(k, _)| k == key) {
        None => Ok(default),
        Some((_, v)) => v.parse().map_err(|e| ConfigError(format!("bad value for {key}: {e}"))),
    }
}

fn generate(spec: &str) -> Result<ScenarioConfig, ConfigError> {
    let (kind, pairs) = parse_kv(spec)?;
    let known: &[&str] = match kind.as_str() {
        "random" => &["seed", "atoms", "points", "scale"],
        "example_ex" => &["x_min", "x_max", "atoms"],
        other => return Err(ConfigError(format!("unknown generator {other:?}"))),
    };
    if let Some((k, _)) = pairs.iter().find(|(k, _)| !known.contains(&k.as_str())) {
        return Err(ConfigError(format!("unknown field {k:?} for generator {kind}")));
    }
    Ok(match kind.as_str() {
        "random" => random_scenario(
            field(&pairs, "seed", 0)?,
            field(&pairs, "atoms", 6)?,
            field(&pairs, "points", 4)?,
            field(&pairs, "scale", 1.0)?,
        )?,
        _ => make_example_ex(
            field(&pairs, "x_min", 1.0)?,
            field(&pairs, "x_max", 100.0)?,
            field(&pairs, "atoms", 1000)?,
        )?,
    })
}

fn load_sources(src: &Sources) -> Result<Vec<(String, ScenarioConfig)>, ConfigError> {
    if src.reps == Some(0) || src.reps == Some(1) {
        return Err(ConfigError("--reps must be at least 2".into()));
    }
    let mut out = Vec::new();
    for path in &src.scenarios {
        let sc = load_scenario(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        out.push((path.display().to_string(), sc));
    }
    for spec in &src.generate {
        out.push((spec.clone(), generate(spec)?));
    }
    Ok(out
        .into_iter()
        .map(|(label, mut sc)| {
            if let Some(seed) = src.seed {
                sc = sc.with_seed(seed);
            }
            if let Some(reps) = src.reps {
                sc = sc.with_replications(reps);
            }
            (label, sc)
        })
        .collect())
}

fn labels(src: &Sources) -> Vec<String> {
    src.scenarios
        .iter()
        .map(|p| p.display().to_string())
        .chain(src.generate.iter().cloned())
        .collect()
}

fn open_out(out: &Option<PathBuf>) -> Result<Box<dyn Write>, ConfigError> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn parse_checks(spec: &str) -> Result<Vec<String>, ConfigError> {
    let names: Vec<String> = if spec.trim() == "all" {
        lab::CHECK_NAMES.iter().map(|s| s.to_string()).collect()
    } else {
        spec.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
    };
    if let Some(bad) = names.iter().find(|n| !lab::is_known_check(n)) {
        return Err(ConfigError(format!(
            "unknown check {bad:?}; known: {}",
            lab::CHECK_NAMES.join(",")
        )));
    }
    Ok(names)
}

/// Single writer for one report; records stream out as checks finish.
enum Sink {
    Jsonl(Box<dyn Write>),
    Csv(csv::Writer<Box<dyn Write>>),
}

impl Sink {
    fn new(format: Format, mut out: Box<dyn Write>, manifest: &impl Serialize) -> Result<Sink, ConfigError> {
        let echo = serde_json::to_string(manifest)?;
        Ok(match format {
            Format::Jsonl => {
                writeln!(out, "{{\"manifest\":{echo}}}")?;
                Sink::Jsonl(out)
            }
            Format::Csv => {
                writeln!(out, "# manifest {echo}")?;
                Sink::Csv(csv::Writer::from_writer(out))
            }
        })
    }

    fn write(&mut self, record: &impl Serialize) -> Result<(), ConfigError> {
        match self {
            Sink::Jsonl(out) => {
                serde_json::to_writer(&mut *out, record)?;
                out.write_all(b"\n")?;
            }
            Sink::Csv(w) => w.serialize(record)?,
        }
        Ok(())
    }

    fn finish(self) -> Result<(), ConfigError> {
        match self {
            Sink::Jsonl(mut out) => out.flush()?,
            Sink::Csv(mut w) => w.flush()?,
        }
        Ok(())
    }
}

fn cmd_run(args: RunArgs) -> Result<bool, ConfigError> {
    let checks = parse_checks(&args.checks)?;
    let scenarios = load_sources(&args.sources)?;
    let manifest = RunManifest {
        command: "run",
        scenarios: labels(&args.sources),
        checks: checks.clone(),
        seed: args.sources.seed,
        replications: args.sources.reps,
        out: args.out.as_ref().map(|p| p.display().to_string()),
        format: args.format,
    };
    let mut sink = Sink::new(args.format, open_out(&args.out)?, &manifest)?;
    let mut all_passed = true;
    for (label, sc) in &scenarios {
        for check in &checks {
            let results = lab::run_named(check, sc).unwrap_or_else(|e| {
                vec![CheckResult::new(check.as_str(), f64::NAN, f64::NAN, f64::NAN, false).with_note(format!("error: {e}"))]
            });
            for r in &results {
                all_passed &= r.passed;
                sink.write(&Record {
                    scenario: label,
                    check,
                    name: &r.name,
                    lhs: r.lhs,
                    rhs: r.rhs,
                    slack_or_constant: r.slack_or_constant,
                    passed: r.passed,
                    std_errors_used: r.std_errors_used,
                    replications: r.replications,
                    note: &r.note,
                })?;
            }
        }
    }
    sink.finish()?;
    Ok(all_passed)
}

fn parse_mu(spec: &str, n: usize) -> Result<MeasureOnT, ConfigError> {
    if spec.trim() == "uniform" {
        return Ok(MeasureOnT::uniform(n));
    }
    let weights = spec
        .split(',')
        .map(|w| w.trim().parse::<f64>().map_err(|e| ConfigError(format!("bad weight {w:?}: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MeasureOnT::for_points(weights, n)?)
}

fn cmd_partition(args: PartitionArgs) -> Result<bool, ConfigError> {
    let mut scenarios = load_sources(&args.sources)?;
    if scenarios.len() != 1 {
        return Err(ConfigError(format!("partition takes exactly one scenario, got {}", scenarios.len())));
    }
    let (_, sc) = scenarios.remove(0);
    let mu = parse_mu(&args.mu, sc.n_points())?;
    let phi = PhiFamily::new(&sc);
    let built = match build_partition_tree(&phi, &mu, args.levels) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("idsup: tree construction failed: {e}");
            return Ok(false);
        }
    };
    let beta = match beta_functional(&phi, &built.tree) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("idsup: tree failed validation: {e}");
            return Ok(false);
        }
    };
    let mut out = open_out(&args.out)?;
    out.write_all(built.tree.to_text().as_bytes())?;
    writeln!(out, "beta {beta:e}")?;
    writeln!(out, "constant {:e}", built.measured_constant)?;
    out.flush()?;
    Ok(true)
}

fn cmd_sweep(args: SweepArgs) -> Result<bool, ConfigError> {
    let x_min_sweep = args
        .x_min
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| ConfigError(format!("bad x_min {x:?}: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if args.reps < 2 {
        return Err(ConfigError("--reps must be at least 2".into()));
    }
    let params = ExampleExParams {
        x_min_sweep,
        x_max: args.x_max,
        replications: args.reps,
        seed: args.seed,
        ..ExampleExParams::default()
    };
    let table = run_example_ex_sweep(&params)?;
    let manifest = serde_json::json!({
        "command": "sweep-example-ex",
        "params": params,
        "out": args.out.as_ref().map(|p| p.display().to_string()),
        "format": args.format,
        "slope": table.slope,
        "tail_rel_error": table.tail_rel_error,
    });
    let mut sink = Sink::new(args.format, open_out(&args.out)?, &manifest)?;
    for row in &table.rows {
        sink.write(row)?;
    }
    sink.finish()?;
    Ok(true)
}

fn cmd_scenario(args: ScenarioArgs) -> Result<bool, ConfigError> {
    let mut scenarios = load_sources(&args.sources)?;
    if scenarios.len() != 1 {
        return Err(ConfigError(format!("scenario takes exactly one source, got {}", scenarios.len())));
    }
    let (_, sc) = scenarios.remove(0);
    let mut out = open_out(&args.out)?;
    writeln!(out, "{}", sc.to_json())?;
    out.flush()?;
    Ok(true)
}
