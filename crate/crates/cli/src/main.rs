use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use mediator_cli::acceptance::{run_all, AcceptanceConfig, AcceptanceReport};
use mediator_cli::output::{self, to_json, write, DEFAULT_DIR};
use mediator_cli::sweep::{parse_values, sweep};
use mediator_cli::{execute, presets, CliError, CliResult, Format, RunConfig};

#[derive(Parser)]
#[command(name = "mediator", version, about = "Hybrid quantum-classical mediator simulations")]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its report.
    Run(RunArgs),
    /// Run a scenario once per value of a numeric parameter.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Parameter name: a dotted path (`scenario.model.g1`) or a unique key (`g1`).
        #[arg(long)]
        param: String,
        /// Comma-separated values; may be empty.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
    },
    /// Run the acceptance suite and print the pass/fail matrix.
    Accept {
        /// Acceptance parameters (default: the built-in preset).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "MEDIATOR_OUT")]
        out: Option<PathBuf>,
        /// Criteria to run, e.g. `1,3,8` (default: all).
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
        /// Override a tolerance or parameter, e.g. `general.min_negativity=0.4`.
        #[arg(long = "tol", value_name = "KEY=VALUE")]
        tolerances: Vec<String>,
    },
    /// List the built-in presets and registries.
    ListScenarios,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in preset name (see `list-scenarios`).
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, env = "MEDIATOR_OUT")]
    out: Option<PathBuf>,
    /// Restrict output formats.
    #[arg(long, value_enum)]
    format: Vec<Format>,
}

impl RunArgs {
    fn load(&self) -> CliResult<RunConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => RunConfig::load(path)?,
            (None, Some(name)) => {
                let text = presets::get(name)
                    .ok_or_else(|| CliError::schema("--preset", format!("unknown preset `{name}`")))?;
                RunConfig::from_toml(text)?
            }
            (None, None) => unreachable!("clap requires one of --config and --preset"),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if !self.format.is_empty() {
            cfg.output.formats = self.format.clone();
        }
        Ok(cfg)
    }

    fn out_dir(&self, cfg: &RunConfig) -> PathBuf {
        self.out
            .clone()
            .or_else(|| cfg.output.dir.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_DIR))
    }
}

fn run(args: &RunArgs) -> CliResult<ExitCode> {
    let cfg = args.load()?;
    let start = Instant::now();
    let outcome = execute(&cfg)?;
    let seconds = start.elapsed().as_secs_f64();
    let dir = args.out_dir(&cfg);
    output::write_outcome(&dir, &outcome, &cfg.output.formats, seconds)?;
    let r = &outcome.report;
    println!("{} scenario, seed {}, config {}", r.kind, r.seed, &r.config_hash[..12]);
    for (k, v) in &r.metrics {
        println!("  {k} = {v:.10e}");
    }
    for c in &r.checks {
        println!("  {c}");
    }
    println!(
        "{} ({:.2} s), output in {}",
        if r.passed { "PASS" } else { "FAIL" },
        seconds,
        dir.display()
    );
    Ok(if r.passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn run_sweep(args: &RunArgs, param: &str, values: &str) -> CliResult<ExitCode> {
    let cfg = args.load()?;
    let values = parse_values(values)?;
    let table = sweep(&cfg, param, &values)?;
    let dir = args.out_dir(&cfg);
    output::ensure_dir(&dir)?;
    let csv = table.to_csv();
    if cfg.output.formats.contains(&Format::Csv) {
        write(&dir.join("sweep.csv"), &csv)?;
    }
    if cfg.output.formats.contains(&Format::Json) {
        write(&dir.join("sweep.json"), &table.to_json())?;
    }
    if cfg.output.formats == [Format::Json] {
        println!("{}", table.to_json());
    } else {
        print!("{csv}");
    }
    Ok(ExitCode::SUCCESS)
}

fn accept(
    config: &Option<PathBuf>,
    seed: Option<u64>,
    out: &Option<PathBuf>,
    only: &[u8],
    tolerances: &[String],
) -> CliResult<ExitCode> {
    let mut cfg = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            AcceptanceConfig::from_toml(&text)?
        }
        None => AcceptanceConfig::preset(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    for t in tolerances {
        let (key, value) = t
            .split_once('=')
            .ok_or_else(|| CliError::schema("--tol", format!("expected KEY=VALUE, got `{t}`")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|e| CliError::schema(key.trim(), format!("`{value}`: {e}")))?;
        cfg = cfg.with_value(key.trim(), value)?;
    }
    if let Some(bad) = only.iter().find(|id| !(1..=8).contains(*id)) {
        return Err(CliError::schema("--only", format!("no criterion {bad}")));
    }
    let timed = run_all(&cfg, only);
    for t in &timed {
        println!("{}", t.line());
    }
    let all = timed.iter().all(|t| t.passed());
    println!(
        "{} of {} criteria passed",
        timed.iter().filter(|t| t.passed()).count(),
        timed.len()
    );
    let dir = out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_DIR));
    output::ensure_dir(&dir)?;
    write(
        &dir.join("acceptance.json"),
        &to_json(&AcceptanceReport::new(&cfg, &timed)),
    )?;
    let timing: Vec<_> = timed
        .iter()
        .map(|t| serde_json::json!({ "id": t.result.id, "seconds": t.seconds, "limit": t.limit, "within_limit": t.within_runtime() }))
        .collect();
    write(&dir.join("acceptance-timing.json"), &to_json(&timing))?;
    Ok(if all { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn list() {
    println!("presets:");
    for p in presets::PRESETS {
        let kind = RunConfig::from_toml(p.text).map(|c| c.scenario.kind()).unwrap_or("?");
        println!("  {:<18} {:<10} {}", p.name, kind, presets::summary(p.text));
    }
    println!(
        "mean-field Hamiltonians: {}",
        mediator_core::meanfield::REGISTRY.join(", ")
    );
    let pairs: Vec<String> = mediator_core::ensemble::bracket_registry()
        .iter()
        .map(|(f, g)| format!("{{{f}, {g}}}"))
        .collect();
    println!("classical bracket registry: {}", pairs.join(", "));
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} worker threads: {e}");
            return ExitCode::from(4);
        }
    }
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::Sweep { run, param, values } => run_sweep(run, param, values),
        Command::Accept {
            config,
            seed,
            out,
            only,
            tolerances,
        } => accept(config, *seed, out, only, tolerances),
        Command::ListScenarios => {
            list();
            Ok(ExitCode::SUCCESS)
        }
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        if let Some(h) = e.hint() {
            eprintln!("hint: {h}");
        }
        ExitCode::from(e.exit_code())
    })
}
