use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use looprecur::bench::{run_bench, write_csv, BenchConfig};
use looprecur::driver::{BackendChoice, CheckConfig, Settings, DEFAULT_SCHEDULE, DEFAULT_TIMEOUT};
use looprecur::encode::bitblast::{bitblast, emit_dimacs};
use looprecur::encode::encode;
use looprecur::encode::smt2::{emit_smt2, SMT_CMD_ENV};
use looprecur::frontend::{check_supported, parse, Program};
use looprecur::instrument::instrument;
use looprecur::interp::{run_sequence, NondetSequence, RunConfig, RunStatus, DEFAULT_STEP_LIMIT};
use looprecur::normalize::{unparse_with, UnparseOptions};
use looprecur::satcore::{parse_dimacs, Solver, SolveOutcome, DEFAULT_SEED};
use looprecur::witness::to_graphml;

#[derive(Parser)]
#[command(name = "looprecur", version, about = "Find non-terminating loops in small C programs")]
struct Cli {
    /// TOML file with defaults for any flag (keys use the long flag names).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a program and print the verdict as JSON.
    Check {
        file: PathBuf,
        #[command(flatten)]
        opts: CheckOpts,
        /// Write the lasso witness as JSON.
        #[arg(long)]
        witness: Option<PathBuf>,
        /// Write the lasso witness as GraphML.
        #[arg(long)]
        witness_graphml: Option<PathBuf>,
    },
    /// Print the program with recurrent-state gadgets inserted.
    Instrument {
        file: PathBuf,
        #[arg(long)]
        strip_markers: bool,
        /// Write to this file instead of standard output.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print the verification condition at one unwind bound.
    Encode {
        file: PathBuf,
        #[arg(short = 'k', long)]
        k: Option<u32>,
        #[arg(long, value_enum)]
        format: Option<Format>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Solve a DIMACS CNF file with the built-in solver.
    Sat {
        file: PathBuf,
        /// Time budget in seconds.
        #[arg(long)]
        budget: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Interpret a program on a fixed nondet input sequence.
    Run {
        file: PathBuf,
        /// JSON list of {"type": ..., "value": ...} objects.
        #[arg(long)]
        inputs: Option<PathBuf>,
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Check every .c file of a directory and print a CSV report.
    Bench {
        dir: PathBuf,
        #[command(flatten)]
        opts: CheckOpts,
        #[arg(long)]
        jobs: Option<usize>,
        /// Run each file in its own process.
        #[arg(long)]
        isolate: bool,
    },
}

#[derive(Args, Clone, Default)]
struct CheckOpts {
    /// Total time budget in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    /// Comma-separated, strictly increasing unwind bounds.
    #[arg(long)]
    unwinds: Option<String>,
    /// sat, smt or sat,smt.
    #[arg(long)]
    backend: Option<String>,
    /// Shell command that reads SMT-LIB2 on stdin.
    #[arg(long)]
    smt_cmd: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Smt2,
    Dimacs,
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct ConfigFile {
    timeout: Option<f64>,
    unwinds: Option<Unwinds>,
    backend: Option<String>,
    smt_cmd: Option<String>,
    seed: Option<u64>,
    witness: Option<PathBuf>,
    witness_graphml: Option<PathBuf>,
    strip_markers: Option<bool>,
    k: Option<u32>,
    format: Option<Format>,
    budget: Option<f64>,
    inputs: Option<PathBuf>,
    steps: Option<u64>,
    jobs: Option<usize>,
    isolate: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Unwinds {
    List(Vec<u32>),
    Csv(String),
}

fn parse_schedule(s: &str) -> Result<Vec<u32>> {
    let bounds: Vec<u32> = s
        .split(',')
        .map(|x| x.trim().parse::<u32>().with_context(|| format!("bad unwind bound `{x}`")))
        .collect::<Result<_>>()?;
    validate_schedule(bounds)
}

fn validate_schedule(bounds: Vec<u32>) -> Result<Vec<u32>> {
    if bounds.is_empty() || bounds.contains(&0) || bounds.windows(2).any(|w| w[0] >= w[1]) {
        bail!("unwind bounds must be positive and strictly increasing, got {bounds:?}");
    }
    Ok(bounds)
}

fn seconds(s: f64, what: &str) -> Result<Duration> {
    if !(s > 0.0 && s.is_finite()) {
        bail!("{what} must be a positive number of seconds, got {s}");
    }
    Ok(Duration::from_secs_f64(s))
}

fn load_config(path: Option<&Path>) -> Result<ConfigFile> {
    let Some(path) = path else { return Ok(ConfigFile::default()) };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

fn settings(opts: &CheckOpts, cfg: &ConfigFile) -> Result<Settings> {
    let timeout = match opts.timeout.or(cfg.timeout) {
        Some(s) => seconds(s, "--timeout")?,
        None => DEFAULT_TIMEOUT,
    };
    let schedule = match (&opts.unwinds, &cfg.unwinds) {
        (Some(s), _) | (None, Some(Unwinds::Csv(s))) => parse_schedule(s)?,
        (None, Some(Unwinds::List(l))) => validate_schedule(l.clone())?,
        (None, None) => DEFAULT_SCHEDULE.to_vec(),
    };
    let backends = match opts.backend.as_ref().or(cfg.backend.as_ref()) {
        Some(b) => b.parse::<BackendChoice>().map_err(anyhow::Error::msg)?,
        None => BackendChoice::default(),
    };
    let smt_cmd = opts
        .smt_cmd
        .clone()
        .or_else(|| cfg.smt_cmd.clone())
        .or_else(|| std::env::var(SMT_CMD_ENV).ok().filter(|s| !s.trim().is_empty()));
    Ok(Settings { check: CheckConfig { schedule, timeout }, backends, smt_cmd, seed: opts.seed.or(cfg.seed) })
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_program(path: &Path) -> Result<Program> {
    let src = read(path)?;
    let name = path.display().to_string();
    let p = parse(&src).map_err(|e| anyhow::anyhow!("{}", e.render(&name)))?;
    check_supported(p).map_err(|e| anyhow::anyhow!("{}", e.render(&name)))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Write to stdout; a reader that went away early (`| head`) is not an error.
fn out(text: &str) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    match stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => write_file(p, text),
        None => out(text),
    }
}

fn cmd_check(file: &Path, s: &Settings, witness: Option<&Path>, graphml: Option<&Path>) -> Result<ExitCode> {
    let src = read(file)?;
    let report = s.run(&src);
    let mut witness_path = None;
    if let Some(w) = report.verdict.witness() {
        if let Some(p) = witness {
            write_file(p, &w.to_json())?;
            witness_path = Some(p.display().to_string());
        }
        if let Some(p) = graphml {
            write_file(p, &to_graphml(w))?;
        }
    }
    let json = report.to_json(witness_path.as_deref());
    if let Some(detail) = &json.detail {
        eprintln!("{detail}");
    }
    out(&format!("{}\n", serde_json::to_string_pretty(&json)?))?;
    Ok(ExitCode::from(report.verdict.exit_code() as u8))
}

fn cmd_sat(file: &Path, budget: Duration, seed: u64) -> Result<ExitCode> {
    let d = parse_dimacs(&read(file)?)?;
    let mut solver = Solver::new(d.num_vars, seed);
    for c in &d.clauses {
        solver.add_clause(c)?;
    }
    match solver.solve(Some(std::time::Instant::now() + budget)) {
        SolveOutcome::Sat(model) => {
            let lits: Vec<String> =
                (1..model.len()).map(|v| if model[v] { v.to_string() } else { format!("-{v}") }).collect();
            let mut text = String::from("s SATISFIABLE\n");
            for chunk in lits.chunks(10) {
                text.push_str(&format!("v {}\n", chunk.join(" ")));
            }
            text.push_str("v 0\n");
            out(&text)?;
            Ok(ExitCode::from(10))
        }
        SolveOutcome::Unsat => {
            out("s UNSATISFIABLE\n")?;
            Ok(ExitCode::from(20))
        }
        SolveOutcome::Timeout(_) => {
            out("s UNKNOWN\n")?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn cmd_run(file: &Path, inputs: Option<&Path>, steps: u64) -> Result<ExitCode> {
    let p = load_program(file)?;
    let seq: NondetSequence = match inputs {
        Some(path) => serde_json::from_str(&read(path)?).with_context(|| format!("parsing inputs {}", path.display()))?,
        None => Vec::new(),
    };
    let cfg = RunConfig { step_limit: steps, record_visits: true, ..RunConfig::default() };
    let log = run_sequence(&p, &seq, &cfg);
    let status = match &log.status {
        RunStatus::Returned(v) => json!({"status": "returned", "value": v.map(|x| x.to_string())}),
        RunStatus::NondetExhausted => json!({"status": "nondet-exhausted"}),
        RunStatus::StepLimit => json!({"status": "step-limit"}),
        RunStatus::Infeasible(n) => json!({"status": "infeasible", "node": n.to_string()}),
        RunStatus::AssertionFailed(n) => json!({"status": "assertion-failed", "node": n.to_string()}),
    };
    let visits: Vec<_> = log
        .visits
        .iter()
        .map(|v| {
            let state: serde_json::Map<String, serde_json::Value> =
                v.state.iter().map(|s| (s.name.clone(), json!(s.value.to_string()))).collect();
            json!({"loop": v.loop_id.to_string(), "activation": v.activation, "visit": v.visit, "state": state})
        })
        .collect();
    let json = json!({"result": status, "steps": log.steps, "nondetsConsumed": log.nondets_consumed, "visits": visits});
    out(&format!("{}\n", serde_json::to_string_pretty(&json)?))?;
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let cfg = load_config(cli.config.as_deref())?;
    match cli.cmd {
        Cmd::Check { file, opts, witness, witness_graphml } => {
            let s = settings(&opts, &cfg)?;
            let witness = witness.or(cfg.witness.clone());
            let graphml = witness_graphml.or(cfg.witness_graphml.clone());
            cmd_check(&file, &s, witness.as_deref(), graphml.as_deref())
        }
        Cmd::Instrument { file, strip_markers, output } => {
            let ip = instrument(load_program(&file)?);
            let opts = UnparseOptions { strip_markers: strip_markers || cfg.strip_markers.unwrap_or(false) };
            emit(output.as_deref(), &unparse_with(&ip.program, &opts))?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Encode { file, k, format, output } => {
            let k = k.or(cfg.k).context("an unwind bound is required (-k)")?;
            if k == 0 {
                bail!("the unwind bound must be positive");
            }
            let ip = instrument(load_program(&file)?);
            let vc = encode(&ip, k, None)?;
            let text = match format.or(cfg.format).unwrap_or(Format::Smt2) {
                Format::Smt2 => emit_smt2(&vc),
                Format::Dimacs => emit_dimacs(&bitblast(&vc)),
            };
            emit(output.as_deref(), &text)?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Sat { file, budget, seed } => {
            let budget = seconds(budget.or(cfg.budget).unwrap_or(60.0), "--budget")?;
            cmd_sat(&file, budget, seed.or(cfg.seed).unwrap_or(DEFAULT_SEED))
        }
        Cmd::Run { file, inputs, steps } => {
            let steps = steps.or(cfg.steps).unwrap_or(DEFAULT_STEP_LIMIT);
            if steps == 0 {
                bail!("--steps must be positive");
            }
            cmd_run(&file, inputs.or(cfg.inputs.clone()).as_deref(), steps)
        }
        Cmd::Bench { dir, opts, jobs, isolate } => {
            let settings = settings(&opts, &cfg)?;
            let isolate = if isolate || cfg.isolate.unwrap_or(false) {
                Some(std::env::current_exe().context("locating this executable")?)
            } else {
                None
            };
            let bc = BenchConfig { settings, jobs: jobs.or(cfg.jobs).unwrap_or(1), isolate };
            let report = run_bench(&dir, &bc)?;
            let mut csv = Vec::new();
            write_csv(&report, &mut csv)?;
            out(&String::from_utf8(csv)?)?;
            for (name, want, got) in &report.mismatches {
                eprintln!("mismatch: {name}: expected {want}, got {got}");
            }
            Ok(if report.mismatches.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(3) })
        }
    }
}

fn main() -> ExitCode {
    // usage errors share the input-error exit code; 2 is reserved for Unknown
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
