//! Benchmark harness: check every `.c` file in a directory and report a CSV
//! row per file, comparing against an optional manifest of expected verdicts.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::Deserialize;
use thiserror::Error;

use crate::driver::{Phase, Settings};

pub const CSV_HEADER: [&str; 6] = ["name", "verdict", "bound", "maxValidatedBound", "time-seconds", "phase"];
pub const MANIFEST_FILE: &str = "manifest.toml";
/// Grace period on top of the check timeout before an isolated run is killed.
pub const KILL_GRACE: Duration = Duration::from_secs(5);

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("bad manifest {path}: {msg}")]
    Manifest { path: PathBuf, msg: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Expected outcome of one file, either just a verdict name or a verdict
/// with its bound.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum Expectation {
    Verdict(String),
    Detailed { verdict: String, bound: Option<u32> },
}

impl Expectation {
    fn matches(&self, row: &BenchRow) -> bool {
        match self {
            Expectation::Verdict(v) => *v == row.verdict,
            Expectation::Detailed { verdict, bound } => *verdict == row.verdict && (bound.is_none() || *bound == row.bound),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct Manifest {
    #[serde(default)]
    pub expected: BTreeMap<String, Expectation>,
}

pub fn read_manifest(path: &Path) -> Result<Manifest, BenchError> {
    let text = std::fs::read_to_string(path).map_err(|source| BenchError::Io { path: path.into(), source })?;
    toml::from_str(&text).map_err(|e| BenchError::Manifest { path: path.into(), msg: e.to_string() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub name: String,
    pub verdict: String,
    pub bound: Option<u32>,
    pub max_validated_bound: u32,
    pub seconds: f64,
    pub phase: String,
}

#[derive(Debug, Clone, Default)]
pub struct BenchConfig {
    pub settings: Settings,
    pub jobs: usize,
    /// Run each file in a child process of this executable.
    pub isolate: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// (file, expected, actual) for every manifest disagreement.
    pub mismatches: Vec<(String, String, String)>,
}

fn phase_name(p: Option<Phase>) -> String {
    match p {
        Some(Phase::Sat) => "SAT".into(),
        Some(Phase::Smt) => "SMT".into(),
        None => "-".into(),
    }
}

fn run_in_process(path: &Path, settings: &Settings) -> Result<BenchRow, BenchError> {
    let start = Instant::now();
    let src = std::fs::read_to_string(path).map_err(|source| BenchError::Io { path: path.into(), source })?;
    let r = settings.run(&src);
    let j = r.to_json(None);
    Ok(BenchRow {
        name: file_name(path),
        verdict: j.verdict,
        bound: j.bound,
        max_validated_bound: j.max_validated_bound,
        seconds: start.elapsed().as_secs_f64(),
        phase: phase_name(r.last_phase),
    })
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Arguments that make a child `check` run reproduce `settings`.
pub fn check_args(settings: &Settings) -> Vec<String> {
    let mut args = vec![
        "--timeout".to_string(),
        format!("{}", settings.check.timeout.as_secs_f64()),
        "--unwinds".to_string(),
        settings.check.schedule.iter().map(u32::to_string).collect::<Vec<_>>().join(","),
        "--backend".to_string(),
        settings.backends.to_string(),
    ];
    if let Some(cmd) = &settings.smt_cmd {
        args.extend(["--smt-cmd".to_string(), cmd.clone()]);
    }
    if let Some(seed) = settings.seed {
        args.extend(["--seed".to_string(), seed.to_string()]);
    }
    args
}

fn run_isolated(exe: &Path, path: &Path, settings: &Settings) -> Result<BenchRow, BenchError> {
    let start = Instant::now();
    let limit = settings.check.timeout + KILL_GRACE;
    let mut child = Command::new(exe)
        .arg("check")
        .arg(path)
        .args(check_args(settings))
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|source| BenchError::Io { path: exe.into(), source })?;
    let mut stdout = child.stdout.take().expect("piped stdout");
    let reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stdout.read_to_string(&mut s);
        s
    });
    let killed = loop {
        match child.try_wait() {
            Ok(Some(_)) => break false,
            Ok(None) if start.elapsed() >= limit => {
                let _ = child.kill();
                let _ = child.wait();
                break true;
            }
            Ok(None) => std::thread::sleep(Duration::from_millis(10)),
            Err(source) => return Err(BenchError::Io { path: exe.into(), source }),
        }
    };
    let out = reader.join().unwrap_or_default();
    let seconds = start.elapsed().as_secs_f64();
    let name = file_name(path);
    let parsed: Option<serde_json::Value> = if killed { None } else { serde_json::from_str(&out).ok() };
    Ok(match parsed {
        Some(v) => BenchRow {
            name,
            verdict: v["verdict"].as_str().unwrap_or("Unknown").to_string(),
            bound: v["bound"].as_u64().map(|b| b as u32),
            max_validated_bound: v["maxValidatedBound"].as_u64().unwrap_or(0) as u32,
            seconds,
            phase: v["phaseLog"]
                .as_array()
                .and_then(|l| l.last())
                .and_then(|e| e["phase"].as_str())
                .unwrap_or("-")
                .to_string(),
        },
        None => BenchRow {
            name,
            verdict: "Unknown".into(),
            bound: None,
            max_validated_bound: 0,
            seconds,
            phase: if killed { "killed".into() } else { "crashed".into() },
        },
    })
}

/// The `.c` files of `dir`, sorted by name.
pub fn sources(dir: &Path) -> Result<Vec<PathBuf>, BenchError> {
    let rd = std::fs::read_dir(dir).map_err(|source| BenchError::Io { path: dir.into(), source })?;
    let mut files: Vec<PathBuf> = rd
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "c"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn run_bench(dir: &Path, cfg: &BenchConfig) -> Result<BenchReport, BenchError> {
    let files = sources(dir)?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest = if manifest_path.exists() { read_manifest(&manifest_path)? } else { Manifest::default() };

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<BenchRow, BenchError>>>> = Mutex::new((0..files.len()).map(|_| None).collect());
    let workers = cfg.jobs.clamp(1, files.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(path) = files.get(i) else { break };
                let row = match &cfg.isolate {
                    Some(exe) => run_isolated(exe, path, &cfg.settings),
                    None => run_in_process(path, &cfg.settings),
                };
                results.lock().expect("no worker panicked")[i] = Some(row);
            });
        }
    });

    let mut rows = Vec::with_capacity(files.len());
    for r in results.into_inner().expect("no worker panicked") {
        rows.push(r.expect("every file was processed")?);
    }
    let mut mismatches = Vec::new();
    for row in &rows {
        if let Some(exp) = manifest.expected.get(&row.name) {
            if !exp.matches(row) {
                let want = match exp {
                    Expectation::Verdict(v) => v.clone(),
                    Expectation::Detailed { verdict, bound: Some(b) } => format!("{verdict}({b})"),
                    Expectation::Detailed { verdict, bound: None } => verdict.clone(),
                };
                let got = match row.bound {
                    Some(b) => format!("{}({b})", row.verdict),
                    None => row.verdict.clone(),
                };
                mismatches.push((row.name.clone(), want, got));
            }
        }
    }
    Ok(BenchReport { rows, mismatches })
}

/// CSV text: header, one row per file, then a summary row when there are rows.
pub fn write_csv<W: Write>(report: &BenchReport, out: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in &report.rows {
        w.write_record([
            r.name.clone(),
            r.verdict.clone(),
            r.bound.map(|b| b.to_string()).unwrap_or_default(),
            r.max_validated_bound.to_string(),
            format!("{:.3}", r.seconds),
            r.phase.clone(),
        ])?;
    }
    if !report.rows.is_empty() {
        let count = |v: &str| report.rows.iter().filter(|r| r.verdict == v).count();
        let solved = report.rows.len() - count("Unknown");
        let total: f64 = report.rows.iter().map(|r| r.seconds).sum();
        w.write_record([
            "summary".to_string(),
            format!(
                "solved {}/{} (NonTerminating {}; BoundedNoRecurrence {}; TriviallyTerminating {})",
                solved,
                report.rows.len(),
                count("NonTerminating"),
                count("BoundedNoRecurrence"),
                count("TriviallyTerminating")
            ),
            String::new(),
            String::new(),
            format!("{total:.3}"),
            String::new(),
        ])?;
    }
    w.flush().map_err(|e| BenchError::Csv(e.into()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_dir_gives_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let report = run_bench(dir.path(), &BenchConfig::default()).unwrap();
        let mut out = Vec::new();
        write_csv(&report, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "name,verdict,bound,maxValidatedBound,time-seconds,phase\n");
    }

    #[test]
    fn manifest_forms() {
        let m: Manifest = toml::from_str(
            "[expected]\n\"a.c\" = \"NonTerminating\"\n\"b.c\" = { verdict = \"BoundedNoRecurrence\", bound = 1000 }\n",
        )
        .unwrap();
        assert_eq!(m.expected["a.c"], Expectation::Verdict("NonTerminating".into()));
        assert_eq!(m.expected["b.c"], Expectation::Detailed { verdict: "BoundedNoRecurrence".into(), bound: Some(1000) });
    }
}
