//! Iterative bounded checking over an unwind schedule, with the time budget
//! split between a SAT phase and an SMT phase.

use std::cell::Cell;
use std::collections::VecDeque;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::encode::bitblast::bitblast;
use crate::encode::smt2::{emit_smt2, model_values, run_solver, SmtAnswer};
use crate::encode::{encode, EncodeError, VcFormula};
use crate::frontend::{check_supported, parse, Program};
use crate::instrument::{insert_rsi, InstrumentedProgram};
use crate::interp::{validate_witness, ValidationResult};
use crate::normalize::brace;
use crate::satcore::{SolveOutcome, Solver, DEFAULT_SEED};
use crate::witness::{build_witness, extract_trace, Witness};

pub const DEFAULT_SCHEDULE: [u32; 9] = [2, 3, 4, 10, 12, 20, 40, 100, 1000];
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(420);

/// Source of elapsed time, so budget accounting can be tested deterministically.
pub trait Clock {
    fn now(&self) -> Duration;
}

#[derive(Debug, Clone, Copy)]
pub struct SystemClock(Instant);

impl SystemClock {
    pub fn new() -> SystemClock {
        SystemClock(Instant::now())
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock::new()
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.0.elapsed()
    }
}

/// A clock that only moves when told to.
#[derive(Debug, Default)]
pub struct FakeClock(Cell<Duration>);

impl FakeClock {
    pub fn advance(&self, d: Duration) {
        self.0.set(self.0.get() + d);
    }
}

impl Clock for FakeClock {
    fn now(&self) -> Duration {
        self.0.get()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Phase {
    #[serde(rename = "SAT")]
    Sat,
    #[serde(rename = "SMT")]
    Smt,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendOutcome {
    /// Symbol values, indexed by symbol id.
    Sat(Vec<Option<u64>>),
    Unsat,
    Timeout,
    Error(String),
}

impl BackendOutcome {
    pub fn label(&self) -> &'static str {
        match self {
            BackendOutcome::Sat(_) => "SAT",
            BackendOutcome::Unsat => "UNSAT",
            BackendOutcome::Timeout => "TIMEOUT",
            BackendOutcome::Error(_) => "ERROR",
        }
    }
}

pub trait Backend {
    fn name(&self) -> &str;
    fn solve(&mut self, vc: &VcFormula, budget: Duration) -> BackendOutcome;
}

/// Bit-blasting plus the embedded CDCL solver.
#[derive(Debug, Clone)]
pub struct SatBackend {
    pub seed: u64,
}

impl Default for SatBackend {
    fn default() -> Self {
        SatBackend { seed: DEFAULT_SEED }
    }
}

impl Backend for SatBackend {
    fn name(&self) -> &str {
        "sat"
    }

    fn solve(&mut self, vc: &VcFormula, budget: Duration) -> BackendOutcome {
        let deadline = Instant::now() + budget;
        let cnf = bitblast(vc);
        let mut solver = Solver::new(cnf.num_vars, self.seed);
        for c in &cnf.clauses {
            if let Err(e) = solver.add_clause(c) {
                return BackendOutcome::Error(e.to_string());
            }
        }
        match solver.solve(Some(deadline)) {
            SolveOutcome::Sat(model) => BackendOutcome::Sat(cnf.decode(&model)),
            SolveOutcome::Unsat => BackendOutcome::Unsat,
            SolveOutcome::Timeout(_) => BackendOutcome::Timeout,
        }
    }
}

/// SMT-LIB text piped to an external solver command.
#[derive(Debug, Clone)]
pub struct SmtBackend {
    pub command: String,
}

impl Backend for SmtBackend {
    fn name(&self) -> &str {
        "smt"
    }

    fn solve(&mut self, vc: &VcFormula, budget: Duration) -> BackendOutcome {
        match run_solver(&self.command, &emit_smt2(vc), budget) {
            Ok(SmtAnswer::Sat(model)) => BackendOutcome::Sat(model_values(vc.store(), &model)),
            Ok(SmtAnswer::Unsat) => BackendOutcome::Unsat,
            Ok(SmtAnswer::Timeout) => BackendOutcome::Timeout,
            Ok(SmtAnswer::Unknown(why)) => BackendOutcome::Error(format!("solver answered unknown: {why}")),
            Err(e) => BackendOutcome::Error(e.to_string()),
        }
    }
}

/// What a scripted mock call returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scripted {
    Unsat,
    Timeout,
    Error,
    /// Answer for real with the embedded solver.
    Solve,
}

/// Backend that replays a script and advances a fake clock per call.
pub struct MockBackend<'c> {
    pub name: String,
    pub script: VecDeque<(Scripted, Duration)>,
    pub clock: &'c FakeClock,
    pub calls: Vec<(u32, Duration)>,
}

impl<'c> MockBackend<'c> {
    pub fn new(name: &str, clock: &'c FakeClock, script: impl IntoIterator<Item = (Scripted, Duration)>) -> Self {
        MockBackend { name: name.to_string(), script: script.into_iter().collect(), clock, calls: Vec::new() }
    }
}

impl Backend for MockBackend<'_> {
    fn name(&self) -> &str {
        &self.name
    }

    fn solve(&mut self, vc: &VcFormula, budget: Duration) -> BackendOutcome {
        self.calls.push((vc.ssa.bound, budget));
        let (what, took) = self.script.pop_front().unwrap_or((Scripted::Unsat, Duration::ZERO));
        self.clock.advance(took);
        match what {
            Scripted::Unsat => BackendOutcome::Unsat,
            Scripted::Timeout => BackendOutcome::Timeout,
            Scripted::Error => BackendOutcome::Error("scripted failure".into()),
            Scripted::Solve => SatBackend::default().solve(vc, Duration::from_secs(60)),
        }
    }
}

/// Encode at bound `k` and solve; encoding failures count as a timeout.
pub fn run_backend(
    b: &mut dyn Backend,
    ip: &InstrumentedProgram,
    k: u32,
    budget: Duration,
    clock: &dyn Clock,
) -> (BackendOutcome, Option<VcFormula>, Duration) {
    let start = clock.now();
    let outcome = match encode(ip, k, Some(Instant::now() + budget)) {
        Ok(vc) => {
            let remaining = budget.saturating_sub(clock.now().saturating_sub(start));
            let out = b.solve(&vc, remaining.max(Duration::from_millis(1)));
            (out, Some(vc))
        }
        Err(EncodeError::Timeout) | Err(EncodeError::TooLarge(_)) => (BackendOutcome::Timeout, None),
    };
    (outcome.0, outcome.1, clock.now().saturating_sub(start))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    NonTerminating { bound: u32, witness: Box<Witness> },
    BoundedNoRecurrence { max_validated_bound: u32 },
    TriviallyTerminating,
    Unknown { reason: String, max_validated_bound: u32, detail: Option<String> },
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::NonTerminating { .. } => "NonTerminating",
            Verdict::BoundedNoRecurrence { .. } => "BoundedNoRecurrence",
            Verdict::TriviallyTerminating => "TriviallyTerminating",
            Verdict::Unknown { .. } => "Unknown",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Verdict::NonTerminating { .. } => 10,
            Verdict::BoundedNoRecurrence { .. } | Verdict::TriviallyTerminating => 0,
            Verdict::Unknown { .. } => 2,
        }
    }

    pub fn witness(&self) -> Option<&Witness> {
        match self {
            Verdict::NonTerminating { witness, .. } => Some(witness),
            _ => None,
        }
    }

    fn unknown(reason: &str, max_validated_bound: u32) -> Verdict {
        Verdict::Unknown { reason: reason.into(), max_validated_bound, detail: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PhaseEntry {
    pub phase: Phase,
    pub bound: u32,
    pub outcome: String,
    pub budget_seconds: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub verdict: Verdict,
    /// Largest bound whose formula was proven unsatisfiable.
    pub max_validated_bound: u32,
    pub phase_log: Vec<PhaseEntry>,
    pub elapsed: Duration,
    /// Phase active when the run ended.
    pub last_phase: Option<Phase>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct VerdictJson {
    pub verdict: String,
    pub bound: Option<u32>,
    pub max_validated_bound: u32,
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    pub witness_path: Option<String>,
    pub elapsed_seconds: f64,
    pub phase_log: Vec<PhaseEntry>,
}

impl CheckReport {
    pub fn to_json(&self, witness_path: Option<&str>) -> VerdictJson {
        let (bound, reason, detail) = match &self.verdict {
            Verdict::NonTerminating { bound, .. } => (Some(*bound), None, None),
            Verdict::BoundedNoRecurrence { max_validated_bound } => (Some(*max_validated_bound), None, None),
            Verdict::TriviallyTerminating => (None, None, None),
            Verdict::Unknown { reason, detail, .. } => (None, Some(reason.clone()), detail.clone()),
        };
        VerdictJson {
            verdict: self.verdict.name().into(),
            bound,
            max_validated_bound: self.max_validated_bound,
            reason,
            detail,
            witness_path: witness_path.map(str::to_string),
            elapsed_seconds: self.elapsed.as_secs_f64(),
            phase_log: self.phase_log.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckConfig {
    pub schedule: Vec<u32>,
    pub timeout: Duration,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig { schedule: DEFAULT_SCHEDULE.to_vec(), timeout: DEFAULT_TIMEOUT }
    }
}

/// The backends for each phase. A phase that is requested but has no
/// backend (an SMT phase without a solver command) ends the run as unknown.
pub struct Backends<'a> {
    pub sat: Option<&'a mut dyn Backend>,
    pub smt: Option<&'a mut dyn Backend>,
    pub smt_requested: bool,
}

/// Check a source text; parse failures become an unknown verdict.
pub fn check_source(src: &str, cfg: &CheckConfig, backends: Backends<'_>, clock: &dyn Clock) -> CheckReport {
    match parse(src) {
        Ok(p) => check(&p, cfg, backends, clock),
        Err(e) => CheckReport {
            verdict: Verdict::Unknown { reason: "unsupported-input".into(), max_validated_bound: 0, detail: Some(e.to_string()) },
            max_validated_bound: 0,
            phase_log: Vec::new(),
            elapsed: Duration::ZERO,
            last_phase: None,
        },
    }
}

pub fn check(p: &Program, cfg: &CheckConfig, backends: Backends<'_>, clock: &dyn Clock) -> CheckReport {
    let start = clock.now();
    let mut report = CheckReport {
        verdict: Verdict::TriviallyTerminating,
        max_validated_bound: 0,
        phase_log: Vec::new(),
        elapsed: Duration::ZERO,
        last_phase: None,
    };
    let finish = |mut r: CheckReport, v: Verdict| {
        r.verdict = v;
        r.elapsed = clock.now().saturating_sub(start);
        r
    };

    let checked = match check_supported(p.clone()) {
        Ok(c) => c,
        Err(e) => {
            let v = Verdict::Unknown { reason: "unsupported-input".into(), max_validated_bound: 0, detail: Some(e.to_string()) };
            return finish(report, v);
        }
    };
    let ip = insert_rsi(brace(checked));
    if ip.sites.is_empty() {
        return finish(report, Verdict::TriviallyTerminating);
    }

    let Backends { sat, smt, smt_requested } = backends;
    let mut phases: Vec<(Phase, Option<&mut dyn Backend>)> = Vec::new();
    if let Some(b) = sat {
        phases.push((Phase::Sat, Some(b)));
    }
    if smt.is_some() || smt_requested {
        phases.push((Phase::Smt, smt));
    }
    if phases.is_empty() {
        return finish(report, Verdict::unknown("no-backend", 0));
    }

    let schedule = &cfg.schedule;
    let share = if phases.len() == 1 { cfg.timeout } else { cfg.timeout / 2 };
    let mut last_validated: Option<u32> = None;
    let mut leftover = Duration::ZERO;

    for (phase, backend) in phases {
        report.last_phase = Some(phase);
        let Some(backend) = backend else {
            return finish(report, Verdict::unknown("no-smt-backend", last_validated.unwrap_or(0)));
        };
        let mut remaining = share + leftover;
        let mut idx = match last_validated {
            Some(b) => schedule.iter().position(|&x| x > b).unwrap_or(schedule.len()),
            None => 0,
        };
        while idx < schedule.len() && !remaining.is_zero() {
            let k = schedule[idx];
            let (out, vc, took) = run_backend(backend, &ip, k, remaining, clock);
            report.phase_log.push(PhaseEntry {
                phase,
                bound: k,
                outcome: out.label().into(),
                budget_seconds: remaining.as_secs_f64(),
                seconds: took.as_secs_f64(),
            });
            remaining = remaining.saturating_sub(took);
            match out {
                BackendOutcome::Sat(model) => {
                    let vc = vc.expect("a model implies an encoding");
                    let max = last_validated.unwrap_or(0);
                    let verdict = match extract_trace(&vc.ssa, &model) {
                        Ok(t) => {
                            let w = build_witness(&ip, &t);
                            match validate_witness(p, &w) {
                                ValidationResult::Valid => Verdict::NonTerminating { bound: k, witness: Box::new(w) },
                                other => Verdict::Unknown {
                                    reason: "invalid-witness".into(),
                                    max_validated_bound: max,
                                    detail: Some(format!("{other:?}")),
                                },
                            }
                        }
                        Err(e) => Verdict::Unknown {
                            reason: "invalid-witness".into(),
                            max_validated_bound: max,
                            detail: Some(e.to_string()),
                        },
                    };
                    return finish(report, verdict);
                }
                BackendOutcome::Unsat => {
                    last_validated = Some(k);
                    report.max_validated_bound = k;
                    idx += 1;
                }
                BackendOutcome::Timeout | BackendOutcome::Error(_) => break,
            }
        }
        if idx >= schedule.len() {
            return finish(report, Verdict::BoundedNoRecurrence { max_validated_bound: last_validated.unwrap_or(0) });
        }
        leftover = remaining;
    }
    let max = last_validated.unwrap_or(0);
    finish(report, Verdict::unknown("budget-exhausted", max))
}

/// Which backends to run, in phase order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BackendChoice {
    pub sat: bool,
    pub smt: bool,
}

impl Default for BackendChoice {
    fn default() -> Self {
        BackendChoice { sat: true, smt: true }
    }
}

impl std::str::FromStr for BackendChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut c = BackendChoice { sat: false, smt: false };
        for part in s.split(',').map(str::trim) {
            match part {
                "sat" => c.sat = true,
                "smt" => c.smt = true,
                other => return Err(format!("unknown backend `{other}` (expected sat, smt or sat,smt)")),
            }
        }
        Ok(c)
    }
}

impl std::fmt::Display for BackendChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (self.sat, self.smt) {
            (true, true) => write!(f, "sat,smt"),
            (true, false) => write!(f, "sat"),
            (false, true) => write!(f, "smt"),
            (false, false) => write!(f, ""),
        }
    }
}

/// Everything needed to run a check with the real backends.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    pub check: CheckConfig,
    pub backends: BackendChoice,
    pub smt_cmd: Option<String>,
    pub seed: Option<u64>,
}

impl Settings {
    pub fn run(&self, src: &str) -> CheckReport {
        let mut sat = SatBackend { seed: self.seed.unwrap_or(DEFAULT_SEED) };
        let mut smt = self.smt_cmd.clone().map(|command| SmtBackend { command });
        let backends = Backends {
            sat: if self.backends.sat { Some(&mut sat as &mut dyn Backend) } else { None },
            smt: if self.backends.smt { smt.as_mut().map(|b| b as &mut dyn Backend) } else { None },
            smt_requested: self.backends.smt,
        };
        check_source(src, &self.check, backends, &SystemClock::new())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(src: &str, schedule: &[u32]) -> CheckReport {
        let mut sat = SatBackend::default();
        let cfg = CheckConfig { schedule: schedule.to_vec(), timeout: Duration::from_secs(60) };
        let backends = Backends { sat: Some(&mut sat), smt: None, smt_requested: false };
        check_source(src, &cfg, backends, &SystemClock::new())
    }

    #[test]
    fn loop_free_is_trivial() {
        assert_eq!(run("int main(){ return 0; }", &DEFAULT_SCHEDULE).verdict, Verdict::TriviallyTerminating);
    }

    #[test]
    fn empty_loop_at_first_bound() {
        let r = run("int main(){ while(1); return 0; }", &DEFAULT_SCHEDULE);
        match r.verdict {
            Verdict::NonTerminating { bound, witness } => {
                assert_eq!(bound, 2);
                assert_eq!((witness.j, witness.j_prime), (1, 2));
            }
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn parse_error_is_unsupported_input() {
        let r = run("int main( { return 0; }", &DEFAULT_SCHEDULE);
        assert!(matches!(r.verdict, Verdict::Unknown { ref reason, max_validated_bound: 0, .. } if reason == "unsupported-input"));
        assert_eq!(r.verdict.exit_code(), 2);
    }

    #[test]
    fn missing_smt_backend_is_reported() {
        let clock = FakeClock::default();
        let mut sat = MockBackend::new("sat", &clock, [(Scripted::Unsat, Duration::from_secs(1)), (Scripted::Error, Duration::ZERO)]);
        let cfg = CheckConfig::default();
        let backends = Backends { sat: Some(&mut sat), smt: None, smt_requested: true };
        let r = check_source("int main(){ while(1); return 0; }", &cfg, backends, &clock);
        assert_eq!(r.verdict, Verdict::Unknown { reason: "no-smt-backend".into(), max_validated_bound: 2, detail: None });
    }
}
