//! End-to-end acceptance checks. Each test prints a single PASS or FAIL line
//! (written straight to stderr so it shows even when output is captured).

use std::collections::{BTreeMap, HashMap};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use looprecur::bench::read_manifest;
use looprecur::driver::{
    check_source, Backends, CheckConfig, Clock, FakeClock, MockBackend, Phase, SatBackend, Scripted, Settings, SystemClock,
    Verdict, DEFAULT_SCHEDULE,
};
use looprecur::encode::bitblast::{bitblast, emit_dimacs, lanes, Blaster};
use looprecur::encode::encode;
use looprecur::encode::ssa::binop_term;
use looprecur::encode::term::TermStore;
use looprecur::frontend::{parse, BinOp, IntType, NodeId, Program};
use looprecur::instrument::{instrument, loop_sites};
use looprecur::interp::{
    ops, run, run_sequence, validate_witness, NondetValue, RunConfig, RunStatus, SequenceSource,
};
use looprecur::normalize::{brace, unparse};
use looprecur::satcore::{check_model, solve, SolveOutcome};
use looprecur::witness::Witness;
mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: u32, what: &str, ok: bool, detail: &str) {
    let line = format!("{} criterion {n:>2} {what}: {detail}\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(ok, "criterion {n} ({what}) failed: {detail}");
}

fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

fn corpus() -> Vec<(String, String)> {
    looprecur::bench::sources(&corpus_dir())
        .unwrap()
        .into_iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read_to_string(&p).unwrap()))
        .collect()
}

fn corpus_file(name: &str) -> String {
    std::fs::read_to_string(corpus_dir().join(name)).unwrap()
}

fn sat_only(src: &str) -> (looprecur::driver::CheckReport, Duration) {
    let cfg = CheckConfig { schedule: DEFAULT_SCHEDULE.to_vec(), timeout: Duration::from_secs(420) };
    let mut sat = SatBackend::default();
    let start = Instant::now();
    let r = check_source(src, &cfg, Backends { sat: Some(&mut sat), smt: None, smt_requested: false }, &SystemClock::new());
    (r, start.elapsed())
}

#[test]
fn c01_listing_reset_cycle() {
    let (r, took) = sat_only(&corpus_file("listing_reset.c"));
    let (bound, w) = match &r.verdict {
        Verdict::NonTerminating { bound, witness } => (*bound, witness.as_ref().clone()),
        v => return report(1, "listing reset cycle", false, &format!("verdict {v:?}")),
    };
    let cycle_i: Vec<i128> = w.cycle_states.iter().filter_map(|s| s.get("i").copied()).collect();
    let ok = bound == 10 && w.cycle_len() == 4 && cycle_i == [0, 1, 2, -1] && took < Duration::from_secs(10);
    report(
        1,
        "listing reset cycle",
        ok,
        &format!(
            "want NonTerminating(10), cycle length 4, i = [0, 1, 2, -1], < 10 s; got NonTerminating({bound}), \
             cycle length {}, i = {cycle_i:?}, {:.2} s",
            w.cycle_len(),
            took.as_secs_f64()
        ),
    );
}

#[test]
fn c02_empty_loop() {
    let (r, took) = sat_only("int main(void) { while (1); return 0; }");
    let got = match &r.verdict {
        Verdict::NonTerminating { bound, .. } => Some(*bound),
        _ => None,
    };
    let ok = got == Some(DEFAULT_SCHEDULE[0]) && took < Duration::from_secs(1);
    report(2, "while(1)", ok, &format!("{} at {got:?} in {:.3} s", r.verdict.name(), took.as_secs_f64()));
}

#[test]
fn c03_bounded_guarantee() {
    let (r, took) = sat_only("int main(void) { int i; for (i = 0; i < 10; i++); return 0; }");
    let every_bound: Vec<u32> = r.phase_log.iter().filter(|e| e.outcome == "UNSAT").map(|e| e.bound).collect();
    let ok = matches!(r.verdict, Verdict::BoundedNoRecurrence { max_validated_bound: 1000 })
        && every_bound == DEFAULT_SCHEDULE
        && took < Duration::from_secs(60);
    report(
        3,
        "bounded guarantee",
        ok,
        &format!("{:?}, validated {every_bound:?}, {:.3} s", r.verdict, took.as_secs_f64()),
    );
}

/// First header visit whose state repeats an earlier one, found by plain
/// interpretation of the deterministic program.
fn first_repeat(src: &str) -> Option<(u32, u32)> {
    let p = brace(parse(src).unwrap());
    let site = loop_sites(&p).into_iter().next()?;
    let cfg = RunConfig {
        step_limit: 200_000,
        watch: BTreeMap::from([(site.loop_id, site.state_vars.iter().map(|v| v.id).collect())]),
        ..RunConfig::default()
    };
    let log = run_sequence(&p, &[], &cfg);
    let mut seen = HashMap::new();
    for v in log.visits_of(site.loop_id, 1) {
        if let Some(&j) = seen.get(&v.values()) {
            return Some((j, v.visit));
        }
        seen.insert(v.values(), v.visit);
    }
    None
}

#[test]
fn c04_u8_wraparound() {
    let src = corpus_file("u8_wrap.c");
    let oracle = first_repeat(&src);
    let (r, took) = sat_only(&src);
    let (bound, len) = match &r.verdict {
        Verdict::NonTerminating { bound, witness } => (Some(*bound), witness.cycle_len()),
        _ => (None, 0),
    };
    let ok = bound == Some(1000) && len == 256 && oracle.map(|(j, jp)| jp - j) == Some(256);
    report(
        4,
        "u8 wraparound",
        ok,
        &format!("{} at {bound:?}, cycle {len}, interpreter repeat {oracle:?}, {:.2} s", r.verdict.name(), took.as_secs_f64()),
    );
}

#[test]
fn c05_corpus_witnesses_replay() {
    let files = corpus();
    let manifest = read_manifest(&corpus_dir().join("manifest.toml")).unwrap();
    let settings = Settings::default();
    let results: Vec<(String, Verdict)> = std::thread::scope(|s| {
        let handles: Vec<_> =
            files.iter().map(|(name, src)| s.spawn(|| (name.clone(), settings.run(src).verdict))).collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut nt = 0;
    let mut problems = Vec::new();
    for ((name, src), (_, verdict)) in files.iter().zip(&results) {
        if !manifest.expected.contains_key(name) {
            problems.push(format!("{name}: not in manifest"));
        }
        if let Some(w) = verdict.witness() {
            nt += 1;
            let p = parse(src).unwrap();
            let v = validate_witness(&p, w);
            if !v.is_valid() {
                problems.push(format!("{name}: {v:?}"));
            }
            // a lasso with the cycle replayed twice must still close
            let mut inputs = w.stem.clone();
            for _ in 0..3 {
                inputs.extend(w.cycle.iter().copied());
            }
            let braced = brace(p);
            let site = loop_sites(&braced).into_iter().find(|s| s.index == w.loop_index).unwrap();
            let cfg = RunConfig {
                watch: BTreeMap::from([(site.loop_id, site.state_vars.iter().map(|v| v.id).collect())]),
                ..RunConfig::default()
            };
            let log = run_sequence(&braced, &inputs, &cfg);
            let at = |n| log.visit(site.loop_id, w.activation, n).map(|v| v.values());
            let period = w.cycle_len();
            if at(w.j).is_none() || at(w.j) != at(w.j + 2 * period) {
                problems.push(format!("{name}: second cycle replay does not close"));
            }
        }
    }
    let kinds = ["constant", "reset", "wrap", "nested", "nondet"];
    let covered = kinds.iter().all(|k| files.iter().any(|(n, _)| n.contains(k)));
    let ok = files.len() >= 12 && nt > 0 && covered && problems.is_empty();
    report(
        5,
        "corpus witnesses replay",
        ok,
        &format!("{} programs, {nt} NonTerminating witnesses, problems {problems:?}", files.len()),
    );
}

/// Does some nondet sequence over 0..4 reach two equal header states of one
/// loop activation within its first `k` visits?
fn exhaustive_recurrence(p: &Program, k: u32) -> bool {
    let sites = loop_sites(p);
    let cfg = RunConfig {
        step_limit: 5_000,
        watch: sites.iter().map(|s| (s.loop_id, s.state_vars.iter().map(|v| v.id).collect())).collect(),
        ..RunConfig::default()
    };
    let mut stack: Vec<Vec<NondetValue>> = vec![vec![]];
    while let Some(seq) = stack.pop() {
        let log = run_sequence(p, &seq, &cfg);
        let mut seen: HashMap<(NodeId, u32), Vec<Vec<i128>>> = HashMap::new();
        let mut cut = false;
        for v in &log.visits {
            if v.visit > k {
                // the unwinding assumption makes everything from here infeasible
                cut = true;
                break;
            }
            let states = seen.entry((v.loop_id, v.activation)).or_default();
            if states.contains(&v.values()) {
                return true;
            }
            states.push(v.values());
        }
        if !cut && log.status == RunStatus::NondetExhausted {
            for d in 0..4 {
                let mut next = seq.clone();
                next.push(NondetValue::new(IntType::U8, d));
                stack.push(next);
            }
        }
    }
    false
}

fn vc_satisfiable(p: &Program, k: u32) -> bool {
    let vc = encode(&instrument(p.clone()), k, None).unwrap();
    let cnf = bitblast(&vc);
    match solve(cnf.num_vars, &cnf.clauses, Duration::from_secs(60)).unwrap() {
        SolveOutcome::Sat(m) => {
            assert!(check_model(&cnf.clauses, &m));
            true
        }
        SolveOutcome::Unsat => false,
        SolveOutcome::Timeout(_) => panic!("timeout at k={k}"),
    }
}

#[test]
fn c06_small_scope_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut disagreements = Vec::new();
    let (mut programs, mut sat_cases, mut checks) = (0, 0, 0);
    while programs < 60 {
        let src = common::small_program(&mut rng);
        let p = brace(parse(&src).unwrap());
        programs += 1;
        for k in 1..=6 {
            let want = exhaustive_recurrence(&p, k);
            let got = vc_satisfiable(&p, k);
            checks += 1;
            sat_cases += got as usize;
            if want != got {
                disagreements.push(format!("k={k} interp={want} vc={got}\n{src}"));
            }
        }
    }
    let ok = disagreements.is_empty() && sat_cases > 0 && sat_cases < checks;
    report(
        6,
        "small-scope equivalence",
        ok,
        &format!(
            "{programs} programs, {checks} (program, k) pairs, {sat_cases} satisfiable, {} disagreements{}",
            disagreements.len(),
            disagreements.first().map(|d| format!("; first: {d}")).unwrap_or_default()
        ),
    );
}

fn brute_force(num_vars: u32, clauses: &[Vec<i32>]) -> bool {
    (0u32..1 << num_vars)
        .any(|m| clauses.iter().all(|c| c.iter().any(|&l| ((m >> (l.unsigned_abs() - 1)) & 1 == 1) == (l > 0))))
}

#[test]
fn c07_solver_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut sat, mut bad) = (0, Vec::new());
    let total = 500;
    for i in 0..total {
        let n: u32 = rng.gen_range(3..=16);
        let m = (n as f64 * rng.gen_range(3.0..5.5)) as usize;
        let width = rng.gen_range(2..=4);
        let clauses: Vec<Vec<i32>> = (0..m)
            .map(|_| {
                (0..width)
                    .map(|_| {
                        let v = rng.gen_range(1..=n) as i32;
                        if rng.gen() {
                            v
                        } else {
                            -v
                        }
                    })
                    .collect()
            })
            .collect();
        let want = brute_force(n, &clauses);
        sat += want as usize;
        match solve(n, &clauses, Duration::from_secs(30)).unwrap() {
            SolveOutcome::Sat(model) if want && check_model(&clauses, &model) => {}
            SolveOutcome::Unsat if !want => {}
            other => bad.push(format!("instance {i}: enumeration {want}, solver {other:?}")),
        }
    }
    report(
        7,
        "solver vs enumeration",
        bad.is_empty(),
        &format!("{total} CNFs, {sat} satisfiable, {} mismatches {:?}", bad.len(), bad.first()),
    );
}

/// Compare interpreter, constant folding and circuit simulation on all
/// 65536 operand pairs of one operator.
fn lock_operator(op: BinOp, ty: IntType) -> Option<String> {
    let mut s = TermStore::new();
    let (_, x) = s.sym("x", 8, ty.signed);
    let (_, y) = s.sym("y", 8, ty.signed);
    let (v, defined) = binop_term(&mut s, op, ty, x, y);
    let mut b = Blaster::new();
    let bx = b.term(&s, x);
    let by = b.term(&s, y);
    let bv = b.term(&s, v);
    let bdef = b.term(&s, defined)[0];

    for batch in 0..1024u64 {
        let mut inputs = HashMap::new();
        for lane in 0..64u64 {
            let pair = batch * 64 + lane;
            for i in 0..8 {
                *inputs.entry(bx[i] as u32).or_insert(0) |= ((pair & 0xff) >> i & 1) << lane;
                *inputs.entry(by[i] as u32).or_insert(0) |= ((pair >> 8) >> i & 1) << lane;
            }
        }
        let sim = b.simulate(&inputs);
        let sim_def = lanes(&sim, bdef);
        let bits: Vec<u64> = bv.iter().map(|&l| lanes(&sim, l)).collect();
        for lane in 0..64u64 {
            let pair = batch * 64 + lane;
            let (l, r) = (pair & 0xff, pair >> 8);
            let want = ops::binop(op, ty, l, r);

            let mut cs = TermStore::new();
            let cl = cs.constant(8, l);
            let cr = cs.constant(8, r);
            let (fv, fdef) = binop_term(&mut cs, op, ty, cl, cr);
            let folded_def = cs.as_const(fdef) == Some(1);
            let folded = cs.as_const(fv);
            let circuit_def = sim_def >> lane & 1 == 1;
            let circuit = bits.iter().enumerate().fold(0u64, |acc, (i, w)| acc | (w >> lane & 1) << i);

            let agree = match want {
                None => !folded_def && !circuit_def,
                Some(w) => folded_def && circuit_def && folded == Some(w) && circuit == w,
            };
            if !agree {
                return Some(format!(
                    "{op:?} {ty:?} {l} {r}: interp {want:?}, folded {folded:?}/{folded_def}, circuit {circuit}/{circuit_def}"
                ));
            }
        }
    }
    None
}

#[test]
fn c08_semantics_lock() {
    let mut failures = Vec::new();
    let mut combos = 0;
    for op in BinOp::ALL {
        for ty in [IntType::I8, IntType::U8] {
            combos += 1;
            failures.extend(lock_operator(op, ty));
        }
    }
    report(
        8,
        "semantics lock",
        failures.is_empty(),
        &format!("{combos} operator/signedness pairs x 65536 operands, failures {failures:?}"),
    );
}

#[test]
fn c09_budget_protocol() {
    let t = Duration::from_secs(100);
    let half = t / 2;
    let cfg = CheckConfig { schedule: DEFAULT_SCHEDULE.to_vec(), timeout: t };
    let listing = corpus_file("listing_reset.c");
    let mut notes = Vec::new();
    let mut ok = true;
    let s = Duration::from_secs;

    // SAT fails part way, the SMT phase inherits the leftover and finds the lasso
    {
        let clock = FakeClock::default();
        let mut sat = MockBackend::new("sat", &clock, [(Scripted::Unsat, s(10)), (Scripted::Unsat, s(10)), (Scripted::Error, s(5))]);
        let mut smt = MockBackend::new("smt", &clock, [(Scripted::Solve, s(3)), (Scripted::Unsat, s(1))]);
        let r = check_source(&listing, &cfg, Backends { sat: Some(&mut sat), smt: Some(&mut smt), smt_requested: true }, &clock);
        let sat_spent: Duration = [s(10), s(10), s(5)].iter().sum();
        let budgets: Vec<Duration> = sat.calls.iter().map(|c| c.1).collect();
        let case = sat_spent <= half
            && budgets == [half, half - s(10), half - s(20)]
            && smt.calls.len() == 1
            && smt.calls[0] == (4, half + (half - sat_spent))
            && matches!(r.verdict, Verdict::NonTerminating { bound: 4, .. })
            && r.last_phase == Some(Phase::Smt);
        notes.push(format!("switch on error: sat {:?} smt {:?} -> {}", sat.calls, smt.calls, r.verdict.name()));
        ok &= case;
    }

    // SAT times out after validating 2..10; SMT resumes at 12 with exactly T/2
    {
        let clock = FakeClock::default();
        let script = [
            (Scripted::Unsat, s(5)),
            (Scripted::Unsat, s(5)),
            (Scripted::Unsat, s(5)),
            (Scripted::Unsat, s(5)),
            (Scripted::Timeout, s(30)),
        ];
        let mut sat = MockBackend::new("sat", &clock, script);
        let mut smt = MockBackend::new("smt", &clock, std::iter::repeat_n((Scripted::Unsat, s(1)), 10));
        let r = check_source(&listing, &cfg, Backends { sat: Some(&mut sat), smt: Some(&mut smt), smt_requested: true }, &clock);
        let smt_bounds: Vec<u32> = smt.calls.iter().map(|c| c.0).collect();
        let case = smt.calls.first().map(|c| c.1) == Some(half)
            && smt_bounds == [12, 20, 40, 100, 1000]
            && matches!(r.verdict, Verdict::BoundedNoRecurrence { max_validated_bound: 1000 })
            && r.elapsed <= t
            && clock.now() <= t;
        notes.push(format!("resume: smt bounds {smt_bounds:?}, first budget {:?}", smt.calls.first().map(|c| c.1)));
        ok &= case;
    }

    // stop on the first satisfiable answer: nothing is called afterwards
    {
        let clock = FakeClock::default();
        let mut sat = MockBackend::new("sat", &clock, [(Scripted::Unsat, s(1)), (Scripted::Unsat, s(1)), (Scripted::Solve, s(1))]);
        let extra = sat.script.len();
        sat.script.extend(std::iter::repeat_n((Scripted::Unsat, s(1)), 10));
        let mut smt = MockBackend::new("smt", &clock, []);
        let r = check_source(&listing, &cfg, Backends { sat: Some(&mut sat), smt: Some(&mut smt), smt_requested: true }, &clock);
        let case = sat.calls.len() == extra
            && smt.calls.is_empty()
            && sat.script.len() == 10
            && matches!(r.verdict, Verdict::NonTerminating { bound: 4, .. });
        notes.push(format!("stop on SAT: {} sat calls, {} smt calls", sat.calls.len(), smt.calls.len()));
        ok &= case;
    }

    report(9, "budget protocol", ok, &notes.join("; "));
}

/// Logs from the instrumented program with every gadget flag pinned false,
/// projected onto user variables.
fn projected_visits(log: &looprecur::interp::ExecutionLog, hide: &std::collections::HashSet<looprecur::frontend::VarId>) -> Vec<(NodeId, u32, u32, Vec<(String, i128)>)> {
    log.visits
        .iter()
        .map(|v| {
            let state = v.state.iter().filter(|s| !hide.contains(&s.var)).map(|s| (s.name.clone(), s.value)).collect();
            (v.loop_id, v.activation, v.visit, state)
        })
        .collect()
}

#[test]
fn c10_transparency() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut runs = 0;
    let mut problems = Vec::new();
    for (name, src) in corpus() {
        let braced = brace(parse(&src).unwrap());
        let ip = instrument(parse(&src).unwrap());
        let hide = ip.gadget_vars();
        for _ in 0..20 {
            let len = rng.gen_range(0..12);
            let seq: Vec<NondetValue> = (0..len)
                .map(|_| {
                    let v = if rng.gen_bool(0.7) { rng.gen_range(-4..8) } else { rng.gen::<i32>() as i128 };
                    NondetValue::new(IntType::I32, v)
                })
                .collect();
            let cfg = RunConfig { step_limit: 20_000, ..RunConfig::default() };
            let plain = run_sequence(&braced, &seq, &cfg);
            let mut src = SequenceSource::new(seq.clone());
            src.forced_false = ip.flag_sites();
            let inst = run(&ip.program, &mut src, &cfg);
            runs += 1;

            let a = projected_visits(&plain, &hide);
            let b = projected_visits(&inst, &hide);
            let same = match (&plain.status, &inst.status) {
                // the gadget costs steps, so a step-limited run may see fewer visits
                (RunStatus::StepLimit, RunStatus::StepLimit) => {
                    let n = a.len().min(b.len());
                    n > 0 && a[..n] == b[..n]
                }
                (x, y) => x == y && a == b && plain.nondets_consumed == src.pos,
            };
            if !same {
                problems.push(format!("{name} on {seq:?}: {:?} vs {:?}", plain.status, inst.status));
            }
        }
    }
    report(
        10,
        "transparency",
        problems.is_empty(),
        &format!("{runs} runs, mismatches {:?}", problems.first()),
    );
}

fn z3_dimacs(cnf_text: &str) -> Option<String> {
    let dir = tempfile::tempdir().ok()?;
    let path = dir.path().join("vc.cnf");
    std::fs::write(&path, cnf_text).ok()?;
    let out = std::process::Command::new("z3").arg("-dimacs").arg(&path).output().ok()?;
    let text = String::from_utf8(out.stdout).ok()?;
    let first = text.lines().next()?.trim();
    // z3 answers in the DIMACS convention, `s SATISFIABLE`
    Some(
        match first.trim_start_matches("s ") {
            "SATISFIABLE" | "sat" => "sat",
            "UNSATISFIABLE" | "unsat" => "unsat",
            other => other,
        }
        .to_string(),
    )
}

#[test]
fn c11_round_trips() {
    let mut notes = Vec::new();
    let mut ok = true;

    let mut stable = 0;
    for (name, src) in corpus() {
        let p = parse(&src).unwrap();
        let q = parse(&unparse(&p)).unwrap();
        if p == q {
            stable += 1;
        } else {
            ok = false;
            notes.push(format!("{name} changes under parse/unparse"));
        }
    }
    notes.push(format!("{stable} programs stable under parse/unparse"));

    let (r, _) = sat_only(&corpus_file("nondet_step.c"));
    match r.verdict.witness() {
        Some(w) => {
            let back = Witness::from_json(&w.to_json());
            ok &= back.as_ref() == Ok(w);
            notes.push("witness JSON round-trips".into());
        }
        None => {
            ok = false;
            notes.push("no witness to round-trip".into());
        }
    }

    let have_z3 = std::process::Command::new("z3").arg("-version").output().is_ok();
    if have_z3 {
        let mut agree = 0;
        for (name, src) in corpus() {
            let ip = instrument(parse(&src).unwrap());
            if ip.sites.is_empty() {
                continue;
            }
            for k in [2, 4] {
                let cnf = bitblast(&encode(&ip, k, None).unwrap());
                let ours = match solve(cnf.num_vars, &cnf.clauses, Duration::from_secs(60)).unwrap() {
                    SolveOutcome::Sat(_) => "sat",
                    SolveOutcome::Unsat => "unsat",
                    SolveOutcome::Timeout(_) => "unknown",
                };
                let theirs = z3_dimacs(&emit_dimacs(&cnf)).unwrap_or_default();
                if theirs == ours {
                    agree += 1;
                } else {
                    ok = false;
                    notes.push(format!("{name} k={k}: ours {ours}, z3 {theirs}"));
                }
            }
        }
        notes.push(format!("{agree} DIMACS files answered identically by z3"));
    } else {
        notes.push("no external DIMACS solver, DIMACS check skipped".into());
    }
    report(11, "round trips", ok, &notes.join("; "));
}
