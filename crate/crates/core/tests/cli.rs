use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use looprecur::frontend::parse;
use looprecur::interp::validate_witness;
use looprecur::normalize::{brace, unparse};
use looprecur::witness::Witness;
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_looprecur"));
    c.env_remove("LOOPRECUR_SMT_CMD");
    c
}

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn corpus(name: &str) -> PathBuf {
    root().join("corpus").join(name)
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(root().join("tests/golden").join(name)).unwrap()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn check_listing_writes_valid_witness() {
    let dir = tempfile::tempdir().unwrap();
    let wj = dir.path().join("w.json");
    let wg = dir.path().join("w.graphml");
    let src = corpus("listing_reset.c");
    let out = run(&["check", p(&src), "--witness", p(&wj), "--witness-graphml", p(&wg)]);
    assert_eq!(out.status.code(), Some(10));
    let v = json(&out);
    assert_eq!(v["verdict"], "NonTerminating");
    assert_eq!(v["bound"], 4);
    assert_eq!(v["witnessPath"], p(&wj));
    for key in ["maxValidatedBound", "reason", "elapsedSeconds", "phaseLog"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }

    let text = std::fs::read_to_string(&wj).unwrap();
    assert_eq!(text, golden("listing_reset.witness.json"));
    let w = Witness::from_json(&text).unwrap();
    let program = parse(&std::fs::read_to_string(&src).unwrap()).unwrap();
    assert!(validate_witness(&program, &w).is_valid());
    let g = std::fs::read_to_string(&wg).unwrap();
    assert!(g.contains("<data key=\"cyclehead\">true</data>"));
}

#[test]
fn check_loop_free_is_trivial() {
    let out = run(&["check", p(&corpus("loop_free.c"))]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["verdict"], "TriviallyTerminating");
}

#[test]
fn single_small_bound_validates() {
    let out = run(&["check", p(&corpus("u8_wrap.c")), "--unwinds", "2"]);
    let v = json(&out);
    assert_eq!(v["verdict"], "BoundedNoRecurrence");
    assert_eq!(v["maxValidatedBound"], 2);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn input_errors_exit_one() {
    let missing = run(&["check", "/nonexistent/prog.c"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("prog.c"));

    for bad in [["--unwinds", "3,2"], ["--unwinds", "0"], ["--timeout", "-1"], ["--backend", "cvc"]] {
        let out = run(&["check", p(&corpus("counter.c")), bad[0], bad[1]]);
        assert_eq!(out.status.code(), Some(1), "{bad:?}");
    }
}

#[test]
fn unsupported_input_is_unknown() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("ptr.c");
    std::fs::write(&f, "int main(void) { int x = 0; int *q = &x; return *q; }").unwrap();
    let out = run(&["check", p(&f)]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_eq!(v["verdict"], "Unknown");
    assert_eq!(v["reason"], "unsupported-input");
}

#[test]
fn smt_backend_without_command() {
    let out = run(&["check", p(&corpus("empty_loop.c")), "--backend", "smt"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["reason"], "no-smt-backend");
}

fn have_z3() -> bool {
    Command::new("z3").arg("-version").output().is_ok()
}

#[test]
fn smt_command_from_environment() {
    if !have_z3() {
        return;
    }
    let out = bin()
        .args(["check", p(&corpus("toggle.c")), "--backend", "smt"])
        .env("LOOPRECUR_SMT_CMD", "z3 -in -smt2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(10));
    let v = json(&out);
    assert_eq!(v["bound"], 3);
    assert_eq!(v["phaseLog"][0]["phase"], "SMT");
}

#[test]
fn config_file_supplies_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("looprecur.toml");
    std::fs::write(&cfg, "unwinds = [2, 3]\ntimeout = 30\nbackend = \"sat\"\n").unwrap();
    let out = run(&["check", p(&corpus("counter.c")), "--config", p(&cfg)]);
    let v = json(&out);
    assert_eq!(v["maxValidatedBound"], 3);
    assert_eq!(v["phaseLog"].as_array().unwrap().len(), 2);

    // the command line wins over the file
    let out = run(&["check", p(&corpus("counter.c")), "--config", p(&cfg), "--unwinds", "4"]);
    assert_eq!(json(&out)["maxValidatedBound"], 4);

    std::fs::write(&cfg, "unwindz = [2]\n").unwrap();
    assert_eq!(run(&["check", p(&corpus("counter.c")), "--config", p(&cfg)]).status.code(), Some(1));
}

#[test]
fn instrument_matches_golden() {
    let out = run(&["instrument", p(&corpus("listing_reset.c"))]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), golden("listing_reset.instrumented.c"));

    let dir = tempfile::tempdir().unwrap();
    let dest = dir.path().join("out.c");
    let two = root().join("tests/data/two_loops.c");
    assert!(run(&["instrument", p(&two), "-o", p(&dest)]).status.success());
    assert_eq!(std::fs::read_to_string(&dest).unwrap(), golden("two_loops.instrumented.c"));
}

#[test]
fn instrument_loop_free_is_braced_input() {
    let path = corpus("loop_free.c");
    let out = run(&["instrument", p(&path)]);
    let braced = unparse(&brace(parse(&std::fs::read_to_string(&path).unwrap()).unwrap()));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), braced);
}

#[test]
fn strip_markers_drops_printf_lines() {
    let out = run(&["instrument", p(&corpus("listing_reset.c")), "--strip-markers"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(!text.contains("RSI loop"));
    assert!(text.contains("pStored0"));
}

#[test]
fn encode_then_sat_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cnf = dir.path().join("vc.cnf");
    let src = corpus("toggle.c");
    assert!(run(&["encode", p(&src), "-k", "3", "--format", "dimacs", "-o", p(&cnf)]).status.success());
    let out = run(&["sat", p(&cnf)]);
    assert_eq!(out.status.code(), Some(10));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("s SATISFIABLE\n") && text.ends_with("v 0\n"), "{text}");

    assert!(run(&["encode", p(&src), "-k", "2", "--format", "dimacs", "-o", p(&cnf)]).status.success());
    let out = run(&["sat", p(&cnf), "--budget", "10"]);
    assert_eq!(out.status.code(), Some(20));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "s UNSATISFIABLE\n");

    let smt = run(&["encode", p(&src), "-k", "3"]);
    let text = String::from_utf8(smt.stdout).unwrap();
    assert!(text.contains("(set-logic QF_BV)") && text.contains("(check-sat)"));
    assert_eq!(run(&["encode", p(&src)]).status.code(), Some(1));
}

#[test]
fn run_replays_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = dir.path().join("in.json");
    std::fs::write(&inputs, r#"[{"type": "unsigned char", "value": 3}]"#).unwrap();
    let out = run(&["run", p(&corpus("countdown.c")), "--inputs", p(&inputs)]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["result"]["status"], "returned");
    assert_eq!(v["visits"].as_array().unwrap().len(), 3);

    let out = run(&["run", p(&corpus("empty_loop.c")), "--steps", "100"]);
    assert_eq!(json(&out)["result"]["status"], "step-limit");
}

#[test]
fn bench_empty_dir_is_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["bench", p(dir.path())]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), golden("bench_header.csv"));
}

#[test]
fn bench_corpus_matches_manifest() {
    let out = run(&["bench", p(&root().join("corpus")), "--jobs", "4"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(out.status.success(), "{text}\n{}", String::from_utf8_lossy(&out.stderr));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], golden("bench_header.csv").trim_end());
    assert_eq!(lines.len(), 14 + 2);
    assert!(lines.last().unwrap().starts_with("summary,solved 14/14"));
}

#[test]
fn bench_reports_flipped_expectation() {
    let dir = tempfile::tempdir().unwrap();
    for f in ["empty_loop.c", "loop_free.c"] {
        std::fs::copy(corpus(f), dir.path().join(f)).unwrap();
    }
    std::fs::write(
        dir.path().join("manifest.toml"),
        "[expected]\n\"empty_loop.c\" = \"BoundedNoRecurrence\"\n\"loop_free.c\" = \"TriviallyTerminating\"\n",
    )
    .unwrap();
    for extra in [&[][..], &["--isolate"][..]] {
        let mut args = vec!["bench", p(dir.path())];
        args.extend_from_slice(extra);
        let out = run(&args);
        assert_ne!(out.status.code(), Some(0));
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains("empty_loop.c") && !err.contains("loop_free.c"), "{err}");
    }
}
