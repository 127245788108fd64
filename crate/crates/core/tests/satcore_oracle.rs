//! The CDCL solver against exhaustive enumeration.

use std::time::Duration;

use looprecur::satcore::{check_model, parse_dimacs, solve, SolveOutcome};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn brute_force(num_vars: u32, clauses: &[Vec<i32>]) -> bool {
    (0u32..1 << num_vars).any(|m| {
        clauses.iter().all(|c| c.iter().any(|&l| ((m >> (l.unsigned_abs() - 1)) & 1 == 1) == (l > 0)))
    })
}

fn random_3cnf(rng: &mut ChaCha8Rng, num_vars: u32, num_clauses: usize) -> Vec<Vec<i32>> {
    (0..num_clauses)
        .map(|_| {
            (0..3)
                .map(|_| {
                    let v = rng.gen_range(1..=num_vars) as i32;
                    if rng.gen() {
                        v
                    } else {
                        -v
                    }
                })
                .collect()
        })
        .collect()
}

fn agrees(num_vars: u32, clauses: &[Vec<i32>]) -> Result<(), String> {
    let want = brute_force(num_vars, clauses);
    match solve(num_vars, clauses, Duration::from_secs(30)).map_err(|e| e.to_string())? {
        SolveOutcome::Sat(model) => {
            if !want {
                return Err("solver says SAT, enumeration says UNSAT".into());
            }
            if !check_model(clauses, &model) {
                return Err("returned model violates a clause".into());
            }
        }
        SolveOutcome::Unsat if want => return Err("solver says UNSAT, enumeration finds a model".into()),
        SolveOutcome::Unsat => {}
        SolveOutcome::Timeout(_) => return Err("timeout".into()),
    }
    Ok(())
}

#[test]
fn twenty_variable_instances_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let cls = random_3cnf(&mut rng, 20, 86);
        agrees(20, &cls).unwrap();
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn sat_models_satisfy_all_clauses(
        clauses in prop::collection::vec(
            prop::collection::vec((1i32..=12, any::<bool>()).prop_map(|(v, s)| if s { v } else { -v }), 1..5),
            0..60,
        )
    ) {
        agrees(12, &clauses).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn dimacs_round_trip(
        clauses in prop::collection::vec(
            prop::collection::vec((1i32..=9, any::<bool>()).prop_map(|(v, s)| if s { v } else { -v }), 1..6),
            0..30,
        )
    ) {
        let cnf = looprecur::encode::bitblast::Cnf { num_vars: 9, clauses: clauses.clone(), bitmap: vec![] };
        let text = looprecur::encode::bitblast::emit_dimacs(&cnf);
        let parsed = parse_dimacs(&text).unwrap();
        prop_assert_eq!(parsed.num_vars, 9);
        prop_assert_eq!(parsed.clauses, clauses);
    }
}
