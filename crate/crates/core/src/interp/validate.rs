//! Replay of a lasso witness against the uninstrumented program.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::frontend::Program;
use crate::instrument::loop_sites;
use crate::normalize::brace;
use crate::witness::Witness;

use super::{run_sequence, HeaderVisit, RunConfig, RunStatus};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "result", rename_all = "camelCase")]
pub enum ValidationResult {
    Valid,
    Mismatch { variable: String, visit: u32, expected: i128, found: i128 },
    Invalid { reason: String },
}

impl ValidationResult {
    pub fn is_valid(&self) -> bool {
        *self == ValidationResult::Valid
    }
}

fn compare(reference: &[(String, i128)], v: &HeaderVisit) -> Option<ValidationResult> {
    let found: BTreeMap<&str, i128> = v.state.iter().map(|s| (s.name.as_str(), s.value)).collect();
    for (name, want) in reference {
        let got = found.get(name.as_str()).copied();
        if got != Some(*want) {
            return Some(ValidationResult::Mismatch {
                variable: name.clone(),
                visit: v.visit,
                expected: *want,
                found: got.unwrap_or_default(),
            });
        }
    }
    None
}

/// Replay `w` on `brace(p)`: visit `j` must show the recorded state, visit
/// `j'` must repeat it, and one more pass of the cycle must repeat it again.
pub fn validate_witness(p: &Program, w: &Witness) -> ValidationResult {
    let braced = brace(p.clone());
    let Some(site) = loop_sites(&braced).into_iter().find(|s| s.index == w.loop_index) else {
        return ValidationResult::Invalid { reason: format!("no loop with index {}", w.loop_index) };
    };
    if w.j == 0 || w.j >= w.j_prime {
        return ValidationResult::Invalid { reason: format!("bad recurrence bounds j={} j'={}", w.j, w.j_prime) };
    }
    let cfg = RunConfig {
        watch: BTreeMap::from([(site.loop_id, site.state_vars.iter().map(|v| v.id).collect())]),
        record_visits: true,
        ..RunConfig::default()
    };
    let period = w.j_prime - w.j;
    let recorded: Vec<(String, i128)> = w.recurrent_state.iter().map(|s| (s.name.clone(), s.value)).collect();

    let mut inputs = w.stem.clone();
    for (round, target) in [w.j_prime, w.j_prime + period].into_iter().enumerate() {
        inputs.extend(w.cycle.iter().copied());
        let log = run_sequence(&braced, &inputs, &cfg);
        let visit = |n: u32| log.visit(site.loop_id, w.activation, n);
        let (Some(first), Some(again)) = (visit(w.j), visit(target)) else {
            let why = match log.status {
                RunStatus::NondetExhausted => "inputs exhausted before the recurrence visit".to_string(),
                s => format!("run ended ({s:?}) before visit {target}"),
            };
            return ValidationResult::Invalid { reason: why };
        };
        if round == 0 {
            if let Some(m) = compare(&recorded, first) {
                return m;
            }
        }
        let reference: Vec<(String, i128)> = first.state.iter().map(|s| (s.name.clone(), s.value)).collect();
        if let Some(m) = compare(&reference, again) {
            return m;
        }
    }
    ValidationResult::Valid
}
