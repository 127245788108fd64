//! Lasso witnesses: decoding a model into a trace, and rendering the
//! resulting stem and cycle as JSON or GraphML.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encode::ssa::{Event, SsaProgram};
use crate::frontend::{IntType, NodeId};
use crate::instrument::InstrumentedProgram;
use crate::interp::{NondetSequence, NondetValue};

pub const WITNESS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WitnessError {
    #[error("internal error: {0}")]
    Internal(String),
    #[error("malformed witness: {0}")]
    Json(String),
}

/// One loop-header visit of the violating loop as seen in the model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CopyState {
    pub copy: u32,
    pub values: Vec<(String, IntType, i128)>,
}

/// A user nondet choice made on the model's path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Choice {
    pub symbol: String,
    pub value: NondetValue,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub loop_index: usize,
    pub loop_id: NodeId,
    pub activation: u32,
    pub j: u32,
    pub j_prime: u32,
    /// Every user nondet choice along the path, in execution order.
    pub choices: Vec<Choice>,
    /// Header valuations of the violating loop activation, one per executed copy.
    pub states: Vec<CopyState>,
    pub stem: NondetSequence,
    pub cycle: NondetSequence,
}

impl Trace {
    pub fn state_at(&self, copy: u32) -> Option<&CopyState> {
        self.states.iter().find(|s| s.copy == copy)
    }
}

/// Decode `syms` (values by symbol id) into the recurrent trace it describes.
pub fn extract_trace(ssa: &SsaProgram, syms: &[Option<u64>]) -> Result<Trace, WitnessError> {
    let s = &ssa.store;
    let vals = s.eval_all(syms);
    let holds = |t: crate::encode::TermId| vals[t.0 as usize] & 1 == 1;
    let o = ssa
        .obligations
        .iter()
        .find(|o| holds(o.guard) && holds(o.violation))
        .ok_or_else(|| WitnessError::Internal("model violates no recurrent-state assertion".into()))?;

    let mut choices = Vec::new();
    let mut states = Vec::new();
    let mut header_pos: BTreeMap<u32, usize> = BTreeMap::new();
    let mut first_flag = None;
    let mut activation = 0;
    for ev in &ssa.events {
        match ev {
            Event::LoopEntry { loop_id, instance, guard, .. } if *loop_id == o.loop_id && holds(*guard) => {
                if *instance <= o.instance {
                    activation += 1;
                }
            }
            Event::Header { loop_index, instance, copy, guard, state, .. }
                if *loop_index == o.loop_index && *instance == o.instance && holds(*guard) =>
            {
                header_pos.insert(*copy, choices.len());
                let values = state.iter().map(|st| (st.name.clone(), st.ty, st.ty.to_i128(vals[st.term.0 as usize]))).collect();
                states.push(CopyState { copy: *copy, values });
            }
            Event::Nondet { sym, term, ty, guard, flag, .. } if holds(*guard) => match flag {
                None => choices.push(Choice {
                    symbol: s.sym_info(*sym).name.clone(),
                    value: NondetValue { ty: *ty, value: ty.to_i128(vals[term.0 as usize]) },
                }),
                Some(f) if f.loop_index == o.loop_index && f.instance == o.instance => {
                    if first_flag.is_none() && holds(*term) {
                        first_flag = Some(f.copy);
                    }
                }
                Some(_) => {}
            },
            _ => {}
        }
    }

    let j_prime = o.copy;
    let target = states
        .iter()
        .find(|c| c.copy == j_prime)
        .ok_or_else(|| WitnessError::Internal(format!("no header state for violating copy {j_prime}")))?;
    let same = |c: &CopyState| c.values.iter().map(|v| v.2).eq(target.values.iter().map(|v| v.2));
    let j = match first_flag.and_then(|j| states.iter().find(|c| c.copy == j)) {
        Some(c) if c.copy < j_prime && same(c) => c.copy,
        _ => states
            .iter()
            .find(|c| c.copy < j_prime && same(c))
            .map(|c| c.copy)
            .ok_or_else(|| WitnessError::Internal("violating copy repeats no earlier state".into()))?,
    };
    let (sj, sjp) = (header_pos[&j], header_pos[&j_prime]);
    let stem = choices[..sj].iter().map(|c| c.value).collect();
    let cycle = choices[sj..sjp].iter().map(|c| c.value).collect();
    Ok(Trace { loop_index: o.loop_index, loop_id: o.loop_id, activation, j, j_prime, choices, states, stem, cycle })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Witness {
    pub version: u32,
    pub loop_index: usize,
    pub loop_id: NodeId,
    pub function: String,
    pub line: u32,
    pub column: u32,
    /// Which entry into the loop statement the lasso lives in (1-based).
    pub activation: u32,
    pub j: u32,
    pub j_prime: u32,
    pub stem: NondetSequence,
    pub cycle: NondetSequence,
    /// Valuation of the loop's state variables at visits `j` and `jPrime`.
    pub recurrent_state: Vec<StateValue>,
    /// Valuations at visits `j .. jPrime`, one map per visit.
    pub cycle_states: Vec<BTreeMap<String, i128>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateValue {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: IntType,
    pub value: i128,
}

impl Witness {
    pub fn cycle_len(&self) -> u32 {
        self.j_prime - self.j
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("witness serializes")
    }

    pub fn from_json(text: &str) -> Result<Witness, WitnessError> {
        serde_json::from_str(text).map_err(|e| WitnessError::Json(e.to_string()))
    }
}

pub fn build_witness(ip: &InstrumentedProgram, t: &Trace) -> Witness {
    let site = ip.sites.iter().find(|s| s.loop_id == t.loop_id);
    let recurrent_state = t
        .state_at(t.j)
        .map(|c| c.values.iter().map(|(name, ty, value)| StateValue { name: name.clone(), ty: *ty, value: *value }).collect())
        .unwrap_or_default();
    let cycle_states = t
        .states
        .iter()
        .filter(|c| c.copy >= t.j && c.copy < t.j_prime)
        .map(|c| c.values.iter().map(|(n, _, v)| (n.clone(), *v)).collect())
        .collect();
    Witness {
        version: WITNESS_VERSION,
        loop_index: t.loop_index,
        loop_id: t.loop_id,
        function: site.map(|s| s.function.clone()).unwrap_or_default(),
        line: site.map(|s| s.loc.line).unwrap_or(0),
        column: site.map(|s| s.loc.col).unwrap_or(0),
        activation: t.activation,
        j: t.j,
        j_prime: t.j_prime,
        stem: t.stem.clone(),
        cycle: t.cycle.clone(),
        recurrent_state,
        cycle_states,
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Simplified violation-witness automaton: an entry node, one edge per stem
/// choice, a cycle head at the recurrence point and a cycle returning to it.
pub fn to_graphml(w: &Witness) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
    for (id, on, ty) in [
        ("entry", "node", "boolean"),
        ("cyclehead", "node", "boolean"),
        ("assumption", "edge", "string"),
        ("startline", "edge", "int"),
        ("function", "graph", "string"),
        ("state", "node", "string"),
    ] {
        let _ = writeln!(out, "  <key id=\"{id}\" for=\"{on}\" attr.name=\"{id}\" attr.type=\"{ty}\"/>");
    }
    out.push_str("  <graph edgedefault=\"directed\">\n");
    let _ = writeln!(out, "    <data key=\"function\">{}</data>", xml_escape(&w.function));
    out.push_str("    <node id=\"N0\">\n      <data key=\"entry\">true</data>\n    </node>\n");

    let edge = |out: &mut String, from: &str, to: &str, v: Option<&NondetValue>| {
        let _ = writeln!(out, "    <edge source=\"{from}\" target=\"{to}\">");
        if let Some(v) = v {
            let _ = writeln!(out, "      <data key=\"assumption\">\\result == {};</data>", v.value);
        }
        let _ = writeln!(out, "      <data key=\"startline\">{}</data>", w.line);
        out.push_str("    </edge>\n");
    };

    let mut prev = "N0".to_string();
    for (i, v) in w.stem.iter().enumerate() {
        let node = format!("S{}", i + 1);
        let _ = writeln!(out, "    <node id=\"{node}\"/>");
        edge(&mut out, &prev, &node, Some(v));
        prev = node;
    }
    let state: Vec<String> = w.recurrent_state.iter().map(|s| format!("{} == {}", s.name, s.value)).collect();
    let _ = writeln!(
        out,
        "    <node id=\"H\">\n      <data key=\"cyclehead\">true</data>\n      <data key=\"state\">{}</data>\n    </node>",
        xml_escape(&state.join(" && "))
    );
    edge(&mut out, &prev, "H", None);

    if w.cycle.is_empty() {
        edge(&mut out, "H", "H", None);
    } else {
        let mut prev = "H".to_string();
        for (i, v) in w.cycle.iter().enumerate() {
            let node = if i + 1 == w.cycle.len() { "H".to_string() } else { format!("C{}", i + 1) };
            if node != "H" {
                let _ = writeln!(out, "    <node id=\"{node}\"/>");
            }
            edge(&mut out, &prev, &node, Some(v));
            prev = node;
        }
    }
    out.push_str("  </graph>\n</graphml>\n");
    out
}
