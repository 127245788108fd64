//! Bounded encoding of an instrumented program.
//!
//! The pipeline is unroll, symbolic execution, then either bit-blasting to
//! CNF or printing SMT-LIB.

pub mod bitblast;
pub mod smt2;
pub mod ssa;
pub mod term;
pub mod unroll;

use std::time::Instant;

use thiserror::Error;

use crate::instrument::InstrumentedProgram;

pub use ssa::{Event, Obligation, SsaProgram};
pub use term::{TermId, TermStore};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("encoding deadline reached")]
    Timeout,
    #[error("unrolled program too large ({0} statements)")]
    TooLarge(usize),
}

/// The verification condition at one bound: `goal` is satisfiable iff some
/// recurrent-state assertion can be violated within `bound` iterations.
#[derive(Debug, Clone)]
pub struct VcFormula {
    pub ssa: SsaProgram,
    pub goal: TermId,
}

impl VcFormula {
    pub fn store(&self) -> &TermStore {
        &self.ssa.store
    }
}

pub fn build_vc(mut ssa: SsaProgram) -> VcFormula {
    let s = &mut ssa.store;
    let mut goal = s.ff();
    for o in &ssa.obligations {
        let g = s.and(o.guard, o.violation);
        goal = s.or(goal, g);
    }
    VcFormula { ssa, goal }
}

/// Unroll `ip` at bound `k` and build its verification condition.
pub fn encode(ip: &InstrumentedProgram, k: u32, deadline: Option<Instant>) -> Result<VcFormula, EncodeError> {
    let u = unroll::unroll_until(ip, k, deadline)?;
    let ssa = ssa::to_ssa_until(&u, deadline)?;
    Ok(build_vc(ssa))
}
