//! Pluggable propositional backends.
//!
//! The encoder talks to a [`Backend`] in DIMACS-style literals: a variable is
//! a positive `i32`, its negation the negative value. Every backend supports
//! scoped clauses (`push`/`pop`), solving under assumptions with a deadline,
//! and reading back the model.

mod batsat_backend;
mod cadical_backend;
mod smtlib;

use std::time::Instant;

use thiserror::Error;

pub use batsat_backend::BatsatBackend;
pub use cadical_backend::CadicalBackend;
pub use smtlib::SmtLibBackend;

pub type Lit = i32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckResult {
    Sat,
    Unsat,
    /// Deadline hit or the backend gave up.
    Unknown,
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("unknown solver {0:?} (expected cadical, batsat or smtlib[:command])")]
    UnknownSolver(String),
    #[error("solver process: {0}")]
    Process(String),
    #[error("pop without matching push")]
    Unbalanced,
}

pub trait Backend: Send {
    fn new_var(&mut self) -> Lit;
    fn add_clause(&mut self, clause: &[Lit]);
    /// Opens a scope; clauses added until the matching `pop` are retracted.
    fn push(&mut self);
    fn pop(&mut self) -> Result<(), BackendError>;
    fn check(&mut self, assumptions: &[Lit], deadline: Option<Instant>) -> Result<CheckResult, BackendError>;
    /// Model value of `lit` after a `Sat` answer.
    fn value(&mut self, lit: Lit) -> bool;
    fn name(&self) -> &str;
}

/// Builds a backend from its command-line identifier: `cadical`, `batsat`,
/// or `smtlib[:command]` (default command `z3 -in`). The seed reaches the
/// backends that expose one; CaDiCaL runs with its fixed default.
pub fn make_backend(id: &str, seed: u64) -> Result<Box<dyn Backend>, BackendError> {
    match id {
        "cadical" => Ok(Box::new(CadicalBackend::new())),
        "batsat" => Ok(Box::new(BatsatBackend::with_seed(seed))),
        "smtlib" => Ok(Box::new(SmtLibBackend::spawn_seeded("z3 -in", seed)?)),
        _ => match id.strip_prefix("smtlib:") {
            Some(cmd) if !cmd.trim().is_empty() => Ok(Box::new(SmtLibBackend::spawn_seeded(cmd, seed)?)),
            _ => Err(BackendError::UnknownSolver(id.to_string())),
        },
    }
}

/// Checks that a backend id names a known backend without starting it.
pub fn validate_backend_id(id: &str) -> Result<(), BackendError> {
    match id {
        "cadical" | "batsat" | "smtlib" => Ok(()),
        _ if id.strip_prefix("smtlib:").is_some_and(|c| !c.trim().is_empty()) => Ok(()),
        _ => Err(BackendError::UnknownSolver(id.to_string())),
    }
}

/// Scope bookkeeping shared by the in-process SAT backends: each open scope
/// owns a selector variable, scoped clauses carry its negation, and `check`
/// assumes every live selector.
#[derive(Debug, Default)]
struct Scopes {
    selectors: Vec<Lit>,
}

impl Scopes {
    fn guard(&self, clause: &[Lit]) -> Vec<Lit> {
        let mut out = clause.to_vec();
        if let Some(&s) = self.selectors.last() {
            out.push(-s);
        }
        out
    }

    fn assumptions(&self, extra: &[Lit]) -> Vec<Lit> {
        self.selectors.iter().chain(extra).copied().collect()
    }
}
