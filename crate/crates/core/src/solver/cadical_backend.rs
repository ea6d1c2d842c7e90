use std::time::Instant;

use super::{Backend, BackendError, CheckResult, Lit, Scopes};

struct Deadline(Option<Instant>);

impl cadical::Callbacks for Deadline {
    fn terminate(&mut self) -> bool {
        self.0.is_some_and(|d| Instant::now() >= d)
    }
}

pub struct CadicalBackend {
    solver: cadical::Solver<Deadline>,
    vars: i32,
    scopes: Scopes,
}

impl CadicalBackend {
    pub fn new() -> Self {
        Self { solver: cadical::Solver::new(), vars: 0, scopes: Scopes::default() }
    }
}

impl Default for CadicalBackend {
    fn default() -> Self {
        Self::new()
    }
}

impl Backend for CadicalBackend {
    fn new_var(&mut self) -> Lit {
        self.vars += 1;
        self.vars
    }

    fn add_clause(&mut self, clause: &[Lit]) {
        self.solver.add_clause(self.scopes.guard(clause));
    }

    fn push(&mut self) {
        let s = self.new_var();
        self.scopes.selectors.push(s);
    }

    fn pop(&mut self) -> Result<(), BackendError> {
        let s = self.scopes.selectors.pop().ok_or(BackendError::Unbalanced)?;
        self.solver.add_clause([-s]);
        Ok(())
    }

    fn check(&mut self, assumptions: &[Lit], deadline: Option<Instant>) -> Result<CheckResult, BackendError> {
        self.solver.set_callbacks(Some(Deadline(deadline)));
        let answer = self.solver.solve_with(self.scopes.assumptions(assumptions));
        Ok(match answer {
            Some(true) => CheckResult::Sat,
            Some(false) => CheckResult::Unsat,
            None => CheckResult::Unknown,
        })
    }

    fn value(&mut self, lit: Lit) -> bool {
        self.solver.value(lit).unwrap_or(false)
    }

    fn name(&self) -> &str {
        "cadical"
    }
}
