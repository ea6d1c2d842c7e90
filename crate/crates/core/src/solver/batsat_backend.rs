use std::time::Instant;

use batsat::{lbool, Callbacks, SolverInterface, SolverOpts, Var};

use super::{Backend, BackendError, CheckResult, Lit, Scopes};

#[derive(Default)]
struct Deadline(Option<Instant>);

impl Callbacks for Deadline {
    fn stop(&self) -> bool {
        self.0.is_some_and(|d| Instant::now() >= d)
    }
}

pub struct BatsatBackend {
    solver: batsat::Solver<Deadline>,
    vars: Vec<Var>,
    scopes: Scopes,
}

impl BatsatBackend {
    pub fn new() -> Self {
        Self::with_seed(0)
    }

    pub fn with_seed(seed: u64) -> Self {
        let opts = SolverOpts { random_seed: 1.0 + (seed % 1_000_003) as f64, ..SolverOpts::default() };
        Self {
            solver: batsat::Solver::new(opts, Deadline::default()),
            vars: Vec::new(),
            scopes: Scopes::default(),
        }
    }

    fn lit(&self, l: Lit) -> batsat::Lit {
        batsat::Lit::new(self.vars[l.unsigned_abs() as usize - 1], l > 0)
    }
}

impl Default for BatsatBackend {
    fn default() -> Self {
        Self::new()
    }
}

impl Backend for BatsatBackend {
    fn new_var(&mut self) -> Lit {
        self.vars.push(self.solver.new_var_default());
        self.vars.len() as Lit
    }

    fn add_clause(&mut self, clause: &[Lit]) {
        let mut lits: Vec<batsat::Lit> = self.scopes.guard(clause).into_iter().map(|l| self.lit(l)).collect();
        self.solver.add_clause_reuse(&mut lits);
    }

    fn push(&mut self) {
        let s = self.new_var();
        self.scopes.selectors.push(s);
    }

    fn pop(&mut self) -> Result<(), BackendError> {
        let s = self.scopes.selectors.pop().ok_or(BackendError::Unbalanced)?;
        let mut unit = vec![self.lit(-s)];
        self.solver.add_clause_reuse(&mut unit);
        Ok(())
    }

    fn check(&mut self, assumptions: &[Lit], deadline: Option<Instant>) -> Result<CheckResult, BackendError> {
        self.solver.cb_mut().0 = deadline;
        let assumps: Vec<batsat::Lit> = self.scopes.assumptions(assumptions).into_iter().map(|l| self.lit(l)).collect();
        let r = self.solver.solve_limited(&assumps);
        Ok(if r == lbool::TRUE {
            CheckResult::Sat
        } else if r == lbool::FALSE {
            CheckResult::Unsat
        } else {
            CheckResult::Unknown
        })
    }

    fn value(&mut self, lit: Lit) -> bool {
        let l = self.lit(lit);
        SolverInterface::value_lit(&self.solver, l) == lbool::TRUE
    }

    fn name(&self) -> &str {
        "batsat"
    }
}
