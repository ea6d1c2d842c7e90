//! Constraint-based scheduling of a (sub)circuit onto one region.
//!
//! The default strategy peels the circuit greedily: each window of a few
//! stages fires as many pending gates as the solver allows (found by a
//! descending search on a cardinality bound), the window is committed, and
//! the next window starts from its last stage.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::circuit::{Gate, SubCircuit};
use crate::encoder::{Encoder, OrderingSpec, StageZero, WindowModel, WindowSpec};
use crate::hardware::Region;
use crate::schedule::{QubitRecord, QubitState, Schedule, Stage};
use crate::solver::{make_backend, validate_backend_id, BackendError, CheckResult};

/// Extra stages a window may grow by when it cannot fire anything.
const MAX_GROWTH: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Windowed peeling, maximizing gates per window.
    Greedy,
    /// Smallest horizon firing every gate at once, grown one stage at a time.
    Deepening,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Seconds for the whole compile call.
    pub timeout: f64,
    /// Stages per greedy window.
    pub window: usize,
    /// Backend identifier, see [`crate::solver::make_backend`].
    pub backend: String,
    pub strategy: Strategy,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { timeout: 600.0, window: 1, backend: "cadical".into(), strategy: Strategy::Greedy, seed: 0 }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), String> {
        if self.timeout.is_nan() || self.timeout <= 0.0 {
            return Err(format!("timeout must be positive, got {}", self.timeout));
        }
        if self.window == 0 {
            return Err("window must be at least 1".into());
        }
        validate_backend_id(&self.backend).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompileResult {
    pub schedule: Schedule,
    /// Seconds.
    pub wall_time: f64,
    pub solver_calls: usize,
    /// Horizon of every window (or fixed-horizon attempt) solved, in order.
    pub stage_budget_history: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CompileStats {
    pub wall_time: f64,
    pub solver_calls: usize,
    pub stages_committed: usize,
    pub gates_fired: usize,
    pub gates_total: usize,
}

#[derive(Debug, Error)]
pub enum CompileError {
    #[error(
        "solver timed out after {:.2} s ({} calls, {} of {} gates placed)",
        .0.wall_time, .0.solver_calls, .0.gates_fired, .0.gates_total
    )]
    Timeout(CompileStats),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("invalid options: {0}")]
    Options(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("internal inconsistency: {0}")]
    Inconsistent(String),
}

/// Everything [`compile_request`] needs besides solver options.
#[derive(Debug, Clone)]
pub struct CompileRequest<'a> {
    pub sub: &'a SubCircuit,
    pub region: &'a Region,
    /// Stage-0 placement of every qubit, or `None` for a solver-chosen one.
    pub init: Option<BTreeMap<usize, QubitState>>,
    /// Sites no qubit may occupy while in an SLM trap.
    pub blocklist: BTreeSet<(usize, usize)>,
    /// Qubits that must sit in SLM traps at the final stage.
    pub final_stage_slm: BTreeSet<usize>,
    /// Reference `(column, row)` per qubit; the AOD indices each qubit gets
    /// when first loaded must order pairwise like these.
    pub ordering: BTreeMap<usize, (usize, usize)>,
}

impl<'a> CompileRequest<'a> {
    pub fn new(sub: &'a SubCircuit, region: &'a Region) -> Self {
        Self {
            sub,
            region,
            init: None,
            blocklist: BTreeSet::new(),
            final_stage_slm: BTreeSet::new(),
            ordering: BTreeMap::new(),
        }
    }
}

pub fn compile(
    sub: &SubCircuit,
    region: &Region,
    init: Option<&BTreeMap<usize, QubitState>>,
    blocklist: &BTreeSet<(usize, usize)>,
    final_stage_slm: &BTreeSet<usize>,
    opts: &SolverOptions,
) -> Result<CompileResult, CompileError> {
    let req = CompileRequest {
        init: init.cloned(),
        blocklist: blocklist.clone(),
        final_stage_slm: final_stage_slm.clone(),
        ..CompileRequest::new(sub, region)
    };
    compile_request(&req, opts)
}

pub fn compile_request(req: &CompileRequest, opts: &SolverOptions) -> Result<CompileResult, CompileError> {
    opts.validate().map_err(CompileError::Options)?;
    let mut s = Session::new(req, opts)?;
    match opts.strategy {
        Strategy::Greedy => s.greedy()?,
        Strategy::Deepening => s.deepening()?,
    }
    let schedule = extract_schedule(&s.windows)?;
    Ok(CompileResult {
        schedule,
        wall_time: s.start.elapsed().as_secs_f64(),
        solver_calls: s.calls,
        stage_budget_history: s.history,
    })
}

/// Solves a single window with every pending gate required to fire within
/// exactly `horizon` stages after stage 0. `Ok(None)` means infeasible.
pub fn solve_fixed_horizon(
    req: &CompileRequest,
    horizon: usize,
    opts: &SolverOptions,
) -> Result<Option<Schedule>, CompileError> {
    opts.validate().map_err(CompileError::Options)?;
    let mut s = Session::new(req, opts)?;
    if s.attempt(horizon, true)? {
        Ok(Some(extract_schedule(&s.windows)?))
    } else {
        Ok(None)
    }
}

/// Stitches committed windows. Every window after the first starts with a
/// copy of the previous window's last stage, which is dropped.
pub fn extract_schedule(windows: &[Vec<Stage>]) -> Result<Schedule, CompileError> {
    let mut stages: Vec<Stage> = Vec::new();
    for (w, window) in windows.iter().enumerate() {
        match (stages.last(), window.first()) {
            (None, _) => stages.extend(window.iter().cloned()),
            (Some(_), None) => return Err(CompileError::Inconsistent(format!("window {w} is empty"))),
            (Some(prev), Some(first)) => {
                if prev.qubits != first.qubits {
                    return Err(CompileError::Inconsistent(format!("window {w} does not start where window {} ends", w - 1)));
                }
                stages.extend(window[1..].iter().cloned());
            }
        }
    }
    Ok(Schedule { stages })
}

pub struct WindowSolution {
    /// New stages, preceded by nothing: the caller owns stage 0.
    pub stages: Vec<Stage>,
    /// The last stage satisfies the final-stage SLM requirement.
    pub final_slm_met: bool,
}

/// Encodes and solves one window. With pending gates it maximizes how many
/// fire by descending search on the cardinality bound; if that fires all of
/// them, it also tries to satisfy `final_slm` (qubit indices) at the last
/// stage. Without pending gates it only asks for `final_slm`. `Ok(None)`
/// means nothing could be fired (or, with no gates, `final_slm` failed).
pub fn solve_window(
    spec: &WindowSpec,
    final_slm: &[usize],
    opts: &SolverOptions,
    deadline: Instant,
    calls: &mut usize,
) -> Result<Option<WindowSolution>, CompileError> {
    let mut backend = make_backend(&opts.backend, opts.seed)?;
    let mut enc = Encoder::new(backend.as_mut());
    let model = WindowModel::build(&mut enc, spec);
    let fin = model.final_slm(final_slm);
    let mut check = |enc: &mut Encoder, assume: &[i32]| -> Result<bool, CompileError> {
        *calls += 1;
        match enc.backend().check(assume, Some(deadline))? {
            CheckResult::Sat => Ok(true),
            CheckResult::Unsat => Ok(false),
            CheckResult::Unknown => Err(CompileError::Timeout(CompileStats::default())),
        }
    };

    if spec.pending.is_empty() || spec.require_all {
        if !check(&mut enc, &fin)? {
            return Ok(None);
        }
        return Ok(Some(WindowSolution { stages: read_stages(&model, &mut enc, spec), final_slm_met: true }));
    }

    let mut found = false;
    for k in (1..=model.count.len()).rev() {
        if check(&mut enc, &[model.count[k - 1]])? {
            found = true;
            break;
        }
    }
    if !found {
        return Ok(None);
    }
    let mut stages = read_stages(&model, &mut enc, spec);
    let fired: usize = stages.iter().map(|s| s.fired.len()).sum();
    let mut final_slm_met = false;
    if fired == spec.pending.len() {
        if fin.is_empty() {
            final_slm_met = true;
        } else {
            let mut assume = vec![model.count[spec.pending.len() - 1]];
            assume.extend(&fin);
            if check(&mut enc, &assume)? {
                stages = read_stages(&model, &mut enc, spec);
                final_slm_met = true;
            }
        }
    }
    Ok(Some(WindowSolution { stages, final_slm_met }))
}

fn read_stages(model: &WindowModel, enc: &mut Encoder, spec: &WindowSpec) -> Vec<Stage> {
    model
        .extract(enc)
        .into_iter()
        .map(|(states, fired)| {
            let records = spec.qubits.iter().zip(states).map(|(&id, state)| QubitRecord { id, state }).collect();
            Stage::new(records, fired.into_iter().map(|g| spec.pending[g].0))
        })
        .collect()
}

struct Session<'r, 'a> {
    req: &'r CompileRequest<'a>,
    opts: &'r SolverOptions,
    start: Instant,
    deadline: Instant,
    calls: usize,
    history: Vec<usize>,
    /// Committed windows; see [`extract_schedule`].
    windows: Vec<Vec<Stage>>,
    pending: Vec<(usize, Gate)>,
    /// Indices into `req.sub.qubits` that must end in SLM.
    final_idx: Vec<usize>,
    /// The first committed window started from the caller's placement and
    /// has not been followed by another yet.
    seeded: bool,
    ordering: Option<OrderingSpec>,
}

impl<'r, 'a> Session<'r, 'a> {
    fn new(req: &'r CompileRequest<'a>, opts: &'r SolverOptions) -> Result<Self, CompileError> {
        let start = Instant::now();
        let qubits = &req.sub.qubits;
        if qubits.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CompileError::Inconsistent("qubit list must be sorted and distinct".into()));
        }
        if qubits.len() > req.region.num_sites() {
            return Err(CompileError::Infeasible(format!(
                "{} qubits do not fit {} sites", qubits.len(), req.region.num_sites()
            )));
        }
        let known: BTreeSet<usize> = qubits.iter().copied().collect();
        if req.sub.gates.iter().any(|(_, g)| !known.contains(&g.0) || !known.contains(&g.1)) {
            return Err(CompileError::Inconsistent("gate endpoint outside the qubit list".into()));
        }
        let final_idx = qubits
            .iter()
            .enumerate()
            .filter(|(_, q)| req.final_stage_slm.contains(q))
            .map(|(i, _)| i)
            .collect();
        let mut windows = Vec::new();
        if let Some(init) = &req.init {
            windows.push(vec![seed_stage(req, init)?]);
        }
        let ordering = (!req.ordering.is_empty())
            .then(|| OrderingSpec { refs: req.ordering.clone(), loaded: BTreeMap::new() });
        Ok(Self {
            req,
            opts,
            start,
            deadline: start + Duration::from_secs_f64(opts.timeout),
            calls: 0,
            history: Vec::new(),
            seeded: !windows.is_empty(),
            windows,
            pending: req.sub.gates.clone(),
            final_idx,
            ordering,
        })
    }

    fn last_stage(&self) -> Option<&Stage> {
        self.windows.last().and_then(|w| w.last())
    }

    fn final_ok(&self, st: &Stage) -> bool {
        self.final_idx.iter().all(|&i| st.qubits[i].state.a == 0)
    }

    fn finished(&self) -> bool {
        self.pending.is_empty() && self.last_stage().is_some_and(|s| self.final_ok(s))
    }

    fn stats(&self) -> CompileStats {
        let total = self.req.sub.gates.len();
        CompileStats {
            wall_time: self.start.elapsed().as_secs_f64(),
            solver_calls: self.calls,
            stages_committed: self.windows.iter().map(|w| w.len()).sum(),
            gates_fired: total - self.pending.len(),
            gates_total: total,
        }
    }

    fn greedy(&mut self) -> Result<(), CompileError> {
        while !self.finished() {
            let mut horizon = if self.windows.is_empty() {
                0
            } else if self.pending.is_empty() {
                1
            } else {
                self.opts.window
            };
            let limit = horizon + MAX_GROWTH;
            while !self.attempt(horizon, false)? {
                horizon += 1;
                if horizon > limit {
                    return Err(CompileError::Infeasible(format!(
                        "no progress within {limit} stages ({} gates left)", self.pending.len()
                    )));
                }
            }
        }
        Ok(())
    }

    fn deepening(&mut self) -> Result<(), CompileError> {
        if self.finished() {
            return Ok(());
        }
        let per_stage = (self.req.sub.qubits.len() / 2).max(1);
        let needed = self.pending.len().div_ceil(per_stage);
        let mut horizon = if self.windows.is_empty() { needed.saturating_sub(1) } else { needed.max(1) };
        let limit = horizon + self.pending.len() + MAX_GROWTH;
        while !self.attempt(horizon, true)? {
            horizon += 1;
            if horizon > limit {
                return Err(CompileError::Infeasible(format!("no schedule within {limit} stages")));
            }
        }
        Ok(())
    }

    /// Solves one window of `horizon` stages and commits it on success.
    fn attempt(&mut self, horizon: usize, require_all: bool) -> Result<bool, CompileError> {
        if Instant::now() >= self.deadline {
            return Err(CompileError::Timeout(self.stats()));
        }
        self.history.push(horizon);
        let stage0_states: Option<Vec<QubitState>> =
            self.last_stage().map(|s| s.qubits.iter().map(|r| r.state).collect());
        let stage0 = match &stage0_states {
            None => StageZero::Free,
            Some(states) if self.seeded => StageZero::Seeded(states),
            Some(states) => StageZero::Inherited(states),
        };
        let spec = WindowSpec {
            qubits: &self.req.sub.qubits,
            region: self.req.region,
            pending: &self.pending,
            stage0,
            horizon,
            blocklist: &self.req.blocklist,
            ordering: self.ordering.as_ref(),
            require_all,
        };
        let mut calls = 0;
        let outcome = solve_window(&spec, &self.final_idx, self.opts, self.deadline, &mut calls);
        self.calls += calls;
        let sol = match outcome {
            Err(CompileError::Timeout(_)) => return Err(CompileError::Timeout(self.stats())),
            Err(e) => return Err(e),
            Ok(None) => return Ok(false),
            Ok(Some(sol)) => sol,
        };
        log::debug!(
            "window of {horizon} stages fired {} gates ({} left before)",
            sol.stages.iter().map(|s| s.fired.len()).sum::<usize>(),
            self.pending.len()
        );
        self.commit(sol);
        Ok(true)
    }

    fn commit(&mut self, sol: WindowSolution) {
        let mut window: Vec<Stage> = self.last_stage().into_iter().cloned().collect();
        let keep = window.len() + 1;
        window.extend(sol.stages);
        while window.len() > keep && !window.last().unwrap().fires() {
            if sol.final_slm_met && !self.final_ok(&window[window.len() - 2]) {
                break;
            }
            window.pop();
        }
        let fired: BTreeSet<usize> = window.iter().skip(keep - 1).flat_map(|s| s.fired.iter().copied()).collect();
        self.pending.retain(|(g, _)| !fired.contains(g));
        if let Some(ord) = &mut self.ordering {
            for &q in ord.refs.keys() {
                if ord.loaded.contains_key(&q) {
                    continue;
                }
                let held = window.iter().skip(keep - 1).find_map(|s| s.state(q).filter(|st| st.in_aod()));
                if let Some(st) = held {
                    ord.loaded.insert(q, (st.c.unwrap(), st.r.unwrap()));
                }
            }
        }
        if !self.windows.is_empty() && self.seeded && self.windows.len() == 1 && self.windows[0].len() == 1 {
            // The seeded stage becomes the head of this window.
            self.windows.clear();
        }
        self.seeded = false;
        self.windows.push(window);
    }
}

/// Turns a caller-supplied placement into stage 0 after basic sanity checks.
fn seed_stage(req: &CompileRequest, init: &BTreeMap<usize, QubitState>) -> Result<Stage, CompileError> {
    let qubits = &req.sub.qubits;
    if init.len() != qubits.len() || qubits.iter().any(|q| !init.contains_key(q)) {
        return Err(CompileError::Infeasible("initial placement must cover exactly the managed qubits".into()));
    }
    let mut sites: BTreeMap<(usize, usize), Vec<u8>> = BTreeMap::new();
    for (&q, s) in init {
        let coherent = (s.a == 0 && s.c.is_none() && s.r.is_none()) || (s.a == 1 && s.c.is_some() && s.r.is_some());
        if !coherent || !req.region.contains_site(s.x, s.y) {
            return Err(CompileError::Infeasible(format!("initial state of qubit {q} is outside the region or malformed")));
        }
        sites.entry(s.site()).or_default().push(s.a);
    }
    if let Some((site, _)) = sites.iter().find(|(_, kinds)| kinds.len() > 2 || (kinds.len() == 2 && kinds[0] == kinds[1])) {
        return Err(CompileError::Infeasible(format!("initial placement overfills site {site:?}")));
    }
    let records = init.iter().map(|(&id, &state)| QubitRecord { id, state }).collect();
    Ok(Stage::new(records, []))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{generate_rand3reg, Circuit};
    use crate::hardware::ArraySpec;
    use crate::schedule::depth;
    use crate::verifier::verify_subcircuit;

    fn quick() -> SolverOptions {
        SolverOptions { timeout: 60.0, ..SolverOptions::default() }
    }

    #[test]
    fn single_gate_takes_one_stage() {
        let c = Circuit::new(2, [(0, 1)], "").unwrap();
        let sub = SubCircuit::whole(&c);
        let reg = ArraySpec::new(4).unwrap().full();
        let r = compile(&sub, &reg, None, &BTreeSet::new(), &BTreeSet::new(), &quick()).unwrap();
        assert_eq!(r.schedule.stages.len(), 1);
        assert_eq!(depth(&r.schedule), 1);
        assert_eq!(r.stage_budget_history, vec![0]);
    }

    #[test]
    fn empty_circuit_keeps_init() {
        let c = Circuit::new(2, [], "").unwrap();
        let sub = SubCircuit::whole(&c);
        let reg = ArraySpec::new(4).unwrap().full();
        let init: BTreeMap<usize, QubitState> = [(0, QubitState::slm(0, 0)), (1, QubitState::slm(3, 2))].into();
        let r = compile(&sub, &reg, Some(&init), &BTreeSet::new(), &BTreeSet::new(), &quick()).unwrap();
        assert_eq!(r.schedule.stages.len(), 1);
        assert_eq!(depth(&r.schedule), 0);
        assert_eq!(r.schedule.stages[0].state(1), Some(&QubitState::slm(3, 2)));
    }

    #[test]
    fn k4_needs_three_layers() {
        let c = generate_rand3reg(4, 0).unwrap();
        let sub = SubCircuit::whole(&c);
        let a = ArraySpec::new(4).unwrap();
        let reg = a.full();
        let r = compile(&sub, &reg, None, &BTreeSet::new(), &BTreeSet::new(), &quick()).unwrap();
        assert!(depth(&r.schedule) >= 3);
        let report = verify_subcircuit(&r.schedule, &sub, &a, &reg);
        assert!(report.ok, "{:?}", report.violations);
    }

    #[test]
    fn final_slm_is_honoured() {
        let c = Circuit::new(3, [(0, 1), (1, 2)], "").unwrap();
        let sub = SubCircuit::whole(&c);
        let a = ArraySpec::new(4).unwrap();
        let reg = a.full();
        let all: BTreeSet<usize> = [0, 1, 2].into();
        let r = compile(&sub, &reg, None, &BTreeSet::new(), &all, &quick()).unwrap();
        assert!(r.schedule.last().unwrap().qubits.iter().all(|q| q.state.a == 0));
        assert!(verify_subcircuit(&r.schedule, &sub, &a, &reg).ok);
    }

    #[test]
    fn blocklist_keeps_slm_off_sites() {
        let c = Circuit::new(2, [(0, 1)], "").unwrap();
        let sub = SubCircuit::whole(&c);
        let a = ArraySpec::new(4).unwrap();
        let reg = a.full();
        let blocked: BTreeSet<(usize, usize)> = (0..4).flat_map(|x| [(x, 0), (x, 1)]).collect();
        let all: BTreeSet<usize> = [0, 1].into();
        let r = compile(&sub, &reg, None, &blocked, &all, &quick()).unwrap();
        for st in &r.schedule.stages {
            for q in &st.qubits {
                assert!(q.state.a == 1 || !blocked.contains(&q.state.site()));
            }
        }
    }

    #[test]
    fn too_many_qubits_is_infeasible() {
        let c = Circuit::new(5, [(0, 1)], "").unwrap();
        let sub = SubCircuit::whole(&c);
        let reg = Region { x_range: 0..2, y_range: 0..2, col_range: 0..2, row_range: 0..2 };
        let err = compile(&sub, &reg, None, &BTreeSet::new(), &BTreeSet::new(), &quick()).unwrap_err();
        assert!(matches!(err, CompileError::Infeasible(_)));
    }

    #[test]
    fn stitches_windows() {
        let s = |x: usize, fired: &[usize]| Stage::new(vec![QubitRecord { id: 0, state: QubitState::slm(x, 0) }], fired.to_vec());
        let w1 = vec![s(0, &[0]), s(0, &[1])];
        let w2 = vec![s(0, &[]), s(0, &[2]), s(0, &[3]), s(0, &[4])];
        let sched = extract_schedule(&[w1.clone(), w2]).unwrap();
        assert_eq!(depth(&sched), 5);
        assert_eq!(extract_schedule(std::slice::from_ref(&w1)).unwrap().stages.len(), 2);
        let bad = vec![s(1, &[]), s(1, &[2])];
        assert!(matches!(extract_schedule(&[w1, bad]), Err(CompileError::Inconsistent(_))));
    }

    #[test]
    fn k4_window_fires_at_most_two() {
        let c = generate_rand3reg(4, 0).unwrap();
        let reg = ArraySpec::new(4).unwrap().full();
        let pending: Vec<(usize, Gate)> = c.gates().iter().copied().enumerate().collect();
        let none = BTreeSet::new();
        let spec = WindowSpec {
            qubits: &[0, 1, 2, 3],
            region: &reg,
            pending: &pending,
            stage0: StageZero::Free,
            horizon: 0,
            blocklist: &none,
            ordering: None,
            require_all: false,
        };
        let mut calls = 0;
        let deadline = Instant::now() + Duration::from_secs(30);
        let sol = solve_window(&spec, &[], &quick(), deadline, &mut calls).unwrap().unwrap();
        assert_eq!(sol.stages[0].fired.len(), 2);
    }

    #[test]
    fn deepening_never_needs_more_stages_than_greedy() {
        let c = generate_rand3reg(4, 0).unwrap();
        let sub = SubCircuit::whole(&c);
        let a = ArraySpec::new(4).unwrap();
        let reg = a.full();
        let greedy = compile(&sub, &reg, None, &BTreeSet::new(), &BTreeSet::new(), &quick()).unwrap();
        let opts = SolverOptions { strategy: Strategy::Deepening, ..quick() };
        let r = compile(&sub, &reg, None, &BTreeSet::new(), &BTreeSet::new(), &opts).unwrap();
        assert!(verify_subcircuit(&r.schedule, &sub, &a, &reg).ok);
        assert!(depth(&r.schedule) >= 3);
        assert!(r.schedule.stages.len() <= greedy.schedule.stages.len());
    }

    #[test]
    fn rejects_bad_options() {
        let c = Circuit::new(2, [], "").unwrap();
        let sub = SubCircuit::whole(&c);
        let reg = ArraySpec::new(4).unwrap().full();
        let opts = SolverOptions { window: 0, ..quick() };
        let err = compile(&sub, &reg, None, &BTreeSet::new(), &BTreeSet::new(), &opts).unwrap_err();
        assert!(matches!(err, CompileError::Options(_)));
    }
}
