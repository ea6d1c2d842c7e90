//! Partition-and-compile: divide the circuit, schedule both halves in their
//! own regions at the same time, then schedule the cross gates on the whole
//! array starting from where the local phases left the atoms.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::time::Instant;

use thiserror::Error;

use crate::circuit::Circuit;
use crate::compiler::{compile_request, CompileError, CompileRequest, CompileResult, SolverOptions};
use crate::division::{divide, split_circuit, DivisionOptions, Partition};
use crate::hardware::{split_plane, ArraySpec, HardwareError};
use crate::schedule::{PhaseInfo, QubitRecord, QubitState, Schedule, Stage};

#[derive(Debug, Clone, PartialEq)]
pub struct PacOptions {
    pub division: DivisionOptions,
    /// Used by every phase. The timeout covers the whole pipeline.
    pub solver: SolverOptions,
    /// Run the two local phases on separate threads.
    pub parallel_local: bool,
}

impl PacOptions {
    pub fn for_circuit(c: &Circuit, seed: u64) -> Self {
        Self {
            division: DivisionOptions::for_circuit(c, seed),
            solver: SolverOptions { seed, ..SolverOptions::default() },
            parallel_local: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Local1,
    Local2,
    Global,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Local1 => "local phase 1",
            Phase::Local2 => "local phase 2",
            Phase::Global => "global phase",
        })
    }
}

#[derive(Debug, Error)]
pub enum PacError {
    #[error("{phase}: {source}")]
    Phase {
        phase: Phase,
        #[source]
        source: CompileError,
    },
    #[error(transparent)]
    Hardware(#[from] HardwareError),
    #[error("invalid options: {0}")]
    Options(String),
    #[error("{phase} has {qubits} qubits but its region only {sites} sites")]
    RegionFull { phase: Phase, qubits: usize, sites: usize },
    #[error("local results disagree: {0}")]
    Consistency(String),
    #[error("cannot merge phases: {0}")]
    Merge(String),
}

impl PacError {
    /// Whether some phase ran out of time.
    pub fn is_timeout(&self) -> bool {
        matches!(self, PacError::Phase { source: CompileError::Timeout(_), .. })
    }
}

#[derive(Debug, Clone)]
pub struct PhaseResults {
    pub partition: Partition,
    pub r1: CompileResult,
    pub r2: CompileResult,
    pub r3: CompileResult,
}

#[derive(Debug, Clone)]
pub struct PacOutcome {
    pub schedule: Schedule,
    pub phase_info: PhaseInfo,
    pub phases: PhaseResults,
    /// Seconds spent dividing.
    pub division_time: f64,
    /// Seconds for the whole pipeline as actually run.
    pub wall_time: f64,
}

impl PacOutcome {
    /// Division plus the slower local phase plus the global phase, as if the
    /// local phases had run side by side.
    pub fn modeled_time(&self) -> f64 {
        self.division_time + self.phases.r1.wall_time.max(self.phases.r2.wall_time) + self.phases.r3.wall_time
    }
}

/// Qubits of one side that must end its local phase in SLM traps: all of
/// them, since every one is either parked for good or picked up again by
/// the global phase.
pub fn build_local_constraints(p: &Partition, phase: Phase) -> BTreeSet<usize> {
    match phase {
        Phase::Local1 => p.q1.clone(),
        Phase::Local2 => p.q2.clone(),
        Phase::Global => BTreeSet::new(),
    }
}

/// Inputs of the global phase derived from the local results.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GlobalConstraints {
    /// Stage-0 placement of every active qubit.
    pub init: BTreeMap<usize, QubitState>,
    /// Final sites of resolved qubits.
    pub blocklist: BTreeSet<(usize, usize)>,
    /// Last AOD `(column, row)` each active qubit held locally.
    pub ordering: BTreeMap<usize, (usize, usize)>,
}

pub fn build_global_constraints(p: &Partition, s1: &Schedule, s2: &Schedule) -> Result<GlobalConstraints, PacError> {
    let mut out = GlobalConstraints::default();
    let mut taken: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (side, s, qubits) in [(Phase::Local1, s1, &p.q1), (Phase::Local2, s2, &p.q2)] {
        let last = s.last().ok_or_else(|| PacError::Consistency(format!("{side} produced no stages")))?;
        for &q in qubits {
            let st = *last
                .state(q)
                .ok_or_else(|| PacError::Consistency(format!("{side} lost qubit {q}")))?;
            if st.in_aod() {
                return Err(PacError::Consistency(format!("qubit {q} ends {side} in an AOD trap")));
            }
            if let Some(other) = taken.insert(st.site(), q) {
                return Err(PacError::Consistency(format!("qubits {other} and {q} both end on site {:?}", st.site())));
            }
            if p.qr1.contains(&q) || p.qr2.contains(&q) {
                out.blocklist.insert(st.site());
            } else {
                out.init.insert(q, st);
                let held = s.stages.iter().rev().find_map(|stage| stage.state(q).filter(|x| x.in_aod()).copied());
                if let Some(QubitState { c: Some(c), r: Some(r), .. }) = held {
                    out.ordering.insert(q, (c, r));
                }
            }
        }
    }
    Ok(out)
}

/// Splits a schedule into runs ending at a firing stage, plus the trailing
/// non-firing stages.
fn segments(s: &Schedule) -> (Vec<Vec<Stage>>, Vec<Stage>) {
    let mut segs = Vec::new();
    let mut cur = Vec::new();
    for st in &s.stages {
        cur.push(st.clone());
        if st.fires() {
            segs.push(std::mem::take(&mut cur));
        }
    }
    (segs, cur)
}

/// Per-phase stage runs to be aligned: `pulses` runs ending at the stage
/// that lines up with a joint pulse, then the trailing run. A phase that
/// runs out of pulses first plays its trailing stages in the next slot and
/// idles in its final configuration from then on.
fn aligned_runs(s: &Schedule, pulses: usize) -> Result<Vec<Vec<Stage>>, PacError> {
    let (mut runs, tail) = segments(s);
    let last = s.last().cloned().ok_or_else(|| PacError::Merge("empty local schedule".into()))?;
    if runs.len() == pulses {
        runs.push(tail);
        return Ok(runs);
    }
    if last.fires() {
        return Err(PacError::Merge("local phase ends on a pulse".into()));
    }
    runs.push(tail);
    while runs.len() <= pulses {
        runs.push(vec![last.idle_copy()]);
    }
    Ok(runs)
}

fn join(a: &Stage, b: &Stage) -> Stage {
    let qubits: Vec<QubitRecord> = a.qubits.iter().chain(&b.qubits).copied().collect();
    Stage::new(qubits, a.fired.iter().chain(&b.fired).copied())
}

/// Runs the two local schedules side by side, pulse aligned with pulse, then
/// appends the global schedule with resolved qubits left where they parked.
/// Returns the merged schedule and the number of joint local stages.
pub fn merge(s1: &Schedule, s2: &Schedule, s3: &Schedule, resolved: &BTreeSet<usize>) -> Result<(Schedule, usize), PacError> {
    let pulses = s1.depth().max(s2.depth());
    let runs1 = aligned_runs(s1, pulses)?;
    let runs2 = aligned_runs(s2, pulses)?;
    let mut stages = Vec::new();
    let mut prev1 = s1.stages.first().cloned().ok_or_else(|| PacError::Merge("local phase 1 is empty".into()))?;
    let mut prev2 = s2.stages.first().cloned().ok_or_else(|| PacError::Merge("local phase 2 is empty".into()))?;
    for (a, b) in runs1.iter().zip(&runs2) {
        let len = a.len().max(b.len());
        if len == 0 {
            continue;
        }
        let pad = |run: &[Stage], prev: &Stage| -> Vec<Stage> {
            let mut out = vec![prev.idle_copy(); len - run.len()];
            out.extend(run.iter().cloned());
            out
        };
        let (pa, pb) = (pad(a, &prev1), pad(b, &prev2));
        stages.extend(pa.iter().zip(&pb).map(|(x, y)| join(x, y)));
        prev1 = pa.last().expect("non-empty run").clone();
        prev2 = pb.last().expect("non-empty run").clone();
    }
    let local = stages.len();
    let end = stages.last().cloned().unwrap_or_default();
    let parked: Vec<QubitRecord> = end.qubits.iter().filter(|r| resolved.contains(&r.id)).copied().collect();
    if let Some(first) = s3.stages.first() {
        for rec in &first.qubits {
            if end.state(rec.id) != Some(&rec.state) {
                return Err(PacError::Merge(format!("qubit {} does not start the global phase where it ended", rec.id)));
            }
        }
    }
    for st in &s3.stages {
        let qubits = st.qubits.iter().chain(&parked).copied().collect();
        stages.push(Stage::new(qubits, st.fired.iter().copied()));
    }
    Ok((Schedule { stages }, local))
}

fn label(phase: Phase) -> impl Fn(CompileError) -> PacError {
    move |source| PacError::Phase { phase, source }
}

pub fn pac_compile(c: &Circuit, a: &ArraySpec, opts: &PacOptions) -> Result<PacOutcome, PacError> {
    let start = Instant::now();
    opts.division.validate().map_err(PacError::Options)?;
    opts.solver.validate().map_err(PacError::Options)?;
    let (reg1, reg2) = split_plane(a)?;
    let full = a.full();

    let p = divide(c, &opts.division);
    let division_time = start.elapsed().as_secs_f64();
    for (phase, qubits, region) in [(Phase::Local1, &p.q1, &reg1), (Phase::Local2, &p.q2, &reg2)] {
        if qubits.len() > region.num_sites() {
            return Err(PacError::RegionFull { phase, qubits: qubits.len(), sites: region.num_sites() });
        }
    }
    let (qc1, qc2, qc3) = split_circuit(c, &p);
    let req1 = CompileRequest {
        final_stage_slm: build_local_constraints(&p, Phase::Local1),
        ..CompileRequest::new(&qc1, &reg1)
    };
    let req2 = CompileRequest {
        final_stage_slm: build_local_constraints(&p, Phase::Local2),
        ..CompileRequest::new(&qc2, &reg2)
    };
    let local_opts = SolverOptions { timeout: remaining(&opts.solver, start), ..opts.solver.clone() };
    let (r1, r2) = if opts.parallel_local {
        std::thread::scope(|s| {
            let h1 = s.spawn(|| compile_request(&req1, &local_opts));
            let h2 = s.spawn(|| compile_request(&req2, &local_opts));
            (h1.join().expect("local phase 1 panicked"), h2.join().expect("local phase 2 panicked"))
        })
    } else {
        (compile_request(&req1, &local_opts), compile_request(&req2, &local_opts))
    };
    let r1 = r1.map_err(label(Phase::Local1))?;
    let r2 = r2.map_err(label(Phase::Local2))?;
    log::info!("local phases: depth {} and {}", r1.schedule.depth(), r2.schedule.depth());

    let g = build_global_constraints(&p, &r1.schedule, &r2.schedule)?;
    let req3 = CompileRequest {
        init: Some(g.init),
        blocklist: g.blocklist,
        final_stage_slm: BTreeSet::new(),
        ordering: g.ordering,
        ..CompileRequest::new(&qc3, &full)
    };
    let global_opts = SolverOptions { timeout: remaining(&opts.solver, start), ..opts.solver.clone() };
    let r3 = compile_request(&req3, &global_opts).map_err(label(Phase::Global))?;
    log::info!("global phase: depth {}", r3.schedule.depth());

    let (schedule, local_stages) = merge(&r1.schedule, &r2.schedule, &r3.schedule, &p.resolved())?;
    let phase_info = PhaseInfo {
        local_stages,
        q1: p.q1.iter().copied().collect(),
        q2: p.q2.iter().copied().collect(),
    };
    Ok(PacOutcome {
        schedule,
        phase_info,
        phases: PhaseResults { partition: p, r1, r2, r3 },
        division_time,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// What is left of the pipeline budget, never quite zero so the next phase
/// reports a timeout instead of rejecting its options.
fn remaining(opts: &SolverOptions, start: Instant) -> f64 {
    (opts.timeout - start.elapsed().as_secs_f64()).max(1e-3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::generate_rand3reg;
    use crate::verifier::verify_pac;

    fn run(n: usize, side: usize, seed: u64, parallel: bool) -> (Circuit, ArraySpec, PacOutcome) {
        let c = generate_rand3reg(n, seed).unwrap();
        let a = ArraySpec::new(side).unwrap();
        let opts = PacOptions { parallel_local: parallel, ..PacOptions::for_circuit(&c, seed) };
        let out = pac_compile(&c, &a, &opts).unwrap();
        (c, a, out)
    }

    #[test]
    fn merged_schedule_verifies() {
        for seed in 0..3 {
            let (c, a, out) = run(12, 8, seed, true);
            let r = verify_pac(&out.schedule, &c, &a, &out.phase_info);
            assert!(r.ok, "seed {seed}: {:?}", r.violations);
            let d = |s: &Schedule| s.depth();
            let ph = &out.phases;
            assert_eq!(
                out.schedule.depth(),
                d(&ph.r1.schedule).max(d(&ph.r2.schedule)) + d(&ph.r3.schedule)
            );
        }
    }

    #[test]
    fn sequential_matches_parallel() {
        let (_, _, a) = run(10, 8, 4, true);
        let (_, _, b) = run(10, 8, 4, false);
        assert_eq!(a.schedule, b.schedule);
        assert_eq!(a.phase_info, b.phase_info);
    }

    #[test]
    fn global_constraints_from_local_ends() {
        let c = Circuit::new(4, [(0, 1), (1, 2), (2, 3)], "").unwrap();
        let p = Partition::from_q1(&c, [0, 1]);
        let stage = |recs: Vec<QubitRecord>| Schedule { stages: vec![Stage::new(recs, [])] };
        let rec = |id, state| QubitRecord { id, state };
        let s1 = Schedule {
            stages: vec![
                Stage::new(vec![rec(0, QubitState::slm(0, 0)), rec(1, QubitState::aod(1, 1, 1, 0))], []),
                Stage::new(vec![rec(0, QubitState::slm(0, 0)), rec(1, QubitState::slm(1, 0))], []),
            ],
        };
        let s2 = stage(vec![rec(2, QubitState::slm(2, 2)), rec(3, QubitState::slm(3, 3))]);
        let g = build_global_constraints(&p, &s1, &s2).unwrap();
        assert_eq!(g.blocklist, BTreeSet::from([(0, 0), (3, 3)]));
        assert_eq!(g.init.keys().copied().collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(g.ordering, BTreeMap::from([(1, (1, 0))]));
        let clash = stage(vec![rec(2, QubitState::slm(0, 0)), rec(3, QubitState::slm(3, 3))]);
        assert!(matches!(build_global_constraints(&p, &s1, &clash), Err(PacError::Consistency(_))));
    }

    #[test]
    fn no_cross_gates_adds_no_depth() {
        let c = Circuit::new(8, [(0, 1), (1, 2), (4, 5), (6, 7)], "").unwrap();
        let a = ArraySpec::new(6).unwrap();
        let mut opts = PacOptions::for_circuit(&c, 0);
        opts.division.max_iter = 50;
        let out = pac_compile(&c, &a, &opts).unwrap();
        let r = verify_pac(&out.schedule, &c, &a, &out.phase_info);
        assert!(r.ok, "{:?}", r.violations);
        if out.phases.partition.e3.is_empty() {
            assert_eq!(out.phases.r3.schedule.depth(), 0);
        }
    }

    #[test]
    fn too_small_array_is_rejected() {
        let c = generate_rand3reg(10, 0).unwrap();
        let a = ArraySpec::new(4).unwrap();
        let err = pac_compile(&c, &a, &PacOptions::for_circuit(&c, 0)).unwrap_err();
        assert!(matches!(err, PacError::RegionFull { .. }), "{err}");
    }
}
