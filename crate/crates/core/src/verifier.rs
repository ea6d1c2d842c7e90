//! Independent schedule checker.
//!
//! Every physical rule is re-derived here from the site model directly; none
//! of it is shared with the constraint encoder. Violations are data: the
//! report lists every one found, and `ok` holds iff there are none.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::circuit::{Circuit, Gate, SubCircuit};
use crate::division::Partition;
use crate::hardware::{split_plane, ArraySpec, Region};
use crate::schedule::{depth, PhaseInfo, QubitState, Schedule, Stage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Rule {
    /// Every stage lists the same qubits, covering all gate endpoints.
    Roster,
    /// Trap flag and AOD index fields agree; indices exist on the array.
    TrapFields,
    /// C1: positions and AOD indices inside the governing region.
    Bounds,
    /// C2: an SLM atom does not move between consecutive stages.
    Stationarity,
    /// C3: AOD lines are rigid and an atom keeps its lines while held.
    RigidLines,
    /// C4: AOD columns and rows never cross.
    NonCrossing,
    /// C5: one atom per site and trap kind, unless the pair fires there.
    Occupancy,
    /// C6: fired gates have co-sited endpoints.
    GateSiting,
    /// C7: no third atom on a firing site.
    Isolation,
    /// C8: every gate fires exactly once.
    Coverage,
    /// Local-phase atoms stay inside their own quadrant.
    Region,
    /// Every local-phase atom sits in an SLM trap when the local phase ends.
    FinalSlm,
    /// No global-phase SLM placement on a site held by a parked atom.
    Parked,
    /// Global-phase start positions equal local-phase end positions.
    Position,
    /// Global-phase AOD index order reproduces the local-phase order.
    Ordering,
}

impl Rule {
    pub fn id(&self) -> &'static str {
        match self {
            Rule::Roster => "ROSTER",
            Rule::TrapFields => "TRAP",
            Rule::Bounds => "C1",
            Rule::Stationarity => "C2",
            Rule::RigidLines => "C3",
            Rule::NonCrossing => "C4",
            Rule::Occupancy => "C5",
            Rule::GateSiting => "C6",
            Rule::Isolation => "C7",
            Rule::Coverage => "C8",
            Rule::Region => "REGION",
            Rule::FinalSlm => "EQ2",
            Rule::Parked => "EQ3",
            Rule::Position => "EQ4",
            Rule::Ordering => "EQ5",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub stage: usize,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage {}: [{}] {}", self.stage, self.rule, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerifierReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
    pub depth: usize,
    pub gates_fired: usize,
}

impl VerifierReport {
    fn from_violations(s: &Schedule, violations: Vec<Violation>) -> Self {
        Self {
            ok: violations.is_empty(),
            depth: depth(s),
            gates_fired: s.fired_gates().count(),
            violations,
        }
    }

    pub fn count(&self, rule: Rule) -> usize {
        self.violations.iter().filter(|v| v.rule == rule).count()
    }
}

/// Checks a schedule for the whole circuit against the physical rules inside
/// `scope` (a region, or `a.full()`).
pub fn verify(s: &Schedule, c: &Circuit, a: &ArraySpec, scope: &Region) -> VerifierReport {
    verify_subcircuit(s, &SubCircuit::whole(c), a, scope)
}

/// Like [`verify`], for a schedule that only manages `sub`'s qubits and gates.
pub fn verify_subcircuit(s: &Schedule, sub: &SubCircuit, a: &ArraySpec, scope: &Region) -> VerifierReport {
    let mut v = Checker { sched: s, array: a, scope, gates: sub.gates.iter().copied().collect(), out: Vec::new() };
    v.roster(&sub.qubits);
    v.trap_fields();
    v.bounds();
    v.transitions();
    v.aod_geometry();
    v.occupancy_and_firing();
    v.coverage();
    VerifierReport::from_violations(s, v.out)
}

/// Full check of a merged partitioned schedule: all physical rules on the
/// whole array plus the phase hand-off rules described by `info`.
pub fn verify_pac(s: &Schedule, c: &Circuit, a: &ArraySpec, info: &PhaseInfo) -> VerifierReport {
    let mut report = verify(s, c, a, &a.full());
    report.violations.extend(phase_violations(s, c, a, info));
    report.ok = report.violations.is_empty();
    report
}

struct Checker<'a> {
    sched: &'a Schedule,
    array: &'a ArraySpec,
    scope: &'a Region,
    gates: BTreeMap<usize, Gate>,
    out: Vec<Violation>,
}

impl Checker<'_> {
    fn push(&mut self, stage: usize, rule: Rule, detail: String) {
        self.out.push(Violation { stage, rule, detail });
    }

    fn roster(&mut self, qubits: &[usize]) {
        let expected: BTreeSet<usize> = qubits.iter().copied().collect();
        let mut needed = expected.clone();
        for g in self.gates.values() {
            needed.insert(g.0);
            needed.insert(g.1);
        }
        for (t, st) in self.sched.stages.iter().enumerate() {
            let ids: Vec<usize> = st.qubits.iter().map(|r| r.id).collect();
            if ids.windows(2).any(|w| w[0] >= w[1]) {
                self.push(t, Rule::Roster, "qubit records not sorted by distinct id".into());
            }
            let listed: BTreeSet<usize> = ids.into_iter().collect();
            if let Some(q) = needed.difference(&listed).next() {
                self.push(t, Rule::Roster, format!("qubit {q} missing"));
            }
            if let Some(q) = listed.difference(&expected).next() {
                self.push(t, Rule::Roster, format!("unexpected qubit {q}"));
            }
        }
    }

    fn trap_fields(&mut self) {
        let n = self.array.n();
        for (t, st) in self.sched.stages.iter().enumerate() {
            for rec in &st.qubits {
                let s = rec.state;
                let coherent = match s.a {
                    0 => s.c.is_none() && s.r.is_none(),
                    1 => s.c.is_some() && s.r.is_some(),
                    _ => false,
                };
                if !coherent {
                    self.push(t, Rule::TrapFields, format!("qubit {}: trap flag {} with c={:?} r={:?}", rec.id, s.a, s.c, s.r));
                }
                if s.c.is_some_and(|c| c >= n) || s.r.is_some_and(|r| r >= n) {
                    self.push(t, Rule::TrapFields, format!("qubit {}: AOD index outside the {n}x{n} array", rec.id));
                }
            }
        }
    }

    fn bounds(&mut self) {
        let scope = self.scope.clone();
        for (t, st) in self.sched.stages.iter().enumerate() {
            for rec in &st.qubits {
                let s = rec.state;
                if !scope.contains_site(s.x, s.y) {
                    self.push(t, Rule::Bounds, format!("qubit {} at ({}, {}) outside scope", rec.id, s.x, s.y));
                }
                if s.a == 1 {
                    let col_ok = s.c.is_none_or(|c| scope.col_range.contains(&c));
                    let row_ok = s.r.is_none_or(|r| scope.row_range.contains(&r));
                    if !(col_ok && row_ok) {
                        self.push(t, Rule::Bounds, format!("qubit {} uses AOD line outside scope", rec.id));
                    }
                }
            }
        }
    }

    /// Per-transition rules: SLM atoms stay put, held atoms keep their lines.
    fn transitions(&mut self) {
        for t in 1..self.sched.stages.len() {
            let (prev, next) = (&self.sched.stages[t - 1], &self.sched.stages[t]);
            let mut found = Vec::new();
            for rec in &prev.qubits {
                let Some(after) = next.state(rec.id) else { continue };
                let before = rec.state;
                if before.a == 0 && before.site() != after.site() {
                    found.push((Rule::Stationarity, format!(
                        "qubit {} moved from {:?} to {:?} while in SLM", rec.id, before.site(), after.site()
                    )));
                }
                if before.a == 1 && after.a == 1 && (before.c, before.r) != (after.c, after.r) {
                    found.push((Rule::RigidLines, format!(
                        "qubit {} switched AOD lines while held ({:?},{:?}) -> ({:?},{:?})",
                        rec.id, before.c, before.r, after.c, after.r
                    )));
                }
            }
            for (rule, detail) in found {
                self.push(t, rule, detail);
            }
        }
    }

    /// Rigidity and non-crossing of AOD lines, both at each stage and at the
    /// end of each move (for every atom held when the move starts).
    fn aod_geometry(&mut self) {
        let stages = &self.sched.stages;
        let mut found = Vec::new();
        for (t, st) in stages.iter().enumerate() {
            let held: Vec<(usize, QubitState)> =
                st.qubits.iter().filter(|r| r.state.a == 1).map(|r| (r.id, r.state)).collect();
            for (i, &(qi, si)) in held.iter().enumerate() {
                for &(qj, sj) in &held[i + 1..] {
                    check_lines(&mut found, t, qi, si, si.site(), qj, sj, sj.site(), "");
                    if let Some(next) = stages.get(t + 1) {
                        let (Some(ni), Some(nj)) = (next.state(qi), next.state(qj)) else { continue };
                        // Still held on the same lines: the next stage's own check covers it.
                        let kept = |s: &QubitState, n: &QubitState| n.a == 1 && n.c == s.c && n.r == s.r;
                        if kept(&si, ni) && kept(&sj, nj) {
                            continue;
                        }
                        check_lines(&mut found, t + 1, qi, si, ni.site(), qj, sj, nj.site(), " during move");
                    }
                }
            }
        }
        for (t, rule, detail) in found {
            self.push(t, rule, detail);
        }
    }

    fn occupancy_and_firing(&mut self) {
        let mut found = Vec::new();
        for (t, st) in self.sched.stages.iter().enumerate() {
            let fired_pairs = self.fired_pairs(t, st, &mut found);
            let mut by_site: BTreeMap<(usize, usize), Vec<(usize, QubitState)>> = BTreeMap::new();
            for rec in &st.qubits {
                by_site.entry(rec.state.site()).or_default().push((rec.id, rec.state));
            }
            for (site, occupants) in &by_site {
                for kind in [0u8, 1] {
                    let same: Vec<usize> = occupants.iter().filter(|o| o.1.a == kind).map(|o| o.0).collect();
                    let allowed = same.len() <= 1 || (same.len() == 2 && fired_pairs.contains(&(same[0], same[1])));
                    if !allowed {
                        let trap = if kind == 0 { "SLM" } else { "AOD" };
                        found.push((t, Rule::Occupancy, format!("{trap} qubits {same:?} share site {site:?}")));
                    }
                }
                let mut traps = BTreeMap::new();
                for (q, s) in occupants.iter().filter(|o| o.1.a == 1) {
                    if let Some(other) = traps.insert((s.c, s.r), *q) {
                        found.push((t, Rule::Occupancy, format!("qubits {other} and {q} in the same AOD trap")));
                    }
                }
            }
            // During a pulse every co-sited pair interacts, so it must be fired.
            if !fired_pairs.is_empty() {
                for (site, occupants) in &by_site {
                    for (i, &(u, _)) in occupants.iter().enumerate() {
                        for &(v, _) in &occupants[i + 1..] {
                            let pair = if u < v { (u, v) } else { (v, u) };
                            if !fired_pairs.contains(&pair) && occupants.len() == 2 {
                                found.push((t, Rule::Isolation, format!(
                                    "qubits {u} and {v} share site {site:?} during a pulse without a gate"
                                )));
                            }
                        }
                    }
                }
            }
            // Isolation: a firing site holds exactly the two gate endpoints.
            for &(u, v) in &fired_pairs {
                let Some(su) = st.state(u) else { continue };
                if let Some(others) = by_site.get(&su.site()) {
                    for &(q, _) in others.iter().filter(|o| o.0 != u && o.0 != v) {
                        found.push((t, Rule::Isolation, format!("qubit {q} on firing site {:?} of ({u}, {v})", su.site())));
                    }
                }
            }
        }
        for (t, rule, detail) in found {
            self.push(t, rule, detail);
        }
    }

    /// Checks C6 and per-stage double use; returns the sorted fired pairs.
    fn fired_pairs(&self, t: usize, st: &Stage, found: &mut Vec<(usize, Rule, String)>) -> BTreeSet<(usize, usize)> {
        let mut pairs = BTreeSet::new();
        let mut busy: BTreeMap<usize, usize> = BTreeMap::new();
        for &gi in &st.fired {
            let Some(g) = self.gates.get(&gi) else {
                found.push((t, Rule::Coverage, format!("fired gate {gi} is not part of this circuit")));
                continue;
            };
            let (u, v) = g.sorted();
            match (st.state(u), st.state(v)) {
                (Some(su), Some(sv)) if su.site() == sv.site() => {}
                (Some(su), Some(sv)) => found.push((t, Rule::GateSiting, format!(
                    "gate {gi} ({u}, {v}) fired across sites {:?} and {:?}", su.site(), sv.site()
                ))),
                _ => found.push((t, Rule::GateSiting, format!("gate {gi} fired with an endpoint absent"))),
            }
            for q in [u, v] {
                if let Some(prev) = busy.insert(q, gi) {
                    found.push((t, Rule::Isolation, format!("qubit {q} in gates {prev} and {gi} at once")));
                }
            }
            pairs.insert((u, v));
        }
        pairs
    }

    fn coverage(&mut self) {
        let mut count: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
        for (t, st) in self.sched.stages.iter().enumerate() {
            for &g in &st.fired {
                let e = count.entry(g).or_insert((0, t));
                e.0 += 1;
                e.1 = t;
            }
        }
        let last = self.sched.stages.len().saturating_sub(1);
        let gate_ids: Vec<usize> = self.gates.keys().copied().collect();
        for g in gate_ids {
            match count.get(&g) {
                None => self.push(last, Rule::Coverage, format!("gate {g} never fired")),
                Some(&(k, t)) if k > 1 => self.push(t, Rule::Coverage, format!("gate {g} fired {k} times")),
                _ => {}
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn check_lines(
    found: &mut Vec<(usize, Rule, String)>,
    t: usize,
    qi: usize,
    si: QubitState,
    pi: (usize, usize),
    qj: usize,
    sj: QubitState,
    pj: (usize, usize),
    when: &str,
) {
    let (Some(ci), Some(ri), Some(cj), Some(rj)) = (si.c, si.r, sj.c, sj.r) else { return };
    let axes = [("column", ci, cj, pi.0, pj.0), ("row", ri, rj, pi.1, pj.1)];
    for (axis, li, lj, ui, uj) in axes {
        if li == lj && ui != uj {
            found.push((t, Rule::RigidLines, format!(
                "qubits {qi} and {qj} share {axis} {li} but sit at {ui} and {uj}{when}"
            )));
        }
        if (li < lj && ui > uj) || (li > lj && ui < uj) {
            found.push((t, Rule::NonCrossing, format!(
                "{axis}s {li} and {lj} of qubits {qi} and {qj} cross ({ui} vs {uj}){when}"
            )));
        }
    }
}

fn phase_violations(s: &Schedule, c: &Circuit, a: &ArraySpec, info: &PhaseInfo) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |stage, rule, detail| out.push(Violation { stage, rule, detail });
    let Ok((r1, r2)) = split_plane(a) else {
        push(0, Rule::Region, format!("array side {} cannot be split", a.n()));
        return out;
    };
    let l = info.local_stages;
    if l == 0 || l > s.stages.len() {
        push(0, Rule::Region, format!("local stage count {l} out of range"));
        return out;
    }
    let p = Partition::from_q1(c, info.q1.iter().copied());
    let claimed_q2: BTreeSet<usize> = info.q2.iter().copied().collect();
    if claimed_q2 != p.q2 {
        push(0, Rule::Region, "q1 and q2 do not partition the circuit qubits".into());
    }

    for (t, st) in s.stages[..l].iter().enumerate() {
        for rec in &st.qubits {
            let region = if p.q1.contains(&rec.id) { &r1 } else { &r2 };
            let st = rec.state;
            let lines_ok = st.c.is_none_or(|c| region.col_range.contains(&c))
                && st.r.is_none_or(|r| region.row_range.contains(&r));
            if !region.contains_site(st.x, st.y) || !lines_ok {
                push(t, Rule::Region, format!("qubit {} leaves its local region", rec.id));
            }
        }
    }

    let end = &s.stages[l - 1];
    for rec in &end.qubits {
        if rec.state.a != 0 {
            push(l - 1, Rule::FinalSlm, format!("qubit {} still in AOD at the end of the local phase", rec.id));
        }
    }

    let parked: BTreeSet<(usize, usize)> =
        p.resolved().iter().filter_map(|&q| end.state(q)).map(|st| st.site()).collect();
    let active = p.active();
    for (t, st) in s.stages.iter().enumerate().skip(l) {
        for &q in &active {
            if let Some(sq) = st.state(q) {
                if sq.a == 0 && parked.contains(&sq.site()) {
                    push(t, Rule::Parked, format!("qubit {q} placed in SLM on parked site {:?}", sq.site()));
                }
            }
        }
    }

    if let Some(first) = s.stages.get(l) {
        for &q in &active {
            let (Some(before), Some(after)) = (end.state(q), first.state(q)) else { continue };
            if before.site() != after.site() {
                push(l, Rule::Position, format!(
                    "qubit {q} ends the local phase at {:?} but starts the global phase at {:?}",
                    before.site(), after.site()
                ));
            }
        }
    }

    // Relative AOD order: last line held locally vs first line held globally.
    let last_local = |q: usize| s.stages[..l].iter().rev().find_map(|st| st.state(q).filter(|x| x.a == 1).copied());
    let first_global = |q: usize| s.stages[l..].iter().find_map(|st| st.state(q).filter(|x| x.a == 1).copied());
    let refs: Vec<(usize, QubitState, QubitState)> = active
        .iter()
        .filter_map(|&q| Some((q, last_local(q)?, first_global(q)?)))
        .collect();
    for (i, &(u, lu, gu)) in refs.iter().enumerate() {
        for &(v, lv, gv) in &refs[i + 1..] {
            for (axis, local_u, local_v, global_u, global_v) in [("column", lu.c, lv.c, gu.c, gv.c), ("row", lu.r, lv.r, gu.r, gv.r)] {
                if local_u.cmp(&local_v) != global_u.cmp(&global_v) {
                    push(l, Rule::Ordering, format!(
                        "{axis} order of qubits {u} and {v} changes across the phase boundary ({local_u:?},{local_v:?}) -> ({global_u:?},{global_v:?})"
                    ));
                }
            }
        }
    }
    out
}
