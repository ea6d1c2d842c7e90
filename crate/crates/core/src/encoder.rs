//! Propositional encoding of one scheduling window.
//!
//! Integers (site coordinates and AOD indices) use the order encoding:
//! `ge[k]` holds iff `value >= lo + k`, with `ge[0]` fixed true and
//! `ge[len]` fixed false. Pairwise strict comparisons get their own exact
//! literals, which every geometric constraint family is phrased over.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use crate::circuit::Gate;
use crate::hardware::Region;
use crate::schedule::QubitState;
use crate::solver::{Backend, Lit};

#[derive(Debug, Clone)]
pub struct IntVar {
    lo: usize,
    ge: Vec<Lit>,
    konst: Option<usize>,
}

impl IntVar {
    fn domain(&self) -> usize {
        self.ge.len() - 1
    }
}

/// Clause sink with constant folding against a fixed true literal.
pub struct Encoder<'b> {
    backend: &'b mut dyn Backend,
    t: Lit,
    clauses: usize,
}

impl<'b> Encoder<'b> {
    pub fn new(backend: &'b mut dyn Backend) -> Self {
        let t = backend.new_var();
        backend.add_clause(&[t]);
        Self { backend, t, clauses: 1 }
    }

    pub fn backend(&mut self) -> &mut dyn Backend {
        &mut *self.backend
    }

    pub fn truth(&self) -> Lit {
        self.t
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses
    }

    pub fn var(&mut self) -> Lit {
        self.backend.new_var()
    }

    pub fn clause(&mut self, lits: &[Lit]) {
        let mut out = Vec::with_capacity(lits.len());
        for &l in lits {
            if l == self.t {
                return;
            }
            if l != -self.t {
                out.push(l);
            }
        }
        self.clauses += 1;
        self.backend.add_clause(&out);
    }

    /// Clause `¬conds ∨ rest`.
    fn implies(&mut self, conds: &[Lit], rest: &[Lit]) {
        let lits: Vec<Lit> = conds.iter().map(|&l| -l).chain(rest.iter().copied()).collect();
        self.clause(&lits);
    }

    pub fn int(&mut self, range: &Range<usize>) -> IntVar {
        let d = range.len();
        assert!(d >= 1, "empty integer domain");
        let mut ge = Vec::with_capacity(d + 1);
        ge.push(self.t);
        for _ in 1..d {
            ge.push(self.var());
        }
        ge.push(-self.t);
        for k in 1..d.saturating_sub(1) {
            self.clause(&[-ge[k + 1], ge[k]]);
        }
        IntVar { lo: range.start, ge, konst: None }
    }

    pub fn constant(&self, range: &Range<usize>, v: usize) -> IntVar {
        let d = range.len();
        let ge = (0..=d).map(|k| if range.start + k <= v && k < d { self.t } else { -self.t }).collect();
        IntVar { lo: range.start, ge, konst: Some(v) }
    }

    /// Literal for `v >= value`.
    fn geq(&self, v: &IntVar, value: usize) -> Lit {
        if value <= v.lo {
            self.t
        } else if value - v.lo >= v.domain() {
            -self.t
        } else {
            v.ge[value - v.lo]
        }
    }

    /// Exact literal for `a < b`.
    pub fn lt(&mut self, a: &IntVar, b: &IntVar) -> Lit {
        debug_assert_eq!((a.lo, a.domain()), (b.lo, b.domain()));
        if let (Some(x), Some(y)) = (a.konst, b.konst) {
            return if x < y { self.t } else { -self.t };
        }
        let d = a.domain();
        let l = self.var();
        for k in 1..d {
            self.clause(&[a.ge[k], -b.ge[k], l]);
        }
        for k in 0..d {
            self.clause(&[-l, -a.ge[k], b.ge[k + 1]]);
        }
        l
    }

    /// `conds ⇒ a = b`.
    pub fn imply_eq(&mut self, conds: &[Lit], a: &IntVar, b: &IntVar) {
        debug_assert_eq!((a.lo, a.domain()), (b.lo, b.domain()));
        for k in 1..a.domain() {
            self.implies(&[conds, &[a.ge[k]]].concat(), &[b.ge[k]]);
            self.implies(&[conds, &[b.ge[k]]].concat(), &[a.ge[k]]);
        }
    }

    /// `conds ⇒ a < b`.
    pub fn imply_lt(&mut self, conds: &[Lit], a: &IntVar, b: &IntVar) {
        debug_assert_eq!((a.lo, a.domain()), (b.lo, b.domain()));
        for k in 0..a.domain() {
            self.implies(&[conds, &[a.ge[k]]].concat(), &[b.ge[k + 1]]);
        }
    }

    pub fn value(&mut self, v: &IntVar) -> usize {
        if let Some(k) = v.konst {
            return k;
        }
        let mut k = 0;
        while k + 1 < v.domain() && self.backend.value(v.ge[k + 1]) {
            k += 1;
        }
        v.lo + k
    }

    pub fn lit_value(&mut self, l: Lit) -> bool {
        if l == self.t {
            true
        } else if l == -self.t {
            false
        } else {
            self.backend.value(l)
        }
    }
}

/// How the first stage of a window is obtained.
#[derive(Debug, Clone, Copy)]
pub enum StageZero<'a> {
    /// Solver-chosen placement; gates may fire at stage 0.
    Free,
    /// Caller-supplied placement, checked against the per-stage rules.
    Seeded(&'a [QubitState]),
    /// Last stage of an already committed window; taken as given.
    Inherited(&'a [QubitState]),
}

impl StageZero<'_> {
    fn pinned(&self) -> Option<&[QubitState]> {
        match self {
            StageZero::Free => None,
            StageZero::Seeded(s) | StageZero::Inherited(s) => Some(s),
        }
    }
}

/// Relative AOD order to reproduce. `refs[q] = (column, row)` each qubit
/// last held; `loaded[q]` holds indices already fixed by an earlier window.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OrderingSpec {
    pub refs: BTreeMap<usize, (usize, usize)>,
    pub loaded: BTreeMap<usize, (usize, usize)>,
}

pub struct WindowSpec<'a> {
    /// Sorted qubit ids managed by this window.
    pub qubits: &'a [usize],
    pub region: &'a Region,
    /// `(parent gate index, gate)` still to be fired.
    pub pending: &'a [(usize, Gate)],
    /// Stage-0 states aligned with `qubits` when pinned.
    pub stage0: StageZero<'a>,
    /// Stages after stage 0.
    pub horizon: usize,
    pub blocklist: &'a BTreeSet<(usize, usize)>,
    pub ordering: Option<&'a OrderingSpec>,
    /// Every pending gate must fire (fixed-horizon mode) instead of
    /// exposing a cardinality counter.
    pub require_all: bool,
}

pub struct QubitVars {
    pub x: IntVar,
    pub y: IntVar,
    pub c: IntVar,
    pub r: IntVar,
    pub a: Lit,
}

struct PairVars {
    ltx: [Lit; 2],
    lty: [Lit; 2],
    ltc: [Lit; 2],
    ltr: [Lit; 2],
    same: Lit,
}

pub struct WindowModel {
    /// `[stage][qubit index]`.
    pub stages: Vec<Vec<QubitVars>>,
    /// `fire[g][t]` for firing-capable stages.
    pub fire: Vec<Vec<Option<Lit>>>,
    /// `count[k - 1]` implies at least `k` pending gates fire.
    pub count: Vec<Lit>,
    first_new: usize,
}

impl WindowModel {
    /// Encodes every constraint family for `spec`.
    pub fn build(enc: &mut Encoder, spec: &WindowSpec) -> Self {
        let mut b = Builder::new(enc, spec);
        b.c1_bounds();
        b.pairs();
        b.c2_stationarity();
        b.c3_rigid_lines();
        b.c4_non_crossing();
        b.c5_occupancy();
        b.fire_vars();
        b.c6_gate_siting();
        b.c7_isolation();
        let count = b.c8_coverage();
        b.eq3_blocklist();
        b.eq5_ordering();
        WindowModel { stages: b.vars, fire: b.fire, count, first_new: b.first_new }
    }

    pub fn last_stage(&self) -> usize {
        self.stages.len() - 1
    }

    /// Literals asserting that the listed qubit indices sit in SLM traps at
    /// the final stage.
    pub fn final_slm(&self, indices: &[usize]) -> Vec<Lit> {
        let last = &self.stages[self.last_stage()];
        indices.iter().map(|&i| -last[i].a).collect()
    }

    /// Reads the new stages (all of them for a free stage 0, otherwise from
    /// stage 1) and, for each, the pending-gate positions fired there.
    pub fn extract(&self, enc: &mut Encoder) -> Vec<(Vec<QubitState>, Vec<usize>)> {
        let mut out = Vec::new();
        for t in self.first_new..self.stages.len() {
            let states = self.stages[t]
                .iter()
                .map(|v| {
                    let (x, y) = (enc.value(&v.x), enc.value(&v.y));
                    if enc.lit_value(v.a) {
                        QubitState::aod(x, y, enc.value(&v.c), enc.value(&v.r))
                    } else {
                        QubitState::slm(x, y)
                    }
                })
                .collect();
            let fired = (0..self.fire.len())
                .filter(|&g| self.fire[g][t].is_some_and(|f| enc.lit_value(f)))
                .collect();
            out.push((states, fired));
        }
        out
    }
}

struct Builder<'e, 'b, 's> {
    enc: &'e mut Encoder<'b>,
    spec: &'s WindowSpec<'s>,
    vars: Vec<Vec<QubitVars>>,
    pairs: Vec<BTreeMap<(usize, usize), PairVars>>,
    fire: Vec<Vec<Option<Lit>>>,
    stage_fires: Vec<Option<Lit>>,
    index: BTreeMap<usize, usize>,
    /// First stage whose contents are chosen by the solver.
    first_new: usize,
    /// First stage the per-stage rules are checked on.
    first_checked: usize,
}

impl<'e, 'b, 's> Builder<'e, 'b, 's> {
    fn new(enc: &'e mut Encoder<'b>, spec: &'s WindowSpec<'s>) -> Self {
        let index = spec.qubits.iter().enumerate().map(|(i, &q)| (q, i)).collect();
        let (first_new, first_checked) = match spec.stage0 {
            StageZero::Free => (0, 0),
            StageZero::Seeded(_) => (1, 0),
            StageZero::Inherited(_) => (1, 1),
        };
        Self {
            enc,
            spec,
            vars: Vec::new(),
            pairs: Vec::new(),
            fire: Vec::new(),
            stage_fires: Vec::new(),
            index,
            first_new,
            first_checked,
        }
    }

    fn num_stages(&self) -> usize {
        self.spec.horizon + 1
    }

    fn n(&self) -> usize {
        self.spec.qubits.len()
    }

    fn checked(&self) -> Range<usize> {
        self.first_checked..self.num_stages()
    }

    fn firing(&self) -> Range<usize> {
        self.first_new..self.num_stages()
    }

    /// C1: every coordinate and AOD index ranges over the region only.
    fn c1_bounds(&mut self) {
        let reg = self.spec.region;
        for t in 0..self.num_stages() {
            let pinned = if t == 0 { self.spec.stage0.pinned() } else { None };
            let stage = match pinned {
                Some(states) => states
                    .iter()
                    .map(|s| QubitVars {
                        x: self.enc.constant(&reg.x_range, s.x),
                        y: self.enc.constant(&reg.y_range, s.y),
                        c: self.enc.constant(&reg.col_range, s.c.unwrap_or(reg.col_range.start)),
                        r: self.enc.constant(&reg.row_range, s.r.unwrap_or(reg.row_range.start)),
                        a: if s.in_aod() { self.enc.truth() } else { -self.enc.truth() },
                    })
                    .collect(),
                None => (0..self.n())
                    .map(|_| QubitVars {
                        x: self.enc.int(&reg.x_range),
                        y: self.enc.int(&reg.y_range),
                        c: self.enc.int(&reg.col_range),
                        r: self.enc.int(&reg.row_range),
                        a: self.enc.var(),
                    })
                    .collect(),
            };
            self.vars.push(stage);
        }
    }

    fn pairs(&mut self) {
        for t in 0..self.num_stages() {
            let mut map = BTreeMap::new();
            for i in 0..self.n() {
                for j in i + 1..self.n() {
                    let (vi, vj) = (&self.vars[t][i], &self.vars[t][j]);
                    let ltx = [self.enc.lt(&vi.x, &vj.x), self.enc.lt(&vj.x, &vi.x)];
                    let lty = [self.enc.lt(&vi.y, &vj.y), self.enc.lt(&vj.y, &vi.y)];
                    let ltc = [self.enc.lt(&vi.c, &vj.c), self.enc.lt(&vj.c, &vi.c)];
                    let ltr = [self.enc.lt(&vi.r, &vj.r), self.enc.lt(&vj.r, &vi.r)];
                    let apart = [ltx[0], ltx[1], lty[0], lty[1]];
                    let t_lit = self.enc.truth();
                    let same = if apart.contains(&t_lit) {
                        -t_lit
                    } else if apart.iter().all(|&l| l == -t_lit) {
                        t_lit
                    } else {
                        let s = self.enc.var();
                        self.enc.clause(&[apart[0], apart[1], apart[2], apart[3], s]);
                        for l in apart {
                            self.enc.clause(&[-s, -l]);
                        }
                        s
                    };
                    map.insert((i, j), PairVars { ltx, lty, ltc, ltr, same });
                }
            }
            self.pairs.push(map);
        }
    }

    /// C2: an SLM atom keeps its site across the following transition.
    fn c2_stationarity(&mut self) {
        for t in 0..self.spec.horizon {
            for i in 0..self.n() {
                let (now, next) = (&self.vars[t][i], &self.vars[t + 1][i]);
                self.enc.imply_eq(&[-now.a], &now.x, &next.x);
                self.enc.imply_eq(&[-now.a], &now.y, &next.y);
            }
        }
    }

    /// C3: atoms on one AOD column share x, on one row share y, also at the
    /// end of each move; a held atom keeps its column and row.
    fn c3_rigid_lines(&mut self) {
        let n = self.n();
        for t in 0..self.num_stages() {
            let targets: Vec<usize> = [t, t + 1]
                .into_iter()
                .filter(|&s| (s == t && self.checked().contains(&t)) || (s == t + 1 && s < self.num_stages()))
                .collect();
            for i in 0..n {
                for j in i + 1..n {
                    let p = &self.pairs[t][&(i, j)];
                    let (ai, aj) = (self.vars[t][i].a, self.vars[t][j].a);
                    let same_col = [ai, aj, -p.ltc[0], -p.ltc[1]];
                    let same_row = [ai, aj, -p.ltr[0], -p.ltr[1]];
                    for &s in &targets {
                        let (vi, vj) = (&self.vars[s][i], &self.vars[s][j]);
                        self.enc.imply_eq(&same_col, &vi.x, &vj.x);
                        self.enc.imply_eq(&same_row, &vi.y, &vj.y);
                    }
                }
            }
        }
        for t in 0..self.spec.horizon {
            for i in 0..n {
                let (now, next) = (&self.vars[t][i], &self.vars[t + 1][i]);
                self.enc.imply_eq(&[now.a, next.a], &now.c, &next.c);
                self.enc.imply_eq(&[now.a, next.a], &now.r, &next.r);
            }
        }
    }

    /// C4: lines keep their spatial order at each stage and through each move.
    fn c4_non_crossing(&mut self) {
        let n = self.n();
        for t in 0..self.num_stages() {
            let mut targets = Vec::new();
            if self.checked().contains(&t) {
                targets.push(t);
            }
            if t + 1 < self.num_stages() {
                targets.push(t + 1);
            }
            for i in 0..n {
                for j in i + 1..n {
                    let p = &self.pairs[t][&(i, j)];
                    let (ai, aj) = (self.vars[t][i].a, self.vars[t][j].a);
                    let (ltc, ltr) = (p.ltc, p.ltr);
                    for &s in &targets {
                        let q = &self.pairs[s][&(i, j)];
                        let (ltx, lty) = (q.ltx, q.lty);
                        self.enc.clause(&[-ai, -aj, -ltc[0], -ltx[1]]);
                        self.enc.clause(&[-ai, -aj, -ltc[1], -ltx[0]]);
                        self.enc.clause(&[-ai, -aj, -ltr[0], -lty[1]]);
                        self.enc.clause(&[-ai, -aj, -ltr[1], -lty[0]]);
                    }
                }
            }
        }
    }

    /// C5: co-sited atoms are one SLM and one AOD atom.
    fn c5_occupancy(&mut self) {
        for t in self.checked() {
            for i in 0..self.n() {
                for j in i + 1..self.n() {
                    let same = self.pairs[t][&(i, j)].same;
                    let (ai, aj) = (self.vars[t][i].a, self.vars[t][j].a);
                    self.enc.clause(&[-same, ai, aj]);
                    self.enc.clause(&[-same, -ai, -aj]);
                }
            }
        }
    }

    fn fire_vars(&mut self) {
        let stages = self.num_stages();
        let firing = self.firing();
        for _ in self.spec.pending {
            let row = (0..stages).map(|t| if firing.contains(&t) { Some(self.enc.var()) } else { None }).collect();
            self.fire.push(row);
        }
        self.stage_fires = (0..stages)
            .map(|t| if firing.contains(&t) && !self.spec.pending.is_empty() { Some(self.enc.var()) } else { None })
            .collect();
        for g in 0..self.fire.len() {
            for t in firing.clone() {
                let (f, s) = (self.fire[g][t].unwrap(), self.stage_fires[t].unwrap());
                self.enc.clause(&[-f, s]);
            }
        }
    }

    fn endpoints(&self, g: usize) -> (usize, usize) {
        let (u, v) = self.spec.pending[g].1.sorted();
        (self.index[&u], self.index[&v])
    }

    /// C6: a fired gate's endpoints share a site.
    fn c6_gate_siting(&mut self) {
        for g in 0..self.fire.len() {
            let (u, v) = self.endpoints(g);
            for t in self.firing() {
                let f = self.fire[g][t].unwrap();
                let same = self.pairs[t][&(u, v)].same;
                self.enc.clause(&[-f, same]);
            }
        }
    }

    /// C7: no other atom on a firing site, no atom in two gates at once, and
    /// during a pulse every co-sited pair is a fired pair.
    fn c7_isolation(&mut self) {
        let n = self.n();
        let key = |a: usize, b: usize| if a < b { (a, b) } else { (b, a) };
        for t in self.firing() {
            let mut by_pair: BTreeMap<(usize, usize), Vec<Lit>> = BTreeMap::new();
            for g in 0..self.fire.len() {
                let (u, v) = self.endpoints(g);
                let f = self.fire[g][t].unwrap();
                for k in (0..n).filter(|&k| k != u && k != v) {
                    let s = self.pairs[t][&key(u, k)].same;
                    self.enc.clause(&[-f, -s]);
                }
                by_pair.entry((u, v)).or_default().push(f);
            }
            for fs in by_pair.values() {
                for (i, &f) in fs.iter().enumerate() {
                    for &h in &fs[i + 1..] {
                        self.enc.clause(&[-f, -h]);
                    }
                }
            }
            let Some(pulse) = self.stage_fires[t] else { continue };
            for i in 0..n {
                for j in i + 1..n {
                    let mut c = vec![-self.pairs[t][&(i, j)].same, -pulse];
                    c.extend(by_pair.get(&(i, j)).into_iter().flatten());
                    self.enc.clause(&c);
                }
            }
        }
    }

    /// C8: each pending gate fires at most once in the window; returns the
    /// cardinality outputs (empty in fixed-horizon mode, where every gate
    /// is required).
    fn c8_coverage(&mut self) -> Vec<Lit> {
        let mut fired = Vec::new();
        for g in 0..self.fire.len() {
            let fs: Vec<Lit> = self.fire[g].iter().flatten().copied().collect();
            for (i, &f) in fs.iter().enumerate() {
                for &h in &fs[i + 1..] {
                    self.enc.clause(&[-f, -h]);
                }
            }
            let any = self.enc.var();
            let mut c = vec![-any];
            c.extend(&fs);
            self.enc.clause(&c);
            if self.spec.require_all {
                self.enc.clause(&[any]);
            }
            fired.push(any);
        }
        if self.spec.require_all {
            return Vec::new();
        }
        let per_stage = self.n() / 2;
        let cap = fired.len().min(per_stage * self.firing().len());
        totalizer(self.enc, &fired, cap)
    }

    /// No SLM placement on a blocked site, and no atom over one during a
    /// pulse (the parked atom there would interact).
    fn eq3_blocklist(&mut self) {
        let reg = self.spec.region;
        let blocked: Vec<(usize, usize)> =
            self.spec.blocklist.iter().copied().filter(|&(x, y)| reg.contains_site(x, y)).collect();
        for t in self.firing() {
            for i in 0..self.n() {
                for &(x, y) in &blocked {
                    let v = &self.vars[t][i];
                    let away = [
                        -self.enc.geq(&v.x, x),
                        self.enc.geq(&v.x, x + 1),
                        -self.enc.geq(&v.y, y),
                        self.enc.geq(&v.y, y + 1),
                    ];
                    self.enc.clause(&[&[v.a][..], &away].concat());
                    if let Some(pulse) = self.stage_fires[t] {
                        self.enc.clause(&[&[-pulse][..], &away].concat());
                    }
                }
            }
        }
    }

    /// The AOD indices each referenced qubit takes when first loaded must
    /// order like its reference indices, pairwise, on both axes.
    fn eq5_ordering(&mut self) {
        let Some(ord) = self.spec.ordering else { return };
        let reg = self.spec.region;
        let mut first = Vec::new();
        for (i, &q) in self.spec.qubits.iter().enumerate() {
            let Some(&reference) = ord.refs.get(&q) else { continue };
            let (fc, fr) = match ord.loaded.get(&q) {
                Some(&(c, r)) => (self.enc.constant(&reg.col_range, c), self.enc.constant(&reg.row_range, r)),
                None => {
                    let fc = self.enc.int(&reg.col_range);
                    let fr = self.enc.int(&reg.row_range);
                    let mut unloaded = self.enc.truth();
                    for t in self.firing() {
                        let v = &self.vars[t][i];
                        self.enc.imply_eq(&[unloaded, v.a], &v.c, &fc);
                        self.enc.imply_eq(&[unloaded, v.a], &v.r, &fr);
                        let next = self.enc.var();
                        self.enc.clause(&[-unloaded, v.a, next]);
                        unloaded = next;
                    }
                    (fc, fr)
                }
            };
            first.push((reference, fc, fr));
        }
        for (i, (ru, cu, rowu)) in first.iter().enumerate() {
            for (rv, cv, rowv) in &first[i + 1..] {
                order_like(self.enc, ru.0.cmp(&rv.0), cu, cv);
                order_like(self.enc, ru.1.cmp(&rv.1), rowu, rowv);
            }
        }
    }
}

fn order_like(enc: &mut Encoder, want: std::cmp::Ordering, a: &IntVar, b: &IntVar) {
    match want {
        std::cmp::Ordering::Less => enc.imply_lt(&[], a, b),
        std::cmp::Ordering::Greater => enc.imply_lt(&[], b, a),
        std::cmp::Ordering::Equal => enc.imply_eq(&[], a, b),
    }
}

/// Counting network over `inputs`, truncated at `cap` outputs. Output `k`
/// (1-based) can only be true when at least `k` inputs are.
pub fn totalizer(enc: &mut Encoder, inputs: &[Lit], cap: usize) -> Vec<Lit> {
    if cap == 0 || inputs.is_empty() {
        return Vec::new();
    }
    if inputs.len() == 1 {
        return vec![inputs[0]];
    }
    let mid = inputs.len() / 2;
    let left = totalizer(enc, &inputs[..mid], cap);
    let right = totalizer(enc, &inputs[mid..], cap);
    let size = (left.len() + right.len()).min(cap);
    let out: Vec<Lit> = (0..size).map(|_| enc.var()).collect();
    let f = -enc.truth();
    let at = |v: &[Lit], k: usize| if k < v.len() { v[k] } else { f };
    for i in 0..=left.len() {
        for j in 0..=right.len() {
            let k = i + j;
            if k >= size {
                continue;
            }
            // At most i on the left and j on the right: at most i + j total.
            enc.clause(&[-out[k], at(&left, i), at(&right, j)]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hardware::ArraySpec;
    use crate::solver::{CadicalBackend, CheckResult};

    fn region(n: usize) -> Region {
        ArraySpec::new(n).unwrap().full()
    }

    fn sat(b: &mut dyn Backend, assume: &[Lit]) -> bool {
        b.check(assume, None).unwrap() == CheckResult::Sat
    }

    #[test]
    fn order_encoding_round_trips() {
        let mut b = CadicalBackend::new();
        let mut e = Encoder::new(&mut b);
        let r = 2..7;
        let x = e.int(&r);
        let k = e.constant(&r, 4);
        e.imply_eq(&[], &x, &k);
        assert!(e.backend().check(&[], None).unwrap() == CheckResult::Sat);
        assert_eq!(e.value(&x), 4);
    }

    #[test]
    fn strict_comparison_is_exact() {
        for (va, vb) in [(0, 0), (0, 3), (3, 0), (2, 3), (3, 3)] {
            let mut b = CadicalBackend::new();
            let mut e = Encoder::new(&mut b);
            let r = 0..4;
            let (a, bb) = (e.int(&r), e.int(&r));
            let (ka, kb) = (e.constant(&r, va), e.constant(&r, vb));
            e.imply_eq(&[], &a, &ka);
            e.imply_eq(&[], &bb, &kb);
            let l = e.lt(&a, &bb);
            let be = e.backend();
            assert_eq!(sat(be, &[l]), va < vb, "{va} < {vb}");
            assert_eq!(sat(be, &[-l]), va >= vb, "{va} >= {vb}");
        }
    }

    #[test]
    fn totalizer_counts() {
        for n in 1..6 {
            for ones in 0..=n {
                let mut b = CadicalBackend::new();
                let mut e = Encoder::new(&mut b);
                let xs: Vec<Lit> = (0..n).map(|_| e.var()).collect();
                for (i, &x) in xs.iter().enumerate() {
                    e.clause(&[if i < ones { x } else { -x }]);
                }
                let out = totalizer(&mut e, &xs, n);
                for k in 1..=n {
                    assert_eq!(sat(e.backend(), &[out[k - 1]]), ones >= k, "n={n} ones={ones} k={k}");
                }
            }
        }
    }

    fn single_pair_spec<'a>(
        qubits: &'a [usize],
        region: &'a Region,
        pending: &'a [(usize, Gate)],
        stage0: StageZero<'a>,
        horizon: usize,
        blocklist: &'a BTreeSet<(usize, usize)>,
    ) -> WindowSpec<'a> {
        WindowSpec { qubits, region, pending, stage0, horizon, blocklist, ordering: None, require_all: false }
    }

    #[test]
    fn one_gate_fires_in_free_window() {
        let reg = region(4);
        let gates = [(0, Gate(0, 1))];
        let none = BTreeSet::new();
        let spec = single_pair_spec(&[0, 1], &reg, &gates, StageZero::Free, 0, &none);
        let mut b = CadicalBackend::new();
        let mut e = Encoder::new(&mut b);
        let m = WindowModel::build(&mut e, &spec);
        assert!(e.backend().check(&[m.count[0]], None).unwrap() == CheckResult::Sat);
        let out = m.extract(&mut e);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].1, vec![0]);
        assert_eq!(out[0].0[0].site(), out[0].0[1].site());
        assert_ne!(out[0].0[0].a, out[0].0[1].a);
    }

    #[test]
    fn two_slm_atoms_need_two_transitions() {
        let reg = region(4);
        let gates = [(0, Gate(0, 1))];
        let none = BTreeSet::new();
        let init = [QubitState::slm(0, 0), QubitState::slm(2, 2)];
        for (h, expect) in [(1, false), (2, true)] {
            let spec = single_pair_spec(&[0, 1], &reg, &gates, StageZero::Seeded(&init), h, &none);
            let mut b = CadicalBackend::new();
            let mut e = Encoder::new(&mut b);
            let m = WindowModel::build(&mut e, &spec);
            assert_eq!(sat(e.backend(), &[m.count[0]]), expect, "horizon {h}");
        }
    }

    #[test]
    fn blocked_site_rejects_slm_parking() {
        let reg = region(2);
        let none: [(usize, Gate); 0] = [];
        let init = [QubitState::aod(0, 0, 0, 0)];
        let blocked: BTreeSet<(usize, usize)> = [(0, 0), (1, 0), (0, 1)].into();
        let spec = single_pair_spec(&[0], &reg, &none, StageZero::Seeded(&init), 1, &blocked);
        let mut b = CadicalBackend::new();
        let mut e = Encoder::new(&mut b);
        let m = WindowModel::build(&mut e, &spec);
        let park = m.final_slm(&[0]);
        assert!(sat(e.backend(), &park));
        let out = m.extract(&mut e);
        assert_eq!(out[0].0[0].site(), (1, 1));
    }

    fn pin(e: &mut Encoder, v: &IntVar, range: &Range<usize>, value: usize) {
        let k = e.constant(range, value);
        e.imply_eq(&[], v, &k);
    }

    #[test]
    fn crossing_move_is_rejected() {
        let reg = region(4);
        let none: [(usize, Gate); 0] = [];
        let empty = BTreeSet::new();
        let init = [QubitState::aod(0, 0, 0, 0), QubitState::aod(2, 1, 1, 1)];
        for ((x0, x1), ok) in [((3, 2), false), ((1, 2), true), ((2, 2), true)] {
            let spec = single_pair_spec(&[0, 1], &reg, &none, StageZero::Inherited(&init), 1, &empty);
            let mut b = CadicalBackend::new();
            let mut e = Encoder::new(&mut b);
            let m = WindowModel::build(&mut e, &spec);
            pin(&mut e, &m.stages[1][0].x, &reg.x_range, x0);
            pin(&mut e, &m.stages[1][1].x, &reg.x_range, x1);
            assert_eq!(sat(e.backend(), &[]), ok, "x0={x0} x1={x1}");
        }
    }
}
