//! Conflict-driven clause-learning SAT solver.
//!
//! Two watched literals with blockers, first-UIP learning with clause
//! minimization, VSIDS on an indexed heap, phase saving, Luby restarts and
//! LBD-based learnt clause reduction. Clauses use DIMACS literal numbering
//! at the API boundary.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Lit(u32);

impl Lit {
    fn from_dimacs(l: i32) -> Lit {
        let v = l.unsigned_abs() - 1;
        Lit((v << 1) | u32::from(l < 0))
    }

    fn var(self) -> usize {
        (self.0 >> 1) as usize
    }

    fn is_neg(self) -> bool {
        self.0 & 1 == 1
    }

    fn idx(self) -> usize {
        self.0 as usize
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LBool {
    True,
    False,
    Undef,
}

type ClauseRef = usize;

/// Clause header; the literals live in `Solver::arena`.
#[derive(Debug, Clone, Copy)]
struct Clause {
    start: usize,
    len: usize,
    learnt: bool,
    deleted: bool,
    activity: f64,
    lbd: u32,
}

#[derive(Debug, Clone, Copy)]
struct Watcher {
    cref: ClauseRef,
    blocker: Lit,
}

/// Why a search stopped without an answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    ConflictBudget,
    WallTime,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SatResult {
    /// `model[v]` is the value of DIMACS variable `v`; index 0 is unused.
    Sat(Vec<bool>),
    Unsat,
    Unknown(StopReason),
}

/// Resource limits for one `solve` call.
#[derive(Debug, Clone, Copy, Default)]
pub struct Budget {
    pub max_conflicts: Option<u64>,
    pub deadline: Option<Instant>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub decisions: u64,
    pub propagations: u64,
    pub conflicts: u64,
    pub restarts: u64,
    pub learnt_deleted: u64,
}

/// Max-heap of variables keyed by activity; ties go to the lower index.
#[derive(Debug, Default)]
struct VarHeap {
    heap: Vec<usize>,
    pos: Vec<Option<usize>>,
}

impl VarHeap {
    fn better(act: &[f64], a: usize, b: usize) -> bool {
        act[a] > act[b] || (act[a] == act[b] && a < b)
    }

    fn contains(&self, v: usize) -> bool {
        self.pos[v].is_some()
    }

    fn insert(&mut self, v: usize, act: &[f64]) {
        if self.contains(v) {
            return;
        }
        self.pos[v] = Some(self.heap.len());
        self.heap.push(v);
        self.sift_up(self.heap.len() - 1, act);
    }

    fn pop(&mut self, act: &[f64]) -> Option<usize> {
        let top = *self.heap.first()?;
        let last = self.heap.pop().expect("non-empty");
        self.pos[top] = None;
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.pos[last] = Some(0);
            self.sift_down(0, act);
        }
        Some(top)
    }

    fn increased(&mut self, v: usize, act: &[f64]) {
        if let Some(i) = self.pos[v] {
            self.sift_up(i, act);
        }
    }

    fn sift_up(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        while i > 0 {
            let parent = (i - 1) / 2;
            let p = self.heap[parent];
            if !Self::better(act, v, p) {
                break;
            }
            self.heap[i] = p;
            self.pos[p] = Some(i);
            i = parent;
        }
        self.heap[i] = v;
        self.pos[v] = Some(i);
    }

    fn sift_down(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        let n = self.heap.len();
        loop {
            let l = 2 * i + 1;
            if l >= n {
                break;
            }
            let r = l + 1;
            let child = if r < n && Self::better(act, self.heap[r], self.heap[l]) {
                r
            } else {
                l
            };
            let c = self.heap[child];
            if !Self::better(act, c, v) {
                break;
            }
            self.heap[i] = c;
            self.pos[c] = Some(i);
            i = child;
        }
        self.heap[i] = v;
        self.pos[v] = Some(i);
    }
}

/// Luby sequence value for index `i` (0-based): 1 1 2 1 1 2 4 ...
pub fn luby(mut i: u64) -> u64 {
    let mut size = 1u64;
    let mut seq = 0u32;
    while size < i + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    while size - 1 != i {
        size = (size - 1) >> 1;
        seq -= 1;
        i %= size;
    }
    1u64 << seq
}

const RESTART_UNIT: u64 = 64;
const VAR_DECAY: f64 = 0.95;
const CLAUSE_DECAY: f64 = 0.999;
const BUDGET_CHECK_INTERVAL: u64 = 256;

pub struct Solver {
    num_vars: usize,
    clauses: Vec<Clause>,
    arena: Vec<Lit>,
    wasted: usize,
    learnts: Vec<ClauseRef>,
    watches: Vec<Vec<Watcher>>,
    /// Value of each literal, indexed by `Lit::idx`.
    vals: Vec<LBool>,
    level: Vec<u32>,
    reason: Vec<Option<ClauseRef>>,
    saved_phase: Vec<bool>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    activity: Vec<f64>,
    var_inc: f64,
    cla_inc: f64,
    heap: VarHeap,
    seen: Vec<bool>,
    ok: bool,
    max_learnts: f64,
    stats: SolverStats,
}

impl Solver {
    pub fn new(num_vars: usize) -> Self {
        Self::with_seed(num_vars, None)
    }

    /// A seed perturbs the initial variable activities so that different
    /// seeds explore different search orders.
    pub fn with_seed(num_vars: usize, seed: Option<u64>) -> Self {
        let mut activity = vec![0.0; num_vars];
        if let Some(seed) = seed {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for a in &mut activity {
                *a = rng.gen::<f64>() * 1e-5;
            }
        }
        let mut heap = VarHeap {
            heap: Vec::with_capacity(num_vars),
            pos: vec![None; num_vars],
        };
        for v in 0..num_vars {
            heap.insert(v, &activity);
        }
        Solver {
            num_vars,
            clauses: Vec::new(),
            arena: Vec::new(),
            wasted: 0,
            learnts: Vec::new(),
            watches: vec![Vec::new(); 2 * num_vars],
            vals: vec![LBool::Undef; 2 * num_vars],
            level: vec![0; num_vars],
            reason: vec![None; num_vars],
            saved_phase: vec![false; num_vars],
            trail: Vec::with_capacity(num_vars),
            trail_lim: Vec::new(),
            qhead: 0,
            activity,
            var_inc: 1.0,
            cla_inc: 1.0,
            heap,
            seen: vec![false; num_vars],
            ok: true,
            max_learnts: 0.0,
            stats: SolverStats::default(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn stats(&self) -> SolverStats {
        self.stats
    }

    fn value(&self, l: Lit) -> LBool {
        self.vals[l.idx()]
    }

    fn var_unassigned(&self, v: usize) -> bool {
        self.vals[v << 1] == LBool::Undef
    }

    fn clause_lits(&self, cref: ClauseRef) -> &[Lit] {
        let c = &self.clauses[cref];
        &self.arena[c.start..c.start + c.len]
    }

    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    /// Adds a clause of DIMACS literals. Returns `false` once the clause set
    /// is known to be unsatisfiable.
    ///
    /// # Panics
    /// Panics if a literal is 0 or refers to a variable beyond `num_vars`.
    pub fn add_clause(&mut self, dimacs: &[i32]) -> bool {
        if !self.ok {
            return false;
        }
        debug_assert_eq!(self.decision_level(), 0);
        let mut lits: Vec<Lit> = dimacs
            .iter()
            .map(|&l| {
                assert!(l != 0 && (l.unsigned_abs() as usize) <= self.num_vars, "bad literal {l}");
                Lit::from_dimacs(l)
            })
            .collect();
        lits.sort_unstable();
        lits.dedup();
        let mut out = Vec::with_capacity(lits.len());
        for (i, &l) in lits.iter().enumerate() {
            if i + 1 < lits.len() && lits[i + 1] == !l {
                return true;
            }
            match self.value(l) {
                LBool::True => return true,
                LBool::False => {}
                LBool::Undef => out.push(l),
            }
        }
        match out.len() {
            0 => {
                self.ok = false;
                false
            }
            1 => {
                self.enqueue(out[0], None);
                if self.propagate().is_some() {
                    self.ok = false;
                }
                self.ok
            }
            _ => {
                self.attach(out, false, 0);
                true
            }
        }
    }

    fn attach(&mut self, lits: Vec<Lit>, learnt: bool, lbd: u32) -> ClauseRef {
        let cref = self.clauses.len();
        self.watches[(!lits[0]).idx()].push(Watcher {
            cref,
            blocker: lits[1],
        });
        self.watches[(!lits[1]).idx()].push(Watcher {
            cref,
            blocker: lits[0],
        });
        let start = self.arena.len();
        let len = lits.len();
        self.arena.extend(lits);
        self.clauses.push(Clause {
            start,
            len,
            learnt,
            deleted: false,
            activity: 0.0,
            lbd,
        });
        if learnt {
            self.learnts.push(cref);
        }
        cref
    }

    fn enqueue(&mut self, l: Lit, reason: Option<ClauseRef>) {
        let v = l.var();
        self.vals[l.idx()] = LBool::True;
        self.vals[(!l).idx()] = LBool::False;
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(l);
    }

    /// Unit propagation; returns a conflicting clause if one is found.
    fn propagate(&mut self) -> Option<ClauseRef> {
        let mut conflict = None;
        while self.qhead < self.trail.len() && conflict.is_none() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            self.stats.propagations += 1;
            let false_lit = !p;
            let mut ws = std::mem::take(&mut self.watches[p.idx()]);
            let mut i = 0;
            let mut j = 0;
            while i < ws.len() {
                let w = ws[i];
                i += 1;
                if self.vals[w.blocker.idx()] == LBool::True {
                    ws[j] = w;
                    j += 1;
                    continue;
                }
                let cref = w.cref;
                let Clause {
                    start, len, deleted, ..
                } = self.clauses[cref];
                if deleted {
                    continue;
                }
                let lits = &mut self.arena[start..start + len];
                if lits[0] == false_lit {
                    lits.swap(0, 1);
                }
                let first = lits[0];
                if first != w.blocker && self.vals[first.idx()] == LBool::True {
                    ws[j] = Watcher {
                        cref,
                        blocker: first,
                    };
                    j += 1;
                    continue;
                }
                let mut new_watch = None;
                for k in 2..len {
                    if self.vals[lits[k].idx()] != LBool::False {
                        lits.swap(1, k);
                        new_watch = Some(lits[1]);
                        break;
                    }
                }
                if let Some(lk) = new_watch {
                    self.watches[(!lk).idx()].push(Watcher {
                        cref,
                        blocker: first,
                    });
                    continue;
                }
                ws[j] = w;
                j += 1;
                if self.value(first) == LBool::False {
                    conflict = Some(cref);
                    while i < ws.len() {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                } else {
                    self.enqueue(first, Some(cref));
                }
            }
            ws.truncate(j);
            debug_assert!(self.watches[p.idx()].is_empty());
            self.watches[p.idx()] = ws;
        }
        conflict
    }

    fn bump_var(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        self.heap.increased(v, &self.activity);
    }

    fn bump_clause(&mut self, cref: ClauseRef) {
        let c = &mut self.clauses[cref];
        c.activity += self.cla_inc;
        if c.activity > 1e20 {
            for &r in &self.learnts {
                self.clauses[r].activity *= 1e-20;
            }
            self.cla_inc *= 1e-20;
        }
    }

    /// First-UIP conflict analysis. Returns the learnt clause (asserting
    /// literal first) and the backjump level.
    fn analyze(&mut self, mut confl: ClauseRef) -> (Vec<Lit>, u32) {
        let mut learnt = vec![Lit(0)];
        let mut path = 0usize;
        let mut p: Option<Lit> = None;
        let mut idx = self.trail.len();
        let current = self.decision_level();

        loop {
            if self.clauses[confl].learnt {
                self.bump_clause(confl);
            }
            let start = usize::from(p.is_some());
            let Clause { start: base, len: nlits, .. } = self.clauses[confl];
            for k in start..nlits {
                let q = self.arena[base + k];
                let v = q.var();
                if !self.seen[v] && self.level[v] > 0 {
                    self.bump_var(v);
                    self.seen[v] = true;
                    if self.level[v] >= current {
                        path += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                idx -= 1;
                if self.seen[self.trail[idx].var()] {
                    break;
                }
            }
            let lit = self.trail[idx];
            self.seen[lit.var()] = false;
            path -= 1;
            p = Some(lit);
            if path == 0 {
                break;
            }
            confl = self.reason[lit.var()].expect("implied literal has a reason");
        }
        learnt[0] = !p.expect("conflict at level > 0");

        // Recursive minimization: drop literals implied by the rest of the
        // clause through chains of reasons.
        let mut to_clear: Vec<Lit> = learnt.clone();
        let abstract_levels = learnt[1..]
            .iter()
            .fold(0u32, |acc, l| acc | self.abstract_level(l.var()));
        let mut kept = vec![learnt[0]];
        for &l in &learnt[1..] {
            if self.reason[l.var()].is_none() || !self.lit_redundant(l, abstract_levels, &mut to_clear) {
                kept.push(l);
            }
        }
        for l in to_clear {
            self.seen[l.var()] = false;
        }
        let mut learnt = kept;

        let bt = if learnt.len() == 1 {
            0
        } else {
            let mut max_i = 1;
            for i in 2..learnt.len() {
                if self.level[learnt[i].var()] > self.level[learnt[max_i].var()] {
                    max_i = i;
                }
            }
            learnt.swap(1, max_i);
            self.level[learnt[1].var()]
        };
        (learnt, bt)
    }

    fn abstract_level(&self, v: usize) -> u32 {
        1 << (self.level[v] & 31)
    }

    fn lit_redundant(&mut self, p: Lit, abstract_levels: u32, to_clear: &mut Vec<Lit>) -> bool {
        let mut stack = vec![p];
        let top = to_clear.len();
        while let Some(q) = stack.pop() {
            let r = self.reason[q.var()].expect("only implied literals are expanded");
            let Clause { start: base, len, .. } = self.clauses[r];
            for k in 1..len {
                let l = self.arena[base + k];
                let v = l.var();
                if self.seen[v] || self.level[v] == 0 {
                    continue;
                }
                if self.reason[v].is_some() && self.abstract_level(v) & abstract_levels != 0 {
                    self.seen[v] = true;
                    stack.push(l);
                    to_clear.push(l);
                } else {
                    for l in to_clear.drain(top..) {
                        self.seen[l.var()] = false;
                    }
                    return false;
                }
            }
        }
        true
    }

    fn lbd(&self, lits: &[Lit]) -> u32 {
        let mut levels: Vec<u32> = lits.iter().map(|l| self.level[l.var()]).collect();
        levels.sort_unstable();
        levels.dedup();
        levels.len() as u32
    }

    fn cancel_until(&mut self, level: u32) {
        if self.decision_level() <= level {
            return;
        }
        let lim = self.trail_lim[level as usize];
        for i in (lim..self.trail.len()).rev() {
            let l = self.trail[i];
            let v = l.var();
            self.saved_phase[v] = !l.is_neg();
            self.vals[l.idx()] = LBool::Undef;
            self.vals[(!l).idx()] = LBool::Undef;
            self.reason[v] = None;
            self.heap.insert(v, &self.activity);
        }
        self.trail.truncate(lim);
        self.trail_lim.truncate(level as usize);
        self.qhead = lim;
    }

    fn pick_branch(&mut self) -> Option<Lit> {
        while let Some(v) = self.heap.pop(&self.activity) {
            if self.var_unassigned(v) {
                let neg = !self.saved_phase[v];
                return Some(Lit(((v as u32) << 1) | u32::from(neg)));
            }
        }
        None
    }

    fn locked(&self, cref: ClauseRef) -> bool {
        let first = self.clause_lits(cref)[0];
        self.reason[first.var()] == Some(cref) && self.value(first) == LBool::True
    }

    fn reduce_db(&mut self) {
        let mut cands: Vec<ClauseRef> = self
            .learnts
            .iter()
            .copied()
            .filter(|&c| !self.clauses[c].deleted)
            .collect();
        cands.sort_by(|&a, &b| {
            let (ca, cb) = (&self.clauses[a], &self.clauses[b]);
            cb.lbd
                .cmp(&ca.lbd)
                .then(ca.activity.total_cmp(&cb.activity))
                .then(a.cmp(&b))
        });
        let target = cands.len() / 2;
        let mut removed = 0;
        for &c in &cands {
            if removed >= target {
                break;
            }
            if self.clauses[c].lbd <= 2 || self.locked(c) {
                continue;
            }
            self.clauses[c].deleted = true;
            self.wasted += self.clauses[c].len;
            removed += 1;
        }
        self.stats.learnt_deleted += removed as u64;
        self.learnts.retain(|&c| !self.clauses[c].deleted);
        // Drop stale watchers so deleted clauses are never revisited.
        let clauses = &self.clauses;
        for ws in &mut self.watches {
            ws.retain(|w| !clauses[w.cref].deleted);
        }
        if self.wasted * 2 > self.arena.len() {
            self.compact_arena();
        }
    }

    fn compact_arena(&mut self) {
        let mut arena = Vec::with_capacity(self.arena.len() - self.wasted);
        for c in self.clauses.iter_mut() {
            if c.deleted {
                c.len = 0;
                c.start = 0;
                continue;
            }
            let start = arena.len();
            arena.extend_from_slice(&self.arena[c.start..c.start + c.len]);
            c.start = start;
        }
        self.arena = arena;
        self.wasted = 0;
    }

    fn budget_exhausted(&self, budget: &Budget) -> Option<StopReason> {
        if let Some(max) = budget.max_conflicts {
            if self.stats.conflicts >= max {
                return Some(StopReason::ConflictBudget);
            }
        }
        if let Some(deadline) = budget.deadline {
            if Instant::now() >= deadline {
                return Some(StopReason::WallTime);
            }
        }
        None
    }

    /// Searches for a model within `budget`.
    pub fn solve(&mut self, budget: Budget) -> SatResult {
        if !self.ok {
            return SatResult::Unsat;
        }
        if let Some(r) = self.budget_exhausted(&budget) {
            return SatResult::Unknown(r);
        }
        if self.propagate().is_some() {
            self.ok = false;
            return SatResult::Unsat;
        }
        self.max_learnts = (self.clauses.len() as f64 / 3.0).max(2000.0);
        let mut restart_idx = 0u64;
        let mut ticks = 0u64;
        loop {
            let limit = luby(restart_idx) * RESTART_UNIT;
            let mut conflicts_here = 0u64;
            loop {
                ticks += 1;
                if ticks % BUDGET_CHECK_INTERVAL == 0 {
                    if let Some(r) = self.budget_exhausted(&budget) {
                        self.cancel_until(0);
                        return SatResult::Unknown(r);
                    }
                }
                if let Some(confl) = self.propagate() {
                    self.stats.conflicts += 1;
                    conflicts_here += 1;
                    if self.decision_level() == 0 {
                        self.ok = false;
                        return SatResult::Unsat;
                    }
                    let (learnt, bt) = self.analyze(confl);
                    self.cancel_until(bt);
                    if learnt.len() == 1 {
                        self.enqueue(learnt[0], None);
                    } else {
                        let lbd = self.lbd(&learnt);
                        let first = learnt[0];
                        let cref = self.attach(learnt, true, lbd);
                        self.bump_clause(cref);
                        self.enqueue(first, Some(cref));
                    }
                    self.var_inc /= VAR_DECAY;
                    self.cla_inc /= CLAUSE_DECAY;
                    if let Some(max) = budget.max_conflicts {
                        if self.stats.conflicts >= max {
                            self.cancel_until(0);
                            return SatResult::Unknown(StopReason::ConflictBudget);
                        }
                    }
                } else {
                    if conflicts_here >= limit {
                        self.stats.restarts += 1;
                        self.cancel_until(0);
                        break;
                    }
                    if self.learnts.len() as f64 >= self.max_learnts + self.trail.len() as f64 {
                        self.reduce_db();
                        self.max_learnts *= 1.1;
                    }
                    match self.pick_branch() {
                        None => {
                            let model = std::iter::once(false)
                                .chain((0..self.num_vars).map(|v| self.vals[v << 1] == LBool::True))
                                .collect();
                            self.cancel_until(0);
                            return SatResult::Sat(model);
                        }
                        Some(l) => {
                            self.stats.decisions += 1;
                            self.trail_lim.push(self.trail.len());
                            self.enqueue(l, None);
                        }
                    }
                }
            }
            restart_idx += 1;
        }
    }
}
