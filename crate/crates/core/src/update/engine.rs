//! The recursive repair engine: one handler per connective of the core
//! fragment produced by [`normalize`], each expanding every nondeterministic
//! choice into a branch and looping until its goal holds.
//!
//! Two strategies are available. With characterizations enabled (the
//! default) the handlers follow the published pseudocode and the update
//! characterizations for `EX`, `AG`, `EG` and committed `AF`. Without them,
//! every handler branches over all single edits that can break the current
//! counterexample (for universal goals) or extend the current partial
//! witness (for existential goals), which trades speed for coverage of the
//! admissible models.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use crate::checker::{check_rooted, enumerate_simple_lassos, holds, sat_states, Graph};
use crate::diff::compute_diff;
use crate::formula::{neg, normalize, Formula};
use crate::kripke::{reachable_from, Edge, KripkeModel, Label, DUMMY};

use super::ops::{apply, minimal_assignments, PrimitiveOp};
use super::UpdateConfig;

/// How many minimal labels a relabelling considers before the
/// constraint filter and the configured cap are applied.
const ASSIGNMENT_SCAN: usize = 64;

/// A model under construction together with the operations applied so far.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Work {
    pub model: KripkeModel,
    pub trace: Vec<PrimitiveOp>,
}

impl Work {
    pub fn new(model: KripkeModel) -> Work {
        Work { model, trace: Vec::new() }
    }

    pub fn then(&self, op: PrimitiveOp) -> Option<Work> {
        let model = apply(&self.model, &op).ok()?;
        let mut trace = self.trace.clone();
        trace.push(op);
        Some(Work { model, trace })
    }

    fn then_all(&self, ops: impl IntoIterator<Item = PrimitiveOp>) -> Option<Work> {
        ops.into_iter().try_fold(self.clone(), |w, op| w.then(op))
    }

    fn new_states(&self) -> usize {
        self.trace.iter().filter(|op| matches!(op, PrimitiveOp::AddState { .. })).count()
    }
}

/// Where a constraint formula must hold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Anchor {
    /// At a named state.
    State(String),
    /// At every initial state (satisfaction from the dummy root).
    Root,
}

/// A formula that every emitted model must keep satisfying.
pub(crate) type Constraint = (Formula, Anchor);

/// Deduplicated result set keyed by model; keeps the shortest trace.
#[derive(Default)]
pub(crate) struct Results {
    map: BTreeMap<KripkeModel, Vec<PrimitiveOp>>,
}

impl Results {
    pub fn add(&mut self, w: Work) {
        match self.map.get(&w.model) {
            Some(t) if (t.len(), t) <= (w.trace.len(), &w.trace) => {}
            _ => {
                self.map.insert(w.model, w.trace);
            }
        }
    }

    pub fn extend(&mut self, ws: impl IntoIterator<Item = Work>) {
        for w in ws {
            self.add(w);
        }
    }

    pub fn into_vec(self) -> Vec<Work> {
        self.map.into_iter().map(|(model, trace)| Work { model, trace }).collect()
    }
}

type Step<'s> = dyn FnMut(&mut Engine<'_>, &Work) -> Vec<Work> + 's;

/// Cap on the number of false lassos examined per step.
const LASSO_SAMPLE: usize = 16;

pub(crate) struct Engine<'c> {
    cfg: &'c UpdateConfig,
    base: KripkeModel,
    recursion_cap: usize,
    loop_cap: usize,
    expansions: usize,
    pub truncated: bool,
}

fn non_dummy(m: &KripkeModel) -> impl Iterator<Item = &String> {
    let dummy = m.has_dummy();
    m.states().filter(move |s| !(dummy && s.as_str() == DUMMY))
}

fn edge(a: &str, b: &str) -> Edge {
    (a.to_string(), b.to_string())
}

/// States reachable from `s` along paths whose states before the last
/// satisfy `through` (the start is always included).
pub(crate) fn guarded_reach(m: &KripkeModel, s: &str, through: &BTreeSet<String>) -> BTreeSet<String> {
    let mut seen = BTreeSet::from([s.to_string()]);
    let mut queue = VecDeque::from([s.to_string()]);
    while let Some(u) = queue.pop_front() {
        if !through.contains(&u) {
            continue;
        }
        for v in m.succ_iter(&u) {
            if seen.insert(v.clone()) {
                queue.push_back(v.clone());
            }
        }
    }
    seen
}

/// Transitions lying on some infinite path from `s` that satisfies
/// `[a U b]`, and the states they touch: either the source is on an
/// `a`-prefix from `s` and the target satisfies `E[a U b]`, or the source
/// comes after a reachable live `b`-state and the target is live.
pub(crate) fn until_valid_edges(m: &KripkeModel, s: &str, a: &Formula, b: &Formula) -> (BTreeSet<Edge>, BTreeSet<String>) {
    let sat_a = sat_states(m, a);
    let prefix = guarded_reach(m, s, &sat_a);
    let live = sat_states(m, &Formula::eg(Formula::True));
    let sat_b = sat_states(m, b);
    let post = sat_states(m, &Formula::eu(a.clone(), b.clone()));
    let mut pre = BTreeSet::new();
    for h in prefix.iter().filter(|h| sat_b.contains(*h) && live.contains(*h)) {
        pre.extend(reachable_from(m, h));
    }
    let mut edges = BTreeSet::new();
    let mut states = BTreeSet::new();
    for (u, v) in m.transitions() {
        let head = prefix.contains(u) && sat_a.contains(u) && post.contains(v);
        if head || (pre.contains(u) && live.contains(v)) {
            edges.insert((u.clone(), v.clone()));
            states.insert(u.clone());
            states.insert(v.clone());
        }
    }
    (edges, states)
}

/// Simple lassos from `s` whose states all lie in `within`, as name lists.
fn lassos_within(m: &KripkeModel, s: &str, within: &BTreeSet<String>, limit: usize) -> Vec<(Vec<String>, Vec<String>)> {
    let g = Graph::new(m);
    let allowed: Vec<bool> = g.names.iter().map(|n| within.contains(*n)).collect();
    let live = g.eg(&allowed);
    let Some(&head) = g.index.get(s) else { return Vec::new() };
    let mut out = Vec::new();
    if !live[head] {
        return out;
    }
    enumerate_simple_lassos(&g, head, &live, &mut |(stem, cycle)| {
        let name = |v: &Vec<usize>| v.iter().map(|&i| g.names[i].to_string()).collect::<Vec<_>>();
        out.push((name(&stem), name(&cycle)));
        out.len() < limit
    });
    out
}

fn lasso_edges(stem: &[String], cycle: &[String]) -> Vec<Edge> {
    let seq: Vec<&String> = stem.iter().chain(cycle.iter()).collect();
    let mut out: Vec<Edge> = seq.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect();
    out.push((cycle[cycle.len() - 1].clone(), cycle[0].clone()));
    out
}

impl<'c> Engine<'c> {
    pub fn new(cfg: &'c UpdateConfig, base: &KripkeModel, f: &Formula) -> Engine<'c> {
        let recursion_cap = cfg.recursion_cap.unwrap_or(3 * f.size()).max(1);
        let loop_cap = base.state_count() + base.transitions().len() + cfg.max_new_states + 1;
        Engine { cfg, base: base.clone(), recursion_cap, loop_cap, expansions: 0, truncated: false }
    }

    fn exhausted(&mut self) -> bool {
        if self.expansions >= self.cfg.work_limit {
            self.truncated = true;
            true
        } else {
            false
        }
    }

    /// New-state and edit caps. Edits are counted as changed elements (one
    /// per added or removed state or transition and per relabelled state),
    /// so traces that touch an element twice are not penalised.
    pub fn within_budget(&self, w: &Work) -> bool {
        w.new_states() <= self.cfg.max_new_states
            && self.cfg.max_edits.is_none_or(|k| {
                let d = compute_diff(&self.base, &w.model);
                let edits = d.added_edges.len()
                    + d.removed_edges.len()
                    + d.relabeled.len()
                    + d.added_states.len()
                    + d.removed_states.len();
                edits <= k
            })
    }

    pub fn constraints_hold(m: &KripkeModel, cons: &[Constraint]) -> bool {
        cons.iter().all(|(f, anchor)| match anchor {
            Anchor::State(s) => holds(m, s, f),
            Anchor::Root => check_rooted(m, f),
        })
    }

    fn assignments(&self, current: &Label, f: &Formula) -> Vec<Label> {
        minimal_assignments(current, f, self.cfg.min_assignments_cap).unwrap_or_default()
    }

    /// Breadth-first "apply a step until the goal holds" loop shared by all
    /// temporal handlers. Models that satisfy the goal (and the constraints)
    /// are collected; the others are expanded by `step`.
    fn loop_until(&mut self, start: &Work, s: &str, goal: &Formula, cons: &[Constraint], step: &mut Step<'_>) -> Vec<Work> {
        let mut results = Results::default();
        let mut seen: HashSet<KripkeModel> = HashSet::from([start.model.clone()]);
        let mut layer = vec![start.clone()];
        let mut rounds = 0;
        while !layer.is_empty() {
            if rounds > self.loop_cap {
                self.truncated = true;
                break;
            }
            rounds += 1;
            let mut next = Vec::new();
            for w in layer {
                if !w.model.has_state(s) {
                    continue;
                }
                if holds(&w.model, s, goal) {
                    if Self::constraints_hold(&w.model, cons) {
                        results.add(w);
                    }
                    continue;
                }
                if self.exhausted() {
                    break;
                }
                self.expansions += 1;
                let children = step(self, &w);
                // Every materialised model counts as work, which bounds memory.
                self.expansions += children.len();
                for child in children {
                    if self.within_budget(&child) && seen.insert(child.model.clone()) {
                        next.push(child);
                    }
                }
            }
            layer = next;
        }
        results.into_vec()
    }

    /// Updates `w` so that `f` holds at `s`, keeping `cons`.
    pub fn update(&mut self, w: &Work, s: &str, f: &Formula, depth: usize, cons: &[Constraint]) -> Vec<Work> {
        if !w.model.has_state(s) {
            return Vec::new();
        }
        if holds(&w.model, s, f) {
            return if Self::constraints_hold(&w.model, cons) { vec![w.clone()] } else { Vec::new() };
        }
        if depth > self.recursion_cap {
            self.truncated = true;
            return Vec::new();
        }
        if self.exhausted() {
            return Vec::new();
        }
        if f.is_propositional() {
            return self.update_prop(w, s, f, cons);
        }
        match f {
            Formula::And(a, b) => self.update_and(w, s, a, b, depth, cons),
            Formula::Or(a, b) => self.update_or(w, s, a, b, depth, cons),
            Formula::EX(g) => self.update_ex(w, s, g, depth, cons),
            Formula::AF(g) if self.cfg.committed && g.is_propositional() => self.update_af_committed(w, s, g, depth, cons),
            Formula::AF(g) => self.update_af(w, s, g, depth, cons),
            Formula::EU(a, b) => self.update_eu(w, s, a, b, depth, cons),
            Formula::Not(inner) => match inner.as_ref() {
                Formula::EX(k) => self.update_ax(w, s, k, depth, cons),
                Formula::AF(x) => self.update_eg(w, s, &neg((**x).clone()), depth, cons),
                Formula::EU(a, b) => self.update_not_eu(w, s, a, b, depth, cons),
                Formula::And(a, b) => {
                    let g = Formula::or(neg((**a).clone()), neg((**b).clone()));
                    self.update(w, s, &g, depth, cons)
                }
                Formula::Or(a, b) => {
                    let g = Formula::and(neg((**a).clone()), neg((**b).clone()));
                    self.update(w, s, &g, depth, cons)
                }
                _ => self.renormalized(w, s, f, depth, cons),
            },
            _ => self.renormalized(w, s, f, depth, cons),
        }
    }

    fn renormalized(&mut self, w: &Work, s: &str, f: &Formula, depth: usize, cons: &[Constraint]) -> Vec<Work> {
        let g = normalize(f);
        if &g == f {
            Vec::new()
        } else {
            self.update(w, s, &g, depth, cons)
        }
    }

    /// PU3 at `s` with each minimal satisfying label.
    pub fn update_prop(&mut self, w: &Work, s: &str, f: &Formula, cons: &[Constraint]) -> Vec<Work> {
        if w.model.has_dummy() && s == DUMMY {
            return Vec::new();
        }
        // The cap applies to the labels that keep the constraints, so a
        // minimal label breaking one does not hide a viable alternative.
        let mut results = Results::default();
        let labels = minimal_assignments(w.model.label(s), f, ASSIGNMENT_SCAN).unwrap_or_default();
        let viable = labels
            .into_iter()
            .filter_map(|label| w.then(PrimitiveOp::Relabel { state: s.to_string(), label }))
            .filter(|next| self.within_budget(next) && Self::constraints_hold(&next.model, cons))
            .take(self.cfg.min_assignments_cap.max(1));
        results.extend(viable);
        results.into_vec()
    }

    /// `f1 ∧ f2`: update with `f1`, then with `f2` keeping `f1` at `s`.
    /// Without characterizations the opposite order is tried as well; with
    /// them only when the first order yields nothing.
    pub fn update_and(&mut self, w: &Work, s: &str, a: &Formula, b: &Formula, depth: usize, cons: &[Constraint]) -> Vec<Work> {
        let mut results = Results::default();
        let mut inner = cons.to_vec();
        inner.push((a.clone(), Anchor::State(s.to_string())));
        for first in self.update(w, s, a, depth + 1, cons) {
            results.extend(self.update(&first, s, b, depth + 1, &inner));
        }
        if !self.cfg.characterizations || results.map.is_empty() {
            // Repairing `b` may break an `a` that held only vacuously, or
            // keeping an already-true `a` may block every repair of `b`.
            let mut inner = cons.to_vec();
            inner.push((b.clone(), Anchor::State(s.to_string())));
            for first in self.update(w, s, b, depth + 1, cons) {
                results.extend(self.update(&first, s, a, depth + 1, &inner));
            }
        }
        results.into_vec()
    }

    /// `f1 ∨ f2`: the union of the updates for each disjunct.
    pub fn update_or(&mut self, w: &Work, s: &str, a: &Formula, b: &Formula, depth: usize, cons: &[Constraint]) -> Vec<Work> {
        let mut results = Results::default();
        results.extend(self.update(w, s, a, depth + 1, cons));
        results.extend(self.update(w, s, b, depth + 1, cons));
        results.into_vec()
    }

    /// `EX g`: (a) link `s` to a state satisfying `g`; (b) update a
    /// successor; (c) add a fresh successor satisfying `g`. Without
    /// characterizations also (d): link a non-successor and update it.
    pub fn update_ex(&mut self, w: &Work, s: &str, g: &Formula, depth: usize, cons: &[Constraint]) -> Vec<Work> {
        let goal = Formula::ex(g.clone());
        let exhaustive = !self.cfg.characterizations;
        self.loop_until(w, s, &goal, cons, &mut |eng, x| {
            let m = &x.model;
            let mut out = Vec::new();
            let sat_g = sat_states(m, g);
            let succ: BTreeSet<String> = m.succ_iter(s).cloned().collect();
            for t in non_dummy(m) {
                if !succ.contains(t) && sat_g.contains(t) {
                    out.extend(x.then(PrimitiveOp::AddEdge(edge(s, t))));
                }
            }
            for t in &succ {
                out.extend(eng.update(x, t, g, depth + 1, cons));
            }
            if x.new_states() < eng.cfg.max_new_states {
                let fresh = m.fresh_state_name();
                if g.is_propositional() {
                    let labels = eng.assignments(&Label::new(), g);
                    let take = if exhaustive { 1 } else { labels.len() };
                    for label in labels.into_iter().take(take) {
                        out.extend(x.then_all([
                            PrimitiveOp::AddState { state: fresh.clone(), label },
                            PrimitiveOp::AddEdge(edge(s, &fresh)),
                        ]));
                    }
                } else if let Some(y) = x.then_all([
                    PrimitiveOp::AddState { state: fresh.clone(), label: Label::new() },
                    PrimitiveOp::AddEdge(edge(s, &fresh)),
                ]) {
                    out.extend(eng.update(&y, &fresh, g, depth + 1, cons));
                }
            }
            if exhaustive {
                for t in non_dummy(m) {
                    if !succ.contains(t) && !sat_g.contains(t) {
                        if let Some(y) = x.then(PrimitiveOp::AddEdge(edge(s, t))) {
                            out.extend(eng.update(&y, t, g, depth + 1, cons));
                        }
                    }
                }
            }
            out
        })
    }

    /// `¬EX k` (that is, `AX ¬k`): for the first successor satisfying `k`,
    /// remove the transition or update the successor with `¬k`.
    pub fn update_ax(&mut self, w: &Work, s: &str, k: &Formula, depth: usize, cons: &[Constraint]) -> Vec<Work> {
        let goal = Formula::not(Formula::ex(k.clone()));
        let not_k = neg(k.clone());
        self.loop_until(w, s, &goal, cons, &mut |eng, x| {
            let sat_k = sat_states(&x.model, k);
            let Some(t) = x.model.succ_iter(s).find(|t| sat_k.contains(*t)).cloned() else {
                return Vec::new();
            };
            let mut out: Vec<Work> = x.then(PrimitiveOp::RemoveEdge(edge(s, &t))).into_iter().collect();
            out.extend(eng.update(x, &t, &not_k, depth + 1, cons));
            out
        })
    }

    /// `AF g`. With characterizations: when nothing satisfies `g`, update a
    /// reachable state; otherwise, for the false lassos from `s`, (a) update
    /// one of their states or (b) remove one of their transitions that no
    /// satisfying path needs and whose removal keeps every state of such a
    /// path reachable. Without characterizations: branch over every state
    /// and transition of one false lasso.
    pub fn update_af(&mut self, w: &Work, s: &str, g: &Formula, depth: usize, cons: &[Constraint]) -> Vec<Work> {
        let goal = Formula::af(g.clone());
        let paper = self.cfg.characterizations;
        self.loop_until(w, s, &goal, cons, &mut |eng, x| {
            let m = &x.model;
            let sat_g = sat_states(m, g);
            let mut out = Vec::new();
            if paper && !non_dummy(m).any(|t| sat_g.contains(t)) {
                for r in reachable_from(m, s) {
                    if !(m.has_dummy() && r == DUMMY) {
                        out.extend(eng.update(x, &r, g, depth + 1, cons));
                    }
                }
                if !out.is_empty() {
                    return out;
                }
                // No state can take `g`; the formula can then only hold
                // vacuously, so fall through to cutting the false lassos.
            }
            let not_g: BTreeSet<String> = m.states().filter(|t| !sat_g.contains(*t)).cloned().collect();
            let sample = if paper { LASSO_SAMPLE } else { 1 };
            let lassos = lassos_within(m, s, &not_g, sample);
            let mut states = BTreeSet::new();
            let mut edges = BTreeSet::new();
            for (stem, cycle) in &lassos {
                states.extend(stem.iter().chain(cycle.iter()).cloned());
                edges.extend(lasso_edges(stem, cycle));
            }
            for u in &states {
                out.extend(eng.update(x, u, g, depth + 1, cons));
            }
            let (valid_edges, valid_states) = if paper { until_valid_edges(m, s, &Formula::True, g) } else { Default::default() };
            for e in edges {
                if valid_edges.contains(&e) {
                    continue;
                }
                if let Some(y) = x.then(PrimitiveOp::RemoveEdge(e)) {
                    if paper {
                        let reach = reachable_from(&y.model, s);
                        if !valid_states.iter().all(|v| reach.contains(v)) {
                            continue;
                        }
                    }
                    out.push(y);
                }
            }
            out
        })
    }

    /// Committed `AF g` for propositional `g`: relabel the state shared by
    /// the most false lassos (ties broken by name), or remove the first
    /// transition `(s, s1)` of a false lasso when `s1` stays reachable
    /// through a path that meets `g`.
    pub fn update_af_committed(&mut self, w: &Work, s: &str, g: &Formula, depth: usize, cons: &[Constraint]) -> Vec<Work> {
        let goal = Formula::af(g.clone());
        self.loop_until(w, s, &goal, cons, &mut |eng, x| {
            let m = &x.model;
            let sat_g = sat_states(m, g);
            let not_g: BTreeSet<String> = m.states().filter(|t| !sat_g.contains(*t)).cloned().collect();
            let lassos = lassos_within(m, s, &not_g, 4 * LASSO_SAMPLE);
            let mut counts: BTreeMap<String, usize> = BTreeMap::new();
            let mut firsts = BTreeSet::new();
            for (stem, cycle) in &lassos {
                let seq: Vec<&String> = stem.iter().chain(cycle.iter()).collect();
                let on_path: BTreeSet<&String> = seq.iter().skip(1).copied().chain(cycle.iter()).collect();
                for st in on_path {
                    if st != s || lassos.iter().all(|(st2, _)| st2.is_empty()) {
                        *counts.entry(st.clone()).or_default() += 1;
                    }
                }
                if seq.len() > 1 {
                    firsts.insert(seq[1].clone());
                } else {
                    firsts.insert(cycle[0].clone());
                }
            }
            let mut out = Vec::new();
            if let Some(best) = counts.values().max().copied() {
                let chosen = counts.iter().find(|(_, c)| **c == best).map(|(st, _)| st.clone());
                if let Some(v) = chosen {
                    out.extend(eng.update(x, &v, g, depth + 1, cons));
                }
            }
            for s1 in firsts {
                let Some(y) = x.then(PrimitiveOp::RemoveEdge(edge(s, &s1))) else { continue };
                let after = &y.model;
                let sat_after = sat_states(after, g);
                let mut hits = BTreeSet::new();
                for t in after.succ_iter(s) {
                    for h in reachable_from(after, t) {
                        if sat_after.contains(&h) {
                            hits.insert(h);
                        }
                    }
                }
                if hits.iter().any(|h| reachable_from(after, h).contains(&s1)) {
                    out.push(y);
                }
            }
            out
        })
    }

    /// `E[a U b]`. With characterizations: when `s` satisfies neither
    /// argument, first update `s` with `a`; then (a/b) link a state on an
    /// `a`-prefix from `s` to a state satisfying the until, or insert a
    /// fresh `b`-state after such a prefix. Without characterizations:
    /// branch over relabelling prefix states with `a` or `b`, adding any
    /// transition from a reachable state, or attaching a fresh `b`-state.
    pub fn update_eu(&mut self, w: &Work, s: &str, a: &Formula, b: &Formula, depth: usize, cons: &[Constraint]) -> Vec<Work> {
        let goal = Formula::eu(a.clone(), b.clone());
        let paper = self.cfg.characterizations;
        self.loop_until(w, s, &goal, cons, &mut |eng, x| {
            let m = &x.model;
            let sat_a = sat_states(m, a);
            let sat_b = sat_states(m, b);
            let mut out = Vec::new();
            if paper && !sat_a.contains(s) && !sat_b.contains(s) {
                let first = eng.update(x, s, a, depth + 1, cons);
                // When `a` cannot hold at `s`, only `b` can start the path.
                return if first.is_empty() { eng.update(x, s, b, depth + 1, cons) } else { first };
            }
            let areach = guarded_reach(m, s, &sat_a);
            let prefix: Vec<&String> = areach.iter().filter(|u| sat_a.contains(*u)).collect();
            let fresh_ok = x.new_states() < eng.cfg.max_new_states;
            let fresh = m.fresh_state_name();
            let fresh_labels = if b.is_propositional() { eng.assignments(&Label::new(), b) } else { vec![Label::new()] };
            let live = sat_states(m, &Formula::eg(Formula::True));
            if paper {
                let sat_goal = sat_states(m, &goal);
                for u in &prefix {
                    for t in &sat_goal {
                        if t != *u && !m.has_edge(u, t) {
                            out.extend(x.then(PrimitiveOp::AddEdge(edge(u, t))));
                        }
                    }
                }
                if sat_b.contains(s) && !live.contains(s) {
                    for t in live.iter().chain(std::iter::once(&s.to_string())) {
                        out.extend(x.then(PrimitiveOp::AddEdge(edge(s, t))));
                    }
                }
                if fresh_ok {
                    for u in &prefix {
                        let targets: Vec<String> = m.succ_iter(u).filter(|v| live.contains(*v)).cloned().collect();
                        let exits = if targets.is_empty() { vec![fresh.clone()] } else { targets };
                        for v in exits {
                            for label in &fresh_labels {
                                let ops = [
                                    PrimitiveOp::AddState { state: fresh.clone(), label: label.clone() },
                                    PrimitiveOp::AddEdge(edge(u, &fresh)),
                                    PrimitiveOp::AddEdge(edge(&fresh, &v)),
                                ];
                                let Some(y) = x.then_all(ops) else { continue };
                                if b.is_propositional() {
                                    out.push(y);
                                } else {
                                    out.extend(eng.update(&y, &fresh, b, depth + 1, cons));
                                }
                            }
                        }
                    }
                }
                return out;
            }
            for u in &areach {
                out.extend(eng.update(x, u, b, depth + 1, cons));
                if !sat_a.contains(u) {
                    out.extend(eng.update(x, u, a, depth + 1, cons));
                }
            }
            let reach = reachable_from(m, s);
            for u in reach.iter().filter(|u| !(m.has_dummy() && u.as_str() == DUMMY)) {
                for t in non_dummy(m) {
                    if !m.has_edge(u, t) {
                        out.extend(x.then(PrimitiveOp::AddEdge(edge(u, t))));
                    }
                }
            }
            if fresh_ok {
                for u in &prefix {
                    if let Some(label) = fresh_labels.first() {
                        out.extend(x.then_all([
                            PrimitiveOp::AddState { state: fresh.clone(), label: label.clone() },
                            PrimitiveOp::AddEdge(edge(u, &fresh)),
                        ]));
                    }
                }
            }
            out
        })
    }

    /// A lasso from `s` minimising the number of distinct states violating
    /// `h` (computed over a bounded sample of simple lassos).
    fn min_violation_lasso(m: &KripkeModel, s: &str, sat_h: &BTreeSet<String>) -> Option<Vec<String>> {
        let all: BTreeSet<String> = m.states().cloned().collect();
        lassos_within(m, s, &all, 64 * LASSO_SAMPLE)
            .into_iter()
            .map(|(stem, cycle)| {
                let bad: Vec<String> = stem
                    .iter()
                    .chain(cycle.iter())
                    .filter(|t| !sat_h.contains(*t))
                    .cloned()
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect();
                bad
            })
            .min_by(|a, b| (a.len(), a).cmp(&(b.len(), b)))
    }

    /// `EG h` (reached as `¬AF ¬h`). First make `s` satisfy `h`. With
    /// characterizations and propositional `h`: close an `h`-prefix from `s`
    /// into a state satisfying `EG h` or back into the prefix, bridge through
    /// a fresh `h`-state, or relabel every violating state of a path with the
    /// fewest violations. Otherwise: relabel prefix states, add any transition
    /// from an `h`-prefix state, or attach a fresh `h`-state.
    pub fn update_eg(&mut self, w: &Work, s: &str, h: &Formula, depth: usize, cons: &[Constraint]) -> Vec<Work> {
        let goal = Formula::not(Formula::af(neg(h.clone())));
        let paper = self.cfg.characterizations && h.is_propositional();
        self.loop_until(w, s, &goal, cons, &mut |eng, x| {
            let m = &x.model;
            let sat_h = sat_states(m, h);
            if !sat_h.contains(s) {
                return eng.update(x, s, h, depth + 1, cons);
            }
            let hreach = guarded_reach(m, s, &sat_h);
            let prefix: Vec<&String> = hreach.iter().filter(|u| sat_h.contains(*u)).collect();
            let fresh_ok = x.new_states() < eng.cfg.max_new_states;
            let fresh = m.fresh_state_name();
            let fresh_label = if h.is_propositional() { eng.assignments(&Label::new(), h).into_iter().next() } else { None };
            let mut out = Vec::new();
            if paper {
                let egs = sat_states(m, &Formula::eg(h.clone()));
                for u in &prefix {
                    for t in egs.iter().chain(prefix.iter().copied()).collect::<BTreeSet<_>>() {
                        if !m.has_edge(u, t) && !(m.has_dummy() && t == DUMMY) {
                            out.extend(x.then(PrimitiveOp::AddEdge(edge(u, t))));
                        }
                    }
                }
                if let (true, Some(label)) = (fresh_ok, fresh_label.clone()) {
                    let exits: Vec<String> = if egs.is_empty() { vec![fresh.clone()] } else { egs.iter().cloned().collect() };
                    for u in &prefix {
                        for v in &exits {
                            out.extend(x.then_all([
                                PrimitiveOp::AddState { state: fresh.clone(), label: label.clone() },
                                PrimitiveOp::AddEdge(edge(u, &fresh)),
                                PrimitiveOp::AddEdge(edge(&fresh, v)),
                            ]));
                        }
                    }
                }
                if let Some(bad) = Self::min_violation_lasso(m, s, &sat_h) {
                    let mut ops = Vec::new();
                    for v in &bad {
                        if let Some(label) = eng.assignments(m.label(v), h).into_iter().next() {
                            ops.push(PrimitiveOp::Relabel { state: v.clone(), label });
                        }
                    }
                    if !ops.is_empty() {
                        out.extend(x.then_all(ops));
                    }
                }
                return out;
            }
            for u in &hreach {
                if !sat_h.contains(u) {
                    out.extend(eng.update(x, u, h, depth + 1, cons));
                }
            }
            for u in &prefix {
                for t in non_dummy(m) {
                    if !m.has_edge(u, t) {
                        out.extend(x.then(PrimitiveOp::AddEdge(edge(u, t))));
                    }
                }
            }
            if fresh_ok {
                for u in &prefix {
                    let label = fresh_label.clone().unwrap_or_default();
                    let Some(y) = x.then_all([
                        PrimitiveOp::AddState { state: fresh.clone(), label },
                        PrimitiveOp::AddEdge(edge(u, &fresh)),
                    ]) else {
                        continue;
                    };
                    if h.is_propositional() {
                        out.push(y);
                    } else {
                        out.extend(eng.update(&y, &fresh, h, depth + 1, cons));
                    }
                }
            }
            out
        })
    }

    /// `¬E[a U b]`. With characterizations and `a = ⊤` (the `AG ¬b` shape):
    /// take the first false state — one satisfying `b` with an infinite
    /// path — reached from `s` through non-false states, and either remove
    /// one transition into it from such a state or update it with `¬b`
    /// (failing that, cut its transitions to live states). Otherwise: take a shortest witness path plus a continuation lasso and
    /// branch over removing any of its transitions, updating a prefix state
    /// with `¬a`, or updating its last state with `¬b`.
    pub fn update_not_eu(&mut self, w: &Work, s: &str, a: &Formula, b: &Formula, depth: usize, cons: &[Constraint]) -> Vec<Work> {
        let goal = Formula::not(Formula::eu(a.clone(), b.clone()));
        let paper = self.cfg.characterizations && *a == Formula::True;
        let not_a = neg(a.clone());
        let not_b = neg(b.clone());
        self.loop_until(w, s, &goal, cons, &mut |eng, x| {
            let m = &x.model;
            let live = sat_states(m, &Formula::eg(Formula::True));
            let sat_b = sat_states(m, b);
            let falsy: BTreeSet<String> = sat_b.intersection(&live).cloned().collect();
            let mut out = Vec::new();
            if paper {
                let good: BTreeSet<String> = m.states().filter(|t| !falsy.contains(*t)).cloned().collect();
                let reached = guarded_reach(m, s, &good);
                let Some(v) = reached.iter().find(|t| falsy.contains(*t)).cloned() else {
                    return out;
                };
                for u in reached.iter().filter(|u| good.contains(*u) && m.has_edge(u, &v)) {
                    out.extend(x.then(PrimitiveOp::RemoveEdge(edge(u, &v))));
                }
                let relabelled = eng.update(x, &v, &not_b, depth + 1, cons);
                if relabelled.is_empty() {
                    // A target only counts while it has an infinite path, so
                    // when it cannot be relabelled, cut its transitions to
                    // live states instead.
                    for t in m.succ_iter(&v).filter(|t| live.contains(*t)) {
                        out.extend(x.then(PrimitiveOp::RemoveEdge(edge(&v, t))));
                    }
                }
                out.extend(relabelled);
                return out;
            }
            let sat_a = sat_states(m, a);
            let Some(path) = Self::shortest_until_path(m, s, &sat_a, &falsy) else {
                return out;
            };
            let last = path.last().expect("witness paths are nonempty").clone();
            let all: BTreeSet<String> = m.states().cloned().collect();
            let mut edges: BTreeSet<Edge> = path.windows(2).map(|p| (p[0].clone(), p[1].clone())).collect();
            if let Some((stem, cycle)) = lassos_within(m, &last, &all, 1).into_iter().next() {
                edges.extend(lasso_edges(&stem, &cycle));
            }
            for e in edges {
                out.extend(x.then(PrimitiveOp::RemoveEdge(e)));
            }
            for u in &path[..path.len() - 1] {
                out.extend(eng.update(x, u, &not_a, depth + 1, cons));
            }
            out.extend(eng.update(x, &last, &not_b, depth + 1, cons));
            out
        })
    }

    /// Shortest path from `s` through `through` states ending in `target`
    /// (breadth-first, successors in name order).
    fn shortest_until_path(
        m: &KripkeModel,
        s: &str,
        through: &BTreeSet<String>,
        target: &BTreeSet<String>,
    ) -> Option<Vec<String>> {
        let mut parent: BTreeMap<String, String> = BTreeMap::new();
        let mut seen = BTreeSet::from([s.to_string()]);
        let mut queue = VecDeque::from([s.to_string()]);
        while let Some(u) = queue.pop_front() {
            if target.contains(&u) {
                let mut path = vec![u.clone()];
                let mut cur = u;
                while let Some(p) = parent.get(&cur) {
                    path.push(p.clone());
                    cur = p.clone();
                }
                path.reverse();
                return Some(path);
            }
            if !through.contains(&u) {
                continue;
            }
            for v in m.succ_iter(&u) {
                if seen.insert(v.clone()) {
                    parent.insert(v.clone(), u.clone());
                    queue.push_back(v.clone());
                }
            }
        }
        None
    }
}
