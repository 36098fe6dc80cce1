//! Minimal-change update of Kripke models with CTL formulas.
//!
//! [`ctl_update`] repairs a pointed model so that a formula holds at its
//! start state; [`ctl_update_rooted`] repairs a whole model so that the
//! formula holds at every initial state (through a dummy root `#` whose
//! successors are the initial states). Every nondeterministic choice of the
//! repair procedure is expanded, producing a deterministic, deduplicated
//! candidate set that [`filter_admissible`] and [`filter_committed`] narrow
//! down to the admissible and committed repairs.

mod engine;
mod fast;
pub mod ops;

use std::collections::BTreeSet;

use itertools::Itertools;
use thiserror::Error;

use crate::checker::{check_rooted, holds};
use crate::diff::{compute_diff, pareto_minimal, pointed_diff, DiffVector};
use crate::formula::{normalize, Formula};
use crate::kripke::{reachable_from, KripkeModel, ModelError, PointedModel, DUMMY};

use engine::{Anchor, Constraint, Engine, Results, Work};
pub use fast::fast_path_aeclass;
pub use ops::{apply, minimal_assignments, replay, OpError, PrimitiveOp, UnsatisfiableLabel};

/// Atom count up to which a fresh start state is tried with every label.
const FRESH_LABEL_ATOMS: usize = 4;

/// Knobs bounding the candidate enumeration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpdateConfig {
    /// Maximum number of PU4 (fresh states) per candidate.
    pub max_new_states: usize,
    /// Maximum number of candidates kept (smallest diffs first); `None`
    /// keeps all of them.
    pub max_candidates: Option<usize>,
    /// Maximum recursion depth; `None` means three times the formula size.
    pub recursion_cap: Option<usize>,
    /// Use the committed-update handler for `AF` of a propositional formula.
    pub committed: bool,
    /// Extra formulas every candidate must satisfy (at the start state, or at
    /// every initial state in rooted mode).
    pub constraints: Vec<Formula>,
    /// How many minimal labels are tried per relabelling.
    pub min_assignments_cap: usize,
    /// Follow the published handlers (true) or branch over every edit that
    /// breaks the current counterexample or extends the current witness.
    pub characterizations: bool,
    /// Pointed mode only: allow the candidate's start state to differ from
    /// the base's (any existing state, or one new state). Moving the start
    /// counts as a change of the dummy root's edge.
    pub start_switch: bool,
    /// Total work (handler expansions plus intermediate models generated)
    /// before the search gives up.
    pub work_limit: usize,
    /// Optional bound on the number of changed elements per candidate (one
    /// per added or removed state or transition and per relabelled state).
    pub max_edits: Option<usize>,
}

impl Default for UpdateConfig {
    fn default() -> Self {
        UpdateConfig {
            max_new_states: 2,
            max_candidates: Some(256),
            recursion_cap: None,
            committed: false,
            constraints: Vec::new(),
            min_assignments_cap: 1,
            characterizations: true,
            start_switch: false,
            work_limit: 200_000,
            max_edits: None,
        }
    }
}

/// One repaired model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpdateCandidate {
    /// The repaired model (with the dummy root in rooted mode).
    pub model: KripkeModel,
    /// Start state of the repaired pointed model.
    pub start: String,
    /// Operations turning the base into `model`.
    pub trace: Vec<PrimitiveOp>,
    /// Difference from the base model; a changed start state counts as a
    /// moved edge of the dummy root (see [`pointed_diff`]).
    pub diff: DiffVector,
}

impl UpdateCandidate {
    /// The repaired model without the dummy root.
    pub fn user_model(&self) -> KripkeModel {
        self.model.without_dummy()
    }

    /// The repaired pointed model.
    pub fn pointed(&self) -> PointedModel {
        PointedModel { model: self.model.clone(), start: self.start.clone() }
    }
}

/// Result of an update run.
#[derive(Debug, Clone)]
pub struct UpdateOutcome {
    /// The base pointed model (with start `#` in rooted mode).
    pub base: PointedModel,
    /// The update formula.
    pub formula: Formula,
    /// All generated candidates, smallest diffs first.
    pub candidates: Vec<UpdateCandidate>,
    /// True when a cap or the work limit cut the enumeration short.
    pub truncated: bool,
}

impl UpdateOutcome {
    /// Indices of the candidates not strictly dominated by another one.
    pub fn admissible(&self) -> Vec<usize> {
        let diffs: Vec<DiffVector> = self.candidates.iter().map(|c| c.diff.clone()).collect();
        pareto_minimal(&diffs)
    }

    /// Indices of the admissible candidates whose unchanged reachable set is
    /// not strictly contained in another admissible candidate's.
    pub fn committed(&self) -> Vec<usize> {
        let adm = self.admissible();
        let sets: Vec<BTreeSet<String>> =
            adm.iter().map(|&i| unchanged_reachable(&self.base, &self.candidates[i])).collect();
        committed_indices(&sets).into_iter().map(|k| adm[k]).collect()
    }
}

/// Failures of the update procedures.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UpdateError {
    /// No model satisfies the formula (and the constraints).
    #[error("formula is unsatisfiable: {0}")]
    Unsatisfiable(String),
    /// The formula is satisfiable (or undecided), but no candidate was
    /// found within the configured caps.
    #[error("no candidate found within the configured caps for '{0}'")]
    Budget(String),
    /// The formula does not have the shape the operation requires.
    #[error("formula '{formula}' is not of the form {expected}")]
    WrongShape { formula: String, expected: &'static str },
    /// The start state is not a state of the model.
    #[error("unknown start state '{0}'")]
    UnknownState(String),
    /// The base model is unusable.
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Repairs `(M, s0)` so that `f` holds at the start state.
///
/// Returns exactly the identity candidate when `f` already holds at the
/// start state. With `cfg.start_switch`, repairs at every other start state
/// (including a new one) compete with those at the given start.
pub fn ctl_update(pm: &PointedModel, f: &Formula, cfg: &UpdateConfig) -> Result<UpdateOutcome, UpdateError> {
    let m = &pm.model;
    if !m.has_state(&pm.start) {
        return Err(UpdateError::UnknownState(pm.start.clone()));
    }
    let cons_at = |s: &str| -> Vec<Constraint> {
        cfg.constraints.iter().map(|c| (c.clone(), Anchor::State(s.to_string()))).collect()
    };
    let goal = normalize(f);
    let mut engine = Engine::new(cfg, m, &goal);
    let base = Work::new(m.clone());
    let mut found: Vec<(String, Work)> = Vec::new();
    if holds(m, &pm.start, f) && Engine::constraints_hold(m, &cons_at(&pm.start)) {
        found.push((pm.start.clone(), base.clone()));
    } else if cfg.start_switch {
        // Every state may serve as the start; moving the start is itself a
        // change, so staying at a satisfying state competes with repairs.
        for t in m.states().filter(|t| t.as_str() != DUMMY) {
            if holds(m, t, f) && Engine::constraints_hold(m, &cons_at(t)) {
                found.push((t.clone(), base.clone()));
                continue;
            }
            for w in engine.update(&base, t, &goal, 0, &cons_at(t)) {
                found.push((t.clone(), w));
            }
        }
        // A new, unconnected state is a start state too. Its label is free
        // (it is not a relabelling), so every label over the formula's atoms
        // is tried when there are few of them.
        let fresh = m.fresh_state_name();
        let atoms: Vec<String> = goal.atoms().into_iter().collect();
        let labels: Vec<BTreeSet<String>> = if atoms.len() <= FRESH_LABEL_ATOMS {
            atoms.iter().cloned().powerset().map(|l| l.into_iter().collect()).collect()
        } else {
            vec![BTreeSet::new()]
        };
        for label in labels {
            let op = PrimitiveOp::AddState { state: fresh.clone(), label };
            if let Some(w) = base.then(op).filter(|w| engine.within_budget(w)) {
                for w in engine.update(&w, &fresh, &goal, 0, &cons_at(&fresh)) {
                    found.push((fresh.clone(), w));
                }
            }
        }
    } else {
        for w in engine.update(&base, &pm.start, &goal, 0, &cons_at(&pm.start)) {
            found.push((pm.start.clone(), w));
        }
    }
    let found = found
        .into_iter()
        .filter(|(s, w)| holds(&w.model, s, f) && Engine::constraints_hold(&w.model, &cons_at(s)))
        .collect();
    finish(pm.clone(), f, cfg, found, engine.truncated)
}

/// Repairs a whole model so that `f` holds at every initial state. The
/// initial states are repaired one after the other (in name order); each
/// later repair keeps the formula true at the earlier ones. The set of
/// initial states is never changed.
pub fn ctl_update_rooted(m: &KripkeModel, f: &Formula, cfg: &UpdateConfig) -> Result<UpdateOutcome, UpdateError> {
    let rooted = if m.has_dummy() { m.clone() } else { m.with_dummy()? };
    let base = PointedModel { model: rooted.clone(), start: DUMMY.to_string() };
    let goal = normalize(f);
    let mut engine = Engine::new(cfg, &rooted, &goal);
    let user: Vec<Constraint> = cfg.constraints.iter().map(|c| (c.clone(), Anchor::Root)).collect();
    let inits: Vec<String> = rooted.init().iter().cloned().collect();
    let mut frontier = vec![Work::new(rooted.clone())];
    for (k, init) in inits.iter().enumerate() {
        let mut cons = user.clone();
        cons.extend(inits[..k].iter().map(|p| (f.clone(), Anchor::State(p.clone()))));
        let mut next = Results::default();
        for w in &frontier {
            next.extend(engine.update(w, init, &goal, 0, &cons));
        }
        frontier = next.into_vec();
    }
    let found = frontier
        .into_iter()
        .filter(|w| check_rooted(&w.model, f) && Engine::constraints_hold(&w.model, &user))
        .map(|w| (DUMMY.to_string(), w))
        .collect();
    finish(base, f, cfg, found, engine.truncated)
}

fn finish(
    base: PointedModel,
    f: &Formula,
    cfg: &UpdateConfig,
    found: Vec<(String, Work)>,
    mut truncated: bool,
) -> Result<UpdateOutcome, UpdateError> {
    let mut candidates = to_candidates(&base, found);
    if let Some(cap) = cfg.max_candidates {
        if candidates.len() > cap {
            candidates.truncate(cap);
            truncated = true;
        }
    }
    if candidates.is_empty() {
        let mut all = f.clone();
        for c in &cfg.constraints {
            all = Formula::and(all, c.clone());
        }
        return Err(match satisfiable_within(&all, 3) {
            Some(false) => {
                UpdateError::Unsatisfiable(format!("'{all}' has no model with at most 3 states"))
            }
            _ => UpdateError::Budget(f.to_string()),
        });
    }
    Ok(UpdateOutcome { base, formula: f.clone(), candidates, truncated })
}

/// Deduplicates by (start, model), keeping the shortest trace, and sorts by
/// diff size, trace length, start and model.
fn to_candidates(base: &PointedModel, found: Vec<(String, Work)>) -> Vec<UpdateCandidate> {
    let mut best: std::collections::BTreeMap<(String, KripkeModel), Vec<PrimitiveOp>> = Default::default();
    for (start, w) in found {
        let key = (start, w.model);
        match best.get(&key) {
            Some(t) if (t.len(), t) <= (w.trace.len(), &w.trace) => {}
            _ => {
                best.insert(key, w.trace);
            }
        }
    }
    let mut out: Vec<UpdateCandidate> = best
        .into_iter()
        .map(|((start, model), trace)| {
            let canonical = canonical_trace(&model, &compute_diff(&base.model, &model));
            let trace = match replay(&base.model, &canonical) {
                Ok(m) if m == model && canonical.len() <= trace.len() => canonical,
                _ => trace,
            };
            let diff = pointed_diff(base, &PointedModel { model: model.clone(), start: start.clone() });
            UpdateCandidate { model, start, trace, diff }
        })
        .collect();
    out.sort_by(|a, b| {
        (a.diff.size(), a.trace.len(), &a.start, &a.model).cmp(&(b.diff.size(), b.trace.len(), &b.start, &b.model))
    });
    out
}

/// One operation per changed element, in an order whose preconditions always
/// hold: new states, added transitions, relabellings, removed transitions,
/// removed states. Collapses engine traces that touch an element twice.
fn canonical_trace(model: &KripkeModel, diff: &DiffVector) -> Vec<PrimitiveOp> {
    let mut ops = Vec::new();
    for s in &diff.added_states {
        ops.push(PrimitiveOp::AddState { state: s.clone(), label: model.label(s).clone() });
    }
    ops.extend(diff.added_edges.iter().cloned().map(PrimitiveOp::AddEdge));
    for s in diff.relabeled.keys() {
        ops.push(PrimitiveOp::Relabel { state: s.clone(), label: model.label(s).clone() });
    }
    ops.extend(diff.removed_edges.iter().cloned().map(PrimitiveOp::RemoveEdge));
    ops.extend(diff.removed_states.iter().cloned().map(PrimitiveOp::RemoveState));
    ops
}

/// Runs a single handler on `(M, s0)` after checking the formula's shape.
fn run_handler(
    pm: &PointedModel,
    f: &Formula,
    cfg: &UpdateConfig,
    shape_ok: bool,
    expected: &'static str,
    handler: impl FnOnce(&mut Engine<'_>, &Work, &str, &[Constraint]) -> Vec<Work>,
) -> Result<Vec<UpdateCandidate>, UpdateError> {
    if !shape_ok {
        return Err(UpdateError::WrongShape { formula: f.to_string(), expected });
    }
    if !pm.model.has_state(&pm.start) {
        return Err(UpdateError::UnknownState(pm.start.clone()));
    }
    let cons: Vec<Constraint> =
        cfg.constraints.iter().map(|c| (c.clone(), Anchor::State(pm.start.clone()))).collect();
    let base = Work::new(pm.model.clone());
    let mut engine = Engine::new(cfg, &pm.model, f);
    let works = if holds(&pm.model, &pm.start, f) {
        if Engine::constraints_hold(&pm.model, &cons) {
            vec![base]
        } else {
            Vec::new()
        }
    } else {
        handler(&mut engine, &base, &pm.start, &cons)
    };
    let found = works
        .into_iter()
        .filter(|w| holds(&w.model, &pm.start, f))
        .map(|w| (pm.start.clone(), w))
        .collect();
    Ok(to_candidates(pm, found))
}

/// Propositional update: one PU3 at the start per minimal label.
pub fn update_prop(pm: &PointedModel, f: &Formula, cfg: &UpdateConfig) -> Result<Vec<UpdateCandidate>, UpdateError> {
    run_handler(pm, f, cfg, f.is_propositional(), "a propositional formula", |e, w, s, c| e.update_prop(w, s, f, c))
}

/// `EX g` update: link to a `g`-state, update a successor, or add a fresh
/// `g`-successor.
pub fn update_ex(pm: &PointedModel, f: &Formula, cfg: &UpdateConfig) -> Result<Vec<UpdateCandidate>, UpdateError> {
    let Formula::EX(g) = f else { return run_handler(pm, f, cfg, false, "EX f", |_, _, _, _| Vec::new()) };
    run_handler(pm, f, cfg, true, "EX f", |e, w, s, c| e.update_ex(w, s, &normalize(g), 0, c))
}

/// `AF g` update: break every path that never meets `g`.
pub fn update_af(pm: &PointedModel, f: &Formula, cfg: &UpdateConfig) -> Result<Vec<UpdateCandidate>, UpdateError> {
    let Formula::AF(g) = f else { return run_handler(pm, f, cfg, false, "AF f", |_, _, _, _| Vec::new()) };
    run_handler(pm, f, cfg, true, "AF f", |e, w, s, c| e.update_af(w, s, &normalize(g), 0, c))
}

/// Committed `AF g` update for propositional `g`.
pub fn update_af_committed(pm: &PointedModel, f: &Formula, cfg: &UpdateConfig) -> Result<Vec<UpdateCandidate>, UpdateError> {
    let Formula::AF(g) = f else {
        return run_handler(pm, f, cfg, false, "AF f with propositional f", |_, _, _, _| Vec::new());
    };
    run_handler(pm, f, cfg, g.is_propositional(), "AF f with propositional f", |e, w, s, c| {
        e.update_af_committed(w, s, g, 0, c)
    })
}

/// `E[a U b]` update.
pub fn update_eu(pm: &PointedModel, f: &Formula, cfg: &UpdateConfig) -> Result<Vec<UpdateCandidate>, UpdateError> {
    let Formula::EU(a, b) = f else { return run_handler(pm, f, cfg, false, "E[f U g]", |_, _, _, _| Vec::new()) };
    run_handler(pm, f, cfg, true, "E[f U g]", |e, w, s, c| e.update_eu(w, s, &normalize(a), &normalize(b), 0, c))
}

/// `a ∧ b` update: update with `a`, then with `b` keeping `a`.
pub fn update_and(pm: &PointedModel, f: &Formula, cfg: &UpdateConfig) -> Result<Vec<UpdateCandidate>, UpdateError> {
    let Formula::And(a, b) = f else { return run_handler(pm, f, cfg, false, "f ∧ g", |_, _, _, _| Vec::new()) };
    run_handler(pm, f, cfg, true, "f ∧ g", |e, w, s, c| {
        if f.is_propositional() {
            e.update_prop(w, s, f, c)
        } else {
            e.update_and(w, s, &normalize(a), &normalize(b), 0, c)
        }
    })
}

/// `a ∨ b` update: the union of the updates for each disjunct.
pub fn update_or(pm: &PointedModel, f: &Formula, cfg: &UpdateConfig) -> Result<Vec<UpdateCandidate>, UpdateError> {
    let Formula::Or(a, b) = f else { return run_handler(pm, f, cfg, false, "f ∨ g", |_, _, _, _| Vec::new()) };
    run_handler(pm, f, cfg, true, "f ∨ g", |e, w, s, c| {
        if f.is_propositional() {
            e.update_prop(w, s, f, c)
        } else {
            e.update_or(w, s, &normalize(a), &normalize(b), 0, c)
        }
    })
}

/// `¬g` update: the negation is pushed inwards and dispatched.
pub fn update_not(pm: &PointedModel, f: &Formula, cfg: &UpdateConfig) -> Result<Vec<UpdateCandidate>, UpdateError> {
    let shape = matches!(f, Formula::Not(_));
    run_handler(pm, f, cfg, shape, "¬f", |e, w, s, c| e.update(w, s, &normalize(f), 0, c))
}

/// Candidates not strictly dominated (under the closeness ordering) by
/// another candidate of the set.
pub fn filter_admissible(_base: &PointedModel, candidates: &[UpdateCandidate]) -> Vec<UpdateCandidate> {
    let diffs: Vec<DiffVector> = candidates.iter().map(|c| c.diff.clone()).collect();
    pareto_minimal(&diffs).into_iter().map(|i| candidates[i].clone()).collect()
}

/// States reachable from the start in both the base and the candidate whose
/// labels did not change (the dummy root excluded).
pub fn unchanged_reachable(base: &PointedModel, cand: &UpdateCandidate) -> BTreeSet<String> {
    let before = reachable_from(&base.model, &base.start);
    let after = reachable_from(&cand.model, &cand.start);
    before
        .intersection(&after)
        .filter(|s| s.as_str() != DUMMY && base.model.try_label(s) == cand.model.try_label(s))
        .cloned()
        .collect()
}

fn committed_indices(sets: &[BTreeSet<String>]) -> Vec<usize> {
    (0..sets.len())
        .filter(|&i| !sets.iter().any(|other| sets[i].len() < other.len() && sets[i].is_subset(other)))
        .collect()
}

/// Candidates whose unchanged reachable set is not strictly contained in
/// another candidate's. Ties are all kept.
pub fn filter_committed(base: &PointedModel, candidates: &[UpdateCandidate]) -> Vec<UpdateCandidate> {
    let sets: Vec<BTreeSet<String>> = candidates.iter().map(|c| unchanged_reachable(base, c)).collect();
    committed_indices(&sets).into_iter().map(|i| candidates[i].clone()).collect()
}

/// Upper bound on the number of models examined by [`satisfiable_within`].
const SAT_SEARCH_LIMIT: u64 = 300_000;

/// Bounded model search: `Some(true)` if some model with at most
/// `max_states` states satisfies `f` at some state, `Some(false)` if the
/// search covered every such model without success, `None` if the search
/// was too large to complete.
pub fn satisfiable_within(f: &Formula, max_states: usize) -> Option<bool> {
    let atoms: Vec<String> = f.atoms().into_iter().collect();
    let mut examined: u64 = 0;
    for n in 1..=max_states {
        let label_bits = atoms.len() * n;
        let edge_bits = n * n;
        let total_bits = label_bits + edge_bits;
        if total_bits >= 40 || examined + (1u64 << total_bits) > SAT_SEARCH_LIMIT {
            return None;
        }
        let names: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
        for code in 0u64..(1u64 << total_bits) {
            examined += 1;
            let mut m = KripkeModel::from_parts(&[], &[("s0", &[])], &["s0"], &[]).ok()?;
            for (i, name) in names.iter().enumerate() {
                let label = atoms
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| code >> (i * atoms.len() + k) & 1 == 1)
                    .map(|(_, a)| a.clone())
                    .collect();
                m.insert_state(name, label);
            }
            for i in 0..n {
                for j in 0..n {
                    if code >> (label_bits + i * n + j) & 1 == 1 {
                        m.insert_edge(&names[i], &names[j]);
                    }
                }
            }
            if names.iter().any(|s| holds(&m, s, f)) {
                return Some(true);
            }
        }
    }
    Some(false)
}
