//! Brute-force reference implementations for desk-scale cross-checking.
//!
//! [`enumerate_models`] lists every model reachable from a base within an
//! edit budget, [`brute_force_admissible`] applies the admissibility
//! definition literally over that universe (every start state included),
//! and [`brute_force_check`] evaluates CTL by unfolding simple lassos
//! instead of fixpoints. All three refuse inputs beyond hard size guards
//! rather than running for hours.

use std::collections::{BTreeSet, HashMap, HashSet};

use thiserror::Error;

use crate::checker::{enumerate_simple_lassos, Graph};
use crate::diff::{pareto_minimal, pointed_diff, DiffVector};
use crate::formula::Formula;
use crate::kripke::{KripkeModel, Label, PointedModel, DUMMY};
use crate::update::{apply, PrimitiveOp};

/// Largest model (states, counting added ones) the oracle accepts.
pub const MAX_ORACLE_STATES: usize = 6;
/// Largest atom universe the oracle accepts.
pub const MAX_ORACLE_ATOMS: usize = 3;
/// Deepest formula [`brute_force_check`] accepts.
pub const MAX_ORACLE_DEPTH: usize = 4;

/// Bound on the edits explored by [`enumerate_models`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EditBudget {
    /// Maximum number of primitive operations.
    pub max_ops: usize,
    /// Maximum number of PU4 operations.
    pub max_new_states: usize,
}

impl Default for EditBudget {
    fn default() -> Self {
        EditBudget { max_ops: 2, max_new_states: 1 }
    }
}

/// The oracle refuses inputs beyond its guards.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    /// The model (plus budgeted new states) is too large.
    #[error("model too large for the oracle: {0} states (limit {MAX_ORACLE_STATES})")]
    TooManyStates(usize),
    /// The atom universe is too large.
    #[error("too many atoms for the oracle: {0} (limit {MAX_ORACLE_ATOMS})")]
    TooManyAtoms(usize),
    /// The formula is too deep.
    #[error("formula too deep for the oracle: depth {0} (limit {MAX_ORACLE_DEPTH})")]
    TooDeep(usize),
    /// The start state is not a state of the model.
    #[error("unknown start state '{0}'")]
    UnknownState(String),
}

fn all_labels(universe: &[String]) -> Vec<Label> {
    (0u32..1 << universe.len())
        .map(|bits| universe.iter().enumerate().filter(|(i, _)| bits >> i & 1 == 1).map(|(_, a)| a.clone()).collect())
        .collect()
}

/// Every single operation applicable to `m` (preconditions enforced by
/// [`apply`]).
fn single_ops(m: &KripkeModel, labels: &[Label], may_add_state: bool) -> Vec<PrimitiveOp> {
    let mut out = Vec::new();
    let states: Vec<&String> = m.states().collect();
    for a in &states {
        for b in &states {
            if !m.has_edge(a, b) {
                out.push(PrimitiveOp::AddEdge(((*a).clone(), (*b).clone())));
            }
        }
    }
    out.extend(m.transitions().iter().cloned().map(PrimitiveOp::RemoveEdge));
    for s in &states {
        for l in labels {
            if l != m.label(s) {
                out.push(PrimitiveOp::Relabel { state: (*s).clone(), label: l.clone() });
            }
        }
    }
    if may_add_state {
        let fresh = m.fresh_state_name();
        out.extend(labels.iter().map(|l| PrimitiveOp::AddState { state: fresh.clone(), label: l.clone() }));
    }
    out.extend(states.iter().filter(|s| m.is_isolated(s)).map(|s| PrimitiveOp::RemoveState((*s).clone())));
    out
}

fn count_new(base: &KripkeModel, m: &KripkeModel) -> usize {
    m.states().filter(|s| !base.has_state(s)).count()
}

/// All distinct models reachable from `base` by at most `budget.max_ops`
/// primitive operations (the base included), relabelling over `atoms`.
pub fn enumerate_models(
    base: &KripkeModel,
    atoms: &BTreeSet<String>,
    budget: EditBudget,
) -> Result<Vec<KripkeModel>, OracleError> {
    let universe: Vec<String> = atoms.union(base.atoms()).cloned().collect();
    if universe.len() > MAX_ORACLE_ATOMS {
        return Err(OracleError::TooManyAtoms(universe.len()));
    }
    let size = base.state_count() + budget.max_new_states.min(budget.max_ops);
    if size > MAX_ORACLE_STATES {
        return Err(OracleError::TooManyStates(size));
    }
    let labels = all_labels(&universe);
    let mut seen: HashSet<KripkeModel> = HashSet::from([base.clone()]);
    let mut out = vec![base.clone()];
    let mut layer = vec![base.clone()];
    for _ in 0..budget.max_ops {
        let mut next = Vec::new();
        for m in &layer {
            let may_add = count_new(base, m) < budget.max_new_states;
            for op in single_ops(m, &labels, may_add) {
                if let Ok(n) = apply(m, &op) {
                    if seen.insert(n.clone()) {
                        out.push(n.clone());
                        next.push(n);
                    }
                }
            }
        }
        layer = next;
    }
    out.sort();
    Ok(out)
}

/// All pointed models `(M′, s′)` with `M′` from [`enumerate_models`]
/// satisfying `f` whose difference from the base is minimal among the
/// satisfying ones. Start states range over every non-dummy state; moving
/// the start is measured as a change of the dummy root's edge (see
/// [`pointed_diff`]). Returns just the base when `f` already holds there.
pub fn brute_force_admissible(
    base: &PointedModel,
    f: &Formula,
    budget: EditBudget,
) -> Result<Vec<PointedModel>, OracleError> {
    if brute_force_check(base, f)? {
        return Ok(vec![base.clone()]);
    }
    let mut satisfying: Vec<PointedModel> = Vec::new();
    for m in enumerate_models(&base.model, &f.atoms(), budget)? {
        for s in m.states().filter(|s| s.as_str() != DUMMY) {
            let pm = PointedModel { model: m.clone(), start: s.clone() };
            if brute_force_check(&pm, f)? {
                satisfying.push(pm);
            }
        }
    }
    let diffs: Vec<DiffVector> = satisfying.iter().map(|pm| pointed_diff(base, pm)).collect();
    Ok(pareto_minimal(&diffs).into_iter().map(|i| satisfying[i].clone()).collect())
}

/// Evaluates `f` at the start state by enumerating simple lassos for every
/// path quantifier. Paths are infinite; `EX`/`AX` range over successors.
pub fn brute_force_check(pm: &PointedModel, f: &Formula) -> Result<bool, OracleError> {
    let m = &pm.model;
    if m.state_count() > MAX_ORACLE_STATES {
        return Err(OracleError::TooManyStates(m.state_count()));
    }
    if f.depth() > MAX_ORACLE_DEPTH {
        return Err(OracleError::TooDeep(f.depth()));
    }
    let g = Graph::new(m);
    let Some(&s0) = g.index.get(pm.start.as_str()) else {
        return Err(OracleError::UnknownState(pm.start.clone()));
    };
    let mut eval = LassoEval { g: &g, memo: HashMap::new() };
    Ok(eval.at(s0, f))
}

struct LassoEval<'g, 'm> {
    g: &'g Graph<'m>,
    memo: HashMap<(usize, Formula), bool>,
}

impl LassoEval<'_, '_> {
    fn at(&mut self, s: usize, f: &Formula) -> bool {
        if let Some(&v) = self.memo.get(&(s, f.clone())) {
            return v;
        }
        let v = self.compute(s, f);
        self.memo.insert((s, f.clone()), v);
        v
    }

    /// All simple lassos from `s`, flattened to their state sequence (the
    /// cycle is the suffix starting at the returned offset).
    fn lassos(&self, s: usize) -> Vec<Vec<usize>> {
        let all = vec![true; self.g.len()];
        let mut out = Vec::new();
        enumerate_simple_lassos(self.g, s, &all, &mut |(stem, cycle)| {
            out.push(stem.into_iter().chain(cycle).collect());
            true
        });
        out
    }

    fn until_on(&mut self, seq: &[usize], a: &Formula, b: &Formula) -> bool {
        for &st in seq {
            if self.at(st, b) {
                return true;
            }
            if !self.at(st, a) {
                return false;
            }
        }
        false
    }

    fn compute(&mut self, s: usize, f: &Formula) -> bool {
        use Formula::*;
        match f {
            True => true,
            False => false,
            Atom(p) => self.g.labels[s].contains(p),
            Not(a) => !self.at(s, a),
            And(a, b) => self.at(s, a) && self.at(s, b),
            Or(a, b) => self.at(s, a) || self.at(s, b),
            Implies(a, b) => !self.at(s, a) || self.at(s, b),
            EX(a) => self.g.succ[s].clone().iter().any(|&t| self.at(t, a)),
            AX(a) => self.g.succ[s].clone().iter().all(|&t| self.at(t, a)),
            EG(a) => self.lassos(s).iter().any(|p| p.iter().all(|&t| self.at(t, a))),
            AG(a) => self.lassos(s).iter().all(|p| p.iter().all(|&t| self.at(t, a))),
            EF(a) => self.lassos(s).iter().any(|p| p.iter().any(|&t| self.at(t, a))),
            AF(a) => self.lassos(s).iter().all(|p| p.iter().any(|&t| self.at(t, a))),
            EU(a, b) => self.lassos(s).iter().any(|p| self.until_on(p, a, b)),
            AU(a, b) => self.lassos(s).iter().all(|p| self.until_on(p, a, b)),
        }
    }
}
