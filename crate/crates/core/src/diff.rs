//! Difference vectors between models and the closeness ordering `≤_M`.
//!
//! A [`DiffVector`] records the five set differences produced by the
//! primitive operations: added edges (PU1), removed edges (PU2), relabelled
//! states (PU3, with per-state label deltas), added states (PU4) and removed
//! states (PU5). One model is at least as close to a base as another when
//! each of its differences is contained in the other's, and — when the sets
//! of relabelled states coincide — each per-state label change is contained
//! as well.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::kripke::{Edge, KripkeModel, PointedModel};

/// Change of one state's label: atoms switched on and atoms switched off.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabelDelta {
    /// Atoms true in the new label but not the old one.
    pub added: BTreeSet<String>,
    /// Atoms true in the old label but not the new one.
    pub removed: BTreeSet<String>,
}

impl LabelDelta {
    /// Symmetric difference of the two labels.
    pub fn symmetric(&self) -> BTreeSet<String> {
        self.added.union(&self.removed).cloned().collect()
    }

    /// True iff this change is contained in `other` (as symmetric
    /// differences).
    pub fn is_subset(&self, other: &LabelDelta) -> bool {
        self.added.is_subset(&other.added) && self.removed.is_subset(&other.removed)
    }
}

/// The five set differences between a base model and another model.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DiffVector {
    /// `R′ − R`.
    pub added_edges: BTreeSet<Edge>,
    /// `R − R′`.
    pub removed_edges: BTreeSet<Edge>,
    /// States present in both models whose labels differ, with the change.
    pub relabeled: BTreeMap<String, LabelDelta>,
    /// `S′ − S`.
    pub added_states: BTreeSet<String>,
    /// `S − S′`.
    pub removed_states: BTreeSet<String>,
}

impl DiffVector {
    /// True iff the two models are identical.
    pub fn is_empty(&self) -> bool {
        self.added_edges.is_empty()
            && self.removed_edges.is_empty()
            && self.relabeled.is_empty()
            && self.added_states.is_empty()
            && self.removed_states.is_empty()
    }

    /// The relabelled states (keys of the label-delta map).
    pub fn relabeled_states(&self) -> BTreeSet<String> {
        self.relabeled.keys().cloned().collect()
    }

    /// Total number of changed elements, counting each label atom change.
    pub fn size(&self) -> usize {
        self.added_edges.len()
            + self.removed_edges.len()
            + self.relabeled.values().map(|d| d.added.len() + d.removed.len()).sum::<usize>()
            + self.added_states.len()
            + self.removed_states.len()
    }

    /// The closeness test between two diff vectors against the same base:
    /// componentwise inclusion, plus per-state label inclusion when the
    /// relabelled-state sets coincide.
    pub fn le(&self, other: &DiffVector) -> bool {
        if !(self.added_edges.is_subset(&other.added_edges)
            && self.removed_edges.is_subset(&other.removed_edges)
            && self.added_states.is_subset(&other.added_states)
            && self.removed_states.is_subset(&other.removed_states))
        {
            return false;
        }
        if !self.relabeled.keys().all(|s| other.relabeled.contains_key(s)) {
            return false;
        }
        if self.relabeled.len() == other.relabeled.len() {
            return self.relabeled.iter().all(|(s, d)| d.is_subset(&other.relabeled[s]));
        }
        true
    }

    /// Pretty-printed JSON rendering.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("diff vectors always serialize")
    }
}

/// Computes the five set differences between `base` and `other`, comparing
/// states and edges by name (the dummy root takes part like any state).
pub fn compute_diff(base: &KripkeModel, other: &KripkeModel) -> DiffVector {
    let added_edges = other.transitions().difference(base.transitions()).cloned().collect();
    let removed_edges = base.transitions().difference(other.transitions()).cloned().collect();
    let mut relabeled = BTreeMap::new();
    let mut removed_states = BTreeSet::new();
    for (s, l) in base.labels() {
        match other.try_label(s) {
            None => {
                removed_states.insert(s.clone());
            }
            Some(l2) if l2 != l => {
                relabeled.insert(
                    s.clone(),
                    LabelDelta {
                        added: l2.difference(l).cloned().collect(),
                        removed: l.difference(l2).cloned().collect(),
                    },
                );
            }
            Some(_) => {}
        }
    }
    let added_states = other.states().filter(|s| !base.has_state(s)).cloned().collect();
    DiffVector { added_edges, removed_edges, relabeled, added_states, removed_states }
}

/// The difference between two pointed models, with the start state measured
/// through the dummy root: each model gets a root `#` whose only edge leads
/// to its start state, so moving the start shows up as one removed and one
/// added root edge. Equals [`compute_diff`] of the models when the start is
/// the same or the base already carries the root.
pub fn pointed_diff(base: &PointedModel, other: &PointedModel) -> DiffVector {
    if base.model.has_dummy() || base.start == other.start {
        return compute_diff(&base.model, &other.model);
    }
    compute_diff(&base.model.rooted_at(&base.start), &other.model.rooted_at(&other.start))
}

/// `m1 ≤_base m2`: `m1` is at least as close to `base` as `m2`.
pub fn closer_or_equal(base: &KripkeModel, m1: &KripkeModel, m2: &KripkeModel) -> bool {
    compute_diff(base, m1).le(&compute_diff(base, m2))
}

/// `m1 <_base m2`: at least as close, and not conversely.
pub fn strictly_closer(base: &KripkeModel, m1: &KripkeModel, m2: &KripkeModel) -> bool {
    let (d1, d2) = (compute_diff(base, m1), compute_diff(base, m2));
    d1.le(&d2) && !d2.le(&d1)
}

/// Indices of the `≤`-minimal elements of `diffs`: those for which no other
/// diff is strictly closer. Equal diffs are all kept.
pub fn pareto_minimal(diffs: &[DiffVector]) -> Vec<usize> {
    let mut bits: BTreeMap<String, usize> = BTreeMap::new();
    let mut intern = |key: String| {
        let n = bits.len();
        *bits.entry(key).or_insert(n)
    };
    let encoded: Vec<(Vec<usize>, Vec<usize>, usize)> = diffs
        .iter()
        .map(|d| {
            let mut main: Vec<usize> = Vec::new();
            let mut labels: Vec<usize> = Vec::new();
            main.extend(d.added_edges.iter().map(|(a, b)| intern(format!("+e {a} {b}"))));
            main.extend(d.removed_edges.iter().map(|(a, b)| intern(format!("-e {a} {b}"))));
            main.extend(d.added_states.iter().map(|s| intern(format!("+s {s}"))));
            main.extend(d.removed_states.iter().map(|s| intern(format!("-s {s}"))));
            for (s, delta) in &d.relabeled {
                main.push(intern(format!("r {s}")));
                labels.extend(delta.added.iter().map(|a| intern(format!("+l {s} {a}"))));
                labels.extend(delta.removed.iter().map(|a| intern(format!("-l {s} {a}"))));
            }
            (main, labels, d.relabeled.len())
        })
        .collect();
    let words = bits.len().div_ceil(64).max(1);
    let pack = |idx: &[usize]| {
        let mut v = vec![0u64; words];
        for &i in idx {
            v[i / 64] |= 1 << (i % 64);
        }
        v
    };
    let packed: Vec<(Vec<u64>, Vec<u64>, usize, u32)> = encoded
        .iter()
        .map(|(m, l, k)| {
            let main = pack(m);
            let count = main.iter().map(|w| w.count_ones()).sum();
            (main, pack(l), *k, count)
        })
        .collect();
    let subset = |a: &[u64], b: &[u64]| a.iter().zip(b).all(|(x, y)| x & !y == 0);
    let le = |i: usize, j: usize| {
        let (mi, li, ki, _) = &packed[i];
        let (mj, lj, kj, _) = &packed[j];
        subset(mi, mj) && (ki != kj || subset(li, lj))
    };
    (0..diffs.len())
        .filter(|&i| {
            !(0..diffs.len()).any(|j| j != i && packed[j].3 <= packed[i].3 && le(j, i) && !le(i, j))
        })
        .collect()
}
