//! Polynomial-time repairs for nesting-free formulas that already have a
//! valid witness: only transitions are added or removed, guided by the
//! valid states and paths.

use std::collections::BTreeSet;

use crate::checker::{holds, sat_states, Witness, WitnessReport};
use crate::formula::{classify_aeclass, Formula};
use crate::kripke::{reachable_from, PointedModel};

use super::engine::{guarded_reach, until_valid_edges, Results, Work};
use super::ops::PrimitiveOp;
use super::{ctl_update, filter_admissible, to_candidates, UpdateCandidate, UpdateConfig, UpdateError};

/// Repairs `(M, s0)` for a nesting-free formula using PU1/PU2 only:
///
/// * `AX φ`: remove the transitions from `s0` to successors violating `φ`;
/// * `AG φ`: cut every transition leaving the `φ`-region reachable from `s0`;
/// * `AF φ`, `A[φ1 U φ2]`: cut the transitions that leave the states of
///   valid paths without lying on one;
/// * `EX φ`: link `s0` to a state satisfying `φ` (one candidate per state);
/// * `EG`, `EF`, `E[U]`: link `s0` to the head of a valid path;
/// * `∧` repairs the conjuncts in sequence, `∨` takes both repairs.
///
/// Every candidate is re-checked; the admissible ones are returned. When the
/// report lacks a valid witness or no candidate survives the re-check, the
/// general [`ctl_update`] is used instead.
pub fn fast_path_aeclass(
    pm: &PointedModel,
    f: &Formula,
    report: &WitnessReport,
    cfg: &UpdateConfig,
) -> Result<Vec<UpdateCandidate>, UpdateError> {
    if classify_aeclass(f).is_none() {
        return Err(UpdateError::WrongShape { formula: f.to_string(), expected: "a nesting-free ∧/∨ combination" });
    }
    if !pm.model.has_state(&pm.start) {
        return Err(UpdateError::UnknownState(pm.start.clone()));
    }
    if report.has_valid_witness() {
        let works = repair(&Work::new(pm.model.clone()), &pm.start, f, report);
        let found: Vec<(String, Work)> = works
            .into_iter()
            .filter(|w| holds(&w.model, &pm.start, f))
            .map(|w| (pm.start.clone(), w))
            .collect();
        if !found.is_empty() {
            return Ok(filter_admissible(pm, &to_candidates(pm, found)));
        }
    }
    let outcome = ctl_update(pm, f, cfg)?;
    Ok(outcome.admissible().into_iter().map(|i| outcome.candidates[i].clone()).collect())
}

fn repair(w: &Work, s0: &str, f: &Formula, report: &WitnessReport) -> Vec<Work> {
    if holds(&w.model, s0, f) {
        return vec![w.clone()];
    }
    let mut results = Results::default();
    match f {
        Formula::And(a, b) => {
            for first in repair(w, s0, a, report) {
                results.extend(repair(&first, s0, b, report).into_iter().filter(|x| holds(&x.model, s0, a)));
            }
        }
        Formula::Or(a, b) => {
            results.extend(repair(w, s0, a, report));
            results.extend(repair(w, s0, b, report));
        }
        _ => results.extend(repair_atomic(w, s0, f, report)),
    }
    results.into_vec()
}

fn remove_all(w: &Work, edges: impl IntoIterator<Item = (String, String)>) -> Option<Work> {
    let ops: Vec<PrimitiveOp> = edges.into_iter().map(PrimitiveOp::RemoveEdge).collect();
    if ops.is_empty() {
        return None;
    }
    ops.into_iter().try_fold(w.clone(), |acc, op| acc.then(op))
}

/// Cuts the transitions leaving the states of valid `[a U b]` paths that lie
/// on no such path.
fn cut_to_valid(w: &Work, s0: &str, a: &Formula, b: &Formula) -> Option<Work> {
    let m = &w.model;
    let (valid_edges, valid_states) = until_valid_edges(m, s0, a, b);
    let reach = reachable_from(m, s0);
    let cut: Vec<(String, String)> = m
        .transitions()
        .iter()
        .filter(|(u, _)| reach.contains(u) && valid_states.contains(u))
        .filter(|e| !valid_edges.contains(*e))
        .cloned()
        .collect();
    remove_all(w, cut)
}

fn path_heads(report: &WitnessReport, f: &Formula, s0: &str) -> BTreeSet<String> {
    match report.get(f) {
        Some(Witness::Paths(paths)) => paths.iter().map(|p| p.head().to_string()).filter(|h| h != s0).collect(),
        _ => BTreeSet::new(),
    }
}

fn repair_atomic(w: &Work, s0: &str, f: &Formula, report: &WitnessReport) -> Vec<Work> {
    let m = &w.model;
    let link = |targets: BTreeSet<String>| -> Vec<Work> {
        targets
            .into_iter()
            .filter(|t| !m.has_edge(s0, t))
            .filter_map(|t| w.then(PrimitiveOp::AddEdge((s0.to_string(), t))))
            .collect()
    };
    match f {
        Formula::AX(phi) => {
            let good = sat_states(m, phi);
            let cut: Vec<(String, String)> =
                m.succ_iter(s0).filter(|t| !good.contains(*t)).map(|t| (s0.to_string(), t.clone())).collect();
            remove_all(w, cut).into_iter().collect()
        }
        Formula::AG(phi) => {
            let good = sat_states(m, phi);
            let region = guarded_reach(m, s0, &good);
            let cut: Vec<(String, String)> = m
                .transitions()
                .iter()
                .filter(|(u, v)| region.contains(u) && good.contains(u) && !good.contains(v))
                .cloned()
                .collect();
            remove_all(w, cut).into_iter().collect()
        }
        Formula::AF(phi) => cut_to_valid(w, s0, &Formula::True, phi).into_iter().collect(),
        Formula::AU(a, b) => cut_to_valid(w, s0, a, b).into_iter().collect(),
        Formula::EX(phi) => link(sat_states(m, phi)),
        Formula::EG(_) | Formula::EF(_) | Formula::EU(..) => link(path_heads(report, f, s0)),
        _ => Vec::new(),
    }
}
