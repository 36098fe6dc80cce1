//! The five primitive update operations and minimal propositional
//! relabelling.

use std::collections::BTreeSet;

use itertools::Itertools;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Value};
use thiserror::Error;

use crate::formula::Formula;
use crate::kripke::{Edge, KripkeModel, Label, DUMMY};

/// One primitive update operation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PrimitiveOp {
    /// PU1: add a transition.
    AddEdge(Edge),
    /// PU2: remove a transition.
    RemoveEdge(Edge),
    /// PU3: replace the label of a state.
    Relabel { state: String, label: Label },
    /// PU4: add a new (isolated) state with a label.
    AddState { state: String, label: Label },
    /// PU5: remove an isolated state.
    RemoveState(String),
}

impl PrimitiveOp {
    /// The operation tag, `"PU1"` to `"PU5"`.
    pub fn tag(&self) -> &'static str {
        match self {
            PrimitiveOp::AddEdge(_) => "PU1",
            PrimitiveOp::RemoveEdge(_) => "PU2",
            PrimitiveOp::Relabel { .. } => "PU3",
            PrimitiveOp::AddState { .. } => "PU4",
            PrimitiveOp::RemoveState(_) => "PU5",
        }
    }

    fn args(&self) -> Value {
        match self {
            PrimitiveOp::AddEdge((a, b)) | PrimitiveOp::RemoveEdge((a, b)) => json!([a, b]),
            PrimitiveOp::Relabel { state, label } | PrimitiveOp::AddState { state, label } => json!([state, label]),
            PrimitiveOp::RemoveState(s) => json!([s]),
        }
    }
}

impl Serialize for PrimitiveOp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("PrimitiveOp", 2)?;
        st.serialize_field("op", self.tag())?;
        st.serialize_field("args", &self.args())?;
        st.end()
    }
}

#[derive(Deserialize)]
struct OpDoc {
    op: String,
    args: Value,
}

impl<'de> Deserialize<'de> for PrimitiveOp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let doc = OpDoc::deserialize(deserializer)?;
        let bad = || D::Error::custom(format!("malformed arguments for {}", doc.op));
        let text = |v: &Value| v.as_str().map(String::from).ok_or_else(bad);
        let label = |v: &Value| -> Result<Label, D::Error> {
            v.as_array().ok_or_else(bad)?.iter().map(text).collect()
        };
        let args = doc.args.as_array().ok_or_else(bad)?;
        let arg = |i: usize| args.get(i).ok_or_else(bad);
        Ok(match doc.op.as_str() {
            "PU1" => PrimitiveOp::AddEdge((text(arg(0)?)?, text(arg(1)?)?)),
            "PU2" => PrimitiveOp::RemoveEdge((text(arg(0)?)?, text(arg(1)?)?)),
            "PU3" => PrimitiveOp::Relabel { state: text(arg(0)?)?, label: label(arg(1)?)? },
            "PU4" => PrimitiveOp::AddState { state: text(arg(0)?)?, label: label(arg(1)?)? },
            "PU5" => PrimitiveOp::RemoveState(text(arg(0)?)?),
            other => return Err(D::Error::custom(format!("unknown operation '{other}'"))),
        })
    }
}

/// Precondition violations of the primitive operations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OpError {
    /// PU1 on a transition that already exists.
    #[error("transition ({0}, {1}) already exists")]
    EdgeExists(String, String),
    /// PU2 on a transition that does not exist.
    #[error("transition ({0}, {1}) does not exist")]
    MissingEdge(String, String),
    /// An operation names a state that does not exist.
    #[error("unknown state '{0}'")]
    UnknownState(String),
    /// PU3 with the state's current label.
    #[error("state '{0}' already carries that label")]
    LabelUnchanged(String),
    /// PU4 with a name already in use.
    #[error("state '{0}' already exists")]
    StateExists(String),
    /// PU5 on a state with incident transitions.
    #[error("state '{0}' is not isolated")]
    NotIsolated(String),
    /// An operation that would break the dummy-root invariants.
    #[error("operation not permitted on the dummy state: {0}")]
    DummyViolation(&'static str),
}

fn require_state(m: &KripkeModel, s: &str) -> Result<(), OpError> {
    if m.has_state(s) {
        Ok(())
    } else {
        Err(OpError::UnknownState(s.to_string()))
    }
}

/// PU1: adds transition `edge`.
pub fn apply_pu1(m: &KripkeModel, edge: &Edge) -> Result<KripkeModel, OpError> {
    let (a, b) = edge;
    require_state(m, a)?;
    require_state(m, b)?;
    if m.has_edge(a, b) {
        return Err(OpError::EdgeExists(a.clone(), b.clone()));
    }
    if m.has_dummy() && b == DUMMY {
        return Err(OpError::DummyViolation("the dummy state has no incoming transitions"));
    }
    let mut out = m.clone();
    out.insert_edge(a, b);
    Ok(out)
}

/// PU2: removes transition `edge`.
pub fn apply_pu2(m: &KripkeModel, edge: &Edge) -> Result<KripkeModel, OpError> {
    let (a, b) = edge;
    if !m.has_edge(a, b) {
        return Err(OpError::MissingEdge(a.clone(), b.clone()));
    }
    if m.has_dummy() && a == DUMMY && m.init().len() == 1 {
        return Err(OpError::DummyViolation("at least one initial state must remain"));
    }
    let mut out = m.clone();
    out.delete_edge(a, b);
    Ok(out)
}

/// PU3: replaces the label of `state` (atoms outside AP are added to AP).
pub fn apply_pu3(m: &KripkeModel, state: &str, label: &Label) -> Result<KripkeModel, OpError> {
    require_state(m, state)?;
    if m.has_dummy() && state == DUMMY {
        return Err(OpError::DummyViolation("the dummy state cannot be relabelled"));
    }
    if m.label(state) == label {
        return Err(OpError::LabelUnchanged(state.to_string()));
    }
    let mut out = m.clone();
    out.set_label(state, label.clone());
    Ok(out)
}

/// PU4: adds an isolated state `state` labelled `label`.
pub fn apply_pu4(m: &KripkeModel, state: &str, label: &Label) -> Result<KripkeModel, OpError> {
    if m.has_state(state) {
        return Err(OpError::StateExists(state.to_string()));
    }
    if state == DUMMY {
        return Err(OpError::DummyViolation("the dummy name is reserved"));
    }
    let mut out = m.clone();
    out.insert_state(state, label.clone());
    Ok(out)
}

/// PU5: removes the isolated state `state`.
pub fn apply_pu5(m: &KripkeModel, state: &str) -> Result<KripkeModel, OpError> {
    require_state(m, state)?;
    if m.has_dummy() && state == DUMMY {
        return Err(OpError::DummyViolation("the dummy state cannot be removed"));
    }
    if !m.is_isolated(state) {
        return Err(OpError::NotIsolated(state.to_string()));
    }
    let mut out = m.clone();
    out.delete_state(state);
    Ok(out)
}

/// Applies one primitive operation.
pub fn apply(m: &KripkeModel, op: &PrimitiveOp) -> Result<KripkeModel, OpError> {
    match op {
        PrimitiveOp::AddEdge(e) => apply_pu1(m, e),
        PrimitiveOp::RemoveEdge(e) => apply_pu2(m, e),
        PrimitiveOp::Relabel { state, label } => apply_pu3(m, state, label),
        PrimitiveOp::AddState { state, label } => apply_pu4(m, state, label),
        PrimitiveOp::RemoveState(s) => apply_pu5(m, s),
    }
}

/// Replays a sequence of operations.
pub fn replay(m: &KripkeModel, trace: &[PrimitiveOp]) -> Result<KripkeModel, OpError> {
    trace.iter().try_fold(m.clone(), |acc, op| apply(&acc, op))
}

/// Raised when a propositional formula has no satisfying label.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("propositional formula '{0}' is unsatisfiable")]
pub struct UnsatisfiableLabel(pub String);

/// Labels satisfying the propositional formula `f` whose change from
/// `current` is ⊆-minimal, in order of increasing change size and then
/// lexicographic order of the changed atoms; at most `cap` are returned.
///
/// Only atoms occurring in `f` are ever flipped: flipping any other atom
/// cannot help satisfy `f`, so such labels are never minimal.
pub fn minimal_assignments(current: &Label, f: &Formula, cap: usize) -> Result<Vec<Label>, UnsatisfiableLabel> {
    let relevant: Vec<String> = f.atoms().into_iter().collect();
    let mut minimal: Vec<BTreeSet<&String>> = Vec::new();
    let mut out = Vec::new();
    let cap = cap.max(1);
    for size in 0..=relevant.len() {
        for flips in relevant.iter().combinations(size) {
            let flips: BTreeSet<&String> = flips.into_iter().collect();
            if minimal.iter().any(|m| m.is_subset(&flips)) {
                continue;
            }
            let mut label = current.clone();
            for a in &flips {
                if !label.remove(*a) {
                    label.insert((*a).clone());
                }
            }
            if f.eval_label(&label) == Some(true) {
                minimal.push(flips);
                out.push(label);
                if out.len() >= cap {
                    return Ok(out);
                }
            }
        }
    }
    if out.is_empty() {
        return Err(UnsatisfiableLabel(f.to_string()));
    }
    Ok(out)
}
