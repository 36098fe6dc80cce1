//! Kripke models: the state/transition/labelling structure, pointed models
//! and lassos, the line-oriented text format and its JSON twin, reachability,
//! the dummy root state, and Graphviz export.
//!
//! Text format (one directive per line, `#` starts a comment line):
//!
//! ```text
//! atoms: p q r
//! state s0 : p q
//! state s1 : q r
//! init: s0
//! trans: s0 -> s1
//! ```

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diff::DiffVector;
use crate::formula::is_valid_atom_name;

/// Reserved name of the dummy root state.
pub const DUMMY: &str = "#";

/// Reserved prefix of states created by the update engine.
pub const FRESH_PREFIX: &str = "_u";

/// A directed edge between two named states.
pub type Edge = (String, String);

/// A set of atomic propositions (the atoms true in a state).
pub type Label = BTreeSet<String>;

/// Errors raised while building, parsing or querying models.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    /// A label mentions an atom missing from the `atoms:` declaration.
    #[error("state '{state}' is labelled with undeclared atom '{atom}'")]
    UndeclaredAtom { state: String, atom: String },
    /// A transition or initial state names a state that was never declared.
    #[error("unknown state '{0}'")]
    UnknownState(String),
    /// The initial-state set is empty.
    #[error("the set of initial states is empty")]
    EmptyInit,
    /// A state is declared twice.
    #[error("duplicate state '{0}'")]
    DuplicateState(String),
    /// A state uses a reserved name (the dummy root or the fresh-state prefix).
    #[error("state name '{0}' is reserved")]
    ReservedName(String),
    /// A state or atom name is not an identifier.
    #[error("invalid name '{0}'")]
    InvalidName(String),
    /// The model already carries a dummy root.
    #[error("model already has a dummy state")]
    DummyExists,
    /// Malformed text document.
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    /// Malformed JSON document.
    #[error("invalid JSON model: {0}")]
    Json(String),
}

/// A finite Kripke model `(S, R, L)` with declared atoms, initial states and
/// an optional dummy root `#`.
///
/// When the dummy root is present its successors are exactly the initial
/// states; the initial-state set is kept in sync with its outgoing edges.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KripkeModel {
    atoms: BTreeSet<String>,
    labels: BTreeMap<String, Label>,
    trans: BTreeSet<Edge>,
    init: BTreeSet<String>,
    dummy: bool,
}

/// A model together with a distinguished start state `s0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PointedModel {
    /// The underlying model.
    pub model: KripkeModel,
    /// The start state.
    pub start: String,
}

impl PointedModel {
    /// Pairs a model with a start state, which must exist.
    pub fn new(model: KripkeModel, start: &str) -> Result<PointedModel, ModelError> {
        if !model.has_state(start) {
            return Err(ModelError::UnknownState(start.to_string()));
        }
        Ok(PointedModel { model, start: start.to_string() })
    }
}

/// Finite representation of an infinite path: `stem` followed by `loop`
/// repeated forever.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Lasso {
    /// Prefix visited once.
    pub stem: Vec<String>,
    /// Cycle visited forever; never empty.
    #[serde(rename = "loop")]
    pub cycle: Vec<String>,
}

impl Lasso {
    /// First state of the path.
    pub fn head(&self) -> &str {
        self.stem.first().unwrap_or(&self.cycle[0])
    }

    /// The states of one unrolling: `stem ++ loop`.
    pub fn states(&self) -> impl Iterator<Item = &String> {
        self.stem.iter().chain(self.cycle.iter())
    }

    /// All transitions used by the path.
    pub fn edges(&self) -> Vec<Edge> {
        let seq: Vec<&String> = self.states().collect();
        let mut out: Vec<Edge> = seq.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect();
        out.push((self.cycle[self.cycle.len() - 1].clone(), self.cycle[0].clone()));
        out
    }

    /// True iff every consecutive pair, including the closing one, is a
    /// transition of `m`.
    pub fn is_valid_in(&self, m: &KripkeModel) -> bool {
        !self.cycle.is_empty() && self.edges().iter().all(|(a, b)| m.has_edge(a, b))
    }
}

impl KripkeModel {
    /// Builds a model from parts, validating every invariant.
    pub fn from_parts(
        atoms: &[&str],
        states: &[(&str, &[&str])],
        init: &[&str],
        trans: &[(&str, &str)],
    ) -> Result<KripkeModel, ModelError> {
        let doc = ModelDoc {
            atoms: atoms.iter().map(|a| a.to_string()).collect(),
            states: BTreeMap::new(),
            init: init.iter().map(|s| s.to_string()).collect(),
            trans: trans.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
        };
        let mut decl = Vec::new();
        for (name, label) in states {
            decl.push((name.to_string(), label.iter().map(|a| a.to_string()).collect::<Vec<_>>()));
        }
        Self::validate(doc.atoms, decl, doc.init, doc.trans)
    }

    fn validate(
        atoms: Vec<String>,
        states: Vec<(String, Vec<String>)>,
        init: Vec<String>,
        trans: Vec<Edge>,
    ) -> Result<KripkeModel, ModelError> {
        let mut atom_set = BTreeSet::new();
        for a in atoms {
            if !is_valid_atom_name(&a) {
                return Err(ModelError::InvalidName(a));
            }
            atom_set.insert(a);
        }
        let mut labels = BTreeMap::new();
        for (name, label) in states {
            check_state_name(&name)?;
            let mut set = BTreeSet::new();
            for a in label {
                if !atom_set.contains(&a) {
                    return Err(ModelError::UndeclaredAtom { state: name, atom: a });
                }
                set.insert(a);
            }
            if labels.insert(name.clone(), set).is_some() {
                return Err(ModelError::DuplicateState(name));
            }
        }
        let mut init_set = BTreeSet::new();
        for s in init {
            if !labels.contains_key(&s) {
                return Err(ModelError::UnknownState(s));
            }
            init_set.insert(s);
        }
        if init_set.is_empty() {
            return Err(ModelError::EmptyInit);
        }
        let mut edges = BTreeSet::new();
        for (a, b) in trans {
            for s in [&a, &b] {
                if !labels.contains_key(s) {
                    return Err(ModelError::UnknownState(s.clone()));
                }
            }
            edges.insert((a, b));
        }
        Ok(KripkeModel { atoms: atom_set, labels, trans: edges, init: init_set, dummy: false })
    }

    /// Declared atomic propositions.
    pub fn atoms(&self) -> &BTreeSet<String> {
        &self.atoms
    }

    /// State names in canonical (lexicographic) order, including the dummy
    /// root when present.
    pub fn states(&self) -> impl Iterator<Item = &String> {
        self.labels.keys()
    }

    /// Number of states, including the dummy root when present.
    pub fn state_count(&self) -> usize {
        self.labels.len()
    }

    /// All transitions in canonical order.
    pub fn transitions(&self) -> &BTreeSet<Edge> {
        &self.trans
    }

    /// The initial states.
    pub fn init(&self) -> &BTreeSet<String> {
        &self.init
    }

    /// True iff the dummy root is present.
    pub fn has_dummy(&self) -> bool {
        self.dummy
    }

    /// True iff `s` is a state of the model.
    pub fn has_state(&self, s: &str) -> bool {
        self.labels.contains_key(s)
    }

    /// True iff `(a, b)` is a transition.
    pub fn has_edge(&self, a: &str, b: &str) -> bool {
        self.trans.contains(&(a.to_string(), b.to_string()))
    }

    /// The label `L(s)`; panics on unknown states.
    pub fn label(&self, s: &str) -> &Label {
        &self.labels[s]
    }

    /// The label `L(s)`, or `None` on unknown states.
    pub fn try_label(&self, s: &str) -> Option<&Label> {
        self.labels.get(s)
    }

    /// All labels keyed by state.
    pub fn labels(&self) -> &BTreeMap<String, Label> {
        &self.labels
    }

    /// Successor set of `s`.
    pub fn successors(&self, s: &str) -> Result<BTreeSet<String>, ModelError> {
        if !self.has_state(s) {
            return Err(ModelError::UnknownState(s.to_string()));
        }
        Ok(self.succ_iter(s).cloned().collect())
    }

    /// Predecessor set of `s`.
    pub fn predecessors(&self, s: &str) -> Result<BTreeSet<String>, ModelError> {
        if !self.has_state(s) {
            return Err(ModelError::UnknownState(s.to_string()));
        }
        Ok(self.trans.iter().filter(|(_, b)| b == s).map(|(a, _)| a.clone()).collect())
    }

    /// Iterates the successors of `s` in canonical order (empty for unknown
    /// states).
    pub fn succ_iter<'a>(&'a self, s: &str) -> impl Iterator<Item = &'a String> + 'a {
        let lo = (s.to_string(), String::new());
        let owner = s.to_string();
        self.trans.range(lo..).take_while(move |(a, _)| *a == owner).map(|(_, b)| b)
    }

    /// True iff `s` has no incident transitions.
    pub fn is_isolated(&self, s: &str) -> bool {
        !self.trans.iter().any(|(a, b)| a == s || b == s)
    }

    /// Returns a copy carrying the dummy root `#` with one edge to each
    /// initial state.
    pub fn with_dummy(&self) -> Result<KripkeModel, ModelError> {
        if self.dummy || self.has_state(DUMMY) {
            return Err(ModelError::DummyExists);
        }
        let mut m = self.clone();
        m.labels.insert(DUMMY.to_string(), BTreeSet::new());
        for s in &self.init {
            m.trans.insert((DUMMY.to_string(), s.clone()));
        }
        m.dummy = true;
        Ok(m)
    }

    /// Returns a copy whose dummy root `#` has a single edge, to `start`
    /// (which becomes the only initial state). Models that already carry the
    /// root are returned unchanged.
    pub(crate) fn rooted_at(&self, start: &str) -> KripkeModel {
        if self.dummy {
            return self.clone();
        }
        let mut m = self.clone();
        m.labels.insert(DUMMY.to_string(), BTreeSet::new());
        m.trans.insert((DUMMY.to_string(), start.to_string()));
        m.init = BTreeSet::from([start.to_string()]);
        m.dummy = true;
        m
    }

    /// Returns a copy without the dummy root; the initial states become the
    /// former successors of `#`. Identity on models without a dummy.
    pub fn without_dummy(&self) -> KripkeModel {
        if !self.dummy {
            return self.clone();
        }
        let mut m = self.clone();
        m.labels.remove(DUMMY);
        m.trans.retain(|(a, b)| a != DUMMY && b != DUMMY);
        m.dummy = false;
        m
    }

    /// Next unused fresh state name (`_u1`, `_u2`, ...): one past the largest
    /// index already present.
    pub fn fresh_state_name(&self) -> String {
        let next = self
            .labels
            .keys()
            .filter_map(|s| s.strip_prefix(FRESH_PREFIX).and_then(|n| n.parse::<usize>().ok()))
            .max()
            .unwrap_or(0)
            + 1;
        format!("{FRESH_PREFIX}{next}")
    }

    // -- raw mutators used by the primitive operations ------------------

    pub(crate) fn insert_edge(&mut self, a: &str, b: &str) {
        self.trans.insert((a.to_string(), b.to_string()));
        if self.dummy && a == DUMMY {
            self.init.insert(b.to_string());
        }
    }

    pub(crate) fn delete_edge(&mut self, a: &str, b: &str) {
        self.trans.remove(&(a.to_string(), b.to_string()));
        if self.dummy && a == DUMMY {
            self.init.remove(b);
        }
    }

    pub(crate) fn set_label(&mut self, s: &str, label: Label) {
        for a in &label {
            if !self.atoms.contains(a) {
                self.atoms.insert(a.clone());
            }
        }
        self.labels.insert(s.to_string(), label);
    }

    pub(crate) fn insert_state(&mut self, s: &str, label: Label) {
        self.set_label(s, label);
    }

    pub(crate) fn delete_state(&mut self, s: &str) {
        self.labels.remove(s);
        self.init.remove(s);
    }

    /// Canonical text serialization (dummy root stripped).
    pub fn to_text(&self) -> String {
        let m = self.without_dummy();
        let mut out = String::new();
        let atoms: Vec<&str> = m.atoms.iter().map(String::as_str).collect();
        let _ = writeln!(out, "atoms: {}", atoms.join(" "));
        for (s, label) in &m.labels {
            if label.is_empty() {
                let _ = writeln!(out, "state {s}");
            } else {
                let l: Vec<&str> = label.iter().map(String::as_str).collect();
                let _ = writeln!(out, "state {s} : {}", l.join(" "));
            }
        }
        let init: Vec<&str> = m.init.iter().map(String::as_str).collect();
        let _ = writeln!(out, "init: {}", init.join(" "));
        for (a, b) in &m.trans {
            let _ = writeln!(out, "trans: {a} -> {b}");
        }
        out
    }

    /// Canonical JSON document (dummy root stripped).
    pub fn to_doc(&self) -> ModelDoc {
        let m = self.without_dummy();
        ModelDoc {
            atoms: m.atoms.iter().cloned().collect(),
            states: m.labels.iter().map(|(s, l)| (s.clone(), l.iter().cloned().collect())).collect(),
            init: m.init.iter().cloned().collect(),
            trans: m.trans.iter().cloned().collect(),
        }
    }

    /// Canonical pretty-printed JSON serialization (dummy root stripped).
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("model documents always serialize")
    }
}

fn check_state_name(name: &str) -> Result<(), ModelError> {
    if name == DUMMY || name.starts_with(FRESH_PREFIX) {
        return Err(ModelError::ReservedName(name.to_string()));
    }
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.') {
        return Err(ModelError::InvalidName(name.to_string()));
    }
    Ok(())
}

/// JSON shape of a model document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDoc {
    /// Declared atoms.
    pub atoms: Vec<String>,
    /// State name to the atoms true in it.
    pub states: BTreeMap<String, Vec<String>>,
    /// Initial states.
    pub init: Vec<String>,
    /// Transitions as `[from, to]` pairs.
    pub trans: Vec<Edge>,
}

impl ModelDoc {
    /// Validates the document into a model.
    pub fn into_model(self) -> Result<KripkeModel, ModelError> {
        let states = self.states.into_iter().collect();
        KripkeModel::validate(self.atoms, states, self.init, self.trans)
    }
}

/// Parses a text model document.
pub fn parse_model(text: &str) -> Result<KripkeModel, ModelError> {
    let mut atoms: Option<Vec<String>> = None;
    let mut states = Vec::new();
    let mut init: Option<Vec<String>> = None;
    let mut trans = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = idx + 1;
        let syntax = |message: &str| ModelError::Syntax { line: lineno, message: message.to_string() };
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("atoms:") {
            if atoms.is_some() {
                return Err(syntax("duplicate 'atoms:' directive"));
            }
            atoms = Some(rest.split_whitespace().map(String::from).collect());
        } else if let Some(rest) = line.strip_prefix("init:") {
            init.get_or_insert_with(Vec::new).extend(rest.split_whitespace().map(String::from));
        } else if let Some(rest) = line.strip_prefix("trans:") {
            let (a, b) = rest.split_once("->").ok_or_else(|| syntax("expected 'trans: <from> -> <to>'"))?;
            let (a, b) = (a.trim(), b.trim());
            if a.is_empty() || b.is_empty() || a.contains(char::is_whitespace) || b.contains(char::is_whitespace) {
                return Err(syntax("expected 'trans: <from> -> <to>'"));
            }
            trans.push((a.to_string(), b.to_string()));
        } else if let Some(rest) = line.strip_prefix("state ") {
            let (name, label) = match rest.split_once(':') {
                Some((n, l)) => (n.trim(), l.split_whitespace().map(String::from).collect()),
                None => (rest.trim(), Vec::new()),
            };
            if name.is_empty() || name.contains(char::is_whitespace) {
                return Err(syntax("expected 'state <name> [: atoms...]'"));
            }
            states.push((name.to_string(), label));
        } else {
            return Err(syntax(&format!("unrecognised directive '{line}'")));
        }
    }
    KripkeModel::validate(atoms.unwrap_or_default(), states, init.unwrap_or_default(), trans)
}

/// Parses a JSON model document.
pub fn parse_model_json(text: &str) -> Result<KripkeModel, ModelError> {
    let doc: ModelDoc = serde_json::from_str(text).map_err(|e| ModelError::Json(e.to_string()))?;
    doc.into_model()
}

/// Canonical text serialization; inverse of [`parse_model`].
pub fn serialize_model(m: &KripkeModel) -> String {
    m.to_text()
}

/// States reachable from the start state (including it) by graph search.
pub fn reachable_states(pm: &PointedModel) -> BTreeSet<String> {
    reachable_from(&pm.model, &pm.start)
}

/// States reachable from `start` (including it) by graph search.
pub fn reachable_from(m: &KripkeModel, start: &str) -> BTreeSet<String> {
    let mut seen = BTreeSet::new();
    if !m.has_state(start) {
        return seen;
    }
    let mut queue = VecDeque::from([start.to_string()]);
    seen.insert(start.to_string());
    while let Some(s) = queue.pop_front() {
        for t in m.succ_iter(&s) {
            if seen.insert(t.clone()) {
                queue.push_back(t.clone());
            }
        }
    }
    seen
}

/// Adds the dummy root; see [`KripkeModel::with_dummy`].
pub fn with_dummy(m: &KripkeModel) -> Result<KripkeModel, ModelError> {
    m.with_dummy()
}

fn dot_id(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn label_text(label: &Label) -> String {
    let items: Vec<&str> = label.iter().map(String::as_str).collect();
    format!("{{{}}}", items.join(", "))
}

/// Renders the model as a Graphviz digraph. The dummy root is omitted and
/// initial states are drawn with a double border. With a highlight,
/// added states and edges are drawn bold green, relabelled states are
/// filled and annotated with their label change, and removed states and
/// edges are drawn dashed red.
pub fn export_dot(m: &KripkeModel, highlight: Option<&DiffVector>) -> String {
    let mut out = String::from("digraph kripke {\n  rankdir=LR;\n  node [shape=ellipse];\n");
    for (s, label) in &m.labels {
        if m.dummy && s == DUMMY {
            continue;
        }
        let mut text = format!("{s}\\n{}", label_text(label));
        let mut attrs = Vec::new();
        if m.init.contains(s) {
            attrs.push("peripheries=2".to_string());
        }
        if let Some(d) = highlight {
            if d.added_states.contains(s) {
                attrs.push("color=forestgreen, penwidth=2".to_string());
            }
            if let Some(delta) = d.relabeled.get(s) {
                attrs.push("style=filled, fillcolor=lightyellow".to_string());
                let plus: Vec<String> = delta.added.iter().map(|a| format!("+{a}")).collect();
                let minus: Vec<String> = delta.removed.iter().map(|a| format!("-{a}")).collect();
                let change: Vec<String> = plus.into_iter().chain(minus).collect();
                text.push_str(&format!("\\n[{}]", change.join(" ")));
            }
        }
        attrs.insert(0, format!("label=\"{text}\""));
        let _ = writeln!(out, "  {} [{}];", dot_id(s), attrs.join(", "));
    }
    if let Some(d) = highlight {
        for s in &d.removed_states {
            if s != DUMMY {
                let _ = writeln!(out, "  {} [label=\"{s}\", style=dashed, color=red];", dot_id(s));
            }
        }
    }
    for (a, b) in &m.trans {
        if m.dummy && a == DUMMY {
            continue;
        }
        let added = highlight.is_some_and(|d| d.added_edges.contains(&(a.clone(), b.clone())));
        if added {
            let _ = writeln!(out, "  {} -> {} [color=forestgreen, penwidth=2];", dot_id(a), dot_id(b));
        } else {
            let _ = writeln!(out, "  {} -> {};", dot_id(a), dot_id(b));
        }
    }
    if let Some(d) = highlight {
        for (a, b) in &d.removed_edges {
            if a != DUMMY && b != DUMMY {
                let _ = writeln!(out, "  {} -> {} [style=dashed, color=red];", dot_id(a), dot_id(b));
            }
        }
    }
    out.push_str("}\n");
    out
}
