//! Shared helpers for the integration tests: fixture loading, seeded random
//! models and formulas, and a small DOT reader.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use ctl_repair::formula::Formula;
use ctl_repair::kripke::{parse_model, reachable_from, KripkeModel, PointedModel};
use ctl_repair::update::{apply, PrimitiveOp, UpdateCandidate};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

pub const MICROWAVE_PHI: &str = "!EF(Start & EG !Heat)";
pub const AFS1_PROPERTY: &str = "AG(Server.belief_valid -> Client.belief_valid)";

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn fixture(name: &str) -> KripkeModel {
    let text = std::fs::read_to_string(fixture_path(name)).expect("fixture readable");
    parse_model(&text).expect("fixture parses")
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// A random model with `1..=max_states` states `s0, s1, ...` over a random
/// nonempty subset of `{p, q, r}` (at most `max_atoms`), initial state `s0`.
pub fn random_model(rng: &mut StdRng, max_states: usize, max_atoms: usize, edge_prob: f64) -> KripkeModel {
    let n = rng.gen_range(1..=max_states);
    let all = ["p", "q", "r"];
    let k = rng.gen_range(1..=max_atoms.min(3));
    let atoms: Vec<&str> = all[..k].to_vec();
    let names: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
    let labels: Vec<Vec<&str>> =
        (0..n).map(|_| atoms.iter().copied().filter(|_| rng.gen_bool(0.5)).collect()).collect();
    let mut edges = Vec::new();
    for a in &names {
        for b in &names {
            if rng.gen_bool(edge_prob) {
                edges.push((a.as_str(), b.as_str()));
            }
        }
    }
    let states: Vec<(&str, &[&str])> = names.iter().zip(&labels).map(|(s, l)| (s.as_str(), l.as_slice())).collect();
    KripkeModel::from_parts(&atoms, &states, &["s0"], &edges).expect("generated model is valid")
}

/// Like [`random_model`] but every state has at least one successor.
pub fn random_serial_model(rng: &mut StdRng, max_states: usize, max_atoms: usize) -> KripkeModel {
    let m = random_model(rng, max_states, max_atoms, 0.35);
    let names: Vec<String> = m.states().cloned().collect();
    let mut text = m.to_text();
    for s in &names {
        if m.succ_iter(s).next().is_none() {
            let t = names.choose(rng).expect("nonempty");
            text.push_str(&format!("trans: {s} -> {t}\n"));
        }
    }
    parse_model(&text).expect("still valid")
}

/// Applies up to `k` random primitive operations (labels over `atoms`),
/// skipping draws whose preconditions fail.
pub fn random_edits(rng: &mut StdRng, m: &KripkeModel, k: usize, atoms: &[String]) -> KripkeModel {
    let mut cur = m.clone();
    for _ in 0..rng.gen_range(0..=k) {
        let states: Vec<String> = cur.states().cloned().collect();
        let pick = |rng: &mut StdRng| states.choose(rng).expect("nonempty").clone();
        let label = |rng: &mut StdRng| atoms.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect();
        let kind = if states.is_empty() { 3 } else { rng.gen_range(0..5) };
        let op = match kind {
            0 => PrimitiveOp::AddEdge((pick(rng), pick(rng))),
            1 => match cur.transitions().iter().collect::<Vec<_>>().choose(rng) {
                Some(e) => PrimitiveOp::RemoveEdge((*e).clone()),
                None => continue,
            },
            2 => PrimitiveOp::Relabel { state: pick(rng), label: label(rng) },
            3 => PrimitiveOp::AddState { state: cur.fresh_state_name(), label: label(rng) },
            _ => PrimitiveOp::RemoveState(pick(rng)),
        };
        if let Ok(next) = apply(&cur, &op) {
            cur = next;
        }
    }
    cur
}

/// States of `base` unreachable from `start` must survive unchanged, and
/// states unreachable in the candidate must already exist in the base.
pub fn preserves_unreachable(base: &KripkeModel, start: &str, cand: &UpdateCandidate) -> bool {
    let before = reachable_from(base, start);
    let after = reachable_from(&cand.model, &cand.start);
    let kept = base
        .states()
        .filter(|s| !before.contains(*s))
        .all(|s| cand.model.try_label(s) == Some(base.label(s)));
    let no_new_orphans = cand.model.states().filter(|s| !after.contains(*s)).all(|s| base.has_state(s));
    kept && no_new_orphans
}

pub fn pointed(m: &KripkeModel) -> PointedModel {
    PointedModel::new(m.clone(), "s0").expect("s0 exists")
}

fn atoms_of(m: &KripkeModel) -> Vec<String> {
    let a: Vec<String> = m.atoms().iter().cloned().collect();
    if a.is_empty() {
        vec!["p".to_string()]
    } else {
        a
    }
}

/// A random propositional formula of the given depth over `atoms`.
pub fn random_prop(rng: &mut StdRng, atoms: &[String], depth: usize) -> Formula {
    let leaf = |rng: &mut StdRng| -> Formula {
        match rng.gen_range(0..8) {
            0 => Formula::True,
            1 => Formula::False,
            _ => Formula::atom(atoms.choose(rng).expect("atoms nonempty")),
        }
    };
    if depth == 0 {
        return leaf(rng);
    }
    match rng.gen_range(0..5) {
        0 => leaf(rng),
        1 => Formula::not(random_prop(rng, atoms, depth - 1)),
        2 => Formula::and(random_prop(rng, atoms, depth - 1), random_prop(rng, atoms, depth - 1)),
        3 => Formula::or(random_prop(rng, atoms, depth - 1), random_prop(rng, atoms, depth - 1)),
        _ => Formula::implies(random_prop(rng, atoms, depth - 1), random_prop(rng, atoms, depth - 1)),
    }
}

/// A random CTL formula whose AST depth is at most `depth`.
pub fn random_ctl(rng: &mut StdRng, atoms: &[String], depth: usize) -> Formula {
    if depth <= 1 {
        return random_prop(rng, atoms, 0);
    }
    let sub = |rng: &mut StdRng| random_ctl(rng, atoms, depth - 1);
    match rng.gen_range(0..14) {
        0 => random_prop(rng, atoms, 0),
        1 => Formula::not(sub(rng)),
        2 => Formula::and(sub(rng), sub(rng)),
        3 => Formula::or(sub(rng), sub(rng)),
        4 => Formula::ax(sub(rng)),
        5 => Formula::ex(sub(rng)),
        6 => Formula::ag(sub(rng)),
        7 => Formula::eg(sub(rng)),
        8 => Formula::af(sub(rng)),
        9 => Formula::ef(sub(rng)),
        10 => Formula::au(sub(rng), sub(rng)),
        11 => Formula::eu(sub(rng), sub(rng)),
        12 => Formula::implies(sub(rng), sub(rng)),
        _ => random_prop(rng, atoms, 1),
    }
}

/// A random atomic nesting-free formula: one temporal operator over small
/// propositional arguments.
pub fn random_atomic_aeclass(rng: &mut StdRng, atoms: &[String]) -> Formula {
    let mut p = || random_prop(rng, atoms, 1);
    let (a, b) = (p(), p());
    match rng.gen_range(0..8) {
        0 => Formula::ax(a),
        1 => Formula::ex(a),
        2 => Formula::ag(a),
        3 => Formula::eg(a),
        4 => Formula::af(a),
        5 => Formula::ef(a),
        6 => Formula::au(a, b),
        _ => Formula::eu(a, b),
    }
}

/// A random nesting-free formula: an atomic one, or a conjunction or
/// disjunction of two.
pub fn random_aeclass(rng: &mut StdRng, m: &KripkeModel) -> Formula {
    let atoms = atoms_of(m);
    let a = random_atomic_aeclass(rng, &atoms);
    match rng.gen_range(0..6) {
        0 => Formula::and(a, random_atomic_aeclass(rng, &atoms)),
        1 => Formula::or(a, random_atomic_aeclass(rng, &atoms)),
        _ => a,
    }
}

pub fn model_atoms(m: &KripkeModel) -> Vec<String> {
    atoms_of(m)
}

/// Parsed subset of a DOT digraph: node ids with attributes and edges.
#[derive(Debug, Default)]
pub struct DotGraph {
    pub nodes: BTreeMap<String, BTreeMap<String, String>>,
    pub edges: BTreeSet<(String, String)>,
}

fn dot_id(tok: &str) -> String {
    let t = tok.trim();
    t.strip_prefix('"').and_then(|x| x.strip_suffix('"')).unwrap_or(t).to_string()
}

fn dot_attrs(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    let mut rest = text.trim();
    while !rest.is_empty() {
        let (key, after) = rest.split_once('=').ok_or_else(|| format!("attribute without '=': {rest}"))?;
        let after = after.trim_start();
        let (value, tail) = if let Some(q) = after.strip_prefix('"') {
            let end = q.find('"').ok_or("unterminated string")?;
            (q[..end].to_string(), &q[end + 1..])
        } else {
            let end = after.find(',').unwrap_or(after.len());
            (after[..end].trim().to_string(), &after[end..])
        };
        out.insert(key.trim().to_string(), value);
        rest = tail.trim_start().trim_start_matches(',').trim_start();
    }
    Ok(out)
}

/// Parses the statement forms we emit: `digraph NAME {`, graph-level
/// `key=value;`, `node [...]`, `ID [...]`, `ID -> ID [...]`, `}`.
pub fn parse_dot(text: &str) -> Result<DotGraph, String> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let header = lines.next().ok_or("empty document")?;
    if !(header.starts_with("digraph ") && header.ends_with('{')) {
        return Err(format!("bad header: {header}"));
    }
    let mut g = DotGraph::default();
    let mut closed = false;
    for line in lines {
        if closed {
            return Err(format!("text after closing brace: {line}"));
        }
        if line == "}" {
            closed = true;
            continue;
        }
        let stmt = line.strip_suffix(';').ok_or_else(|| format!("missing ';': {line}"))?;
        let (head, attrs) = match stmt.find('[') {
            Some(i) => {
                let body = stmt[i + 1..].strip_suffix(']').ok_or_else(|| format!("unclosed '[': {line}"))?;
                (stmt[..i].trim(), dot_attrs(body)?)
            }
            None => (stmt.trim(), BTreeMap::new()),
        };
        if let Some((a, b)) = head.split_once("->") {
            g.edges.insert((dot_id(a), dot_id(b)));
        } else if head == "node" || head == "edge" || head == "graph" {
            continue;
        } else if head.contains('=') {
            dot_attrs(head)?;
        } else {
            g.nodes.insert(dot_id(head), attrs);
        }
    }
    if !closed {
        return Err("missing closing brace".into());
    }
    Ok(g)
}
