//! CTL model checking by bottom-up fixpoint labelling, and detection of valid
//! witnesses (states and paths) for formulas without nested temporal
//! operators.
//!
//! Paths are infinite. A state with no infinite path leaving it (a deadlock,
//! or a state that can only run into deadlocks) satisfies every
//! universally-quantified path formula vacuously and no
//! existentially-quantified one; `EX`/`AX` look at immediate successors, so a
//! deadlock satisfies `AX φ` and fails `EX φ`.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::formula::{classify_aeclass, Formula};
use crate::kripke::{reachable_from, KripkeModel, Label, Lasso, PointedModel, DUMMY};

/// Errors raised by checker queries with shape requirements.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    /// The formula does not have the shape the query requires.
    #[error("formula '{0}' does not have the required shape")]
    WrongShape(String),
    /// The formula is not built from nesting-free temporal formulas by ∧/∨.
    #[error("formula '{0}' has nested temporal operators or other connectives")]
    NotAEClass(String),
    /// The start state does not exist.
    #[error("unknown state '{0}'")]
    UnknownState(String),
}

/// Satisfaction sets of every subformula of a checked formula.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SatLabeling {
    /// Subformula to the states satisfying it.
    pub sets: BTreeMap<Formula, BTreeSet<String>>,
}

impl SatLabeling {
    /// `Sat(f)` for a subformula `f` of the checked formula.
    pub fn get(&self, f: &Formula) -> Option<&BTreeSet<String>> {
        self.sets.get(f)
    }
}

/// Dense, index-based view of a model used by the fixpoint algorithms.
pub(crate) struct Graph<'a> {
    pub names: Vec<&'a str>,
    pub index: HashMap<&'a str, usize>,
    pub succ: Vec<Vec<usize>>,
    pub pred: Vec<Vec<usize>>,
    pub labels: Vec<&'a Label>,
}

impl<'a> Graph<'a> {
    pub fn new(m: &'a KripkeModel) -> Graph<'a> {
        let names: Vec<&str> = m.states().map(String::as_str).collect();
        let index: HashMap<&str, usize> = names.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        let mut succ = vec![Vec::new(); names.len()];
        let mut pred = vec![Vec::new(); names.len()];
        for (a, b) in m.transitions() {
            let (i, j) = (index[a.as_str()], index[b.as_str()]);
            succ[i].push(j);
            pred[j].push(i);
        }
        let labels = names.iter().map(|s| m.label(s)).collect();
        Graph { names, index, succ, pred, labels }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn to_set(&self, v: &[bool]) -> BTreeSet<String> {
        v.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| self.names[i].to_string()).collect()
    }

    /// States with an infinite path staying inside `within`.
    pub fn eg(&self, within: &[bool]) -> Vec<bool> {
        let n = self.len();
        let mut inside = within.to_vec();
        let mut count: Vec<usize> =
            (0..n).map(|i| self.succ[i].iter().filter(|&&j| inside[j]).count()).collect();
        let mut stack: Vec<usize> = (0..n).filter(|&i| inside[i] && count[i] == 0).collect();
        while let Some(i) = stack.pop() {
            if !inside[i] {
                continue;
            }
            inside[i] = false;
            for &p in &self.pred[i] {
                if inside[p] {
                    count[p] -= 1;
                    if count[p] == 0 {
                        stack.push(p);
                    }
                }
            }
        }
        inside
    }

    /// States with an infinite path that reaches a `target` state through
    /// `through` states (the target must itself start an infinite path).
    pub fn eu(&self, through: &[bool], target: &[bool]) -> Vec<bool> {
        let live = self.eg(&vec![true; self.len()]);
        let mut z: Vec<bool> = (0..self.len()).map(|i| target[i] && live[i]).collect();
        let mut stack: Vec<usize> = (0..self.len()).filter(|&i| z[i]).collect();
        while let Some(i) = stack.pop() {
            for &p in &self.pred[i] {
                if !z[p] && through[p] {
                    z[p] = true;
                    stack.push(p);
                }
            }
        }
        z
    }

    pub fn ex(&self, v: &[bool]) -> Vec<bool> {
        (0..self.len()).map(|i| self.succ[i].iter().any(|&j| v[j])).collect()
    }

    pub fn eval(&self, f: &Formula, memo: &mut HashMap<Formula, Vec<bool>>) -> Vec<bool> {
        if let Some(v) = memo.get(f) {
            return v.clone();
        }
        let n = self.len();
        let not = |v: Vec<bool>| -> Vec<bool> { v.into_iter().map(|b| !b).collect() };
        let v = match f {
            Formula::True => vec![true; n],
            Formula::False => vec![false; n],
            Formula::Atom(p) => self.labels.iter().map(|l| l.contains(p)).collect(),
            Formula::Not(g) => not(self.eval(g, memo)),
            Formula::And(a, b) => {
                let (x, y) = (self.eval(a, memo), self.eval(b, memo));
                x.iter().zip(&y).map(|(p, q)| *p && *q).collect()
            }
            Formula::Or(a, b) => {
                let (x, y) = (self.eval(a, memo), self.eval(b, memo));
                x.iter().zip(&y).map(|(p, q)| *p || *q).collect()
            }
            Formula::Implies(a, b) => {
                let (x, y) = (self.eval(a, memo), self.eval(b, memo));
                x.iter().zip(&y).map(|(p, q)| !*p || *q).collect()
            }
            Formula::EX(g) => {
                let x = self.eval(g, memo);
                self.ex(&x)
            }
            Formula::AX(g) => {
                let x = not(self.eval(g, memo));
                not(self.ex(&x))
            }
            Formula::EG(g) => {
                let x = self.eval(g, memo);
                self.eg(&x)
            }
            Formula::AF(g) => {
                let x = not(self.eval(g, memo));
                not(self.eg(&x))
            }
            Formula::EF(g) => {
                let x = self.eval(g, memo);
                self.eu(&vec![true; n], &x)
            }
            Formula::AG(g) => {
                let x = not(self.eval(g, memo));
                not(self.eu(&vec![true; n], &x))
            }
            Formula::EU(a, b) => {
                let (x, y) = (self.eval(a, memo), self.eval(b, memo));
                self.eu(&x, &y)
            }
            Formula::AU(a, b) => {
                let (x, y) = (self.eval(a, memo), self.eval(b, memo));
                let not_b: Vec<bool> = not(y.clone());
                let stuck: Vec<bool> = (0..n).map(|i| !x[i] && !y[i]).collect();
                let until = self.eu(&not_b, &stuck);
                let never = self.eg(&not_b);
                (0..n).map(|i| !until[i] && !never[i]).collect()
            }
        };
        memo.insert(f.clone(), v.clone());
        v
    }
}

/// Labels every subformula of `f` with the states of `m` satisfying it.
pub fn sat_set(m: &KripkeModel, f: &Formula) -> SatLabeling {
    let g = Graph::new(m);
    let mut memo = HashMap::new();
    g.eval(f, &mut memo);
    SatLabeling { sets: memo.into_iter().map(|(k, v)| (k, g.to_set(&v))).collect() }
}

/// `Sat(f)`: the states of `m` satisfying `f`.
pub fn sat_states(m: &KripkeModel, f: &Formula) -> BTreeSet<String> {
    let g = Graph::new(m);
    let v = g.eval(f, &mut HashMap::new());
    g.to_set(&v)
}

/// True iff `(m, s) ⊨ f`; false for unknown states.
pub fn holds(m: &KripkeModel, s: &str, f: &Formula) -> bool {
    let g = Graph::new(m);
    match g.index.get(s) {
        Some(&i) => g.eval(f, &mut HashMap::new())[i],
        None => false,
    }
}

/// True iff `(M, s0) ⊨ f`.
pub fn check(pm: &PointedModel, f: &Formula) -> bool {
    holds(&pm.model, &pm.start, f)
}

/// Satisfaction from the dummy root: every initial state satisfies `f`.
/// A model with a dummy root must also keep at least one initial state.
pub fn check_rooted(m: &KripkeModel, f: &Formula) -> bool {
    if m.has_dummy() && m.init().is_empty() {
        return false;
    }
    let g = Graph::new(m);
    let v = g.eval(f, &mut HashMap::new());
    m.init().iter().all(|s| v[g.index[s.as_str()]])
}

/// States with at least one infinite path (`EG ⊤`).
pub fn live_states(m: &KripkeModel) -> BTreeSet<String> {
    sat_states(m, &Formula::eg(Formula::True))
}

/// Reachable states (from `start`) whose label violates `ψ`, for a goal of
/// the form `AG ψ` with propositional `ψ`. The dummy root is never reported.
pub fn false_states(m: &KripkeModel, start: &str, f: &Formula) -> Result<BTreeSet<String>, CheckError> {
    let psi = match f {
        Formula::AG(psi) if psi.is_propositional() => psi,
        _ => return Err(CheckError::WrongShape(f.to_string())),
    };
    if !m.has_state(start) {
        return Err(CheckError::UnknownState(start.to_string()));
    }
    Ok(reachable_from(m, start)
        .into_iter()
        .filter(|s| s != DUMMY && psi.eval_label(m.label(s)) == Some(false))
        .collect())
}

/// Valid witnesses for one atomic nesting-free formula.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Witness {
    /// Valid states (`AX`/`EX` forms).
    States(BTreeSet<String>),
    /// Valid paths as simple lassos (`AG`/`AF`/`A[U]`/`EG`/`EF`/`E[U]`).
    Paths(Vec<Lasso>),
}

impl Witness {
    /// True iff no valid state or path was found.
    pub fn is_empty(&self) -> bool {
        match self {
            Witness::States(s) => s.is_empty(),
            Witness::Paths(p) => p.is_empty(),
        }
    }
}

/// Valid witnesses of every atomic subformula of a nesting-free formula.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessReport {
    /// One entry per atomic subformula, left to right.
    pub entries: Vec<(Formula, Witness)>,
    /// True when some path enumeration stopped at the path limit.
    pub truncated: bool,
}

impl WitnessReport {
    /// True iff every atomic subformula has a valid state or path.
    pub fn has_valid_witness(&self) -> bool {
        self.entries.iter().all(|(_, w)| !w.is_empty())
    }

    /// The witness recorded for an atomic subformula.
    pub fn get(&self, f: &Formula) -> Option<&Witness> {
        self.entries.iter().find(|(g, _)| g == f).map(|(_, w)| w)
    }
}

/// Default cap on the number of valid paths reported per atomic formula.
pub const DEFAULT_PATH_LIMIT: usize = 4096;

/// Computes the valid states and paths of every atomic subformula of `f`,
/// following the clause-by-clause definition. See [`find_witness_limited`].
pub fn find_witness(pm: &PointedModel, f: &Formula) -> Result<WitnessReport, CheckError> {
    find_witness_limited(pm, f, DEFAULT_PATH_LIMIT)
}

/// Like [`find_witness`], reporting at most `limit` paths per atomic
/// formula.
///
/// * `AX φ`: successors of `s0` labelled with `φ`.
/// * `AG φ`: paths from `s0` that stay in `φ`.
/// * `AF φ`: paths from `s0` with a `φ` state strictly after the start.
/// * `A[φ1 U φ2]`: paths from `s0` satisfying the until.
/// * `EX φ`: any state labelled with `φ`.
/// * `EG φ`: paths from `s′0 ≠ s0` that stay in `φ`, provided `L(s0) ⊨ φ`.
/// * `EF φ`: paths from `s′0 ≠ s0` with a `φ` state strictly after `s′0`.
/// * `E[φ1 U φ2]`: paths from `s′0 ≠ s0` satisfying the until, provided
///   `L(s0) ⊨ φ1`.
pub fn find_witness_limited(pm: &PointedModel, f: &Formula, limit: usize) -> Result<WitnessReport, CheckError> {
    let atoms = classify_aeclass(f).ok_or_else(|| CheckError::NotAEClass(f.to_string()))?;
    let m = &pm.model;
    if !m.has_state(&pm.start) {
        return Err(CheckError::UnknownState(pm.start.clone()));
    }
    let g = Graph::new(m);
    let s0 = g.index[pm.start.as_str()];
    let lab = |phi: &Formula| -> Vec<bool> {
        g.labels.iter().map(|l| phi.eval_label(l).unwrap_or(false)).collect()
    };
    let all = vec![true; g.len()];
    let mut report = WitnessReport { entries: Vec::new(), truncated: false };
    for atom in atoms {
        let witness = match &atom {
            Formula::AX(phi) => {
                let ok = lab(phi);
                Witness::States(g.succ[s0].iter().filter(|&&j| ok[j]).map(|&j| g.names[j].to_string()).collect())
            }
            Formula::EX(phi) => Witness::States(g.to_set(&lab(phi))),
            Formula::AG(phi) => {
                let ok = lab(phi);
                let paths = lassos_from(&g, s0, &ok, limit, &mut report.truncated, |_| true);
                Witness::Paths(paths)
            }
            Formula::AF(phi) => {
                let ok = lab(phi);
                let paths = lassos_from(&g, s0, &all, limit, &mut report.truncated, |seq| later_hit(seq, &ok));
                Witness::Paths(paths)
            }
            Formula::AU(a, b) => {
                let (x, y) = (lab(a), lab(b));
                let paths = lassos_from(&g, s0, &all, limit, &mut report.truncated, |seq| until_hit(seq, &x, &y));
                Witness::Paths(paths)
            }
            Formula::EG(phi) => {
                let ok = lab(phi);
                let mut paths = Vec::new();
                if ok[s0] {
                    for h in (0..g.len()).filter(|&h| h != s0) {
                        let budget = limit.saturating_sub(paths.len());
                        paths.extend(lassos_from(&g, h, &ok, budget, &mut report.truncated, |_| true));
                    }
                }
                Witness::Paths(paths)
            }
            Formula::EF(phi) => {
                let ok = lab(phi);
                let mut paths = Vec::new();
                for h in (0..g.len()).filter(|&h| h != s0) {
                    let budget = limit.saturating_sub(paths.len());
                    paths.extend(lassos_from(&g, h, &all, budget, &mut report.truncated, |seq| later_hit(seq, &ok)));
                }
                Witness::Paths(paths)
            }
            Formula::EU(a, b) => {
                let (x, y) = (lab(a), lab(b));
                let mut paths = Vec::new();
                if x[s0] {
                    for h in (0..g.len()).filter(|&h| h != s0) {
                        let budget = limit.saturating_sub(paths.len());
                        paths.extend(lassos_from(&g, h, &all, budget, &mut report.truncated, |seq| {
                            until_hit(seq, &x, &y)
                        }));
                    }
                }
                Witness::Paths(paths)
            }
            _ => unreachable!("classify_aeclass yields atomic formulas only"),
        };
        report.entries.push((atom, witness));
    }
    Ok(report)
}

/// A lasso as index sequences: `(stem, loop)`.
pub(crate) type IdxLasso = (Vec<usize>, Vec<usize>);

/// True iff some position ≥ 1 of the infinite unrolling satisfies `ok`.
fn later_hit(seq: &IdxLasso, ok: &[bool]) -> bool {
    let (stem, cycle) = seq;
    stem.iter().skip(1).chain(cycle.iter()).any(|&i| ok[i])
}

/// True iff the unrolling satisfies `x U y` (positions up to one full loop
/// suffice since the path is periodic).
fn until_hit(seq: &IdxLasso, x: &[bool], y: &[bool]) -> bool {
    for &i in seq.0.iter().chain(seq.1.iter()) {
        if y[i] {
            return true;
        }
        if !x[i] {
            return false;
        }
    }
    false
}

/// Enumerates simple lassos starting at `head` whose states all satisfy
/// `within`, keeping those accepted by `keep`, up to `limit` results.
/// Only states with an infinite path inside `within` are explored, so every
/// explored prefix extends to at least one lasso.
fn lassos_from(
    g: &Graph<'_>,
    head: usize,
    within: &[bool],
    limit: usize,
    truncated: &mut bool,
    keep: impl Fn(&IdxLasso) -> bool,
) -> Vec<Lasso> {
    let live = g.eg(within);
    let mut out = Vec::new();
    if !live[head] {
        return out;
    }
    let mut raw = Vec::new();
    enumerate_simple_lassos(g, head, &live, &mut |l| {
        if keep(&l) {
            if raw.len() >= limit {
                *truncated = true;
                return false;
            }
            raw.push(l);
        }
        true
    });
    for (stem, cycle) in raw {
        out.push(Lasso {
            stem: stem.iter().map(|&i| g.names[i].to_string()).collect(),
            cycle: cycle.iter().map(|&i| g.names[i].to_string()).collect(),
        });
    }
    out
}

/// Depth-first enumeration of every simple lasso from `head` using only
/// `allowed` states. The visitor returns `false` to stop early.
pub(crate) fn enumerate_simple_lassos(
    g: &Graph<'_>,
    head: usize,
    allowed: &[bool],
    visit: &mut dyn FnMut(IdxLasso) -> bool,
) {
    fn dfs(
        g: &Graph<'_>,
        path: &mut Vec<usize>,
        on_path: &mut [Option<usize>],
        allowed: &[bool],
        visit: &mut dyn FnMut(IdxLasso) -> bool,
    ) -> bool {
        let last = *path.last().expect("path is never empty");
        for &next in &g.succ[last] {
            if !allowed[next] {
                continue;
            }
            if let Some(pos) = on_path[next] {
                if !visit((path[..pos].to_vec(), path[pos..].to_vec())) {
                    return false;
                }
            } else {
                on_path[next] = Some(path.len());
                path.push(next);
                let go_on = dfs(g, path, on_path, allowed, visit);
                path.pop();
                on_path[next] = None;
                if !go_on {
                    return false;
                }
            }
        }
        true
    }
    if !allowed[head] {
        return;
    }
    let mut on_path = vec![None; g.len()];
    on_path[head] = Some(0);
    let mut path = vec![head];
    dfs(g, &mut path, &mut on_path, allowed, visit);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse;
    use crate::kripke::parse_model;

    fn example1() -> KripkeModel {
        parse_model(
            "atoms: p q r\nstate s0 : p q\nstate s1 : q r\nstate s2 : r\ninit: s0\n\
             trans: s0 -> s0\ntrans: s0 -> s1\ntrans: s0 -> s2\ntrans: s1 -> s1\ntrans: s2 -> s2\ntrans: s2 -> s1\n",
        )
        .unwrap()
    }

    #[test]
    fn example_one_fails_ag_p() {
        let pm = PointedModel::new(example1(), "s0").unwrap();
        assert!(!check(&pm, &parse("AG p").unwrap()));
        assert!(check(&pm, &Formula::True));
        assert!(check(&pm, &parse("EG p").unwrap()));
        assert!(check(&pm, &parse("AG (q | r)").unwrap()));
    }

    #[test]
    fn deadlock_convention() {
        let m = parse_model("atoms: p\nstate a\nstate b\ninit: a\ntrans: a -> b\n").unwrap();
        for f in ["AX p", "AG p", "AF p", "A[p U p]"] {
            assert!(holds(&m, "b", &parse(f).unwrap()), "{f}");
        }
        for f in ["EX true", "EG true", "EF true", "E[true U true]"] {
            assert!(!holds(&m, "b", &parse(f).unwrap()), "{f}");
        }
        // `a` only leads into the deadlock, so it has no infinite path either.
        assert!(holds(&m, "a", &parse("AG p").unwrap()));
        assert!(!holds(&m, "a", &parse("AX p").unwrap()));
        assert!(live_states(&m).is_empty());
    }

    #[test]
    fn tautology_holds_everywhere() {
        let m = example1();
        assert_eq!(sat_states(&m, &parse("p | !p").unwrap()).len(), 3);
        let labeling = sat_set(&m, &parse("EX (p & q)").unwrap());
        assert_eq!(labeling.get(&parse("p & q").unwrap()).unwrap().len(), 1);
    }

    #[test]
    fn false_states_restricted_to_reachable() {
        let m = parse_model("atoms: p\nstate s0 : p\nstate s1 : p\nstate s2\ninit: s0\ntrans: s0 -> s1\ntrans: s1 -> s1\n")
            .unwrap();
        assert!(false_states(&m, "s0", &parse("AG p").unwrap()).unwrap().is_empty());
        assert!(false_states(&m, "s0", &parse("AF p").unwrap()).is_err());
    }

    #[test]
    fn ex_witness_valid_state() {
        let m = parse_model(
            "atoms: p q\nstate s0\nstate s1 : p\nstate s2 : q\nstate s3 : p q\ninit: s0\n\
             trans: s0 -> s1\ntrans: s1 -> s2\ntrans: s2 -> s2\ntrans: s3 -> s3\n",
        )
        .unwrap();
        let pm = PointedModel::new(m, "s0").unwrap();
        let report = find_witness(&pm, &parse("EX (p & q)").unwrap()).unwrap();
        let expected: BTreeSet<String> = ["s3".to_string()].into();
        assert_eq!(report.entries[0].1, Witness::States(expected));
        assert!(report.has_valid_witness());
    }

    #[test]
    fn no_valid_state_without_satisfying_label() {
        let m = parse_model("atoms: p q\nstate a\nstate b : p\ninit: a\ntrans: a -> b\ntrans: b -> b\n").unwrap();
        let pm = PointedModel::new(m, "a").unwrap();
        let report = find_witness(&pm, &parse("EX q").unwrap()).unwrap();
        assert!(!report.has_valid_witness());
        assert!(find_witness(&pm, &parse("EX EX q").unwrap()).is_err());
    }
}
