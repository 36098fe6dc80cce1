//! Round-trip and structural properties of formulas and models on random
//! inputs.

mod common;

use std::collections::BTreeSet;

use common::*;
use ctl_repair::formula::{classify_aeclass, formula_size, normalize, parse, Formula};
use ctl_repair::kripke::{
    parse_model, parse_model_json, reachable_from, reachable_states, serialize_model, with_dummy, ModelError,
    PointedModel,
};

fn is_core(f: &Formula) -> bool {
    use Formula::*;
    match f {
        True | False | Atom(_) => true,
        Not(a) | EX(a) | AF(a) => is_core(a),
        And(a, b) | Or(a, b) | EU(a, b) => is_core(a) && is_core(b),
        Implies(..) | AX(_) | AG(_) | EG(_) | EF(_) | AU(..) => false,
    }
}

#[test]
fn printer_and_parser_round_trip() {
    let mut r = rng(1);
    let atoms = vec!["p".to_string(), "Server.belief_valid".to_string(), "x_1".to_string()];
    for _ in 0..500 {
        let f = random_ctl(&mut r, &atoms, 5);
        let text = f.to_string();
        assert_eq!(parse(&text).unwrap(), f, "{text}");
    }
}

#[test]
fn normalize_is_idempotent_and_core_only() {
    let mut r = rng(2);
    let atoms = vec!["p".to_string(), "q".to_string()];
    for _ in 0..500 {
        let f = random_ctl(&mut r, &atoms, 5);
        let n = normalize(&f);
        assert!(is_core(&n), "{f} normalized to {n}");
        assert_eq!(normalize(&n), n);
        assert!(f.atoms().is_superset(&n.atoms()));
    }
}

#[test]
fn aeclass_accepts_exactly_flat_combinations() {
    let mut r = rng(3);
    let atoms = vec!["p".to_string(), "q".to_string()];
    for _ in 0..300 {
        let a = random_atomic_aeclass(&mut r, &atoms);
        let b = random_atomic_aeclass(&mut r, &atoms);
        let both = Formula::and(a.clone(), Formula::or(b.clone(), a.clone()));
        let expected = if a == b { vec![a.clone()] } else { vec![a.clone(), b.clone()] };
        assert_eq!(classify_aeclass(&both), Some(expected));
        assert_eq!(classify_aeclass(&Formula::ag(a.clone())), None);
        assert_eq!(classify_aeclass(&Formula::not(a)), None);
    }
    assert_eq!(classify_aeclass(&parse("p").unwrap()), None);
    assert_eq!(formula_size(&parse("E[p U q]").unwrap()), 3);
}

#[test]
fn text_and_json_documents_round_trip() {
    let mut r = rng(4);
    for _ in 0..200 {
        let m = random_model(&mut r, 6, 3, 0.3);
        let text = serialize_model(&m);
        assert_eq!(parse_model(&text).unwrap(), m);
        assert_eq!(serialize_model(&parse_model(&text).unwrap()), text);
        let json = m.to_json();
        assert_eq!(parse_model_json(&json).unwrap(), m);
        assert_eq!(parse_model_json(&json).unwrap().to_json(), json);
    }
}

#[test]
fn reachable_sets_are_closed_and_unchanged_by_the_root() {
    let mut r = rng(5);
    for _ in 0..200 {
        let m = random_model(&mut r, 6, 2, 0.25);
        let rooted = with_dummy(&m).unwrap();
        assert_eq!(rooted.successors("#").unwrap(), m.init().clone());
        assert!(rooted.predecessors("#").unwrap().is_empty());
        for s in m.states() {
            let reach = reachable_from(&m, s);
            assert!(reach.contains(s));
            for t in &reach {
                assert!(m.successors(t).unwrap().is_subset(&reach));
            }
            assert_eq!(reachable_from(&rooted, s), reach);
        }
        let pm = PointedModel::new(m.clone(), "s0").unwrap();
        assert_eq!(reachable_states(&pm), reachable_from(&m, "s0"));
        assert_eq!(rooted.without_dummy(), m);
        assert_eq!(with_dummy(&rooted), Err(ModelError::DummyExists));
    }
}

#[test]
fn documents_reject_reserved_and_malformed_content() {
    let cases = [
        ("atoms: p\nstate a : q\ninit: a\n", "undeclared"),
        ("atoms: p\nstate a\ninit: a\ntrans: a -> b\n", "unknown"),
        ("atoms: p\nstate a\n", "empty init"),
        ("atoms: p\nstate a\nstate a\ninit: a\n", "duplicate"),
        ("atoms: p\nstate #\ninit: #\n", "dummy name"),
        ("atoms: p\nstate _u1\ninit: _u1\n", "fresh prefix"),
    ];
    for (doc, why) in cases {
        assert!(parse_model(doc).is_err(), "{why} must be rejected");
    }
    let isolated = parse_model("atoms:\nstate a\nstate b\ninit: a\n").unwrap();
    let pm = PointedModel::new(isolated, "a").unwrap();
    assert_eq!(reachable_states(&pm), BTreeSet::from(["a".to_string()]));
}
