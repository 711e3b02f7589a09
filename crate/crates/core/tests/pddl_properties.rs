mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;

use planexec::pddl::{merge_domains, parse_domain, parse_problem, print_domain, print_problem, Domain, MergeError, ObjectName, TypeName};

use common::{ASSEMBLY_DOMAIN, ASSEMBLY_PROBLEM, COOKING_DOMAIN, COOKING_PROBLEM};

const CORPUS: [(&str, &str); 2] = [(ASSEMBLY_DOMAIN, ASSEMBLY_PROBLEM), (COOKING_DOMAIN, COOKING_PROBLEM)];

#[test]
fn corpus_round_trips_through_the_printer() {
    for (dtext, ptext) in CORPUS {
        let d = parse_domain(dtext).unwrap();
        let reparsed = parse_domain(&print_domain(&d)).unwrap();
        assert_eq!(reparsed, d);
        let p = parse_problem(ptext, &d).unwrap();
        assert_eq!(parse_problem(&print_problem(&p), &d).unwrap(), p);
    }
}

/// Every declaration a random domain can pick from. Equal names always carry
/// equal definitions, so any selection merges without conflict.
const UNIVERSE: &str = "(define (domain universe)
  (:requirements :typing :durative-actions :fluents)
  (:types t0 - object t1 - t0 t2 - object t3 - t2)
  (:constants c0 - t0 c1 - t1 c2 - t3)
  (:predicates (p0 ?a - t0) (p1 ?a - t1 ?b - t2) (p2) (p3 ?a - t3) (p4 ?a ?b - t0) (p5 ?a - object))
  (:functions (f0 ?a - t0) (f1))
  (:durative-action a0 :parameters (?x - t0) :duration (= ?duration 1)
    :condition (and (at start (p0 ?x))) :effect (and (at end (not (p0 ?x)))))
  (:durative-action a1 :parameters (?x - t1 ?y - t2) :duration (= ?duration 2)
    :condition (and (over all (p1 ?x ?y))) :effect (and (at end (p2))))
  (:durative-action a2 :parameters () :duration (= ?duration 3)
    :condition (and (at start (p2))) :effect (and (at start (not (p2))) (at end (p2)))))";

fn universe() -> Domain {
    parse_domain(UNIVERSE).unwrap()
}

fn pick<T: Clone>(all: &[T], mask: u64) -> Vec<T> {
    all.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, x)| x.clone()).collect()
}

/// A domain with the masked subset of every declaration kind.
fn sub_domain(name: &str, masks: [u64; 5], shuffle: u64) -> Domain {
    let u = universe();
    let mut d = Domain {
        name: name.to_string(),
        requirements: u.requirements.clone(),
        types: pick(&u.types, masks[0]),
        constants: pick(&u.constants, masks[1]),
        predicates: pick(&u.predicates, masks[2]),
        functions: pick(&u.functions, masks[3]),
        actions: pick(&u.actions, masks[4]),
    };
    if shuffle & 1 == 1 {
        d.predicates.reverse();
    }
    if shuffle & 2 == 2 {
        d.types.reverse();
    }
    d
}

fn arb_domain(name: &'static str) -> impl Strategy<Value = Domain> {
    (any::<[u64; 5]>(), any::<u64>()).prop_map(move |(m, s)| sub_domain(name, m, s))
}

proptest! {
    #[test]
    fn merge_is_associative(a in arb_domain("a"), b in arb_domain("b"), c in arb_domain("c")) {
        let flat = merge_domains(&[a.clone(), b.clone(), c.clone()]).unwrap();
        let left = merge_domains(&[merge_domains(&[a.clone(), b.clone()]).unwrap(), c.clone()]).unwrap();
        let right = merge_domains(&[a, merge_domains(&[b, c]).unwrap()]).unwrap();
        prop_assert_eq!(&left, &flat);
        prop_assert_eq!(&right, &flat);
    }

    #[test]
    fn merge_is_idempotent(a in arb_domain("a"), b in arb_domain("b")) {
        prop_assert_eq!(merge_domains(&[a.clone(), a.clone()]).unwrap(), a.clone());
        let m = merge_domains(&[a, b.clone()]).unwrap();
        prop_assert_eq!(merge_domains(&[m.clone(), b]).unwrap(), m);
    }
}

#[test]
fn merge_reports_conflicts() {
    let a = parse_domain("(define (domain a) (:predicates (p ?x)))").unwrap();
    let b = parse_domain("(define (domain b) (:predicates (p ?x ?y)))").unwrap();
    assert_eq!(merge_domains(&[a, b]).unwrap_err(), MergeError::Conflict { kind: "predicate", name: "p".into() });
    assert_eq!(merge_domains(&[]).unwrap_err(), MergeError::Empty);
}

const COOKING_TYPES: [&str; 7] = ["robot", "zone", "ingredient", "dish", "cake", "spaghetti", "omelet"];

fn arb_problem() -> impl Strategy<Value = String> {
    let objects = prop::collection::vec(prop::sample::select(COOKING_TYPES.to_vec()), 1..6);
    let atoms = prop::collection::vec((0usize..8, prop::collection::vec(0usize..7, 0..4)), 0..8);
    (objects, atoms).prop_map(|(types, atoms)| {
        let domain = parse_domain(COOKING_DOMAIN).unwrap();
        let names: Vec<String> = (0..types.len()).map(|i| format!("o{i}")).chain(["kitchen".to_string()]).collect();
        let objects: String = types.iter().enumerate().map(|(i, t)| format!("o{i} - {t} ")).collect();
        let init: String = atoms
            .iter()
            .map(|(p, args)| {
                let pred = &domain.predicates[p % domain.predicates.len()].name;
                let args: Vec<&str> = args.iter().map(|a| names[a % names.len()].as_str()).collect();
                format!("({pred} {}) ", args.join(" "))
            })
            .collect();
        format!("(define (problem p) (:domain cooking) (:objects {objects}) (:init {init}) (:goal (and)))")
    })
}

proptest! {
    #[test]
    fn accepted_atoms_are_well_typed(text in arb_problem()) {
        let domain = parse_domain(COOKING_DOMAIN).unwrap();
        if let Ok(p) = parse_problem(&text, &domain) {
            let mut types: BTreeMap<ObjectName, TypeName> = p.objects.iter().cloned().collect();
            types.extend(domain.constants.iter().cloned());
            for atom in &p.init {
                let def = domain.predicate(&atom.predicate).unwrap();
                prop_assert_eq!(def.params.len(), atom.args.len());
                for (arg, param) in atom.args.iter().zip(&def.params) {
                    prop_assert!(domain.is_subtype(&types[arg], &param.ty), "{} in {}", arg, atom);
                }
            }
        }
    }
}
