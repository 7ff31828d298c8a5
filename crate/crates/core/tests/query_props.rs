mod common;

use std::collections::{BTreeMap, BTreeSet};

use chasekit::chase::{run_chase, ChaseOptions};
use chasekit::model::{Atom, Cq, Instance, Term};
use chasekit::query::{certain_answers, check_containment, cq_to_bcq, eval_cq, holds, AnswerOptions, AnswerStatus, Containment, Strategy, Tuple};
use common::Shape;
use proptest::prelude::*;
use rand::Rng;

/// Every assignment of domain values to the query variables.
fn brute_eval(inst: &Instance, q: &Cq) -> BTreeSet<Tuple> {
    let vars = chasekit::model::variables_of(&q.body);
    let dom: Vec<Term> = inst.domain().into_iter().collect();
    let mut out = BTreeSet::new();
    if dom.is_empty() && !vars.is_empty() {
        return out;
    }
    let total = dom.len().pow(vars.len() as u32);
    for code in 0..total {
        let mut c = code;
        let mut val = BTreeMap::new();
        for v in &vars {
            val.insert(v.clone(), dom[c % dom.len()].clone());
            c /= dom.len();
        }
        let sat = q.body.iter().all(|a| {
            inst.contains(&a.map_terms(|t| match t {
                Term::Variable(v) => val[v].clone(),
                _ => t.clone(),
            }))
        });
        if sat {
            out.insert(q.head.iter().map(|v| val[v].clone()).collect());
        }
    }
    out
}

fn small_case(seed: u64) -> (Instance, Cq) {
    let mut r = common::rng(seed);
    let shape = Shape { preds: 3, max_arity: 2, max_facts: 8, consts: 3, ..Shape::default() };
    let preds = common::schema(&mut r, &shape);
    let inst = common::database(&mut r, &preds, &shape);
    let q = common::cq(&mut r, &preds, 4, 4, 2);
    (inst, q)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn eval_matches_exhaustive_assignment(seed in any::<u64>()) {
        let (inst, q) = small_case(seed);
        prop_assert_eq!(eval_cq(&inst, &q), brute_eval(&inst, &q));
    }

    #[test]
    fn answers_grow_with_the_instance(seed in any::<u64>(), extra in any::<u64>()) {
        let (inst, q) = small_case(seed);
        let (more, _) = small_case(extra);
        let mut bigger = inst.clone();
        bigger.extend(more.iter().filter(|a| inst.iter().any(|b| b.predicate == a.predicate)).cloned());
        prop_assert!(eval_cq(&inst, &q).is_subset(&eval_cq(&bigger, &q)));
    }

    #[test]
    fn boolean_reduction_agrees(seed in any::<u64>()) {
        let (inst, q) = small_case(seed);
        let mut r = common::rng(seed ^ 1);
        let dom: Vec<Term> = inst.domain().into_iter().collect();
        let t: Tuple = (0..q.arity()).map(|_| dom[r.gen_range(0..dom.len())].clone()).collect();
        let (b, fact) = cq_to_bcq(&q, &t).unwrap();
        let mut with = inst.clone();
        with.insert(fact);
        prop_assert!(b.is_boolean());
        prop_assert_eq!(holds(&with, &b.body), eval_cq(&inst, &q).contains(&t));
    }

    #[test]
    fn bounded_answers_are_sound(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let shape = Shape { max_facts: 4, ..Shape::default() };
        let (preds, db, t) = common::terminating_suite(&mut r, &shape, false, 300);
        let q = common::cq(&mut r, &preds, 3, 3, 2);
        let opts = AnswerOptions { max_steps: 300, memory_limit_mb: None };
        let exact = certain_answers(&db, &t, &[], &q, Strategy::Terminate, &opts).unwrap();
        prop_assert_eq!(exact.status, AnswerStatus::Exact);
        let chase = run_chase(&db, &t, &[], &ChaseOptions::oblivious().with_steps(300).with_depth(usize::MAX)).unwrap();
        let oblivious: BTreeSet<Tuple> = eval_cq(&chase.instance, &q).into_iter().filter(|x| x.iter().all(Term::is_constant)).collect();
        prop_assert_eq!(&exact.answers, &oblivious);
        for depth in 1..4 {
            let b = certain_answers(&db, &t, &[], &q, Strategy::Bounded(depth), &opts).unwrap();
            prop_assert!(b.answers.is_subset(&exact.answers));
        }
    }

    #[test]
    fn containment_without_rules_is_classic(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let shape = Shape { preds: 2, max_arity: 2, consts: 2, ..Shape::default() };
        let preds = common::schema(&mut r, &shape);
        let arity = r.gen_range(0..=1);
        let q1 = loop {
            let q = common::cq(&mut r, &preds, 3, 3, arity);
            if q.arity() == arity { break q; }
        };
        let q2 = loop {
            let q = common::cq(&mut r, &preds, 2, 3, arity);
            if q.arity() == arity { break q; }
        };
        let c = check_containment(&q1, &q2, &[], &[], 100).unwrap();
        // Contained queries never lose answers on sample instances.
        if c == Containment::Yes {
            for k in 0..10u64 {
                let db = common::database(&mut common::rng(seed.wrapping_add(k)), &preds, &Shape { max_facts: 6, ..shape });
                prop_assert!(eval_cq(&db, &q1).is_subset(&eval_cq(&db, &q2)));
            }
        }
        // The frozen body of q1 separates the queries when they are not
        // contained.
        if c == Containment::No {
            let vars = chasekit::model::variables_of(&q1.body);
            let freeze = |t: &Term| match t {
                Term::Variable(v) => Term::constant(&format!("k{}", vars.iter().position(|x| x == v).unwrap())),
                _ => t.clone(),
            };
            let frozen: Instance = q1.body.iter().map(|a| a.map_terms(freeze)).collect();
            let head: Tuple = q1.head.iter().map(|v| freeze(&Term::Variable(v.clone()))).collect();
            prop_assert!(eval_cq(&frozen, &q1).contains(&head));
            prop_assert!(!eval_cq(&frozen, &q2).contains(&head));
        }
    }
}

#[test]
fn join_with_repeated_variables() {
    let inst: Instance = [
        Atom::new("e", vec![Term::constant("a"), Term::constant("a")]),
        Atom::new("e", vec![Term::constant("a"), Term::constant("b")]),
    ]
    .into_iter()
    .collect();
    let q = Cq::new("q", &["X"], vec![Atom::new("e", vec![Term::var("X"), Term::var("X")])]);
    assert_eq!(eval_cq(&inst, &q), [vec![Term::constant("a")]].into_iter().collect());
    assert_eq!(eval_cq(&inst, &q), brute_eval(&inst, &q));
}
