use chasekit::chase::{head_satisfied, run_chase, ChaseOptions, ChaseStatus};
use chasekit::egd_sep::{blocking_chase, egd_failure_check, monitor_innocuous, separated_answer, FailureVerdict};
use chasekit::hom::all_homs;
use chasekit::model::{Atom, Instance, Term};
use chasekit::parser::parse_program;
use chasekit::query::{certain_answers, AnswerOptions, AnswerStatus, Strategy as Answering};
use chasekit::rulesets::fll_rules;
use proptest::prelude::*;

const OBJS: [&str; 3] = ["o1", "o2", "c1"];
const CLASSES: [&str; 3] = ["c1", "c2", "c3"];
const ATTRS: [&str; 2] = ["a1", "a2"];
const VALS: [&str; 3] = ["v1", "v2", "o1"];

fn fact() -> impl Strategy<Value = Atom> {
    let c = |s: &str| Term::constant(s);
    let o = prop::sample::select(&OBJS[..]);
    let k = prop::sample::select(&CLASSES[..]);
    let a = prop::sample::select(&ATTRS[..]);
    let v = prop::sample::select(&VALS[..]);
    prop_oneof![
        (o.clone(), k.clone()).prop_map(move |(x, y)| Atom::new("member", vec![c(x), c(y)])),
        (k.clone(), k.clone()).prop_map(move |(x, y)| Atom::new("sub", vec![c(x), c(y)])),
        (k.clone(), a.clone(), k.clone()).prop_map(move |(x, y, z)| Atom::new("type", vec![c(x), c(y), c(z)])),
        (a.clone(), k.clone()).prop_map(move |(x, y)| Atom::new("mandatory", vec![c(x), c(y)])),
        (a.clone(), k).prop_map(move |(x, y)| Atom::new("funct", vec![c(x), c(y)])),
        (o, a, v).prop_map(move |(x, y, z)| Atom::new("data", vec![c(x), c(y), c(z)])),
    ]
}

fn database() -> impl Strategy<Value = Instance> {
    prop::collection::vec(fact(), 2..9).prop_map(|v| v.into_iter().collect())
}

const BUDGET: usize = 800;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn failure_check_predicts_interleaved_failure(db in database()) {
        let rules = fll_rules();
        let check = egd_failure_check(&db, &rules.tgds, &rules.egds, BUDGET).unwrap();
        let full = run_chase(&db, &rules.tgds, &rules.egds, &ChaseOptions::restricted().with_steps(BUDGET).with_depth(usize::MAX)).unwrap();
        match (check.verdict, full.status) {
            (FailureVerdict::Unknown, _) | (_, ChaseStatus::BudgetExhausted) => {}
            (v, s) => prop_assert_eq!(v == FailureVerdict::Failed, s == ChaseStatus::Failed),
        }
    }

    #[test]
    fn fll_merges_are_innocuous(db in database()) {
        let rules = fll_rules();
        let rep = monitor_innocuous(&db, &rules.tgds, &rules.egds, &ChaseOptions::oblivious().with_steps(BUDGET).with_depth(usize::MAX)).unwrap();
        prop_assert!(rep.all_innocuous || rep.status == ChaseStatus::Failed);
    }

    #[test]
    fn blocking_survivors_are_a_model(db in database()) {
        let rules = fll_rules();
        let opts = ChaseOptions::oblivious().with_steps(BUDGET).with_depth(usize::MAX);
        let Ok(b) = blocking_chase(&db, &rules.tgds, &rules.egds, &opts) else { return Ok(()) };
        if b.status != ChaseStatus::Saturated {
            return Ok(());
        }
        prop_assert!(db.is_subset(&b.survivors));
        prop_assert!(b.survivors.is_subset(&b.all));
        for t in &rules.tgds {
            for h in all_homs(&t.body, &b.survivors) {
                prop_assert!(head_satisfied(t, &h, &b.survivors), "{} unsatisfied", t);
            }
        }
        for e in &rules.egds {
            for h in all_homs(&e.body, &b.survivors) {
                prop_assert_eq!(h.get(&e.lhs), h.get(&e.rhs));
            }
        }
    }

    #[test]
    fn separated_answers_match_interleaved(db in database()) {
        let rules = fll_rules();
        let queries = parse_program(
            "query m(O,C) :- member(O,C).\nquery d(O,A,V) :- data(O,A,V).\nquery t(C,A,T) :- type(C,A,T).\nquery b() :- data(O,A,V), member(V,C).",
        ).unwrap().queries;
        let opts = AnswerOptions { max_steps: BUDGET, memory_limit_mb: None };
        for q in &queries {
            let sep = separated_answer(&db, &rules.tgds, &rules.egds, q, Answering::Terminate, &opts).unwrap();
            let int = certain_answers(&db, &rules.tgds, &rules.egds, q, Answering::Terminate, &opts).unwrap();
            if sep.status == AnswerStatus::Exact && int.status == AnswerStatus::Exact {
                prop_assert_eq!(&sep.answers, &int.answers, "{}", q);
            }
            if int.status == AnswerStatus::Failed {
                prop_assert_eq!(sep.status, AnswerStatus::Failed);
            }
        }
    }
}

#[test]
fn constructed_conflict_is_caught() {
    let rules = fll_rules();
    let p = parse_program("fact data(o,a,c1).\nfact data(o,a,c2).\nfact member(o,k).\nfact funct(a,k).").unwrap();
    let v = egd_failure_check(&p.facts, &rules.tgds, &rules.egds, 100).unwrap();
    assert!(v.failed());
    assert_eq!(v.witness.as_ref().unwrap().0, 0);
    let full = run_chase(&p.facts, &rules.tgds, &rules.egds, &ChaseOptions::default()).unwrap();
    assert_eq!(full.status, ChaseStatus::Failed);
}
