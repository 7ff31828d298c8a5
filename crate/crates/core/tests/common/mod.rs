#![allow(dead_code)]

use std::collections::BTreeSet;

use chasekit::chase::{run_chase, ChaseOptions, ChaseStatus};
use chasekit::clouds::{canonicalize, cloud_of, CanonicalKey};
use chasekit::model::{Atom, Cq, Egd, Instance, Predicate, Program, Term, Tgd};
use chasekit::analysis::classify;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub preds: usize,
    pub max_arity: usize,
    pub max_rules: usize,
    pub max_body: usize,
    pub max_facts: usize,
    pub consts: usize,
    /// Chance, in percent, that a head argument is existential.
    pub exist_pct: u32,
}

impl Default for Shape {
    fn default() -> Self {
        Shape { preds: 4, max_arity: 3, max_rules: 4, max_body: 2, max_facts: 5, consts: 4, exist_pct: 25 }
    }
}

const CONSTS: [&str; 6] = ["a", "b", "c", "d", "e", "f"];

pub fn schema(r: &mut ChaCha8Rng, s: &Shape) -> Vec<Predicate> {
    (0..s.preds).map(|i| Predicate::new(&format!("p{i}"), r.gen_range(1..=s.max_arity))).collect()
}

pub fn constant(r: &mut ChaCha8Rng, s: &Shape) -> Term {
    Term::constant(CONSTS[r.gen_range(0..s.consts.min(CONSTS.len()))])
}

pub fn database(r: &mut ChaCha8Rng, preds: &[Predicate], s: &Shape) -> Instance {
    let mut db = Instance::new();
    for _ in 0..r.gen_range(1..=s.max_facts) {
        let p = preds.choose(r).unwrap().clone();
        let args = (0..p.arity).map(|_| constant(r, s)).collect();
        db.insert(Atom::with_predicate(p, args));
    }
    db
}

fn var(i: usize) -> Term {
    Term::var(&format!("X{i}"))
}

fn body(r: &mut ChaCha8Rng, preds: &[Predicate], s: &Shape) -> Vec<Atom> {
    let n = r.gen_range(1..=s.max_body);
    let pool = r.gen_range(1..=4);
    (0..n)
        .map(|_| {
            let p = preds.choose(r).unwrap().clone();
            let args = (0..p.arity).map(|_| var(r.gen_range(0..pool))).collect();
            Atom::with_predicate(p, args)
        })
        .collect()
}

fn head_atom(r: &mut ChaCha8Rng, preds: &[Predicate], s: &Shape, body: &[Atom]) -> Atom {
    let bv: Vec<Term> = body.iter().flat_map(|a| a.args.iter().cloned()).collect::<BTreeSet<_>>().into_iter().collect();
    let p = preds.choose(r).unwrap().clone();
    let args = (0..p.arity)
        .map(|_| {
            if r.gen_ratio(s.exist_pct, 100) {
                Term::var(if r.gen_bool(0.7) { "Z1" } else { "Z2" })
            } else {
                bv.choose(r).unwrap().clone()
            }
        })
        .collect();
    Atom::with_predicate(p, args)
}

pub fn tgd(r: &mut ChaCha8Rng, preds: &[Predicate], s: &Shape) -> Tgd {
    let b = body(r, preds, s);
    let h = head_atom(r, preds, s, &b);
    Tgd::new(b, vec![h])
}

pub fn egd(r: &mut ChaCha8Rng, preds: &[Predicate], s: &Shape) -> Option<Egd> {
    let b = body(r, preds, s);
    let vars = chasekit::model::variables_of(&b);
    if vars.len() < 2 {
        return None;
    }
    let mut pick = vars.clone();
    pick.shuffle(r);
    Some(Egd { body: b, lhs: pick[0].clone(), rhs: pick[1].clone() })
}

pub fn tgds(r: &mut ChaCha8Rng, preds: &[Predicate], s: &Shape) -> Vec<Tgd> {
    (0..r.gen_range(1..=s.max_rules)).map(|_| tgd(r, preds, s)).collect()
}

/// Random query over `preds`; head variables are drawn from the body.
pub fn cq(r: &mut ChaCha8Rng, preds: &[Predicate], max_atoms: usize, max_vars: usize, max_head: usize) -> Cq {
    let n = r.gen_range(1..=max_atoms);
    let pool = r.gen_range(1..=max_vars);
    let body: Vec<Atom> = (0..n)
        .map(|_| {
            let p = preds.choose(r).unwrap().clone();
            let args = (0..p.arity)
                .map(|_| if r.gen_ratio(1, 8) { Term::constant(CONSTS[r.gen_range(0..3)]) } else { var(r.gen_range(0..pool)) })
                .collect();
            Atom::with_predicate(p, args)
        })
        .collect();
    let vars = chasekit::model::variables_of(&body);
    let k = r.gen_range(0..=max_head.min(vars.len()));
    let head: Vec<&str> = vars.iter().take(k).map(|v| &**v).collect();
    Cq::new("q", &head, body)
}

/// Boolean query made of up to `max_atoms` atoms of `inst`, with every null
/// and some constants turned into variables. Mostly entailed by `inst`.
pub fn cq_from(r: &mut ChaCha8Rng, inst: &Instance, max_atoms: usize) -> Cq {
    let atoms: Vec<&Atom> = inst.iter().collect();
    let with_nulls: Vec<&Atom> = inst.iter().filter(|a| a.has_nulls()).collect();
    let n = r.gen_range(1..=max_atoms);
    let mut names: Vec<(Term, Term)> = Vec::new();
    let mut body = Vec::new();
    for _ in 0..n {
        let from = if !with_nulls.is_empty() && r.gen_ratio(2, 3) { &with_nulls } else { &atoms };
        let a = from.choose(r).unwrap();
        body.push(a.map_terms(|t| {
            if let Some((_, v)) = names.iter().find(|(x, _)| x == t) {
                return v.clone();
            }
            if t.is_constant() && r.gen_ratio(1, 2) {
                return t.clone();
            }
            let v = var(names.len());
            names.push((t.clone(), v.clone()));
            v
        }));
    }
    if r.gen_ratio(1, 4) {
        // Break entailment now and then by gluing two variables.
        if let [(_, a), (_, b), ..] = names.as_slice() {
            let (a, b) = (a.clone(), b.clone());
            body = body.iter().map(|x| x.map_terms(|t| if *t == b { a.clone() } else { t.clone() })).collect();
        }
    }
    Cq::new("q", &[], body)
}

/// A random program: facts, TGDs (sometimes with two head atoms), EGDs and
/// queries.
pub fn program(r: &mut ChaCha8Rng) -> Program {
    let s = Shape { preds: r.gen_range(1..=5), max_rules: 5, ..Shape::default() };
    let preds = schema(r, &s);
    let facts = database(r, &preds, &s);
    let mut tg = Vec::new();
    for _ in 0..r.gen_range(0..=s.max_rules) {
        let b = body(r, &preds, &s);
        let n = if r.gen_ratio(1, 4) { 2 } else { 1 };
        let head = (0..n).map(|_| head_atom(r, &preds, &s, &b)).collect();
        let t = Tgd::new(b, head);
        tg.push(t);
    }
    let egds = (0..r.gen_range(0..=2)).filter_map(|_| egd(r, &preds, &s)).collect();
    let mut queries = Vec::new();
    for i in 0..r.gen_range(0..=2) {
        let mut q = cq(r, &preds, 3, 3, 2);
        q.name = format!("q{i}").as_str().into();
        queries.push(q);
    }
    Program { facts, tgds: tg, egds, queries }
}

pub fn is_wg(tgds: &[Tgd]) -> bool {
    classify(tgds).overall.is_weakly_guarded()
}

/// Random weakly guarded suite.
pub fn wg_suite(r: &mut ChaCha8Rng, s: &Shape) -> (Vec<Predicate>, Instance, Vec<Tgd>) {
    loop {
        let preds = schema(r, s);
        let t = tgds(r, &preds, s);
        if is_wg(&t) {
            let db = database(r, &preds, s);
            return (preds, db, t);
        }
    }
}

/// Random suite whose oblivious chase saturates within `budget` steps.
pub fn terminating_suite(r: &mut ChaCha8Rng, s: &Shape, wg: bool, budget: usize) -> (Vec<Predicate>, Instance, Vec<Tgd>) {
    loop {
        let preds = schema(r, s);
        let t = tgds(r, &preds, s);
        if wg && !is_wg(&t) {
            continue;
        }
        let db = database(r, &preds, s);
        let opts = ChaseOptions::oblivious().with_steps(budget).with_depth(usize::MAX);
        if run_chase(&db, &t, &[], &opts).map(|c| c.saturated()).unwrap_or(false) {
            return (preds, db, t);
        }
    }
}

pub fn ground_part(inst: &Instance, db: &Instance) -> BTreeSet<Atom> {
    let dom = db.domain();
    inst.iter().filter(|a| a.args.iter().all(|t| dom.contains(t))).cloned().collect()
}

/// Canonical (atom, cloud) keys of every atom in `inst`.
pub fn cloud_classes(inst: &Instance, db: &Instance) -> BTreeSet<CanonicalKey> {
    inst.iter()
        .map(|a| {
            let c = cloud_of(inst, db, a).unwrap();
            canonicalize(a, &c, db).unwrap()
        })
        .collect()
}

pub enum Oracle {
    Ground(BTreeSet<Atom>),
    Inconclusive,
}

/// Oblivious chase with growing depth bound until both the ground atoms
/// and the atom classes modulo D-isomorphism stop changing for two
/// consecutive depths, or the run saturates outright.
pub fn bounded_oracle(db: &Instance, tgds: &[Tgd], max_depth: usize, step_cap: usize) -> Oracle {
    let mut history: Vec<(BTreeSet<Atom>, BTreeSet<CanonicalKey>)> = Vec::new();
    for d in 1..=max_depth {
        let opts = ChaseOptions::oblivious().with_steps(step_cap).with_depth(d);
        let r = run_chase(db, tgds, &[], &opts).unwrap();
        let ground = ground_part(&r.instance, db);
        if r.saturated() {
            return Oracle::Ground(ground);
        }
        if r.status == ChaseStatus::BudgetExhausted && r.steps.len() >= step_cap {
            return Oracle::Inconclusive;
        }
        history.push((ground, cloud_classes(&r.instance, db)));
        let n = history.len();
        if n >= 3 && history[n - 1] == history[n - 2] && history[n - 2] == history[n - 3] {
            return Oracle::Ground(history.pop().unwrap().0);
        }
    }
    Oracle::Inconclusive
}
