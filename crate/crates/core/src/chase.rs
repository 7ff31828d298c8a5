//! Trigger discovery, TGD and EGD application, and the chase driver with its
//! guarded chase forest.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::ops::ControlFlow;

use thiserror::Error;

use crate::analysis::classify;
use crate::hom::{find_hom, Pattern, Search};
use crate::model::{Atom, Egd, Instance, NullAllocator, Substitution, Term, Tgd};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChaseError {
    #[error("{0} must be positive")]
    ZeroBudget(&'static str),
    #[error("rule#{rule} has {atoms} head atoms; normalize heads first")]
    MultiHead { rule: usize, atoms: usize },
    #[error("restricted triggers are only defined for tgds")]
    RestrictedEgd,
    #[error("database atom {0} contains variables")]
    NonGround(Atom),
    #[error("egd trigger is already satisfied")]
    SatisfiedEgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Fire every trigger once.
    Oblivious,
    /// Fire a trigger only if its head is not yet satisfied.
    Restricted,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Oblivious => "oblivious",
            Mode::Restricted => "restricted",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChaseOptions {
    pub mode: Mode,
    /// Maximum number of recorded steps (new atoms plus equality merges).
    pub max_steps: usize,
    /// Maximum forest depth of a derived atom; deeper triggers are skipped
    /// and the run reports an exhausted budget.
    pub max_depth: usize,
    /// Apply EGDs to a fixpoint after every TGD step. When false, EGDs are
    /// ignored by the run.
    pub egd_interleave: bool,
    /// Soft cap on resident memory.
    pub memory_limit_mb: Option<u64>,
}

impl Default for ChaseOptions {
    fn default() -> Self {
        ChaseOptions { mode: Mode::Restricted, max_steps: 10_000, max_depth: 64, egd_interleave: true, memory_limit_mb: None }
    }
}

impl ChaseOptions {
    pub fn oblivious() -> ChaseOptions {
        ChaseOptions { mode: Mode::Oblivious, ..ChaseOptions::default() }
    }

    pub fn restricted() -> ChaseOptions {
        ChaseOptions::default()
    }

    pub fn with_steps(mut self, n: usize) -> ChaseOptions {
        self.max_steps = n;
        self
    }

    pub fn with_depth(mut self, n: usize) -> ChaseOptions {
        self.max_depth = n;
        self
    }

    fn validate(&self) -> Result<(), ChaseError> {
        if self.max_steps == 0 {
            return Err(ChaseError::ZeroBudget("max-steps"));
        }
        if self.max_depth == 0 {
            return Err(ChaseError::ZeroBudget("max-depth"));
        }
        Ok(())
    }
}

/// A rule together with a body homomorphism. `matched` holds the instance
/// atom ids hit by each body atom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trigger {
    pub rule: usize,
    pub hom: Substitution,
    pub matched: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
pub enum Dependency<'a> {
    Tgd(&'a Tgd),
    Egd(&'a Egd),
}

fn body_triggers(body: &[Atom], inst: &Instance) -> Vec<Trigger> {
    let pat = Pattern::new(body);
    let mut out = Vec::new();
    Search::new(&pat, inst).run(pat.empty_binding(), |b, m| {
        out.push(Trigger { rule: 0, hom: pat.to_substitution(b), matched: m.to_vec() });
        ControlFlow::Continue(())
    });
    out.sort_by(|a, b| a.matched.cmp(&b.matched));
    out
}

/// Is the head of `t` satisfied by some extension of `h` restricted to the
/// frontier?
pub fn head_satisfied(t: &Tgd, h: &Substitution, inst: &Instance) -> bool {
    find_hom(&t.head, inst, &h.restrict(&t.frontier())).is_some()
}

/// Active triggers in order of matched atom ids. Rule indexes in the
/// result are 0; callers set them.
pub fn find_triggers(dep: Dependency<'_>, inst: &Instance, mode: Mode) -> Result<Vec<Trigger>, ChaseError> {
    match dep {
        Dependency::Tgd(t) => {
            let mut ts = body_triggers(&t.body, inst);
            if mode == Mode::Restricted {
                ts.retain(|tr| !head_satisfied(t, &tr.hom, inst));
            }
            Ok(ts)
        }
        Dependency::Egd(e) => {
            if mode == Mode::Restricted {
                return Err(ChaseError::RestrictedEgd);
            }
            let mut ts = body_triggers(&e.body, inst);
            ts.retain(|tr| tr.hom.get(&e.lhs) != tr.hom.get(&e.rhs));
            Ok(ts)
        }
    }
}

/// Result of firing a TGD trigger.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Application {
    pub atom: Atom,
    pub id: usize,
    pub is_new: bool,
    /// The trigger homomorphism extended with the fresh nulls.
    pub hom: Substitution,
}

/// Fires a single-head TGD, inventing one fresh null per existential
/// variable.
pub fn apply_tgd(t: &Tgd, h: &Substitution, inst: &mut Instance, alloc: &mut NullAllocator) -> Result<Application, ChaseError> {
    if t.head.len() != 1 {
        return Err(ChaseError::MultiHead { rule: 0, atoms: t.head.len() });
    }
    let mut full = h.clone();
    for z in &t.existentials {
        full.insert(z.clone(), alloc.fresh());
    }
    let atom = t.head[0].apply(&full);
    let (id, is_new) = inst.insert(atom.clone());
    Ok(Application { atom, id, is_new, hom: full })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EgdOutcome {
    /// `replaced` (the larger term) was substituted by `kept` everywhere.
    Unified { instance: Instance, kept: Term, replaced: Term, innocuous: bool },
    /// The trigger equates two distinct constants.
    Failure { left: Term, right: Term },
}

/// Applies an EGD trigger `h` with `h(lhs) != h(rhs)`.
pub fn apply_egd(e: &Egd, h: &Substitution, inst: &Instance) -> Result<EgdOutcome, ChaseError> {
    let (l, r) = match (h.get(&e.lhs), h.get(&e.rhs)) {
        (Some(l), Some(r)) => (l.clone(), r.clone()),
        _ => return Err(ChaseError::SatisfiedEgd),
    };
    if l == r {
        return Err(ChaseError::SatisfiedEgd);
    }
    if l.is_constant() && r.is_constant() {
        return Ok(EgdOutcome::Failure { left: l, right: r });
    }
    let (kept, replaced) = if l < r { (l, r) } else { (r, l) };
    let instance = inst.replace_term(&replaced, &kept);
    let innocuous = instance.len() < inst.len() && instance.is_subset(inst);
    Ok(EgdOutcome::Unified { instance, kept, replaced, innocuous })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    Tgd { rule: usize, hom: Substitution, atom: Atom },
    Egd { rule: usize, hom: Substitution, kept: Term, replaced: Term, innocuous: bool },
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::Tgd { rule, hom, atom } => write!(f, "+ {atom} BY rule#{} WITH {hom}", rule + 1),
            Step::Egd { rule, kept, replaced, innocuous, .. } => {
                write!(f, "= {kept}<-{replaced} BY egd#{}", rule + 1)?;
                if *innocuous {
                    f.write_str(" innocuous")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForestNode {
    pub atom: Atom,
    pub parent: Option<usize>,
    /// Index of the producing TGD; `None` for database atoms.
    pub rule: Option<usize>,
    /// Trigger homomorphism extended with the invented nulls.
    pub hom: Option<Substitution>,
    /// Images of the body atoms of the producing trigger.
    pub premises: Vec<Atom>,
    /// Position in the total generation order.
    pub generation: usize,
    pub depth: usize,
    /// The label already existed when this node was created.
    pub duplicate: bool,
}

/// Guarded chase forest. Node ids equal generation order, so parents
/// always precede their children.
#[derive(Debug, Clone, Default)]
pub struct Forest {
    pub nodes: Vec<ForestNode>,
    /// False when some unguarded rule produced a parentless node.
    pub complete: bool,
    first: HashMap<Atom, usize>,
}

impl Forest {
    fn from_nodes(nodes: Vec<ForestNode>, complete: bool) -> Forest {
        let mut f = Forest { nodes, complete, first: HashMap::new() };
        f.reindex();
        f
    }

    fn reindex(&mut self) {
        self.first.clear();
        for (i, n) in self.nodes.iter().enumerate() {
            self.first.entry(n.atom.clone()).or_insert(i);
        }
    }

    /// Earliest node labeled `a`.
    pub fn node_of(&self, a: &Atom) -> Option<usize> {
        self.first.get(a).copied()
    }

    pub fn roots(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].parent.is_none())
    }

    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut ch = vec![Vec::new(); self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            if let Some(p) = n.parent {
                ch[p].push(i);
            }
        }
        ch
    }

    /// Proper descendants of `id`, in generation order.
    pub fn descendants(&self, id: usize) -> Vec<usize> {
        let mut inside = vec![false; self.nodes.len()];
        inside[id] = true;
        let mut out = Vec::new();
        for i in id + 1..self.nodes.len() {
            if let Some(p) = self.nodes[i].parent {
                if inside[p] {
                    inside[i] = true;
                    out.push(i);
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn max_depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Graphviz rendering with one node per forest node.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph forest {\n  node [shape=box];\n");
        for (i, n) in self.nodes.iter().enumerate() {
            let rule = n.rule.map(|r| format!(" [rule#{}]", r + 1)).unwrap_or_default();
            s.push_str(&format!("  n{i} [label=\"{}{rule}\"];\n", n.atom.to_string().replace('"', "\\\"")));
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if let Some(p) = n.parent {
                s.push_str(&format!("  n{p} -> n{i};\n"));
            }
        }
        s.push_str("}\n");
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChaseStatus {
    Saturated,
    BudgetExhausted,
    Failed,
}

impl fmt::Display for ChaseStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChaseStatus::Saturated => "saturated",
            ChaseStatus::BudgetExhausted => "budget-exhausted",
            ChaseStatus::Failed => "failed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FailureWitness {
    pub egd: usize,
    pub hom: Substitution,
    pub left: Term,
    pub right: Term,
}

#[derive(Debug, Clone)]
pub struct ChaseResult {
    pub instance: Instance,
    pub forest: Forest,
    pub status: ChaseStatus,
    pub steps: Vec<Step>,
    pub failure: Option<FailureWitness>,
    /// Why the run stopped early, when it did.
    pub note: Option<String>,
}

impl ChaseResult {
    pub fn saturated(&self) -> bool {
        self.status == ChaseStatus::Saturated
    }

    pub fn step_log(&self) -> String {
        self.steps.iter().map(|s| format!("{s}\n")).collect()
    }
}

enum Stop {
    Budget(Option<String>),
    Failed(FailureWitness),
}

struct Engine<'a> {
    tgds: &'a [Tgd],
    egds: &'a [Egd],
    opts: &'a ChaseOptions,
    bodies: Vec<Pattern>,
    egd_bodies: Vec<Pattern>,
    guards: Vec<Option<usize>>,
    inst: Instance,
    alloc: NullAllocator,
    forest: Forest,
    queue: VecDeque<Trigger>,
    applied: HashSet<(usize, Substitution)>,
    steps: Vec<Step>,
    pruned: bool,
    ticks: usize,
}

impl<'a> Engine<'a> {
    fn discover(&self, k: usize) -> Vec<Trigger> {
        let mut ts = discover(self.tgds, &self.bodies, &self.inst, k);
        ts.retain(|t| !self.applied.contains(&(t.rule, t.hom.clone())));
        ts
    }

    fn rebuild_queue(&mut self) {
        self.queue.clear();
        for k in 0..self.inst.len() {
            let ts = self.discover(k);
            self.queue.extend(ts);
        }
    }

    fn memory_exceeded(&mut self) -> bool {
        let Some(limit) = self.opts.memory_limit_mb else { return false };
        self.ticks += 1;
        if !self.ticks.is_multiple_of(512) {
            return false;
        }
        resident_mb().is_some_and(|mb| mb > limit)
    }

    fn node_depth(&self, a: &Atom) -> usize {
        self.forest.node_of(a).map(|n| self.forest.nodes[n].depth).unwrap_or(0)
    }

    fn run(&mut self) -> Result<(), Stop> {
        self.drain_egds()?;
        self.rebuild_queue();
        while let Some(tr) = self.queue.pop_front() {
            if self.memory_exceeded() {
                self.queue.push_front(tr);
                return Err(Stop::Budget(Some("memory limit reached".into())));
            }
            let key = (tr.rule, tr.hom.clone());
            if self.applied.contains(&key) {
                continue;
            }
            let t = &self.tgds[tr.rule];
            if self.opts.mode == Mode::Restricted && head_satisfied(t, &tr.hom, &self.inst) {
                continue;
            }
            let premises: Vec<Atom> = t.body.iter().map(|b| b.apply(&tr.hom)).collect();
            let parent = self.guards[tr.rule].and_then(|g| self.forest.node_of(&premises[g]));
            let depth = match parent {
                Some(p) => self.forest.nodes[p].depth + 1,
                None => 1 + premises.iter().map(|a| self.node_depth(a)).max().unwrap_or(0),
            };
            if depth > self.opts.max_depth {
                self.pruned = true;
                continue;
            }
            let would_be_new = !t.is_full() || !self.inst.contains(&t.head[0].apply(&tr.hom));
            if would_be_new && self.steps.len() >= self.opts.max_steps {
                self.queue.push_front(tr);
                return Err(Stop::Budget(None));
            }
            let app = apply_tgd(t, &tr.hom, &mut self.inst, &mut self.alloc).expect("heads are normalized");
            self.applied.insert(key);
            if parent.is_none() && self.guards[tr.rule].is_none() {
                self.forest.complete = false;
            }
            let gen = self.forest.nodes.len();
            self.forest.nodes.push(ForestNode {
                atom: app.atom.clone(),
                parent,
                rule: Some(tr.rule),
                hom: Some(app.hom),
                premises,
                generation: gen,
                depth,
                duplicate: !app.is_new,
            });
            if !app.is_new {
                continue;
            }
            self.forest.first.insert(app.atom.clone(), gen);
            self.steps.push(Step::Tgd { rule: tr.rule, hom: tr.hom, atom: app.atom });
            let fresh = self.discover(app.id);
            self.queue.extend(fresh);
            if self.drain_egds()? {
                self.rebuild_queue();
            }
        }
        if self.pruned {
            return Err(Stop::Budget(Some("depth limit reached".into())));
        }
        Ok(())
    }

    fn first_egd_trigger(&self) -> Option<(usize, Substitution)> {
        for (ei, e) in self.egds.iter().enumerate() {
            let pat = &self.egd_bodies[ei];
            let (l, r) = (pat.var_index(&e.lhs).unwrap(), pat.var_index(&e.rhs).unwrap());
            let mut hit = None;
            Search::new(pat, &self.inst).run(pat.empty_binding(), |b, _| {
                if b[l] != b[r] {
                    hit = Some(pat.to_substitution(b));
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            });
            if let Some(h) = hit {
                return Some((ei, h));
            }
        }
        None
    }

    /// Applies EGDs until none is active. Returns whether any merge happened.
    fn drain_egds(&mut self) -> Result<bool, Stop> {
        if !self.opts.egd_interleave {
            return Ok(false);
        }
        let mut merged = false;
        while let Some((ei, h)) = self.first_egd_trigger() {
            if self.steps.len() >= self.opts.max_steps {
                return Err(Stop::Budget(None));
            }
            match apply_egd(&self.egds[ei], &h, &self.inst).expect("trigger is active") {
                EgdOutcome::Failure { left, right } => {
                    return Err(Stop::Failed(FailureWitness { egd: ei, hom: h, left, right }));
                }
                EgdOutcome::Unified { instance, kept, replaced, innocuous } => {
                    self.inst = instance;
                    self.rename(&replaced, &kept);
                    self.steps.push(Step::Egd { rule: ei, hom: h, kept, replaced, innocuous });
                    merged = true;
                }
            }
        }
        Ok(merged)
    }

    fn rename(&mut self, old: &Term, new: &Term) {
        let sub = |t: &Term| if t == old { new.clone() } else { t.clone() };
        for n in &mut self.forest.nodes {
            n.atom = n.atom.map_terms(sub);
            n.premises = n.premises.iter().map(|a| a.map_terms(sub)).collect();
            n.hom = n.hom.as_ref().map(|h| h.map_terms(sub));
        }
        self.forest.reindex();
        self.applied = self.applied.drain().map(|(r, h)| (r, h.map_terms(sub))).collect();
    }
}

/// Triggers in which atom `k` is matched by some body atom, with every
/// earlier body atom matched below `k` and the others at or below `k`.
/// Replaying this for every id enumerates each trigger exactly once, in
/// order of the largest matched id, then rule, then matched ids.
pub(crate) fn discover(tgds: &[Tgd], bodies: &[Pattern], inst: &Instance, k: usize) -> Vec<Trigger> {
    let atom = inst.get(k);
    let mut out = Vec::new();
    for (ri, t) in tgds.iter().enumerate() {
        let pat = &bodies[ri];
        let mut found = Vec::new();
        for (i, b) in t.body.iter().enumerate() {
            if b.predicate != atom.predicate {
                continue;
            }
            let filter = |pj: usize, id: usize| if pj < i { id < k } else { id <= k };
            let mut s = Search::new(pat, inst);
            s.pin = Some((i, k));
            s.filter = Some(&filter);
            s.run(pat.empty_binding(), |bind, m| {
                found.push(Trigger { rule: ri, hom: pat.to_substitution(bind), matched: m.to_vec() });
                ControlFlow::Continue(())
            });
        }
        found.sort_by(|a, b| a.matched.cmp(&b.matched));
        out.extend(found);
    }
    out
}

/// Resident set size in megabytes, where the platform exposes it.
fn resident_mb() -> Option<u64> {
    let statm = std::fs::read_to_string("/proc/self/statm").ok()?;
    let pages: u64 = statm.split_whitespace().nth(1)?.parse().ok()?;
    Some(pages * 4096 / (1024 * 1024))
}

/// Runs the chase of `db` under single-head `tgds` and, when interleaving
/// is enabled, `egds`. Triggers are processed first-in first-out.
pub fn run_chase(db: &Instance, tgds: &[Tgd], egds: &[Egd], opts: &ChaseOptions) -> Result<ChaseResult, ChaseError> {
    opts.validate()?;
    for (i, t) in tgds.iter().enumerate() {
        if t.head.len() != 1 {
            return Err(ChaseError::MultiHead { rule: i + 1, atoms: t.head.len() });
        }
    }
    if let Some(a) = db.iter().find(|a| !a.is_ground()) {
        return Err(ChaseError::NonGround(a.clone()));
    }
    let class = classify(tgds);
    let roots: Vec<ForestNode> = db
        .iter()
        .enumerate()
        .map(|(i, a)| ForestNode {
            atom: a.clone(),
            parent: None,
            rule: None,
            hom: None,
            premises: Vec::new(),
            generation: i,
            depth: 0,
            duplicate: false,
        })
        .collect();
    let mut eng = Engine {
        tgds,
        egds,
        opts,
        bodies: tgds.iter().map(|t| Pattern::new(&t.body)).collect(),
        egd_bodies: egds.iter().map(|e| Pattern::new(&e.body)).collect(),
        guards: class.per_rule.iter().map(|r| r.forest_guard()).collect(),
        inst: db.clone(),
        alloc: NullAllocator::seeded(db),
        forest: Forest::from_nodes(roots, true),
        queue: VecDeque::new(),
        applied: HashSet::new(),
        steps: Vec::new(),
        pruned: false,
        ticks: 0,
    };
    let outcome = eng.run();
    let (status, failure, note) = match outcome {
        Ok(()) => (ChaseStatus::Saturated, None, None),
        Err(Stop::Budget(note)) => (ChaseStatus::BudgetExhausted, None, note),
        Err(Stop::Failed(w)) => {
            let note = format!("egd#{} equates constants {} and {}", w.egd + 1, w.left, w.right);
            (ChaseStatus::Failed, Some(w), Some(note))
        }
    };
    Ok(ChaseResult { instance: eng.inst, forest: eng.forest, status, steps: eng.steps, failure, note })
}

/// Drops every node whose label already labels an earlier node, together
/// with its subtree.
pub fn restricted_gcf(forest: &Forest) -> Forest {
    let mut seen: HashSet<&Atom> = HashSet::new();
    let mut new_id: Vec<Option<usize>> = vec![None; forest.nodes.len()];
    let mut nodes = Vec::new();
    for (i, n) in forest.nodes.iter().enumerate() {
        let first = seen.insert(&n.atom);
        let parent_kept = n.parent.map_or(Some(None), |p| new_id[p].map(Some));
        if let (true, Some(parent)) = (first, parent_kept) {
            new_id[i] = Some(nodes.len());
            let mut m = n.clone();
            m.parent = parent;
            nodes.push(m);
        }
    }
    Forest::from_nodes(nodes, forest.complete)
}

/// Splits `inst` into atoms over `dom(db)` and the rest.
pub fn split_ground(inst: &Instance, db: &Instance) -> (Instance, Instance) {
    let dom = db.domain();
    let mut ground = Instance::new();
    let mut rest = Instance::new();
    for a in inst.iter() {
        if a.args.iter().all(|t| dom.contains(t)) {
            ground.insert(a.clone());
        } else {
            rest.insert(a.clone());
        }
    }
    (ground, rest)
}

/// Closes `seed ∪ {a}` under the derivations recorded in the subtree of the
/// earliest node labeled `a`: a descendant's atom is added once all of its
/// premises are present.
pub fn subtree_closure(forest: &Forest, a: &Atom, seed: &BTreeSet<Atom>) -> BTreeSet<Atom> {
    let mut closure = seed.clone();
    closure.insert(a.clone());
    let Some(root) = forest.node_of(a) else { return closure };
    let desc = forest.descendants(root);
    loop {
        let mut changed = false;
        for &d in &desc {
            let n = &forest.nodes[d];
            if !closure.contains(&n.atom) && n.premises.iter().all(|p| closure.contains(p)) {
                closure.insert(n.atom.clone());
                changed = true;
            }
        }
        if !changed {
            return closure;
        }
    }
}

/// Labels of the earliest node for `a` and all its descendants.
pub fn subtree_atoms(forest: &Forest, a: &Atom) -> BTreeSet<Atom> {
    let Some(root) = forest.node_of(a) else { return BTreeSet::new() };
    std::iter::once(root).chain(forest.descendants(root)).map(|i| forest.nodes[i].atom.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;

    const EX26: &str = "fact r1(a,b).\n\
        tgd r3(X,Y) -> r2(X).\n\
        tgd r1(X,Y) -> exists Z: r3(Y,Z).\n\
        tgd r1(X,Y), r2(Y) -> exists Z: r1(Y,Z).\n\
        tgd r1(X,Y) -> r2(Y).\n";

    fn c(s: &str) -> Term {
        Term::constant(s)
    }

    #[test]
    fn oblivious_listing_prefix() {
        let p = parse_program(EX26).unwrap();
        let r = run_chase(&p.facts, &p.tgds, &[], &ChaseOptions::oblivious().with_steps(20)).unwrap();
        assert_eq!(r.status, ChaseStatus::BudgetExhausted);
        let log: Vec<String> = r.steps.iter().take(5).map(|s| s.to_string()).collect();
        assert_eq!(
            log,
            vec![
                "+ r3(b,_:n1) BY rule#2 WITH {X->a,Y->b}",
                "+ r2(b) BY rule#4 WITH {X->a,Y->b}",
                "+ r1(b,_:n2) BY rule#3 WITH {X->a,Y->b}",
                "+ r3(_:n2,_:n3) BY rule#2 WITH {X->b,Y->_:n2}",
                "+ r2(_:n2) BY rule#4 WITH {X->b,Y->_:n2}",
            ]
        );
    }

    #[test]
    fn duplicate_node_is_pruned_in_restricted_forest() {
        let p = parse_program(EX26).unwrap();
        let r = run_chase(&p.facts, &p.tgds, &[], &ChaseOptions::oblivious().with_steps(20)).unwrap();
        let dups: Vec<&ForestNode> = r.forest.nodes.iter().filter(|n| n.duplicate).collect();
        assert!(dups.iter().any(|n| n.atom == Atom::new("r2", vec![c("b")]) && n.depth == 2));
        let rf = restricted_gcf(&r.forest);
        assert!(rf.nodes.iter().all(|n| !n.duplicate));
        assert_eq!(rf.len(), r.instance.len());
    }

    #[test]
    fn empty_database_saturates_immediately() {
        let p = parse_program(EX26).unwrap();
        let r = run_chase(&Instance::new(), &p.tgds, &[], &ChaseOptions::default()).unwrap();
        assert!(r.saturated());
        assert!(r.steps.is_empty());
    }

    #[test]
    fn zero_budget_is_rejected() {
        let p = parse_program(EX26).unwrap();
        let e = run_chase(&p.facts, &p.tgds, &[], &ChaseOptions::default().with_steps(0)).unwrap_err();
        assert_eq!(e, ChaseError::ZeroBudget("max-steps"));
    }

    #[test]
    fn restricted_trigger_skips_satisfied_head() {
        let p = parse_program("fact r(a,b).\nfact s(b,c).\ntgd r(X,Y) -> exists Z: s(Y,Z).").unwrap();
        let ts = find_triggers(Dependency::Tgd(&p.tgds[0]), &p.facts, Mode::Restricted).unwrap();
        assert!(ts.is_empty());
        let ts = find_triggers(Dependency::Tgd(&p.tgds[0]), &p.facts, Mode::Oblivious).unwrap();
        assert_eq!(ts.len(), 1);
    }

    #[test]
    fn egd_trigger_kinds() {
        let p = parse_program("fact p(a,b).\nfact p(a,a).\negd p(X,Y) -> X = Y.").unwrap();
        let e = Dependency::Egd(&p.egds[0]);
        assert_eq!(find_triggers(e, &p.facts, Mode::Restricted), Err(ChaseError::RestrictedEgd));
        let ts = find_triggers(e, &p.facts, Mode::Oblivious).unwrap();
        assert_eq!(ts.len(), 1);
        let out = apply_egd(&p.egds[0], &ts[0].hom, &p.facts).unwrap();
        assert_eq!(out, EgdOutcome::Failure { left: c("a"), right: c("b") });
    }

    #[test]
    fn egd_merge_prefers_constants() {
        let p = parse_program("egd p(X,Y) -> X = Y.").unwrap();
        let inst: Instance =
            [Atom::new("p", vec![Term::null(4), c("a")]), Atom::new("p", vec![c("a"), c("a")])].into_iter().collect();
        let h = find_triggers(Dependency::Egd(&p.egds[0]), &inst, Mode::Oblivious).unwrap().remove(0);
        match apply_egd(&p.egds[0], &h.hom, &inst).unwrap() {
            EgdOutcome::Unified { instance, kept, replaced, innocuous } => {
                assert_eq!((kept, replaced), (c("a"), Term::null(4)));
                assert!(innocuous);
                assert_eq!(instance.len(), 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn interleaved_chase_fails_on_conflict() {
        let p = parse_program(
            "fact data(o,a,c1).\nfact data(o,a,c2).\nfact funct(a,o).\negd data(O,A,V), data(O,A,W), funct(A,O) -> V = W.",
        )
        .unwrap();
        let r = run_chase(&p.facts, &p.tgds, &p.egds, &ChaseOptions::default()).unwrap();
        assert_eq!(r.status, ChaseStatus::Failed);
        assert!(r.failure.is_some());
    }

    #[test]
    fn step_log_reports_merges() {
        let p = parse_program(
            "fact m(a,o).\nfact data(o,a,v).\nfact funct(a,o).\n\
             tgd m(A,O) -> exists V: data(O,A,V).\n\
             egd data(O,A,V), data(O,A,W), funct(A,O) -> V = W.",
        )
        .unwrap();
        let r = run_chase(&p.facts, &p.tgds, &p.egds, &ChaseOptions::oblivious()).unwrap();
        assert!(r.saturated());
        assert_eq!(r.step_log(), "+ data(o,a,_:n1) BY rule#1 WITH {A->a,O->o}\n= v<-_:n1 BY egd#1 innocuous\n");
        assert_eq!(r.instance.len(), 3);
    }

    #[test]
    fn depth_bound_reports_budget() {
        let p = parse_program("fact n(a).\ntgd n(X) -> exists Y: e(X,Y).\ntgd e(X,Y) -> n(Y).").unwrap();
        let r = run_chase(&p.facts, &p.tgds, &[], &ChaseOptions::oblivious().with_depth(4)).unwrap();
        assert_eq!(r.status, ChaseStatus::BudgetExhausted);
        assert_eq!(r.forest.max_depth(), 4);
        assert_eq!(r.instance.len(), 5);
    }

    #[test]
    fn split_ground_by_database_domain() {
        let db: Instance = [Atom::new("p", vec![c("a")])].into_iter().collect();
        let inst: Instance = [Atom::new("p", vec![c("a")]), Atom::new("q", vec![c("a"), Term::null(1)])].into_iter().collect();
        let (g, n) = split_ground(&inst, &db);
        assert_eq!(g.len(), 1);
        assert_eq!(n.len(), 1);
    }
}
