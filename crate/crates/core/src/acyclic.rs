//! [S]-acyclicity, join forests, tree decompositions and squid
//! decompositions of Boolean queries.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;
use std::ops::ControlFlow;
use std::sync::Arc;

use thiserror::Error;

use crate::analysis::classify;
use crate::chase::{restricted_gcf, run_chase, split_ground, ChaseOptions, Forest};
use crate::hom::{Pattern, Search};
use crate::model::{Atom, Cq, Instance, Predicate, Substitution, Term, Tgd};
use crate::query::holds;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AcyclicityError {
    #[error("atom {0} has no node")]
    Unlabeled(Atom),
    #[error("node {0} is labeled by an atom outside the set")]
    Foreign(usize),
    #[error("nodes holding {0} are not connected")]
    Disconnected(Term),
    #[error("parent links do not form a forest")]
    NotAForest,
    #[error("no bag contains all terms of {0}")]
    Uncovered(Atom),
}

/// Labeled forest over an atom set; node `i` is labeled `atoms[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoinForest {
    pub atoms: Vec<Atom>,
    pub parent: Vec<Option<usize>>,
    /// Values exempt from the connectedness requirement.
    pub hidden: BTreeSet<Term>,
}

impl JoinForest {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn roots(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.parent[i].is_none()).collect()
    }

    /// Checks that every atom of `atoms` labels a node, that every label is
    /// in `atoms`, and that each value outside `hidden` induces a connected
    /// subforest.
    pub fn validate(&self, atoms: &[Atom]) -> Result<(), AcyclicityError> {
        let labels: BTreeSet<&Atom> = self.atoms.iter().collect();
        let wanted: BTreeSet<&Atom> = atoms.iter().collect();
        if let Some(a) = wanted.iter().find(|a| !labels.contains(*a)) {
            return Err(AcyclicityError::Unlabeled((*a).clone()));
        }
        if let Some(i) = self.atoms.iter().position(|a| !wanted.contains(a)) {
            return Err(AcyclicityError::Foreign(i));
        }
        check_forest(&self.parent)?;
        let bags: Vec<BTreeSet<Term>> = self.atoms.iter().map(|a| a.args.iter().cloned().collect()).collect();
        check_connected(&bags, &self.parent, &self.hidden)
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph joinforest {\n");
        for (i, a) in self.atoms.iter().enumerate() {
            let _ = writeln!(s, "  n{i} [label=\"{a}\"];");
        }
        for (i, p) in self.parent.iter().enumerate() {
            if let Some(p) = p {
                let _ = writeln!(s, "  n{p} -> n{i};");
            }
        }
        s.push_str("}\n");
        s
    }
}

fn check_forest(parent: &[Option<usize>]) -> Result<(), AcyclicityError> {
    for start in 0..parent.len() {
        let mut cur = start;
        let mut steps = 0;
        while let Some(p) = parent[cur] {
            if p >= parent.len() || steps > parent.len() {
                return Err(AcyclicityError::NotAForest);
            }
            cur = p;
            steps += 1;
        }
    }
    Ok(())
}

/// In a forest, a node set is connected iff it has exactly one node fewer
/// edges than nodes.
fn check_connected(
    bags: &[BTreeSet<Term>],
    parent: &[Option<usize>],
    hidden: &BTreeSet<Term>,
) -> Result<(), AcyclicityError> {
    let mut nodes: BTreeMap<&Term, usize> = BTreeMap::new();
    let mut edges: BTreeMap<&Term, usize> = BTreeMap::new();
    for (i, bag) in bags.iter().enumerate() {
        for t in bag {
            if hidden.contains(t) {
                continue;
            }
            *nodes.entry(t).or_default() += 1;
            if parent[i].is_some_and(|p| bags[p].contains(t)) {
                *edges.entry(t).or_default() += 1;
            }
        }
    }
    for (t, n) in nodes {
        if edges.get(t).copied().unwrap_or(0) + 1 != n {
            return Err(AcyclicityError::Disconnected(t.clone()));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeDecomposition {
    pub bags: Vec<BTreeSet<Term>>,
    pub parent: Vec<Option<usize>>,
}

impl TreeDecomposition {
    pub fn width(&self) -> usize {
        self.bags.iter().map(|b| b.len()).max().unwrap_or(1).saturating_sub(1)
    }

    /// Every atom's terms lie together in some bag (which also covers every
    /// value and every Gaifman edge), and each value's bags are connected.
    pub fn validate(&self, atoms: &[Atom]) -> Result<(), AcyclicityError> {
        check_forest(&self.parent)?;
        if self.parent.iter().filter(|p| p.is_none()).count() > 1 {
            return Err(AcyclicityError::NotAForest);
        }
        let mut by_term: HashMap<&Term, Vec<usize>> = HashMap::new();
        for (i, b) in self.bags.iter().enumerate() {
            for t in b {
                by_term.entry(t).or_default().push(i);
            }
        }
        for a in atoms {
            let Some(first) = a.args.first() else { continue };
            let ok = by_term
                .get(first)
                .is_some_and(|bs| bs.iter().any(|&i| a.args.iter().all(|t| self.bags[i].contains(t))));
            if !ok {
                return Err(AcyclicityError::Uncovered(a.clone()));
            }
        }
        check_connected(&self.bags, &self.parent, &BTreeSet::new())
    }
}

/// Decides [S]-acyclicity of `atoms` by a GYO-style ear removal on the
/// hyperedges `dom(a) − S`. On success returns a join forest and the tree
/// decomposition obtained by hanging the forest under one bag holding the
/// values of `S` that occur in the atoms, with `S` added to every bag.
pub fn s_join_forest(atoms: &[Atom], s: &BTreeSet<Term>) -> Option<(JoinForest, TreeDecomposition)> {
    let mut uniq: Vec<Atom> = Vec::new();
    let mut seen = BTreeSet::new();
    for a in atoms {
        if seen.insert(a) {
            uniq.push(a.clone());
        }
    }
    let edges: Vec<BTreeSet<Term>> =
        uniq.iter().map(|a| a.args.iter().filter(|t| !s.contains(*t)).cloned().collect()).collect();
    let parent = gyo(&edges)?;
    let forest = JoinForest { atoms: uniq, parent, hidden: s.clone() };
    let td = decomposition_of(&forest);
    Some((forest, td))
}

fn gyo(edges: &[BTreeSet<Term>]) -> Option<Vec<Option<usize>>> {
    let n = edges.len();
    let mut holders: HashMap<&Term, BTreeSet<usize>> = HashMap::new();
    for (i, e) in edges.iter().enumerate() {
        for t in e {
            holders.entry(t).or_default().insert(i);
        }
    }
    let mut alive = vec![true; n];
    let mut parent = vec![None; n];
    let mut queued = vec![true; n];
    let mut queue: VecDeque<usize> = (0..n).collect();
    let mut removed = 0;
    while let Some(i) = queue.pop_front() {
        queued[i] = false;
        if !alive[i] {
            continue;
        }
        let shared: Vec<&Term> = edges[i].iter().filter(|t| holders[t].len() > 1).collect();
        let witness = match shared.first() {
            None => Some(None),
            Some(t0) => holders[*t0]
                .iter()
                .copied()
                .find(|&j| j != i && shared.iter().all(|t| edges[j].contains(*t)))
                .map(Some),
        };
        let Some(p) = witness else { continue };
        alive[i] = false;
        parent[i] = p;
        removed += 1;
        for t in &edges[i] {
            let hs = holders.get_mut(t).expect("indexed");
            hs.remove(&i);
            for &j in hs.iter() {
                if !queued[j] {
                    queued[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    (removed == n).then_some(parent)
}

fn decomposition_of(forest: &JoinForest) -> TreeDecomposition {
    let adom: BTreeSet<&Term> = forest.atoms.iter().flat_map(|a| &a.args).collect();
    let root: BTreeSet<Term> = forest.hidden.iter().filter(|t| adom.contains(t)).cloned().collect();
    let mut bags = vec![root.clone()];
    let mut parent = vec![None];
    for (i, a) in forest.atoms.iter().enumerate() {
        let mut b = root.clone();
        b.extend(a.args.iter().cloned());
        bags.push(b);
        parent.push(Some(forest.parent[i].map_or(0, |p| p + 1)));
    }
    TreeDecomposition { bags, parent }
}

/// Join forest read off the guarded chase forest: one node per atom,
/// first occurrences only, with `dom(db)` hidden.
pub fn forest_from_gcf(forest: &Forest, db: &Instance) -> JoinForest {
    let r = restricted_gcf(forest);
    JoinForest {
        atoms: r.nodes.iter().map(|n| n.atom.clone()).collect(),
        parent: r.nodes.iter().map(|n| n.parent).collect(),
        hidden: db.domain(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SquidDecomposition {
    pub q_plus: Vec<Atom>,
    /// Variable map; variables not listed map to themselves.
    pub h: BTreeMap<Arc<str>, Arc<str>>,
    pub head: Vec<Atom>,
    pub tentacles: Vec<Atom>,
    pub v_delta: BTreeSet<Arc<str>>,
    pub forest: JoinForest,
}

impl SquidDecomposition {
    /// `h(Q+)`, head atoms first.
    pub fn image(&self) -> Vec<Atom> {
        self.head.iter().chain(&self.tentacles).cloned().collect()
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph squid {\n  head [shape=box,label=\"");
        let hs: Vec<String> = self.head.iter().map(|a| a.to_string()).collect();
        s.push_str(&hs.join("\\n"));
        s.push_str("\"];\n");
        for (i, a) in self.forest.atoms.iter().enumerate() {
            let _ = writeln!(s, "  t{i} [label=\"{a}\"];");
            match self.forest.parent[i] {
                Some(p) => {
                    let _ = writeln!(s, "  t{p} -> t{i};");
                }
                None => {
                    let _ = writeln!(s, "  head -> t{i};");
                }
            }
        }
        s.push_str("}\n");
        s
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SquidError {
    #[error("cover misses query atom {0}")]
    MissingAtom(Atom),
    #[error("cover has {found} atoms, more than {max}")]
    CoverTooLarge { found: usize, max: usize },
    #[error("{0} is not a variable of the cover")]
    ForeignVariable(Arc<str>),
    #[error("tentacles are not acyclic relative to the chosen variables")]
    CyclicTentacles,
    #[error("rules are not weakly guarded")]
    NotWeaklyGuarded,
}

fn rename(a: &Atom, h: &BTreeMap<Arc<str>, Arc<str>>) -> Atom {
    a.map_terms(|t| match t {
        Term::Variable(v) => Term::Variable(h.get(v).cloned().unwrap_or_else(|| v.clone())),
        _ => t.clone(),
    })
}

fn vars_in(atoms: &[Atom]) -> Vec<Arc<str>> {
    crate::model::variables_of(atoms)
}

/// Checks the squid conditions for an explicit cover, map and variable set.
pub fn validate_squid(
    q: &[Atom],
    q_plus: &[Atom],
    h: &BTreeMap<Arc<str>, Arc<str>>,
    v_delta: &BTreeSet<Arc<str>>,
) -> Result<SquidDecomposition, SquidError> {
    let cover: BTreeSet<&Atom> = q_plus.iter().collect();
    if let Some(a) = q.iter().find(|a| !cover.contains(a)) {
        return Err(SquidError::MissingAtom(a.clone()));
    }
    let qn: BTreeSet<&Atom> = q.iter().collect();
    if cover.len() > 2 * qn.len() {
        return Err(SquidError::CoverTooLarge { found: cover.len(), max: 2 * qn.len() });
    }
    let vars: BTreeSet<Arc<str>> = vars_in(q_plus).into_iter().collect();
    for (k, v) in h {
        for x in [k, v] {
            if !vars.contains(x) {
                return Err(SquidError::ForeignVariable(x.clone()));
            }
        }
    }
    let image_vars: BTreeSet<Arc<str>> = vars.iter().map(|v| h.get(v).unwrap_or(v).clone()).collect();
    if let Some(v) = v_delta.iter().find(|v| !image_vars.contains(*v)) {
        return Err(SquidError::ForeignVariable(v.clone()));
    }
    let mut image: Vec<Atom> = cover.iter().map(|a| rename(a, h)).collect();
    image.sort();
    image.dedup();
    let (head, tentacles): (Vec<Atom>, Vec<Atom>) =
        image.into_iter().partition(|a| a.variables().iter().all(|v| v_delta.contains(v)));
    let mut hidden: BTreeSet<Term> = v_delta.iter().map(|v| Term::Variable(v.clone())).collect();
    hidden.extend(tentacles.iter().flat_map(|a| &a.args).filter(|t| !t.is_variable()).cloned());
    let (forest, _) = s_join_forest(&tentacles, &hidden).ok_or(SquidError::CyclicTentacles)?;
    Ok(SquidDecomposition {
        q_plus: cover.into_iter().cloned().collect(),
        h: h.iter().filter(|(k, v)| k != v).map(|(k, v)| (k.clone(), v.clone())).collect(),
        head,
        tentacles,
        v_delta: v_delta.clone(),
        forest,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SquidLimits {
    /// Largest cover size; defaults to twice the query size.
    pub max_cover_atoms: Option<usize>,
    /// Cap on examined (cover, map, variable set) combinations.
    pub max_candidates: usize,
    /// Use these covers instead of enumerating them.
    pub covers: Option<Vec<Vec<Atom>>>,
    /// Use these maps instead of enumerating partitions.
    pub maps: Option<Vec<BTreeMap<Arc<str>, Arc<str>>>>,
}

impl Default for SquidLimits {
    fn default() -> Self {
        SquidLimits { max_cover_atoms: None, max_candidates: 1_000_000, covers: None, maps: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SquidStats {
    pub candidates: usize,
    pub yielded: usize,
    pub truncated: bool,
}

/// Streams squid decompositions of the Boolean query `q` over `schema`.
///
/// Covers add atoms over fresh variables `#1, #2, ...`. Maps send each
/// variable to the least variable of its block in a partition of the cover
/// variables, trying finer partitions first. `admit` may reject a partial
/// image (first `h(Q)`, then `h(Q+)`) to cut the search.
pub fn enumerate_squids(
    q: &[Atom],
    schema: &BTreeSet<Predicate>,
    limits: &SquidLimits,
    mut admit: impl FnMut(&[Atom]) -> bool,
    mut visit: impl FnMut(&SquidDecomposition) -> ControlFlow<()>,
) -> SquidStats {
    let mut base: Vec<Atom> = Vec::new();
    for a in q {
        if !base.contains(a) {
            base.push(a.clone());
        }
    }
    let max_cover = limits.max_cover_atoms.unwrap_or(2 * base.len()).min(2 * base.len());
    let mut st = SquidStats::default();
    let mut cx = Enum { limits, stats: &mut st, admit: &mut admit, visit: &mut visit, q: &base };

    if let Some(maps) = &limits.maps {
        let covers = limits.covers.clone().unwrap_or_else(|| vec![base.clone()]);
        for cover in &covers {
            for h in maps {
                if cx.with_map(cover, h).is_break() {
                    return st;
                }
            }
        }
        return st;
    }
    if let Some(covers) = &limits.covers {
        for cover in covers {
            let vars = vars_in(cover);
            let mut blocks = Vec::new();
            if cx.partitions(&vars, 0, &mut blocks, &mut |cx, h| cx.with_map(cover, h)).is_break() {
                return st;
            }
        }
        return st;
    }
    let qvars = vars_in(&base);
    let preds: Vec<Predicate> = schema.iter().cloned().collect();
    let mut blocks = Vec::new();
    let _ = cx.partitions(&qvars, 0, &mut blocks, &mut |cx, hq| {
        if !(cx.admit)(&apply_all(&base, hq)) {
            return ControlFlow::Continue(());
        }
        for extra in 0..=max_cover.saturating_sub(base.len()) {
            let mut picks = Vec::new();
            let r = multisets(preds.len(), extra, 0, &mut picks, &mut |picks| {
                let mut cover = base.clone();
                let mut fresh = 0;
                for &p in picks {
                    let pred = &preds[p];
                    let args = (0..pred.arity)
                        .map(|_| {
                            fresh += 1;
                            Term::Variable(Arc::from(format!("#{fresh}").as_str()))
                        })
                        .collect();
                    cover.push(Atom::with_predicate(pred.clone(), args));
                }
                let fresh_vars: Vec<Arc<str>> = vars_in(&cover[base.len()..]);
                let mut blocks = blocks_of(hq);
                cx.partitions(&fresh_vars, 0, &mut blocks, &mut |cx, hx| {
                    let mut h = hq.clone();
                    h.extend(hx.iter().map(|(k, v)| (k.clone(), v.clone())));
                    let h = normalize_reps(&h);
                    cx.with_map(&cover, &h)
                })
            });
            r?;
        }
        ControlFlow::Continue(())
    });
    st
}

fn apply_all(atoms: &[Atom], h: &BTreeMap<Arc<str>, Arc<str>>) -> Vec<Atom> {
    atoms.iter().map(|a| rename(a, h)).collect()
}

/// Blocks of a representative map, each listed with its members.
fn blocks_of(h: &BTreeMap<Arc<str>, Arc<str>>) -> Vec<Vec<Arc<str>>> {
    let mut by_rep: BTreeMap<Arc<str>, Vec<Arc<str>>> = BTreeMap::new();
    for (k, v) in h {
        by_rep.entry(v.clone()).or_default().push(k.clone());
    }
    by_rep.into_values().collect()
}

/// Sends every variable to the least member of its block.
fn normalize_reps(h: &BTreeMap<Arc<str>, Arc<str>>) -> BTreeMap<Arc<str>, Arc<str>> {
    let mut least: BTreeMap<Arc<str>, Arc<str>> = BTreeMap::new();
    for (k, v) in h {
        let e = least.entry(v.clone()).or_insert_with(|| k.clone());
        if k < e {
            *e = k.clone();
        }
    }
    h.iter().map(|(k, v)| (k.clone(), least[v].clone())).collect()
}

fn multisets(
    n: usize,
    k: usize,
    from: usize,
    picks: &mut Vec<usize>,
    f: &mut dyn FnMut(&[usize]) -> ControlFlow<()>,
) -> ControlFlow<()> {
    if picks.len() == k {
        return f(picks);
    }
    for p in from..n {
        picks.push(p);
        let r = multisets(n, k, p, picks, f);
        picks.pop();
        r?;
    }
    ControlFlow::Continue(())
}

type Visit<'v> = dyn FnMut(&SquidDecomposition) -> ControlFlow<()> + 'v;

struct Enum<'a, 'v> {
    limits: &'a SquidLimits,
    stats: &'a mut SquidStats,
    admit: &'a mut dyn FnMut(&[Atom]) -> bool,
    visit: &'a mut Visit<'v>,
    q: &'a [Atom],
}

impl Enum<'_, '_> {
    /// Assigns `vars[i..]` to blocks, a new block first, and calls `f` with
    /// the resulting representative map (block id order, not yet least).
    fn partitions(
        &mut self,
        vars: &[Arc<str>],
        i: usize,
        blocks: &mut Vec<Vec<Arc<str>>>,
        f: &mut dyn FnMut(&mut Self, &BTreeMap<Arc<str>, Arc<str>>) -> ControlFlow<()>,
    ) -> ControlFlow<()> {
        if i == vars.len() {
            let mut h = BTreeMap::new();
            for b in blocks.iter() {
                let rep = b.iter().min().expect("non-empty").clone();
                for v in b {
                    h.insert(v.clone(), rep.clone());
                }
            }
            return f(self, &h);
        }
        let v = vars[i].clone();
        blocks.push(vec![v.clone()]);
        let r = self.partitions(vars, i + 1, blocks, f);
        blocks.pop();
        r?;
        for b in 0..blocks.len() {
            blocks[b].push(v.clone());
            let r = self.partitions(vars, i + 1, blocks, f);
            blocks[b].pop();
            r?;
        }
        ControlFlow::Continue(())
    }

    fn with_map(&mut self, cover: &[Atom], h: &BTreeMap<Arc<str>, Arc<str>>) -> ControlFlow<()> {
        let image = apply_all(cover, h);
        if !(self.admit)(&image) {
            return ControlFlow::Continue(());
        }
        let vars = vars_in(cover);
        let reps: Vec<Arc<str>> =
            vars.iter().map(|v| h.get(v).unwrap_or(v).clone()).collect::<BTreeSet<_>>().into_iter().collect();
        if reps.len() >= usize::BITS as usize - 1 {
            self.stats.truncated = true;
            return ControlFlow::Break(());
        }
        for mask in 0u64..(1u64 << reps.len()) {
            if self.stats.candidates >= self.limits.max_candidates {
                self.stats.truncated = true;
                return ControlFlow::Break(());
            }
            self.stats.candidates += 1;
            let vd: BTreeSet<Arc<str>> =
                reps.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, v)| v.clone()).collect();
            if let Ok(d) = validate_squid(self.q, cover, h, &vd) {
                self.stats.yielded += 1;
                (self.visit)(&d)?;
            }
        }
        ControlFlow::Continue(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SquidWitness {
    pub decomposition: SquidDecomposition,
    pub theta: Substitution,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SquidCheck {
    /// Does the chase entail the query? `None` when the chase did not
    /// saturate within the budget.
    pub entailed: Option<bool>,
    pub witness: Option<SquidWitness>,
    pub stats: SquidStats,
}

impl SquidCheck {
    /// Both sides agree. Inconclusive runs never hold.
    pub fn holds(&self) -> bool {
        self.entailed.is_some_and(|e| e == self.witness.is_some()) && !(self.witness.is_none() && self.stats.truncated)
    }
}

/// Searches `theta` with `theta(H)` inside the ground part and `theta(T)`
/// inside the null-carrying part of `inst`.
pub fn squid_homomorphism(d: &SquidDecomposition, inst: &Instance, db: &Instance) -> Option<Substitution> {
    let dom = db.domain();
    let ground: Vec<bool> = inst.iter().map(|a| a.args.iter().all(|t| dom.contains(t))).collect();
    let atoms = d.image();
    let nh = d.head.len();
    let pat = Pattern::new(&atoms);
    let filter = |pi: usize, id: usize| ground[id] == (pi < nh);
    let mut s = Search::new(&pat, inst);
    s.filter = Some(&filter);
    let mut found = None;
    s.run(pat.empty_binding(), |b, _| {
        found = Some(pat.to_substitution(b));
        ControlFlow::Break(())
    });
    found
}

/// Compares chase entailment of the Boolean closure of `q` with the
/// existence of a squid decomposition plus split homomorphism, on the
/// restricted chase of `db` under `tgds`.
pub fn verify_squid_lemma(
    db: &Instance,
    tgds: &[Tgd],
    q: &Cq,
    budget: usize,
    limits: &SquidLimits,
) -> Result<SquidCheck, SquidError> {
    if !classify(tgds).overall.is_weakly_guarded() {
        return Err(SquidError::NotWeaklyGuarded);
    }
    let opts = ChaseOptions::restricted().with_steps(budget).with_depth(usize::MAX);
    let r = run_chase(db, tgds, &[], &opts).map_err(|_| SquidError::NotWeaklyGuarded)?;
    if !r.saturated() {
        return Ok(SquidCheck { entailed: None, witness: None, stats: SquidStats::default() });
    }
    let chase = r.instance;
    let entailed = holds(&chase, &q.body);
    let (ground, _) = split_ground(&chase, db);
    let mut schema = chase.predicates();
    schema.extend(q.body.iter().map(|a| a.predicate.clone()));
    let mut witness = None;
    let stats = enumerate_squids(
        &q.body,
        &schema,
        limits,
        |img| holds(&chase, img),
        |d| {
            if !holds(&ground, &d.head) {
                return ControlFlow::Continue(());
            }
            match squid_homomorphism(d, &chase, db) {
                Some(theta) => {
                    witness = Some(SquidWitness { decomposition: d.clone(), theta });
                    ControlFlow::Break(())
                }
                None => ControlFlow::Continue(()),
            }
        },
    );
    Ok(SquidCheck { entailed: Some(entailed), witness, stats })
}
