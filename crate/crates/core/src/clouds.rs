//! Clouds, canonical renamings and cloud-store saturation with blocking.
//!
//! The cloud of an atom `a` in an instance `B` over a database `D` is the
//! set of atoms of `B` whose terms all lie in `dom(a) ∪ dom(D)`. Two
//! (atom, cloud) pairs that agree up to a renaming of nulls derive
//! isomorphic subtrees, so the saturation only expands one atom per class
//! and grafts the cloud contributions of the expanded twin onto the others.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::analysis::classify;
use crate::chase::{apply_tgd, discover, Trigger};
use crate::hom::Pattern;
use crate::model::{Atom, Instance, NullAllocator, Predicate, Substitution, Term, Tgd, CANONICAL_NULL_BASE};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CloudError {
    #[error("atom {0} is not in the instance")]
    NotInInstance(Atom),
    #[error("atom {atom} mentions null {null}, which does not occur in the anchor")]
    ForeignNull { atom: Atom, null: Term },
    #[error("rules are not weakly guarded")]
    NotWeaklyGuarded,
    #[error("rule#{0} has several head atoms; normalize heads first")]
    MultiHead(usize),
    #[error("{0} must be positive")]
    ZeroBudget(&'static str),
}

/// The `i`-th reserved canonical null, 1-based.
pub fn canonical_null(i: u64) -> Term {
    Term::Null(CANONICAL_NULL_BASE + i)
}

/// Atoms of `inst` whose terms all lie in `dom(a) ∪ dom(db)`.
pub fn cloud_of(inst: &Instance, db: &Instance, a: &Atom) -> Result<BTreeSet<Atom>, CloudError> {
    if !inst.contains(a) {
        return Err(CloudError::NotInInstance(a.clone()));
    }
    let dom = db.domain();
    Ok(inst.iter().filter(|b| b.args.iter().all(|t| dom.contains(t) || a.args.contains(t))).cloned().collect())
}

pub type CanonicalKey = (Atom, Vec<Atom>);

/// Renames the nulls of `a` outside `dom(db)`, in order of first
/// occurrence, to the reserved canonical nulls and applies the same
/// renaming to `s`. Terms of `dom(db)` are kept. The renamed set is
/// returned sorted.
pub fn canonicalize<'a>(
    a: &Atom,
    s: impl IntoIterator<Item = &'a Atom>,
    db: &Instance,
) -> Result<CanonicalKey, CloudError> {
    canonicalize_fixing(a, s, &db.domain())
}

pub(crate) fn canonicalize_fixing<'a>(
    a: &Atom,
    s: impl IntoIterator<Item = &'a Atom>,
    fixed: &BTreeSet<Term>,
) -> Result<CanonicalKey, CloudError> {
    let map: HashMap<Term, Term> = a
        .nulls()
        .into_iter()
        .filter(|n| !fixed.contains(n))
        .enumerate()
        .map(|(i, n)| (n, canonical_null(i as u64 + 1)))
        .collect();
    let rename = |b: &Atom| -> Result<Atom, CloudError> {
        let mut args = Vec::with_capacity(b.args.len());
        for t in &b.args {
            args.push(match map.get(t) {
                Some(c) => c.clone(),
                None if t.is_null() && !fixed.contains(t) => {
                    return Err(CloudError::ForeignNull { atom: b.clone(), null: t.clone() })
                }
                None => t.clone(),
            });
        }
        Ok(Atom::with_predicate(b.predicate.clone(), args))
    };
    let anchor = rename(a)?;
    let mut set = s.into_iter().map(rename).collect::<Result<Vec<_>, _>>()?;
    set.sort();
    set.dedup();
    Ok((anchor, set))
}

/// Is there a bijection between terms, fixing `dom(db)`, mapping `a` onto
/// `b` and `s` onto `t`?
pub fn d_isomorphic(a: &Atom, s: &[Atom], b: &Atom, t: &[Atom], db: &Instance) -> bool {
    let fixed = db.domain();
    match (canonicalize_fixing(a, s, &fixed), canonicalize_fixing(b, t, &fixed)) {
        (Ok(x), Ok(y)) => x == y,
        _ => brute_isomorphic(a, s, b, t, &fixed),
    }
}

/// Fallback used when the sets mention nulls outside their anchors.
fn brute_isomorphic(a: &Atom, s: &[Atom], b: &Atom, t: &[Atom], fixed: &BTreeSet<Term>) -> bool {
    let sset: BTreeSet<&Atom> = s.iter().collect();
    let tset: BTreeSet<&Atom> = t.iter().collect();
    if sset.len() != tset.len() {
        return false;
    }
    let mut fwd: HashMap<Term, Term> = HashMap::new();
    let mut bwd: HashMap<Term, Term> = HashMap::new();
    if !extend_bijection(a, b, fixed, &mut fwd, &mut bwd) {
        return false;
    }
    let src: Vec<&Atom> = sset.into_iter().collect();
    let dst: Vec<&Atom> = tset.into_iter().collect();
    let mut used = vec![false; dst.len()];
    match_all(&src, &dst, 0, &mut used, fixed, &fwd, &bwd)
}

fn extend_bijection(x: &Atom, y: &Atom, fixed: &BTreeSet<Term>, fwd: &mut HashMap<Term, Term>, bwd: &mut HashMap<Term, Term>) -> bool {
    if x.predicate != y.predicate {
        return false;
    }
    for (u, v) in x.args.iter().zip(&y.args) {
        let free = |t: &Term| t.is_null() && !fixed.contains(t);
        match (free(u), free(v)) {
            (false, false) if u == v => continue,
            (true, true) => {}
            _ => return false,
        }
        match (fwd.get(u), bwd.get(v)) {
            (Some(w), _) if w != v => return false,
            (_, Some(w)) if w != u => return false,
            (Some(_), Some(_)) => {}
            _ => {
                fwd.insert(u.clone(), v.clone());
                bwd.insert(v.clone(), u.clone());
            }
        }
    }
    true
}

fn match_all(
    src: &[&Atom],
    dst: &[&Atom],
    i: usize,
    used: &mut [bool],
    fixed: &BTreeSet<Term>,
    fwd: &HashMap<Term, Term>,
    bwd: &HashMap<Term, Term>,
) -> bool {
    if i == src.len() {
        return true;
    }
    for j in 0..dst.len() {
        if used[j] {
            continue;
        }
        let (mut f, mut b) = (fwd.clone(), bwd.clone());
        if extend_bijection(src[i], dst[j], fixed, &mut f, &mut b) {
            used[j] = true;
            if match_all(src, dst, i + 1, used, fixed, &f, &b) {
                return true;
            }
            used[j] = false;
        }
    }
    false
}

/// One entry per class of (atom, cloud) pairs up to renaming of nulls.
#[derive(Debug, Clone, Default)]
pub struct CloudStore {
    index: BTreeMap<CanonicalKey, usize>,
    entries: Vec<CanonicalKey>,
}

impl CloudStore {
    pub fn new() -> CloudStore {
        CloudStore::default()
    }

    /// Returns the entry id and whether the key was new.
    pub fn insert(&mut self, key: CanonicalKey) -> (usize, bool) {
        if let Some(&id) = self.index.get(&key) {
            return (id, false);
        }
        let id = self.entries.len();
        self.index.insert(key.clone(), id);
        self.entries.push(key);
        (id, true)
    }

    pub fn get(&self, key: &CanonicalKey) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[CanonicalKey] {
        &self.entries
    }

    pub fn keys(&self) -> BTreeSet<CanonicalKey> {
        self.index.keys().cloned().collect()
    }

    pub fn max_cloud(&self) -> usize {
        self.entries.iter().map(|(_, c)| c.len()).max().unwrap_or(0)
    }
}

/// `|R| · (|dom(D)| + w)^w`, saturating.
pub fn cloud_size_bound(schema: &BTreeSet<Predicate>, db: &Instance) -> usize {
    let w = schema.iter().map(|p| p.arity).max().unwrap_or(0) as u32;
    let base = db.domain().len() + w as usize;
    schema.len().saturating_mul(base.saturating_pow(w))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SaturationOptions {
    /// Per-round cap on fired triggers plus grafted atoms.
    pub max_steps: usize,
    pub max_rounds: usize,
    pub max_store: usize,
    /// Run even when the rules are not weakly guarded.
    pub force: bool,
}

impl Default for SaturationOptions {
    fn default() -> Self {
        SaturationOptions { max_steps: 100_000, max_rounds: 8, max_store: 100_000, force: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SaturationStatus {
    Stabilized,
    BudgetExhausted,
}

impl fmt::Display for SaturationStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SaturationStatus::Stabilized => "stabilized",
            SaturationStatus::BudgetExhausted => "budget-exhausted",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Saturation {
    pub store: CloudStore,
    /// Derived atoms over `dom(D)`.
    pub ground: Instance,
    pub status: SaturationStatus,
    pub rounds: usize,
    /// Concrete instance of the last round, grafted atoms included.
    pub instance: Instance,
    pub blocked: usize,
    pub cloud_bound: usize,
}

impl Saturation {
    pub fn max_cloud_size(&self) -> usize {
        self.store.max_cloud()
    }

    pub fn bound_respected(&self) -> bool {
        self.max_cloud_size() <= self.cloud_bound
    }

    /// Ground atoms together with every anchor and cloud atom in the store.
    pub fn stored_atoms(&self) -> Instance {
        let mut out = self.ground.clone();
        for (a, c) in self.store.entries() {
            out.insert(a.clone());
            out.extend(c.iter().cloned());
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Undecided,
    Expanded,
    Blocked { by: usize },
    Grafted { under: usize },
}

struct Round<'a> {
    tgds: &'a [Tgd],
    bodies: Vec<Pattern>,
    guards: Vec<usize>,
    db_dom: BTreeSet<Term>,
    inst: Instance,
    alloc: NullAllocator,
    /// Node per application: (atom id, parent node).
    nodes: Vec<(usize, Option<usize>)>,
    children: Vec<Vec<usize>>,
    first_node: Vec<usize>,
    state: Vec<State>,
    pending: HashMap<usize, Vec<Trigger>>,
    queue: VecDeque<Trigger>,
    applied: HashSet<(usize, Substitution)>,
    /// Expanded non-ground atoms by canonical anchor.
    twins: HashMap<Atom, Vec<usize>>,
    ground_ids: Vec<usize>,
    work: usize,
    max_work: usize,
}

struct Budget;

impl<'a> Round<'a> {
    fn is_ground(&self, id: usize) -> bool {
        self.inst.get(id).args.iter().all(|t| self.db_dom.contains(t))
    }

    fn add_atom(&mut self, atom: Atom, parent: Option<usize>, grafted_under: Option<usize>) -> Result<(usize, bool), Budget> {
        self.work += 1;
        if self.work > self.max_work {
            return Err(Budget);
        }
        let (id, new) = self.inst.insert(atom);
        let node = self.nodes.len();
        self.nodes.push((id, parent));
        self.children.push(Vec::new());
        if let Some(p) = parent {
            self.children[p].push(node);
        }
        if new {
            self.first_node.push(node);
            let ground = self.is_ground(id);
            self.state.push(match grafted_under {
                Some(b) => State::Grafted { under: b },
                None if ground => State::Expanded,
                None => State::Undecided,
            });
            if ground {
                self.ground_ids.push(id);
            }
            let ts = discover(self.tgds, &self.bodies, &self.inst, id);
            self.queue.extend(ts.into_iter().filter(|t| !self.applied.contains(&(t.rule, t.hom.clone()))));
        }
        Ok((id, new))
    }

    /// Non-ground part of the cloud of atom `id`.
    fn null_cloud(&self, id: usize) -> BTreeSet<usize> {
        let a = self.inst.get(id);
        let nulls: Vec<&Term> = a.args.iter().filter(|t| !self.db_dom.contains(t)).collect();
        let Some(first) = nulls.first() else { return BTreeSet::new() };
        let mut out = BTreeSet::new();
        for &j in self.inst.with_term(first) {
            out.insert(j);
        }
        for n in &nulls[1..] {
            out.extend(self.inst.with_term(n).iter().copied());
        }
        out.retain(|&j| self.inst.get(j).args.iter().all(|t| self.db_dom.contains(t) || a.args.contains(t)));
        out
    }

    fn subtree_ids(&self, id: usize) -> HashSet<usize> {
        let mut out = HashSet::new();
        let mut stack = vec![self.first_node[id]];
        while let Some(n) = stack.pop() {
            for &c in &self.children[n] {
                out.insert(self.nodes[c].0);
                stack.push(c);
            }
        }
        out
    }

    fn anchor_key(&self, id: usize) -> Atom {
        canonicalize_fixing(self.inst.get(id), std::iter::empty(), &self.db_dom).expect("anchor only").0
    }

    /// If `a` can stand in for `b`, the atoms to graft under `b`.
    fn twin_check(&self, a: usize, b: usize) -> Option<Vec<Atom>> {
        let (aa, bb) = (self.inst.get(a), self.inst.get(b));
        let psi: HashMap<Term, Term> = aa
            .args
            .iter()
            .zip(&bb.args)
            .filter(|(t, _)| !self.db_dom.contains(*t))
            .map(|(x, y)| (x.clone(), y.clone()))
            .collect();
        let inv: HashMap<Term, Term> = psi.iter().map(|(x, y)| (y.clone(), x.clone())).collect();
        let map = |m: &HashMap<Term, Term>, x: &Atom| x.map_terms(|t| m.get(t).cloned().unwrap_or_else(|| t.clone()));
        let ca = self.null_cloud(a);
        let cb = self.null_cloud(b);
        let sa = self.subtree_ids(a);
        for &y in &cb {
            let pre = map(&inv, self.inst.get(y));
            if !self.inst.id_of(&pre).is_some_and(|p| ca.contains(&p)) {
                return None;
            }
        }
        let mut graft = Vec::new();
        for &x in &ca {
            let img = map(&psi, self.inst.get(x));
            let present = self.inst.id_of(&img).is_some_and(|p| cb.contains(&p));
            if sa.contains(&x) {
                if !present {
                    graft.push(img);
                }
            } else if !present && x != a {
                return None;
            }
        }
        Some(graft)
    }

    fn try_block(&mut self, b: usize) -> Result<bool, Budget> {
        let key = self.anchor_key(b);
        let candidates = self.twins.get(&key).cloned().unwrap_or_default();
        for a in candidates {
            if a == b {
                continue;
            }
            if let Some(graft) = self.twin_check(a, b) {
                self.state[b] = State::Blocked { by: a };
                self.graft(b, graft)?;
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn graft(&mut self, b: usize, atoms: Vec<Atom>) -> Result<bool, Budget> {
        let parent = Some(self.first_node[b]);
        let mut any = false;
        for x in atoms {
            let (_, new) = self.add_atom(x, parent, Some(b))?;
            any |= new;
        }
        Ok(any)
    }

    fn expand(&mut self, b: usize) {
        self.state[b] = State::Expanded;
        if !self.is_ground(b) {
            self.twins.entry(self.anchor_key(b)).or_default().push(b);
        }
        if let Some(ts) = self.pending.remove(&b) {
            self.queue.extend(ts);
        }
    }

    fn unblock(&mut self, b: usize) {
        self.expand(b);
        let grafted: Vec<usize> =
            (0..self.state.len()).filter(|&i| self.state[i] == State::Grafted { under: b }).collect();
        for g in grafted {
            self.state[g] = State::Undecided;
            if let Some(ts) = self.pending.remove(&g) {
                self.queue.extend(ts);
            }
        }
    }

    fn fire(&mut self, tr: Trigger) -> Result<(), Budget> {
        let g = tr.matched[self.guards[tr.rule]];
        if self.state[g] == State::Undecided {
            if self.try_block(g)? {
                // Blocked: fall through to parking the trigger.
            } else {
                self.expand(g);
            }
        }
        match self.state[g] {
            State::Blocked { .. } | State::Grafted { .. } => {
                self.pending.entry(g).or_default().push(tr);
                return Ok(());
            }
            _ => {}
        }
        let key = (tr.rule, tr.hom.clone());
        if !self.applied.insert(key) {
            return Ok(());
        }
        let t = &self.tgds[tr.rule];
        let mut scratch = Instance::new();
        let app = apply_tgd(t, &tr.hom, &mut scratch, &mut self.alloc).expect("single head");
        let parent = Some(self.first_node[g]);
        self.add_atom(app.atom, parent, None)?;
        Ok(())
    }

    /// Re-checks every blocked atom against its twin. Returns whether
    /// anything changed.
    fn validate(&mut self) -> Result<bool, Budget> {
        let mut changed = false;
        for b in 0..self.state.len() {
            let State::Blocked { by } = self.state[b] else { continue };
            if let Some(graft) = self.twin_check(by, b) {
                changed |= self.graft(b, graft)?;
                continue;
            }
            self.state[b] = State::Undecided;
            if self.try_block(b)? {
                changed = true;
                continue;
            }
            self.unblock(b);
            changed = true;
        }
        Ok(changed)
    }

    fn run(&mut self) -> Result<(), Budget> {
        loop {
            while let Some(tr) = self.queue.pop_front() {
                self.fire(tr)?;
            }
            if !self.validate()? && self.queue.is_empty() {
                return Ok(());
            }
        }
    }

    fn store(&self) -> CloudStore {
        let mut store = CloudStore::new();
        let ground: Vec<&Atom> = self.ground_ids.iter().map(|&i| self.inst.get(i)).collect();
        for id in 0..self.inst.len() {
            let cloud = self.null_cloud(id);
            let atoms = ground.iter().copied().chain(cloud.iter().map(|&j| self.inst.get(j)));
            store.insert(canonicalize_fixing(self.inst.get(id), atoms, &self.db_dom).expect("cloud nulls lie in the anchor"));
        }
        store
    }
}

/// Saturates `db` under weakly guarded single-head `tgds`, expanding one
/// atom per cloud class. Rounds are repeated, keeping the derived ground
/// atoms, until neither the ground atoms nor the store keys change.
pub fn blocked_saturate(db: &Instance, tgds: &[Tgd], opts: &SaturationOptions) -> Result<Saturation, CloudError> {
    if opts.max_steps == 0 {
        return Err(CloudError::ZeroBudget("max-steps"));
    }
    if opts.max_rounds == 0 {
        return Err(CloudError::ZeroBudget("max-rounds"));
    }
    if let Some(i) = tgds.iter().position(|t| t.head.len() != 1) {
        return Err(CloudError::MultiHead(i + 1));
    }
    let class = classify(tgds);
    if !class.overall.is_weakly_guarded() && !opts.force {
        return Err(CloudError::NotWeaklyGuarded);
    }
    let guards: Vec<usize> = class.per_rule.iter().map(|r| r.forest_guard().unwrap_or(0)).collect();
    let mut schema = db.predicates();
    schema.extend(tgds.iter().flat_map(|t| t.body.iter().chain(&t.head)).map(|a| a.predicate.clone()));
    let cloud_bound = cloud_size_bound(&schema, db);
    let db_dom = db.domain();

    let mut ground = db.clone();
    let mut prev_keys: Option<BTreeSet<CanonicalKey>> = None;
    let mut rounds = 0;
    loop {
        rounds += 1;
        let mut r = Round {
            tgds,
            bodies: tgds.iter().map(|t| Pattern::new(&t.body)).collect(),
            guards: guards.clone(),
            db_dom: db_dom.clone(),
            inst: Instance::new(),
            alloc: NullAllocator::seeded(db),
            nodes: Vec::new(),
            children: Vec::new(),
            first_node: Vec::new(),
            state: Vec::new(),
            pending: HashMap::new(),
            queue: VecDeque::new(),
            applied: HashSet::new(),
            twins: HashMap::new(),
            ground_ids: Vec::new(),
            work: 0,
            max_work: opts.max_steps.saturating_add(ground.len()),
        };
        let mut exhausted = false;
        for a in ground.iter() {
            if r.add_atom(a.clone(), None, None).is_err() {
                exhausted = true;
                break;
            }
        }
        if !exhausted {
            exhausted = r.run().is_err();
        }
        let store = r.store();
        let new_ground: Instance = r.ground_ids.iter().map(|&i| r.inst.get(i).clone()).collect();
        let keys = store.keys();
        let blocked = r.state.iter().filter(|s| matches!(s, State::Blocked { .. })).count();
        let stable = new_ground == ground && prev_keys.as_ref() == Some(&keys);
        let over = exhausted || store.len() > opts.max_store;
        if stable || over || rounds >= opts.max_rounds {
            let status = if stable && !over { SaturationStatus::Stabilized } else { SaturationStatus::BudgetExhausted };
            return Ok(Saturation { store, ground: new_ground, status, rounds, instance: r.inst, blocked, cloud_bound });
        }
        ground = new_ground;
        prev_keys = Some(keys);
    }
}
