//! Terms, atoms, dependencies, queries and instances.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use indexmap::IndexSet;
use thiserror::Error;

/// Nulls with an index at or above this value are reserved for canonical
/// renamings and are never handed out by a [`NullAllocator`].
pub const CANONICAL_NULL_BASE: u64 = 1 << 40;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("cannot order variable {0}")]
    VariableComparison(Term),
}

/// A constant, a labeled null or a variable.
///
/// The derived order places constants (byte-lexicographic) before nulls
/// (by index) before variables. Use [`compare_terms`] where variables must
/// be rejected.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Constant(Arc<str>),
    Null(u64),
    Variable(Arc<str>),
}

impl Term {
    pub fn constant(name: &str) -> Term {
        Term::Constant(Arc::from(name))
    }

    pub fn var(name: &str) -> Term {
        Term::Variable(Arc::from(name))
    }

    pub fn null(index: u64) -> Term {
        Term::Null(index)
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Term::Constant(_))
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Term::Null(_))
    }

    pub fn is_variable(&self) -> bool {
        matches!(self, Term::Variable(_))
    }

    pub fn is_canonical_null(&self) -> bool {
        matches!(self, Term::Null(k) if *k >= CANONICAL_NULL_BASE)
    }

    pub fn as_var(&self) -> Option<&Arc<str>> {
        match self {
            Term::Variable(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Constant(c) => f.write_str(c),
            Term::Null(k) => write!(f, "_:n{k}"),
            Term::Variable(v) => f.write_str(v),
        }
    }
}

/// Total order on ground terms: constants first, then nulls.
pub fn compare_terms(a: &Term, b: &Term) -> Result<Ordering, ModelError> {
    for t in [a, b] {
        if t.is_variable() {
            return Err(ModelError::VariableComparison(t.clone()));
        }
    }
    Ok(a.cmp(b))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Predicate {
    pub name: Arc<str>,
    pub arity: usize,
}

impl Predicate {
    pub fn new(name: &str, arity: usize) -> Predicate {
        Predicate { name: Arc::from(name), arity }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

/// An argument slot of a predicate, 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Position {
    pub predicate: Predicate,
    pub index: usize,
}

impl Position {
    pub fn new(name: &str, arity: usize, index: usize) -> Position {
        Position { predicate: Predicate::new(name, arity), index }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.predicate.name, self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub predicate: Predicate,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(name: &str, args: Vec<Term>) -> Atom {
        Atom { predicate: Predicate::new(name, args.len()), args }
    }

    pub fn with_predicate(predicate: Predicate, args: Vec<Term>) -> Atom {
        debug_assert_eq!(predicate.arity, args.len());
        Atom { predicate, args }
    }

    pub fn name(&self) -> &str {
        &self.predicate.name
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    /// No variables. Nulls are allowed.
    pub fn is_ground(&self) -> bool {
        !self.args.iter().any(Term::is_variable)
    }

    pub fn has_nulls(&self) -> bool {
        self.args.iter().any(Term::is_null)
    }

    /// Distinct variables in order of first occurrence.
    pub fn variables(&self) -> Vec<Arc<str>> {
        let mut out: Vec<Arc<str>> = Vec::new();
        for t in &self.args {
            if let Term::Variable(v) = t {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
        }
        out
    }

    /// Distinct nulls in order of first occurrence.
    pub fn nulls(&self) -> Vec<Term> {
        let mut out: Vec<Term> = Vec::new();
        for t in &self.args {
            if t.is_null() && !out.contains(t) {
                out.push(t.clone());
            }
        }
        out
    }

    pub fn map_terms(&self, mut f: impl FnMut(&Term) -> Term) -> Atom {
        Atom { predicate: self.predicate.clone(), args: self.args.iter().map(&mut f).collect() }
    }

    /// Replace bound variables; unbound ones are kept.
    pub fn apply(&self, s: &Substitution) -> Atom {
        self.map_terms(|t| match t {
            Term::Variable(v) => s.get(v).cloned().unwrap_or_else(|| t.clone()),
            _ => t.clone(),
        })
    }

    pub fn positions(&self) -> impl Iterator<Item = (Position, &Term)> + '_ {
        self.args
            .iter()
            .enumerate()
            .map(|(i, t)| (Position { predicate: self.predicate.clone(), index: i + 1 }, t))
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate.name)?;
        if self.args.is_empty() {
            return Ok(());
        }
        f.write_str("(")?;
        for (i, t) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str(")")
    }
}

/// Distinct variables of a conjunction in order of first occurrence.
pub fn variables_of(atoms: &[Atom]) -> Vec<Arc<str>> {
    let mut out: Vec<Arc<str>> = Vec::new();
    for a in atoms {
        for v in a.variables() {
            if !out.contains(&v) {
                out.push(v);
            }
        }
    }
    out
}

/// Variable assignment. Iteration is by variable name, which fixes the
/// textual order of step logs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Substitution(pub BTreeMap<Arc<str>, Term>);

impl Substitution {
    pub fn new() -> Substitution {
        Substitution::default()
    }

    pub fn get(&self, v: &str) -> Option<&Term> {
        self.0.get(v)
    }

    pub fn insert(&mut self, v: Arc<str>, t: Term) {
        self.0.insert(v, t);
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Arc<str>, &Term)> {
        self.0.iter()
    }

    pub fn restrict(&self, vars: &[Arc<str>]) -> Substitution {
        Substitution(self.0.iter().filter(|(k, _)| vars.contains(k)).map(|(k, v)| (k.clone(), v.clone())).collect())
    }

    pub fn map_terms(&self, mut f: impl FnMut(&Term) -> Term) -> Substitution {
        Substitution(self.0.iter().map(|(k, v)| (k.clone(), f(v))).collect())
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{k}->{v}")?;
        }
        f.write_str("}")
    }
}

fn write_conj(f: &mut fmt::Formatter<'_>, atoms: &[Atom]) -> fmt::Result {
    for (i, a) in atoms.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{a}")?;
    }
    Ok(())
}

/// Tuple-generating dependency. `existentials` lists the head-only
/// variables in order of first occurrence in the head.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Tgd {
    pub body: Vec<Atom>,
    pub head: Vec<Atom>,
    pub existentials: Vec<Arc<str>>,
}

impl Tgd {
    /// Builds a TGD, treating every head variable absent from the body as
    /// existential.
    pub fn new(body: Vec<Atom>, head: Vec<Atom>) -> Tgd {
        let bv = variables_of(&body);
        let existentials = variables_of(&head).into_iter().filter(|v| !bv.contains(v)).collect();
        Tgd { body, head, existentials }
    }

    pub fn body_vars(&self) -> Vec<Arc<str>> {
        variables_of(&self.body)
    }

    /// Universal variables that also occur in the head.
    pub fn frontier(&self) -> Vec<Arc<str>> {
        let hv = variables_of(&self.head);
        self.body_vars().into_iter().filter(|v| hv.contains(v)).collect()
    }

    pub fn is_full(&self) -> bool {
        self.existentials.is_empty()
    }

    pub fn is_existential(&self, v: &str) -> bool {
        self.existentials.iter().any(|e| &**e == v)
    }
}

impl fmt::Display for Tgd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_conj(f, &self.body)?;
        f.write_str(" -> ")?;
        if !self.existentials.is_empty() {
            f.write_str("exists ")?;
            for (i, v) in self.existentials.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                f.write_str(v)?;
            }
            f.write_str(": ")?;
        }
        write_conj(f, &self.head)
    }
}

/// Equality-generating dependency `body -> lhs = rhs`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Egd {
    pub body: Vec<Atom>,
    pub lhs: Arc<str>,
    pub rhs: Arc<str>,
}

impl fmt::Display for Egd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_conj(f, &self.body)?;
        write!(f, " -> {} = {}", self.lhs, self.rhs)
    }
}

/// Conjunctive query with an ordered list of head variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cq {
    pub name: Arc<str>,
    pub head: Vec<Arc<str>>,
    pub body: Vec<Atom>,
}

impl Cq {
    pub fn new(name: &str, head: &[&str], body: Vec<Atom>) -> Cq {
        Cq { name: Arc::from(name), head: head.iter().map(|v| Arc::from(*v)).collect(), body }
    }

    pub fn is_boolean(&self) -> bool {
        self.head.is_empty()
    }

    pub fn arity(&self) -> usize {
        self.head.len()
    }
}

impl fmt::Display for Cq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        for (i, v) in self.head.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(v)?;
        }
        f.write_str(")")?;
        if !self.body.is_empty() {
            f.write_str(" :- ")?;
            write_conj(f, &self.body)?;
        }
        Ok(())
    }
}

/// A set of ground atoms with per-predicate, per-argument and per-term
/// indexes. Atom ids follow insertion order and are stable until the
/// instance is rebuilt.
#[derive(Clone, Default)]
pub struct Instance {
    atoms: IndexSet<Atom>,
    by_pred: HashMap<Predicate, Vec<usize>>,
    by_arg: HashMap<(Predicate, usize, Term), Vec<usize>>,
    by_term: HashMap<Term, Vec<usize>>,
}

impl Instance {
    pub fn new() -> Instance {
        Instance::default()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn contains(&self, a: &Atom) -> bool {
        self.atoms.contains(a)
    }

    pub fn id_of(&self, a: &Atom) -> Option<usize> {
        self.atoms.get_index_of(a)
    }

    pub fn get(&self, id: usize) -> &Atom {
        &self.atoms[id]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Atom> + '_ {
        self.atoms.iter()
    }

    /// Inserts a ground atom, returning its id and whether it was new.
    pub fn insert(&mut self, atom: Atom) -> (usize, bool) {
        debug_assert!(atom.is_ground(), "instance atoms must be ground: {atom}");
        if let Some(id) = self.atoms.get_index_of(&atom) {
            return (id, false);
        }
        let id = self.atoms.len();
        self.by_pred.entry(atom.predicate.clone()).or_default().push(id);
        let mut seen: Vec<&Term> = Vec::new();
        for (i, t) in atom.args.iter().enumerate() {
            self.by_arg.entry((atom.predicate.clone(), i, t.clone())).or_default().push(id);
            if !seen.contains(&t) {
                seen.push(t);
                self.by_term.entry(t.clone()).or_default().push(id);
            }
        }
        self.atoms.insert(atom);
        (id, true)
    }

    pub fn with_predicate(&self, p: &Predicate) -> &[usize] {
        self.by_pred.get(p).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Ids of atoms of predicate `p` carrying `t` at 0-based argument `i`.
    pub fn with_arg(&self, p: &Predicate, i: usize, t: &Term) -> &[usize] {
        // Avoids cloning into a key when the predicate is absent.
        if !self.by_pred.contains_key(p) {
            return &[];
        }
        self.by_arg.get(&(p.clone(), i, t.clone())).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Ids of atoms mentioning `t`, ascending.
    pub fn with_term(&self, t: &Term) -> &[usize] {
        self.by_term.get(t).map(Vec::as_slice).unwrap_or(&[])
    }

    /// The term-to-atoms index, as an ordered map.
    pub fn domain_index(&self) -> BTreeMap<Term, BTreeSet<usize>> {
        self.by_term.iter().map(|(t, ids)| (t.clone(), ids.iter().copied().collect())).collect()
    }

    pub fn domain(&self) -> BTreeSet<Term> {
        self.by_term.keys().cloned().collect()
    }

    pub fn predicates(&self) -> BTreeSet<Predicate> {
        self.by_pred.keys().cloned().collect()
    }

    pub fn max_null(&self) -> Option<u64> {
        self.by_term
            .keys()
            .filter_map(|t| match t {
                Term::Null(k) => Some(*k),
                _ => None,
            })
            .max()
    }

    /// A copy with every occurrence of `old` replaced by `new`. Atom order
    /// follows first occurrence of the rewritten atoms.
    pub fn replace_term(&self, old: &Term, new: &Term) -> Instance {
        self.atoms.iter().map(|a| a.map_terms(|t| if t == old { new.clone() } else { t.clone() })).collect()
    }

    pub fn sorted(&self) -> Vec<&Atom> {
        let mut v: Vec<&Atom> = self.atoms.iter().collect();
        v.sort();
        v
    }

    pub fn is_subset(&self, other: &Instance) -> bool {
        self.atoms.iter().all(|a| other.contains(a))
    }
}

impl PartialEq for Instance {
    fn eq(&self, other: &Instance) -> bool {
        self.atoms == other.atoms
    }
}

impl Eq for Instance {}

impl fmt::Debug for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.atoms.iter().map(|a| a.to_string())).finish()
    }
}

impl FromIterator<Atom> for Instance {
    fn from_iter<I: IntoIterator<Item = Atom>>(iter: I) -> Instance {
        let mut inst = Instance::new();
        for a in iter {
            inst.insert(a);
        }
        inst
    }
}

impl Extend<Atom> for Instance {
    fn extend<I: IntoIterator<Item = Atom>>(&mut self, iter: I) {
        for a in iter {
            self.insert(a);
        }
    }
}

/// Hands out fresh nulls in increasing index order.
#[derive(Debug, Clone)]
pub struct NullAllocator {
    next: u64,
}

impl Default for NullAllocator {
    fn default() -> Self {
        NullAllocator { next: 1 }
    }
}

impl NullAllocator {
    pub fn new() -> NullAllocator {
        NullAllocator::default()
    }

    /// Starts above every null already present in `inst`.
    pub fn seeded(inst: &Instance) -> NullAllocator {
        let mut a = NullAllocator::new();
        if let Some(k) = inst.max_null() {
            a.observe(k);
        }
        a
    }

    pub fn observe(&mut self, index: u64) {
        if index < CANONICAL_NULL_BASE && index >= self.next {
            self.next = index + 1;
        }
    }

    pub fn fresh(&mut self) -> Term {
        let t = Term::Null(self.next);
        self.next += 1;
        t
    }

    pub fn peek(&self) -> u64 {
        self.next
    }
}

/// A parsed program: database facts, dependencies and named queries, each
/// in declaration order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Program {
    pub facts: Instance,
    pub tgds: Vec<Tgd>,
    pub egds: Vec<Egd>,
    pub queries: Vec<Cq>,
}

impl Program {
    pub fn query(&self, name: &str) -> Option<&Cq> {
        self.queries.iter().find(|q| &*q.name == name)
    }

    /// Every predicate mentioned by facts, dependencies or query bodies.
    pub fn schema(&self) -> BTreeSet<Predicate> {
        let mut s = self.facts.predicates();
        let rule_atoms = self
            .tgds
            .iter()
            .flat_map(|t| t.body.iter().chain(&t.head))
            .chain(self.egds.iter().flat_map(|e| &e.body))
            .chain(self.queries.iter().flat_map(|q| &q.body));
        s.extend(rule_atoms.map(|a| a.predicate.clone()));
        s
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in self.facts.iter() {
            writeln!(f, "fact {a}.")?;
        }
        for t in &self.tgds {
            writeln!(f, "tgd {t}.")?;
        }
        for e in &self.egds {
            writeln!(f, "egd {e}.")?;
        }
        for q in &self.queries {
            writeln!(f, "query {q}.")?;
        }
        Ok(())
    }
}
