//! Backtracking homomorphism search shared by the chase and query code.

use std::ops::ControlFlow;
use std::sync::Arc;

use crate::model::{Atom, Instance, Predicate, Substitution, Term};

#[derive(Debug, Clone)]
enum Slot {
    Var(usize),
    Fixed(Term),
}

#[derive(Debug, Clone)]
struct PAtom {
    pred: Predicate,
    args: Vec<Slot>,
}

/// A conjunction with its variables numbered in order of first occurrence.
/// Constants and nulls in the pattern must be matched exactly.
#[derive(Debug, Clone)]
pub struct Pattern {
    atoms: Vec<PAtom>,
    vars: Vec<Arc<str>>,
}

pub type Binding = Vec<Option<Term>>;

impl Pattern {
    pub fn new(atoms: &[Atom]) -> Pattern {
        let mut vars: Vec<Arc<str>> = Vec::new();
        let atoms = atoms
            .iter()
            .map(|a| PAtom {
                pred: a.predicate.clone(),
                args: a
                    .args
                    .iter()
                    .map(|t| match t {
                        Term::Variable(v) => Slot::Var(match vars.iter().position(|x| x == v) {
                            Some(i) => i,
                            None => {
                                vars.push(v.clone());
                                vars.len() - 1
                            }
                        }),
                        _ => Slot::Fixed(t.clone()),
                    })
                    .collect(),
            })
            .collect();
        Pattern { atoms, vars }
    }

    pub fn vars(&self) -> &[Arc<str>] {
        &self.vars
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| &**v == name)
    }

    pub fn empty_binding(&self) -> Binding {
        vec![None; self.vars.len()]
    }

    /// Binding seeded from a substitution; unknown variables are ignored.
    pub fn binding_from(&self, s: &Substitution) -> Binding {
        self.vars.iter().map(|v| s.get(v).cloned()).collect()
    }

    pub fn to_substitution(&self, b: &Binding) -> Substitution {
        let mut s = Substitution::new();
        for (v, t) in self.vars.iter().zip(b) {
            if let Some(t) = t {
                s.insert(v.clone(), t.clone());
            }
        }
        s
    }

    /// Unifies pattern atom `pi` with `atom`, recording newly bound slots in
    /// `trail`. On failure the binding is restored.
    fn unify(&self, pi: usize, atom: &Atom, b: &mut Binding, trail: &mut Vec<usize>) -> bool {
        let p = &self.atoms[pi];
        if p.pred != atom.predicate {
            return false;
        }
        let mark = trail.len();
        for (slot, t) in p.args.iter().zip(&atom.args) {
            let ok = match slot {
                Slot::Fixed(f) => f == t,
                Slot::Var(v) => match &b[*v] {
                    Some(bound) => bound == t,
                    None => {
                        b[*v] = Some(t.clone());
                        trail.push(*v);
                        true
                    }
                },
            };
            if !ok {
                undo(b, trail, mark);
                return false;
            }
        }
        true
    }

    fn candidates<'i>(&self, pi: usize, b: &Binding, inst: &'i Instance) -> &'i [usize] {
        let p = &self.atoms[pi];
        let mut best = inst.with_predicate(&p.pred);
        for (i, slot) in p.args.iter().enumerate() {
            let t = match slot {
                Slot::Fixed(t) => t,
                Slot::Var(v) => match &b[*v] {
                    Some(t) => t,
                    None => continue,
                },
            };
            let c = inst.with_arg(&p.pred, i, t);
            if c.len() < best.len() {
                best = c;
            }
            if best.is_empty() {
                break;
            }
        }
        best
    }
}

fn undo(b: &mut Binding, trail: &mut Vec<usize>, mark: usize) {
    while trail.len() > mark {
        let v = trail.pop().unwrap();
        b[v] = None;
    }
}

/// Options for [`search`].
pub struct Search<'a> {
    pub pattern: &'a Pattern,
    pub instance: &'a Instance,
    /// Pattern atom forced onto a specific atom id.
    pub pin: Option<(usize, usize)>,
    /// Extra admissibility test on (pattern atom, atom id).
    pub filter: Option<&'a dyn Fn(usize, usize) -> bool>,
}

impl<'a> Search<'a> {
    pub fn new(pattern: &'a Pattern, instance: &'a Instance) -> Search<'a> {
        Search { pattern, instance, pin: None, filter: None }
    }

    /// Calls `visit` with each complete binding and the matched atom ids per
    /// pattern atom. Returns `false` when `visit` broke out early.
    pub fn run<F>(&self, init: Binding, mut visit: F) -> bool
    where
        F: FnMut(&Binding, &[usize]) -> ControlFlow<()>,
    {
        let n = self.pattern.len();
        let mut b = init;
        let mut trail = Vec::new();
        let mut done = vec![false; n];
        let mut matched = vec![usize::MAX; n];
        if let Some((pi, id)) = self.pin {
            if id >= self.instance.len() || !self.pattern.unify(pi, self.instance.get(id), &mut b, &mut trail) {
                return true;
            }
            done[pi] = true;
            matched[pi] = id;
        }
        let remaining = done.iter().filter(|d| !**d).count();
        self.step(remaining, &mut b, &mut trail, &mut done, &mut matched, &mut visit).is_continue()
    }

    fn step<F>(
        &self,
        remaining: usize,
        b: &mut Binding,
        trail: &mut Vec<usize>,
        done: &mut [bool],
        matched: &mut [usize],
        visit: &mut F,
    ) -> ControlFlow<()>
    where
        F: FnMut(&Binding, &[usize]) -> ControlFlow<()>,
    {
        if remaining == 0 {
            return visit(b, matched);
        }
        // Most constrained pattern atom first.
        let mut pick = None;
        let mut pick_cands: &[usize] = &[];
        for pi in 0..done.len() {
            if done[pi] {
                continue;
            }
            let c = self.pattern.candidates(pi, b, self.instance);
            if pick.is_none() || c.len() < pick_cands.len() {
                pick = Some(pi);
                pick_cands = c;
                if c.is_empty() {
                    break;
                }
            }
        }
        let pi = pick.expect("remaining > 0");
        if pick_cands.is_empty() {
            return ControlFlow::Continue(());
        }
        done[pi] = true;
        for &id in pick_cands {
            if let Some(f) = self.filter {
                if !f(pi, id) {
                    continue;
                }
            }
            let mark = trail.len();
            if self.pattern.unify(pi, self.instance.get(id), b, trail) {
                matched[pi] = id;
                let r = self.step(remaining - 1, b, trail, done, matched, visit);
                undo(b, trail, mark);
                if r.is_break() {
                    done[pi] = false;
                    return r;
                }
            }
        }
        done[pi] = false;
        ControlFlow::Continue(())
    }
}

/// First homomorphism from `atoms` into `inst` extending `init`, if any.
pub fn find_hom(atoms: &[Atom], inst: &Instance, init: &Substitution) -> Option<Substitution> {
    let pat = Pattern::new(atoms);
    let mut found = None;
    Search::new(&pat, inst).run(pat.binding_from(init), |b, _| {
        found = Some(pat.to_substitution(b));
        ControlFlow::Break(())
    });
    found.map(|mut s| {
        for (k, v) in init.iter() {
            s.insert(k.clone(), v.clone());
        }
        s
    })
}

/// All homomorphisms from `atoms` into `inst`, restricted to the pattern's
/// variables.
pub fn all_homs(atoms: &[Atom], inst: &Instance) -> Vec<Substitution> {
    let pat = Pattern::new(atoms);
    let mut out = Vec::new();
    Search::new(&pat, inst).run(pat.empty_binding(), |b, _| {
        out.push(pat.to_substitution(b));
        ControlFlow::Continue(())
    });
    out
}
