//! Affected positions, guardedness classification and head normalization.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::model::{variables_of, Atom, Position, Predicate, Term, Tgd};

/// Positions that may host a labeled null in some chase: the least set
/// containing every existential head position and every head position whose
/// variable occurs in the body only at affected positions.
pub fn affected_positions(tgds: &[Tgd]) -> BTreeSet<Position> {
    let mut aff = BTreeSet::new();
    for t in tgds {
        for a in &t.head {
            for (pos, term) in a.positions() {
                if matches!(term, Term::Variable(v) if t.is_existential(v)) {
                    aff.insert(pos);
                }
            }
        }
    }
    loop {
        let mut changed = false;
        for t in tgds {
            for a in &t.head {
                for (pos, term) in a.positions() {
                    let Term::Variable(v) = term else { continue };
                    if t.is_existential(v) || aff.contains(&pos) {
                        continue;
                    }
                    if body_positions(&t.body, v).iter().all(|p| aff.contains(p)) {
                        aff.insert(pos);
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            return aff;
        }
    }
}

fn body_positions(body: &[Atom], v: &str) -> Vec<Position> {
    body.iter()
        .flat_map(|a| a.positions())
        .filter(|(_, t)| matches!(t, Term::Variable(x) if &**x == v))
        .map(|(p, _)| p)
        .collect()
}

/// Guardedness of a single rule, strongest first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RuleClass {
    Linear,
    Guarded,
    WeaklyGuarded,
    Unguarded,
}

impl fmt::Display for RuleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RuleClass::Linear => "linear",
            RuleClass::Guarded => "guarded",
            RuleClass::WeaklyGuarded => "weakly-guarded",
            RuleClass::Unguarded => "unguarded",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleReport {
    pub class: RuleClass,
    /// No existential variables.
    pub full: bool,
    /// First body atom containing every body variable.
    pub guard: Option<usize>,
    /// First body atom containing every variable that occurs in the body
    /// only at affected positions.
    pub weak_guard: Option<usize>,
}

impl RuleReport {
    pub fn is_guarded(&self) -> bool {
        self.guard.is_some()
    }

    pub fn is_weakly_guarded(&self) -> bool {
        self.weak_guard.is_some()
    }

    /// Body atom whose image becomes the parent in the chase forest.
    pub fn forest_guard(&self) -> Option<usize> {
        self.guard.or(self.weak_guard)
    }
}

/// Class of a whole rule set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Class {
    /// Every rule is free of existential variables.
    Full,
    Linear,
    Guarded,
    WeaklyGuarded,
    Unguarded,
}

impl Class {
    pub fn is_weakly_guarded(self) -> bool {
        self != Class::Unguarded
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Class::Full => "full",
            Class::Linear => "linear",
            Class::Guarded => "guarded",
            Class::WeaklyGuarded => "weakly-guarded",
            Class::Unguarded => "unguarded",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Classification {
    pub per_rule: Vec<RuleReport>,
    pub overall: Class,
    pub affected: BTreeSet<Position>,
}

pub fn classify_rule(t: &Tgd, affected: &BTreeSet<Position>) -> RuleReport {
    let vars = t.body_vars();
    let covers = |a: &Atom, need: &[Arc<str>]| need.iter().all(|v| a.args.contains(&Term::Variable(v.clone())));
    let guard = t.body.iter().position(|a| covers(a, &vars));
    let only_affected: Vec<Arc<str>> =
        vars.iter().filter(|v| body_positions(&t.body, v).iter().all(|p| affected.contains(p))).cloned().collect();
    let weak_guard = t.body.iter().position(|a| covers(a, &only_affected));
    let class = if t.body.len() == 1 {
        RuleClass::Linear
    } else if guard.is_some() {
        RuleClass::Guarded
    } else if weak_guard.is_some() {
        RuleClass::WeaklyGuarded
    } else {
        RuleClass::Unguarded
    };
    RuleReport { class, full: t.is_full(), guard, weak_guard }
}

pub fn classify(tgds: &[Tgd]) -> Classification {
    let affected = affected_positions(tgds);
    let per_rule: Vec<RuleReport> = tgds.iter().map(|t| classify_rule(t, &affected)).collect();
    let overall = if per_rule.iter().all(|r| r.full) {
        Class::Full
    } else {
        match per_rule.iter().map(|r| r.class).max().unwrap_or(RuleClass::Linear) {
            RuleClass::Linear => Class::Linear,
            RuleClass::Guarded => Class::Guarded,
            RuleClass::WeaklyGuarded => Class::WeaklyGuarded,
            RuleClass::Unguarded => Class::Unguarded,
        }
    };
    Classification { per_rule, overall, affected }
}

/// Rewrites multi-atom heads into single-atom heads. Rules without
/// existentials are split per head atom; rules with existentials go through
/// a fresh predicate holding every head variable.
pub fn normalize_heads(tgds: &[Tgd]) -> Vec<Tgd> {
    let mut out = Vec::new();
    let mut fresh = 0;
    for t in tgds {
        if t.head.len() <= 1 {
            out.push(t.clone());
        } else if t.is_full() {
            out.extend(t.head.iter().map(|h| Tgd::new(t.body.clone(), vec![h.clone()])));
        } else {
            fresh += 1;
            let vars = variables_of(&t.head);
            let aux = Atom::with_predicate(
                Predicate { name: Arc::from(format!("v'{fresh}").as_str()), arity: vars.len() },
                vars.iter().map(|v| Term::Variable(v.clone())).collect(),
            );
            out.push(Tgd::new(t.body.clone(), vec![aux.clone()]));
            out.extend(t.head.iter().map(|h| Tgd::new(vec![aux.clone()], vec![h.clone()])));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;

    fn tgds(src: &str) -> Vec<Tgd> {
        parse_program(src).unwrap().tgds
    }

    fn positions(list: &[(&str, usize, usize)]) -> BTreeSet<Position> {
        list.iter().map(|(n, a, i)| Position::new(n, *a, *i)).collect()
    }

    const EX33: &str = "tgd p1(X,Y), p2(X,Y) -> exists Z: p2(Y,Z).\ntgd p2(X,Y), p2(W,X) -> p1(Y,X).";

    #[test]
    fn affected_positions_of_mutual_recursion() {
        assert_eq!(affected_positions(&tgds(EX33)), positions(&[("p2", 2, 2), ("p1", 2, 1)]));
    }

    #[test]
    fn weakly_guarded_but_not_guarded() {
        let c = classify(&tgds(EX33));
        assert_eq!(c.overall, Class::WeaklyGuarded);
        assert_eq!(c.per_rule[0].class, RuleClass::Guarded);
        assert_eq!(c.per_rule[1].class, RuleClass::WeaklyGuarded);
        assert_eq!(c.per_rule[1].weak_guard, Some(0));
        assert_eq!(c.per_rule[1].guard, None);
    }

    #[test]
    fn single_body_atom_is_linear_and_guarded() {
        let c = classify(&tgds("tgd r(X,Y) -> exists Z: s(Y,Z)."));
        assert_eq!(c.per_rule[0].class, RuleClass::Linear);
        assert!(c.per_rule[0].is_guarded());
        assert_eq!(c.overall, Class::Linear);
    }

    #[test]
    fn datalog_without_existentials_is_full() {
        let t = tgds("tgd e(X,Y), e(Y,Z) -> e(X,Z).");
        assert!(affected_positions(&t).is_empty());
        assert_eq!(classify(&t).overall, Class::Full);
    }

    #[test]
    fn normalization_splits_full_heads() {
        let t = normalize_heads(&tgds("tgd p(X,Y) -> q(X), r(Y)."));
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].to_string(), "p(X,Y) -> q(X)");
        assert_eq!(t[1].to_string(), "p(X,Y) -> r(Y)");
    }

    #[test]
    fn normalization_routes_existentials_through_auxiliary() {
        let t = normalize_heads(&tgds("tgd t(X) -> exists Z: p(X,Z), q(Z)."));
        assert_eq!(t.len(), 3);
        assert_eq!(t[0].to_string(), "t(X) -> exists Z: v'1(X,Z)");
        assert_eq!(t[1].to_string(), "v'1(X,Z) -> p(X,Z)");
        assert_eq!(t[2].to_string(), "v'1(X,Z) -> q(Z)");
    }

    #[test]
    fn single_heads_pass_through() {
        let t = tgds(EX33);
        assert_eq!(normalize_heads(&t), t);
    }
}
