//! Chase failure detection through inequality queries, answering with
//! EGDs set aside, and the blocking chase used to validate that shortcut.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::chase::{run_chase, ChaseError, ChaseOptions, ChaseStatus, Step};
use crate::hom::find_hom;
use crate::model::{Atom, Cq, Egd, Instance, Predicate, Substitution, Term, Tgd};
use crate::query::{certain_answers, AnswerOptions, AnswerReport, AnswerStatus, QueryError, Strategy};

/// Name of the inequality predicate; the quote keeps it out of parsed input.
pub const NEQ: &str = "neq'";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FailureVerdict {
    Failed,
    NoFailure,
    Unknown,
}

impl fmt::Display for FailureVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailureVerdict::Failed => "failed",
            FailureVerdict::NoFailure => "no-failure",
            FailureVerdict::Unknown => "unknown",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeparationVerdict {
    pub verdict: FailureVerdict,
    /// EGD index and a body homomorphism equating two distinct database
    /// values.
    pub witness: Option<(usize, Substitution)>,
    /// Steps taken by the TGD-only chase.
    pub steps: usize,
}

impl SeparationVerdict {
    pub fn failed(&self) -> bool {
        self.verdict == FailureVerdict::Failed
    }
}

fn neq_pred() -> Predicate {
    Predicate { name: Arc::from(NEQ), arity: 2 }
}

/// `neq(c, d)` for all distinct `c, d` in `dom(db)`.
pub fn neq_facts(db: &Instance) -> Vec<Atom> {
    let dom: Vec<Term> = db.domain().into_iter().collect();
    let mut out = Vec::with_capacity(dom.len() * dom.len().saturating_sub(1));
    for c in &dom {
        for d in &dom {
            if c != d {
                out.push(Atom::with_predicate(neq_pred(), vec![c.clone(), d.clone()]));
            }
        }
    }
    out
}

/// The body of `e` plus `neq(lhs, rhs)`.
pub fn failure_query(e: &Egd) -> Vec<Atom> {
    let mut body = e.body.clone();
    body.push(Atom::with_predicate(
        neq_pred(),
        vec![Term::Variable(e.lhs.clone()), Term::Variable(e.rhs.clone())],
    ));
    body
}

/// Decides whether the interleaved chase would fail by answering one
/// inequality query per EGD over the restricted chase under `tgds` alone.
pub fn egd_failure_check(db: &Instance, tgds: &[Tgd], egds: &[Egd], budget: usize) -> Result<SeparationVerdict, ChaseError> {
    if egds.is_empty() {
        return Ok(SeparationVerdict { verdict: FailureVerdict::NoFailure, witness: None, steps: 0 });
    }
    let mut start = db.clone();
    start.extend(neq_facts(db));
    let opts = ChaseOptions { max_steps: budget, max_depth: usize::MAX, egd_interleave: false, ..ChaseOptions::default() };
    let r = run_chase(&start, tgds, &[], &opts)?;
    let steps = r.steps.len();
    for (i, e) in egds.iter().enumerate() {
        if let Some(h) = find_hom(&failure_query(e), &r.instance, &Substitution::new()) {
            return Ok(SeparationVerdict { verdict: FailureVerdict::Failed, witness: Some((i, h)), steps });
        }
    }
    let verdict = if r.saturated() { FailureVerdict::NoFailure } else { FailureVerdict::Unknown };
    Ok(SeparationVerdict { verdict, witness: None, steps })
}

/// Answers `q` under `tgds ∪ egds` assuming the EGDs are innocuous: a
/// failing theory entails every Boolean query; otherwise the EGDs are
/// dropped.
pub fn separated_answer(
    db: &Instance,
    tgds: &[Tgd],
    egds: &[Egd],
    q: &Cq,
    strategy: Strategy,
    opts: &AnswerOptions,
) -> Result<AnswerReport, QueryError> {
    let check = egd_failure_check(db, tgds, egds, opts.max_steps)?;
    if let (FailureVerdict::Failed, Some((i, h))) = (check.verdict, &check.witness) {
        return Ok(AnswerReport::failed(q, format!("egd#{} equates distinct database values via {h}", i + 1)));
    }
    let mut r = certain_answers(db, tgds, &[], q, strategy, opts)?;
    if check.verdict == FailureVerdict::Unknown {
        r.status = AnswerStatus::SoundLowerBound;
        r.budget_exhausted = true;
        r.note = Some("failure check did not finish".into());
    }
    Ok(r)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BlockingError {
    #[error(transparent)]
    Chase(#[from] ChaseError),
    #[error("step {index} is not innocuous: {step}")]
    NotInnocuous { index: usize, step: String },
}

#[derive(Debug, Clone)]
pub struct BlockingChase {
    /// Every atom ever derived.
    pub all: Instance,
    /// Atoms lost to equality merges.
    pub blocked: Instance,
    pub survivors: Instance,
    pub status: ChaseStatus,
    pub egd_steps: usize,
}

/// Replays the interleaved chase keeping lost atoms in a blocked set
/// instead of deleting them.
pub fn blocking_chase(db: &Instance, tgds: &[Tgd], egds: &[Egd], opts: &ChaseOptions) -> Result<BlockingChase, BlockingError> {
    let opts = ChaseOptions { egd_interleave: true, ..opts.clone() };
    let r = run_chase(db, tgds, egds, &opts)?;
    let mut all = db.clone();
    let mut blocked = Instance::new();
    let mut cur = db.clone();
    let mut egd_steps = 0;
    for (index, s) in r.steps.iter().enumerate() {
        match s {
            Step::Tgd { atom, .. } => {
                cur.insert(atom.clone());
                all.insert(atom.clone());
            }
            Step::Egd { kept, replaced, innocuous, .. } => {
                if !innocuous {
                    return Err(BlockingError::NotInnocuous { index, step: s.to_string() });
                }
                egd_steps += 1;
                let next = cur.replace_term(replaced, kept);
                blocked.extend(cur.iter().filter(|a| !next.contains(a)).cloned());
                cur = next;
            }
        }
    }
    let survivors: Instance = all.iter().filter(|a| !blocked.contains(a)).cloned().collect();
    Ok(BlockingChase { all, blocked, survivors, status: r.status, egd_steps })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InnocuousReport {
    pub applications: usize,
    pub all_innocuous: bool,
    pub status: ChaseStatus,
}

/// Runs the interleaved chase and reports whether every EGD application
/// only shrank the instance.
pub fn monitor_innocuous(db: &Instance, tgds: &[Tgd], egds: &[Egd], opts: &ChaseOptions) -> Result<InnocuousReport, ChaseError> {
    let opts = ChaseOptions { egd_interleave: true, ..opts.clone() };
    let r = run_chase(db, tgds, egds, &opts)?;
    let flags: Vec<bool> =
        r.steps.iter().filter_map(|s| if let Step::Egd { innocuous, .. } = s { Some(*innocuous) } else { None }).collect();
    Ok(InnocuousReport { applications: flags.len(), all_innocuous: flags.iter().all(|f| *f), status: r.status })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;
    use crate::query::holds;

    const FUNCT: &str = "egd data(O,A,V), data(O,A,W), funct(A,O) -> V = W.\n";

    #[test]
    fn conflicting_functional_data_fails() {
        let p = parse_program(&format!("fact data(o,a,c1).\nfact data(o,a,c2).\nfact funct(a,o).\n{FUNCT}")).unwrap();
        let v = egd_failure_check(&p.facts, &p.tgds, &p.egds, 100).unwrap();
        assert!(v.failed());
        let interleaved = run_chase(&p.facts, &p.tgds, &p.egds, &ChaseOptions::default()).unwrap();
        assert_eq!(interleaved.status, ChaseStatus::Failed);
    }

    #[test]
    fn no_egds_is_immediate() {
        let p = parse_program("fact p(a).").unwrap();
        let v = egd_failure_check(&p.facts, &[], &[], 1).unwrap();
        assert_eq!(v.verdict, FailureVerdict::NoFailure);
        assert_eq!(v.steps, 0);
    }

    #[test]
    fn failing_theory_entails_boolean_queries() {
        let p = parse_program(&format!(
            "fact data(o,a,c1).\nfact data(o,a,c2).\nfact funct(a,o).\n{FUNCT}query b() :- nothing(X).\nquery u(X) :- data(X,Y,Z)."
        ))
        .unwrap();
        let r = separated_answer(&p.facts, &p.tgds, &p.egds, &p.queries[0], Strategy::Terminate, &AnswerOptions::default())
            .unwrap();
        assert_eq!(r.status, AnswerStatus::Failed);
        assert!(r.is_true());
        let u = separated_answer(&p.facts, &p.tgds, &p.egds, &p.queries[1], Strategy::Terminate, &AnswerOptions::default())
            .unwrap();
        assert!(u.answers.is_empty());
        assert!(u.note.is_some());
    }

    #[test]
    fn blocking_chase_keeps_lost_atoms() {
        let p = parse_program(&format!(
            "fact mandatory(a,o).\nfact data(o,a,v1).\nfact funct(a,o).\n\
             tgd mandatory(A,O) -> exists V: data(O,A,V).\n{FUNCT}"
        ))
        .unwrap();
        let opts = ChaseOptions::oblivious();
        let b = blocking_chase(&p.facts, &p.tgds, &p.egds, &opts).unwrap();
        assert_eq!(b.egd_steps, 1);
        assert_eq!(b.blocked.len(), 1);
        assert!(b.blocked.iter().all(|a| a.has_nulls()));
        assert!(b.blocked.is_subset(&b.all));
        assert_eq!(b.survivors, b.all.iter().filter(|a| !a.has_nulls()).cloned().collect());
        assert!(holds(&b.survivors, &p.facts.iter().cloned().collect::<Vec<_>>()));
    }

    #[test]
    fn blocking_chase_without_egds_loses_nothing() {
        let p = parse_program("fact e(a,b).\ntgd e(X,Y) -> exists Z: f(Y,Z).").unwrap();
        let b = blocking_chase(&p.facts, &p.tgds, &[], &ChaseOptions::default()).unwrap();
        assert!(b.blocked.is_empty());
        assert_eq!(b.all.len(), 2);
        assert_eq!(b.survivors, b.all);
    }
}
