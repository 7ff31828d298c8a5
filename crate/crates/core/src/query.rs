//! Conjunctive query evaluation, certain answers and containment.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::ControlFlow;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::analysis::classify;
use crate::chase::{run_chase, ChaseError, ChaseOptions, ChaseStatus, Mode, Step};
use crate::clouds::{blocked_saturate, SaturationOptions, SaturationStatus};
use crate::hom::{Pattern, Search};
use crate::model::{Atom, Cq, Egd, Instance, Predicate, Term, Tgd};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QueryError {
    #[error(transparent)]
    Chase(#[from] ChaseError),
    #[error("expected {expected} values, got {found}")]
    ArityMismatch { expected: usize, found: usize },
    #[error("answer tuples must consist of constants, found {0}")]
    NonConstant(Term),
    #[error("strategy {strategy} does not apply: {reason}")]
    StrategyMismatch { strategy: Strategy, reason: String },
    #[error("unknown strategy `{0}`; expected terminate, blocked-atomic or bounded:N")]
    BadStrategy(String),
}

pub type Tuple = Vec<Term>;

/// All answer tuples of `q` over `inst`, sorted and deduplicated. Tuples
/// may contain nulls.
pub fn eval_cq(inst: &Instance, q: &Cq) -> BTreeSet<Tuple> {
    let pat = Pattern::new(&q.body);
    let slots: Vec<usize> = q.head.iter().map(|v| pat.var_index(v).expect("answer variables occur in the body")).collect();
    let mut out = BTreeSet::new();
    Search::new(&pat, inst).run(pat.empty_binding(), |b, _| {
        out.insert(slots.iter().map(|&s| b[s].clone().expect("bound")).collect());
        ControlFlow::Continue(())
    });
    out
}

/// Does the Boolean query (or the existential closure of `q`) hold?
pub fn holds(inst: &Instance, body: &[Atom]) -> bool {
    let pat = Pattern::new(body);
    !Search::new(&pat, inst).run(pat.empty_binding(), |_, _| ControlFlow::Break(()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Restricted chase until saturation or budget.
    Terminate,
    /// Cloud-store saturation; atomic queries over weakly guarded rules.
    BlockedAtomic,
    /// Oblivious chase up to the given forest depth.
    Bounded(usize),
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Terminate => f.write_str("terminate"),
            Strategy::BlockedAtomic => f.write_str("blocked-atomic"),
            Strategy::Bounded(n) => write!(f, "bounded:{n}"),
        }
    }
}

impl FromStr for Strategy {
    type Err = QueryError;

    fn from_str(s: &str) -> Result<Strategy, QueryError> {
        match s {
            "terminate" => Ok(Strategy::Terminate),
            "blocked-atomic" => Ok(Strategy::BlockedAtomic),
            _ => match s.strip_prefix("bounded:").and_then(|n| n.parse::<usize>().ok()) {
                Some(n) if n > 0 => Ok(Strategy::Bounded(n)),
                _ => Err(QueryError::BadStrategy(s.to_string())),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AnswerStatus {
    /// The answers are the certain answers.
    Exact,
    /// Every reported tuple is certain; more may exist.
    SoundLowerBound,
    /// The theory is inconsistent with the database.
    Failed,
}

impl fmt::Display for AnswerStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AnswerStatus::Exact => "exact",
            AnswerStatus::SoundLowerBound => "sound-lower-bound",
            AnswerStatus::Failed => "failed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnswerReport {
    pub answers: BTreeSet<Tuple>,
    pub status: AnswerStatus,
    pub budget_exhausted: bool,
    pub note: Option<String>,
}

impl AnswerReport {
    /// Report for an inconsistent theory: a Boolean query is entailed,
    /// other queries get no enumerated answers.
    pub fn failed(q: &Cq, note: String) -> AnswerReport {
        let mut answers = BTreeSet::new();
        if q.is_boolean() {
            answers.insert(Vec::new());
        }
        AnswerReport { answers, status: AnswerStatus::Failed, budget_exhausted: false, note: Some(note) }
    }

    /// True when the (Boolean) query is entailed.
    pub fn is_true(&self) -> bool {
        !self.answers.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnswerOptions {
    pub max_steps: usize,
    pub memory_limit_mb: Option<u64>,
}

impl Default for AnswerOptions {
    fn default() -> Self {
        AnswerOptions { max_steps: 10_000, memory_limit_mb: None }
    }
}

fn constant_only(answers: BTreeSet<Tuple>) -> BTreeSet<Tuple> {
    answers.into_iter().filter(|t| t.iter().all(Term::is_constant)).collect()
}

/// Certain answers of `q` over `db` under single-head `tgds` and,
/// interleaved, `egds`.
pub fn certain_answers(
    db: &Instance,
    tgds: &[Tgd],
    egds: &[Egd],
    q: &Cq,
    strategy: Strategy,
    opts: &AnswerOptions,
) -> Result<AnswerReport, QueryError> {
    let chase_opts = |mode, depth| ChaseOptions {
        mode,
        max_steps: opts.max_steps,
        max_depth: depth,
        egd_interleave: true,
        memory_limit_mb: opts.memory_limit_mb,
    };
    let copts = match strategy {
        Strategy::Terminate => chase_opts(Mode::Restricted, usize::MAX),
        Strategy::Bounded(d) => chase_opts(Mode::Oblivious, d),
        Strategy::BlockedAtomic => return blocked_atomic(db, tgds, egds, q, opts),
    };
    let r = run_chase(db, tgds, egds, &copts)?;
    if r.status == ChaseStatus::Failed {
        return Ok(AnswerReport::failed(q, r.note.unwrap_or_default()));
    }
    let exhausted = r.status == ChaseStatus::BudgetExhausted;
    Ok(AnswerReport {
        answers: constant_only(eval_cq(&r.instance, q)),
        status: if exhausted { AnswerStatus::SoundLowerBound } else { AnswerStatus::Exact },
        budget_exhausted: exhausted,
        note: r.note,
    })
}

fn blocked_atomic(db: &Instance, tgds: &[Tgd], egds: &[Egd], q: &Cq, opts: &AnswerOptions) -> Result<AnswerReport, QueryError> {
    let mismatch = |reason: &str| QueryError::StrategyMismatch { strategy: Strategy::BlockedAtomic, reason: reason.into() };
    if q.body.len() != 1 {
        return Err(mismatch("query must have exactly one atom"));
    }
    if !egds.is_empty() {
        return Err(mismatch("equality dependencies are not supported"));
    }
    if !classify(tgds).overall.is_weakly_guarded() {
        return Err(mismatch("rules are not weakly guarded"));
    }
    let sopts = SaturationOptions { max_steps: opts.max_steps.max(1).saturating_mul(10), ..SaturationOptions::default() };
    let sat = blocked_saturate(db, tgds, &sopts).map_err(|e| mismatch(&e.to_string()))?;
    let exhausted = sat.status == SaturationStatus::BudgetExhausted;
    Ok(AnswerReport {
        answers: constant_only(eval_cq(&sat.stored_atoms(), q)),
        status: if exhausted { AnswerStatus::SoundLowerBound } else { AnswerStatus::Exact },
        budget_exhausted: exhausted,
        note: exhausted.then(|| "cloud store did not stabilize".to_string()),
    })
}

/// Boolean version of `q` for the tuple `t`: a fresh predicate `q'` holds
/// the answer variables, and the fact `q'(t)` is returned alongside.
pub fn cq_to_bcq(q: &Cq, t: &[Term]) -> Result<(Cq, Atom), QueryError> {
    if t.len() != q.arity() {
        return Err(QueryError::ArityMismatch { expected: q.arity(), found: t.len() });
    }
    if let Some(bad) = t.iter().find(|x| !x.is_constant()) {
        return Err(QueryError::NonConstant(bad.clone()));
    }
    let pred = Predicate { name: Arc::from(format!("{}'", q.name).as_str()), arity: q.arity() };
    let mut body = q.body.clone();
    body.push(Atom::with_predicate(pred.clone(), q.head.iter().map(|v| Term::Variable(v.clone())).collect()));
    let bcq = Cq { name: Arc::from(format!("{}'", q.name).as_str()), head: Vec::new(), body };
    Ok((bcq, Atom::with_predicate(pred, t.to_vec())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Containment {
    Yes,
    No,
    Unknown,
}

impl fmt::Display for Containment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Containment::Yes => "yes",
            Containment::No => "no",
            Containment::Unknown => "unknown",
        })
    }
}

/// Freezes `q1` with distinct fresh nulls, chases it and checks whether the
/// frozen answer tuple is an answer of `q2`. Nulls stay rigid throughout.
pub fn check_containment(q1: &Cq, q2: &Cq, tgds: &[Tgd], egds: &[Egd], budget: usize) -> Result<Containment, QueryError> {
    if q1.arity() != q2.arity() {
        return Err(QueryError::ArityMismatch { expected: q1.arity(), found: q2.arity() });
    }
    let vars = crate::model::variables_of(&q1.body);
    let freeze = |t: &Term| match t {
        Term::Variable(v) => Term::Null(vars.iter().position(|x| x == v).unwrap() as u64 + 1),
        _ => t.clone(),
    };
    let frozen: Instance = q1.body.iter().map(|a| a.map_terms(freeze)).collect();
    let mut head: Vec<Term> = q1.head.iter().map(|v| freeze(&Term::Variable(v.clone()))).collect();
    let opts = ChaseOptions { max_steps: budget, max_depth: usize::MAX, ..ChaseOptions::default() };
    let r = run_chase(&frozen, tgds, egds, &opts)?;
    if r.status == ChaseStatus::Failed {
        return Ok(Containment::Yes);
    }
    for s in &r.steps {
        if let Step::Egd { kept, replaced, .. } = s {
            for t in &mut head {
                if t == replaced {
                    *t = kept.clone();
                }
            }
        }
    }
    if eval_cq(&r.instance, q2).contains(&head) {
        Ok(Containment::Yes)
    } else if r.saturated() {
        Ok(Containment::No)
    } else {
        Ok(Containment::Unknown)
    }
}
