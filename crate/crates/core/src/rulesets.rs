//! Built-in programs: F-Logic Lite, the grid core, and the
//! 3-colorability encoding.

use std::sync::Arc;

use thiserror::Error;

use crate::model::{Atom, Cq, Instance, Program, Term};
use crate::parser::parse_program;

const FLL: &str = "\
tgd type(O,A,T), data(O,A,V) -> member(V,T).
tgd sub(C1,C3), sub(C3,C2) -> sub(C1,C2).
tgd member(O,C), sub(C,C1) -> member(O,C1).
egd data(O,A,V), data(O,A,W), funct(A,O) -> V = W.
tgd mandatory(A,O) -> exists V: data(O,A,V).
tgd member(O,C), type(C,A,T) -> type(O,A,T).
tgd sub(C,C1), type(C1,A,T) -> type(C,A,T).
tgd type(C,A,T1), sub(T1,T) -> type(C,A,T).
tgd sub(C,C1), mandatory(A,C1) -> mandatory(A,C).
tgd member(O,C), mandatory(A,C) -> mandatory(A,O).
tgd sub(C,C1), funct(A,C1) -> funct(A,C).
tgd member(O,C), funct(A,C) -> funct(A,O).
";

const FLL_SAMPLE: &str = "\
fact member(john,student).
fact member(mary,employee).
fact sub(student,person).
fact sub(employee,person).
fact type(person,name,string).
fact type(person,age,number).
fact mandatory(name,person).
fact mandatory(age,person).
fact funct(age,person).
fact data(john,name,jdoe).
fact data(mary,age,a41).
query members(O,C) :- member(O,C).
query ages(O,V) :- data(O,age,V).
query typed(V) :- member(V,number).
";

const GRID: &str = "\
fact index(0).
tgd index(X) -> exists Y: next(X,Y).
tgd next(X,Y) -> index(Y).
tgd trans(S1,A1,S2,A2,M), next(X1,X2), next(Y1,Y2) -> grid(S1,A1,S2,A2,M,X1,Y1,X2,Y2).
";

/// The eleven F-Logic Lite TGDs and its single EGD, without facts.
pub fn fll_rules() -> Program {
    parse_program(FLL).expect("built-in program parses")
}

/// The F-Logic Lite rules over a small class hierarchy, with queries.
pub fn fll_sample() -> Program {
    parse_program(&format!("{FLL_SAMPLE}{FLL}")).expect("built-in program parses")
}

/// Infinite grid core: an unbounded successor chain and an unguarded
/// product rule.
pub fn grid_rules() -> Program {
    parse_program(GRID).expect("built-in program parses")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphSpec {
    pub vertices: Vec<String>,
    pub edges: Vec<(String, String)>,
}

impl GraphSpec {
    pub fn new(vertices: &[&str], edges: &[(&str, &str)]) -> GraphSpec {
        GraphSpec {
            vertices: vertices.iter().map(|v| v.to_string()).collect(),
            edges: edges.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
        }
    }

    pub fn complete(n: usize) -> GraphSpec {
        let vertices: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                edges.push((vertices[i].clone(), vertices[j].clone()));
            }
        }
        GraphSpec { vertices, edges }
    }

    pub fn cycle(n: usize) -> GraphSpec {
        let vertices: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
        let edges = (0..n).map(|i| (vertices[i].clone(), vertices[(i + 1) % n].clone())).collect();
        GraphSpec { vertices, edges }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RulesetError {
    #[error("self-loop on vertex {0}")]
    SelfLoop(String),
    #[error("edge mentions undeclared vertex {0}")]
    UnknownVertex(String),
}

/// The six `data(o, c, d)` facts over distinct colors `r, g, b`.
pub fn color_database() -> Instance {
    let c = Term::constant;
    let colors = ["r", "g", "b"];
    let mut db = Instance::new();
    for x in colors {
        for y in colors {
            if x != y {
                db.insert(Atom::new("data", vec![c("o"), c(x), c(y)]));
            }
        }
    }
    db
}

/// Database and Boolean query `color` such that the query holds iff the
/// graph is 3-colorable. Vertex `i` becomes variable `Vi`; all atoms share
/// the witness variable `X`.
pub fn encode_three_colorability(g: &GraphSpec) -> Result<(Instance, Cq), RulesetError> {
    let var = |v: &str| -> Result<Term, RulesetError> {
        let i = g.vertices.iter().position(|x| x == v).ok_or_else(|| RulesetError::UnknownVertex(v.to_string()))?;
        Ok(Term::Variable(Arc::from(format!("V{i}").as_str())))
    };
    let x = Term::var("X");
    let mut body = Vec::new();
    for (a, b) in &g.edges {
        if a == b {
            return Err(RulesetError::SelfLoop(a.clone()));
        }
        let (va, vb) = (var(a)?, var(b)?);
        for atom in [
            Atom::new("data", vec![x.clone(), va.clone(), vb.clone()]),
            Atom::new("data", vec![x.clone(), vb, va]),
        ] {
            if !body.contains(&atom) {
                body.push(atom);
            }
        }
    }
    Ok((color_database(), Cq::new("color", &[], body)))
}

fn coloring_program(g: &GraphSpec) -> Program {
    let (facts, q) = encode_three_colorability(g).expect("built-in graph is loop-free");
    let rules = fll_rules();
    Program { facts, tgds: rules.tgds, egds: rules.egds, queries: vec![q] }
}

pub const BUILTINS: &[&str] = &["fll", "grid", "3col", "3col-k3", "3col-k4", "3col-c5"];

/// Looks up a built-in program by name.
pub fn builtin(name: &str) -> Option<Program> {
    match name {
        "fll" => Some(fll_sample()),
        "grid" => Some(grid_rules()),
        "3col" | "3col-k3" => Some(coloring_program(&GraphSpec::complete(3))),
        "3col-k4" => Some(coloring_program(&GraphSpec::complete(4))),
        "3col-c5" => Some(coloring_program(&GraphSpec::cycle(5))),
        _ => None,
    }
}
