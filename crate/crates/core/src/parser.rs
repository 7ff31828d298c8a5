//! Reader for the rule language.
//!
//! ```text
//! fact r1(a,b).
//! tgd r1(X,Y) -> exists Z: r3(Y,Z).
//! egd data(O,A,V), data(O,A,W), funct(A,O) -> V = W.
//! query q(X) :- r1(X,Y), r2(Y).
//! ```
//!
//! Identifiers starting with a lowercase letter or a digit are constants
//! and predicate names; uppercase-initial identifiers are variables. `%`
//! starts a comment that runs to the end of the line. Labeled nulls
//! (`_:n3`) are accepted only by [`parse_instance`].

use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

use crate::model::{variables_of, Atom, Cq, Egd, Instance, Program, Term, Tgd};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: predicate {name} used with arity {found}, declared with arity {expected}")]
    Arity { line: usize, col: usize, name: String, expected: usize, found: usize },
    #[error("{line}:{col}: unsafe rule: {msg}")]
    Unsafe { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: {msg}")]
    Invalid { line: usize, col: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Var(String),
    Null(u64),
    LParen,
    RParen,
    Comma,
    Dot,
    Arrow,
    If,
    Colon,
    Eq,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) | Tok::Var(s) => format!("`{s}`"),
            Tok::Null(k) => format!("`_:n{k}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::If => "`:-`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Eq => "`=`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn lex(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let err = |line, col, msg: String| ParseError::Syntax { line, col, msg };
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (l0, c0) = (line, col);
        let two = |a: char, b: char| c == a && chars.get(i + 1) == Some(&b);
        let (tok, len) = if two('-', '>') {
            (Tok::Arrow, 2)
        } else if two(':', '-') {
            (Tok::If, 2)
        } else if c == '_' {
            if chars.get(i + 1) != Some(&':') || chars.get(i + 2) != Some(&'n') {
                return Err(err(l0, c0, "expected a labeled null of the form _:n<digits>".into()));
            }
            let mut j = i + 3;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            let digits: String = chars[i + 3..j].iter().collect();
            let k = digits.parse::<u64>().map_err(|_| err(l0, c0, "malformed labeled null".into()))?;
            if j < chars.len() && is_ident_char(chars[j]) {
                return Err(err(l0, c0, "malformed labeled null".into()));
            }
            (Tok::Null(k), j - i)
        } else if c.is_ascii_alphanumeric() {
            let mut j = i;
            while j < chars.len() && is_ident_char(chars[j]) {
                j += 1;
            }
            let s: String = chars[i..j].iter().collect();
            let tok = if c.is_ascii_uppercase() { Tok::Var(s) } else { Tok::Ident(s) };
            (tok, j - i)
        } else {
            let tok = match c {
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                ',' => Tok::Comma,
                '.' => Tok::Dot,
                ':' => Tok::Colon,
                '=' => Tok::Eq,
                _ => return Err(err(l0, c0, format!("unexpected character `{c}`"))),
            };
            (tok, 1)
        };
        out.push(Spanned { tok, line: l0, col: c0 });
        i += len;
        col += len;
    }
    out.push(Spanned { tok: Tok::End, line, col });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    allow_nulls: bool,
    arities: HashMap<String, usize>,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if t.tok != Tok::End {
            self.pos += 1;
        }
        t
    }

    fn syntax<T>(&self, at: &Spanned, msg: String) -> PResult<T> {
        Err(ParseError::Syntax { line: at.line, col: at.col, msg })
    }

    fn expect(&mut self, want: Tok) -> PResult<Spanned> {
        let t = self.next();
        if t.tok == want {
            Ok(t)
        } else {
            self.syntax(&t, format!("expected {}, found {}", want.describe(), t.tok.describe()))
        }
    }

    fn eat(&mut self, want: &Tok) -> bool {
        if &self.peek().tok == want {
            self.next();
            true
        } else {
            false
        }
    }

    fn var(&mut self) -> PResult<Arc<str>> {
        let t = self.next();
        match t.tok.clone() {
            Tok::Var(v) => Ok(Arc::from(v.as_str())),
            other => self.syntax(&t, format!("expected a variable, found {}", other.describe())),
        }
    }

    fn term(&mut self) -> PResult<Term> {
        let t = self.next();
        match t.tok.clone() {
            Tok::Ident(s) => Ok(Term::constant(&s)),
            Tok::Var(s) => Ok(Term::var(&s)),
            Tok::Null(k) if self.allow_nulls => Ok(Term::null(k)),
            Tok::Null(_) => Err(ParseError::Invalid {
                line: t.line,
                col: t.col,
                msg: "labeled nulls are only allowed in instance files".into(),
            }),
            other => self.syntax(&t, format!("expected a term, found {}", other.describe())),
        }
    }

    fn atom(&mut self) -> PResult<Atom> {
        let t = self.next();
        let name = match t.tok.clone() {
            Tok::Ident(s) => s,
            other => return self.syntax(&t, format!("expected a predicate, found {}", other.describe())),
        };
        let mut args = Vec::new();
        if self.eat(&Tok::LParen) && !self.eat(&Tok::RParen) {
            loop {
                args.push(self.term()?);
                if self.eat(&Tok::RParen) {
                    break;
                }
                self.expect(Tok::Comma)?;
            }
        }
        match self.arities.get(&name) {
            Some(&k) if k != args.len() => {
                return Err(ParseError::Arity { line: t.line, col: t.col, name, expected: k, found: args.len() })
            }
            Some(_) => {}
            None => {
                self.arities.insert(name.clone(), args.len());
            }
        }
        Ok(Atom::new(&name, args))
    }

    fn conj(&mut self) -> PResult<Vec<Atom>> {
        let mut atoms = vec![self.atom()?];
        while self.eat(&Tok::Comma) {
            atoms.push(self.atom()?);
        }
        Ok(atoms)
    }

    fn fact(&mut self, at: &Spanned) -> PResult<Atom> {
        let a = self.atom()?;
        self.expect(Tok::Dot)?;
        if !a.is_ground() {
            return Err(ParseError::Invalid { line: at.line, col: at.col, msg: format!("fact {a} contains variables") });
        }
        Ok(a)
    }

    fn tgd(&mut self, at: &Spanned) -> PResult<Tgd> {
        let body = self.conj()?;
        self.expect(Tok::Arrow)?;
        let mut declared: Vec<Arc<str>> = Vec::new();
        let is_exists_clause = matches!(&self.peek().tok, Tok::Ident(s) if s == "exists")
            && matches!(self.toks.get(self.pos + 1).map(|s| &s.tok), Some(Tok::Var(_)));
        if is_exists_clause {
            self.next();
            loop {
                let v = self.var()?;
                if declared.contains(&v) {
                    return self.unsafe_rule(at, format!("existential variable {v} declared twice"));
                }
                declared.push(v);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            self.expect(Tok::Colon)?;
        }
        let head = self.conj()?;
        self.expect(Tok::Dot)?;

        let bv = variables_of(&body);
        let hv = variables_of(&head);
        for v in &declared {
            if bv.contains(v) {
                return self.unsafe_rule(at, format!("existential variable {v} occurs in the body"));
            }
            if !hv.contains(v) {
                return self.unsafe_rule(at, format!("existential variable {v} does not occur in the head"));
            }
        }
        for v in &hv {
            if !bv.contains(v) && !declared.contains(v) {
                return self.unsafe_rule(at, format!("head variable {v} is neither in the body nor declared existential"));
            }
        }
        for a in &head {
            for t in &a.args {
                if t.is_constant() && !body.iter().any(|b| b.args.contains(t)) {
                    return self.unsafe_rule(at, format!("head constant {t} does not occur in the body"));
                }
            }
        }
        Ok(Tgd::new(body, head))
    }

    fn egd(&mut self, at: &Spanned) -> PResult<Egd> {
        let body = self.conj()?;
        self.expect(Tok::Arrow)?;
        let lhs = self.var()?;
        self.expect(Tok::Eq)?;
        let rhs = self.var()?;
        self.expect(Tok::Dot)?;
        let bv = variables_of(&body);
        for v in [&lhs, &rhs] {
            if !bv.contains(v) {
                return self.unsafe_rule(at, format!("equated variable {v} does not occur in the body"));
            }
        }
        Ok(Egd { body, lhs, rhs })
    }

    fn query(&mut self, at: &Spanned) -> PResult<Cq> {
        let t = self.next();
        let name = match t.tok.clone() {
            Tok::Ident(s) => s,
            other => return self.syntax(&t, format!("expected a query name, found {}", other.describe())),
        };
        let mut head: Vec<Arc<str>> = Vec::new();
        self.expect(Tok::LParen)?;
        if !self.eat(&Tok::RParen) {
            loop {
                head.push(self.var()?);
                if self.eat(&Tok::RParen) {
                    break;
                }
                self.expect(Tok::Comma)?;
            }
        }
        let body = if self.eat(&Tok::If) { self.conj()? } else { Vec::new() };
        self.expect(Tok::Dot)?;
        let bv = variables_of(&body);
        for v in &head {
            if !bv.contains(v) {
                return self.unsafe_rule(at, format!("answer variable {v} does not occur in the query body"));
            }
        }
        Ok(Cq { name: Arc::from(name.as_str()), head, body })
    }

    fn unsafe_rule<T>(&self, at: &Spanned, msg: String) -> PResult<T> {
        Err(ParseError::Unsafe { line: at.line, col: at.col, msg })
    }

    fn program(&mut self) -> PResult<Program> {
        let mut prog = Program::default();
        loop {
            let at = self.next();
            let kw = match &at.tok {
                Tok::End => break,
                Tok::Ident(s) => s.clone(),
                other => return self.syntax(&at, format!("expected a statement keyword, found {}", other.describe())),
            };
            match kw.as_str() {
                "fact" => {
                    let a = self.fact(&at)?;
                    prog.facts.insert(a);
                }
                "tgd" => prog.tgds.push(self.tgd(&at)?),
                "egd" => prog.egds.push(self.egd(&at)?),
                "query" => {
                    let q = self.query(&at)?;
                    if prog.query(&q.name).is_some() {
                        return Err(ParseError::Invalid {
                            line: at.line,
                            col: at.col,
                            msg: format!("query {} defined twice", q.name),
                        });
                    }
                    prog.queries.push(q);
                }
                other => {
                    return self.syntax(&at, format!("unknown statement `{other}`; expected fact, tgd, egd or query"))
                }
            }
        }
        Ok(prog)
    }
}

fn parser(src: &str, allow_nulls: bool) -> PResult<Parser> {
    Ok(Parser { toks: lex(src)?, pos: 0, allow_nulls, arities: HashMap::new() })
}

/// Parses a program. Labeled nulls are rejected.
pub fn parse_program(src: &str) -> Result<Program, ParseError> {
    parser(src, false)?.program()
}

/// Parses an instance made of `fact` statements, which may mention
/// labeled nulls.
pub fn parse_instance(src: &str) -> Result<Instance, ParseError> {
    let prog = parser(src, true)?.program()?;
    if let Some(t) = prog.tgds.first() {
        return Err(ParseError::Invalid { line: 1, col: 1, msg: format!("instance files hold facts only, found tgd {t}") });
    }
    if !prog.egds.is_empty() || !prog.queries.is_empty() {
        return Err(ParseError::Invalid { line: 1, col: 1, msg: "instance files hold facts only".into() });
    }
    Ok(prog.facts)
}

/// Renders a program in the syntax accepted by [`parse_program`].
pub fn render(p: &Program) -> String {
    p.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_statement_kinds() {
        let src = "% example\nfact r1(a,b).\ntgd r1(X,Y) -> exists Z: r3(Y,Z).\n\
                   egd data(O,A,V), data(O,A,W), funct(A,O) -> V = W.\nquery q(X) :- r1(X,Y), r2(Y).\n";
        let p = parse_program(src).unwrap();
        assert_eq!(p.facts.len(), 1);
        assert_eq!(p.tgds.len(), 1);
        assert_eq!(p.tgds[0].existentials, vec![Arc::from("Z")]);
        assert_eq!(p.egds.len(), 1);
        assert_eq!(p.queries[0].head, vec![Arc::from("X")]);
    }

    #[test]
    fn renders_canonically() {
        let p = parse_program("tgd r1(X,Y)->exists Z:r3(Y,Z).  query q() :- p.").unwrap();
        assert_eq!(render(&p), "tgd r1(X,Y) -> exists Z: r3(Y,Z).\nquery q() :- p.\n");
    }

    #[test]
    fn existentials_follow_head_order() {
        let p = parse_program("tgd a(X) -> exists V, U: b(X,U,V).").unwrap();
        assert_eq!(p.tgds[0].to_string(), "a(X) -> exists U, V: b(X,U,V)");
    }

    #[test]
    fn undeclared_head_variable_is_unsafe() {
        let e = parse_program("tgd r1(X,Y) -> r3(Y,Z).").unwrap_err();
        assert!(matches!(e, ParseError::Unsafe { line: 1, col: 1, .. }), "{e}");
    }

    #[test]
    fn arity_mismatch_is_reported() {
        let e = parse_program("fact p(a).\nfact p(a,b).").unwrap_err();
        assert!(matches!(e, ParseError::Arity { line: 2, col: 6, expected: 1, found: 2, .. }), "{e}");
    }

    #[test]
    fn egd_needs_body_variables() {
        let e = parse_program("egd p(X) -> X = Y.").unwrap_err();
        assert!(matches!(e, ParseError::Unsafe { .. }));
    }

    #[test]
    fn head_constant_must_occur_in_body() {
        assert!(parse_program("tgd p(X) -> q(X,c).").is_err());
        assert!(parse_program("tgd p(X,c) -> q(X,c).").is_ok());
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let e = parse_program("fact p(a)\nfact q(b).").unwrap_err();
        assert_eq!(e, ParseError::Syntax { line: 2, col: 1, msg: "expected `.`, found `fact`".into() });
        let e = parse_program("fact p(a) ; ").unwrap_err();
        assert!(matches!(e, ParseError::Syntax { line: 1, col: 11, .. }));
    }

    #[test]
    fn nulls_only_in_instances() {
        assert!(parse_program("fact p(_:n1).").is_err());
        let inst = parse_instance("fact p(_:n1, a).").unwrap();
        assert!(inst.contains(&Atom::new("p", vec![Term::null(1), Term::constant("a")])));
    }

    #[test]
    fn zero_arity_and_numeric_constants() {
        let p = parse_program("fact index(0).\nfact go.\ntgd go() -> done.").unwrap();
        assert!(p.facts.contains(&Atom::new("index", vec![Term::constant("0")])));
        assert_eq!(p.tgds[0].to_string(), "go -> done");
    }

    #[test]
    fn empty_program() {
        let p = parse_program("  % nothing\n").unwrap();
        assert_eq!(p, Program::default());
        assert_eq!(render(&p), "");
    }

    #[test]
    fn exists_may_be_a_predicate() {
        let p = parse_program("tgd p(X) -> exists(X).").unwrap();
        assert_eq!(p.tgds[0].head[0].name(), "exists");
    }
}
