//! Source parsing, declaration handling and clause normalization.
//!
//! The surface language is a definite-clause subset of Edinburgh Prolog.
//! Declarations are directives:
//!
//! ```text
//! :- regtype listnum := [] | [num|listnum].
//! :- pred append(in(list(T)), in(list(T)), out(list(T))).
//! :- entry append(X: listnum, Y: listnum, Z: out).
//! :- resource steps(headcost=1, litcost=0, agg_ub=sum, agg_lb=min, default=(0,0)).
//! :- trust pick(_,_,_,_,_) + not_fails.
//! ```

pub mod ast;
pub mod lexer;
pub mod parser;

use std::collections::HashSet;

use thiserror::Error;

pub use ast::*;
use parser::{Parser, Sentence};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrontendError {
    #[error("{pos}: syntax error: {msg}")]
    Syntax { pos: Pos, msg: String },
    #[error("{pos}: unknown declaration kind '{name}'")]
    UnknownDirective { pos: Pos, name: String },
    #[error("{pos}: malformed {kind} declaration: {msg}")]
    BadDirective { pos: Pos, kind: String, msg: String },
    #[error("{pos}: duplicate entry declaration for {pred}")]
    DuplicateEntry { pos: Pos, pred: PredId },
    #[error("{pos}: entry declaration names undefined predicate {pred}")]
    UndefinedEntry { pos: Pos, pred: PredId },
    #[error("{pos}: unsupported construct: {what}")]
    Unsupported { pos: Pos, what: String },
}

impl FrontendError {
    pub fn pos(&self) -> Pos {
        match self {
            FrontendError::Syntax { pos, .. }
            | FrontendError::UnknownDirective { pos, .. }
            | FrontendError::BadDirective { pos, .. }
            | FrontendError::DuplicateEntry { pos, .. }
            | FrontendError::UndefinedEntry { pos, .. }
            | FrontendError::Unsupported { pos, .. } => *pos,
        }
    }
}

/// Parse a whole program: clauses plus declarations.
pub fn parse_program(src: &str) -> Result<Program, FrontendError> {
    let sentences = Parser::new(src)?.sentences()?;
    let mut prog = Program::default();
    let mut anon = 0usize;
    for s in sentences {
        match s.directive.as_deref() {
            None => {
                let term = name_anonymous(&s.term, &mut anon);
                prog.add_clause(to_clause(&term, s.pos)?);
            }
            Some(kind) => add_directive(&mut prog, kind, &s)?,
        }
    }
    for e in &prog.entries {
        if !prog.is_defined(&e.pred) {
            return Err(FrontendError::UndefinedEntry {
                pos: e.pos,
                pred: e.pred.clone(),
            });
        }
    }
    Ok(prog)
}

fn name_anonymous(t: &Term, counter: &mut usize) -> Term {
    match t {
        Term::Var(v) if v == "_" => {
            *counter += 1;
            Term::Var(format!("_G{counter}"))
        }
        Term::Compound(f, a) => Term::Compound(
            f.clone(),
            a.iter().map(|x| name_anonymous(x, counter)).collect(),
        ),
        other => other.clone(),
    }
}

fn unsupported<T>(pos: Pos, what: impl Into<String>) -> Result<T, FrontendError> {
    Err(FrontendError::Unsupported {
        pos,
        what: what.into(),
    })
}

fn to_clause(term: &Term, pos: Pos) -> Result<Clause, FrontendError> {
    let (head, body_term) = match term {
        Term::Compound(f, a) if f == ":-" && a.len() == 2 => (&a[0], Some(&a[1])),
        _ => (term, None),
    };
    match head {
        Term::Compound(f, _) if f != "," && f != ":-" => {}
        _ => {
            return unsupported(
                pos,
                format!("clause head must be an atom or compound term, got {head}"),
            )
        }
    }
    let mut goals = Vec::new();
    if let Some(b) = body_term {
        flatten_conj(b, &mut goals);
    }
    let body = goals
        .into_iter()
        .map(|g| to_literal(g, pos))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Clause {
        head: head.clone(),
        body,
        head_bindings: 0,
        pos,
    })
}

fn flatten_conj<'a>(t: &'a Term, out: &mut Vec<&'a Term>) {
    match t {
        Term::Compound(f, a) if f == "," && a.len() == 2 => {
            flatten_conj(&a[0], out);
            flatten_conj(&a[1], out);
        }
        other => out.push(other),
    }
}

fn check_arith(t: &Term, pos: Pos) -> Result<(), FrontendError> {
    match t {
        Term::Var(_) | Term::Int(_) => Ok(()),
        Term::Compound(f, a) if a.len() == 2 && matches!(f.as_str(), "+" | "-" | "*") => {
            check_arith(&a[0], pos)?;
            check_arith(&a[1], pos)
        }
        other => unsupported(
            pos,
            format!("arithmetic expression {other} (only +, -, * over integers)"),
        ),
    }
}

fn to_literal(g: &Term, pos: Pos) -> Result<Literal, FrontendError> {
    match g {
        Term::Var(v) => unsupported(pos, format!("variable goal {v}")),
        Term::Int(n) => unsupported(pos, format!("integer goal {n}")),
        Term::Compound(f, a) => match (f.as_str(), a.len()) {
            ("!", 0) => unsupported(pos, "cut"),
            (";", 2) | ("|", 2) => unsupported(pos, "disjunction"),
            ("->", 2) => unsupported(pos, "if-then-else"),
            ("\\+", 1) => unsupported(pos, "negation"),
            ("=", 2) => Ok(Literal::Unify(a[0].clone(), a[1].clone())),
            ("is", 2) => {
                check_arith(&a[1], pos)?;
                Ok(Literal::Is(a[0].clone(), a[1].clone()))
            }
            (op, 2) if CmpOp::from_name(op).is_some() => {
                check_arith(&a[0], pos)?;
                check_arith(&a[1], pos)?;
                Ok(Literal::Compare(
                    CmpOp::from_name(op).unwrap_or(CmpOp::Eq),
                    a[0].clone(),
                    a[1].clone(),
                ))
            }
            ("\\=", 2) | ("==", 2) => unsupported(pos, format!("builtin {f}/2")),
            _ => Ok(Literal::Call(g.clone())),
        },
    }
}

fn bad(pos: Pos, kind: &str, msg: impl Into<String>) -> FrontendError {
    FrontendError::BadDirective {
        pos,
        kind: kind.to_string(),
        msg: msg.into(),
    }
}

fn split_alternatives(t: &Term, out: &mut Vec<Term>) {
    match t {
        Term::Compound(f, a) if f == "|" && a.len() == 2 => {
            split_alternatives(&a[0], out);
            split_alternatives(&a[1], out);
        }
        other => out.push(other.clone()),
    }
}

fn parse_arg_decl(t: &Term, pos: Pos, kind: &str) -> Result<ArgDecl, FrontendError> {
    match t {
        Term::Compound(f, a) if f == ":" && a.len() == 2 => {
            let Term::Var(name) = &a[0] else {
                return Err(bad(
                    pos,
                    kind,
                    format!("argument name must be a variable in {t}"),
                ));
            };
            let mut d = parse_arg_decl(&a[1], pos, kind)?;
            d.name = Some(name.clone());
            Ok(d)
        }
        Term::Compound(f, a) if f == "in" && a.len() == 1 => Ok(ArgDecl {
            mode: Mode::In,
            ty: Some(a[0].clone()),
            name: None,
        }),
        Term::Compound(f, a) if f == "out" && a.len() == 1 => Ok(ArgDecl {
            mode: Mode::Out,
            ty: Some(a[0].clone()),
            name: None,
        }),
        Term::Compound(f, a) if f == "out" && a.is_empty() => Ok(ArgDecl {
            mode: Mode::Out,
            ty: None,
            name: None,
        }),
        Term::Int(_) => Err(bad(pos, kind, format!("expected a type, found {t}"))),
        other => Ok(ArgDecl {
            mode: Mode::In,
            ty: Some(other.clone()),
            name: None,
        }),
    }
}

fn int_of(t: &Term, pos: Pos, kind: &str) -> Result<i64, FrontendError> {
    match t {
        Term::Int(n) => Ok(*n),
        other => Err(bad(
            pos,
            kind,
            format!("expected an integer, found {other}"),
        )),
    }
}

fn agg_of(t: &Term, pos: Pos) -> Result<Aggregation, FrontendError> {
    match t.functor() {
        Some(("sum", 0)) => Ok(Aggregation::Sum),
        Some(("max", 0)) => Ok(Aggregation::Max),
        Some(("min", 0)) => Ok(Aggregation::Min),
        _ => Err(bad(pos, "resource", format!("unknown aggregation {t}"))),
    }
}

fn add_directive(prog: &mut Program, kind: &str, s: &Sentence) -> Result<(), FrontendError> {
    let pos = s.pos;
    let t = &s.term;
    match kind {
        "regtype" => {
            let Term::Compound(f, a) = t else {
                return Err(bad(pos, kind, "expected `name := alternatives`"));
            };
            if f != ":=" || a.len() != 2 {
                return Err(bad(pos, kind, "expected `name := alternatives`"));
            }
            let name = match &a[0] {
                Term::Compound(n, args) if args.is_empty() => n.clone(),
                other => {
                    return Err(bad(
                        pos,
                        kind,
                        format!("type name must be an atom, found {other}"),
                    ))
                }
            };
            let mut alternatives = Vec::new();
            split_alternatives(&a[1], &mut alternatives);
            prog.regtypes.push(RegtypeDecl {
                name,
                alternatives,
                pos,
            });
        }
        "entry" | "pred" => {
            let Term::Compound(name, args) = t else {
                return Err(bad(pos, kind, "expected a predicate pattern"));
            };
            let args = args
                .iter()
                .map(|a| parse_arg_decl(a, pos, kind))
                .collect::<Result<Vec<_>, _>>()?;
            let pred = PredId::new(name, args.len());
            if kind == "entry" {
                let dup = prog.entries.iter().any(|e| {
                    e.pred == pred
                        && e.args
                            .iter()
                            .zip(&args)
                            .all(|(x, y)| x.mode == y.mode && x.ty == y.ty)
                });
                if dup {
                    return Err(FrontendError::DuplicateEntry { pos, pred });
                }
                prog.entries.push(EntryDecl { pred, args, pos });
            } else {
                prog.sigs.push(SigDecl { pred, args, pos });
            }
        }
        "resource" => {
            let Term::Compound(name, args) = t else {
                return Err(bad(pos, kind, "expected name(key=value, ...)"));
            };
            let mut r = ResourceDecl {
                name: name.clone(),
                headcost: 1,
                litcost: 0,
                builtin_cost: 0,
                agg_ub: Aggregation::Sum,
                agg_lb: Aggregation::Min,
                default: (0, Some(0)),
                pos,
            };
            for kv in args {
                let Term::Compound(eq, kv) = kv else {
                    return Err(bad(pos, kind, format!("expected key=value, found {kv}")));
                };
                if eq != "=" || kv.len() != 2 {
                    return Err(bad(pos, kind, "expected key=value"));
                }
                let key = kv[0].functor().map(|(k, _)| k).unwrap_or("");
                match key {
                    "headcost" => r.headcost = int_of(&kv[1], pos, kind)?,
                    "litcost" => r.litcost = int_of(&kv[1], pos, kind)?,
                    "builtin_cost" => r.builtin_cost = int_of(&kv[1], pos, kind)?,
                    "agg_ub" => r.agg_ub = agg_of(&kv[1], pos)?,
                    "agg_lb" => r.agg_lb = agg_of(&kv[1], pos)?,
                    "default" => match &kv[1] {
                        Term::Compound(c, p) if c == "," && p.len() == 2 => {
                            let lo = int_of(&p[0], pos, kind)?;
                            let hi = match &p[1] {
                                Term::Compound(i, x)
                                    if (i == "inf" || i == "infinity") && x.is_empty() =>
                                {
                                    None
                                }
                                other => Some(int_of(other, pos, kind)?),
                            };
                            r.default = (lo, hi);
                        }
                        other => {
                            return Err(bad(
                                pos,
                                kind,
                                format!("default must be (L,U), found {other}"),
                            ))
                        }
                    },
                    other => return Err(bad(pos, kind, format!("unknown key '{other}'"))),
                }
            }
            if r.headcost < 0 || r.litcost < 0 || r.builtin_cost < 0 {
                return Err(bad(pos, kind, "costs must be non-negative"));
            }
            if let Some(hi) = r.default.1 {
                if r.default.0 > hi {
                    return Err(bad(pos, kind, "default lower bound exceeds upper bound"));
                }
            }
            prog.resources.push(r);
        }
        "trust" => {
            let Term::Compound(plus, a) = t else {
                return Err(bad(pos, kind, "expected `pattern + property`"));
            };
            if plus != "+" || a.len() != 2 {
                return Err(bad(pos, kind, "expected `pattern + property`"));
            }
            let Some((name, arity)) = a[0].functor() else {
                return Err(bad(pos, kind, "trusted pattern must be a predicate"));
            };
            let mut props = Vec::new();
            let mut items = Vec::new();
            flatten_conj(&a[1], &mut items);
            for p in items {
                match p.functor() {
                    Some(("not_fails", 0)) => props.push(TrustProp::NotFails),
                    Some(("is_det", 0)) => props.push(TrustProp::IsDet),
                    _ => return Err(bad(pos, kind, format!("unknown property {p}"))),
                }
            }
            prog.trusts.push(TrustDecl {
                pred: PredId::new(name, arity),
                props,
                pos,
            });
        }
        other => {
            return Err(FrontendError::UnknownDirective {
                pos,
                name: other.to_string(),
            })
        }
    }
    Ok(())
}

/// Rewrite a clause so that head arguments are distinct variables. Head
/// arguments that are not fresh variables become leading `=` literals.
pub fn normalize_clause(c: &Clause) -> Clause {
    let Term::Compound(name, args) = &c.head else {
        return c.clone();
    };
    let used: HashSet<String> = c.vars().into_iter().collect();
    let mut seen: HashSet<String> = HashSet::new();
    let mut new_args = Vec::with_capacity(args.len());
    let mut bindings = Vec::new();
    let mut fresh_idx = 0;
    for a in args {
        match a {
            Term::Var(v) if !seen.contains(v) => {
                seen.insert(v.clone());
                new_args.push(a.clone());
            }
            _ => {
                let fresh = loop {
                    fresh_idx += 1;
                    let cand = format!("H{fresh_idx}");
                    if !used.contains(&cand) && !seen.contains(&cand) {
                        break cand;
                    }
                };
                seen.insert(fresh.clone());
                new_args.push(Term::Var(fresh.clone()));
                bindings.push(Literal::Unify(Term::Var(fresh), a.clone()));
            }
        }
    }
    let head_bindings = c.head_bindings + bindings.len();
    let mut body = bindings;
    body.extend(c.body.iter().cloned());
    Clause {
        head: Term::Compound(name.clone(), new_args),
        body,
        head_bindings,
        pos: c.pos,
    }
}

/// The program with every clause normalized.
pub fn normalize_program(p: &Program) -> Program {
    let mut out = p.clone();
    for cs in out.clauses.values_mut() {
        for c in cs.iter_mut() {
            *c = normalize_clause(c);
        }
    }
    out
}

/// Structural equality up to consistent variable renaming.
pub fn alpha_equivalent(a: &Clause, b: &Clause) -> bool {
    fn canon(c: &Clause) -> (Term, Vec<Literal>) {
        let vars = c.vars();
        let map = |v: &str| {
            format!(
                "V{}",
                vars.iter().position(|x| x == v).unwrap_or(usize::MAX)
            )
        };
        (
            c.head.rename(&map),
            c.body.iter().map(|l| l.rename(&map)).collect(),
        )
    }
    canon(a) == canon(b) && a.head_bindings == b.head_bindings
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_fact() {
        let p = parse_program("append([],S,S).").unwrap();
        assert_eq!(p.num_clauses(), 1);
        assert!(p.is_defined(&PredId::new("append", 3)));
    }

    #[test]
    fn append_two_clauses() {
        let p = parse_program("append([],S,S).\nappend([E|R], S, [E|T]) :- append(R, S, T).\n")
            .unwrap();
        assert_eq!(p.clauses_of(&PredId::new("append", 3)).len(), 2);
    }

    #[test]
    fn dangling_operator() {
        let e = parse_program("p(X) :- X is 1+.").unwrap_err();
        assert!(matches!(e, FrontendError::Syntax { .. }), "{e}");
    }

    #[test]
    fn rejects_cut_and_disjunction() {
        assert!(matches!(
            parse_program("p :- !."),
            Err(FrontendError::Unsupported { .. })
        ));
        assert!(matches!(
            parse_program("p :- q ; r."),
            Err(FrontendError::Unsupported { .. })
        ));
        assert!(matches!(
            parse_program("p :- \\+ q."),
            Err(FrontendError::Unsupported { .. })
        ));
        assert!(matches!(
            parse_program("p(X) :- X is 4 / 2."),
            Err(FrontendError::Unsupported { .. })
        ));
    }

    #[test]
    fn unknown_and_duplicate_declarations() {
        assert!(matches!(
            parse_program(":- module foo."),
            Err(FrontendError::UnknownDirective { .. })
        ));
        let src = "p(X).\n:- entry p(num).\n:- entry p(num).\n";
        assert!(matches!(
            parse_program(src),
            Err(FrontendError::DuplicateEntry { .. })
        ));
        assert!(matches!(
            parse_program(":- entry q(num)."),
            Err(FrontendError::UndefinedEntry { .. })
        ));
    }

    #[test]
    fn declarations_are_separated() {
        let src = r#"
            :- regtype listnum := [] | [num|listnum].
            :- entry app(X: listnum, Y: listnum, Z: out).
            :- pred app(in(list(T)), in(list(T)), out(list(T))).
            :- resource steps(headcost=1, litcost=0, agg_ub=sum, agg_lb=min, default=(0,0)).
            :- trust app(_,_,_) + (not_fails, is_det).
            app([],S,S).
        "#;
        let p = parse_program(src).unwrap();
        assert_eq!(p.regtypes[0].alternatives.len(), 2);
        assert_eq!(p.entries[0].args[0].name.as_deref(), Some("X"));
        assert_eq!(p.entries[0].args[2].mode, Mode::Out);
        assert_eq!(p.sigs.len(), 1);
        assert_eq!(p.resources[0].headcost, 1);
        assert_eq!(
            p.trusts[0].props,
            vec![TrustProp::NotFails, TrustProp::IsDet]
        );
        assert_eq!(p.num_clauses(), 1);
    }

    #[test]
    fn normalize_append_base() {
        let p = parse_program("append([],S,S).").unwrap();
        let c = normalize_clause(&p.clauses_of(&PredId::new("append", 3))[0]);
        assert_eq!(c.to_string(), "append(H1,S,H2) :- H1=[], H2=S.");
        assert_eq!(c.head_bindings, 2);
    }

    #[test]
    fn normalize_fact_base() {
        let p = parse_program("fact(0,1).").unwrap();
        let c = normalize_clause(&p.clauses_of(&PredId::new("fact", 2))[0]);
        assert_eq!(c.to_string(), "fact(H1,H2) :- H1=0, H2=1.");
    }

    #[test]
    fn normalize_is_idempotent_on_normal_clause() {
        let p = parse_program("p(A,B) :- q(A,B).").unwrap();
        let c = &p.clauses_of(&PredId::new("p", 2))[0];
        assert_eq!(&normalize_clause(c), c);
    }

    #[test]
    fn print_parse_round_trip() {
        let src = "p([X,Y|T],f(Z),-3) :- X is Y*2-1, X =< Z, q(T,[a,'B c']).\n";
        let p = parse_program(src).unwrap();
        let printed = p.clauses_source();
        let q = parse_program(&printed).unwrap();
        let (a, b) = (
            &p.clauses_of(&PredId::new("p", 3))[0],
            &q.clauses_of(&PredId::new("p", 3))[0],
        );
        assert_eq!(a.head, b.head);
        assert_eq!(a.body, b.body);
    }
}
