//! Regular term grammars (`τ → φ` rules) and the naming of bound variables
//! for sized schemas.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::frontend::ast::{Program, Term, CONS, NIL};
use crate::recurrence::SymExpr;
use crate::sizedtypes::{Position, Schema};

/// A type term: base type, type symbol, list of a type, or a functor over
/// type terms. `Var` is a type parameter in a polymorphic signature.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TypeTerm {
    Num,
    Int(i64),
    Sym(String),
    List(Box<TypeTerm>),
    Fun(String, Vec<TypeTerm>),
    Var(String),
}

impl TypeTerm {
    pub fn list(elem: TypeTerm) -> TypeTerm {
        TypeTerm::List(Box::new(elem))
    }

    pub fn constant(name: &str) -> TypeTerm {
        TypeTerm::Fun(name.to_string(), vec![])
    }

    /// Short label used in schema printing: `n`, `ln`, `lln`, ...
    pub fn label(&self) -> String {
        match self {
            TypeTerm::Num => "n".into(),
            TypeTerm::Int(k) => k.to_string(),
            TypeTerm::Sym(s) => s.clone(),
            TypeTerm::List(e) => format!("l{}", e.label()),
            TypeTerm::Fun(f, _) => f.clone(),
            TypeTerm::Var(v) => v.clone(),
        }
    }

    /// Replace type parameters.
    pub fn instantiate(&self, env: &BTreeMap<String, TypeTerm>) -> TypeTerm {
        match self {
            TypeTerm::Var(v) => env.get(v).cloned().unwrap_or_else(|| self.clone()),
            TypeTerm::List(e) => TypeTerm::list(e.instantiate(env)),
            TypeTerm::Fun(f, a) => {
                TypeTerm::Fun(f.clone(), a.iter().map(|x| x.instantiate(env)).collect())
            }
            other => other.clone(),
        }
    }

    /// Bind type parameters of `self` so that it equals `actual`.
    pub fn match_against(&self, actual: &TypeTerm, env: &mut BTreeMap<String, TypeTerm>) -> bool {
        match (self, actual) {
            (TypeTerm::Var(v), _) => match env.get(v) {
                Some(bound) => bound == actual,
                None => {
                    env.insert(v.clone(), actual.clone());
                    true
                }
            },
            (TypeTerm::List(a), TypeTerm::List(b)) => a.match_against(b, env),
            (TypeTerm::Fun(f, a), TypeTerm::Fun(g, b)) => {
                f == g
                    && a.len() == b.len()
                    && a.iter().zip(b).all(|(x, y)| x.match_against(y, env))
            }
            (a, b) => a == b,
        }
    }

    fn refs(&self, out: &mut BTreeSet<String>) {
        match self {
            TypeTerm::Sym(s) => {
                out.insert(s.clone());
            }
            TypeTerm::List(e) => e.refs(out),
            TypeTerm::Fun(_, a) => a.iter().for_each(|x| x.refs(out)),
            _ => {}
        }
    }
}

impl fmt::Display for TypeTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeTerm::Num => write!(f, "num"),
            TypeTerm::Int(k) => write!(f, "{k}"),
            TypeTerm::Sym(s) => write!(f, "{s}"),
            TypeTerm::Var(v) => write!(f, "{v}"),
            TypeTerm::List(e) => write!(f, "list({e})"),
            TypeTerm::Fun(g, a) if g == CONS && a.len() == 2 => write!(f, "[{}|{}]", a[0], a[1]),
            TypeTerm::Fun(g, a) if a.is_empty() => write!(f, "{g}"),
            TypeTerm::Fun(g, a) => {
                write!(f, "{g}(")?;
                for (i, x) in a.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TypeError {
    #[error("undefined type symbol '{0}'")]
    Undefined(String),
    #[error("term {0} is not ground")]
    NonGround(String),
    #[error("type '{0}' is part of a mutually recursive group ({1}); not supported")]
    MutualRecursion(String, String),
    #[error("malformed type {0}")]
    Malformed(String),
}

/// One problem found by [`TypeGrammar::well_formed`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub rule: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rule '{}': {}", self.rule, self.message)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TypeGrammar {
    pub rules: BTreeMap<String, Vec<TypeTerm>>,
}

const BASE_NAMES: [&str; 2] = ["num", "int"];

impl TypeGrammar {
    pub fn from_program(p: &Program) -> TypeGrammar {
        let names: BTreeSet<String> = p.regtypes.iter().map(|r| r.name.clone()).collect();
        let mut g = TypeGrammar::default();
        for r in &p.regtypes {
            let alts = r
                .alternatives
                .iter()
                .map(|a| alternative_from_term(a, &names))
                .collect();
            g.rules.insert(r.name.clone(), alts);
        }
        g
    }

    pub fn add_rule(&mut self, name: &str, alternatives: Vec<TypeTerm>) {
        self.rules.insert(name.to_string(), alternatives);
    }

    /// Convert a declared argument type (in an entry or signature) to a
    /// type term. Atoms name rules or base types.
    pub fn type_of_decl(&self, t: &Term) -> Result<TypeTerm, TypeError> {
        Ok(match t {
            Term::Var(v) => TypeTerm::Var(v.clone()),
            Term::Int(k) => TypeTerm::Int(*k),
            Term::Compound(f, a) if a.is_empty() && BASE_NAMES.contains(&f.as_str()) => {
                TypeTerm::Num
            }
            Term::Compound(f, a) if a.is_empty() && f == NIL => TypeTerm::constant(NIL),
            Term::Compound(f, a) if a.is_empty() => {
                if !self.rules.contains_key(f) {
                    return Err(TypeError::Undefined(f.clone()));
                }
                self.canonical(&TypeTerm::Sym(f.clone()))
            }
            Term::Compound(f, a) if f == "list" && a.len() == 1 => {
                TypeTerm::list(self.type_of_decl(&a[0])?)
            }
            Term::Compound(f, a) => TypeTerm::Fun(
                f.clone(),
                a.iter()
                    .map(|x| self.type_of_decl(x))
                    .collect::<Result<_, _>>()?,
            ),
        })
    }

    /// Element type when `sym` is a list-shaped rule `[] | [E|sym]`.
    fn list_shape(&self, sym: &str) -> Option<TypeTerm> {
        let alts = self.rules.get(sym)?;
        if alts.len() != 2 {
            return None;
        }
        let mut nil = false;
        let mut elem = None;
        for a in alts {
            match a {
                TypeTerm::Fun(f, x) if f == NIL && x.is_empty() => nil = true,
                TypeTerm::Fun(f, x)
                    if f == CONS && x.len() == 2 && x[1] == TypeTerm::Sym(sym.to_string()) =>
                {
                    elem = Some(x[0].clone())
                }
                _ => {}
            }
        }
        if nil {
            elem
        } else {
            None
        }
    }

    /// Resolve list-shaped symbols to `List(_)` so structurally equal types
    /// compare equal.
    pub fn canonical(&self, t: &TypeTerm) -> TypeTerm {
        self.canonical_in(t, &mut BTreeSet::new())
    }

    fn canonical_in(&self, t: &TypeTerm, seen: &mut BTreeSet<String>) -> TypeTerm {
        match t {
            TypeTerm::Sym(s) if !seen.contains(s) => match self.list_shape(s) {
                Some(e) => {
                    seen.insert(s.clone());
                    let out = TypeTerm::list(self.canonical_in(&e, seen));
                    seen.remove(s);
                    out
                }
                None => t.clone(),
            },
            TypeTerm::List(e) => TypeTerm::list(self.canonical_in(e, seen)),
            TypeTerm::Fun(f, a) => TypeTerm::Fun(
                f.clone(),
                a.iter().map(|x| self.canonical_in(x, seen)).collect(),
            ),
            other => other.clone(),
        }
    }

    pub fn alternatives(&self, t: &TypeTerm) -> Result<Vec<TypeTerm>, TypeError> {
        match t {
            TypeTerm::Sym(s) => self
                .rules
                .get(s)
                .cloned()
                .ok_or_else(|| TypeError::Undefined(s.clone())),
            TypeTerm::List(e) => Ok(vec![
                TypeTerm::constant(NIL),
                TypeTerm::Fun(CONS.into(), vec![(**e).clone(), t.clone()]),
            ]),
            other => Ok(vec![other.clone()]),
        }
    }

    /// True when the symbol appears in one of its own alternatives.
    pub fn is_recursive(&self, sym: &str) -> bool {
        let mut refs = BTreeSet::new();
        if let Some(alts) = self.rules.get(sym) {
            alts.iter().for_each(|a| a.refs(&mut refs));
        }
        refs.contains(sym)
    }

    /// Groups of two or more rule symbols that reference each other.
    pub fn mutual_groups(&self) -> Vec<Vec<String>> {
        let mut g = DiGraph::<String, ()>::new();
        let mut idx = BTreeMap::new();
        for name in self.rules.keys() {
            idx.insert(name.clone(), g.add_node(name.clone()));
        }
        for (name, alts) in &self.rules {
            let mut refs = BTreeSet::new();
            alts.iter().for_each(|a| a.refs(&mut refs));
            for r in refs {
                if let Some(&to) = idx.get(&r) {
                    g.add_edge(idx[name], to, ());
                }
            }
        }
        let mut out: Vec<Vec<String>> = tarjan_scc(&g)
            .into_iter()
            .filter(|c| c.len() > 1)
            .map(|c| {
                let mut names: Vec<String> = c.into_iter().map(|n| g[n].clone()).collect();
                names.sort();
                names
            })
            .collect();
        out.sort();
        out
    }

    fn top_keys(&self, t: &TypeTerm, seen: &mut BTreeSet<String>) -> Vec<String> {
        match t {
            TypeTerm::Num => vec!["num".into()],
            TypeTerm::Int(k) => vec![format!("int {k}")],
            TypeTerm::Var(_) => vec!["any".into()],
            TypeTerm::List(_) => vec![format!("{NIL}/0"), format!("{CONS}/2")],
            TypeTerm::Fun(f, a) => vec![format!("{f}/{}", a.len())],
            TypeTerm::Sym(s) => {
                if !seen.insert(s.clone()) {
                    return vec![];
                }
                match self.rules.get(s) {
                    Some(alts) => alts.iter().flat_map(|a| self.top_keys(a, seen)).collect(),
                    None => vec![],
                }
            }
        }
    }

    /// Check definedness, determinism, productivity and the absence of
    /// mutual recursion. Returns every violation found.
    pub fn well_formed(&self) -> Result<(), Vec<Diagnostic>> {
        let mut diags = Vec::new();
        for (name, alts) in &self.rules {
            let mut refs = BTreeSet::new();
            alts.iter().for_each(|a| a.refs(&mut refs));
            for r in refs {
                if !self.rules.contains_key(&r) {
                    diags.push(Diagnostic {
                        rule: name.clone(),
                        message: format!("undefined type symbol '{r}'"),
                    });
                }
            }
            let mut keys: BTreeMap<String, usize> = BTreeMap::new();
            for a in alts {
                let mut seen = BTreeSet::from([name.clone()]);
                for k in self.top_keys(a, &mut seen) {
                    *keys.entry(k).or_default() += 1;
                }
            }
            for (k, n) in keys {
                if n > 1 || (k == "any" && alts.len() > 1) {
                    diags.push(Diagnostic {
                        rule: name.clone(),
                        message: format!("nondeterministic: several alternatives start with {k}"),
                    });
                }
            }
        }
        let productive = self.productive();
        for name in self.rules.keys() {
            if !productive.contains(name) {
                diags.push(Diagnostic {
                    rule: name.clone(),
                    message: "generates no finite term".into(),
                });
            }
        }
        for group in self.mutual_groups() {
            diags.push(Diagnostic {
                rule: group[0].clone(),
                message: format!(
                    "mutually recursive types are not supported: {}",
                    group.join(", ")
                ),
            });
        }
        if diags.is_empty() {
            Ok(())
        } else {
            Err(diags)
        }
    }

    fn productive(&self) -> BTreeSet<String> {
        let mut prod = BTreeSet::new();
        loop {
            let before = prod.len();
            for (name, alts) in &self.rules {
                if !prod.contains(name) && alts.iter().any(|a| self.term_productive(a, &prod)) {
                    prod.insert(name.clone());
                }
            }
            if prod.len() == before {
                return prod;
            }
        }
    }

    fn term_productive(&self, t: &TypeTerm, prod: &BTreeSet<String>) -> bool {
        match t {
            TypeTerm::Sym(s) => prod.contains(s),
            TypeTerm::List(_) => true,
            TypeTerm::Fun(_, a) => a.iter().all(|x| self.term_productive(x, prod)),
            _ => true,
        }
    }

    /// Is the ground term generated by the type?
    pub fn membership(&self, term: &Term, t: &TypeTerm) -> Result<bool, TypeError> {
        if !term.is_ground() {
            return Err(TypeError::NonGround(term.to_string()));
        }
        Ok(self.member(term, t, 0))
    }

    fn member(&self, term: &Term, t: &TypeTerm, depth: usize) -> bool {
        if depth > 10_000 {
            return false;
        }
        match t {
            TypeTerm::Num => matches!(term, Term::Int(_)),
            TypeTerm::Int(k) => matches!(term, Term::Int(n) if n == k),
            TypeTerm::Var(_) => true,
            TypeTerm::List(e) => {
                let mut cur = term;
                loop {
                    if cur.is_nil() {
                        return true;
                    }
                    match cur.as_cons() {
                        Some((h, tl)) => {
                            if !self.member(h, e, depth + 1) {
                                return false;
                            }
                            cur = tl;
                        }
                        None => return false,
                    }
                }
            }
            TypeTerm::Fun(f, a) => match term {
                Term::Compound(g, b) => {
                    f == g
                        && a.len() == b.len()
                        && a.iter().zip(b).all(|(x, y)| self.member(y, x, depth + 1))
                }
                _ => false,
            },
            TypeTerm::Sym(s) => match self.rules.get(s) {
                Some(alts) => alts.iter().any(|a| self.member(term, a, depth + 1)),
                None => false,
            },
        }
    }
}

fn alternative_from_term(t: &Term, names: &BTreeSet<String>) -> TypeTerm {
    match t {
        Term::Compound(f, a) if a.is_empty() && names.contains(f) => TypeTerm::Sym(f.clone()),
        Term::Compound(f, a) if a.is_empty() && BASE_NAMES.contains(&f.as_str()) => TypeTerm::Num,
        Term::Compound(f, a) if a.is_empty() => TypeTerm::constant(f),
        other => nested_from_term(other, names),
    }
}

fn nested_from_term(t: &Term, names: &BTreeSet<String>) -> TypeTerm {
    match t {
        Term::Var(v) => TypeTerm::Var(v.clone()),
        Term::Int(k) => TypeTerm::Int(*k),
        Term::Compound(f, a) if a.is_empty() && f == NIL => TypeTerm::constant(NIL),
        Term::Compound(f, a) if a.is_empty() && BASE_NAMES.contains(&f.as_str()) => TypeTerm::Num,
        Term::Compound(f, a) if a.is_empty() => TypeTerm::Sym(f.clone()),
        Term::Compound(f, a) if f == "list" && a.len() == 1 && !names.contains("list") => {
            TypeTerm::list(nested_from_term(&a[0], names))
        }
        Term::Compound(f, a) => TypeTerm::Fun(
            f.clone(),
            a.iter().map(|x| nested_from_term(x, names)).collect(),
        ),
    }
}

/// Source of fresh bound-variable names for one argument.
///
/// Lists of numbers use α/β for lengths and γ/δ for values, numbers use μ/ν,
/// nested lists use a_k/b_k by nesting level, everything else l_k/u_k.
#[derive(Clone, Debug)]
pub struct FreshNames {
    subscript: String,
    used: BTreeSet<String>,
    counter: usize,
}

impl FreshNames {
    pub fn new(subscript: &str) -> FreshNames {
        FreshNames {
            subscript: subscript.to_string(),
            used: BTreeSet::new(),
            counter: 0,
        }
    }

    pub fn with_used(subscript: &str, used: BTreeSet<String>) -> FreshNames {
        FreshNames {
            subscript: subscript.to_string(),
            used,
            counter: 0,
        }
    }

    pub fn set_subscript(&mut self, subscript: &str) {
        self.subscript = subscript.to_string();
    }

    pub fn used(&self) -> &BTreeSet<String> {
        &self.used
    }

    /// A fresh `(lower, upper)` pair with the given base names.
    pub fn pair(&mut self, lo: &str, hi: &str) -> (String, String) {
        let mut suffix = String::new();
        loop {
            let a = self.decorate(lo, &suffix);
            let b = self.decorate(hi, &suffix);
            if !self.used.contains(&a) && !self.used.contains(&b) {
                self.used.insert(a.clone());
                self.used.insert(b.clone());
                return (a, b);
            }
            suffix.push('\'');
        }
    }

    /// A generic fresh pair `l_k`/`u_k`.
    pub fn generic(&mut self) -> (String, String) {
        self.counter += 1;
        let k = self.counter;
        self.pair(&format!("l{k}"), &format!("u{k}"))
    }

    fn decorate(&self, base: &str, suffix: &str) -> String {
        if self.subscript.is_empty() {
            format!("{base}{suffix}")
        } else {
            format!("{base}{suffix}_{}", self.subscript)
        }
    }
}

/// Nesting depth of lists of numbers: `num` 0, `list(num)` 1, ...; `None`
/// for anything else.
pub fn list_depth(t: &TypeTerm) -> Option<usize> {
    match t {
        TypeTerm::Num => Some(0),
        TypeTerm::List(e) => list_depth(e).map(|d| d + 1),
        _ => None,
    }
}

/// Base names for the bound pair at nesting `level` (1 = outermost) of a
/// type with list depth `depth`.
pub fn base_names(depth: Option<usize>, level: usize) -> Option<(String, String)> {
    match depth {
        Some(0) => Some(("μ".into(), "ν".into())),
        Some(1) if level == 1 => Some(("α".into(), "β".into())),
        Some(1) => Some(("γ".into(), "δ".into())),
        Some(_) => Some((format!("a{level}"), format!("b{level}"))),
        None => None,
    }
}

/// Sized schema of a type: fresh bound pairs for every recursive node and
/// every `num` leaf; non-recursive nodes carry no bounds.
pub fn sized_schema(
    ty: &TypeTerm,
    g: &TypeGrammar,
    fresh: &mut FreshNames,
) -> Result<Schema, TypeError> {
    let ty = g.canonical(ty);
    let mut refs = BTreeSet::new();
    ty.refs(&mut refs);
    for group in g.mutual_groups() {
        if let Some(s) = group.iter().find(|s| refs.contains(*s)) {
            return Err(TypeError::MutualRecursion(s.clone(), group.join(", ")));
        }
    }
    let depth = list_depth(&ty);
    build_schema(&ty, g, fresh, depth, 1, &mut Vec::new())
}

fn bound_pair(
    fresh: &mut FreshNames,
    depth: Option<usize>,
    level: usize,
    list: bool,
) -> (SymExpr, SymExpr) {
    let (lo, hi) = match base_names(depth, level) {
        Some((a, b)) => fresh.pair(&a, &b),
        None if list && level == 1 => fresh.pair("α", "β"),
        None => fresh.generic(),
    };
    (SymExpr::var(&lo), SymExpr::var(&hi))
}

fn build_schema(
    ty: &TypeTerm,
    g: &TypeGrammar,
    fresh: &mut FreshNames,
    depth: Option<usize>,
    level: usize,
    open: &mut Vec<String>,
) -> Result<Schema, TypeError> {
    Ok(match ty {
        TypeTerm::Num => {
            let (lo, hi) = bound_pair(fresh, depth, level, false);
            Schema::Num { lo, hi }
        }
        TypeTerm::List(e) => {
            let (lo, hi) = bound_pair(fresh, depth, level, true);
            let child = build_schema(e, g, fresh, depth, level + 1, open)?;
            Schema::Rec {
                ty: ty.clone(),
                lo,
                hi,
                children: vec![(Position::new(CONS, 1), child)],
            }
        }
        TypeTerm::Sym(s) => {
            let canon = g.canonical(ty);
            if canon != *ty {
                return build_schema(&canon, g, fresh, depth, level, open);
            }
            let alts = g
                .rules
                .get(s)
                .ok_or_else(|| TypeError::Undefined(s.clone()))?;
            if open.contains(s) {
                return Err(TypeError::Malformed(format!(
                    "{s} is reached through itself at a non-recursive position"
                )));
            }
            open.push(s.clone());
            let recursive = g.is_recursive(s);
            let head = if recursive {
                Some(bound_pair(fresh, None, level, false))
            } else {
                None
            };
            let mut children = Vec::new();
            for alt in alts {
                if let TypeTerm::Fun(f, args) = alt {
                    for (i, a) in args.iter().enumerate() {
                        if recursive && (*a == *ty || g.canonical(a) == *ty) {
                            continue;
                        }
                        children.push((
                            Position::new(f, i + 1),
                            build_schema(&g.canonical(a), g, fresh, None, level + 1, open)?,
                        ));
                    }
                }
            }
            open.pop();
            match head {
                Some((lo, hi)) => Schema::Rec {
                    ty: ty.clone(),
                    lo,
                    hi,
                    children,
                },
                None => Schema::Node {
                    ty: ty.clone(),
                    children,
                },
            }
        }
        TypeTerm::Fun(f, args) => {
            let mut children = Vec::new();
            for (i, a) in args.iter().enumerate() {
                children.push((
                    Position::new(f, i + 1),
                    build_schema(a, g, fresh, None, level + 1, open)?,
                ));
            }
            Schema::Node {
                ty: ty.clone(),
                children,
            }
        }
        TypeTerm::Int(_) | TypeTerm::Var(_) => Schema::Node {
            ty: ty.clone(),
            children: vec![],
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_program;

    fn grammar(src: &str) -> TypeGrammar {
        TypeGrammar::from_program(&parse_program(src).unwrap())
    }

    #[test]
    fn listnum_is_well_formed_and_canonical() {
        let g = grammar(":- regtype listnum := [] | [num|listnum].");
        assert_eq!(g.well_formed(), Ok(()));
        assert_eq!(
            g.canonical(&TypeTerm::Sym("listnum".into())),
            TypeTerm::list(TypeTerm::Num)
        );
    }

    #[test]
    fn no_base_case_is_rejected() {
        let g = grammar(":- regtype t := [num|t].");
        let d = g.well_formed().unwrap_err();
        assert!(
            d.iter().any(|d| d.message.contains("no finite term")),
            "{d:?}"
        );
    }

    #[test]
    fn duplicate_top_functor_is_rejected() {
        let g = grammar(":- regtype t := [] | [num|t] | [t|t].");
        let d = g.well_formed().unwrap_err();
        assert!(
            d.iter().any(|d| d.message.contains("nondeterministic")),
            "{d:?}"
        );
    }

    #[test]
    fn undefined_and_mutual_symbols_are_reported() {
        let g = grammar(
            ":- regtype a := [] | [num|b].\n:- regtype b := [] | [num|a].\n:- regtype c := f(zz).",
        );
        let d = g.well_formed().unwrap_err();
        assert!(d
            .iter()
            .any(|d| d.message.contains("undefined type symbol 'zz'")));
        assert!(d.iter().any(|d| d.message.contains("mutually recursive")));
    }

    #[test]
    fn membership_examples() {
        let g = grammar(":- regtype listnum := [] | [num|listnum].");
        let ln = TypeTerm::Sym("listnum".into());
        let parse = |s: &str| crate::frontend::parser::parse_term(s).unwrap();
        assert_eq!(g.membership(&parse("[1,2]"), &ln), Ok(true));
        assert_eq!(g.membership(&parse("[a]"), &ln), Ok(false));
        assert_eq!(g.membership(&parse("[]"), &ln), Ok(true));
        assert!(g.membership(&parse("[X]"), &ln).is_err());
    }

    #[test]
    fn declared_list_types_expand() {
        let g = grammar(":- regtype listnum := [] | [num|listnum].");
        let t = g
            .type_of_decl(&crate::frontend::parser::parse_term("list(listnum)").unwrap())
            .unwrap();
        assert_eq!(t, TypeTerm::list(TypeTerm::list(TypeTerm::Num)));
        assert_eq!(t.label(), "lln");
        assert!(g.type_of_decl(&Term::atom("nosuch")).is_err());
    }

    #[test]
    fn fresh_names_avoid_collisions() {
        let mut f = FreshNames::new("X");
        assert_eq!(f.pair("α", "β"), ("α_X".to_string(), "β_X".to_string()));
        assert_eq!(f.pair("α", "β"), ("α'_X".to_string(), "β'_X".to_string()));
    }

    #[test]
    fn schemas_follow_naming_conventions() {
        let g = grammar(":- regtype listnum := [] | [num|listnum].");
        let ln = sized_schema(
            &TypeTerm::Sym("listnum".into()),
            &g,
            &mut FreshNames::new(""),
        )
        .unwrap();
        assert_eq!(ln.to_string(), "ln^(α,β)(n^(γ,δ))");
        let n = sized_schema(&TypeTerm::Num, &g, &mut FreshNames::new("")).unwrap();
        assert_eq!(n.to_string(), "n^(μ,ν)");
        let llln = TypeTerm::list(TypeTerm::list(TypeTerm::list(TypeTerm::Num)));
        let s = sized_schema(&llln, &g, &mut FreshNames::new("")).unwrap();
        assert_eq!(
            s.to_string(),
            "llln^(a1,b1)(lln^(a2,b2)(ln^(a3,b3)(n^(a4,b4))))"
        );
        let vars = s.vars();
        assert_eq!(vars.len(), 8);
    }

    #[test]
    fn schema_of_undefined_or_mutual_symbol_fails() {
        let g = grammar(":- regtype a := [] | [num|b].\n:- regtype b := [] | [num|a].");
        assert!(sized_schema(&TypeTerm::Sym("zz".into()), &g, &mut FreshNames::new("")).is_err());
        assert!(matches!(
            sized_schema(&TypeTerm::Sym("a".into()), &g, &mut FreshNames::new("")),
            Err(TypeError::MutualRecursion(..))
        ));
    }

    #[test]
    fn recursive_user_types_get_bounds() {
        let g = grammar(":- regtype tree := void | t(tree, num, tree).");
        assert_eq!(g.well_formed(), Ok(()));
        let s = sized_schema(&TypeTerm::Sym("tree".into()), &g, &mut FreshNames::new("")).unwrap();
        assert_eq!(s.to_string(), "tree^(l1,u1)(n^(l2,u2))");
    }
}
