use std::collections::BTreeMap;
use std::fmt;

/// Source position, 1-based.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// A first-order term. Atoms are zero-arity compounds; lists use `'[]'/0`
/// and `'.'/2`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(String),
    Int(i64),
    Compound(String, Vec<Term>),
}

pub const NIL: &str = "[]";
pub const CONS: &str = ".";

impl Term {
    pub fn atom(name: &str) -> Term {
        Term::Compound(name.to_string(), Vec::new())
    }

    pub fn var(name: &str) -> Term {
        Term::Var(name.to_string())
    }

    pub fn nil() -> Term {
        Term::atom(NIL)
    }

    pub fn cons(head: Term, tail: Term) -> Term {
        Term::Compound(CONS.to_string(), vec![head, tail])
    }

    pub fn list(items: Vec<Term>, tail: Term) -> Term {
        items
            .into_iter()
            .rev()
            .fold(tail, |acc, t| Term::cons(t, acc))
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn is_nil(&self) -> bool {
        matches!(self, Term::Compound(f, a) if f == NIL && a.is_empty())
    }

    pub fn as_cons(&self) -> Option<(&Term, &Term)> {
        match self {
            Term::Compound(f, a) if f == CONS && a.len() == 2 => Some((&a[0], &a[1])),
            _ => None,
        }
    }

    pub fn functor(&self) -> Option<(&str, usize)> {
        match self {
            Term::Compound(f, a) => Some((f.as_str(), a.len())),
            _ => None,
        }
    }

    pub fn args(&self) -> &[Term] {
        match self {
            Term::Compound(_, a) => a,
            _ => &[],
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Int(_) => true,
            Term::Compound(_, a) => a.iter().all(Term::is_ground),
        }
    }

    /// Variables in left-to-right first-occurrence order.
    pub fn vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Term::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone())
                }
            }
            Term::Int(_) => {}
            Term::Compound(_, a) => a.iter().for_each(|t| t.collect_vars(out)),
        }
    }

    pub fn rename(&self, map: &dyn Fn(&str) -> String) -> Term {
        match self {
            Term::Var(v) => Term::Var(map(v)),
            Term::Int(n) => Term::Int(*n),
            Term::Compound(f, a) => {
                Term::Compound(f.clone(), a.iter().map(|t| t.rename(map)).collect())
            }
        }
    }
}

fn is_plain_atom(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() => chars.all(|c| c.is_ascii_alphanumeric() || c == '_'),
        _ => name == NIL,
    }
}

fn write_atom(f: &mut fmt::Formatter<'_>, name: &str) -> fmt::Result {
    if is_plain_atom(name) {
        write!(f, "{name}")
    } else {
        write!(f, "'{}'", name.replace('\'', "\\'"))
    }
}

fn infix_priority(name: &str) -> Option<u32> {
    match name {
        "=" | "is" | "<" | "=<" | ">" | ">=" | "=:=" | "=\\=" => Some(700),
        "+" | "-" => Some(500),
        "*" => Some(400),
        ":" => Some(200),
        _ => None,
    }
}

impl Term {
    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, max: u32) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Int(n) if *n < 0 => write!(f, "({n})"),
            Term::Int(n) => write!(f, "{n}"),
            Term::Compound(name, args) if name == CONS && args.len() == 2 => {
                write!(f, "[")?;
                args[0].fmt_prec(f, 999)?;
                let mut tail = &args[1];
                loop {
                    if let Some((h, t)) = tail.as_cons() {
                        write!(f, ",")?;
                        h.fmt_prec(f, 999)?;
                        tail = t;
                    } else if tail.is_nil() {
                        break;
                    } else {
                        write!(f, "|")?;
                        tail.fmt_prec(f, 999)?;
                        break;
                    }
                }
                write!(f, "]")
            }
            Term::Compound(name, args) if args.len() == 2 && infix_priority(name).is_some() => {
                let p = infix_priority(name).unwrap_or(0);
                // yfx for arithmetic, xfy for ':', xfx for comparisons
                let (lp, rp) = match name.as_str() {
                    "+" | "-" | "*" => (p, p - 1),
                    ":" => (p - 1, p),
                    _ => (p - 1, p - 1),
                };
                if p > max {
                    write!(f, "(")?;
                }
                args[0].fmt_prec(f, lp)?;
                if name.chars().all(|c| c.is_ascii_alphabetic()) {
                    write!(f, " {name} ")?;
                } else {
                    write!(f, "{name}")?;
                }
                args[1].fmt_prec(f, rp)?;
                if p > max {
                    write!(f, ")")?;
                }
                Ok(())
            }
            Term::Compound(name, args) => {
                write_atom(f, name)?;
                if !args.is_empty() {
                    write!(f, "(")?;
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            write!(f, ",")?;
                        }
                        a.fmt_prec(f, 999)?;
                    }
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 1200)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn from_name(name: &str) -> Option<CmpOp> {
        Some(match name {
            "<" => CmpOp::Lt,
            "=<" => CmpOp::Le,
            ">" => CmpOp::Gt,
            ">=" => CmpOp::Ge,
            "=:=" => CmpOp::Eq,
            "=\\=" => CmpOp::Ne,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "=<",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "=:=",
            CmpOp::Ne => "=\\=",
        }
    }

    pub fn holds(self, a: i64, b: i64) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
        }
    }

    /// Bitmask over the outcomes {less, equal, greater} in which the test succeeds.
    pub fn outcomes(self) -> u8 {
        const LT: u8 = 1;
        const EQ: u8 = 2;
        const GT: u8 = 4;
        match self {
            CmpOp::Lt => LT,
            CmpOp::Le => LT | EQ,
            CmpOp::Gt => GT,
            CmpOp::Ge => GT | EQ,
            CmpOp::Eq => EQ,
            CmpOp::Ne => LT | GT,
        }
    }

    /// The same relation with operands swapped.
    pub fn flip(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
            other => other,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Literal {
    Call(Term),
    Unify(Term, Term),
    Is(Term, Term),
    Compare(CmpOp, Term, Term),
}

impl Literal {
    pub fn is_builtin(&self) -> bool {
        !matches!(self, Literal::Call(_))
    }

    pub fn as_term(&self) -> Term {
        match self {
            Literal::Call(t) => t.clone(),
            Literal::Unify(a, b) => Term::Compound("=".into(), vec![a.clone(), b.clone()]),
            Literal::Is(a, b) => Term::Compound("is".into(), vec![a.clone(), b.clone()]),
            Literal::Compare(op, a, b) => {
                Term::Compound(op.name().into(), vec![a.clone(), b.clone()])
            }
        }
    }

    pub fn vars(&self) -> Vec<String> {
        self.as_term().vars()
    }

    pub fn rename(&self, map: &dyn Fn(&str) -> String) -> Literal {
        match self {
            Literal::Call(t) => Literal::Call(t.rename(map)),
            Literal::Unify(a, b) => Literal::Unify(a.rename(map), b.rename(map)),
            Literal::Is(a, b) => Literal::Is(a.rename(map), b.rename(map)),
            Literal::Compare(op, a, b) => Literal::Compare(*op, a.rename(map), b.rename(map)),
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_term())
    }
}

/// Predicate identity `name/arity`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PredId {
    pub name: String,
    pub arity: usize,
}

impl PredId {
    pub fn new(name: &str, arity: usize) -> PredId {
        PredId {
            name: name.to_string(),
            arity,
        }
    }
}

impl fmt::Display for PredId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Clause {
    pub head: Term,
    pub body: Vec<Literal>,
    /// Number of leading body literals that are head unifications moved
    /// into the body by normalization.
    pub head_bindings: usize,
    pub pos: Pos,
}

impl Clause {
    pub fn pred(&self) -> PredId {
        let (name, arity) = self.head.functor().unwrap_or(("", 0));
        PredId::new(name, arity)
    }

    /// Length of the clause-selection prefix: head bindings followed by
    /// arithmetic comparisons. Resources are charged for a clause only once
    /// this prefix has succeeded.
    pub fn selection_prefix(&self) -> usize {
        let mut n = self.head_bindings.min(self.body.len());
        while n < self.body.len() && matches!(self.body[n], Literal::Compare(..)) {
            n += 1;
        }
        n
    }

    pub fn vars(&self) -> Vec<String> {
        let mut out = self.head.vars();
        for l in &self.body {
            l.as_term().collect_vars(&mut out);
        }
        out
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        if !self.body.is_empty() {
            write!(f, " :- ")?;
            for (i, l) in self.body.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{l}")?;
            }
        }
        write!(f, ".")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    In,
    Out,
}

/// One argument of an entry or signature declaration.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ArgDecl {
    pub mode: Mode,
    /// Type term (as written); `None` for an untyped output.
    pub ty: Option<Term>,
    /// Optional argument name used when naming bound variables.
    pub name: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EntryDecl {
    pub pred: PredId,
    pub args: Vec<ArgDecl>,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SigDecl {
    pub pred: PredId,
    pub args: Vec<ArgDecl>,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegtypeDecl {
    pub name: String,
    pub alternatives: Vec<Term>,
    pub pos: Pos,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Aggregation {
    Sum,
    Max,
    Min,
}

impl Aggregation {
    pub fn name(self) -> &'static str {
        match self {
            Aggregation::Sum => "sum",
            Aggregation::Max => "max",
            Aggregation::Min => "min",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResourceDecl {
    pub name: String,
    pub headcost: i64,
    pub litcost: i64,
    pub builtin_cost: i64,
    pub agg_ub: Aggregation,
    pub agg_lb: Aggregation,
    pub default: (i64, Option<i64>),
    pub pos: Pos,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TrustProp {
    NotFails,
    IsDet,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrustDecl {
    pub pred: PredId,
    pub props: Vec<TrustProp>,
    pub pos: Pos,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Program {
    pub clauses: BTreeMap<PredId, Vec<Clause>>,
    /// Predicates in order of first definition.
    pub order: Vec<PredId>,
    pub regtypes: Vec<RegtypeDecl>,
    pub entries: Vec<EntryDecl>,
    pub sigs: Vec<SigDecl>,
    pub resources: Vec<ResourceDecl>,
    pub trusts: Vec<TrustDecl>,
}

impl Program {
    pub fn add_clause(&mut self, clause: Clause) {
        let p = clause.pred();
        if !self.clauses.contains_key(&p) {
            self.order.push(p.clone());
        }
        self.clauses.entry(p).or_default().push(clause);
    }

    pub fn clauses_of(&self, p: &PredId) -> &[Clause] {
        self.clauses.get(p).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_defined(&self, p: &PredId) -> bool {
        self.clauses.contains_key(p)
    }

    pub fn sig_of(&self, p: &PredId) -> Option<&SigDecl> {
        self.sigs.iter().find(|s| &s.pred == p)
    }

    pub fn trusted(&self, p: &PredId, prop: TrustProp) -> bool {
        self.trusts
            .iter()
            .any(|t| &t.pred == p && t.props.contains(&prop))
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.values().map(Vec::len).sum()
    }

    /// Clauses only, in definition order, rendered as source text.
    pub fn clauses_source(&self) -> String {
        let mut s = String::new();
        for p in &self.order {
            for c in self.clauses_of(p) {
                s.push_str(&c.to_string());
                s.push('\n');
            }
        }
        s
    }
}
