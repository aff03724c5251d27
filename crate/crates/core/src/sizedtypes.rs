//! Sized type schemas: regular types annotated with lower/upper bound
//! expressions, the `≶` relation between schemas, structural descent on
//! head patterns, and concrete measurement of ground terms.

use std::collections::BTreeMap;
use std::fmt;

use crate::frontend::ast::{Term, CONS, NIL};
use crate::recurrence::poly::simplify;
use crate::recurrence::{BVar, SymExpr, Value};
use crate::regtypes::{TypeError, TypeGrammar, TypeTerm};

/// Argument position `⟨f, n⟩` of a subterm (1-based).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Position {
    pub functor: String,
    pub arg: usize,
}

impl Position {
    pub fn new(functor: &str, arg: usize) -> Position {
        Position {
            functor: functor.to_string(),
            arg,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Schema {
    Num {
        lo: SymExpr,
        hi: SymExpr,
    },
    Rec {
        ty: TypeTerm,
        lo: SymExpr,
        hi: SymExpr,
        children: Vec<(Position, Schema)>,
    },
    Node {
        ty: TypeTerm,
        children: Vec<(Position, Schema)>,
    },
}

impl Schema {
    pub fn ty(&self) -> TypeTerm {
        match self {
            Schema::Num { .. } => TypeTerm::Num,
            Schema::Rec { ty, .. } | Schema::Node { ty, .. } => ty.clone(),
        }
    }

    pub fn children(&self) -> &[(Position, Schema)] {
        match self {
            Schema::Num { .. } => &[],
            Schema::Rec { children, .. } | Schema::Node { children, .. } => children,
        }
    }

    /// Bound slots in pre-order.
    pub fn slots(&self) -> Vec<(SymExpr, SymExpr)> {
        let mut out = Vec::new();
        self.collect_slots(&mut out);
        out
    }

    fn collect_slots(&self, out: &mut Vec<(SymExpr, SymExpr)>) {
        match self {
            Schema::Num { lo, hi } => out.push((lo.clone(), hi.clone())),
            Schema::Rec {
                lo, hi, children, ..
            } => {
                out.push((lo.clone(), hi.clone()));
                children.iter().for_each(|(_, c)| c.collect_slots(out));
            }
            Schema::Node { children, .. } => {
                children.iter().for_each(|(_, c)| c.collect_slots(out))
            }
        }
    }

    pub fn num_slots(&self) -> usize {
        match self {
            Schema::Num { .. } => 1,
            Schema::Rec { children, .. } => {
                1 + children.iter().map(|(_, c)| c.num_slots()).sum::<usize>()
            }
            Schema::Node { children, .. } => children.iter().map(|(_, c)| c.num_slots()).sum(),
        }
    }

    /// Same shape with slots replaced in pre-order.
    pub fn with_slots(&self, slots: &[(SymExpr, SymExpr)]) -> Schema {
        let mut it = slots.iter().cloned();
        self.rebuild(&mut it)
    }

    fn rebuild(&self, it: &mut dyn Iterator<Item = (SymExpr, SymExpr)>) -> Schema {
        match self {
            Schema::Num { .. } => {
                let (lo, hi) = it.next().unwrap_or((SymExpr::Nob, SymExpr::Nob));
                Schema::Num { lo, hi }
            }
            Schema::Rec { ty, children, .. } => {
                let (lo, hi) = it.next().unwrap_or((SymExpr::Nob, SymExpr::Nob));
                let children = children
                    .iter()
                    .map(|(p, c)| (p.clone(), c.rebuild(it)))
                    .collect();
                Schema::Rec {
                    ty: ty.clone(),
                    lo,
                    hi,
                    children,
                }
            }
            Schema::Node { ty, children } => {
                let children = children
                    .iter()
                    .map(|(p, c)| (p.clone(), c.rebuild(it)))
                    .collect();
                Schema::Node {
                    ty: ty.clone(),
                    children,
                }
            }
        }
    }

    pub fn map_bounds(&self, f: &mut dyn FnMut(&SymExpr) -> SymExpr) -> Schema {
        let slots: Vec<(SymExpr, SymExpr)> =
            self.slots().iter().map(|(l, h)| (f(l), f(h))).collect();
        self.with_slots(&slots)
    }

    pub fn simplified(&self) -> Schema {
        self.map_bounds(&mut simplify)
    }

    /// Every slot set to the no-bound marker (elements of an empty list).
    pub fn nob(&self) -> Schema {
        self.map_bounds(&mut |_| SymExpr::Nob)
    }

    pub fn vars(&self) -> Vec<BVar> {
        let mut out = Vec::new();
        for (l, h) in self.slots() {
            l.collect_vars(&mut out);
            h.collect_vars(&mut out);
        }
        out
    }

    pub fn same_shape(&self, other: &Schema) -> bool {
        match (self, other) {
            (Schema::Num { .. }, Schema::Num { .. }) => true,
            (
                Schema::Rec {
                    ty: a, children: x, ..
                },
                Schema::Rec {
                    ty: b, children: y, ..
                },
            )
            | (Schema::Node { ty: a, children: x }, Schema::Node { ty: b, children: y }) => {
                a == b
                    && x.len() == y.len()
                    && x.iter()
                        .zip(y)
                        .all(|((p, c), (q, d))| p == q && c.same_shape(d))
            }
            _ => false,
        }
    }

    fn label(&self) -> String {
        self.ty().label()
    }
}

fn fmt_bounds(f: &mut fmt::Formatter<'_>, lo: &SymExpr, hi: &SymExpr) -> fmt::Result {
    if *lo == SymExpr::Nob && *hi == SymExpr::Nob {
        write!(f, "^nob")
    } else {
        write!(f, "^({lo},{hi})")
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kids = |f: &mut fmt::Formatter<'_>, children: &[(Position, Schema)]| -> fmt::Result {
            if children.is_empty() {
                return Ok(());
            }
            write!(f, "(")?;
            for (i, (_, c)) in children.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{c}")?;
            }
            write!(f, ")")
        };
        match self {
            Schema::Num { lo, hi } => {
                write!(f, "n")?;
                fmt_bounds(f, lo, hi)
            }
            Schema::Rec {
                lo, hi, children, ..
            } => {
                write!(f, "{}", self.label())?;
                fmt_bounds(f, lo, hi)?;
                kids(f, children)
            }
            Schema::Node { children, .. } => {
                write!(f, "{}", self.label())?;
                kids(f, children)
            }
        }
    }
}

/// Direction of a size constraint: `≥` on lower slots, `≤` on upper slots.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dir {
    Ge,
    Le,
}

impl Dir {
    pub fn symbol(self) -> &'static str {
        match self {
            Dir::Ge => "≥",
            Dir::Le => "≤",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SizeConstraint {
    pub lhs: SymExpr,
    pub dir: Dir,
    pub rhs: SymExpr,
}

impl fmt::Display for SizeConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.dir.symbol(), self.rhs)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SizeError {
    #[error("schema shapes differ: {0} vs {1}")]
    ShapeMismatch(String, String),
    #[error("pattern {pattern} does not match type {ty}")]
    PatternMismatch { pattern: String, ty: String },
    #[error("term {term} is not a member of {ty}")]
    NotMember { term: String, ty: String },
    #[error(transparent)]
    Type(#[from] TypeError),
}

/// Pointwise expansion of `a ≶ b`.
pub fn relate(a: &Schema, b: &Schema) -> Result<Vec<SizeConstraint>, SizeError> {
    if !a.same_shape(b) {
        return Err(SizeError::ShapeMismatch(a.to_string(), b.to_string()));
    }
    let mut out = Vec::new();
    for ((al, ah), (bl, bh)) in a.slots().into_iter().zip(b.slots()) {
        out.push(SizeConstraint {
            lhs: al,
            dir: Dir::Ge,
            rhs: bl,
        });
        out.push(SizeConstraint {
            lhs: ah,
            dir: Dir::Le,
            rhs: bh,
        });
    }
    Ok(out)
}

/// Interval constraint `lo ≤ v ≤ hi` on one bound variable.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DomainConstraint {
    pub var: BVar,
    pub lo: i64,
    pub hi: Option<i64>,
}

impl DomainConstraint {
    pub fn holds(&self, v: i64) -> bool {
        v >= self.lo && self.hi.is_none_or(|h| v <= h)
    }
}

impl fmt::Display for DomainConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.hi {
            Some(h) if h == self.lo => write!(f, "{} = {}", self.var, h),
            Some(h) if self.lo <= 0 => write!(f, "{} ≤ {}", self.var, h),
            Some(h) => write!(f, "{} ≤ {} ≤ {}", self.lo, self.var, h),
            None if self.lo == 1 => write!(f, "{} > 0", self.var),
            None => write!(f, "{} ≥ {}", self.var, self.lo),
        }
    }
}

/// Turn `e ≥ k` (or `e = k` when `eq`) into a constraint on a variable,
/// for `e` of the form `v + c`.
fn bound_constraint(e: &SymExpr, k: i64, eq: bool) -> Option<DomainConstraint> {
    let e = simplify(e);
    let (v, c) = match &e {
        SymExpr::Var(v) => (v.clone(), 0i64),
        SymExpr::Add(xs) if xs.len() == 2 => match (&xs[0], &xs[1]) {
            (SymExpr::Var(v), SymExpr::Const(c)) if c.is_integer() => {
                (v.clone(), c.to_integer() as i64)
            }
            _ => return None,
        },
        _ => return None,
    };
    let k = k - c;
    Some(DomainConstraint {
        var: v,
        lo: k,
        hi: if eq { Some(k) } else { None },
    })
}

/// Result of matching a head pattern against a schema.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PatternInfo {
    pub domain: Vec<DomainConstraint>,
    /// Schemas for the pattern's variables.
    pub bindings: BTreeMap<String, Schema>,
    /// False when the pattern tests more than the top constructor (nested
    /// constants, repeated variables), so the domain constraints alone do
    /// not decide the match.
    pub exact: bool,
}

fn recursive_positions(g: &TypeGrammar, ty: &TypeTerm, alt: &TypeTerm) -> Vec<usize> {
    match alt {
        TypeTerm::Fun(_, args) => args
            .iter()
            .enumerate()
            .filter(|(_, a)| g.canonical(a) == *ty || *a == ty)
            .map(|(i, _)| i)
            .collect(),
        _ => vec![],
    }
}

/// Domain constraints and sub-schemas implied by a head pattern.
pub fn head_pattern_constraints(
    pattern: &Term,
    schema: &Schema,
    g: &TypeGrammar,
) -> Result<PatternInfo, SizeError> {
    let mut info = PatternInfo {
        exact: true,
        ..Default::default()
    };
    descend(pattern, schema, g, &mut info, true)?;
    Ok(info)
}

fn mismatch(pattern: &Term, schema: &Schema) -> SizeError {
    SizeError::PatternMismatch {
        pattern: pattern.to_string(),
        ty: schema.ty().to_string(),
    }
}

fn descend(
    pattern: &Term,
    schema: &Schema,
    g: &TypeGrammar,
    info: &mut PatternInfo,
    top: bool,
) -> Result<(), SizeError> {
    if !top && !pattern.is_var() {
        info.exact = false;
    }
    match (pattern, schema) {
        (Term::Var(v), _) => {
            if let Some(prev) = info.bindings.get(v) {
                if prev != schema {
                    info.exact = false;
                }
            } else {
                info.bindings.insert(v.clone(), schema.clone());
            }
            Ok(())
        }
        (Term::Int(k), Schema::Num { lo, hi }) => {
            for e in [lo, hi] {
                if let Some(c) = bound_constraint(e, *k, true) {
                    info.domain.push(c);
                }
            }
            Ok(())
        }
        (
            Term::Compound(f, args),
            Schema::Rec {
                ty,
                lo,
                hi,
                children,
            },
        ) => {
            let alts = g.alternatives(ty)?;
            let alt = alts
                .iter()
                .find(|a| matches!(a, TypeTerm::Fun(h, xs) if h == f && xs.len() == args.len()))
                .ok_or_else(|| mismatch(pattern, schema))?;
            let rec = recursive_positions(g, ty, alt);
            if rec.is_empty() {
                for e in [lo, hi] {
                    if let Some(c) = bound_constraint(e, 0, true) {
                        info.domain.push(c);
                    }
                }
                return Ok(());
            }
            for e in [lo, hi] {
                if let Some(c) = bound_constraint(e, 1, false) {
                    info.domain.push(c);
                }
            }
            let (sub_lo, sub_hi) = if rec.len() == 1 {
                (
                    SymExpr::sub(lo.clone(), SymExpr::one()),
                    SymExpr::sub(hi.clone(), SymExpr::one()),
                )
            } else {
                (SymExpr::zero(), SymExpr::sub(hi.clone(), SymExpr::one()))
            };
            let sub = Schema::Rec {
                ty: ty.clone(),
                lo: simplify(&sub_lo),
                hi: simplify(&sub_hi),
                children: children.clone(),
            };
            for (i, a) in args.iter().enumerate() {
                if rec.contains(&i) {
                    descend(a, &sub, g, info, false)?;
                } else {
                    let pos = Position::new(f, i + 1);
                    match children.iter().find(|(p, _)| *p == pos) {
                        Some((_, c)) => descend(a, c, g, info, false)?,
                        None => descend_untyped(a, info),
                    }
                }
            }
            Ok(())
        }
        (Term::Compound(f, args), Schema::Node { ty, children }) => {
            let alts = g.alternatives(ty)?;
            let ok = alts.iter().any(|a| match a {
                TypeTerm::Fun(h, xs) => h == f && xs.len() == args.len(),
                TypeTerm::Var(_) => true,
                _ => false,
            });
            if !ok {
                return Err(mismatch(pattern, schema));
            }
            if alts.len() > 1 {
                info.exact = false;
            }
            for (i, a) in args.iter().enumerate() {
                let pos = Position::new(f, i + 1);
                match children.iter().find(|(p, _)| *p == pos) {
                    Some((_, c)) => descend(a, c, g, info, false)?,
                    None => descend_untyped(a, info),
                }
            }
            Ok(())
        }
        (
            Term::Int(_),
            Schema::Node {
                ty: TypeTerm::Int(_) | TypeTerm::Var(_),
                ..
            },
        ) => Ok(()),
        _ => Err(mismatch(pattern, schema)),
    }
}

fn descend_untyped(t: &Term, info: &mut PatternInfo) {
    if !t.is_var() {
        info.exact = false;
    }
}

/// Measured size of a ground member: one `(lower, upper)` pair per schema
/// slot, in [`Schema::slots`] order.
pub fn size_of_term(
    term: &Term,
    schema: &Schema,
    g: &TypeGrammar,
) -> Result<Vec<(Value, Value)>, SizeError> {
    if !g.membership(term, &schema.ty())? {
        return Err(SizeError::NotMember {
            term: term.to_string(),
            ty: schema.ty().to_string(),
        });
    }
    let mut acc = vec![(Value::Nob, Value::Nob); schema.num_slots()];
    measure(term, schema, g, &mut acc, 0);
    Ok(acc)
}

fn widen_slot(slot: &mut (Value, Value), lo: Value, hi: Value) {
    let pick = |a: Value, b: Value, want_min: bool| match (a, b) {
        (Value::Nob, x) | (x, Value::Nob) => x,
        (x, y) => {
            if x.le(y) == want_min {
                x
            } else {
                y
            }
        }
    };
    slot.0 = pick(slot.0, lo, true);
    slot.1 = pick(slot.1, hi, false);
}

fn measure(term: &Term, schema: &Schema, g: &TypeGrammar, acc: &mut [(Value, Value)], base: usize) {
    match schema {
        Schema::Num { .. } => {
            if let Term::Int(k) = term {
                widen_slot(&mut acc[base], Value::int(*k), Value::int(*k));
            }
        }
        Schema::Rec { ty, children, .. } => {
            let mut count = 0i64;
            let mut stack = vec![term];
            let alts = g.alternatives(ty).unwrap_or_default();
            while let Some(t) = stack.pop() {
                let Term::Compound(f, args) = t else { continue };
                let Some(alt) = alts.iter().find(
                    |a| matches!(a, TypeTerm::Fun(h, xs) if h == f && xs.len() == args.len()),
                ) else {
                    continue;
                };
                let rec = recursive_positions(g, ty, alt);
                if !rec.is_empty() {
                    count += 1;
                }
                for (i, a) in args.iter().enumerate() {
                    if rec.contains(&i) {
                        stack.push(a);
                    } else {
                        let pos = Position::new(f, i + 1);
                        let mut off = base + 1;
                        for (p, c) in children {
                            if *p == pos {
                                measure(a, c, g, acc, off);
                            }
                            off += c.num_slots();
                        }
                    }
                }
            }
            widen_slot(&mut acc[base], Value::int(count), Value::int(count));
        }
        Schema::Node { children, .. } => {
            if let Term::Compound(f, args) = term {
                let mut off = base;
                for (p, c) in children {
                    if p.functor == *f && p.arg <= args.len() {
                        measure(&args[p.arg - 1], c, g, acc, off);
                    }
                    off += c.num_slots();
                }
            }
        }
    }
}

/// Classification of a clause variable in a sized element.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarClass {
    Output,
    Relevant,
    Irrelevant,
    Clausal,
}

impl VarClass {
    pub fn abbrev(self) -> &'static str {
        match self {
            VarClass::Output => "out",
            VarClass::Relevant => "rel",
            VarClass::Irrelevant => "irr",
            VarClass::Clausal => "cl",
        }
    }
}

/// The sized-types triple `⟨t, d, r⟩`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SizedElement {
    pub t: BTreeMap<String, (Schema, VarClass)>,
    pub d: Vec<DomainConstraint>,
    pub r: Vec<SizeConstraint>,
}

impl SizedElement {
    /// Every bound variable in `d` and `r` occurs in some schema of `t`,
    /// apart from those accepted by `extra`.
    pub fn well_scoped(&self, extra: &dyn Fn(&BVar) -> bool) -> bool {
        let mut scope = Vec::new();
        for (s, _) in self.t.values() {
            scope.extend(s.vars());
        }
        let ok = |v: &BVar| scope.contains(v) || extra(v);
        self.d.iter().all(|c| ok(&c.var))
            && self
                .r
                .iter()
                .all(|c| c.lhs.vars().iter().chain(c.rhs.vars().iter()).all(ok))
    }
}

/// Classify clause variables: head outputs, inputs used in the body
/// (relevant), inputs never used (irrelevant), body-only (clausal).
pub fn classify(
    head_inputs: &[String],
    head_outputs: &[String],
    body_vars: &[String],
    var: &str,
) -> VarClass {
    if head_outputs.iter().any(|v| v == var) {
        VarClass::Output
    } else if head_inputs.iter().any(|v| v == var) {
        if body_vars.iter().any(|v| v == var) {
            VarClass::Relevant
        } else {
            VarClass::Irrelevant
        }
    } else {
        VarClass::Clausal
    }
}

/// Schema of the empty list `[]` of the given list type.
pub fn nil_schema(list_ty: &TypeTerm, elem: &Schema) -> Schema {
    Schema::Rec {
        ty: list_ty.clone(),
        lo: SymExpr::zero(),
        hi: SymExpr::zero(),
        children: vec![(Position::new(CONS, 1), elem.nob())],
    }
}

/// Schema of `[H|T]` built from the schemas of `H` and `T`.
pub fn cons_schema(head: &Schema, tail: &Schema) -> Option<Schema> {
    let Schema::Rec {
        ty,
        lo,
        hi,
        children,
    } = tail
    else {
        return None;
    };
    let (pos, elem) = children.first()?;
    if !head.same_shape(elem) {
        return None;
    }
    let merged: Vec<(SymExpr, SymExpr)> = head
        .slots()
        .into_iter()
        .zip(elem.slots())
        .map(|((hl, hh), (el, eh))| {
            (
                simplify(&SymExpr::min2(hl, el)),
                simplify(&SymExpr::max2(hh, eh)),
            )
        })
        .collect();
    Some(Schema::Rec {
        ty: ty.clone(),
        lo: simplify(&SymExpr::add(lo.clone(), SymExpr::one())),
        hi: simplify(&SymExpr::add(hi.clone(), SymExpr::one())),
        children: vec![(pos.clone(), elem.with_slots(&merged))],
    })
}

pub fn is_nil(t: &Term) -> bool {
    matches!(t, Term::Compound(f, a) if f == NIL && a.is_empty())
}
