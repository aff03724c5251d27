use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rat = Ratio<i128>;

/// A bound variable (α, β, s_L, n_{U,2,1}, ...).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BVar(pub Arc<str>);

impl BVar {
    pub fn new(name: &str) -> BVar {
        BVar(Arc::from(name))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for BVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Exact linear recurrence `f(n) = a1 f(n-1) + ... + ak f(n-k) + c`,
/// valid for `n >= start + k`, with `init[i] = f(start + i)`. Evaluated by
/// iteration so that values stay exact integers.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinRec {
    pub coeffs: Vec<Rat>,
    pub constant: SymExpr,
    pub init: Vec<SymExpr>,
    pub start: i64,
    pub index: SymExpr,
}

impl LinRec {
    /// Dominant root label for display (φ for the Fibonacci polynomial).
    pub fn root_label(&self) -> String {
        let c: Vec<i128> = self.coeffs.iter().map(|r| r.to_integer()).collect();
        match c.as_slice() {
            [1, 1] => "φ".to_string(),
            [a] => a.to_string(),
            other => format!(
                "ρ[{}]",
                other
                    .iter()
                    .map(i128::to_string)
                    .collect::<Vec<_>>()
                    .join(",")
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SymExpr {
    Const(Rat),
    Inf,
    /// The no-bound marker: bounds of an empty collection's elements.
    Nob,
    Var(BVar),
    Add(Vec<SymExpr>),
    Mul(Vec<SymExpr>),
    Sub(Box<SymExpr>, Box<SymExpr>),
    Min(Vec<SymExpr>),
    Max(Vec<SymExpr>),
    Call(Arc<str>, Vec<SymExpr>),
    /// `base ^ exponent`, exponent a non-negative integer expression.
    Pow(Rat, Box<SymExpr>),
    LinRec(Box<LinRec>),
}

impl SymExpr {
    pub fn int(n: i64) -> SymExpr {
        SymExpr::Const(Rat::from_integer(n as i128))
    }

    pub fn zero() -> SymExpr {
        SymExpr::int(0)
    }

    pub fn one() -> SymExpr {
        SymExpr::int(1)
    }

    pub fn var(name: &str) -> SymExpr {
        SymExpr::Var(BVar::new(name))
    }

    pub fn call(name: &str, args: Vec<SymExpr>) -> SymExpr {
        SymExpr::Call(Arc::from(name), args)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(a: SymExpr, b: SymExpr) -> SymExpr {
        SymExpr::Add(vec![a, b])
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(a: SymExpr, b: SymExpr) -> SymExpr {
        SymExpr::Mul(vec![a, b])
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(a: SymExpr, b: SymExpr) -> SymExpr {
        SymExpr::Sub(Box::new(a), Box::new(b))
    }

    pub fn min2(a: SymExpr, b: SymExpr) -> SymExpr {
        SymExpr::Min(vec![a, b])
    }

    pub fn max2(a: SymExpr, b: SymExpr) -> SymExpr {
        SymExpr::Max(vec![a, b])
    }

    pub fn as_const(&self) -> Option<Rat> {
        match self {
            SymExpr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_const(&self) -> bool {
        matches!(self, SymExpr::Const(_))
    }

    fn children(&self) -> Vec<&SymExpr> {
        match self {
            SymExpr::Const(_) | SymExpr::Inf | SymExpr::Nob | SymExpr::Var(_) => vec![],
            SymExpr::Add(v)
            | SymExpr::Mul(v)
            | SymExpr::Min(v)
            | SymExpr::Max(v)
            | SymExpr::Call(_, v) => v.iter().collect(),
            SymExpr::Sub(a, b) => vec![a, b],
            SymExpr::Pow(_, e) => vec![e],
            SymExpr::LinRec(l) => {
                let mut out: Vec<&SymExpr> = l.init.iter().collect();
                out.push(&l.constant);
                out.push(&l.index);
                out
            }
        }
    }

    pub fn any(&self, pred: &dyn Fn(&SymExpr) -> bool) -> bool {
        pred(self) || self.children().into_iter().any(|c| c.any(pred))
    }

    pub fn vars(&self) -> Vec<BVar> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn collect_vars(&self, out: &mut Vec<BVar>) {
        if let SymExpr::Var(v) = self {
            if !out.contains(v) {
                out.push(v.clone());
            }
        }
        for c in self.children() {
            c.collect_vars(out);
        }
    }

    pub fn mentions(&self, v: &BVar) -> bool {
        self.any(&|e| matches!(e, SymExpr::Var(w) if w == v))
    }

    pub fn has_calls(&self) -> bool {
        self.any(&|e| matches!(e, SymExpr::Call(..)))
    }

    pub fn calls(&self) -> Vec<(Arc<str>, Vec<SymExpr>)> {
        let mut out = Vec::new();
        self.collect_calls(&mut out);
        out
    }

    fn collect_calls(&self, out: &mut Vec<(Arc<str>, Vec<SymExpr>)>) {
        if let SymExpr::Call(f, a) = self {
            out.push((f.clone(), a.clone()));
        }
        for c in self.children() {
            c.collect_calls(out);
        }
    }

    /// Bottom-up rewrite.
    pub fn map(&self, f: &mut dyn FnMut(SymExpr) -> SymExpr) -> SymExpr {
        let rebuilt = match self {
            SymExpr::Const(_) | SymExpr::Inf | SymExpr::Nob | SymExpr::Var(_) => self.clone(),
            SymExpr::Add(v) => SymExpr::Add(v.iter().map(|e| e.map(f)).collect()),
            SymExpr::Mul(v) => SymExpr::Mul(v.iter().map(|e| e.map(f)).collect()),
            SymExpr::Min(v) => SymExpr::Min(v.iter().map(|e| e.map(f)).collect()),
            SymExpr::Max(v) => SymExpr::Max(v.iter().map(|e| e.map(f)).collect()),
            SymExpr::Call(n, v) => SymExpr::Call(n.clone(), v.iter().map(|e| e.map(f)).collect()),
            SymExpr::Sub(a, b) => SymExpr::Sub(Box::new(a.map(f)), Box::new(b.map(f))),
            SymExpr::Pow(b, e) => SymExpr::Pow(*b, Box::new(e.map(f))),
            SymExpr::LinRec(l) => SymExpr::LinRec(Box::new(LinRec {
                coeffs: l.coeffs.clone(),
                constant: l.constant.map(f),
                init: l.init.iter().map(|e| e.map(f)).collect(),
                start: l.start,
                index: l.index.map(f),
            })),
        };
        f(rebuilt)
    }

    pub fn subst_vars(&self, map: &BTreeMap<BVar, SymExpr>) -> SymExpr {
        self.map(&mut |e| match &e {
            SymExpr::Var(v) => map.get(v).cloned().unwrap_or(e),
            _ => e,
        })
    }

    pub fn rename_calls(&self, map: &dyn Fn(&str) -> Option<String>) -> SymExpr {
        self.map(&mut |e| match &e {
            SymExpr::Call(n, a) => match map(n) {
                Some(m) => SymExpr::Call(Arc::from(m.as_str()), a.clone()),
                None => e,
            },
            _ => e,
        })
    }
}

// ---------------------------------------------------------------- values

/// An extended integer: finite rational, +∞, or the no-bound marker.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Value {
    Fin(Rat),
    Inf,
    Nob,
}

impl Value {
    pub fn int(n: i64) -> Value {
        Value::Fin(Rat::from_integer(n as i128))
    }

    pub fn as_fin(self) -> Option<Rat> {
        match self {
            Value::Fin(r) => Some(r),
            _ => None,
        }
    }

    pub fn to_i64(self) -> Option<i64> {
        self.as_fin().and_then(|r| {
            if r.is_integer() {
                r.to_integer().to_i64()
            } else {
                None
            }
        })
    }

    fn add(self, o: Value) -> Value {
        match (self, o) {
            (Value::Fin(a), Value::Fin(b)) => Value::Fin(a + b),
            (Value::Nob, _) | (_, Value::Nob) => Value::Nob,
            _ => Value::Inf,
        }
    }

    fn mul(self, o: Value) -> Value {
        match (self, o) {
            (Value::Fin(a), Value::Fin(b)) => Value::Fin(a * b),
            (Value::Fin(z), _) | (_, Value::Fin(z)) if z.is_zero() => Value::Fin(z),
            (Value::Nob, _) | (_, Value::Nob) => Value::Nob,
            (Value::Fin(a), Value::Inf) | (Value::Inf, Value::Fin(a)) if a.is_negative() => {
                Value::Fin(Rat::zero())
            }
            _ => Value::Inf,
        }
    }

    fn sub(self, o: Value) -> Value {
        match (self, o) {
            (Value::Fin(a), Value::Fin(b)) => Value::Fin(a - b),
            (Value::Nob, _) | (_, Value::Nob) => Value::Nob,
            (Value::Inf, _) => Value::Inf,
            (Value::Fin(_), Value::Inf) => Value::Fin(Rat::zero()),
        }
    }

    fn cmp_key(self) -> Option<(u8, Rat)> {
        match self {
            Value::Fin(r) => Some((0, r)),
            Value::Inf => Some((1, Rat::zero())),
            Value::Nob => None,
        }
    }

    pub fn le(self, o: Value) -> bool {
        match (self.cmp_key(), o.cmp_key()) {
            (Some(a), Some(b)) => a <= b,
            _ => true,
        }
    }

    fn min_of(vals: impl Iterator<Item = Value>) -> Value {
        vals.filter(|v| *v != Value::Nob)
            .fold(Value::Nob, |acc, v| match acc {
                Value::Nob => v,
                a if a.le(v) => a,
                _ => v,
            })
    }

    fn max_of(vals: impl Iterator<Item = Value>) -> Value {
        vals.filter(|v| *v != Value::Nob)
            .fold(Value::Nob, |acc, v| match acc {
                Value::Nob => v,
                a if a.le(v) => v,
                a => a,
            })
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Fin(r) if r.is_integer() => write!(f, "{}", r.to_integer()),
            Value::Fin(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Value::Inf => write!(f, "∞"),
            Value::Nob => write!(f, "nob"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("unassigned variable {0}")]
    Unassigned(String),
    #[error("cannot evaluate call to {0} without its definition")]
    UnresolvedCall(String),
    #[error("exponent is not a non-negative integer")]
    BadExponent,
}

/// Resolves calls during evaluation (used by the unroller).
pub trait CallResolver {
    fn call(&mut self, name: &str, args: &[Value]) -> Result<Value, EvalError>;
}

pub struct NoCalls;

impl CallResolver for NoCalls {
    fn call(&mut self, name: &str, _args: &[Value]) -> Result<Value, EvalError> {
        Err(EvalError::UnresolvedCall(name.to_string()))
    }
}

impl SymExpr {
    pub fn eval(&self, env: &BTreeMap<BVar, Value>) -> Result<Value, EvalError> {
        self.eval_with(env, &mut NoCalls)
    }

    pub fn eval_with(
        &self,
        env: &BTreeMap<BVar, Value>,
        calls: &mut dyn CallResolver,
    ) -> Result<Value, EvalError> {
        Ok(match self {
            SymExpr::Const(c) => Value::Fin(*c),
            SymExpr::Inf => Value::Inf,
            SymExpr::Nob => Value::Nob,
            SymExpr::Var(v) => *env
                .get(v)
                .ok_or_else(|| EvalError::Unassigned(v.to_string()))?,
            SymExpr::Add(xs) => {
                let mut acc = Value::int(0);
                for x in xs {
                    acc = acc.add(x.eval_with(env, calls)?);
                }
                acc
            }
            SymExpr::Mul(xs) => {
                let mut acc = Value::int(1);
                for x in xs {
                    acc = acc.mul(x.eval_with(env, calls)?);
                }
                acc
            }
            SymExpr::Sub(a, b) => a.eval_with(env, calls)?.sub(b.eval_with(env, calls)?),
            SymExpr::Min(xs) => {
                let vals = xs
                    .iter()
                    .map(|x| x.eval_with(env, calls))
                    .collect::<Result<Vec<_>, _>>()?;
                Value::min_of(vals.into_iter())
            }
            SymExpr::Max(xs) => {
                let vals = xs
                    .iter()
                    .map(|x| x.eval_with(env, calls))
                    .collect::<Result<Vec<_>, _>>()?;
                Value::max_of(vals.into_iter())
            }
            SymExpr::Call(f, args) => {
                let vals = args
                    .iter()
                    .map(|x| x.eval_with(env, calls))
                    .collect::<Result<Vec<_>, _>>()?;
                calls.call(f, &vals)?
            }
            SymExpr::Pow(base, e) => match e.eval_with(env, calls)? {
                Value::Fin(n) if n.is_integer() && !n.is_negative() => {
                    let n = n.to_integer();
                    let mut acc = Rat::one();
                    for _ in 0..n {
                        acc *= *base;
                    }
                    Value::Fin(acc)
                }
                Value::Inf if *base > Rat::one() => Value::Inf,
                Value::Nob => Value::Nob,
                _ => return Err(EvalError::BadExponent),
            },
            SymExpr::LinRec(l) => {
                let idx = match l.index.eval_with(env, calls)? {
                    Value::Fin(n) if n.is_integer() => n.to_integer() as i64,
                    Value::Inf => return Ok(Value::Inf),
                    Value::Nob => return Ok(Value::Nob),
                    _ => return Err(EvalError::BadExponent),
                };
                let init = l
                    .init
                    .iter()
                    .map(|x| x.eval_with(env, calls))
                    .collect::<Result<Vec<_>, _>>()?;
                let c = l.constant.eval_with(env, calls)?;
                let k = l.coeffs.len() as i64;
                if idx < l.start + k {
                    let i = (idx - l.start).max(0) as usize;
                    return Ok(init.get(i).copied().unwrap_or(Value::int(0)));
                }
                let mut window: Vec<Value> = init.clone();
                let mut n = l.start + k;
                loop {
                    let mut next = c;
                    for (j, a) in l.coeffs.iter().enumerate() {
                        let prev = window[window.len() - 1 - j];
                        next = next.add(Value::Fin(*a).mul(prev));
                    }
                    if n == idx {
                        return Ok(next);
                    }
                    window.remove(0);
                    window.push(next);
                    n += 1;
                }
            }
        })
    }
}

// ---------------------------------------------------------------- display

fn superscript(n: u32) -> String {
    const DIGITS: [char; 10] = ['⁰', '¹', '²', '³', '⁴', '⁵', '⁶', '⁷', '⁸', '⁹'];
    n.to_string()
        .chars()
        .map(|c| DIGITS[c.to_digit(10).unwrap_or(0) as usize])
        .collect()
}

fn fmt_rat(r: &Rat) -> String {
    if r.is_integer() {
        r.to_integer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

impl SymExpr {
    fn prec(&self) -> u8 {
        match self {
            SymExpr::Add(v) if v.len() > 1 => 1,
            SymExpr::Sub(..) => 1,
            SymExpr::Mul(v) if v.len() > 1 => 2,
            SymExpr::Const(c) if c.is_negative() || !c.is_integer() => 1,
            _ => 3,
        }
    }

    fn fmt_in(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        if self.prec() < min_prec {
            write!(f, "(")?;
            self.fmt_top(f)?;
            write!(f, ")")
        } else {
            self.fmt_top(f)
        }
    }

    fn fmt_list(f: &mut fmt::Formatter<'_>, name: &str, xs: &[SymExpr]) -> fmt::Result {
        write!(f, "{name}(")?;
        for (i, x) in xs.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            x.fmt_top(f)?;
        }
        write!(f, ")")
    }

    fn fmt_top(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SymExpr::Const(c) => write!(f, "{}", fmt_rat(c)),
            SymExpr::Inf => write!(f, "∞"),
            SymExpr::Nob => write!(f, "nob"),
            SymExpr::Var(v) => write!(f, "{v}"),
            SymExpr::Add(xs) if xs.is_empty() => write!(f, "0"),
            SymExpr::Add(xs) => {
                for (i, x) in xs.iter().enumerate() {
                    match (i, x) {
                        (0, _) => x.fmt_in(f, 1)?,
                        (_, SymExpr::Const(c)) if c.is_negative() => {
                            write!(f, "−{}", fmt_rat(&-*c))?
                        }
                        (_, SymExpr::Mul(m)) if matches!(m.first(), Some(SymExpr::Const(c)) if c.is_negative()) =>
                        {
                            let SymExpr::Const(c) = &m[0] else {
                                unreachable!()
                            };
                            let mut rest = m.clone();
                            if *c == -Rat::one() {
                                rest.remove(0);
                            } else {
                                rest[0] = SymExpr::Const(-*c);
                            }
                            write!(f, "−")?;
                            if rest.len() == 1 {
                                rest[0].fmt_in(f, 2)?
                            } else {
                                SymExpr::Mul(rest).fmt_in(f, 2)?
                            }
                        }
                        _ => {
                            write!(f, "+")?;
                            x.fmt_in(f, 1)?
                        }
                    }
                }
                Ok(())
            }
            SymExpr::Mul(xs) if xs.is_empty() => write!(f, "1"),
            SymExpr::Mul(xs) => {
                // group repeated factors as powers
                let mut i = 0;
                let mut first = true;
                while i < xs.len() {
                    let mut j = i + 1;
                    while j < xs.len() && xs[j] == xs[i] && !xs[i].is_const() {
                        j += 1;
                    }
                    if !first {
                        write!(f, "·")?;
                    }
                    first = false;
                    xs[i].fmt_in(f, 3)?;
                    if j - i > 1 {
                        write!(f, "{}", superscript((j - i) as u32))?;
                    }
                    i = j;
                }
                Ok(())
            }
            SymExpr::Sub(a, b) => {
                a.fmt_in(f, 1)?;
                write!(f, "−")?;
                b.fmt_in(f, 2)
            }
            SymExpr::Min(xs) => Self::fmt_list(f, "min", xs),
            SymExpr::Max(xs) => Self::fmt_list(f, "max", xs),
            SymExpr::Call(n, xs) => Self::fmt_list(f, n, xs),
            SymExpr::Pow(b, e) => {
                write!(f, "{}^", fmt_rat(b))?;
                e.fmt_in(f, 3)
            }
            SymExpr::LinRec(l) => {
                write!(
                    f,
                    "lrec[{}",
                    l.coeffs.iter().map(fmt_rat).collect::<Vec<_>>().join(",")
                )?;
                write!(f, "; +{}; @{}: ", l.constant, l.start)?;
                for (i, x) in l.init.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    x.fmt_top(f)?;
                }
                write!(f, "](")?;
                l.index.fmt_top(f)?;
                write!(f, ")")
            }
        }
    }
}

impl fmt::Display for SymExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_top(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(&str, i64)]) -> BTreeMap<BVar, Value> {
        pairs
            .iter()
            .map(|(k, v)| (BVar::new(k), Value::int(*v)))
            .collect()
    }

    #[test]
    fn evaluates_basic_forms() {
        let e = SymExpr::add(SymExpr::var("β"), SymExpr::one());
        assert_eq!(e.eval(&env(&[("β", 5)])).unwrap(), Value::int(6));
        let m = SymExpr::Min(vec![
            SymExpr::var("b1"),
            SymExpr::var("b2"),
            SymExpr::var("b3"),
        ]);
        assert_eq!(
            m.eval(&env(&[("b1", 4), ("b2", 2), ("b3", 9)])).unwrap(),
            Value::int(2)
        );
        let p = SymExpr::mul(SymExpr::var("β"), SymExpr::var("δ"));
        assert_eq!(p.eval(&env(&[("β", 3), ("δ", 7)])).unwrap(), Value::int(21));
    }

    #[test]
    fn unassigned_variable_is_an_error() {
        assert_eq!(
            SymExpr::var("x").eval(&BTreeMap::new()),
            Err(EvalError::Unassigned("x".into()))
        );
    }

    #[test]
    fn infinity_propagates_and_nob_is_neutral_in_min_max() {
        let e = SymExpr::add(SymExpr::Inf, SymExpr::one());
        assert_eq!(e.eval(&BTreeMap::new()).unwrap(), Value::Inf);
        let m = SymExpr::Min(vec![SymExpr::Nob, SymExpr::int(3)]);
        assert_eq!(m.eval(&BTreeMap::new()).unwrap(), Value::int(3));
        let z = SymExpr::mul(SymExpr::zero(), SymExpr::Inf);
        assert_eq!(z.eval(&BTreeMap::new()).unwrap(), Value::int(0));
    }

    #[test]
    fn linear_recurrence_iterates_exactly() {
        // fib-steps: f(0)=1, f(1)=1, f(n)=f(n-1)+f(n-2)+1
        let l = SymExpr::LinRec(Box::new(LinRec {
            coeffs: vec![Rat::one(), Rat::one()],
            constant: SymExpr::one(),
            init: vec![SymExpr::one(), SymExpr::one()],
            start: 0,
            index: SymExpr::var("ν"),
        }));
        let vals: Vec<i64> = (0..8)
            .map(|n| l.eval(&env(&[("ν", n)])).unwrap().to_i64().unwrap())
            .collect();
        assert_eq!(vals, vec![1, 1, 3, 5, 9, 15, 25, 41]);
    }

    #[test]
    fn display_uses_compact_notation() {
        let e = SymExpr::Add(vec![
            SymExpr::Mul(vec![SymExpr::var("β"), SymExpr::var("β")]),
            SymExpr::int(-1),
        ]);
        assert_eq!(e.to_string(), "β²−1");
    }
}
