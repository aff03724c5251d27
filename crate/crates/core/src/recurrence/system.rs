use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use super::expr::{BVar, CallResolver, EvalError, SymExpr, Value};
use super::poly::simplify;
use crate::sizedtypes::Dir;

/// Conjunction of interval constraints `lo ≤ v ≤ hi`, at most one per
/// variable. The empty guard is `true`.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Guard {
    pub bounds: BTreeMap<BVar, (i64, Option<i64>)>,
}

impl Guard {
    pub fn top() -> Guard {
        Guard::default()
    }

    pub fn is_top(&self) -> bool {
        self.bounds.is_empty()
    }

    /// Add `lo ≤ v ≤ hi`; `false` when the guard becomes unsatisfiable.
    pub fn restrict(&mut self, v: &BVar, lo: i64, hi: Option<i64>) -> bool {
        let (l0, h0) = self.interval(v);
        let lo = lo.max(l0);
        let hi = match (h0, hi) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        if hi.is_some_and(|h| h < lo) {
            return false;
        }
        if lo <= 0 && hi.is_none() {
            self.bounds.remove(v);
        } else {
            self.bounds.insert(v.clone(), (lo, hi));
        }
        true
    }

    /// Interval of `v` (variables are non-negative).
    pub fn interval(&self, v: &BVar) -> (i64, Option<i64>) {
        self.bounds.get(v).copied().unwrap_or((0, None))
    }

    pub fn intersect(&self, o: &Guard) -> Option<Guard> {
        let mut g = self.clone();
        for (v, (lo, hi)) in &o.bounds {
            if !g.restrict(v, *lo, *hi) {
                return None;
            }
        }
        Some(g)
    }

    /// `self` implies `o`.
    pub fn implies(&self, o: &Guard) -> bool {
        o.bounds.iter().all(|(v, (lo, hi))| {
            let (a, b) = self.interval(v);
            a >= *lo
                && match (hi, b) {
                    (None, _) => true,
                    (Some(h), Some(b)) => b <= *h,
                    (Some(_), None) => false,
                }
        })
    }

    pub fn holds(&self, env: &BTreeMap<BVar, Value>) -> bool {
        self.bounds.iter().all(|(v, (lo, hi))| match env.get(v) {
            Some(Value::Fin(x)) => {
                let x = x.to_integer() as i64;
                x >= *lo && hi.is_none_or(|h| x <= h)
            }
            Some(Value::Inf) => hi.is_none(),
            _ => false,
        })
    }

    pub fn point(&self, v: &BVar) -> Option<i64> {
        match self.interval(v) {
            (lo, Some(hi)) if lo == hi => Some(lo),
            _ => None,
        }
    }

    pub fn without(&self, v: &BVar) -> Guard {
        let mut g = self.clone();
        g.bounds.remove(v);
        g
    }

    pub fn vars(&self) -> impl Iterator<Item = &BVar> {
        self.bounds.keys()
    }

    /// Rename variables (unmapped ones are dropped).
    pub fn rename(&self, map: &BTreeMap<BVar, BVar>) -> Guard {
        let mut g = Guard::top();
        for (v, (lo, hi)) in &self.bounds {
            g.restrict(map.get(v).unwrap_or(v), *lo, *hi);
        }
        g
    }
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.bounds.is_empty() {
            return write!(f, "true");
        }
        for (i, (v, (lo, hi))) in self.bounds.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            match hi {
                Some(h) if h == lo => write!(f, "{v} = {lo}")?,
                Some(h) if *lo <= 0 => write!(f, "{v} ≤ {h}")?,
                Some(h) => write!(f, "{lo} ≤ {v} ≤ {h}")?,
                None if *lo == 1 => write!(f, "{v} > 0")?,
                None => write!(f, "{v} ≥ {lo}")?,
            }
        }
        Ok(())
    }
}

/// One guarded right-hand side.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Case {
    pub guard: Guard,
    pub rhs: SymExpr,
}

/// A guarded recurrence inequation `lhs ≥/≤ rhs if guard`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Inequation {
    pub lhs: BVar,
    pub dir: Dir,
    pub rhs: SymExpr,
    pub guard: Guard,
}

impl fmt::Display for Inequation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.dir.symbol(), self.rhs)?;
        if !self.guard.is_top() {
            write!(f, "  if {}", self.guard)?;
        }
        Ok(())
    }
}

/// The equations of one bound function: value is the rhs of the first
/// case whose guard holds, `default` outside every guard.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FnEqs {
    pub name: String,
    pub dir: Dir,
    pub formals: Vec<BVar>,
    pub cases: Vec<Case>,
    pub default: SymExpr,
}

impl FnEqs {
    pub fn calls(&self) -> BTreeSet<String> {
        self.cases
            .iter()
            .flat_map(|c| c.rhs.calls())
            .map(|(f, _)| f.to_string())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RecError {
    #[error("cyclic definition among intermediate variables: {0}")]
    Cycle(String),
    #[error("recursion depth limit {0} exceeded while unrolling {1}")]
    Divergence(usize, String),
    #[error("unknown bound function {0}")]
    UnknownFunction(String),
    #[error("wrong number of arguments for {0}")]
    Arity(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Guarded recurrence system: bound functions plus definitions of
/// clause-local intermediate variables still to be eliminated.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EqSystem {
    pub fns: BTreeMap<String, FnEqs>,
    pub defs: BTreeMap<BVar, SymExpr>,
}

/// Eliminate intermediate variables: each definition is substituted into
/// the others in reverse topological order.
pub fn resolve_definitions(
    defs: &BTreeMap<BVar, SymExpr>,
) -> Result<BTreeMap<BVar, SymExpr>, RecError> {
    let mut done: BTreeMap<BVar, SymExpr> = BTreeMap::new();
    let mut state: BTreeMap<BVar, u8> = BTreeMap::new();
    fn visit(
        v: &BVar,
        defs: &BTreeMap<BVar, SymExpr>,
        done: &mut BTreeMap<BVar, SymExpr>,
        state: &mut BTreeMap<BVar, u8>,
    ) -> Result<(), RecError> {
        match state.get(v) {
            Some(2) => return Ok(()),
            Some(1) => return Err(RecError::Cycle(v.to_string())),
            _ => {}
        }
        state.insert(v.clone(), 1);
        let e = &defs[v];
        for w in e.vars() {
            if defs.contains_key(&w) {
                visit(&w, defs, done, state)?;
            }
        }
        let sub: BTreeMap<BVar, SymExpr> = e
            .vars()
            .into_iter()
            .filter_map(|w| done.get(&w).map(|x| (w.clone(), x.clone())))
            .collect();
        done.insert(v.clone(), simplify(&e.subst_vars(&sub)));
        state.insert(v.clone(), 2);
        Ok(())
    }
    for v in defs.keys() {
        visit(v, defs, &mut done, &mut state)?;
    }
    Ok(done)
}

/// Normalize: every rhs mentions only formals and bound-function calls.
pub fn normalize(sys: &EqSystem) -> Result<EqSystem, RecError> {
    let resolved = resolve_definitions(&sys.defs)?;
    let mut out = EqSystem {
        fns: BTreeMap::new(),
        defs: BTreeMap::new(),
    };
    for (name, f) in &sys.fns {
        let cases = f
            .cases
            .iter()
            .map(|c| Case {
                guard: c.guard.clone(),
                rhs: simplify(&c.rhs.subst_vars(&resolved)),
            })
            .collect();
        out.fns.insert(name.clone(), FnEqs { cases, ..f.clone() });
    }
    Ok(out)
}

/// Numeric evaluation of a system by direct iteration of its equations.
pub struct Unroller<'a> {
    sys: &'a EqSystem,
    memo: HashMap<(String, Vec<Value>), Value>,
    depth: usize,
    pub limit: usize,
}

impl<'a> Unroller<'a> {
    pub fn new(sys: &'a EqSystem) -> Unroller<'a> {
        Unroller {
            sys,
            memo: HashMap::new(),
            depth: 0,
            limit: 1_000,
        }
    }

    pub fn eval_fn(&mut self, name: &str, args: &[Value]) -> Result<Value, RecError> {
        let f = self
            .sys
            .fns
            .get(name)
            .ok_or_else(|| RecError::UnknownFunction(name.to_string()))?;
        if f.formals.len() != args.len() {
            return Err(RecError::Arity(name.to_string()));
        }
        let key = (name.to_string(), args.to_vec());
        if let Some(v) = self.memo.get(&key) {
            return Ok(*v);
        }
        if self.depth >= self.limit {
            return Err(RecError::Divergence(self.limit, name.to_string()));
        }
        // clamp negative sizes at 0
        let env: BTreeMap<BVar, Value> = f
            .formals
            .iter()
            .cloned()
            .zip(args.iter().map(|a| match a {
                Value::Fin(x) if *x < num_rational::Ratio::from_integer(0) => Value::int(0),
                other => *other,
            }))
            .collect();
        let rhs = f
            .cases
            .iter()
            .find(|c| c.guard.holds(&env))
            .map(|c| c.rhs.clone())
            .unwrap_or(f.default.clone());
        self.depth += 1;
        let mut res = SysResolver {
            un: self,
            err: None,
        };
        let out = rhs.eval_with(&env, &mut res);
        let err = res.err.take();
        self.depth -= 1;
        if let Some(e) = err {
            return Err(e);
        }
        let v = out?;
        self.memo.insert(key, v);
        Ok(v)
    }
}

struct SysResolver<'u, 'a> {
    un: &'u mut Unroller<'a>,
    err: Option<RecError>,
}

impl CallResolver for SysResolver<'_, '_> {
    fn call(&mut self, name: &str, args: &[Value]) -> Result<Value, EvalError> {
        match self.un.eval_fn(name, args) {
            Ok(v) => Ok(v),
            Err(RecError::Eval(e)) => Err(e),
            Err(e) => {
                self.err = Some(e);
                Err(EvalError::UnresolvedCall(name.to_string()))
            }
        }
    }
}

/// Value of `name` at the given formal assignment, by iteration.
pub fn unroll(sys: &EqSystem, name: &str, env: &BTreeMap<BVar, Value>) -> Result<Value, RecError> {
    let sys = normalize(sys)?;
    let f = sys
        .fns
        .get(name)
        .ok_or_else(|| RecError::UnknownFunction(name.to_string()))?;
    let args = f
        .formals
        .iter()
        .map(|v| {
            env.get(v)
                .copied()
                .ok_or_else(|| EvalError::Unassigned(v.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Unroller::new(&sys).eval_fn(name, &args)
}

impl fmt::Display for EqSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (v, e) in &self.defs {
            writeln!(f, "{v} := {e}")?;
        }
        for (name, eqs) in &self.fns {
            let formals: Vec<String> = eqs.formals.iter().map(|v| v.to_string()).collect();
            writeln!(f, "{name}({}) {}", formals.join(", "), eqs.dir.symbol())?;
            for c in &eqs.cases {
                writeln!(f, "    {}    if {}", c.rhs, c.guard)?;
            }
            writeln!(f, "    {}    otherwise", eqs.default)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: &str) -> BVar {
        BVar::new(n)
    }

    pub(crate) fn guard(v: &str, lo: i64, hi: Option<i64>) -> Guard {
        let mut g = Guard::top();
        g.restrict(&BVar::new(v), lo, hi);
        g
    }

    #[test]
    fn guard_algebra() {
        let a = guard("n", 1, None);
        let b = guard("n", 0, Some(0));
        assert!(a.intersect(&b).is_none());
        assert!(guard("n", 2, None).implies(&a));
        assert!(!a.implies(&guard("n", 2, None)));
        assert_eq!(a.to_string(), "n > 0");
    }

    #[test]
    fn definitions_compose() {
        let defs = BTreeMap::from([
            (v("a"), SymExpr::add(SymExpr::var("b"), SymExpr::one())),
            (v("b"), SymExpr::mul(SymExpr::var("c"), SymExpr::int(2))),
        ]);
        let r = resolve_definitions(&defs).unwrap();
        assert_eq!(r[&v("a")].to_string(), "2·c+1");
        let cyc = BTreeMap::from([(v("a"), SymExpr::var("b")), (v("b"), SymExpr::var("a"))]);
        assert!(matches!(resolve_definitions(&cyc), Err(RecError::Cycle(_))));
    }

    #[test]
    fn unrolls_append_steps() {
        let n = v("β");
        let f = FnEqs {
            name: "r".into(),
            dir: Dir::Le,
            formals: vec![n.clone()],
            cases: vec![
                Case {
                    guard: guard("β", 0, Some(0)),
                    rhs: SymExpr::one(),
                },
                Case {
                    guard: guard("β", 1, None),
                    rhs: SymExpr::add(
                        SymExpr::one(),
                        SymExpr::call("r", vec![SymExpr::sub(SymExpr::var("β"), SymExpr::one())]),
                    ),
                },
            ],
            default: SymExpr::zero(),
        };
        let sys = EqSystem {
            fns: BTreeMap::from([("r".to_string(), f)]),
            defs: BTreeMap::new(),
        };
        let env = BTreeMap::from([(n, Value::int(5))]);
        assert_eq!(unroll(&sys, "r", &env).unwrap(), Value::int(6));
    }

    #[test]
    fn divergence_is_reported() {
        let f = FnEqs {
            name: "r".into(),
            dir: Dir::Le,
            formals: vec![v("n")],
            cases: vec![Case {
                guard: Guard::top(),
                rhs: SymExpr::call("r", vec![SymExpr::var("n")]),
            }],
            default: SymExpr::zero(),
        };
        let sys = EqSystem {
            fns: BTreeMap::from([("r".to_string(), f)]),
            defs: BTreeMap::new(),
        };
        let mut u = Unroller::new(&sys);
        u.limit = 50;
        assert!(matches!(
            u.eval_fn("r", &[Value::int(1)]),
            Err(RecError::Divergence(..))
        ));
    }
}
