use std::collections::BTreeMap;
use std::fmt;

use super::expr::{BVar, EvalError, SymExpr, Value};
use super::poly::simplify;
use super::system::Case;
use crate::sizedtypes::Dir;

/// Solved bound function: guard-cased, call-free expressions over the
/// formals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClosedForm {
    pub name: String,
    pub dir: Dir,
    pub formals: Vec<BVar>,
    pub cases: Vec<Case>,
    pub default: SymExpr,
    /// Representative expression: the recursive case, or the most general
    /// one. Used for reporting and order extraction.
    pub main: SymExpr,
    /// Single expression valid on the whole domain (used by callers).
    pub merged: SymExpr,
    /// The cases equal the unrolled system (no fallback or approximation).
    pub exact: bool,
    /// `merged` coincides with the cases everywhere.
    pub merged_exact: bool,
    pub pattern: &'static str,
}

impl ClosedForm {
    /// Value at an assignment of the formals.
    pub fn evaluate(&self, env: &BTreeMap<BVar, Value>) -> Result<Value, EvalError> {
        for v in &self.formals {
            if !env.contains_key(v) {
                return Err(EvalError::Unassigned(v.to_string()));
            }
        }
        match self.cases.iter().find(|c| c.guard.holds(env)) {
            Some(c) => c.rhs.eval(env),
            None => self.default.eval(env),
        }
    }

    /// Value at positional arguments.
    pub fn evaluate_args(&self, args: &[Value]) -> Result<Value, EvalError> {
        let env: BTreeMap<BVar, Value> = self
            .formals
            .iter()
            .cloned()
            .zip(args.iter().copied())
            .collect();
        self.evaluate(&env)
    }

    /// `merged` with formals replaced by the given expressions.
    pub fn instantiate(&self, args: &[SymExpr]) -> SymExpr {
        let map: BTreeMap<BVar, SymExpr> = self
            .formals
            .iter()
            .cloned()
            .zip(args.iter().cloned())
            .collect();
        simplify(&self.merged.subst_vars(&map))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self.main, SymExpr::Inf)
    }

    /// Safe default when solving fails: ∞ for upper, 0 for lower bounds.
    pub fn fallback_value(dir: Dir) -> SymExpr {
        match dir {
            Dir::Le => SymExpr::Inf,
            Dir::Ge => SymExpr::zero(),
        }
    }
}

impl fmt::Display for ClosedForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.cases.len() <= 1 {
            return write!(f, "{}", self.main);
        }
        for (i, c) in self.cases.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{} if {}", c.rhs, c.guard)?;
        }
        Ok(())
    }
}
