//! Symbolic bound expressions, guarded recurrence systems and their solver.

pub mod closed;
pub mod expr;
pub mod order;
pub mod poly;
pub mod solve;
pub mod system;

pub use closed::ClosedForm;
pub use expr::{BVar, EvalError, LinRec, Rat, SymExpr, Value};
pub use order::{order_of, ComplexityOrder};
pub use solve::{solve, Solution};
pub use system::{normalize, unroll, Case, EqSystem, FnEqs, Guard, Inequation, RecError};
