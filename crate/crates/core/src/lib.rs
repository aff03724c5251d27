//! Static inference of lower and upper bounds on term sizes, number of
//! solutions and user-defined resources for definite logic programs.

pub mod auxdomains;
pub mod fixpoint;
pub mod frontend;
pub mod oracle;
pub mod recurrence;
pub mod regtypes;
pub mod report;
pub mod resdomain;
pub mod sizedtypes;
