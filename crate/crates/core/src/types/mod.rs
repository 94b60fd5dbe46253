//! Simple types and the syntax-directed checker.

mod check;
mod ty;

pub use check::{get_params_type, literal_type, primitive_signature, result_type, typecheck, Ty, TypeEnv, TypeError};
pub use ty::SimpleType;
