//! Relational refinement types with divergence-indexed monads.

pub mod assertion;
pub mod check;
pub mod discharge;
pub mod parse;
pub mod term;
pub mod types;

pub use assertion::Assertion;
pub use check::{relcheck, relcheck_program, replay, replay_program, subtype, Derivation, RelEnv, RelError, VcResult};
pub use discharge::{discharge, prove, Certificate, Lemma, Outcome, Vc, LEMMAS};
pub use parse::{parse_assertion, parse_reltype, parse_rt, parse_rt_named, RtDecl, RtFile};
pub use term::{FIdx, Poly, Side, Term};
pub use types::RelType;
