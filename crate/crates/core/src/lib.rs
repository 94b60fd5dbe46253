//! A probabilistic functional language with exact discrete semantics, differential privacy
//! mechanisms, f-divergences, a relational refinement type checker and a brute-force
//! privacy oracle.

pub mod corpus;
pub mod dist;
pub mod dpverify;
pub mod eval;
pub mod infer;
pub mod mech;
pub mod reltype;
pub mod scalar;
pub mod syntax;
pub mod types;

use num_rational::BigRational;

pub use scalar::Scalar;

/// Distributions with binary64 masses.
pub type Dist64<V> = dist::Dist<V, f64>;
/// Distributions with exact rational masses.
pub type ExactDist<V> = dist::Dist<V, BigRational>;
pub type SymDist64 = dist::SymDist<f64>;
pub type ExactSymDist = dist::SymDist<BigRational>;
/// Program values over binary64 reals.
pub type Value64<'a> = eval::Value<'a, f64>;
/// Program values over exact rationals.
pub type ExactValue<'a> = eval::Value<'a, BigRational>;
