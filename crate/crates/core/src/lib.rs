//! Effectful call-by-value λ-calculus with algebraic operations, its
//! monad-parametric small-step semantics, and a monadic intersection type
//! system with a derivation checker and an evaluation-guided inferencer.

pub mod derivation;
pub mod inference;
pub mod monad;
pub mod rational;
pub mod semantics;
pub mod syntax;
pub mod types;

pub use derivation::{check, check_monadic, CheckError, Derivation, Mode, MonadicDerivation, Rule};
pub use inference::{infer, infer_monadic, InferError, Inference};
pub use monad::{Branch, Grade, MonadSpec, MonadicElement, Observation};
pub use semantics::{run, Trace};
pub use syntax::{parse, Term};
pub use types::{Intersection, MonadicType, TypeEnv, ValueType};
