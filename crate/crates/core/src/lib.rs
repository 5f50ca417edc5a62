//! Strict deformation quantization as continuous fields of matrix algebras,
//! with numerical limits at `hbar -> 0`.
//!
//! A [`bundle::Bundle`] is a family of matrix fibers over a sampled base
//! space. Sections are generator expressions evaluated fiberwise; the
//! classical algebra is recovered as the quotient by sections whose norm
//! tends to zero.

pub mod algebra;
pub mod base_space;
pub mod bundle;
pub mod config;
pub mod convergence;
pub mod error;
pub mod expr;
pub mod functors;
pub mod limit;
pub mod quantization;
pub mod runner;

pub use algebra::{FiberElement, C64};
pub use base_space::{BaseMap, Point, SampledBaseSpace};
pub use convergence::{ConvergenceReport, LimitEstimate, LimitMethod, TailConfig};
pub use error::{Error, Result};
pub use expr::{parse_expression, Generator, GeneratorExpression, SampledFn, Word};
