//! Exact symbolic machinery for congruence-subgroup relations driven by
//! the Hecke operator at 2.
//!
//! The crate derives and certifies relations "gamma = 1" for matrices in
//! Gamma_{0,2}(N) with N odd, starting from the periodicity matrices T and
//! W_N and the conjugation of T_2 by the Fricke involution:
//!
//! - [`mat2`]: exact 2x2 rational matrices and the level context.
//! - [`subgroups`]: membership in Gamma_0, Gamma_{0,2}, G_{0,2}, L_{0,2},
//!   descriptor enumeration, and a character-group cross-check oracle.
//! - [`sum`]: integer formal sums of matrices and their cancellation.
//! - [`kb`]: certificates, generator words, replay, bounded equivalence.
//! - [`process`]: the base-case derivation, the inductive pairing step,
//!   certified enumeration with coverage audit, targeted certification.
//! - [`decompose`]: generator-word decomposition of G_{0,2}(N) and
//!   Gamma_{0,2}(N) elements, and the primitive-root witness search that
//!   powers the general case.
//! - [`json`]: the machine-readable report formats used by the CLI.
//!
//! Everything is exact: entries are arbitrary-precision rationals, every
//! certificate replays to its matrix by multiplication, and every
//! decomposition is verified before it is returned.

pub mod arith;
pub mod decompose;
pub mod error;
pub mod json;
pub mod kb;
pub mod mat2;
pub mod process;
pub mod subgroups;
pub mod sum;

pub use error::{Error, Result};
pub use kb::{seed_kb, Certificate, CertKey, GeneratorWord, KnowledgeBase};
pub use mat2::{LevelContext, Mat2, NamedMatrix};
pub use subgroups::LElementDescriptor;
pub use sum::FormalSum;
