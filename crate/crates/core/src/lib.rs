//! Core engine for turning PDE descriptions into trained physics-informed
//! networks: expression grammar and canonicalization, symbolic tree matching,
//! semantic summaries, candidate consensus, architecture matching, six-module
//! code generation, a desk-scale trainer, and training-quality metrics.
//!
//! The crate is `no_std` and needs only `alloc`. Anything that talks to the
//! outside world (providers, files, the CLI) lives in the companion crate.
//!
//! ```
//! use pinnforge_core::{canonicalize, parse, tree_score};
//!
//! let a = canonicalize(&parse("du/dt - 0.1*d2u/dx2").unwrap());
//! let b = canonicalize(&parse("-0.1*u_xx + u_t").unwrap());
//! assert_eq!(tree_score(&a, &b), 1.0);
//! ```
#![no_std]

extern crate alloc;

#[cfg(feature = "std")]
extern crate std;

pub mod canon;
pub mod codegen;
pub mod consensus;
pub mod expr;
pub mod feedback;
pub mod matching;
pub mod parse;
pub mod pde;
pub mod pinn;
pub mod prefix;
pub mod provider;
pub mod semantic;
pub mod trainer;

pub use canon::{canonicalize, is_canonical};
pub use expr::{ExprTree, Node};
pub use matching::{sym_score, tree_score};
pub use parse::{parse, ParseError};
pub use pde::{BcKind, BoundaryCondition, CanonicalPde, Domain, PhysicsHints, Side};
pub use prefix::{from_prefix, to_prefix};
