//! Anytime policy refinement for influence diagrams.
//!
//! A diagram is compiled into a Bayesian network ([`inference::CompiledNetwork`]) whose
//! decision nodes carry installable CPTs. [`refinement`] grows one decision tree per
//! decision by repeatedly splitting a leaf on an observable variable, keeping every
//! intermediate policy available for evaluation. [`exact`] provides a brute-force
//! optimal policy for small diagrams.

pub mod error;
pub mod exact;
pub mod factor;
pub mod format;
pub mod inference;
pub mod model;
pub mod policy;
pub mod problems;
pub mod refinement;
pub mod validate;

pub use error::{Error, Result};
pub use model::{Context, DiagramBuilder, InfluenceDiagram, VarId, Variable};
