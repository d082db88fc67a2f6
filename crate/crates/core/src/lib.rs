//! Exact branch and bound for the random asymmetric TSP, bounded by the
//! restricted assignment relaxation, together with exact oracles and
//! structural diagnostics of the relaxation.

pub mod assignment;
pub mod bnb;
pub mod error;
pub mod exact;
pub mod harness;
pub mod instance;
pub mod structure;
pub mod tour;

/// A directed edge `(tail, head)`, equivalently a bipartite pair `(row, column)`.
pub type Edge = (usize, usize);

pub use error::{Error, Result};
pub use instance::CostMatrix;
