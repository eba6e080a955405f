//! Lipschitz subspaces of `C(K)` on finite bitopological models.
//!
//! The crate builds finite stand-ins for a compact space carrying a finer
//! metric, constructs isometric embeddings of Banach spaces into spaces of
//! Lipschitz functions over them, and verifies every construction
//! numerically. See the README for the command-line surface.

pub mod convex;
pub mod embed;
pub mod exec;
pub mod frag;
pub mod metric;
pub mod report;

/// Tolerance for metric axioms and coarse-ball membership.
pub const AXIOM_TOL: f64 = 1e-12;
/// Tolerance for equality of constructed values.
pub const VALUE_TOL: f64 = 1e-9;
