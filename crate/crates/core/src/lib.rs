//! vnlab — a numerical laboratory for finite-dimensional von Neumann algebras.
//!
//! The crate builds concrete, fully checkable versions of the operator
//! algebraic machinery behind quantum entropy and entanglement:
//!
//! * [`algebra`] — finite-dimensional von Neumann algebras given by their
//!   matrix-block structure, and the calculus of linear functionals on them;
//! * [`modular`] — GNS construction, standard forms, (relative) modular
//!   operators with support projections, natural cones, Connes cocycles;
//! * [`entropy`] — relative entropy by independent routes, von Neumann
//!   entropy, and the entropy of a subalgebra;
//! * [`entanglement`] — bipartite systems, separable states, mutual
//!   information and certified bounds on relative entanglement entropy;
//! * [`nuclearity`] — nuclear p-norm upper bounds of modular maps and the
//!   constructive bound chain linking them to entanglement measures;
//! * [`inclusion`] — state-preserving conditional expectations, the Jones
//!   projection structure, canonical intermediate type I factors, and the
//!   canonical entanglement entropy;
//! * [`harness`] — seeded instance generation, invariant suites, the distance
//!   scan experiment, and deterministic JSON/TSV reports.
//!
//! All values are immutable after construction and every operation is a pure
//! function of its inputs, so the whole API is safe to drive from multiple
//! threads without coordination.

pub mod algebra;
pub mod entanglement;
pub mod entropy;
pub mod harness;
pub mod inclusion;
pub mod linalg;
pub mod modular;
pub mod nuclearity;

pub mod book;

pub use algebra::{FdAlgebra, Functional, FunctionalKind};
pub use entropy::ExtReal;
pub use linalg::{C64, CMat, CVec};
