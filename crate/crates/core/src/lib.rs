//! Galerkin solvers for degenerate second-order Dirichlet problems.
//!
//! The operators handled here have the form
//!
//! ```text
//! X u = ∇'P(x)∇u + H·R u + S'(G u) + F u = f + T'g   in Θ
//! ```
//!
//! where `P` is comparable to a possibly degenerate quadratic form
//! `Q(x, ξ) = ξ'Q(x)ξ`, the tuples `R`, `S`, `T` are subunit with respect to
//! `Q`, and `(S, G, F)` satisfy a sign condition. Problems are discretized
//! with continuous multilinear elements on axis-aligned boxes in one or two
//! dimensions.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, expression
//! parsing and the command line front end live in the companion `subelliptic`
//! crate.
//!
//! Module map:
//!
//! * [`qform`]: pointwise quadratic-form algebra (subunit tests, comparability,
//!   square roots).
//! * [`mesh`]: tensor grids, nodal basis, Gauss quadrature, discrete fields.
//! * [`assembly`]: the bilinear form, its shift, the load and discrete norms.
//! * [`analysis`]: hypothesis checks and the coercivity constant chain.
//! * [`solver`]: direct and Fredholm solves, boundary-data reduction,
//!   uniqueness harness.
//! * [`builtins`]: the shipped model problems with exact solutions.
#![no_std]
#![warn(missing_docs)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod assembly;
pub mod builtins;
pub mod dense;
mod error;
pub mod krylov;
pub mod mesh;
pub mod problem;
pub mod qform;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};

/// Default relative tolerance for pointwise form checks.
pub const FORM_TOL: f64 = 1e-10;
