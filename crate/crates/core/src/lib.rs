//! Symbolic workbench for classical mechanics on tangent and cotangent bundles.
//!
//! The crate is organized around a small exact symbolic kernel ([`symexpr`])
//! on top of which the geometric layers are built:
//!
//! * [`geometry`] — charts, vector fields, exterior forms, tangent-bundle
//!   tensors and the lift calculus;
//! * [`implicit`] — implicit first/second order ODEs as zero-level sets,
//!   with symmetry and constant-of-motion tests;
//! * [`lagrangian`] — the Euler-Lagrange package (Cartan form, energy,
//!   Hessian rank, Legendre transform);
//! * [`noether`] — Noether certification for Newtonian, generalized and
//!   Newtonoid symmetries, with the inverse construction;
//! * [`constraints`] — the Dirac-Bergmann / presymplectic constraint
//!   algorithm on both bundles;
//! * [`hamjac`] — Hamilton-Jacobi residuals, complete integrals,
//!   characteristics and cyclic reduction;
//! * [`numint`] — a numerical integrator that cross-checks every symbolic
//!   conservation claim;
//! * [`problem`] / [`report`] — the JSON problem-file surface used by the
//!   `geomech` binary and the C API.

pub mod symexpr;
pub mod geometry;
pub mod implicit;
pub mod lagrangian;
pub mod noether;
pub mod constraints;
pub mod hamjac;
pub mod numint;
pub mod problem;
pub mod report;

pub use symexpr::{Expr, ZeroCtx, ZeroStatus, ZeroVerdict};
