//! Solver and verification harness for the continuous coagulation equation
//! with collisional breakage,
//!
//! ```text
//! dg/dt = C(g) - B(g) + B*(g),
//! ```
//!
//! integrated on the truncated volume range `(0, n)` with every a-priori
//! estimate of the truncated problem available as an executable check.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod grid;
pub mod io;
pub mod kernels;
pub mod operators;
pub mod oracles;
pub mod solver;
pub mod verification;

pub use error::{Error, Result};
pub use grid::{build_mesh, quad, sample, DensityField, Mesh, MeshKind};
pub use kernels::{EfficiencyModel, KernelSpec};
pub use operators::{brute_force_rhs, rhs, weak_moment_rate, CollisionOperator, OperatorOutput};
pub use solver::{run, InitialDatum, MomentRecord, Solver, SolverConfig, Trajectory};
pub use verification::{BoundLedger, CheckReport, SpaceParams};
