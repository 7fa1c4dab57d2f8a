//! Immersed-boundary kernel generation as constrained quadratic minimization.
//!
//! Kernel weights Ψ that couple a Lagrangian marker to the surrounding
//! Eulerian grid are obtained by minimizing `½ Ψᵀ W⁻¹ Ψ` subject to the
//! discrete moment conditions `A Ψ = p`, optionally with bounds on Ψ and a
//! weight matrix restricted to one side of an interface:
//!
//! - [`kernel`] assembles the moving-least-squares system and evaluates the
//!   closed-form generating function.
//! - [`qpsolve`] holds the equality, box-constrained (active-set), phase-1 and
//!   penalty solvers, plus the four-point kernel built from its postulates.
//! - [`onesided`] classifies sites against an interface and builds one-sided,
//!   bounded kernels.
//! - [`ibops`] provides the grid, stencils and the interpolation/spreading pair.
//! - [`experiments`] reproduces the circular-interface interpolation study.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod format;
pub mod ibops;
pub mod kernel;
pub mod linalg;
pub mod onesided;
pub mod qpsolve;

pub use error::{Error, Result};
pub use ibops::{CartesianGrid, Formulation, GridField, KernelStrategy, MarkerSet, Stencil};
pub use kernel::{
    BasisDegree, DataSites, EvalPoint, KernelSource, KernelSystem, KernelWeights, PolynomialBasis,
    SolveMode, WeightFunction, WeightKind,
};
pub use linalg::{DenseMatrix, KktSystem, ToleranceSet};
pub use onesided::{Circle, KernelBounds, Side, SideMask, SignedDistance};
pub use qpsolve::{FeasibilityReport, KktReport, Peskin4Weights, QpProblem, QpSolution};
