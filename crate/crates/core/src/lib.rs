//! Constrained minimal weighted-energy problems for vector measures on signed
//! condensers, discretized on finite node sets.
//!
//! A condenser is a family of plates, each a node set with a sign. A vector
//! measure puts nonnegative weights on every plate; its energy is the energy
//! of the signed superposition `Rμ = Σ α_i μ^i`. The [`solver`] minimizes
//! `G_f(μ) = κ(μ,μ) + 2<f,μ>` subject to per-plate mass and upper-bound
//! constraints, and [`analysis`] builds equilibrium, balayage and exhaustion
//! experiments on top of it.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod condenser;
pub mod error;
pub mod geometry;
pub mod kernels;
pub mod solver;

pub use analysis::{
    balayage, balayage_on_gram, equilibrium, exhaustion_experiment, thinness_demo, BalayageReport, Companions,
    EquilibriumReport, ExhaustionStage, ExhaustionTrace, ThinnessConfig, ThinnessReport, ThinnessRow,
};
pub use condenser::{
    check_feasibility, energy, mutual_energy, r_map, scalar_energy, scalar_mutual_energy, semimetric_distance,
    weighted_energy, Condenser, Feasibility, Field, FieldSpec, Plate, PlateFeasibility, ScalarSignedMeasure, Sign,
    VectorMeasure,
};
pub use error::{Error, Result};
pub use geometry::{fibonacci_sphere, grid, ring, Profile, RotationalBody};
pub use kernels::{
    assemble_gram, check_positive_definite, default_epsilon, diagnose, evaluate_kernel, GramMatrix, KernelFamily,
    KernelSpec, PdDiagnosis, Point,
};
pub use solver::{project_plate, solve, verify_kkt, Algorithm, KktCertificate, SolveReport, SolverConfig, StepRule};
