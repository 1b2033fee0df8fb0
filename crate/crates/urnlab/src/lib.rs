//! A laboratory for generalized (Hill-Lane-Sudderth) urns.
//!
//! The process: an urn holds black and white balls; at each step a new ball
//! is added, black with probability `pi(psi)` where `psi` is the current
//! black share, until a fixed capacity `T` is reached. This crate covers the
//! finite process and its large-capacity limits:
//!
//! - [`urn`]: the urn-function families and their calculus;
//! - [`history`]: simulation, share sequences, 1-Lipschitz path embedding;
//! - [`dp`]: exact final-share laws by dynamic programming;
//! - [`dynamics`]: fixed points, the transformed urn function, and
//!   zero-cost (scaling-limit) trajectories;
//! - [`inverse`]: recovering `pi` from an observed trajectory;
//! - [`ldp`]: sample-path action functionals, entropy of endpoint events,
//!   moment generating functions, and Legendre transforms;
//! - [`montecarlo`]: deterministic parallel batches and importance sampling.
//!
//! Analysis types are generic over the scalar via [`float::Real`] and
//! default to `f64`; simulation and exact probability mass are always `f64`.

pub mod curves;
pub mod dp;
pub mod dynamics;
pub mod error;
pub mod float;
pub mod history;
pub mod inverse;
pub mod ldp;
pub mod montecarlo;
mod ode;
pub mod paths;
mod quad;
mod ser;
pub mod urn;

pub use curves::{CurveKind, ScalarCurve};
pub use dp::{exact_distribution, FinalShareDistribution, WorkBudget};
pub use dynamics::{
    fixed_points, terminal_point, transformed_urn_function, zero_cost_trajectory,
    zero_cost_trajectory_via_transform, FixedPoint, FixedPointKind, FixedPointSet,
    TrajectoryOutcome, TransformedUrn,
};
pub use error::{Error, ErrorKind, Result};
pub use float::Real;
pub use history::{embed, share_sequence, simulate, History, Seed};
pub use inverse::{estimate_transformed, estimate_urn_function, InverseEstimate};
pub use ldp::{
    action_report, entropy_curve, entropy_reconstruction_residual, legendre, minimize_action,
    mogulskii_action, scale_invariant_lagrangian, scaled_action, solve_mgf, ActionCell,
    ActionReport, EndpointConstraint, EventSpec, MgfSolution,
};
pub use montecarlo::{
    empirical_entropy, importance_estimate, run_batch, BatchResult, ImportanceEstimate,
};
pub use paths::{LipschitzPath, Trajectory};
pub use urn::UrnFunction;
