//! Open-loop optimal control of a planar Cosserat rod.
//!
//! The rod (a tapered, soft arm clamped at its base) is driven by distributed
//! force and couple densities. Controls minimising
//!
//! ```text
//! J(u) = int_0^T ( |u|^2 / 2 + chi1 V(q) ) dt + chi2 |r_tip(T) - r_target|^2 / 2
//! ```
//!
//! are found by the forward-backward iteration: integrate the rod forward,
//! integrate its costate backward from the transversality condition, and
//! move the control towards the pointwise maximiser of the pre-Hamiltonian,
//! `u <- u + eta (gamma - u)`.
//!
//! Modules follow the data flow: [`rod`] and [`ops`] define the discrete
//! model, [`forward`] and [`adjoint`] the two sweeps, [`control`] the cost
//! and the iteration, and [`experiments`] the reach/fetch/shoot cases and
//! their analyses.

pub mod adjoint;
pub mod control;
pub mod error;
pub mod experiments;
pub mod forward;
pub mod ops;
pub mod parallel;
pub mod rod;

pub use adjoint::{
    adjoint_rhs, simulate_backward, terminal_costate, terminal_costate_with, AdjointParams,
    AdjointSweep, CostateRates, CostateState, TipDelta,
};
pub use control::{
    control_gradient, evaluate_cost, solve, solve_from, update_control, Cost, CostWeights,
    IterationRecord, LearningRate, Problem, Solution, SolveFailure, SolveLog,
};
pub use error::{Result, SolverError};
pub use forward::{forward_rhs, simulate_forward, verlet_step, ControlField, Trajectory};
pub use rod::{
    compute_strains, energies, internal_loads, taper_profile, BaseBoundary, Energies, ForwardSlice,
    InternalLoads, RodParameters, RodProperties, RodState, StrainField, Vec2,
};
