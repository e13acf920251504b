//! Direct simulation Monte Carlo for the spatially homogeneous Boltzmann
//! equation, its adjoint sweep and initial-condition gradients.

mod adjoint;
pub mod collision;
mod forward;
mod initial;
mod io;
mod kernel;
mod problem;
mod vec3;

pub use adjoint::{adjoint_step, adjoint_sweep, AdjointEnsemble, SpeedSquared, VelocityObservable, VxFourth};
pub use collision::{collision_matrices, collide, Mat6};
pub use forward::{
    dsmc_step, initial_bound, objective_phi, pair_count, run_dsmc, run_dsmc_observed, BoundPolicy, CollisionTape,
    Outcome, PairRecord, StepRecord, VelocityEnsemble, BOUND_MARGIN, SPHERE_AREA,
};
pub use initial::{
    fd_reference_gradient, fd_reference_gradient_with, initial_condition_gradient, sample_initial_condition,
    DiagonalGaussianIc, InitialConditionModel, ReparameterizedInitial,
};
pub use io::{read_collision_tape, write_collision_tape, write_moment_row, MOMENTS_HEADER};
pub use kernel::{CollisionKernel, KernelKind, Maxwellian, Vhs};
pub use problem::{AdjointRun, DsmcProblem};
pub use vec3::Vec3;
