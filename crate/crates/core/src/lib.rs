//! Adjoint Monte Carlo gradients for kinetic equations.
//!
//! The crate provides generic Monte Carlo gradient estimators
//! ([`mc_gradients`]), a particle solver for one-dimensional linear radiative
//! transfer with two adjoint gradient schemes and a finite-volume reference
//! ([`rte`]), and forward/adjoint DSMC for the spatially homogeneous
//! Boltzmann equation ([`dsmc`]). Solvers are generic over the working
//! precision ([`Real`]); the aliases below fix it to `f64`.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dsmc;
pub mod error;
pub mod grid;
mod io;
pub mod mc_gradients;
pub mod rng;
pub mod rte;
pub mod scalar;
pub mod stats;

pub use error::{Error, Result};
pub use grid::BinEdges;
pub use mc_gradients::{EstimatorMethod, GradientEstimate};
pub use rng::{Purpose, StreamKey};
pub use scalar::Real;

pub type SigmaField = rte::SigmaField<f64>;
pub type ParticleTrajectoryTape = rte::ParticleTrajectoryTape<f64>;
pub type InitialParticles = rte::InitialParticles<f64>;
pub type Vec3 = dsmc::Vec3<f64>;
pub type VelocityEnsemble = dsmc::VelocityEnsemble<f64>;
pub type CollisionTape = dsmc::CollisionTape<f64>;
pub type AdjointEnsemble = dsmc::AdjointEnsemble<f64>;
