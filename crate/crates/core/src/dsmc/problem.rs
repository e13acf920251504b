use std::time::Instant;

use super::adjoint::{adjoint_sweep, VelocityObservable};
use super::forward::{initial_bound, run_dsmc, BoundPolicy, VelocityEnsemble};
use super::initial::{fd_reference_gradient_with, initial_condition_gradient, sample_initial_condition, InitialConditionModel};
use super::kernel::CollisionKernel;
use crate::error::Result;
use crate::mc_gradients::{FdOptions, GradientEstimate};
use crate::rng::StreamKey;
use crate::scalar::Real;

/// The full map θ ↦ J(θ) = (ρ/N) Σ φ(v_i^M) for an initial-condition model,
/// a kernel and a time grid.
#[derive(Debug, Clone)]
pub struct DsmcProblem<K, M> {
    pub kernel: K,
    pub model: M,
    pub n_particles: usize,
    pub dt: f64,
    pub steps: usize,
}

/// Result of one forward + adjoint evaluation.
#[derive(Debug, Clone)]
pub struct AdjointRun {
    pub objective: f64,
    pub gradient: GradientEstimate,
    pub sigma_bound: f64,
    pub real_collisions: usize,
    pub forward_seconds: f64,
    pub adjoint_seconds: f64,
}

impl<K, M: InitialConditionModel> DsmcProblem<K, M> {
    pub fn new(kernel: K, model: M, n_particles: usize, dt: f64, steps: usize) -> Self {
        Self { kernel, model, n_particles, dt, steps }
    }

    pub fn initial<T: Real>(&self, theta: &[f64], key: StreamKey) -> Result<VelocityEnsemble<T>> {
        Ok(sample_initial_condition(&self.model, theta, self.n_particles, key)?.0)
    }

    /// The collision bound the run at `theta` would start from. Fixing it for
    /// perturbed runs keeps their pair selections identical.
    pub fn base_bound<T: Real>(&self, theta: &[f64], key: StreamKey) -> Result<f64>
    where
        K: CollisionKernel<T>,
    {
        let e = self.initial::<T>(theta, key)?;
        Ok(initial_bound(&self.kernel, &e, BoundPolicy::Auto))
    }

    pub fn objective<T: Real, O: VelocityObservable<T> + ?Sized>(
        &self,
        theta: &[f64],
        key: StreamKey,
        policy: BoundPolicy,
        observable: &O,
    ) -> Result<f64>
    where
        K: CollisionKernel<T>,
    {
        let e = self.initial::<T>(theta, key)?;
        let (f, _) = run_dsmc(&e, &self.kernel, self.dt, self.steps, key, policy)?;
        Ok(super::objective_phi(&f, |v| observable.value(v)))
    }

    pub fn adjoint_gradient<T: Real, O: VelocityObservable<T> + ?Sized>(
        &self,
        theta: &[f64],
        key: StreamKey,
        observable: &O,
    ) -> Result<AdjointRun>
    where
        K: CollisionKernel<T>,
    {
        let t0 = Instant::now();
        let (e, init) = sample_initial_condition::<T, _>(&self.model, theta, self.n_particles, key)?;
        let bound = initial_bound(&self.kernel, &e, BoundPolicy::Auto);
        let (f, tape) = run_dsmc(&e, &self.kernel, self.dt, self.steps, key, BoundPolicy::Fixed(bound))?;
        let forward_seconds = t0.elapsed().as_secs_f64();
        let t1 = Instant::now();
        let adj = adjoint_sweep(&tape, &f, &self.kernel, observable)?;
        let gradient = initial_condition_gradient(&adj, &self.model, &init)?;
        let adjoint_seconds = t1.elapsed().as_secs_f64();
        Ok(AdjointRun {
            objective: super::objective_phi(&f, |v| observable.value(v)),
            gradient,
            sigma_bound: bound,
            real_collisions: tape.n_real(),
            forward_seconds,
            adjoint_seconds,
        })
    }

    /// Coupled finite differences; every evaluation shares `key` and the
    /// collision bound of the unperturbed run.
    pub fn fd_gradient<T: Real, O: VelocityObservable<T> + ?Sized>(
        &self,
        theta: &[f64],
        opts: &FdOptions,
        key: StreamKey,
        observable: &O,
    ) -> Result<GradientEstimate>
    where
        K: CollisionKernel<T>,
    {
        let bound = self.base_bound::<T>(theta, key)?;
        let mut failure = None;
        let est = fd_reference_gradient_with(
            |th, k| match self.objective::<T, O>(th, k, BoundPolicy::Fixed(bound), observable) {
                Ok(j) => j,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            },
            theta,
            opts,
            key,
        )?;
        match failure {
            Some(e) => Err(e),
            None => Ok(est),
        }
    }
}
