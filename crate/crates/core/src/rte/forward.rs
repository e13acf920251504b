use rayon::prelude::*;

use super::{RteConfig, SigmaField, SpatialMixture};
use crate::error::{ensure, Result};
use crate::rng::{box_muller, Purpose, StreamKey};
use crate::scalar::Real;
use crate::stats::RunningStats;

/// Phase-space states of a contiguous range of particles at t = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialParticles<T> {
    /// Global index of `x[0]`; scatter streams are keyed by global index so a
    /// run split into blocks reproduces the unsplit run.
    pub first_index: u64,
    pub x: Vec<T>,
    pub v: Vec<T>,
}

impl<T> InitialParticles<T> {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Draws all `config.n_particles` initial states.
pub fn sample_initial<T: Real>(
    config: &RteConfig,
    f0: &SpatialMixture,
    key: StreamKey,
) -> Result<InitialParticles<T>> {
    sample_initial_block(config, f0, key, 0, config.n_particles)
}

/// Draws the initial states of particles `first .. first + count`.
///
/// Each particle uses one Philox block: a component choice, two uniforms for
/// a Box–Muller normal, and one uniform velocity.
pub fn sample_initial_block<T: Real>(
    config: &RteConfig,
    f0: &SpatialMixture,
    key: StreamKey,
    first: u64,
    count: usize,
) -> Result<InitialParticles<T>> {
    config.validate()?;
    let seed = key.experiment_seed;
    let omega = config.omega();
    let (x, v): (Vec<T>, Vec<T>) = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let u = StreamKey::for_purpose(seed, Purpose::RteInitial, first + i, 0).uniforms();
            let bump = f0.pick(u[0]);
            let (z, _) = box_muller(u[1], u[2]);
            let x = bump.center + z * bump.std_dev();
            let v = config.v_lo + omega * u[3];
            (T::lit(x), T::lit(v))
        })
        .unzip();
    Ok(InitialParticles { first_index: first, x, v })
}

/// Full trajectory record of an RTE particle run.
///
/// Storage is particle-major: the states of particle `n` at levels `0..=M`
/// are contiguous, as are its scatter flags and acceptance probabilities for
/// steps `1..=M`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleTrajectoryTape<T> {
    pub(crate) config: RteConfig,
    pub(crate) seed: u64,
    pub(crate) first_index: u64,
    pub(crate) n: usize,
    pub(crate) x: Vec<T>,
    pub(crate) v: Vec<T>,
    pub(crate) scattered: Vec<bool>,
    pub(crate) alpha: Vec<T>,
}

impl<T: Real> ParticleTrajectoryTape<T> {
    pub fn config(&self) -> &RteConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn first_index(&self) -> u64 {
        self.first_index
    }

    pub fn n_particles(&self) -> usize {
        self.n
    }

    pub fn steps(&self) -> usize {
        self.config.steps
    }

    pub fn dt(&self) -> f64 {
        self.config.dt
    }

    #[inline]
    pub fn position(&self, n: usize, m: usize) -> T {
        self.x[n * (self.steps() + 1) + m]
    }

    #[inline]
    pub fn velocity(&self, n: usize, m: usize) -> T {
        self.v[n * (self.steps() + 1) + m]
    }

    /// Whether particle `n` scattered in step `m` (1-based, `m <= M`).
    #[inline]
    pub fn scattered(&self, n: usize, m: usize) -> bool {
        self.scattered[n * self.steps() + m - 1]
    }

    /// exp(-σ(x_n^m) Δt) as used for the scatter decision of step `m`.
    #[inline]
    pub fn alpha(&self, n: usize, m: usize) -> T {
        self.alpha[n * self.steps() + m - 1]
    }

    pub fn positions_of(&self, n: usize) -> &[T] {
        let w = self.steps() + 1;
        &self.x[n * w..(n + 1) * w]
    }

    pub fn velocities_of(&self, n: usize) -> &[T] {
        let w = self.steps() + 1;
        &self.v[n * w..(n + 1) * w]
    }

    pub fn final_state(&self, n: usize) -> (T, T) {
        let m = self.steps();
        (self.position(n, m), self.velocity(n, m))
    }

    /// Fraction of particles that scattered in step `m`.
    pub fn scatter_fraction(&self, m: usize) -> f64 {
        (0..self.n).filter(|&n| self.scattered(n, m)).count() as f64 / self.n as f64
    }

    /// Recomputes all positions from the initial states and the recorded
    /// velocities; true iff every stored position is reproduced bit-exactly.
    pub fn replay_positions(&self) -> bool {
        let dt = T::lit(self.dt());
        (0..self.n).all(|n| {
            let xs = self.positions_of(n);
            let vs = self.velocities_of(n);
            let mut x = xs[0];
            for m in 0..self.steps() {
                x += dt * vs[m];
                if x != xs[m + 1] {
                    return false;
                }
            }
            true
        })
    }
}

/// Advances every particle through `config.steps` transport/scatter steps.
///
/// Step `m` of particle `n` draws one Philox block keyed by
/// `(seed, RteScatter, global n, m)`: the first uniform is the scatter test,
/// the second the new velocity.
pub fn run_forward<T: Real>(
    config: &RteConfig,
    sigma: &SigmaField<T>,
    initial: &InitialParticles<T>,
    key: StreamKey,
) -> Result<ParticleTrajectoryTape<T>> {
    config.validate()?;
    ensure!(initial.x.len() == initial.v.len(), Argument, "initial positions and velocities differ in length");
    let n = initial.len();
    let steps = config.steps;
    let w = steps + 1;
    let seed = key.experiment_seed;
    let dt = T::lit(config.dt);
    let v_lo = config.v_lo;
    let omega = config.omega();

    let mut x = vec![T::zero(); n * w];
    let mut v = vec![T::zero(); n * w];
    let mut scattered = vec![false; n * steps];
    let mut alpha = vec![T::zero(); n * steps];

    let body = |p: usize, xs: &mut [T], vs: &mut [T], ss: &mut [bool], als: &mut [T]| {
        let gid = initial.first_index + p as u64;
        xs[0] = initial.x[p];
        vs[0] = initial.v[p];
        for m in 0..steps {
            let xn = xs[m] + dt * vs[m];
            xs[m + 1] = xn;
            let a = (-sigma.eval(xn) * dt).exp();
            als[m] = a;
            let u = StreamKey::for_purpose(seed, Purpose::RteScatter, gid, m as u64 + 1).uniforms();
            if T::lit(u[0]) >= a {
                ss[m] = true;
                vs[m + 1] = T::lit(v_lo + omega * u[1]);
            } else {
                vs[m + 1] = vs[m];
            }
        }
    };

    if steps == 0 {
        x.copy_from_slice(&initial.x);
        v.copy_from_slice(&initial.v);
    } else {
        x.par_chunks_mut(w)
            .zip(v.par_chunks_mut(w))
            .zip(scattered.par_chunks_mut(steps).zip(alpha.par_chunks_mut(steps)))
            .enumerate()
            .for_each(|(p, ((xs, vs), (ss, als)))| body(p, xs, vs, ss, als));
    }

    Ok(ParticleTrajectoryTape {
        config: config.clone(),
        seed,
        first_index: initial.first_index,
        n,
        x,
        v,
        scattered,
        alpha,
    })
}

/// ρ/N Σ r(x_n^M, v_n^M).
pub fn objective_final<T: Real>(tape: &ParticleTrajectoryTape<T>, r: impl Fn(f64, f64) -> f64) -> f64 {
    // Welford's running mean returns a constant payoff exactly.
    let stats: RunningStats = (0..tape.n)
        .map(|n| {
            let (x, v) = tape.final_state(n);
            r(x.wide(), v.wide())
        })
        .collect();
    tape.config.mass * stats.mean()
}
