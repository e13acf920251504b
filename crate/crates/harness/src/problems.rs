//! Concrete problems built from configuration sections.

use std::time::Instant;

use adjmc::dsmc::{CollisionKernel, DiagonalGaussianIc, DsmcProblem, KernelKind, Maxwellian, SpeedSquared, Vec3, VelocityObservable, Vhs, VxFourth};
use adjmc::rte::fvm::{fvm_reference, FvmGrid};
use adjmc::rte::{particle_gradients, GradientGrid, ParticleGradients, RteConfig, SigmaField, SpatialMixture};
use adjmc::{BinEdges, Real, StreamKey};
use anyhow::Result;

use crate::config::{DsmcSection, KernelChoice, ObservableChoice, RteSection};

/// σ(x) = 2 + 2e^{−4x²}.
pub fn benchmark_sigma(x: f64) -> f64 {
    2.0 + 2.0 * (-4.0 * x * x).exp()
}

/// r(x, v) = v² on x < 0, zero elsewhere.
pub fn benchmark_payoff(x: f64, v: f64) -> f64 {
    if x < 0.0 {
        v * v
    } else {
        0.0
    }
}

/// The RTE gradient benchmark at the sizes of an [`RteSection`].
#[derive(Debug, Clone)]
pub struct RteProblem {
    pub config: RteConfig,
    pub sigma: SigmaField<f64>,
    pub f0: SpatialMixture,
    /// Gradient bins; identical to the cells of σ.
    pub bins: BinEdges,
    pub v_bins: usize,
    pub block: usize,
}

impl RteProblem {
    pub fn new(s: &RteSection) -> Result<Self> {
        let config = RteConfig::new((s.x_lo, s.x_hi), (s.v_lo, s.v_hi), s.t_final, s.steps, s.n_particles)?;
        let sigma = SigmaField::from_fn(s.x_lo, s.x_hi, s.sigma_cells, benchmark_sigma)?;
        let bins = sigma.edges().clone();
        Ok(Self { config, sigma, f0: SpatialMixture::two_bumps(), bins, v_bins: s.v_bins, block: s.block })
    }

    pub fn with_particles(&self, n: usize) -> Self {
        Self { config: self.config.with_particles(n), ..self.clone() }
    }

    /// Both particle gradients from one ensemble.
    pub fn particle_run(&self, key: StreamKey) -> Result<ParticleGradients> {
        Ok(particle_gradients(
            &self.config,
            &self.sigma,
            &self.f0,
            benchmark_payoff,
            key,
            &self.bins,
            self.v_bins,
            self.block,
        )?)
    }

    pub fn fvm_grid(&self, nx: usize, nv: usize, steps: usize) -> Result<FvmGrid> {
        let c = &self.config;
        Ok(FvmGrid::new((c.x_lo, c.x_hi), nx, (c.v_lo, c.v_hi), nv, c.t_final(), steps)?)
    }

    /// FVM gradient on an `nx × nv` grid, averaged onto the gradient bins.
    pub fn fvm_gradient(&self, nx: usize, nv: usize, steps: usize) -> Result<GradientGrid> {
        let grid = self.fvm_grid(nx, nv, steps)?;
        let width = self.config.v_hi - self.config.v_lo;
        let f0 = |x: f64, _| self.f0.density(x) / width;
        Ok(fvm_reference(&grid, &self.sigma, f0, benchmark_payoff)?.rebin(&self.bins))
    }
}

/// Runtime choice between the shipped kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnyKernel {
    Maxwellian(Maxwellian),
    Vhs(Vhs),
}

impl AnyKernel {
    pub fn from_section(d: &DsmcSection) -> Result<Self> {
        Ok(match d.kernel {
            KernelChoice::Maxwellian => Self::Maxwellian(Maxwellian),
            KernelChoice::Vhs => Self::Vhs(Vhs::new(d.vhs_c, d.vhs_beta)?),
        })
    }
}

impl<T: Real> CollisionKernel<T> for AnyKernel {
    fn evaluate(&self, g: Vec3<T>, sigma: Vec3<T>) -> T {
        match self {
            Self::Maxwellian(k) => k.evaluate(g, sigma),
            Self::Vhs(k) => k.evaluate(g, sigma),
        }
    }

    fn gradient(&self, g: Vec3<T>, sigma: Vec3<T>) -> Vec3<T> {
        match self {
            Self::Maxwellian(k) => k.gradient(g, sigma),
            Self::Vhs(k) => k.gradient(g, sigma),
        }
    }

    fn bound(&self, max_rel_speed: T) -> T {
        match self {
            Self::Maxwellian(k) => k.bound(max_rel_speed),
            Self::Vhs(k) => k.bound(max_rel_speed),
        }
    }

    fn has_fixed_bound(&self) -> bool {
        match self {
            Self::Maxwellian(k) => CollisionKernel::<T>::has_fixed_bound(k),
            Self::Vhs(k) => CollisionKernel::<T>::has_fixed_bound(k),
        }
    }

    fn kind(&self) -> KernelKind {
        match self {
            Self::Maxwellian(k) => CollisionKernel::<T>::kind(k),
            Self::Vhs(k) => CollisionKernel::<T>::kind(k),
        }
    }
}

pub fn observable(choice: ObservableChoice) -> &'static dyn VelocityObservable<f64> {
    match choice {
        ObservableChoice::Vx4 => &VxFourth,
        ObservableChoice::Speed2 => &SpeedSquared,
    }
}

pub type GasProblem = DsmcProblem<AnyKernel, DiagonalGaussianIc>;

pub fn gas_problem(d: &DsmcSection) -> Result<GasProblem> {
    Ok(DsmcProblem::new(AnyKernel::from_section(d)?, DiagonalGaussianIc, d.n_particles, d.dt, d.steps()))
}

/// Runs `f` and returns its result with the elapsed seconds.
pub fn timed<R>(f: impl FnOnce() -> R) -> (R, f64) {
    let t = Instant::now();
    let r = f();
    (r, t.elapsed().as_secs_f64())
}
