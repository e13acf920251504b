//! One-dimensional linear radiative transfer: particle forward solver,
//! particle adjoint gradients and a finite-volume reference.

mod adjoint;
mod forward;
pub mod fvm;
mod io;
mod pipeline;

use crate::error::{ensure, Result};
use crate::grid::BinEdges;
use crate::scalar::Real;

pub use adjoint::{
    p_dto_gradient, p_otd_gradient, AdjointWeights, DtoAccumulator, GradientGrid, OtdAccumulator,
    DEFAULT_V_BINS,
};
pub use forward::{
    objective_final, run_forward, sample_initial, sample_initial_block, InitialParticles,
    ParticleTrajectoryTape,
};
pub use io::{read_tape, write_final_marginals_csv, write_tape};
pub use pipeline::{for_each_block, particle_gradients, ParticleGradients, DEFAULT_BLOCK};

/// Phase-space window, horizon and ensemble size of an RTE run.
#[derive(Debug, Clone, PartialEq)]
pub struct RteConfig {
    pub x_lo: f64,
    pub x_hi: f64,
    pub v_lo: f64,
    pub v_hi: f64,
    pub steps: usize,
    pub dt: f64,
    pub n_particles: usize,
    pub mass: f64,
}

impl RteConfig {
    /// Builds a config from the final time; `dt = t_final / steps`.
    pub fn new(
        domain: (f64, f64),
        velocity: (f64, f64),
        t_final: f64,
        steps: usize,
        n_particles: usize,
    ) -> Result<Self> {
        let dt = if steps == 0 { 0.0 } else { t_final / steps as f64 };
        let cfg = Self {
            x_lo: domain.0,
            x_hi: domain.1,
            v_lo: velocity.0,
            v_hi: velocity.1,
            steps,
            dt,
            n_particles,
            mass: 1.0,
        };
        ensure!(
            steps > 0 || t_final == 0.0,
            Argument,
            "zero steps requires a zero horizon"
        );
        cfg.validate()?;
        Ok(cfg)
    }

    /// The benchmark window: x in [-2, 2], v in [-1, 1].
    pub fn standard(t_final: f64, steps: usize, n_particles: usize) -> Result<Self> {
        Self::new((-2.0, 2.0), (-1.0, 1.0), t_final, steps, n_particles)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.n_particles >= 1, Argument, "need at least one particle");
        ensure!(
            self.x_lo.is_finite() && self.x_hi.is_finite() && self.x_lo < self.x_hi,
            Argument,
            "invalid spatial domain [{}, {}]",
            self.x_lo,
            self.x_hi
        );
        ensure!(
            self.v_lo.is_finite() && self.v_hi.is_finite() && self.v_lo < self.v_hi,
            Argument,
            "invalid velocity domain [{}, {}]",
            self.v_lo,
            self.v_hi
        );
        ensure!(self.dt.is_finite() && self.dt >= 0.0, Argument, "invalid time step {}", self.dt);
        ensure!(self.mass > 0.0 && self.mass.is_finite(), Argument, "mass must be positive");
        Ok(())
    }

    pub fn t_final(&self) -> f64 {
        self.dt * self.steps as f64
    }

    /// |Ω|, the length of the velocity interval.
    pub fn omega(&self) -> f64 {
        self.v_hi - self.v_lo
    }

    pub fn with_particles(&self, n: usize) -> Self {
        Self { n_particles: n, ..self.clone() }
    }
}

/// Piecewise-constant σ(x) on a uniform grid; evaluation clamps outside.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaField<T> {
    edges: BinEdges,
    values: Vec<T>,
}

impl<T: Real> SigmaField<T> {
    pub fn new(lo: f64, hi: f64, values: Vec<T>) -> Result<Self> {
        let edges = BinEdges::uniform(lo, hi, values.len().max(1))?;
        ensure!(!values.is_empty(), Argument, "sigma field needs at least one cell");
        ensure!(
            values.iter().all(|s| s.is_finite() && *s >= T::zero()),
            Argument,
            "sigma values must be finite and nonnegative"
        );
        Ok(Self { edges, values })
    }

    pub fn constant(lo: f64, hi: f64, value: f64) -> Result<Self> {
        Self::new(lo, hi, vec![T::lit(value)])
    }

    /// Samples `f` at the centers of `n` equal cells.
    pub fn from_fn(lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let edges = BinEdges::uniform(lo, hi, n)?;
        Self::new(lo, hi, edges.centers().into_iter().map(|x| T::lit(f(x))).collect())
    }

    /// The benchmark field 2 + 2 exp(-4x²) on `n` cells of [-2, 2].
    pub fn benchmark(n: usize) -> Result<Self> {
        Self::from_fn(-2.0, 2.0, n, |x| 2.0 + 2.0 * (-4.0 * x * x).exp())
    }

    #[inline]
    pub fn eval(&self, x: T) -> T {
        self.values[self.edges.locate_clamped(x.wide())]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn edges(&self) -> &BinEdges {
        &self.edges
    }

    /// σ evaluated at each given point.
    pub fn sample_at(&self, xs: &[f64]) -> Vec<T> {
        xs.iter().map(|&x| self.values[self.edges.locate_clamped(x)]).collect()
    }

    /// Copy with cell `i` replaced by `value`.
    pub fn with_cell(&self, i: usize, value: T) -> Self {
        let mut out = self.clone();
        out.values[i] = value;
        out
    }
}

/// One term `amplitude * exp(-rate (x - center)²)` of a spatial mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBump {
    pub amplitude: f64,
    pub center: f64,
    pub rate: f64,
}

impl GaussianBump {
    pub fn mass(&self) -> f64 {
        self.amplitude * (std::f64::consts::PI / self.rate).sqrt()
    }

    pub fn std_dev(&self) -> f64 {
        (0.5 / self.rate).sqrt()
    }
}

/// Initial density f0(x, v) = g(x) / |Ω| with g a normalized sum of Gaussians.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialMixture {
    bumps: Vec<GaussianBump>,
    cumulative: Vec<f64>,
    total: f64,
}

impl SpatialMixture {
    pub fn new(bumps: Vec<GaussianBump>) -> Result<Self> {
        ensure!(!bumps.is_empty(), Argument, "initial density needs at least one component");
        for b in &bumps {
            ensure!(
                b.amplitude.is_finite() && b.amplitude >= 0.0,
                Argument,
                "component amplitude must be finite and nonnegative"
            );
            ensure!(
                b.rate.is_finite() && b.rate > 0.0,
                Argument,
                "component rate must be positive (got {})",
                b.rate
            );
            ensure!(b.center.is_finite(), Argument, "component center must be finite");
        }
        let mut cumulative = Vec::with_capacity(bumps.len());
        let mut total = 0.0;
        for b in &bumps {
            total += b.mass();
            cumulative.push(total);
        }
        ensure!(
            total > 0.0 && total.is_finite(),
            Argument,
            "initial density is not normalizable"
        );
        Ok(Self { bumps, cumulative, total })
    }

    /// (e^{-4(x-0.5)²} + e^{-4(x+0.5)²}) / √π, which already has unit mass.
    pub fn two_bumps() -> Self {
        let a = 1.0 / std::f64::consts::PI.sqrt();
        Self::new(vec![
            GaussianBump { amplitude: a, center: 0.5, rate: 4.0 },
            GaussianBump { amplitude: a, center: -0.5, rate: 4.0 },
        ])
        .expect("static mixture is valid")
    }

    pub fn components(&self) -> &[GaussianBump] {
        &self.bumps
    }

    /// Unnormalized mass of the given amplitudes.
    pub fn raw_mass(&self) -> f64 {
        self.total
    }

    /// Normalized spatial density g(x).
    pub fn density(&self, x: f64) -> f64 {
        self.bumps
            .iter()
            .map(|b| b.amplitude * (-b.rate * (x - b.center).powi(2)).exp())
            .sum::<f64>()
            / self.total
    }

    /// Component selected by a uniform draw in [0, 1).
    pub(crate) fn pick(&self, u: f64) -> &GaussianBump {
        let target = u * self.total;
        let k = self.cumulative.partition_point(|&c| c <= target);
        &self.bumps[k.min(self.bumps.len() - 1)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_invariants() {
        let c = RteConfig::standard(0.5, 50, 10).unwrap();
        assert!((c.dt - 0.01).abs() < 1e-15);
        assert!((c.t_final() - 0.5).abs() < 1e-14);
        assert_eq!(c.omega(), 2.0);
        assert!(RteConfig::standard(0.5, 50, 0).is_err());
        assert!(RteConfig::new((-1.0, 1.0), (1.0, -1.0), 0.5, 5, 3).is_err());
        assert!(RteConfig::standard(0.5, 0, 3).is_err());
        assert_eq!(RteConfig::standard(0.0, 0, 3).unwrap().steps, 0);
    }

    #[test]
    fn sigma_eval_clamps() {
        let s = SigmaField::<f64>::new(-2.0, 2.0, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.eval(-1.5), 1.0);
        assert_eq!(s.eval(-0.5), 2.0);
        assert_eq!(s.eval(1.99), 4.0);
        assert_eq!(s.eval(-7.0), 1.0);
        assert_eq!(s.eval(7.0), 4.0);
        assert!(SigmaField::<f64>::new(-2.0, 2.0, vec![1.0, -1.0]).is_err());
    }

    #[test]
    fn benchmark_sigma_peaks_at_origin() {
        let s = SigmaField::<f64>::benchmark(80).unwrap();
        assert_eq!(s.values().len(), 80);
        let peak = s.eval(0.01);
        assert!((peak - (2.0 + 2.0 * (-4.0f64 * 0.025 * 0.025).exp())).abs() < 1e-14);
    }

    #[test]
    fn two_bumps_is_normalized() {
        let m = SpatialMixture::two_bumps();
        assert!((m.raw_mass() - 1.0).abs() < 1e-14);
        // midpoint quadrature of the density over a wide window
        let h = 1e-3;
        let q: f64 = (0..8000).map(|i| m.density(-4.0 + (i as f64 + 0.5) * h) * h).sum();
        assert!((q - 1.0).abs() < 1e-10);
    }

    #[test]
    fn non_normalizable_mixtures_rejected() {
        let zero = GaussianBump { amplitude: 0.0, center: 0.0, rate: 1.0 };
        assert!(SpatialMixture::new(vec![zero]).is_err());
        let flat = GaussianBump { amplitude: 1.0, center: 0.0, rate: 0.0 };
        assert!(SpatialMixture::new(vec![flat]).is_err());
        assert!(SpatialMixture::new(vec![]).is_err());
    }
}
