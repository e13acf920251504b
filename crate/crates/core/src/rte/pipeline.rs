use std::time::Instant;

use super::{
    run_forward, sample_initial_block, AdjointWeights, DtoAccumulator, GradientGrid, OtdAccumulator,
    ParticleTrajectoryTape, RteConfig, SigmaField, SpatialMixture,
};
use crate::error::{ensure, Result};
use crate::grid::BinEdges;
use crate::rng::StreamKey;
use crate::scalar::Real;
use crate::stats::RunningStats;

/// Particles simulated per tape when a run is streamed in blocks.
pub const DEFAULT_BLOCK: usize = 1 << 16;

/// Runs `config.n_particles` particles in consecutive blocks of at most
/// `block_size`, handing each block's tape to `visit` in order. Streams are
/// keyed by global particle index, so the union of the blocks is the same
/// ensemble a single tape would hold.
pub fn for_each_block<T: Real>(
    config: &RteConfig,
    sigma: &SigmaField<T>,
    f0: &SpatialMixture,
    key: StreamKey,
    block_size: usize,
    mut visit: impl FnMut(&ParticleTrajectoryTape<T>) -> Result<()>,
) -> Result<()> {
    ensure!(block_size >= 1, Argument, "block size must be positive");
    let n = config.n_particles;
    let mut first = 0;
    while first < n {
        let count = block_size.min(n - first);
        let init = sample_initial_block(config, f0, key, first as u64, count)?;
        let tape = run_forward(config, sigma, &init, key)?;
        visit(&tape)?;
        first += count;
    }
    Ok(())
}

/// Both particle gradients and the objective from one forward ensemble.
#[derive(Debug, Clone)]
pub struct ParticleGradients {
    pub objective: f64,
    pub objective_std_err: f64,
    pub p_otd: GradientGrid,
    pub p_dto: GradientGrid,
    pub forward_seconds: f64,
    pub gradient_seconds: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn particle_gradients<T: Real>(
    config: &RteConfig,
    sigma: &SigmaField<T>,
    f0: &SpatialMixture,
    r: impl Fn(f64, f64) -> f64 + Copy,
    key: StreamKey,
    bins: &BinEdges,
    v_bins: usize,
    block_size: usize,
) -> Result<ParticleGradients> {
    let mut otd = OtdAccumulator::new(bins.clone(), config, v_bins)?;
    let mut dto = DtoAccumulator::new(bins.clone(), config);
    let mut objective = RunningStats::new();
    let mut gradient_seconds = 0.0;
    let start = Instant::now();
    for_each_block(config, sigma, f0, key, block_size, |tape| {
        let t = Instant::now();
        let w = AdjointWeights::from_payoff(tape, r);
        for &psi in &w.psi {
            objective.push(-psi);
        }
        otd.add(tape, &w)?;
        dto.add(tape, r)?;
        gradient_seconds += t.elapsed().as_secs_f64();
        Ok(())
    })?;
    let total = start.elapsed().as_secs_f64();
    Ok(ParticleGradients {
        objective: config.mass * objective.mean(),
        objective_std_err: config.mass * objective.std_err(),
        p_otd: otd.finish(),
        p_dto: dto.finish(),
        forward_seconds: total - gradient_seconds,
        gradient_seconds,
    })
}
