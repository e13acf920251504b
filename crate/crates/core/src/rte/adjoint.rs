use super::{ParticleTrajectoryTape, RteConfig};
use crate::error::{ensure, Error, Result};
use crate::grid::BinEdges;
use crate::scalar::Real;
use crate::stats::RunningStats;

/// Velocity bins of the λ cell-average reconstruction used by P-OTD.
pub const DEFAULT_V_BINS: usize = 20;

/// A binned functional gradient with optional per-bin standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientGrid {
    pub bins: BinEdges,
    pub values: Vec<f64>,
    pub std_err: Option<Vec<f64>>,
    /// Bins that no particle visited at any step.
    pub empty: Vec<bool>,
}

impl GradientGrid {
    pub fn new(bins: BinEdges, values: Vec<f64>) -> Result<Self> {
        ensure!(values.len() == bins.len(), Argument, "{} values for {} bins", values.len(), bins.len());
        let empty = vec![false; values.len()];
        Ok(Self { bins, values, std_err: None, empty })
    }

    pub fn zeros(bins: BinEdges) -> Self {
        let n = bins.len();
        Self { bins, values: vec![0.0; n], std_err: None, empty: vec![false; n] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.bins.centers()
    }

    /// sqrt(Σ_j (a_j - b_j)² |Q_j|); the grids must share bins.
    pub fn l2_distance(&self, other: &GradientGrid) -> Result<f64> {
        ensure!(self.bins == other.bins, Argument, "gradient grids have different bins");
        let s: f64 = (0..self.len())
            .map(|j| (self.values[j] - other.values[j]).powi(2) * self.bins.width(j))
            .sum();
        Ok(s.sqrt())
    }

    pub fn l2_norm(&self) -> f64 {
        (0..self.len())
            .map(|j| self.values[j].powi(2) * self.bins.width(j))
            .sum::<f64>()
            .sqrt()
    }

    /// ||self - reference|| / ||reference||.
    pub fn relative_l2(&self, reference: &GradientGrid) -> Result<f64> {
        Ok(self.l2_distance(reference)? / reference.l2_norm())
    }

    /// Overlap-weighted average onto `target` bins (used to compare a fine
    /// grid gradient with a coarse one). Standard errors are dropped.
    pub fn rebin(&self, target: &BinEdges) -> GradientGrid {
        let values = self.bins.rebin(&self.values, target);
        GradientGrid { bins: target.clone(), empty: vec![false; values.len()], values, std_err: None }
    }

    /// Per-bin mean over repeated runs with the standard error of that mean.
    pub fn average(runs: &[GradientGrid]) -> Result<GradientGrid> {
        ensure!(!runs.is_empty(), Argument, "no runs to average");
        let bins = runs[0].bins.clone();
        ensure!(runs.iter().all(|g| g.bins == bins), Argument, "runs have different bins");
        let n = bins.len();
        let stats: Vec<RunningStats> = (0..n).map(|j| runs.iter().map(|g| g.values[j]).collect()).collect();
        Ok(GradientGrid {
            values: stats.iter().map(RunningStats::mean).collect(),
            std_err: if runs.len() > 1 { Some(stats.iter().map(RunningStats::std_err).collect()) } else { None },
            empty: (0..n).map(|j| runs.iter().all(|g| g.empty[j])).collect(),
            bins,
        })
    }
}

/// Terminal adjoint weights ψ_n = -(δJ/δf)(T, x_n^M, v_n^M).
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointWeights {
    pub psi: Vec<f64>,
}

impl AdjointWeights {
    /// ψ_n = -r(x_n^M, v_n^M) for the objective ∫∫ r f.
    pub fn from_payoff<T: Real>(tape: &ParticleTrajectoryTape<T>, r: impl Fn(f64, f64) -> f64) -> Self {
        let psi = (0..tape.n_particles())
            .map(|n| {
                let (x, v) = tape.final_state(n);
                -r(x.wide(), v.wide())
            })
            .collect();
        Self { psi }
    }

    pub fn from_values(psi: Vec<f64>) -> Result<Self> {
        ensure!(psi.iter().all(|p| p.is_finite()), Argument, "adjoint weights must be finite");
        Ok(Self { psi })
    }
}

fn check_compatible(config: &RteConfig, other: &RteConfig) -> Result<()> {
    ensure!(
        config.steps == other.steps
            && config.dt == other.dt
            && config.v_lo == other.v_lo
            && config.v_hi == other.v_hi
            && config.mass == other.mass,
        Argument,
        "tape was recorded with a different time grid or velocity domain"
    );
    Ok(())
}

/// Streaming P-OTD estimator. Tapes of disjoint particle blocks can be added
/// one at a time (or to separate accumulators that are merged afterwards).
///
/// Term ⟨λf⟩_v comes from the weighted empirical measure. Term ⟨λ⟩_v uses a
/// piecewise-constant reconstruction of λ on (x-bin × v-bin) cells from the
/// particles' weights; empty cells borrow the average of the nearest filled
/// velocity neighbours in the same x-bin.
#[derive(Debug, Clone)]
pub struct OtdAccumulator {
    bins: BinEdges,
    config: RteConfig,
    v_bins: usize,
    n_particles: u64,
    count: Vec<u64>,
    psi_sum: Vec<f64>,
    cell_count: Vec<u64>,
    cell_sum: Vec<f64>,
}

impl OtdAccumulator {
    pub fn new(bins: BinEdges, config: &RteConfig, v_bins: usize) -> Result<Self> {
        ensure!(v_bins >= 1, Argument, "v_bins must be at least 1");
        let slots = config.steps * bins.len();
        Ok(Self {
            v_bins,
            config: config.clone(),
            n_particles: 0,
            count: vec![0; slots],
            psi_sum: vec![0.0; slots],
            cell_count: vec![0; slots * v_bins],
            cell_sum: vec![0.0; slots * v_bins],
            bins,
        })
    }

    pub fn add<T: Real>(&mut self, tape: &ParticleTrajectoryTape<T>, weights: &AdjointWeights) -> Result<()> {
        check_compatible(&self.config, tape.config())?;
        ensure!(
            weights.psi.len() == tape.n_particles(),
            Argument,
            "{} weights for {} particles",
            weights.psi.len(),
            tape.n_particles()
        );
        let nb = self.bins.len();
        let kb = self.v_bins;
        let (v_lo, omega) = (self.config.v_lo, self.config.omega());
        for (n, &psi) in weights.psi.iter().enumerate() {
            for m in 1..=tape.steps() {
                let Some(j) = self.bins.locate(tape.position(n, m).wide()) else { continue };
                let slot = (m - 1) * nb + j;
                self.count[slot] += 1;
                self.psi_sum[slot] += psi;
                let u = (tape.velocity(n, m).wide() - v_lo) / omega;
                let k = ((u * kb as f64).max(0.0) as usize).min(kb - 1);
                self.cell_count[slot * kb + k] += 1;
                self.cell_sum[slot * kb + k] += psi;
            }
        }
        self.n_particles += tape.n_particles() as u64;
        Ok(())
    }

    pub fn merge(&mut self, other: &OtdAccumulator) -> Result<()> {
        ensure!(
            self.bins == other.bins && self.v_bins == other.v_bins,
            Argument,
            "accumulators use different grids"
        );
        check_compatible(&self.config, &other.config)?;
        self.n_particles += other.n_particles;
        for (a, b) in self.count.iter_mut().zip(&other.count) {
            *a += b;
        }
        for (a, b) in self.psi_sum.iter_mut().zip(&other.psi_sum) {
            *a += b;
        }
        for (a, b) in self.cell_count.iter_mut().zip(&other.cell_count) {
            *a += b;
        }
        for (a, b) in self.cell_sum.iter_mut().zip(&other.cell_sum) {
            *a += b;
        }
        Ok(())
    }

    pub fn n_particles(&self) -> u64 {
        self.n_particles
    }

    /// Mean over velocity cells of the reconstructed λ in one (step, x-bin) slot.
    fn lambda_v_mean(&self, slot: usize) -> f64 {
        let kb = self.v_bins;
        let cnt = &self.cell_count[slot * kb..(slot + 1) * kb];
        let sum = &self.cell_sum[slot * kb..(slot + 1) * kb];
        let avg = |k: usize| sum[k] / cnt[k] as f64;
        let mut total = 0.0;
        for k in 0..kb {
            total += if cnt[k] > 0 {
                avg(k)
            } else {
                let left = (0..k).rev().find(|&i| cnt[i] > 0);
                let right = (k + 1..kb).find(|&i| cnt[i] > 0);
                match (left, right) {
                    (Some(l), Some(r)) => 0.5 * (avg(l) + avg(r)),
                    (Some(l), None) => avg(l),
                    (None, Some(r)) => avg(r),
                    (None, None) => 0.0,
                }
            };
        }
        total / kb as f64
    }

    pub fn finish(&self) -> GradientGrid {
        let nb = self.bins.len();
        let mut grid = GradientGrid::zeros(self.bins.clone());
        if self.n_particles == 0 {
            grid.empty = vec![true; nb];
            return grid;
        }
        let scale = self.config.mass * self.config.dt / self.n_particles as f64;
        for j in 0..nb {
            let mut acc = 0.0;
            let mut visited = false;
            for m in 0..self.config.steps {
                let slot = m * nb + j;
                if self.count[slot] == 0 {
                    continue;
                }
                visited = true;
                acc += self.psi_sum[slot] - self.count[slot] as f64 * self.lambda_v_mean(slot);
            }
            grid.values[j] = scale * acc / self.bins.width(j);
            grid.empty[j] = !visited;
        }
        grid
    }
}

/// P-OTD gradient of a single tape.
pub fn p_otd_gradient<T: Real>(
    tape: &ParticleTrajectoryTape<T>,
    weights: &AdjointWeights,
    bins: &BinEdges,
    v_bins: usize,
) -> Result<GradientGrid> {
    let mut acc = OtdAccumulator::new(bins.clone(), tape.config(), v_bins)?;
    acc.add(tape, weights)?;
    Ok(acc.finish())
}

/// Streaming P-DTO (score-function) estimator with per-bin standard errors
/// from the per-particle contributions.
#[derive(Debug, Clone)]
pub struct DtoAccumulator {
    bins: BinEdges,
    config: RteConfig,
    n_particles: u64,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    visited: Vec<bool>,
}

impl DtoAccumulator {
    pub fn new(bins: BinEdges, config: &RteConfig) -> Self {
        let n = bins.len();
        Self {
            bins,
            config: config.clone(),
            n_particles: 0,
            sum: vec![0.0; n],
            sum_sq: vec![0.0; n],
            visited: vec![false; n],
        }
    }

    pub fn add<T: Real>(&mut self, tape: &ParticleTrajectoryTape<T>, r: impl Fn(f64, f64) -> f64) -> Result<()> {
        check_compatible(&self.config, tape.config())?;
        let mut touched: Vec<(usize, f64)> = Vec::with_capacity(tape.steps());
        for n in 0..tape.n_particles() {
            touched.clear();
            for m in 1..=tape.steps() {
                let Some(j) = self.bins.locate(tape.position(n, m).wide()) else { continue };
                let xi = if tape.scattered(n, m) {
                    let a = tape.alpha(n, m).wide();
                    if !(a < 1.0) {
                        return Err(Error::TapeCorruption(format!(
                            "particle {n} scattered at step {m} with acceptance probability {a}"
                        )));
                    }
                    a / (1.0 - a)
                } else {
                    -1.0
                };
                match touched.last_mut() {
                    Some((last, s)) if *last == j => *s += xi,
                    _ => touched.push((j, xi)),
                }
            }
            if touched.is_empty() {
                continue;
            }
            let (x, v) = tape.final_state(n);
            let rn = r(x.wide(), v.wide());
            touched.sort_by_key(|&(j, _)| j);
            let mut i = 0;
            while i < touched.len() {
                let j = touched[i].0;
                let mut c = 0.0;
                while i < touched.len() && touched[i].0 == j {
                    c += touched[i].1;
                    i += 1;
                }
                let y = rn * c;
                self.sum[j] += y;
                self.sum_sq[j] += y * y;
                self.visited[j] = true;
            }
        }
        self.n_particles += tape.n_particles() as u64;
        Ok(())
    }

    pub fn merge(&mut self, other: &DtoAccumulator) -> Result<()> {
        ensure!(self.bins == other.bins, Argument, "accumulators use different grids");
        check_compatible(&self.config, &other.config)?;
        self.n_particles += other.n_particles;
        for j in 0..self.sum.len() {
            self.sum[j] += other.sum[j];
            self.sum_sq[j] += other.sum_sq[j];
            self.visited[j] |= other.visited[j];
        }
        Ok(())
    }

    pub fn n_particles(&self) -> u64 {
        self.n_particles
    }

    pub fn finish(&self) -> GradientGrid {
        let nb = self.bins.len();
        let mut grid = GradientGrid::zeros(self.bins.clone());
        grid.empty = self.visited.iter().map(|v| !v).collect();
        let n = self.n_particles as f64;
        if self.n_particles == 0 {
            grid.std_err = Some(vec![0.0; nb]);
            return grid;
        }
        let mut se = vec![0.0; nb];
        for j in 0..nb {
            let scale = self.config.mass * self.config.dt / self.bins.width(j);
            let mean = self.sum[j] / n;
            grid.values[j] = scale * mean;
            if self.n_particles > 1 {
                let var = ((self.sum_sq[j] / n - mean * mean) * n / (n - 1.0)).max(0.0);
                se[j] = scale * (var / n).sqrt();
            }
        }
        grid.std_err = Some(se);
        grid
    }
}

/// P-DTO gradient of a single tape.
pub fn p_dto_gradient<T: Real>(
    tape: &ParticleTrajectoryTape<T>,
    r: impl Fn(f64, f64) -> f64,
    bins: &BinEdges,
) -> Result<GradientGrid> {
    let mut acc = DtoAccumulator::new(bins.clone(), tape.config());
    acc.add(tape, r)?;
    Ok(acc.finish())
}
