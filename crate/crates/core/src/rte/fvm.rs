//! Explicit upwind finite-volume solver, its exact discrete adjoint and the
//! resulting σ-gradient.

use super::adjoint::GradientGrid;
use super::SigmaField;
use crate::error::{ensure, Result};
use crate::grid::BinEdges;
use crate::scalar::Real;
use crate::stats::RunningStats;

/// Treatment of the two spatial ends of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    /// Ghost cells hold zero: no inflow, free outflow.
    #[default]
    Outflow,
    Periodic,
}

/// Tensor grid in (x, v) plus the time step.
#[derive(Debug, Clone, PartialEq)]
pub struct FvmGrid {
    pub x_lo: f64,
    pub x_hi: f64,
    pub nx: usize,
    pub v_lo: f64,
    pub v_hi: f64,
    pub nv: usize,
    pub dt: f64,
    pub steps: usize,
    pub boundary: Boundary,
}

impl FvmGrid {
    pub fn new(domain: (f64, f64), nx: usize, velocity: (f64, f64), nv: usize, t_final: f64, steps: usize) -> Result<Self> {
        let dt = if steps == 0 { 0.0 } else { t_final / steps as f64 };
        let g = Self {
            x_lo: domain.0,
            x_hi: domain.1,
            nx,
            v_lo: velocity.0,
            v_hi: velocity.1,
            nv,
            dt,
            steps,
            boundary: Boundary::Outflow,
        };
        g.check_shape()?;
        Ok(g)
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    fn check_shape(&self) -> Result<()> {
        ensure!(self.nx >= 1 && self.nv >= 1, Argument, "grid needs at least one cell per direction");
        ensure!(self.x_lo < self.x_hi, Argument, "invalid spatial domain");
        ensure!(self.v_lo < self.v_hi, Argument, "invalid velocity domain");
        ensure!(self.dt >= 0.0 && self.dt.is_finite(), Argument, "invalid time step");
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_hi - self.x_lo) / self.nx as f64
    }

    pub fn dv(&self) -> f64 {
        (self.v_hi - self.v_lo) / self.nv as f64
    }

    pub fn omega(&self) -> f64 {
        self.v_hi - self.v_lo
    }

    pub fn x_center(&self, i: usize) -> f64 {
        self.x_lo + (i as f64 + 0.5) * self.dx()
    }

    pub fn v_center(&self, j: usize) -> f64 {
        self.v_lo + (j as f64 + 0.5) * self.dv()
    }

    pub fn x_centers(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x_center(i)).collect()
    }

    pub fn x_bins(&self) -> BinEdges {
        BinEdges::uniform(self.x_lo, self.x_hi, self.nx).expect("validated grid")
    }

    /// max |v_j| Δt / Δx.
    pub fn cfl(&self) -> f64 {
        let vmax = (0..self.nv).map(|j| self.v_center(j).abs()).fold(0.0, f64::max);
        vmax * self.dt / self.dx()
    }

    pub fn validate(&self) -> Result<()> {
        self.check_shape()?;
        ensure!(self.cfl() <= 1.0 + 1e-12, Configuration, "CFL number {} exceeds 1", self.cfl());
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.nx * self.nv
    }
}

/// Values on every time level, `levels[m][i * nv + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField<T> {
    pub nx: usize,
    pub nv: usize,
    pub levels: Vec<Vec<T>>,
}

impl<T: Real> SpaceTimeField<T> {
    pub fn steps(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, m: usize) -> &[T] {
        &self.levels[m]
    }

    pub fn last(&self) -> &[T] {
        self.levels.last().expect("at least one level")
    }

    #[inline]
    pub fn at(&self, m: usize, i: usize, j: usize) -> T {
        self.levels[m][i * self.nv + j]
    }
}

/// Cell averages of `f0(x, v)` sampled at cell centers.
pub fn project<T: Real>(grid: &FvmGrid, f: impl Fn(f64, f64) -> f64) -> Vec<T> {
    let mut out = Vec::with_capacity(grid.cells());
    for i in 0..grid.nx {
        let x = grid.x_center(i);
        for j in 0..grid.nv {
            out.push(T::lit(f(x, grid.v_center(j))));
        }
    }
    out
}

/// λ^M = -r(x_i, v_j) for the objective Σ r f Δx Δv.
pub fn terminal_from_payoff<T: Real>(grid: &FvmGrid, r: impl Fn(f64, f64) -> f64) -> Vec<T> {
    project(grid, |x, v| -r(x, v))
}

/// Σ_ij r(x_i, v_j) f_ij Δx Δv.
pub fn discrete_objective<T: Real>(grid: &FvmGrid, f: &[T], r: impl Fn(f64, f64) -> f64) -> f64 {
    let mut s = 0.0;
    for i in 0..grid.nx {
        let x = grid.x_center(i);
        for j in 0..grid.nv {
            s += r(x, grid.v_center(j)) * f[i * grid.nv + j].wide();
        }
    }
    s * grid.dx() * grid.dv()
}

/// Σ_ij f_ij Δx Δv.
pub fn total_mass<T: Real>(grid: &FvmGrid, f: &[T]) -> f64 {
    f.iter().map(|x| x.wide()).sum::<f64>() * grid.dx() * grid.dv()
}

#[inline]
fn neighbours(grid: &FvmGrid, i: usize) -> (Option<usize>, Option<usize>) {
    let left = if i > 0 {
        Some(i - 1)
    } else if grid.boundary == Boundary::Periodic {
        Some(grid.nx - 1)
    } else {
        None
    };
    let right = if i + 1 < grid.nx {
        Some(i + 1)
    } else if grid.boundary == Boundary::Periodic {
        Some(0)
    } else {
        None
    };
    (left, right)
}

/// One explicit step:
/// f_i ← f_i − c[v⁺(f_i − f_{i−1}) + v⁻(f_{i+1} − f_i)] + σ_i Δt(⟨f⟩_i/|Ω| − f_i),
/// with c = Δt/Δx and ⟨f⟩_i = Σ_j f_ij Δv.
pub fn forward_step<T: Real>(grid: &FvmGrid, sigma: &[T], f: &[T], out: &mut [T]) {
    let nv = grid.nv;
    let c = T::lit(grid.dt / grid.dx());
    let dt = T::lit(grid.dt);
    let inv_nv = T::lit(1.0 / nv as f64);
    let zero = vec![T::zero(); nv];
    for i in 0..grid.nx {
        let (l, r) = neighbours(grid, i);
        let fi = &f[i * nv..(i + 1) * nv];
        let fl = l.map_or(&zero[..], |l| &f[l * nv..(l + 1) * nv]);
        let fr = r.map_or(&zero[..], |r| &f[r * nv..(r + 1) * nv]);
        // |Ω|⁻¹ Σ_j f_j Δv is the plain mean over velocity cells
        let avg = fi.iter().copied().sum::<T>() * inv_nv;
        let s = sigma[i] * dt;
        for j in 0..nv {
            let v = T::lit(grid.v_center(j));
            let flux = if v > T::zero() { v * (fi[j] - fl[j]) } else { v * (fr[j] - fi[j]) };
            out[i * nv + j] = fi[j] - c * flux + s * (avg - fi[j]);
        }
    }
}

/// Transpose of [`forward_step`] applied to λ^{m+1}:
/// λ_i ← λ_i + c[v⁺(λ_{i+1} − λ_i) + v⁻(λ_i − λ_{i−1})] + σ_i Δt(⟨λ⟩_i/|Ω| − λ_i).
pub fn adjoint_step<T: Real>(grid: &FvmGrid, sigma: &[T], lam: &[T], out: &mut [T]) {
    let nv = grid.nv;
    let c = T::lit(grid.dt / grid.dx());
    let dt = T::lit(grid.dt);
    let inv_nv = T::lit(1.0 / nv as f64);
    let zero = vec![T::zero(); nv];
    for i in 0..grid.nx {
        let (l, r) = neighbours(grid, i);
        let li = &lam[i * nv..(i + 1) * nv];
        let ll = l.map_or(&zero[..], |l| &lam[l * nv..(l + 1) * nv]);
        let lr = r.map_or(&zero[..], |r| &lam[r * nv..(r + 1) * nv]);
        let avg = li.iter().copied().sum::<T>() * inv_nv;
        let s = sigma[i] * dt;
        for j in 0..nv {
            let v = T::lit(grid.v_center(j));
            let flux = if v > T::zero() { v * (lr[j] - li[j]) } else { v * (li[j] - ll[j]) };
            out[i * nv + j] = li[j] + c * flux + s * (avg - li[j]);
        }
    }
}

fn sigma_cells<T: Real>(grid: &FvmGrid, sigma: &SigmaField<T>) -> Vec<T> {
    sigma.sample_at(&grid.x_centers())
}

fn check_len<T>(grid: &FvmGrid, data: &[T], what: &str) -> Result<()> {
    ensure!(
        data.len() == grid.cells(),
        Argument,
        "{what} has {} entries, grid has {} cells",
        data.len(),
        grid.cells()
    );
    Ok(())
}

pub fn fvm_forward<T: Real>(grid: &FvmGrid, sigma: &SigmaField<T>, f0: &[T]) -> Result<SpaceTimeField<T>> {
    grid.validate()?;
    check_len(grid, f0, "initial data")?;
    let s = sigma_cells(grid, sigma);
    let mut levels = Vec::with_capacity(grid.steps + 1);
    levels.push(f0.to_vec());
    for m in 0..grid.steps {
        let mut next = vec![T::zero(); grid.cells()];
        forward_step(grid, &s, &levels[m], &mut next);
        levels.push(next);
    }
    Ok(SpaceTimeField { nx: grid.nx, nv: grid.nv, levels })
}

pub fn fvm_adjoint<T: Real>(grid: &FvmGrid, sigma: &SigmaField<T>, terminal: &[T]) -> Result<SpaceTimeField<T>> {
    grid.validate()?;
    check_len(grid, terminal, "terminal condition")?;
    let s = sigma_cells(grid, sigma);
    let mut levels = vec![Vec::new(); grid.steps + 1];
    levels[grid.steps] = terminal.to_vec();
    for m in (0..grid.steps).rev() {
        let mut prev = vec![T::zero(); grid.cells()];
        adjoint_step(grid, &s, &levels[m + 1], &mut prev);
        levels[m] = prev;
    }
    Ok(SpaceTimeField { nx: grid.nx, nv: grid.nv, levels })
}

/// g_i = Σ_{m<M} Δt Σ_j f^m_ij Δv (λ^{m+1}_ij − mean_j λ^{m+1}_ij), the
/// derivative of the discrete objective with respect to σ_i divided by Δx.
pub fn fvm_gradient<T: Real>(f: &SpaceTimeField<T>, lambda: &SpaceTimeField<T>, grid: &FvmGrid) -> Result<GradientGrid> {
    ensure!(
        f.nx == grid.nx && f.nv == grid.nv && lambda.nx == grid.nx && lambda.nv == grid.nv,
        Argument,
        "field shapes do not match the grid"
    );
    ensure!(
        f.levels.len() == grid.steps + 1 && lambda.levels.len() == grid.steps + 1,
        Argument,
        "fields must hold {} time levels",
        grid.steps + 1
    );
    let nv = grid.nv;
    let mut g = vec![0.0; grid.nx];
    for m in 0..grid.steps {
        let fm = &f.levels[m];
        let lm = &lambda.levels[m + 1];
        for (i, gi) in g.iter_mut().enumerate() {
            let ls = &lm[i * nv..(i + 1) * nv];
            // running mean keeps a v-constant λ exactly cancelling
            let mean: RunningStats = ls.iter().map(|x| x.wide()).collect();
            let mean = mean.mean();
            let mut acc = 0.0;
            for j in 0..nv {
                acc += fm[i * nv + j].wide() * (ls[j].wide() - mean);
            }
            *gi += grid.dt * grid.dv() * acc;
        }
    }
    GradientGrid::new(grid.x_bins(), g)
}

/// Forward solve, adjoint solve and gradient for the objective Σ r f^M Δx Δv.
pub fn fvm_reference<T: Real>(
    grid: &FvmGrid,
    sigma: &SigmaField<T>,
    f0: impl Fn(f64, f64) -> f64,
    r: impl Fn(f64, f64) -> f64 + Copy,
) -> Result<GradientGrid> {
    let f = fvm_forward(grid, sigma, &project::<T>(grid, f0))?;
    let lam = fvm_adjoint(grid, sigma, &terminal_from_payoff::<T>(grid, r))?;
    fvm_gradient(&f, &lam, grid)
}
