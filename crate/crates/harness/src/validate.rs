//! Desk-sized invariant suite run by the `validate` subcommand.
#![allow(clippy::redundant_closure_call)]

use adjmc::dsmc::{
    adjoint_sweep, run_dsmc, run_dsmc_observed, sample_initial_condition, BoundPolicy, CollisionKernel, DiagonalGaussianIc,
    DsmcProblem, Maxwellian, Vhs, VxFourth,
};
use adjmc::mc_gradients::toy::GaussianMean;
use adjmc::mc_gradients::{coupled_fd_gradient, score_covariance, FdMode, FdOptions, FdScheme};
use adjmc::rng::{derive_seed, Purpose};
use adjmc::rte::fvm::{adjoint_step, discrete_objective, forward_step, fvm_forward, fvm_reference, project, FvmGrid};
use adjmc::rte::{run_forward, sample_initial, SigmaField};
use adjmc::stats::ks_uniform;
use adjmc::StreamKey;
use anyhow::Result;

use crate::problems::{benchmark_payoff, RteProblem};
use crate::config::RteSection;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.to_string(), passed, detail }
    }

    fn from_result(name: &str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((passed, detail)) => Self::new(name, passed, detail),
            Err(e) => Self::new(name, false, format!("error: {e:#}")),
        }
    }
}

/// Entrywise largest gap between the one-step forward matrix and the
/// transpose of the one-step adjoint matrix on `grid`.
pub fn transpose_gap(grid: &FvmGrid, sigma: &[f64]) -> f64 {
    let n = grid.cells();
    let column = |step: &dyn Fn(&[f64], &mut [f64]), k: usize| {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        let mut out = vec![0.0; n];
        step(&e, &mut out);
        out
    };
    let fwd: Vec<Vec<f64>> = (0..n).map(|k| column(&|f, o| forward_step(grid, sigma, f, o), k)).collect();
    let adj: Vec<Vec<f64>> = (0..n).map(|k| column(&|l, o| adjoint_step(grid, sigma, l, o), k)).collect();
    let mut gap = 0.0f64;
    for i in 0..n {
        for k in 0..n {
            // fwd[k][i] = F_{ik}, adj[i][k] = G_{ki}
            gap = gap.max((fwd[k][i] - adj[i][k]).abs());
        }
    }
    gap
}

/// Largest absolute gap between the FVM adjoint gradient and central
/// differences of the discrete objective in each σ cell.
pub fn fvm_fd_gap(grid: &FvmGrid, sigma: &SigmaField<f64>, h: f64) -> Result<f64> {
    let f0 = |x: f64, v: f64| (-3.0 * x * x).exp() * (1.2 + v);
    let grad = fvm_reference(grid, sigma, f0, benchmark_payoff)?;
    let init = project::<f64>(grid, f0);
    let mut gap = 0.0f64;
    for i in 0..sigma.values().len() {
        let j = |delta: f64| -> Result<f64> {
            let s = sigma.with_cell(i, sigma.values()[i] + delta);
            Ok(discrete_objective(grid, fvm_forward(grid, &s, &init)?.last(), benchmark_payoff))
        };
        let fd = (j(h)? - j(-h)?) / (2.0 * h) / grid.dx();
        gap = gap.max((fd - grad.values[i]).abs());
    }
    Ok(gap)
}

/// Worst relative drift of momentum and energy over every step of a run.
pub fn conservation_drift<K: CollisionKernel<f64>>(kernel: &K, n: usize, steps: usize, seed: u64) -> Result<f64> {
    let theta = [0.5, 1.0, 1.0];
    let key = StreamKey::new(seed, 0, 0);
    let (e0, _) = sample_initial_condition::<f64, _>(&DiagonalGaussianIc, &theta, n, key)?;
    let (p0, en0) = (e0.momentum(), e0.energy());
    let scale = en0.sqrt();
    let mut worst = 0.0f64;
    run_dsmc_observed(&e0, kernel, 0.1, steps, key, BoundPolicy::Auto, |_, e| {
        let p = e.momentum();
        for k in 0..3 {
            worst = worst.max((p[k] - p0[k]).abs() / scale);
        }
        worst = worst.max((e.energy() - en0).abs() / en0);
    })?;
    Ok(worst)
}

pub fn run_checks(seed: u64) -> Vec<Check> {
    let mut checks = Vec::new();

    checks.push(Check::from_result("rng_streams_are_keyed", (|| {
        let a = StreamKey::for_purpose(seed, Purpose::RteScatter, 7, 3);
        let same = a.block() == StreamKey::for_purpose(seed, Purpose::RteScatter, 7, 3).block();
        let distinct = a.block() != StreamKey::for_purpose(seed, Purpose::RteInitial, 7, 3).block()
            && a.block() != a.advance(1).block()
            && derive_seed(seed, 0) != derive_seed(seed, 1);
        Ok((same && distinct, format!("reproducible={same} distinct={distinct}")))
    })()));

    checks.push(Check::from_result("fvm_transpose", (|| {
        let grid = FvmGrid::new((-1.0, 1.0), 8, (-1.0, 1.0), 4, 0.2, 4)?;
        let sigma: Vec<f64> = (0..8).map(|i| 1.0 + 0.3 * i as f64).collect();
        let gap = transpose_gap(&grid, &sigma);
        Ok((gap <= 1e-13, format!("max entry gap {gap:.3e}")))
    })()));

    checks.push(Check::from_result("fvm_gradient_vs_differences", (|| {
        let grid = FvmGrid::new((-1.0, 1.0), 8, (-1.0, 1.0), 4, 0.5, 10)?;
        let sigma = SigmaField::from_fn(-1.0, 1.0, 8, |x| 1.0 + x * x)?;
        let gap = fvm_fd_gap(&grid, &sigma, 1e-5)?;
        Ok((gap <= 1e-6, format!("max abs gap {gap:.3e}")))
    })()));

    checks.push(Check::from_result("rte_tape_replays", (|| {
        let p = RteProblem::new(&RteSection { n_particles: 20_000, ..Default::default() })?;
        let key = StreamKey::new(seed, 0, 0);
        let tape = run_forward(&p.config, &p.sigma, &sample_initial(&p.config, &p.f0, key)?, key)?;
        let replay = tape.replay_positions();
        let v: Vec<f64> = (0..tape.n_particles()).map(|n| tape.final_state(n).1).collect();
        let ks = ks_uniform(&v, p.config.v_lo, p.config.v_hi) * (v.len() as f64).sqrt();
        Ok((replay && ks < 1.95, format!("replay={replay} scaled KS={ks:.3}")))
    })()));

    checks.push(Check::from_result("rte_conserved_payoff", (|| {
        let p = RteProblem::new(&RteSection { n_particles: 20_000, ..Default::default() })?;
        let g = adjmc::rte::particle_gradients(
            &p.config,
            &p.sigma,
            &p.f0,
            |_, _| 1.0,
            StreamKey::new(seed, 0, 0),
            &p.bins,
            p.v_bins,
            p.block,
        )?;
        let worst = g.p_otd.values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        Ok((worst < 1e-12, format!("max |P-OTD| {worst:.3e}")))
    })()));

    for (name, drift) in [
        ("dsmc_conservation_maxwellian", conservation_drift(&Maxwellian, 20_000, 20, seed)),
        ("dsmc_conservation_vhs", Vhs::new(Maxwellian::VALUE, 0.5).map_err(Into::into).and_then(|k| conservation_drift(&k, 20_000, 20, seed))),
    ] {
        checks.push(Check::from_result(name, drift.map(|d| (d <= 1e-10, format!("max relative drift {d:.3e}")))));
    }

    checks.push(Check::from_result("dsmc_backward_reconstruction", (|| {
        let kernel = Vhs::new(Maxwellian::VALUE, 0.5)?;
        let key = StreamKey::new(seed, 0, 0);
        let (e0, _) = sample_initial_condition::<f64, _>(&DiagonalGaussianIc, &[0.5, 1.0, 1.0], 4000, key)?;
        let (f, tape) = run_dsmc(&e0, &kernel, 0.1, 10, key, BoundPolicy::Auto)?;
        let a = adjoint_sweep(&tape, &f, &kernel, &VxFourth)?;
        let b = adjoint_sweep(&tape, &f, &kernel, &VxFourth)?;
        let gap = a.velocities.iter().zip(e0.velocities()).fold(0.0f64, |m, (x, y)| m.max((*x - *y).norm()));
        let same = a.gamma == b.gamma;
        Ok((gap <= 1e-12 && same, format!("max velocity gap {gap:.3e}, deterministic={same}")))
    })()));

    checks.push(Check::from_result("dsmc_zero_horizon_anchor", (|| {
        let p = DsmcProblem::new(Maxwellian, DiagonalGaussianIc, 100_000, 0.1, 0);
        let g = p.adjoint_gradient::<f64, _>(&[0.5, 1.0, 1.0], StreamKey::new(seed, 0, 0), &VxFourth)?.gradient;
        let z = (g.value[0] - 3.0).abs() / g.std_err[0];
        let ok = z < 3.0 && g.value[1] == 0.0 && g.value[2] == 0.0;
        Ok((ok, format!("dJ/dT_x={:.4} (z={z:.2}), dJ/dT_y={}, dJ/dT_z={}", g.value[0], g.value[1], g.value[2])))
    })()));

    checks.push(Check::from_result("dsmc_maxwellian_pathwise_exact", (|| {
        let p = DsmcProblem::new(Maxwellian, DiagonalGaussianIc, 4000, 0.1, 10);
        let theta = [0.5, 1.0, 1.0];
        let key = StreamKey::new(seed, 0, 0);
        let adj = p.adjoint_gradient::<f64, _>(&theta, key, &VxFourth)?.gradient;
        let fd = p.fd_gradient::<f64, _>(&theta, &FdOptions::new(1e-5).scheme(FdScheme::Central), key, &VxFourth)?;
        let gap = (0..3).map(|k| (adj.value[k] - fd.value[k]).abs() / (1.0 + fd.value[k].abs())).fold(0.0, f64::max);
        Ok((gap < 1e-6, format!("max relative gap {gap:.3e}")))
    })()));

    checks.push(Check::from_result("score_has_zero_mean", (|| {
        let c = score_covariance(&GaussianMean, &[0.3], 100_000, StreamKey::new(seed, 0, 0))?;
        let z = c.score_mean[0].abs() / c.score_mean_std_err[0];
        Ok((z < 3.0, format!("mean {:.3e} (z={z:.2})", c.score_mean[0])))
    })()));

    checks.push(Check::from_result("coupling_reduces_variance", (|| {
        let j = |th: &[f64], key: StreamKey| {
            (0..200u64).map(|i| { let u = key.advance(i).uniforms(); (th[0] + u[0]).powi(2) }).sum::<f64>() / 200.0
        };
        let key = StreamKey::new(seed, 0, 0);
        let opts = FdOptions::new(1e-2).replicates(32);
        let c = coupled_fd_gradient(j, &[0.5], &opts, key)?;
        let i = coupled_fd_gradient(j, &[0.5], &opts.mode(FdMode::Independent), key)?;
        Ok((c.std_err[0] < i.std_err[0], format!("coupled se {:.3e}, independent se {:.3e}", c.std_err[0], i.std_err[0])))
    })()));

    checks
}
