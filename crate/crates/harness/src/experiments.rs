//! Experiment orchestration: repeats, aggregation and file emission.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use adjmc::dsmc::{run_dsmc_observed, write_collision_tape, write_moment_row, BoundPolicy, MOMENTS_HEADER};
use adjmc::mc_gradients::toy::{DiagonalGaussian, GaussianMean, ScaledGaussian};
use adjmc::mc_gradients::{coupled_fd_gradient, pathwise_gradient, score_gradient, FdMode, FdOptions, FdScheme, GradientEstimate, ParamDensityModel};
use adjmc::rng::derive_seed;
use adjmc::rte::{for_each_block, write_final_marginals_csv, write_tape, GradientGrid};
use adjmc::stats::RunningStats;
use adjmc::StreamKey;
use anyhow::{Context, Result};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::output::{fmt_f64, OutputDir};
use crate::problems::{benchmark_payoff, gas_problem, observable, timed, RteProblem};
use crate::scaling::scaling_study;
use crate::validate::{run_checks, Check};

/// Per-repeat values of one quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct RepeatSeries {
    pub name: String,
    pub components: Vec<String>,
    pub repeats: Vec<Vec<f64>>,
}

impl RepeatSeries {
    pub fn new(name: &str, components: Vec<String>) -> Self {
        Self { name: name.to_string(), components, repeats: Vec::new() }
    }

    pub fn stats(&self) -> Vec<RunningStats> {
        (0..self.components.len()).map(|c| self.repeats.iter().map(|r| r[c]).collect()).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        self.stats().iter().map(RunningStats::mean).collect()
    }

    pub fn std_dev(&self) -> Vec<f64> {
        self.stats().iter().map(RunningStats::std_dev).collect()
    }

    pub fn std_err(&self) -> Vec<f64> {
        self.stats().iter().map(RunningStats::std_err).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Timing {
    pub phase: String,
    pub repeat: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub kind: Option<ExperimentKind>,
    pub output_dir: PathBuf,
    pub series: Vec<RepeatSeries>,
    pub timings: Vec<Timing>,
    pub summary: Vec<(String, String)>,
    pub checks: Vec<Check>,
    pub files: Vec<PathBuf>,
}

impl RunReport {
    pub fn series(&self, name: &str) -> Option<&RepeatSeries> {
        self.series.iter().find(|s| s.name == name)
    }

    pub fn summary_value(&self, key: &str) -> Option<&str> {
        self.summary.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// True unless some validation check failed.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn time(&mut self, phase: &str, repeat: usize, seconds: f64) {
        self.timings.push(Timing { phase: phase.to_string(), repeat, seconds });
    }

    fn note(&mut self, key: &str, value: impl ToString) {
        self.summary.push((key.to_string(), value.to_string()));
    }
}

/// Key of repeat `r`; each repeat owns an independent derived seed.
pub fn repeat_key(seed: u64, repeat: usize) -> StreamKey {
    StreamKey::new(derive_seed(seed, repeat as u64), 0, 0)
}

/// Mean and standard error of per-repeat values. With a single repeat the
/// within-run error is used when available, otherwise NaN.
fn combine(series: &RepeatSeries, within: Option<&[f64]>) -> (Vec<f64>, Vec<f64>) {
    let mean = series.mean();
    let se = if series.repeats.len() >= 2 {
        series.std_err()
    } else {
        within.map_or_else(|| vec![f64::NAN; mean.len()], <[f64]>::to_vec)
    };
    (mean, se)
}

fn column(values: Option<&[f64]>, i: usize) -> String {
    values.map_or_else(|| fmt_f64(f64::NAN), |v| fmt_f64(v[i]))
}

/// Runs the configured experiment, writes its CSV files, `repeats.csv`,
/// `timings.csv` and `manifest.txt` into the output directory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let mut out = OutputDir::create(&config.experiment.output_dir, config)?;
    let mut report = RunReport {
        kind: Some(config.experiment.kind),
        output_dir: config.experiment.output_dir.clone(),
        ..Default::default()
    };
    log::info!("running {} with seed {}", config.experiment.kind, config.experiment.seed);
    match config.experiment.kind {
        ExperimentKind::RteForward => rte_forward(config, &mut out, &mut report)?,
        ExperimentKind::RteGradient => rte_gradient(config, &mut out, &mut report)?,
        ExperimentKind::DsmcForward => dsmc_forward(config, &mut out, &mut report)?,
        ExperimentKind::DsmcGradient => dsmc_gradient(config, &mut out, &mut report)?,
        ExperimentKind::RteScaling | ExperimentKind::DsmcScaling => scaling(config, &mut out, &mut report)?,
        ExperimentKind::McDemo => mc_demo(config, &mut out, &mut report)?,
        ExperimentKind::Validate => validate(config, &mut out, &mut report)?,
    }

    let mut rows = Vec::new();
    for s in &report.series {
        for (r, values) in s.repeats.iter().enumerate() {
            for (c, v) in s.components.iter().zip(values) {
                rows.push(vec![s.name.clone(), r.to_string(), c.clone(), fmt_f64(*v)]);
            }
        }
    }
    out.write_csv("repeats.csv", "repeats", &[], &["series", "repeat", "component", "value"], &rows)?;
    let rows: Vec<Vec<String>> =
        report.timings.iter().map(|t| vec![t.phase.clone(), t.repeat.to_string(), fmt_f64(t.seconds)]).collect();
    out.write_csv("timings.csv", "timings", &[], &["phase", "repeat", "seconds"], &rows)?;
    let manifest = out.write_manifest(config, &report.summary)?;
    report.files = out.written().to_vec();
    report.files.push(manifest);
    Ok(report)
}

fn rte_forward(config: &ExperimentConfig, out: &mut OutputDir, report: &mut RunReport) -> Result<()> {
    let p = RteProblem::new(&config.rte)?;
    let bins = p.bins.clone();
    let mut objective = RepeatSeries::new("objective", vec!["J".into(), "std_err".into(), "scatter_fraction".into()]);
    let mut density = RepeatSeries::new("final_density_x", bins.centers().iter().map(|c| fmt_f64(*c)).collect());
    for r in 0..config.experiment.repeats {
        let key = repeat_key(config.experiment.seed, r);
        let mut j = RunningStats::new();
        let mut scattered = RunningStats::new();
        let mut counts = vec![0u64; bins.len()];
        let mut first_tape = true;
        let (res, secs) = timed(|| {
            for_each_block(&p.config, &p.sigma, &p.f0, key, p.block, |tape| {
                for n in 0..tape.n_particles() {
                    let (x, v) = tape.final_state(n);
                    j.push(benchmark_payoff(x, v));
                    if let Some(b) = bins.locate(x) {
                        counts[b] += 1;
                    }
                }
                scattered.push(tape.scatter_fraction(tape.steps()));
                if r == 0 && first_tape && tape.n_particles() == p.config.n_particles {
                    let path = out.path("rte_tape.bin");
                    write_tape(tape, BufWriter::new(File::create(&path)?))?;
                    out.record(path);
                    let path = out.path("rte_final_particles.csv");
                    write_final_marginals_csv(tape, BufWriter::new(File::create(&path)?))?;
                    out.record(path);
                }
                first_tape = false;
                Ok(())
            })
        });
        res?;
        report.time("forward", r, secs);
        let mass = p.config.mass;
        objective.repeats.push(vec![mass * j.mean(), mass * j.std_err(), scattered.mean()]);
        let n = p.config.n_particles as f64;
        density.repeats.push((0..bins.len()).map(|b| mass * counts[b] as f64 / (n * bins.width(b))).collect());
    }
    let (dens, dens_se) = combine(&density, None);
    let rows = (0..bins.len())
        .map(|b| vec![fmt_f64(bins.center(b)), fmt_f64(dens[b]), fmt_f64(dens_se[b])])
        .collect::<Vec<_>>();
    out.write_csv("rte_final_density.csv", "rte_final_density", &[], &["bin_center", "density_x", "std_err"], &rows)?;
    let rows = objective
        .repeats
        .iter()
        .enumerate()
        .map(|(r, v)| vec![r.to_string(), fmt_f64(v[0]), fmt_f64(v[1]), fmt_f64(v[2])])
        .collect::<Vec<_>>();
    out.write_csv("rte_forward.csv", "rte_forward", &[], &["repeat", "objective", "objective_std_err", "scatter_fraction_final"], &rows)?;
    report.note("objective_mean", fmt_f64(objective.mean()[0]));
    report.series.extend([objective, density]);
    Ok(())
}

fn rte_gradient(config: &ExperimentConfig, out: &mut OutputDir, report: &mut RunReport) -> Result<()> {
    let p = RteProblem::new(&config.rte)?;
    let method = config.rte.method;
    let labels: Vec<String> = (0..p.bins.len()).map(|b| b.to_string()).collect();

    let (mut fine, mut coarse) = (None, None);
    if method.fvm() {
        let f = &config.fvm;
        let (g, secs) = timed(|| p.fvm_gradient(f.ref_nx, f.ref_nv, f.ref_steps));
        report.time("fvm_reference", 0, secs);
        fine = Some(g?);
        let (g, secs) = timed(|| p.fvm_gradient(f.coarse_nx, f.coarse_nv, f.coarse_steps));
        report.time("fvm_coarse", 0, secs);
        coarse = Some(g?);
    }

    let mut otd = RepeatSeries::new("p_otd", labels.clone());
    let mut dto = RepeatSeries::new("p_dto", labels.clone());
    let mut objective = RepeatSeries::new("objective", vec!["J".into()]);
    let mut dto_within = None;
    if method.p_otd() || method.p_dto() {
        for r in 0..config.experiment.repeats {
            let g = p.particle_run(repeat_key(config.experiment.seed, r))?;
            report.time("forward", r, g.forward_seconds);
            report.time("gradient", r, g.gradient_seconds);
            objective.repeats.push(vec![g.objective]);
            otd.repeats.push(g.p_otd.values);
            dto.repeats.push(g.p_dto.values);
            if r == 0 {
                dto_within = g.p_dto.std_err;
            }
            log::info!("repeat {r} done");
        }
    }

    let particle = |s: &RepeatSeries, within: Option<&[f64]>, on: bool| {
        if on && !s.repeats.is_empty() {
            let (m, e) = combine(s, within);
            (Some(m), Some(e))
        } else {
            (None, None)
        }
    };
    let (otd_mean, otd_se) = particle(&otd, None, method.p_otd());
    let (dto_mean, dto_se) = particle(&dto, dto_within.as_deref(), method.p_dto());
    let fine_v = fine.as_ref().map(|g| g.values.as_slice());
    let coarse_v = coarse.as_ref().map(|g| g.values.as_slice());
    let rows = (0..p.bins.len())
        .map(|b| {
            vec![
                fmt_f64(p.bins.center(b)),
                column(otd_mean.as_deref(), b),
                column(dto_mean.as_deref(), b),
                column(fine_v, b),
                column(coarse_v, b),
                column(otd_se.as_deref(), b),
                column(dto_se.as_deref(), b),
            ]
        })
        .collect::<Vec<_>>();
    out.write_csv(
        "rte_gradient.csv",
        "rte_gradient",
        &[],
        &["bin_center", "grad_p_otd", "grad_p_dto", "grad_fvm_ref", "grad_fvm_coarse", "std_err_p_otd", "std_err_p_dto"],
        &rows,
    )?;

    if let Some(reference) = &fine {
        for (name, mean) in [("p_otd", &otd_mean), ("p_dto", &dto_mean)] {
            if let Some(m) = mean {
                let rel = GradientGrid::new(p.bins.clone(), m.clone())?.relative_l2(reference)?;
                report.note(&format!("relative_l2_{name}"), fmt_f64(rel));
            }
        }
        if let Some(c) = &coarse {
            report.note("relative_l2_fvm_coarse", fmt_f64(c.relative_l2(reference)?));
        }
        let mut s = RepeatSeries::new("fvm_reference", labels.clone());
        s.repeats.push(reference.values.clone());
        report.series.push(s);
    }
    if !objective.repeats.is_empty() {
        report.note("objective_mean", fmt_f64(objective.mean()[0]));
    }
    for s in [objective, otd, dto] {
        if !s.repeats.is_empty() {
            report.series.push(s);
        }
    }
    Ok(())
}

fn dsmc_forward(config: &ExperimentConfig, out: &mut OutputDir, report: &mut RunReport) -> Result<()> {
    let d = &config.dsmc;
    let problem = gas_problem(d)?;
    let obs = observable(d.observable);
    let mut summary = RepeatSeries::new(
        "dsmc_forward",
        ["objective", "real_collisions", "bound_refreshes", "momentum_drift", "energy_drift"].map(String::from).to_vec(),
    );
    let mut moments = Vec::new();
    for r in 0..config.experiment.repeats {
        let key = repeat_key(config.experiment.seed, r);
        let e0 = problem.initial::<f64>(&d.theta, key)?;
        let (p0, en0) = (e0.momentum(), e0.energy());
        let scale = en0.sqrt();
        let (mut dp, mut de) = (0.0f64, 0.0f64);
        let mut failure = None;
        let (res, secs) = timed(|| {
            run_dsmc_observed(&e0, &problem.kernel, d.dt, problem.steps, key, BoundPolicy::Auto, |k, e| {
                let p = e.momentum();
                for c in 0..3 {
                    dp = dp.max((p[c] - p0[c]).abs() / scale);
                }
                de = de.max((e.energy() - en0).abs() / en0);
                if r == 0 && k % d.moment_stride == 0 {
                    if let Err(err) = write_moment_row(&mut moments, k as f64 * d.dt, e) {
                        failure.get_or_insert(err);
                    }
                }
            })
        });
        let (f, tape) = res?;
        if let Some(err) = failure {
            return Err(err.into());
        }
        report.time("forward", r, secs);
        if r == 0 {
            let path = out.path("dsmc_tape.bin");
            write_collision_tape(&tape, BufWriter::new(File::create(&path)?))?;
            out.record(path);
        }
        let j = adjmc::dsmc::objective_phi(&f, |v| obs.value(v));
        summary.repeats.push(vec![j, tape.n_real() as f64, tape.bound_refreshes as f64, dp, de]);
    }
    let text = String::from_utf8(moments).context("moment rows are not UTF-8")?;
    let rows = text.lines().map(|l| l.split(',').map(String::from).collect()).collect::<Vec<_>>();
    let columns: Vec<&str> = MOMENTS_HEADER.split(',').collect();
    out.write_csv("dsmc_moments.csv", "dsmc_moments", &[], &columns, &rows)?;
    let rows = summary
        .repeats
        .iter()
        .enumerate()
        .map(|(r, v)| std::iter::once(r.to_string()).chain(v.iter().map(|x| fmt_f64(*x))).collect())
        .collect::<Vec<_>>();
    let mut columns = vec!["repeat"];
    columns.extend(summary.components.iter().map(String::as_str));
    out.write_csv("dsmc_forward.csv", "dsmc_forward", &[], &columns, &rows)?;
    report.note("objective_mean", fmt_f64(summary.mean()[0]));
    report.series.push(summary);
    Ok(())
}

fn dsmc_gradient(config: &ExperimentConfig, out: &mut OutputDir, report: &mut RunReport) -> Result<()> {
    let d = &config.dsmc;
    let problem = gas_problem(d)?;
    let obs = observable(d.observable);
    let components: Vec<String> = ["T_x", "T_y", "T_z"].map(String::from).to_vec();
    let mut adj = RepeatSeries::new("adjoint", components.clone());
    let mut fd = RepeatSeries::new("fd", components.clone());
    let mut adj_within = None;
    let fd_opts = FdOptions::new(d.fd_step).scheme(FdScheme::Central);
    for r in 0..config.experiment.repeats {
        let key = repeat_key(config.experiment.seed, r);
        if d.method.adjoint() {
            let run = problem.adjoint_gradient::<f64, _>(&d.theta, key, obs)?;
            report.time("forward", r, run.forward_seconds);
            report.time("adjoint", r, run.adjoint_seconds);
            if r == 0 {
                adj_within = Some(run.gradient.std_err.clone());
            }
            adj.repeats.push(run.gradient.value);
        }
        if d.method.fd() {
            let (g, secs) = timed(|| problem.fd_gradient::<f64, _>(&d.theta, &fd_opts, key, obs));
            report.time("fd", r, secs);
            fd.repeats.push(g?.value);
        }
    }
    let (am, ase) = if d.method.adjoint() {
        let (m, e) = combine(&adj, adj_within.as_deref());
        (Some(m), Some(e))
    } else {
        (None, None)
    };
    let (fm, fse) = if d.method.fd() {
        let (m, e) = combine(&fd, None);
        (Some(m), Some(e))
    } else {
        (None, None)
    };
    let mut max_z = f64::NAN;
    let rows = (0..3)
        .map(|k| {
            let z = match (&am, &ase, &fm, &fse) {
                (Some(a), Some(sa), Some(f), Some(sf)) => (a[k] - f[k]).abs() / (sa[k] * sa[k] + sf[k] * sf[k]).sqrt(),
                _ => f64::NAN,
            };
            max_z = if max_z.is_nan() { z } else { max_z.max(z) };
            vec![
                components[k].clone(),
                column(am.as_deref(), k),
                column(ase.as_deref(), k),
                column(fm.as_deref(), k),
                column(fse.as_deref(), k),
                fmt_f64(z),
            ]
        })
        .collect::<Vec<_>>();
    out.write_csv(
        "dsmc_gradient.csv",
        "dsmc_gradient",
        &[],
        &["component", "adjoint_value", "adjoint_stderr", "fd_value", "fd_stderr", "combined_z"],
        &rows,
    )?;
    report.note("max_combined_z", fmt_f64(max_z));
    let phase = |name: &str| report.timings.iter().filter(|t| t.phase == name).map(|t| t.seconds).sum::<f64>();
    let (fwd, back) = (phase("forward"), phase("adjoint"));
    if fwd > 0.0 {
        report.note("adjoint_over_forward_time", format!("{:.3}", back / fwd));
    }
    for s in [adj, fd] {
        if !s.repeats.is_empty() {
            report.series.push(s);
        }
    }
    Ok(())
}

fn scaling(config: &ExperimentConfig, out: &mut OutputDir, report: &mut RunReport) -> Result<()> {
    let mut config = config.clone();
    config.scaling.target = match config.experiment.kind {
        ExperimentKind::DsmcScaling => crate::config::ScalingTarget::Dsmc,
        ExperimentKind::RteScaling => crate::config::ScalingTarget::Rte,
        _ => config.scaling.target,
    };
    let table = scaling_study(&config, &config.scaling.n_values, config.experiment.repeats)?;
    report.time("reference", 0, table.reference_seconds);
    report.time("runs", 0, table.run_seconds);
    let mut extra = Vec::new();
    for m in &table.methods {
        let slope = table.slope(m);
        extra.push((format!("slope_{m}"), fmt_f64(slope)));
        report.note(&format!("slope_{m}"), fmt_f64(slope));
    }
    let rows = table
        .rows
        .iter()
        .map(|r| vec![r.n.to_string(), r.method.clone(), fmt_f64(r.std_dev()), fmt_f64(r.mean_error()), r.errors.len().to_string()])
        .collect::<Vec<_>>();
    out.write_csv("scaling.csv", "scaling", &extra, &["N", "method", "std_dev_l2_error", "mean_l2_error", "repeats"], &rows)?;
    for r in &table.rows {
        let mut s = RepeatSeries::new(&format!("l2_error_{}_{}", r.method, r.n), vec!["l2_error".into()]);
        s.repeats = r.errors.iter().map(|e| vec![*e]).collect();
        report.series.push(s);
    }
    Ok(())
}

/// One toy family: a model, a payoff with its gradient, and the exact
/// gradient of `E[f]`.
struct Toy {
    name: &'static str,
    model: Box<dyn ParamDensityModel>,
    theta: Vec<f64>,
    payoff: fn(&[f64]) -> f64,
    payoff_grad: fn(&[f64]) -> Vec<f64>,
    analytic: Vec<f64>,
}

fn square(x: &[f64]) -> f64 {
    x[0] * x[0]
}

fn square_grad(x: &[f64]) -> Vec<f64> {
    vec![2.0 * x[0]]
}

fn fourth_sum(x: &[f64]) -> f64 {
    x.iter().map(|v| v.powi(4)).sum()
}

fn fourth_sum_grad(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| 4.0 * v.powi(3)).collect()
}

fn toys(theta: f64) -> Vec<Toy> {
    let shift = 0.5;
    let diag = vec![theta, 2.0 * theta, 3.0 * theta];
    vec![
        // E[X²] = θ² + 1
        Toy { name: "gaussian_mean", model: Box::new(GaussianMean), theta: vec![theta], payoff: square, payoff_grad: square_grad, analytic: vec![2.0 * theta] },
        // E[X²] = θ² + shift²
        Toy {
            name: "scaled_gaussian",
            model: Box::new(ScaledGaussian { shift }),
            theta: vec![theta],
            payoff: square,
            payoff_grad: square_grad,
            analytic: vec![2.0 * theta],
        },
        // E[Σ X_k⁴] = 3 Σ θ_k²
        Toy {
            name: "diagonal_gaussian",
            model: Box::new(DiagonalGaussian),
            analytic: diag.iter().map(|t| 6.0 * t).collect(),
            theta: diag,
            payoff: fourth_sum,
            payoff_grad: fourth_sum_grad,
        },
    ]
}

fn mc_demo(config: &ExperimentConfig, out: &mut OutputDir, report: &mut RunReport) -> Result<()> {
    let m = &config.mc_demo;
    let methods = ["score", "pathwise", "coupled_fd", "independent_fd"];
    let mut rows = Vec::new();
    for toy in toys(m.theta) {
        let comps: Vec<String> = (0..toy.theta.len()).map(|k| format!("{}.{k}", toy.name)).collect();
        for &n in &m.sizes {
            for method in methods {
                let mut series = RepeatSeries::new(&format!("{method}/{}/{n}", toy.name), comps.clone());
                let mut within = Vec::new();
                for r in 0..config.experiment.repeats {
                    let key = repeat_key(config.experiment.seed, r);
                    let (est, secs) = timed(|| toy_estimate(&toy, method, n, key, m.fd_step, m.fd_replicates));
                    let est = est?;
                    report.time(method, r, secs);
                    within.push(est.std_err.clone());
                    series.repeats.push(est.value);
                }
                // every estimate carries its own error, so pool those rather
                // than trusting the spread of a handful of repeats
                let reps = within.len() as f64;
                let mean = series.mean();
                let se: Vec<f64> =
                    (0..comps.len()).map(|k| within.iter().map(|s| s[k] * s[k]).sum::<f64>().sqrt() / reps).collect();
                for k in 0..comps.len() {
                    rows.push(vec![
                        method.to_string(),
                        n.to_string(),
                        comps[k].clone(),
                        fmt_f64(mean[k]),
                        fmt_f64(se[k]),
                        fmt_f64(toy.analytic[k]),
                    ]);
                }
                report.series.push(series);
            }
        }
    }
    out.write_csv("mc_demo.csv", "mc_demo", &[], &["method", "N", "component", "value", "std_err", "analytic"], &rows)?;
    Ok(())
}

fn toy_estimate(toy: &Toy, method: &str, n: usize, key: StreamKey, step: f64, replicates: usize) -> Result<GradientEstimate> {
    let model = toy.model.as_ref();
    let j_hat = |th: &[f64], k: StreamKey| (0..n as u64).map(|i| (toy.payoff)(&model.sample(th, k.advance(i)))).sum::<f64>() / n as f64;
    let fd = FdOptions::new(step).scheme(FdScheme::Central).replicates(replicates).samples_per_eval(n);
    Ok(match method {
        "score" => score_gradient(model, toy.payoff, &toy.theta, n, key)?,
        "pathwise" => pathwise_gradient(model, toy.payoff_grad, &toy.theta, n, key)?,
        "coupled_fd" => coupled_fd_gradient(j_hat, &toy.theta, &fd, key)?,
        _ => coupled_fd_gradient(j_hat, &toy.theta, &fd.mode(FdMode::Independent), key)?,
    })
}

fn validate(config: &ExperimentConfig, out: &mut OutputDir, report: &mut RunReport) -> Result<()> {
    let (checks, secs) = timed(|| run_checks(config.experiment.seed));
    report.time("validate", 0, secs);
    let rows = checks.iter().map(|c| vec![c.name.clone(), c.passed.to_string(), c.detail.clone()]).collect::<Vec<_>>();
    out.write_csv("validate.csv", "validate", &[], &["check", "passed", "detail"], &rows)?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    report.note("checks", checks.len());
    report.note("failed", failed);
    report.checks = checks;
    Ok(())
}
