//! Spread of the gradient error over independent runs as a function of N.

use adjmc::rng::derive_seed;
use adjmc::stats::{log_log_slope, mean, std_dev};
use adjmc::StreamKey;
use anyhow::{ensure, Result};

use crate::config::{ExperimentConfig, ScalingTarget};
use crate::problems::{gas_problem, observable, timed, RteProblem};

/// L² gradient errors of one method at one ensemble size, one per repeat.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub n: usize,
    pub method: String,
    pub errors: Vec<f64>,
}

impl ScalingRow {
    pub fn std_dev(&self) -> f64 {
        std_dev(&self.errors)
    }

    pub fn mean_error(&self) -> f64 {
        mean(&self.errors)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingTable {
    pub methods: Vec<String>,
    pub rows: Vec<ScalingRow>,
    pub reference_seconds: f64,
    pub run_seconds: f64,
}

impl ScalingTable {
    /// `(N, std dev)` for `method`, in increasing N.
    pub fn std_devs(&self, method: &str) -> Vec<(usize, f64)> {
        self.rows.iter().filter(|r| r.method == method).map(|r| (r.n, r.std_dev())).collect()
    }

    /// Least-squares slope of log std dev against log N.
    pub fn slope(&self, method: &str) -> f64 {
        let (n, s): (Vec<f64>, Vec<f64>) = self.std_devs(method).into_iter().map(|(n, s)| (n as f64, s)).unzip();
        log_log_slope(&n, &s)
    }
}

fn run_key(seed: u64, size_index: usize, repeat: usize) -> StreamKey {
    StreamKey::new(derive_seed(seed, ((size_index as u64) << 32) | repeat as u64), 0, 0)
}

/// Runs `repeats` independent estimates at each N in `n_values` and records
/// their L² distance to a reference gradient: the fine FVM solution for the
/// RTE, a high-N adjoint run for DSMC.
pub fn scaling_study(config: &ExperimentConfig, n_values: &[usize], repeats: usize) -> Result<ScalingTable> {
    if n_values.len() < 3 {
        return Err(adjmc::Error::Argument(format!(
            "a scaling study needs at least 3 ensemble sizes, got {}",
            n_values.len()
        ))
        .into());
    }
    ensure!(repeats >= 2, "a scaling study needs at least 2 repeats to estimate a spread");
    let mut sizes = n_values.to_vec();
    sizes.sort_unstable();
    let seed = config.experiment.seed;
    match config.scaling.target {
        ScalingTarget::Rte => {
            let base = RteProblem::new(&config.rte)?;
            let f = &config.fvm;
            let (reference, reference_seconds) = timed(|| base.fvm_gradient(f.ref_nx, f.ref_nv, f.ref_steps));
            let reference = reference?;
            let methods = vec!["p_otd".to_string(), "p_dto".to_string()];
            let mut rows = Vec::new();
            let (res, run_seconds) = timed(|| -> Result<()> {
                for (i, &n) in sizes.iter().enumerate() {
                    let p = base.with_particles(n);
                    let mut otd = Vec::with_capacity(repeats);
                    let mut dto = Vec::with_capacity(repeats);
                    for r in 0..repeats {
                        let g = p.particle_run(run_key(seed, i, r))?;
                        otd.push(g.p_otd.l2_distance(&reference)?);
                        dto.push(g.p_dto.l2_distance(&reference)?);
                    }
                    log::info!("scaling N={n}: p_otd sd {:.3e}, p_dto sd {:.3e}", std_dev(&otd), std_dev(&dto));
                    rows.push(ScalingRow { n, method: methods[0].clone(), errors: otd });
                    rows.push(ScalingRow { n, method: methods[1].clone(), errors: dto });
                }
                Ok(())
            });
            res?;
            Ok(ScalingTable { methods, rows, reference_seconds, run_seconds })
        }
        ScalingTarget::Dsmc => {
            ensure!(sizes.iter().all(|n| n % 2 == 0), "scaling.n_values: DSMC ensembles must be even");
            let d = &config.dsmc;
            let obs = observable(d.observable);
            let reference_problem = gas_problem(&crate::config::DsmcSection {
                n_particles: config.scaling.reference_n,
                ..d.clone()
            })?;
            let (reference, reference_seconds) = timed(|| {
                reference_problem.adjoint_gradient::<f64, _>(&d.theta, StreamKey::new(derive_seed(seed, u64::MAX), 0, 0), obs)
            });
            let reference = reference?.gradient.value;
            let methods = vec!["adjoint".to_string()];
            let mut rows = Vec::new();
            let (res, run_seconds) = timed(|| -> Result<()> {
                for (i, &n) in sizes.iter().enumerate() {
                    let p = gas_problem(&crate::config::DsmcSection { n_particles: n, ..d.clone() })?;
                    let mut errors = Vec::with_capacity(repeats);
                    for r in 0..repeats {
                        let g = p.adjoint_gradient::<f64, _>(&d.theta, run_key(seed, i, r), obs)?.gradient.value;
                        errors.push(g.iter().zip(&reference).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt());
                    }
                    rows.push(ScalingRow { n, method: methods[0].clone(), errors });
                }
                Ok(())
            });
            res?;
            Ok(ScalingTable { methods, rows, reference_seconds, run_seconds })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn too_few_sizes_is_an_argument_error() {
        let err = scaling_study(&ExperimentConfig::default(), &[64, 128], 4).unwrap_err();
        assert!(matches!(err.downcast_ref::<adjmc::Error>(), Some(adjmc::Error::Argument(_))));
    }

    #[test]
    fn dsmc_spread_shrinks_with_n() {
        let cfg = ExperimentConfig::default()
            .with_overrides(&[
                "scaling.target=\"dsmc\"",
                "scaling.reference_n=20000",
                "dsmc.t_final=0.5",
            ])
            .unwrap();
        let t = scaling_study(&cfg, &[250, 1000, 4000], 12).unwrap();
        assert_eq!(t.rows.len(), 3);
        assert!(t.rows.iter().all(|r| r.errors.len() == 12));
        let s = t.slope("adjoint");
        assert!(s < -0.2 && s > -0.8, "slope {s}");
    }
}
