//! Monte Carlo gradient estimators for `J(θ) = E_{X∼p(·,θ)}[f(X)]`.
//!
//! Three routes are provided:
//! * [`score_gradient`]: `(1/N) Σ f(Xᵢ) ∇_θ log p(Xᵢ, θ)`, needs a density or score;
//! * [`pathwise_gradient`]: `(1/N) Σ ∂_θT(Yᵢ, θ)ᵀ ∇f(T(Yᵢ, θ))`, needs a
//!   reparameterization `X = T(Y, θ)` of a parameter-free base `Y`;
//! * [`coupled_fd_gradient`]: finite differences of a black-box randomized
//!   evaluator, optionally with common random numbers.
//!
//! The model is assumed to be a probability density (unit total mass).

use std::fmt;

use crate::error::{ensure, Error, Result};
use crate::rng::{derive_seed, StreamKey};
use crate::stats::RunningStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorMethod {
    Score,
    Pathwise,
    CoupledFd,
    Adjoint,
}

impl fmt::Display for EstimatorMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Score => "score",
            Self::Pathwise => "pathwise",
            Self::CoupledFd => "coupled_fd",
            Self::Adjoint => "adjoint",
        })
    }
}

/// A gradient vector together with per-component standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub value: Vec<f64>,
    pub std_err: Vec<f64>,
    pub n_samples: usize,
    pub method: EstimatorMethod,
}

impl GradientEstimate {
    pub(crate) fn from_stats(stats: &[RunningStats], n_samples: usize, method: EstimatorMethod) -> Self {
        Self {
            value: stats.iter().map(RunningStats::mean).collect(),
            std_err: stats.iter().map(RunningStats::std_err).collect(),
            n_samples,
            method,
        }
    }

    pub fn dim(&self) -> usize {
        self.value.len()
    }

    /// `|a − b| / sqrt(se_a² + se_b²)` per component.
    pub fn z_scores(&self, other: &GradientEstimate) -> Vec<f64> {
        self.value
            .iter()
            .zip(&other.value)
            .zip(self.std_err.iter().zip(&other.std_err))
            .map(|((a, b), (sa, sb))| (a - b).abs() / (sa * sa + sb * sb).sqrt())
            .collect()
    }
}

/// A parametric family `p(x, θ)` with optional density, score and
/// reparameterization capabilities.
///
/// Sample `i` of an estimator receives `key.advance(i)`; a model that needs
/// more than four uniforms per sample should branch into its own streams.
pub trait ParamDensityModel {
    fn dim_x(&self) -> usize;
    fn dim_theta(&self) -> usize;

    /// Draws `X ∼ p(·, θ)`.
    fn sample(&self, theta: &[f64], key: StreamKey) -> Vec<f64>;

    fn log_density(&self, _x: &[f64], _theta: &[f64]) -> Option<f64> {
        None
    }

    /// `∇_θ log p(x, θ)`.
    fn score(&self, _x: &[f64], _theta: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Draws from the parameter-free base distribution.
    fn base_sample(&self, _key: StreamKey) -> Option<Vec<f64>> {
        None
    }

    /// `T(y, θ)`.
    fn pushforward(&self, _y: &[f64], _theta: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// `∂T_i/∂θ_j`, row-major `dim_x × dim_theta`.
    fn pushforward_jacobian(&self, _y: &[f64], _theta: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

/// Score at `(x, θ)`, falling back to central differences of the log density
/// with step `1e-6·(1+|θⱼ|)`.
pub fn score_or_fd<M: ParamDensityModel + ?Sized>(model: &M, x: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
    if let Some(s) = model.score(x, theta) {
        return Ok(s);
    }
    let missing = || Error::Capability("model provides neither score nor log_density".into());
    model.log_density(x, theta).ok_or_else(missing)?;
    let mut th = theta.to_vec();
    (0..theta.len())
        .map(|j| {
            let h = 1e-6 * (1.0 + theta[j].abs());
            th[j] = theta[j] + h;
            let up = model.log_density(x, &th).ok_or_else(missing)?;
            th[j] = theta[j] - h;
            let down = model.log_density(x, &th).ok_or_else(missing)?;
            th[j] = theta[j];
            Ok((up - down) / (2.0 * h))
        })
        .collect()
}

fn check_theta<M: ParamDensityModel + ?Sized>(model: &M, theta: &[f64], n: usize) -> Result<()> {
    ensure!(
        theta.len() == model.dim_theta(),
        Argument,
        "θ has {} components, model expects {}",
        theta.len(),
        model.dim_theta()
    );
    ensure!(n >= 1, Argument, "sample count must be at least 1");
    Ok(())
}

/// Likelihood-ratio estimator `(1/N) Σ f(Xᵢ) ∇_θ log p(Xᵢ, θ)`.
pub fn score_gradient<M, F>(model: &M, payoff: F, theta: &[f64], n: usize, key: StreamKey) -> Result<GradientEstimate>
where
    M: ParamDensityModel + ?Sized,
    F: Fn(&[f64]) -> f64,
{
    check_theta(model, theta, n)?;
    let mut stats = vec![RunningStats::new(); theta.len()];
    for i in 0..n {
        let x = model.sample(theta, key.advance(i as u64));
        let s = score_or_fd(model, &x, theta)?;
        let fx = payoff(&x);
        for (acc, sj) in stats.iter_mut().zip(&s) {
            acc.push(fx * sj);
        }
    }
    Ok(GradientEstimate::from_stats(&stats, n, EstimatorMethod::Score))
}

/// Reparameterization estimator `(1/N) Σ ∂_θT(Yᵢ, θ)ᵀ ∇f(T(Yᵢ, θ))`.
pub fn pathwise_gradient<M, G>(model: &M, payoff_grad: G, theta: &[f64], n: usize, key: StreamKey) -> Result<GradientEstimate>
where
    M: ParamDensityModel + ?Sized,
    G: Fn(&[f64]) -> Vec<f64>,
{
    check_theta(model, theta, n)?;
    let missing = || Error::Capability("model has no pushforward / Jacobian / base sampler".into());
    let (dx, dt) = (model.dim_x(), model.dim_theta());
    let mut stats = vec![RunningStats::new(); dt];
    for i in 0..n {
        let y = model.base_sample(key.advance(i as u64)).ok_or_else(missing)?;
        let x = model.pushforward(&y, theta).ok_or_else(missing)?;
        let jac = model.pushforward_jacobian(&y, theta).ok_or_else(missing)?;
        ensure!(jac.len() == dx * dt, Argument, "Jacobian has {} entries, expected {}", jac.len(), dx * dt);
        let g = payoff_grad(&x);
        for (j, acc) in stats.iter_mut().enumerate() {
            acc.push((0..dx).map(|r| jac[r * dt + j] * g[r]).sum());
        }
    }
    Ok(GradientEstimate::from_stats(&stats, n, EstimatorMethod::Pathwise))
}

/// Empirical Fisher information at θ.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreCovariance {
    /// Sample covariance of the score, `dim_theta × dim_theta`, exactly symmetric.
    pub matrix: Vec<Vec<f64>>,
    /// Standard error of each covariance entry.
    pub std_err: Vec<Vec<f64>>,
    pub score_mean: Vec<f64>,
    pub score_mean_std_err: Vec<f64>,
    pub n_samples: usize,
}

/// Empirical covariance of `∇_θ log p(X, θ)` with `X ∼ p(·, θ)`.
pub fn score_covariance<M>(model: &M, theta: &[f64], n: usize, key: StreamKey) -> Result<ScoreCovariance>
where
    M: ParamDensityModel + ?Sized,
{
    check_theta(model, theta, n)?;
    let d = theta.len();
    let scores: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let x = model.sample(theta, key.advance(i as u64));
            score_or_fd(model, &x, theta)
        })
        .collect::<Result<_>>()?;
    let mean_stats: Vec<RunningStats> = (0..d).map(|j| scores.iter().map(|s| s[j]).collect()).collect();
    let means: Vec<f64> = mean_stats.iter().map(RunningStats::mean).collect();
    let mut matrix = vec![vec![0.0; d]; d];
    let mut std_err = vec![vec![0.0; d]; d];
    for j in 0..d {
        for k in j..d {
            let prod: RunningStats = scores.iter().map(|s| (s[j] - means[j]) * (s[k] - means[k])).collect();
            let cov = if n > 1 { prod.mean() * n as f64 / (n - 1) as f64 } else { 0.0 };
            matrix[j][k] = cov;
            matrix[k][j] = cov;
            std_err[j][k] = prod.std_err();
            std_err[k][j] = prod.std_err();
        }
    }
    Ok(ScoreCovariance {
        matrix,
        std_err,
        score_mean: means,
        score_mean_std_err: mean_stats.iter().map(RunningStats::std_err).collect(),
        n_samples: n,
    })
}

/// Whether the two evaluations of a difference share their random numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FdMode {
    #[default]
    Coupled,
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FdScheme {
    /// `(J(θ+h eⱼ) − J(θ))/h`, `m+1` evaluations.
    #[default]
    Forward,
    /// `(J(θ+h eⱼ) − J(θ−h eⱼ))/2h`, `2m` evaluations.
    Central,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdOptions {
    pub step: f64,
    pub mode: FdMode,
    pub scheme: FdScheme,
    /// Independent repetitions of the whole difference; standard errors come
    /// from their spread (infinite when only one is run).
    pub replicates: usize,
    /// Samples used inside one evaluation, recorded as metadata.
    pub samples_per_eval: usize,
}

impl FdOptions {
    pub fn new(step: f64) -> Self {
        Self { step, mode: FdMode::Coupled, scheme: FdScheme::Forward, replicates: 1, samples_per_eval: 1 }
    }

    pub fn mode(mut self, mode: FdMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn scheme(mut self, scheme: FdScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn replicates(mut self, replicates: usize) -> Self {
        self.replicates = replicates;
        self
    }

    pub fn samples_per_eval(mut self, n: usize) -> Self {
        self.samples_per_eval = n;
        self
    }
}

/// Key with the same stream layout but an independent experiment seed.
pub fn fresh_key(key: StreamKey, tag: u64) -> StreamKey {
    StreamKey::new(derive_seed(key.experiment_seed, tag), key.stream_id, key.counter)
}

/// Finite-difference gradient of a randomized evaluator `J_hat(θ, key)`.
///
/// In coupled mode every evaluation of a replicate receives the same key;
/// in independent mode each evaluation gets a fresh one. Replicate 0 uses
/// `key` itself.
pub fn coupled_fd_gradient<F>(mut j_hat: F, theta: &[f64], opts: &FdOptions, key: StreamKey) -> Result<GradientEstimate>
where
    F: FnMut(&[f64], StreamKey) -> f64,
{
    ensure!(opts.step > 0.0 && opts.step.is_finite(), Argument, "finite-difference step must be positive, got {}", opts.step);
    ensure!(opts.replicates >= 1, Argument, "at least one replicate is required");
    ensure!(!theta.is_empty(), Argument, "θ must have at least one component");
    let m = theta.len();
    let h = opts.step;
    let mut stats = vec![RunningStats::new(); m];
    let mut th = theta.to_vec();
    for r in 0..opts.replicates {
        let rep_key = if r == 0 { key } else { fresh_key(key, r as u64) };
        let mut eval_index = 0u64;
        let mut next_key = || {
            let k = match opts.mode {
                FdMode::Coupled => rep_key,
                FdMode::Independent => fresh_key(rep_key, (1 << 40) + eval_index),
            };
            eval_index += 1;
            k
        };
        let base = match opts.scheme {
            FdScheme::Forward => Some(j_hat(theta, next_key())),
            FdScheme::Central => None,
        };
        for j in 0..m {
            th[j] = theta[j] + h;
            let up = j_hat(&th, next_key());
            let d = match base {
                Some(b) => (up - b) / h,
                None => {
                    th[j] = theta[j] - h;
                    let down = j_hat(&th, next_key());
                    (up - down) / (2.0 * h)
                }
            };
            th[j] = theta[j];
            stats[j].push(d);
        }
    }
    let mut est = GradientEstimate::from_stats(&stats, opts.samples_per_eval * opts.replicates, EstimatorMethod::CoupledFd);
    if opts.replicates == 1 {
        est.std_err.iter_mut().for_each(|s| *s = f64::INFINITY);
    }
    Ok(est)
}

/// Reference families with closed-form gradients.
pub mod toy {
    use super::ParamDensityModel;
    use crate::rng::{box_muller, StreamKey};

    fn std_normal(key: StreamKey) -> f64 {
        let u = key.uniforms();
        box_muller(u[0], u[1]).0
    }

    /// `N(θ, 1)`, reparameterized as `X = Y + θ`.
    #[derive(Debug, Clone, Copy, Default)]
    pub struct GaussianMean;

    impl ParamDensityModel for GaussianMean {
        fn dim_x(&self) -> usize {
            1
        }
        fn dim_theta(&self) -> usize {
            1
        }
        fn sample(&self, theta: &[f64], key: StreamKey) -> Vec<f64> {
            vec![theta[0] + std_normal(key)]
        }
        fn log_density(&self, x: &[f64], theta: &[f64]) -> Option<f64> {
            let d = x[0] - theta[0];
            Some(-0.5 * d * d - 0.5 * (2.0 * std::f64::consts::PI).ln())
        }
        fn score(&self, x: &[f64], theta: &[f64]) -> Option<Vec<f64>> {
            Some(vec![x[0] - theta[0]])
        }
        fn base_sample(&self, key: StreamKey) -> Option<Vec<f64>> {
            Some(vec![std_normal(key)])
        }
        fn pushforward(&self, y: &[f64], theta: &[f64]) -> Option<Vec<f64>> {
            Some(vec![y[0] + theta[0]])
        }
        fn pushforward_jacobian(&self, _y: &[f64], _theta: &[f64]) -> Option<Vec<f64>> {
            Some(vec![1.0])
        }
    }

    /// `N(shift, θ²)` through the dilation `X = θY + shift`.
    #[derive(Debug, Clone, Copy)]
    pub struct ScaledGaussian {
        pub shift: f64,
    }

    impl ParamDensityModel for ScaledGaussian {
        fn dim_x(&self) -> usize {
            1
        }
        fn dim_theta(&self) -> usize {
            1
        }
        fn sample(&self, theta: &[f64], key: StreamKey) -> Vec<f64> {
            vec![theta[0] * std_normal(key) + self.shift]
        }
        fn log_density(&self, x: &[f64], theta: &[f64]) -> Option<f64> {
            let s2 = theta[0] * theta[0];
            let d = x[0] - self.shift;
            Some(-0.5 * (2.0 * std::f64::consts::PI * s2).ln() - d * d / (2.0 * s2))
        }
        fn score(&self, x: &[f64], theta: &[f64]) -> Option<Vec<f64>> {
            let s = theta[0];
            let d = x[0] - self.shift;
            Some(vec![-1.0 / s + d * d / (s * s * s)])
        }
        fn base_sample(&self, key: StreamKey) -> Option<Vec<f64>> {
            Some(vec![std_normal(key)])
        }
        fn pushforward(&self, y: &[f64], theta: &[f64]) -> Option<Vec<f64>> {
            Some(vec![theta[0] * y[0] + self.shift])
        }
        fn pushforward_jacobian(&self, y: &[f64], _theta: &[f64]) -> Option<Vec<f64>> {
            Some(vec![y[0]])
        }
    }

    /// Centred Gaussian in ℝ³ parameterized by its three variances, the
    /// family used for anisotropic initial velocity distributions.
    #[derive(Debug, Clone, Copy, Default)]
    pub struct DiagonalGaussian;

    impl ParamDensityModel for DiagonalGaussian {
        fn dim_x(&self) -> usize {
            3
        }
        fn dim_theta(&self) -> usize {
            3
        }
        fn sample(&self, theta: &[f64], key: StreamKey) -> Vec<f64> {
            let e = crate::rng::sample_standard_normal3(key);
            (0..3).map(|k| theta[k].sqrt() * e[k]).collect()
        }
        fn log_density(&self, x: &[f64], theta: &[f64]) -> Option<f64> {
            Some(
                (0..3)
                    .map(|k| -0.5 * (2.0 * std::f64::consts::PI * theta[k]).ln() - x[k] * x[k] / (2.0 * theta[k]))
                    .sum(),
            )
        }
        fn score(&self, x: &[f64], theta: &[f64]) -> Option<Vec<f64>> {
            Some((0..3).map(|k| -0.5 / theta[k] + x[k] * x[k] / (2.0 * theta[k] * theta[k])).collect())
        }
        fn base_sample(&self, key: StreamKey) -> Option<Vec<f64>> {
            Some(crate::rng::sample_standard_normal3(key).to_vec())
        }
        fn pushforward(&self, y: &[f64], theta: &[f64]) -> Option<Vec<f64>> {
            Some((0..3).map(|k| theta[k].sqrt() * y[k]).collect())
        }
        fn pushforward_jacobian(&self, y: &[f64], theta: &[f64]) -> Option<Vec<f64>> {
            let mut j = vec![0.0; 9];
            for k in 0..3 {
                j[k * 3 + k] = y[k] / (2.0 * theta[k].sqrt());
            }
            Some(j)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::toy::*;
    use super::*;

    fn key() -> StreamKey {
        StreamKey::new(7, 11, 0)
    }

    struct SamplerOnly;
    impl ParamDensityModel for SamplerOnly {
        fn dim_x(&self) -> usize {
            1
        }
        fn dim_theta(&self) -> usize {
            1
        }
        fn sample(&self, theta: &[f64], _key: StreamKey) -> Vec<f64> {
            vec![theta[0]]
        }
    }

    /// Density given only numerically.
    struct LogDensityOnly;
    impl ParamDensityModel for LogDensityOnly {
        fn dim_x(&self) -> usize {
            1
        }
        fn dim_theta(&self) -> usize {
            1
        }
        fn sample(&self, theta: &[f64], key: StreamKey) -> Vec<f64> {
            GaussianMean.sample(theta, key)
        }
        fn log_density(&self, x: &[f64], theta: &[f64]) -> Option<f64> {
            GaussianMean.log_density(x, theta)
        }
    }

    #[test]
    fn missing_score_and_density_is_capability_error() {
        let err = score_gradient(&SamplerOnly, |x| x[0], &[1.0], 10, key()).unwrap_err();
        assert!(matches!(err, Error::Capability(_)));
        assert!(matches!(score_covariance(&SamplerOnly, &[1.0], 10, key()), Err(Error::Capability(_))));
    }

    #[test]
    fn missing_pushforward_is_capability_error() {
        let err = pathwise_gradient(&LogDensityOnly, |x| vec![2.0 * x[0]], &[1.0], 10, key()).unwrap_err();
        assert!(matches!(err, Error::Capability(_)));
    }

    #[test]
    fn fd_score_backfill_matches_analytic() {
        for &(x, th) in &[(0.3, 2.0), (-1.7, 0.5), (4.0, -3.0)] {
            let fd = score_or_fd(&LogDensityOnly, &[x], &[th]).unwrap()[0];
            let exact = x - th;
            assert!((fd - exact).abs() <= 1e-4 * exact.abs().max(1.0), "{fd} vs {exact}");
        }
    }

    #[test]
    fn analytic_scores_match_log_density_derivative() {
        let probes: [(&dyn ParamDensityModel, Vec<f64>, Vec<f64>); 3] = [
            (&GaussianMean, vec![0.4], vec![1.3]),
            (&ScaledGaussian { shift: 3.0 }, vec![2.1], vec![0.7]),
            (&DiagonalGaussian, vec![0.3, -1.2, 0.8], vec![0.5, 1.0, 2.0]),
        ];
        for (model, x, th) in probes {
            let exact = model.score(&x, &th).unwrap();
            // Route through the numerical fallback by hiding the score.
            struct Hide<'a>(&'a dyn ParamDensityModel);
            impl ParamDensityModel for Hide<'_> {
                fn dim_x(&self) -> usize {
                    self.0.dim_x()
                }
                fn dim_theta(&self) -> usize {
                    self.0.dim_theta()
                }
                fn sample(&self, t: &[f64], k: StreamKey) -> Vec<f64> {
                    self.0.sample(t, k)
                }
                fn log_density(&self, x: &[f64], t: &[f64]) -> Option<f64> {
                    self.0.log_density(x, t)
                }
            }
            let fd = score_or_fd(&Hide(model), &x, &th).unwrap();
            for (a, b) in exact.iter().zip(&fd) {
                assert!((a - b).abs() <= 1e-4 * a.abs().max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn score_constant_payoff_has_zero_mean() {
        let g = score_gradient(&GaussianMean, |_| 1.0, &[0.7], 20_000, key()).unwrap();
        assert!(g.value[0].abs() < 3.0 * g.std_err[0]);
    }

    #[test]
    fn score_gradient_of_second_moment() {
        let g = score_gradient(&GaussianMean, |x| x[0] * x[0], &[2.0], 200_000, key()).unwrap();
        assert!((g.value[0] - 4.0).abs() < 3.0 * g.std_err[0], "{:?}", g);
    }

    #[test]
    fn score_gradient_of_identity() {
        let g = score_gradient(&GaussianMean, |x| x[0], &[0.0], 100_000, key()).unwrap();
        assert!((g.value[0] - 1.0).abs() < 3.0 * g.std_err[0], "{:?}", g);
    }

    #[test]
    fn pathwise_with_parameter_free_map_is_exactly_zero() {
        struct Frozen;
        impl ParamDensityModel for Frozen {
            fn dim_x(&self) -> usize {
                1
            }
            fn dim_theta(&self) -> usize {
                1
            }
            fn sample(&self, _t: &[f64], k: StreamKey) -> Vec<f64> {
                vec![crate::rng::uniform01(k)]
            }
            fn base_sample(&self, k: StreamKey) -> Option<Vec<f64>> {
                Some(vec![crate::rng::uniform01(k)])
            }
            fn pushforward(&self, y: &[f64], _t: &[f64]) -> Option<Vec<f64>> {
                Some(y.to_vec())
            }
            fn pushforward_jacobian(&self, _y: &[f64], _t: &[f64]) -> Option<Vec<f64>> {
                Some(vec![0.0])
            }
        }
        let g = pathwise_gradient(&Frozen, |x| vec![3.0 * x[0] * x[0]], &[1.5], 1000, key()).unwrap();
        assert_eq!(g.value, vec![0.0]);
        assert_eq!(g.std_err, vec![0.0]);
    }

    #[test]
    fn pathwise_dilation_second_moment() {
        let m = ScaledGaussian { shift: 3.0 };
        let g = pathwise_gradient(&m, |x| vec![2.0 * x[0]], &[1.0], 100_000, key()).unwrap();
        assert!((g.value[0] - 2.0).abs() < 3.0 * g.std_err[0], "{:?}", g);
        let g = pathwise_gradient(&m, |_| vec![1.0], &[0.8], 100_000, key()).unwrap();
        assert!(g.value[0].abs() < 3.0 * g.std_err[0], "{:?}", g);
    }

    #[test]
    fn fd_rejects_nonpositive_step() {
        for step in [0.0, -1e-3, f64::NAN] {
            let err = coupled_fd_gradient(|t, _| t[0], &[1.0], &FdOptions::new(step), key()).unwrap_err();
            assert!(matches!(err, Error::Argument(_)));
        }
    }

    #[test]
    fn fd_evaluation_counts() {
        let mut calls = 0;
        coupled_fd_gradient(|t, _| { calls += 1; t.iter().sum() }, &[1.0, 2.0, 3.0, 4.0], &FdOptions::new(1e-3), key()).unwrap();
        assert_eq!(calls, 5);
        let mut calls = 0;
        let opts = FdOptions::new(1e-3).scheme(FdScheme::Central);
        coupled_fd_gradient(|t, _| { calls += 1; t.iter().sum() }, &[1.0, 2.0, 3.0], &opts, key()).unwrap();
        assert_eq!(calls, 6);
    }

    #[test]
    fn coupled_fd_of_parameter_free_evaluator_is_exactly_zero() {
        let j_hat = |_t: &[f64], k: StreamKey| (0..100).map(|i| crate::rng::uniform01(k.advance(i))).sum::<f64>();
        let g = coupled_fd_gradient(j_hat, &[0.5, 1.0], &FdOptions::new(1e-2).replicates(4), key()).unwrap();
        assert_eq!(g.value, vec![0.0, 0.0]);
        let g = coupled_fd_gradient(j_hat, &[0.5], &FdOptions::new(1e-2).mode(FdMode::Independent), key()).unwrap();
        assert_ne!(g.value[0], 0.0);
    }

    #[test]
    fn single_replicate_reports_unknown_error() {
        let g = coupled_fd_gradient(|t, _| t[0], &[1.0], &FdOptions::new(0.5), key()).unwrap();
        assert!(g.std_err[0].is_infinite() && g.std_err[0] > 0.0);
        assert!((g.value[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fisher_information_of_unit_gaussian() {
        let c = score_covariance(&GaussianMean, &[0.3], 100_000, key()).unwrap();
        assert!((c.matrix[0][0] - 1.0).abs() < 3.0 * c.std_err[0][0]);
        assert!(c.score_mean[0].abs() < 3.0 * c.score_mean_std_err[0]);
    }

    #[test]
    fn covariance_is_symmetric() {
        let c = score_covariance(&DiagonalGaussian, &[0.5, 1.0, 2.0], 5_000, key()).unwrap();
        for j in 0..3 {
            for k in 0..3 {
                assert!((c.matrix[j][k] - c.matrix[k][j]).abs() <= 1e-12);
            }
            // Fisher information for a variance parameter is 1/(2θ²).
            let th = [0.5, 1.0, 2.0][j];
            assert!((c.matrix[j][j] - 0.5 / (th * th)).abs() < 4.0 * c.std_err[j][j]);
        }
    }
}
