use super::adjoint::AdjointEnsemble;
use super::forward::VelocityEnsemble;
use super::Vec3;
use crate::error::{ensure, Result};
use crate::mc_gradients::{coupled_fd_gradient, EstimatorMethod, FdMode, FdOptions, GradientEstimate};
use crate::rng::{sample_standard_normal3, Purpose, StreamKey};
use crate::scalar::Real;
use crate::stats::RunningStats;

/// A reparameterized initial distribution v = T(ε, θ), ε ~ N(0, I₃).
pub trait InitialConditionModel: Sync {
    fn dim_theta(&self) -> usize;

    fn check_theta(&self, theta: &[f64]) -> Result<()>;

    fn pushforward(&self, eps: [f64; 3], theta: &[f64]) -> [f64; 3];

    /// Column k is ∂T/∂θ_k.
    fn jacobian(&self, eps: [f64; 3], theta: &[f64]) -> Vec<[f64; 3]>;
}

/// Anisotropic Gaussian with θ = (T_x, T_y, T_z): T(ε, θ) = (√T_k ε_k)_k.
#[derive(Debug, Clone, Copy, Default)]
pub struct DiagonalGaussianIc;

impl InitialConditionModel for DiagonalGaussianIc {
    fn dim_theta(&self) -> usize {
        3
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        ensure!(theta.len() == 3, Argument, "expected three temperatures, got {}", theta.len());
        ensure!(
            theta.iter().all(|t| *t > 0.0 && t.is_finite()),
            Argument,
            "temperatures must be positive: {theta:?}"
        );
        Ok(())
    }

    fn pushforward(&self, eps: [f64; 3], theta: &[f64]) -> [f64; 3] {
        [theta[0].sqrt() * eps[0], theta[1].sqrt() * eps[1], theta[2].sqrt() * eps[2]]
    }

    fn jacobian(&self, eps: [f64; 3], theta: &[f64]) -> Vec<[f64; 3]> {
        (0..3)
            .map(|k| {
                let mut col = [0.0; 3];
                col[k] = eps[k] / (2.0 * theta[k].sqrt());
                col
            })
            .collect()
    }
}

/// The parameters and base draws an ensemble was built from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReparameterizedInitial {
    pub theta: Vec<f64>,
    pub eps: Vec<[f64; 3]>,
}

/// Draws ε_i keyed by `(seed, DsmcInitial, i)` and pushes them forward.
pub fn sample_initial_condition<T: Real, M: InitialConditionModel + ?Sized>(
    model: &M,
    theta: &[f64],
    n: usize,
    key: StreamKey,
) -> Result<(VelocityEnsemble<T>, ReparameterizedInitial)> {
    model.check_theta(theta)?;
    let eps: Vec<[f64; 3]> = (0..n as u64)
        .map(|i| sample_standard_normal3(StreamKey::for_purpose(key.experiment_seed, Purpose::DsmcInitial, i, 0)))
        .collect();
    let vs = eps.iter().map(|&e| Vec3::from_f64(model.pushforward(e, theta))).collect();
    Ok((VelocityEnsemble::new(vs)?, ReparameterizedInitial { theta: theta.to_vec(), eps }))
}

/// D_θJ ≈ Σ_i γ_i⁰ · ∂_θT(ε_i, θ), with standard errors from the spread of
/// the per-particle terms.
pub fn initial_condition_gradient<T: Real, M: InitialConditionModel + ?Sized>(
    adjoint: &AdjointEnsemble<T>,
    model: &M,
    initial: &ReparameterizedInitial,
) -> Result<GradientEstimate> {
    ensure!(adjoint.level == 0, State, "adjoint ensemble is at level {}, not 0", adjoint.level);
    ensure!(
        initial.eps.len() == adjoint.len(),
        State,
        "{} stored base draws for {} particles",
        initial.eps.len(),
        adjoint.len()
    );
    model.check_theta(&initial.theta)?;
    let n = adjoint.len();
    let mut stats = vec![RunningStats::new(); model.dim_theta()];
    for (g, &e) in adjoint.gamma.iter().zip(&initial.eps) {
        let g = g.to_f64();
        for (s, col) in stats.iter_mut().zip(model.jacobian(e, &initial.theta)) {
            s.push(n as f64 * (g[0] * col[0] + g[1] * col[1] + g[2] * col[2]));
        }
    }
    Ok(GradientEstimate::from_stats(&stats, n, EstimatorMethod::Adjoint))
}

/// Coupled (common random number) finite differences of a full forward
/// pipeline `runner(θ, key) -> J`. Forward differences, one replicate.
pub fn fd_reference_gradient<F>(runner: F, theta: &[f64], step: f64, key: StreamKey) -> Result<GradientEstimate>
where
    F: FnMut(&[f64], StreamKey) -> f64,
{
    fd_reference_gradient_with(runner, theta, &FdOptions::new(step), key)
}

/// As [`fd_reference_gradient`] with explicit scheme and replicate count;
/// the coupling mode is always common random numbers.
pub fn fd_reference_gradient_with<F>(runner: F, theta: &[f64], opts: &FdOptions, key: StreamKey) -> Result<GradientEstimate>
where
    F: FnMut(&[f64], StreamKey) -> f64,
{
    let opts = opts.mode(FdMode::Coupled);
    coupled_fd_gradient(runner, theta, &opts, key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsmc::{adjoint_sweep, objective_phi, run_dsmc, BoundPolicy, Maxwellian, VxFourth};

    #[test]
    fn pushforward_moments() {
        let (e, init) = sample_initial_condition::<f64, _>(&DiagonalGaussianIc, &[0.5, 1.0, 2.0], 200_000, StreamKey::new(1, 0, 0)).unwrap();
        let t = e.temperatures();
        for (k, want) in [0.5, 1.0, 2.0].iter().enumerate() {
            assert!((t[k] - want).abs() < 0.02 * want, "{t:?}");
        }
        assert_eq!(init.eps.len(), 200_000);
        assert!(sample_initial_condition::<f64, _>(&DiagonalGaussianIc, &[0.5, -1.0, 1.0], 10, StreamKey::new(1, 0, 0)).is_err());
    }

    fn zero_horizon(theta: &[f64], n: usize, seed: u64) -> GradientEstimate {
        let key = StreamKey::new(seed, 0, 0);
        let (e, init) = sample_initial_condition::<f64, _>(&DiagonalGaussianIc, theta, n, key).unwrap();
        let (f, tape) = run_dsmc(&e, &Maxwellian, 0.1, 0, key, BoundPolicy::Auto).unwrap();
        let adj = adjoint_sweep(&tape, &f, &Maxwellian, &VxFourth).unwrap();
        initial_condition_gradient(&adj, &DiagonalGaussianIc, &init).unwrap()
    }

    #[test]
    fn zero_horizon_matches_gaussian_moments() {
        let g = zero_horizon(&[0.5, 1.0, 1.0], 200_000, 2);
        assert!((g.value[0] - 3.0).abs() < 3.0 * g.std_err[0], "{g:?}");
        assert_eq!(g.value[1], 0.0);
        assert_eq!(g.value[2], 0.0);
    }

    #[test]
    fn missing_draws_are_a_state_error() {
        let key = StreamKey::new(3, 0, 0);
        let (e, _) = sample_initial_condition::<f64, _>(&DiagonalGaussianIc, &[0.5, 1.0, 1.0], 10, key).unwrap();
        let (f, tape) = run_dsmc(&e, &Maxwellian, 0.1, 0, key, BoundPolicy::Auto).unwrap();
        let adj = adjoint_sweep(&tape, &f, &Maxwellian, &VxFourth).unwrap();
        let empty = ReparameterizedInitial { theta: vec![0.5, 1.0, 1.0], eps: vec![] };
        assert!(matches!(initial_condition_gradient(&adj, &DiagonalGaussianIc, &empty), Err(crate::Error::State(_))));
    }

    #[test]
    fn fd_reference_uses_dim_plus_one_runs() {
        let mut runs = 0;
        let runner = |theta: &[f64], key: StreamKey| {
            runs += 1;
            let (e, _) = sample_initial_condition::<f64, _>(&DiagonalGaussianIc, theta, 100_000, key).unwrap();
            objective_phi(&e, |v| v.x.powi(4))
        };
        let g = fd_reference_gradient(runner, &[0.5, 1.0, 1.0], 1e-2, StreamKey::new(4, 0, 0)).unwrap();
        assert_eq!(runs, 4);
        // coupled differences of 3 T_x² E[ε⁴]/3: slope 6 T_x + 3Δθ
        let se = zero_horizon(&[0.5, 1.0, 1.0], 100_000, 4).std_err[0];
        assert!((g.value[0] - 3.0).abs() < 3.0 * se + 0.05, "{g:?}");
        assert_eq!(g.value[1], 0.0);
    }
}
