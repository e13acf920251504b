use super::collision::apply_b;
use super::forward::{CollisionTape, Outcome, StepRecord, VelocityEnsemble};
use super::kernel::CollisionKernel;
use super::Vec3;
use crate::error::{ensure, Error, Result};
use crate::scalar::Real;

/// A terminal observable φ(v) together with its velocity gradient.
pub trait VelocityObservable<T: Real>: Sync {
    fn value(&self, v: Vec3<T>) -> f64;
    fn gradient(&self, v: Vec3<T>) -> Vec3<T>;
}

/// φ(v) = v_x⁴.
#[derive(Debug, Clone, Copy, Default)]
pub struct VxFourth;

impl<T: Real> VelocityObservable<T> for VxFourth {
    fn value(&self, v: Vec3<T>) -> f64 {
        v.x.wide().powi(4)
    }

    fn gradient(&self, v: Vec3<T>) -> Vec3<T> {
        Vec3::new(T::lit(4.0) * v.x * v.x * v.x, T::zero(), T::zero())
    }
}

/// φ(v) = |v|².
#[derive(Debug, Clone, Copy, Default)]
pub struct SpeedSquared;

impl<T: Real> VelocityObservable<T> for SpeedSquared {
    fn value(&self, v: Vec3<T>) -> f64 {
        v.norm_sq().wide()
    }

    fn gradient(&self, v: Vec3<T>) -> Vec3<T> {
        v.scale(T::lit(2.0))
    }
}

/// Adjoint vectors γ_i^k together with the velocities v_i^k reconstructed
/// during the backward sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointEnsemble<T> {
    pub gamma: Vec<Vec3<T>>,
    pub velocities: Vec<Vec3<T>>,
    /// φ(v_i^M), cached at the start of the sweep.
    pub phi_terminal: Vec<f64>,
    pub level: usize,
    pub mass: f64,
}

impl<T: Real> AdjointEnsemble<T> {
    /// γ_i^M = (ρ/N) φ'(v_i^M) at level `level`.
    pub fn terminal<O: VelocityObservable<T> + ?Sized>(final_ensemble: &VelocityEnsemble<T>, observable: &O, level: usize) -> Self {
        let n = final_ensemble.len();
        let w = T::lit(final_ensemble.mass() / n as f64);
        let vs = final_ensemble.velocities().to_vec();
        Self {
            gamma: vs.iter().map(|&v| observable.gradient(v).scale(w)).collect(),
            phi_terminal: vs.iter().map(|&v| observable.value(v)).collect(),
            velocities: vs,
            level,
            mass: final_ensemble.mass(),
        }
    }

    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    /// Σ_i |γ_i|².
    pub fn norm_sq(&self) -> f64 {
        self.gamma.iter().map(|g| g.norm_sq().wide()).sum()
    }
}

/// Moves `adj` from level k+1 to level k using the record of step k.
pub fn adjoint_step<T: Real, K: CollisionKernel<T> + ?Sized>(
    adj: &mut AdjointEnsemble<T>,
    record: &StepRecord<T>,
    kernel: &K,
) -> Result<()> {
    ensure!(adj.level > 0, State, "adjoint sweep is already at level 0");
    let n = adj.len();
    let w = adj.mass / n as f64;
    let bound = record.sigma_bound;
    for (l, p) in record.pairs.iter().enumerate() {
        let (i, j) = (p.first as usize, p.second as usize);
        if i >= n || j >= n || i == j {
            return Err(Error::TapeCorruption(format!("pair {l} has invalid indices ({i}, {j}) for N = {n}")));
        }
        let score = match p.outcome {
            Outcome::Real => {
                let q = p.q.wide();
                if !(q > 0.0) {
                    return Err(Error::TapeCorruption(format!("real collision {l} with kernel value {q}")));
                }
                let (vi, vj) = apply_b(p.sphere, p.alpha, adj.velocities[i], adj.velocities[j]);
                adj.velocities[i] = vi;
                adj.velocities[j] = vj;
                let (gi, gj) = apply_b(p.sphere, p.alpha, adj.gamma[i], adj.gamma[j]);
                adj.gamma[i] = gi;
                adj.gamma[j] = gj;
                kernel.gradient(vi - vj, p.sphere).scale(T::lit(1.0 / q))
            }
            Outcome::VirtualOnly => {
                let slack = bound - p.q.wide();
                if !(slack > 0.0) {
                    return Err(Error::TapeCorruption(format!(
                        "rejected pair {l} has kernel value {} at the bound {bound}",
                        p.q.wide()
                    )));
                }
                let g = adj.velocities[i] - adj.velocities[j];
                -kernel.gradient(g, p.sphere).scale(T::lit(1.0 / slack))
            }
        };
        let c = T::lit(w * (adj.phi_terminal[i] + adj.phi_terminal[j]));
        let s = score.scale(c);
        adj.gamma[i] += s;
        adj.gamma[j] -= s;
    }
    adj.level -= 1;
    Ok(())
}

/// Backward sweep from the final ensemble to level 0.
pub fn adjoint_sweep<T: Real, K: CollisionKernel<T> + ?Sized, O: VelocityObservable<T> + ?Sized>(
    tape: &CollisionTape<T>,
    final_ensemble: &VelocityEnsemble<T>,
    kernel: &K,
    observable: &O,
) -> Result<AdjointEnsemble<T>> {
    ensure!(
        final_ensemble.len() == tape.n,
        Argument,
        "ensemble has {} particles, tape was recorded with {}",
        final_ensemble.len(),
        tape.n
    );
    let mut adj = AdjointEnsemble::terminal(final_ensemble, observable, tape.n_steps());
    for record in tape.steps.iter().rev() {
        adjoint_step(&mut adj, record, kernel)?;
    }
    Ok(adj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsmc::kernel::{Maxwellian, Vhs};
    use crate::dsmc::{run_dsmc, run_dsmc_observed, sample_initial_condition, BoundPolicy, DiagonalGaussianIc};
    use crate::rng::StreamKey;

    fn start(n: usize, seed: u64) -> VelocityEnsemble<f64> {
        sample_initial_condition(&DiagonalGaussianIc, &[0.5, 1.0, 1.0], n, StreamKey::new(seed, 0, 0))
            .unwrap()
            .0
    }

    #[test]
    fn zero_steps_give_terminal_data() {
        let e = start(100, 1);
        let (f, tape) = run_dsmc(&e, &Maxwellian, 0.1, 0, StreamKey::new(1, 0, 0), BoundPolicy::Auto).unwrap();
        let adj = adjoint_sweep(&tape, &f, &Maxwellian, &VxFourth).unwrap();
        for (g, v) in adj.gamma.iter().zip(e.velocities()) {
            assert_eq!(*g, Vec3::new(4.0 * v.x * v.x * v.x * (1.0 / 100.0), 0.0, 0.0));
        }
    }

    #[test]
    fn maxwellian_sweep_is_dual_to_tangent_propagation() {
        // Without score terms γ^k is the transpose of the tangent map, so
        // Σγ⁰·δv⁰ = Σγᴹ·δvᴹ for any initial perturbation δv⁰ carried forward
        // by the collision Jacobians. Σγ is conserved pair by pair, while
        // Σ|γ|² can only shrink because each Jacobian is a partial isometry.
        let e = start(2000, 2);
        let (f, tape) = run_dsmc(&e, &Maxwellian, 0.1, 20, StreamKey::new(2, 0, 0), BoundPolicy::Auto).unwrap();
        let mut dv: Vec<Vec3<f64>> = (0..2000).map(|i| start(2000, 90).velocities()[i]).collect();
        let dv0 = dv.clone();
        for rec in &tape.steps {
            for p in rec.pairs.iter().filter(|p| p.outcome == Outcome::Real) {
                let (i, j) = (p.first as usize, p.second as usize);
                let (a, b) = crate::dsmc::collision::apply_a(p.sphere, p.alpha, dv[i], dv[j]);
                dv[i] = a;
                dv[j] = b;
            }
        }
        let mut adj = AdjointEnsemble::terminal(&f, &VxFourth, tape.n_steps());
        let dot = |g: &[Vec3<f64>], d: &[Vec3<f64>]| g.iter().zip(d).map(|(a, b)| a.dot(*b)).sum::<f64>();
        let end = dot(&adj.gamma, &dv);
        let sum0 = adj.gamma.iter().fold(Vec3::zero(), |a, &g| a + g);
        let mut norm = adj.norm_sq();
        for rec in tape.steps.iter().rev() {
            adjoint_step(&mut adj, rec, &Maxwellian).unwrap();
            assert!(adj.norm_sq() <= norm * (1.0 + 1e-12));
            norm = adj.norm_sq();
        }
        let sum = adj.gamma.iter().fold(Vec3::zero(), |a, &g| a + g);
        assert!((sum - sum0).norm() <= 1e-12 * (1.0 + sum0.norm()));
        let start_dot = dot(&adj.gamma, &dv0);
        assert!((start_dot - end).abs() <= 1e-10 * end.abs().max(1e-12), "{start_dot} vs {end}");
    }

    #[test]
    fn backward_reconstruction_recovers_history() {
        let e = start(1000, 3);
        let kernel = Vhs::new(0.08, 0.5).unwrap();
        let mut history = Vec::new();
        let (f, tape) =
            run_dsmc_observed(&e, &kernel, 0.1, 10, StreamKey::new(3, 0, 0), BoundPolicy::Auto, |_, ens| history.push(ens.clone()))
                .unwrap();
        let mut adj = AdjointEnsemble::terminal(&f, &VxFourth, tape.n_steps());
        for k in (0..10).rev() {
            adjoint_step(&mut adj, &tape.steps[k], &kernel).unwrap();
            for (a, b) in adj.velocities.iter().zip(history[k].velocities()) {
                assert!((*a - *b).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn sweeps_are_deterministic() {
        let e = start(1000, 4);
        let kernel = Vhs::new(0.08, 0.5).unwrap();
        let (f, tape) = run_dsmc(&e, &kernel, 0.1, 5, StreamKey::new(4, 0, 0), BoundPolicy::Auto).unwrap();
        let a = adjoint_sweep(&tape, &f, &kernel, &VxFourth).unwrap();
        let b = adjoint_sweep(&tape, &f, &kernel, &VxFourth).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn score_terms_are_antisymmetric() {
        let e = start(200, 5);
        let kernel = Vhs::new(0.08, 0.5).unwrap();
        let (f, tape) = run_dsmc(&e, &kernel, 0.1, 1, StreamKey::new(5, 0, 0), BoundPolicy::Auto).unwrap();
        let mut adj = AdjointEnsemble::terminal(&f, &VxFourth, 1);
        // γ sums are preserved by B on each pair, so any change in Σγ would
        // come from an unbalanced score term
        let before = adj.gamma.iter().fold(Vec3::zero(), |a, &g| a + g);
        adjoint_step(&mut adj, &tape.steps[0], &kernel).unwrap();
        let after = adj.gamma.iter().fold(Vec3::zero(), |a, &g| a + g);
        assert!((after - before).norm() <= 1e-15);
    }

    #[test]
    fn mismatches_and_corrupt_records_are_rejected() {
        let e = start(100, 6);
        let kernel = Vhs::new(0.08, 0.5).unwrap();
        let (f, mut tape) = run_dsmc(&e, &kernel, 0.1, 2, StreamKey::new(6, 0, 0), BoundPolicy::Auto).unwrap();
        let small = start(50, 6);
        assert!(matches!(adjoint_sweep(&tape, &small, &kernel, &VxFourth), Err(Error::Argument(_))));
        let bound = tape.steps[0].sigma_bound;
        let rec = tape.steps[0].pairs.iter_mut().find(|p| p.outcome == Outcome::VirtualOnly).unwrap();
        rec.q = bound;
        assert!(matches!(adjoint_sweep(&tape, &f, &kernel, &VxFourth), Err(Error::TapeCorruption(_))));
    }
}
