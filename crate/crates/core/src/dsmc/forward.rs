use std::f64::consts::PI;

use rayon::prelude::*;

use super::collision::collide;
use super::kernel::{CollisionKernel, KernelKind};
use super::Vec3;
use crate::error::{ensure, Error, Result};
use crate::rng::{index_from_unit, unit_sphere_from_uniforms, Purpose, StreamKey};
use crate::scalar::Real;
use crate::stats::RunningStats;

/// Surface area of the unit sphere.
pub const SPHERE_AREA: f64 = 4.0 * PI;

/// Safety factor applied whenever Σ is computed from the ensemble.
pub const BOUND_MARGIN: f64 = 1.1;

/// N particle velocities with total mass ρ.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityEnsemble<T> {
    pub(crate) velocities: Vec<Vec3<T>>,
    pub(crate) mass: f64,
}

impl<T: Real> VelocityEnsemble<T> {
    pub fn new(velocities: Vec<Vec3<T>>) -> Result<Self> {
        ensure!(
            !velocities.is_empty() && velocities.len().is_multiple_of(2),
            Argument,
            "particle count must be even and positive (got {})",
            velocities.len()
        );
        ensure!(velocities.iter().all(|v| v.is_finite()), Argument, "velocities must be finite");
        Ok(Self { velocities, mass: 1.0 })
    }

    pub fn len(&self) -> usize {
        self.velocities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.velocities.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn velocities(&self) -> &[Vec3<T>] {
        &self.velocities
    }

    pub fn momentum(&self) -> [f64; 3] {
        let mut p = [0.0; 3];
        for v in &self.velocities {
            for (k, pk) in p.iter_mut().enumerate() {
                *pk += v[k].wide();
            }
        }
        p
    }

    /// Σ|v_i|².
    pub fn energy(&self) -> f64 {
        self.velocities.iter().map(|v| v.norm_sq().wide()).sum()
    }

    /// Directional temperatures: per-component variance about the mean.
    pub fn temperatures(&self) -> [f64; 3] {
        let mut t = [0.0; 3];
        for (k, tk) in t.iter_mut().enumerate() {
            let s: RunningStats = self.velocities.iter().map(|v| v[k].wide()).collect();
            *tk = s.variance() * (s.count() as f64 - 1.0) / s.count() as f64;
        }
        t
    }

    /// Sample mean of v_x⁴.
    pub fn fourth_moment_x(&self) -> f64 {
        self.velocities.iter().map(|v| v.x.wide().powi(4)).sum::<f64>() / self.len() as f64
    }

    /// max_i |v_i − v̄|; twice this bounds every pairwise relative speed.
    pub fn max_deviation(&self) -> f64 {
        let p = self.momentum();
        let n = self.len() as f64;
        let mean = Vec3::<T>::from_f64([p[0] / n, p[1] / n, p[2] / n]);
        self.velocities.iter().map(|&v| (v - mean).norm().wide()).fold(0.0, f64::max)
    }
}

/// What happened to a selected pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Real,
    VirtualOnly,
}

/// One selected pair of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairRecord<T> {
    pub first: u32,
    pub second: u32,
    /// Sphere parameter σ.
    pub sphere: Vec3<T>,
    /// Direction of the pre-collision relative velocity; with σ it determines
    /// the collision matrix used to undo the collision.
    pub alpha: Vec3<T>,
    pub q: T,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord<T> {
    pub mu: f64,
    pub sigma_bound: f64,
    pub pairs: Vec<PairRecord<T>>,
}

/// Everything needed to replay a DSMC run backward.
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionTape<T> {
    pub n: usize,
    pub dt: f64,
    pub mass: f64,
    pub seed: u64,
    pub kernel: KernelKind,
    pub steps: Vec<StepRecord<T>>,
    /// Number of times Σ had to be enlarged during the run.
    pub bound_refreshes: usize,
}

impl<T: Real> CollisionTape<T> {
    pub fn new(n: usize, dt: f64, mass: f64, seed: u64, kernel: KernelKind) -> Self {
        Self { n, dt, mass, seed, kernel, steps: Vec::new(), bound_refreshes: 0 }
    }

    pub fn n_steps(&self) -> usize {
        self.steps.len()
    }

    pub fn n_real(&self) -> usize {
        self.steps.iter().flat_map(|s| &s.pairs).filter(|p| p.outcome == Outcome::Real).count()
    }

    pub fn n_pairs(&self) -> usize {
        self.steps.iter().map(|s| s.pairs.len()).sum()
    }
}

/// How the majorant Σ is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum BoundPolicy {
    /// From the kernel and the initial ensemble.
    #[default]
    Auto,
    /// A given value (reused across runs whose draws must stay coupled).
    Fixed(f64),
}

/// Σ for `ensemble` under `policy`.
pub fn initial_bound<T: Real, K: CollisionKernel<T> + ?Sized>(
    kernel: &K,
    ensemble: &VelocityEnsemble<T>,
    policy: BoundPolicy,
) -> f64 {
    match policy {
        BoundPolicy::Fixed(s) => s,
        BoundPolicy::Auto if kernel.has_fixed_bound() => kernel.bound(T::zero()).wide(),
        BoundPolicy::Auto => BOUND_MARGIN * kernel.bound(T::lit(2.0 * ensemble.max_deviation())).wide(),
    }
}

/// N_c = ⌈Δt μ N / 2⌉ with μ = 4π Σ ρ, or a configuration error if Δt μ > 1.
pub fn pair_count(n: usize, dt: f64, sigma_bound: f64, mass: f64) -> Result<(f64, usize)> {
    let mu = SPHERE_AREA * sigma_bound * mass;
    ensure!(
        dt * mu <= 1.0,
        Configuration,
        "collision probability dt*mu = {} exceeds 1 (dt = {dt}, sigma bound = {sigma_bound})",
        dt * mu
    );
    let nc = (dt * mu * n as f64 / 2.0).ceil() as usize;
    Ok((mu, nc.min(n / 2)))
}

/// The first `2 * n_pairs` entries of a keyed Fisher–Yates shuffle of 0..n.
fn select_pairs(n: usize, n_pairs: usize, seed: u64, step: u64) -> Vec<u32> {
    let mut perm: Vec<u32> = (0..n as u32).collect();
    let mut block = [0.0; 4];
    for p in 0..2 * n_pairs {
        if p % 4 == 0 {
            block = StreamKey::for_purpose(seed, Purpose::DsmcPairs, step, (p / 4) as u64).uniforms();
        }
        let r = p + index_from_unit(block[p % 4], n - p);
        perm.swap(p, r);
    }
    perm.truncate(2 * n_pairs);
    perm
}

struct Proposal<T> {
    sphere: Vec3<T>,
    alpha: Vec3<T>,
    q: T,
    xi: f64,
}

/// One DSMC step (index `step`), appending its record to `tape`.
///
/// `sigma_bound` is enlarged in place (by [`BOUND_MARGIN`] over the largest
/// kernel value seen) and the step redrawn whenever a proposal exceeds it.
pub fn dsmc_step<T: Real, K: CollisionKernel<T> + ?Sized>(
    ensemble: &mut VelocityEnsemble<T>,
    kernel: &K,
    dt: f64,
    step: usize,
    key: StreamKey,
    sigma_bound: &mut f64,
    tape: &mut CollisionTape<T>,
) -> Result<()> {
    let n = ensemble.len();
    let seed = key.experiment_seed;
    loop {
        let (mu, nc) = pair_count(n, dt, *sigma_bound, ensemble.mass)?;
        let perm = select_pairs(n, nc, seed, step as u64);
        let vs = &ensemble.velocities;
        let proposals: Vec<Proposal<T>> = (0..nc)
            .into_par_iter()
            .map(|l| {
                let u = StreamKey::for_purpose(seed, Purpose::DsmcCollide, step as u64, l as u64).uniforms();
                let sphere = Vec3::from_f64(unit_sphere_from_uniforms(u[0], u[1]));
                let g = vs[perm[2 * l] as usize] - vs[perm[2 * l + 1] as usize];
                let r = g.norm();
                let alpha = if r > T::zero() { g.scale(r.recip()) } else { sphere };
                Proposal { sphere, alpha, q: kernel.evaluate(g, sphere), xi: u[2] }
            })
            .collect();
        let q_max = proposals.iter().map(|p| p.q.wide()).fold(0.0, f64::max);
        if q_max > *sigma_bound {
            let enlarged = BOUND_MARGIN * q_max;
            log::info!("step {step}: kernel value {q_max} exceeds bound {}; retrying with {enlarged}", *sigma_bound);
            *sigma_bound = enlarged;
            tape.bound_refreshes += 1;
            continue;
        }
        let bound = *sigma_bound;
        let mut pairs = Vec::with_capacity(nc);
        for (l, p) in proposals.into_iter().enumerate() {
            let (i, j) = (perm[2 * l], perm[2 * l + 1]);
            let accept = p.xi < p.q.wide() / bound;
            if accept {
                let (a, b) = collide(ensemble.velocities[i as usize], ensemble.velocities[j as usize], p.sphere);
                ensemble.velocities[i as usize] = a;
                ensemble.velocities[j as usize] = b;
            }
            pairs.push(PairRecord {
                first: i,
                second: j,
                sphere: p.sphere,
                alpha: p.alpha,
                q: p.q,
                outcome: if accept { Outcome::Real } else { Outcome::VirtualOnly },
            });
        }
        tape.steps.push(StepRecord { mu, sigma_bound: bound, pairs });
        return Ok(());
    }
}

/// Runs `steps` DSMC steps; `observe(k, ensemble)` sees the ensemble at every
/// level k = 0..=steps.
pub fn run_dsmc_observed<T: Real, K: CollisionKernel<T> + ?Sized>(
    ensemble0: &VelocityEnsemble<T>,
    kernel: &K,
    dt: f64,
    steps: usize,
    key: StreamKey,
    policy: BoundPolicy,
    mut observe: impl FnMut(usize, &VelocityEnsemble<T>),
) -> Result<(VelocityEnsemble<T>, CollisionTape<T>)> {
    ensure!(dt.is_finite() && dt >= 0.0, Argument, "invalid time step {dt}");
    if let BoundPolicy::Fixed(s) = policy {
        ensure!(s > 0.0 && s.is_finite(), Argument, "fixed bound must be positive");
    }
    let mut ens = ensemble0.clone();
    let mut tape = CollisionTape::new(ens.len(), dt, ens.mass, key.experiment_seed, kernel.kind());
    let mut bound = initial_bound(kernel, &ens, policy);
    if steps > 0 && !(bound > 0.0) {
        return Err(Error::Configuration(format!("collision bound must be positive, got {bound}")));
    }
    observe(0, &ens);
    for k in 0..steps {
        dsmc_step(&mut ens, kernel, dt, k, key, &mut bound, &mut tape)?;
        observe(k + 1, &ens);
    }
    Ok((ens, tape))
}

pub fn run_dsmc<T: Real, K: CollisionKernel<T> + ?Sized>(
    ensemble0: &VelocityEnsemble<T>,
    kernel: &K,
    dt: f64,
    steps: usize,
    key: StreamKey,
    policy: BoundPolicy,
) -> Result<(VelocityEnsemble<T>, CollisionTape<T>)> {
    run_dsmc_observed(ensemble0, kernel, dt, steps, key, policy, |_, _| {})
}

/// (ρ/N) Σ φ(v_i).
pub fn objective_phi<T: Real>(ensemble: &VelocityEnsemble<T>, phi: impl Fn(Vec3<T>) -> f64) -> f64 {
    let s: RunningStats = ensemble.velocities.iter().map(|&v| phi(v)).collect();
    ensemble.mass * s.mean()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsmc::kernel::{Maxwellian, Vhs};
    use crate::dsmc::{sample_initial_condition, DiagonalGaussianIc};
    use std::collections::HashSet;

    fn start(n: usize, seed: u64) -> VelocityEnsemble<f64> {
        sample_initial_condition(&DiagonalGaussianIc, &[0.5, 1.0, 1.0], n, StreamKey::new(seed, 0, 0))
            .unwrap()
            .0
    }

    fn vhs() -> Vhs {
        Vhs::new(1.0 / (4.0 * PI), 0.5).unwrap()
    }

    #[test]
    fn odd_ensembles_are_rejected() {
        assert!(VelocityEnsemble::<f64>::new(vec![Vec3::zero(); 3]).is_err());
        assert!(VelocityEnsemble::<f64>::new(vec![]).is_err());
    }

    #[test]
    fn probability_bound_is_enforced() {
        let e = start(100, 1);
        let err = run_dsmc(&e, &Maxwellian, 2.0, 1, StreamKey::new(1, 0, 0), BoundPolicy::Auto).unwrap_err();
        assert!(matches!(err, Error::Configuration(_)));
    }

    #[test]
    fn steps_conserve_and_use_disjoint_pairs() {
        let e = start(2000, 2);
        for kernel in [&Maxwellian as &dyn CollisionKernel<f64>, &vhs()] {
            let mut ens = e.clone();
            let mut tape = CollisionTape::new(ens.len(), 0.1, 1.0, 2, kernel.kind());
            let mut bound = initial_bound(kernel, &ens, BoundPolicy::Auto);
            for k in 0..5 {
                let (p0, e0) = (ens.momentum(), ens.energy());
                dsmc_step(&mut ens, kernel, 0.1, k, StreamKey::new(2, 0, 0), &mut bound, &mut tape).unwrap();
                let (p1, e1) = (ens.momentum(), ens.energy());
                for d in 0..3 {
                    assert!((p1[d] - p0[d]).abs() <= 1e-12 * e0.sqrt() * 2000.0);
                }
                assert!((e1 - e0).abs() <= 1e-12 * e0);
                let rec = tape.steps.last().unwrap();
                let mut seen = HashSet::new();
                for p in &rec.pairs {
                    assert!(seen.insert(p.first) && seen.insert(p.second));
                    if p.outcome == Outcome::Real {
                        assert!(p.q > 0.0 && p.q.wide() <= rec.sigma_bound);
                    }
                }
                let expect = (0.1 * rec.mu * 2000.0 / 2.0).ceil() as usize;
                assert_eq!(rec.pairs.len(), expect);
            }
        }
    }

    #[test]
    fn maxwellian_accepts_everything() {
        let (_, tape) = run_dsmc(&start(1000, 3), &Maxwellian, 0.1, 5, StreamKey::new(3, 0, 0), BoundPolicy::Auto).unwrap();
        assert_eq!(tape.n_real(), tape.n_pairs());
        assert!((tape.steps[0].mu - 1.0).abs() < 1e-15);
    }

    #[test]
    fn vhs_acceptance_matches_mean_ratio() {
        let e = start(40_000, 4);
        let (_, tape) = run_dsmc(&e, &vhs(), 0.1, 1, StreamKey::new(4, 0, 0), BoundPolicy::Auto).unwrap();
        let rec = &tape.steps[0];
        let n = rec.pairs.len() as f64;
        let accepted = rec.pairs.iter().filter(|p| p.outcome == Outcome::Real).count() as f64 / n;
        let ratio: f64 = rec.pairs.iter().map(|p| p.q / rec.sigma_bound).sum::<f64>() / n;
        let se = (ratio * (1.0 - ratio) / n).sqrt();
        assert!((accepted - ratio).abs() < 3.0 * se, "{accepted} vs {ratio}");
    }

    #[test]
    fn zero_steps_leave_ensemble_alone() {
        let e = start(100, 5);
        let (f, tape) = run_dsmc(&e, &vhs(), 0.1, 0, StreamKey::new(5, 0, 0), BoundPolicy::Auto).unwrap();
        assert_eq!(f, e);
        assert!(tape.steps.is_empty());
    }

    #[test]
    fn runs_are_replayable_across_thread_counts() {
        let e = start(4000, 6);
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| run_dsmc(&e, &vhs(), 0.1, 10, StreamKey::new(6, 0, 0), BoundPolicy::Auto).unwrap())
        };
        let (a, ta) = run(1);
        let (b, tb) = run(3);
        assert_eq!(a, b);
        assert_eq!(ta, tb);
    }

    #[test]
    fn longer_runs_extend_shorter_ones() {
        let e = start(1000, 7);
        let key = StreamKey::new(7, 0, 0);
        let (short, ts) = run_dsmc(&e, &Maxwellian, 0.1, 3, key, BoundPolicy::Auto).unwrap();
        let mut mid = None;
        let (_, tl) = run_dsmc_observed(&e, &Maxwellian, 0.1, 6, key, BoundPolicy::Auto, |k, ens| {
            if k == 3 {
                mid = Some(ens.clone());
            }
        })
        .unwrap();
        assert_eq!(mid.unwrap(), short);
        assert_eq!(&tl.steps[..3], &ts.steps[..]);
    }

    #[test]
    fn anisotropic_start_relaxes() {
        let e = start(20_000, 8);
        let mut traces = Vec::new();
        let (f, _) = run_dsmc_observed(&e, &Maxwellian, 0.1, 20, StreamKey::new(8, 0, 0), BoundPolicy::Auto, |_, ens| {
            let t = ens.temperatures();
            traces.push((t[0] + t[1] + t[2]) / 3.0);
        })
        .unwrap();
        let t0 = e.temperatures();
        let t1 = f.temperatures();
        let tbar = (t0[0] + t0[1] + t0[2]) / 3.0;
        // the anisotropy decays roughly like exp(-t/2) at unit collision rate
        assert!((t1[0] - tbar).abs() < 0.5 * (t0[0] - tbar).abs(), "{t0:?} -> {t1:?}");
        assert!(traces.iter().all(|t| (t - traces[0]).abs() < 1e-10));
    }

    #[test]
    fn objective_examples() {
        let e = start(100_000, 9);
        assert_eq!(objective_phi(&e, |_| 1.0), 1.0);
        let vals: Vec<f64> = e.velocities().iter().map(|v| v.x.powi(4)).collect();
        let s: RunningStats = vals.iter().copied().collect();
        assert!((objective_phi(&e, |v| v.x.powi(4)) - 0.75).abs() < 3.0 * s.std_err());
        let s: RunningStats = e.velocities().iter().map(|v| v.norm_sq()).collect();
        assert!((objective_phi(&e, |v| v.norm_sq()) - 2.5).abs() < 3.0 * s.std_err());
    }
}
