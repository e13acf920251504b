use adjmc::rte::fvm::{fvm_reference, FvmGrid};
use adjmc::rte::*;
use adjmc::stats::{ks_uniform, RunningStats};
use adjmc::{BinEdges, StreamKey};

fn payoff(x: f64, v: f64) -> f64 {
    if x < 0.0 {
        v * v
    } else {
        0.0
    }
}

fn benchmark_sigma() -> SigmaField<f64> {
    SigmaField::benchmark(80).unwrap()
}

#[test]
fn final_velocities_stay_uniform() {
    let cfg = RteConfig::standard(0.5, 50, 1_000_000).unwrap();
    let mut v = Vec::with_capacity(cfg.n_particles);
    for_each_block(&cfg, &benchmark_sigma(), &SpatialMixture::two_bumps(), StreamKey::new(3, 0, 0), DEFAULT_BLOCK, |tape| {
        v.extend((0..tape.n_particles()).map(|n| tape.final_state(n).1));
        Ok(())
    })
    .unwrap();
    let d = ks_uniform(&v, -1.0, 1.0);
    // 0.1% critical value of the Kolmogorov distribution
    assert!(d * (v.len() as f64).sqrt() < 1.95, "KS statistic {d}");
}

#[test]
fn kinetic_energy_is_one_third() {
    let cfg = RteConfig::standard(0.5, 50, 200_000).unwrap();
    let init = sample_initial(&cfg, &SpatialMixture::two_bumps(), StreamKey::new(5, 0, 0)).unwrap();
    let tape = run_forward(&cfg, &benchmark_sigma(), &init, StreamKey::new(5, 0, 0)).unwrap();
    let s: RunningStats = (0..tape.n_particles()).map(|n| tape.final_state(n).1.powi(2)).collect();
    assert!((s.mean() - 1.0 / 3.0).abs() < 3.0 * s.std_err());
    assert!((objective_final(&tape, |_, v| v * v) - s.mean()).abs() < 1e-12);
    let j = objective_final(&tape, payoff);
    assert!(j > 0.0 && j < 1.0 / 3.0, "J = {j}");
}

#[test]
fn blocked_run_matches_single_tape() {
    let cfg = RteConfig::standard(0.5, 20, 3000).unwrap();
    let sigma = benchmark_sigma();
    let f0 = SpatialMixture::two_bumps();
    let key = StreamKey::new(11, 0, 0);
    let bins = BinEdges::uniform(-2.0, 2.0, 16).unwrap();
    let whole = particle_gradients(&cfg, &sigma, &f0, payoff, key, &bins, 10, cfg.n_particles).unwrap();
    let blocked = particle_gradients(&cfg, &sigma, &f0, payoff, key, &bins, 10, 700).unwrap();
    assert!((whole.objective - blocked.objective).abs() < 1e-14);
    for (a, b) in whole.p_dto.values.iter().zip(&blocked.p_dto.values) {
        assert!((a - b).abs() < 1e-12);
    }
    for (a, b) in whole.p_otd.values.iter().zip(&blocked.p_otd.values) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn conserved_payoff_has_zero_gradient() {
    // total mass does not depend on σ
    let cfg = RteConfig::standard(0.5, 50, 100_000).unwrap();
    let bins = BinEdges::uniform(-2.0, 2.0, 40).unwrap();
    let g = particle_gradients(&cfg, &benchmark_sigma(), &SpatialMixture::two_bumps(), |_, _| 1.0, StreamKey::new(17, 0, 0), &bins, 20, DEFAULT_BLOCK)
        .unwrap();
    assert!(g.p_otd.values.iter().all(|x| x.abs() < 1e-12), "{:?}", g.p_otd.values);
    let se = g.p_dto.std_err.as_ref().unwrap();
    let inside = g.p_dto.values.iter().zip(se).filter(|(v, s)| v.abs() <= 3.0 * **s).count();
    assert!(inside * 10 >= 9 * bins.len(), "{inside}/{}", bins.len());
}

#[test]
fn otd_and_dto_agree_binwise() {
    let cfg = RteConfig::standard(0.5, 50, 400_000).unwrap();
    let bins = BinEdges::uniform(-2.0, 2.0, 40).unwrap();
    let g = particle_gradients(&cfg, &benchmark_sigma(), &SpatialMixture::two_bumps(), payoff, StreamKey::new(23, 0, 0), &bins, 20, DEFAULT_BLOCK)
        .unwrap();
    let se = g.p_dto.std_err.as_ref().unwrap();
    let agree = (0..bins.len()).filter(|&j| (g.p_otd.values[j] - g.p_dto.values[j]).abs() <= 3.0 * se[j]).count();
    assert!(agree * 10 >= 9 * bins.len(), "{agree}/{}", bins.len());
}

#[test]
fn coarse_fvm_is_visibly_off_the_fine_reference() {
    let sigma = benchmark_sigma();
    let f0 = SpatialMixture::two_bumps();
    let init = |x: f64, _| f0.density(x) / 2.0;
    let fine = FvmGrid::new((-2.0, 2.0), 800, (-1.0, 1.0), 40, 0.5, 500).unwrap();
    let coarse = FvmGrid::new((-2.0, 2.0), 80, (-1.0, 1.0), 40, 0.5, 50).unwrap();
    let bins = coarse.x_bins();
    let reference = fvm_reference(&fine, &sigma, init, payoff).unwrap().rebin(&bins);
    let rough = fvm_reference(&coarse, &sigma, init, payoff).unwrap();
    let rel = rough.relative_l2(&reference).unwrap();
    assert!(rel > 0.01 && rel < 0.5, "relative difference {rel}");
}

#[test]
fn tape_survives_a_file_round_trip() {
    let cfg = RteConfig::standard(0.5, 10, 500).unwrap();
    let key = StreamKey::new(29, 0, 0);
    let init = sample_initial(&cfg, &SpatialMixture::two_bumps(), key).unwrap();
    let tape = run_forward(&cfg, &benchmark_sigma(), &init, key).unwrap();
    let mut buf = Vec::new();
    write_tape(&tape, &mut buf).unwrap();
    let back: ParticleTrajectoryTape<f64> = read_tape(buf.as_slice()).unwrap();
    let bins = BinEdges::uniform(-2.0, 2.0, 8).unwrap();
    let a = p_dto_gradient(&tape, payoff, &bins).unwrap();
    let b = p_dto_gradient(&back, payoff, &bins).unwrap();
    assert_eq!(a.values, b.values);
    assert!(read_tape::<f64, _>(&buf[..buf.len() / 2]).is_err());

    let mut csv = Vec::new();
    write_final_marginals_csv(&tape, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.lines().count() > 1);
}
