//! Property tests over the channel, codebook, policy and regret layers.

use approx::assert_relative_eq;
use nalgebra::DMatrix;
use num_complex::Complex;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hstbeam::bandit::{run_timeslot, BanditTable, PolicyConfig};
use hstbeam::baselines::{sequential_step, SequentialScanState};
use hstbeam::channel::{build_channel, evolve_paths, steering_vector, ArrayGeometry, PathState, IMMORTAL};
use hstbeam::codebook::{
    arm_id, beam_pair, measure_arm, noiseless_power, physical_channel, virtual_channel, BeamPair, Codebook,
    DenseBeamChannel, MeasurementConfig, Side, StreamModel,
};
use hstbeam::linalg::norm;
use hstbeam::regret::{lemma1_bound, run_synthetic, theorem1_bound, ArmNoise, SyntheticBanditSpec};
use hstbeam::sim::{Policy, ScenarioConfig, Simulation};
use hstbeam::CMatrix64;

type C64 = Complex<f64>;

fn path(id: u64, gain: C64, aod: f64, aoa: f64, doppler_hz: f64) -> PathState<f64> {
    PathState {
        path_id: id,
        is_los: id == 0,
        complex_gain: gain,
        aod,
        aoa,
        doppler_hz,
        birth_window: 0,
        death_window: IMMORTAL,
        reflector_x_m: None,
    }
}

fn to_nalgebra(h: &CMatrix64) -> DMatrix<C64> {
    DMatrix::from_fn(h.rows(), h.cols(), |i, j| h[(i, j)])
}

fn mcfg(noise: f64, max_measurements: usize) -> MeasurementConfig<f64> {
    MeasurementConfig {
        tx_power_w: 1.0,
        noise_power_w: noise,
        pilot_length: 8,
        tti_s: 0.25e-3,
        pilot_fraction: 0.2,
        max_measurements,
        stream_model: StreamModel::Sinr,
    }
}

/// A random channel on `n × n` arrays with `l` paths at arbitrary angles.
fn random_channel(n: usize, angles: &[(f64, f64, f64)]) -> CMatrix64 {
    let geom = ArrayGeometry::half_wavelength(n, 0.0107).unwrap();
    let paths: Vec<_> = angles
        .iter()
        .enumerate()
        .map(|(k, &(aod, aoa, mag))| path(k as u64, C64::from_polar(mag, 0.3 * k as f64), aod, aoa, 0.0))
        .collect();
    build_channel(&paths, &geom, &geom, 0.0).unwrap()
}

fn angle() -> impl Strategy<Value = f64> {
    -1.5f64..1.5
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn steering_vector_has_unit_norm(
        n in 1usize..128,
        spacing in 0.001f64..0.05,
        wavelength in 0.001f64..0.05,
        a in -10.0f64..10.0,
    ) {
        let geom = ArrayGeometry::new(n, spacing, wavelength).unwrap();
        let v = steering_vector(&geom, a).unwrap();
        prop_assert_eq!(v.len(), n);
        prop_assert!((norm(&v) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn channel_rank_is_bounded_by_path_count(
        n in 4usize..12,
        angles in prop::collection::vec((angle(), angle(), 0.01f64..1.0), 1..5),
    ) {
        let h = random_channel(n, &angles);
        let sv = to_nalgebra(&h).singular_values();
        let tol = 1e-9 * sv.max();
        let rank = sv.iter().filter(|&&s| s > tol).count();
        prop_assert!(rank <= angles.len(), "rank {} with {} paths", rank, angles.len());
    }

    #[test]
    fn doppler_phase_is_periodic(
        n in 2usize..10,
        aod in angle(),
        aoa in angle(),
        doppler in prop_oneof![-2000.0f64..-10.0, 10.0f64..2000.0],
        t in 0.0f64..0.01,
    ) {
        let geom = ArrayGeometry::half_wavelength(n, 0.0107).unwrap();
        let p = [path(0, C64::new(0.7, -0.2), aod, aoa, doppler)];
        let a = build_channel(&p, &geom, &geom, t).unwrap();
        let b = build_channel(&p, &geom, &geom, t + 1.0 / doppler.abs()).unwrap();
        prop_assert!(a.max_abs_diff(&b) < 1e-9);
    }

    #[test]
    fn arm_index_is_a_bijection(n_t in 1usize..64, n_r in 1usize..64, seed in any::<u64>()) {
        let arm = (seed % (n_t * n_r) as u64) as usize;
        let pair = beam_pair(arm, n_t);
        prop_assert!(pair.tx < n_t && pair.rx < n_r);
        prop_assert_eq!(arm_id(pair, n_t), arm);
        let tx = (seed as usize) % n_t;
        let rx = (seed as usize / 7) % n_r;
        prop_assert_eq!(beam_pair(arm_id(BeamPair { tx, rx }, n_t), n_t), BeamPair { tx, rx });
    }

    #[test]
    fn virtual_channel_inverts(
        n in 2usize..12,
        angles in prop::collection::vec((angle(), angle(), 0.01f64..1.0), 1..5),
    ) {
        let h = random_channel(n, &angles);
        let tx = Codebook::<f64>::dft(Side::Transmit, n).unwrap();
        let rx = Codebook::<f64>::dft(Side::Receive, n).unwrap();
        let hv = virtual_channel(&h, &tx, &rx).unwrap();
        let back = physical_channel(&hv, &tx, &rx).unwrap();
        prop_assert!(back.max_abs_diff(&h) < 1e-9);
    }

    #[test]
    fn birth_death_keeps_los_and_respects_cap(seed in any::<u64>(), birth in 0.0f64..1.0, max_paths in 1usize..6) {
        let cfg = ScenarioConfig { seed, max_paths, ..ScenarioConfig::default() };
        let scene = cfg.scene();
        let dynamics = cfg.dynamics().with_constant_birth(birth);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut paths = vec![hstbeam::channel::dynamics::initial_los(&scene, scene.train_x(0)).unwrap()];
        for w in 0..200u64 {
            let x = scene.train_x((w * cfg.wss_window_slots) as i64);
            paths = evolve_paths(&dynamics, &scene, &paths, w, x, &mut rng).unwrap();
            prop_assert_eq!(paths.iter().filter(|p| p.is_los).count(), 1);
            prop_assert!((1..=max_paths).contains(&paths.len()));
        }
    }

    #[test]
    fn lifetimes_stay_within_truncation(seed in any::<u64>(), mean in 0.1f64..0.6, sd in 0.0f64..1.0) {
        let cfg = ScenarioConfig { lifetime_mean_s: mean, lifetime_std_s: sd, ..ScenarioConfig::default() };
        let dynamics = cfg.dynamics();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..200 {
            let t = dynamics.sample_lifetime(&mut rng);
            prop_assert!(t >= dynamics.lifetime_min_s && t <= dynamics.lifetime_max_s);
        }
    }

    #[test]
    fn pulls_add_up_to_slots_times_streams(
        seed in any::<u64>(),
        m in 2usize..8,
        d_frac in 0.0f64..1.0,
        slots in 1u64..300,
        c in 0.0f64..2.0,
    ) {
        let d = 1 + ((m - 1) as f64 * d_frac) as usize % (m - 1);
        let h = random_channel(4, &[(0.3, -0.2, 1.0), (-0.8, 0.5, 0.4)]);
        let cb = Codebook::<f64>::dft(Side::Transmit, 4).unwrap();
        let ch = DenseBeamChannel::new(&h, &cb, &cb).unwrap();
        let pcfg = PolicyConfig {
            exploration_c: c,
            num_measure: m,
            num_streams: d,
            reward_ref_rate: 12.0,
            update_measured: false,
            adaptive_streams: seed % 2 == 0,
        };
        let meas = mcfg(1e-3, 8);
        let mut table = BanditTable::new(16);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..slots {
            run_timeslot(&mut table, &pcfg, &ch, &meas, &mut rng).unwrap();
        }
        prop_assert_eq!(table.clock, slots);
        prop_assert_eq!(table.total_pulls(), slots * d as u64);
    }

    #[test]
    fn lemma_bound_is_monotone(c in 0.1f64..5.0, dc in 0.0f64..2.0, delta in 0.01f64..1.0, n in 1u64..1_000_000, dn in 0u64..1_000_000) {
        let base = lemma1_bound(c, delta, n).unwrap();
        prop_assert!(lemma1_bound(c, delta, n + dn).unwrap() >= base);
        prop_assert!(lemma1_bound(c + dc, delta, n).unwrap() >= base);
    }

    #[test]
    fn theorem_bound_is_linear_in_suboptimal_arms(k in 1usize..20, gap in 0.05f64..0.9, n in 2u64..100_000) {
        let spec = |arms: usize| SyntheticBanditSpec {
            arm_means: std::iter::once(0.95).chain(std::iter::repeat_n(0.95 - gap, arms)).collect(),
            arm_noise: ArmNoise::Bernoulli,
            num_measure: 2,
            num_streams: 1,
            exploration_c: 1.0,
            horizon: n,
            num_seeds: 1,
            measurement_noise: 0.0,
            base_seed: 0,
        };
        let one = theorem1_bound(&spec(1), n).unwrap();
        let many = theorem1_bound(&spec(k), n).unwrap();
        assert_relative_eq!(many, k as f64 * one, max_relative = 1e-12);
    }
}

fn bandit_trace(kappa: f64, c: f64, seed: u64) -> Vec<(Vec<usize>, Vec<usize>)> {
    let h = random_channel(4, &[(0.3, -0.2, 1.0), (-0.8, 0.5, 0.4), (1.1, 0.9, 0.2)]);
    let cb = Codebook::<f64>::dft(Side::Transmit, 4).unwrap();
    let ch = DenseBeamChannel::new(&h, &cb, &cb).unwrap();
    let pcfg = PolicyConfig {
        exploration_c: c * kappa,
        num_measure: 4,
        num_streams: 2,
        reward_ref_rate: 16.0 / kappa,
        update_measured: false,
        adaptive_streams: true,
    };
    let mut table = BanditTable::new(16);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..400)
        .map(|_| {
            let out = run_timeslot(&mut table, &pcfg, &ch, &mcfg(1e-2, 8), &mut rng).unwrap();
            (out.measured, out.chosen)
        })
        .collect()
}

#[test]
fn reward_scale_and_exploration_scale_cancel() {
    // Power-of-two factors keep the scaled arithmetic exact.
    let reference = bandit_trace(1.0, 0.7, 11);
    for kappa in [0.5, 0.25, 0.125] {
        assert_eq!(bandit_trace(kappa, 0.7, 11), reference, "kappa {kappa}");
    }
}

#[test]
fn identical_seed_gives_identical_selections() {
    assert_eq!(bandit_trace(1.0, 1.0, 5), bandit_trace(1.0, 1.0, 5));
    assert_ne!(bandit_trace(1.0, 1.0, 5), bandit_trace(1.0, 1.0, 6));
}

#[test]
fn noisy_probes_never_starve_an_arm() {
    // With exact probes the globally worst arm never wins a probe and stays unpulled.
    let spec = SyntheticBanditSpec {
        arm_means: vec![0.9, 0.6, 0.4, 0.2, 0.1],
        arm_noise: ArmNoise::Bernoulli,
        num_measure: 2,
        num_streams: 1,
        exploration_c: 1.0,
        horizon: 1 << 16,
        num_seeds: 1,
        measurement_noise: 0.3,
        base_seed: 3,
    };
    let trace = run_synthetic(&spec, 0, &[1 << 10, 1 << 13, 1 << 16]).unwrap();
    for arm in 0..spec.arm_means.len() {
        let counts: Vec<u64> = trace.pulls.iter().map(|p| p[arm]).collect();
        assert!(counts.windows(2).all(|w| w[1] > w[0]), "arm {arm}: {counts:?}");
    }
}

#[test]
fn deterministic_rewards_satisfy_the_regret_identity() {
    let spec = SyntheticBanditSpec {
        arm_means: vec![0.8, 0.7, 0.45, 0.3, 0.05],
        arm_noise: ArmNoise::Deterministic,
        num_measure: 3,
        num_streams: 1,
        exploration_c: 0.8,
        horizon: 5_000,
        num_seeds: 1,
        measurement_noise: 0.05,
        base_seed: 9,
    };
    let trace = run_synthetic(&spec, 0, &[100, 1_000, 5_000]).unwrap();
    for (k, pulls) in trace.pulls.iter().enumerate() {
        let identity: f64 = pulls
            .iter()
            .zip(&spec.arm_means)
            .map(|(&n, &mu)| n as f64 * (0.8 - mu))
            .sum();
        assert_relative_eq!(trace.pseudo_regret[k], identity, epsilon = 1e-9);
        assert_relative_eq!(trace.realized_regret[k], identity, epsilon = 1e-9);
    }
}

#[test]
fn measurement_is_unbiased() {
    let h = random_channel(8, &[(0.4, -0.3, 1e-4), (-0.9, 0.2, 3e-5)]);
    let cb = Codebook::<f64>::dft(Side::Transmit, 8).unwrap();
    let ch = DenseBeamChannel::new(&h, &cb, &cb).unwrap();
    let cfg = mcfg(1e-8, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for arm in [0, 13, 42] {
        let draws: Vec<f64> = (0..20_000)
            .map(|_| measure_arm(&ch, arm, &cfg, &mut rng).unwrap().measured_power_w)
            .collect();
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let var = draws.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let expect = noiseless_power(&ch, arm, &cfg) + cfg.noise_power_w;
        assert!(
            (mean - expect).abs() <= 3.0 * (var / n).sqrt(),
            "arm {arm}: {mean} vs {expect}"
        );
    }
}

#[test]
fn cold_sequential_scan_covers_every_arm() {
    let h = CMatrix64::zeros(4, 8);
    let tx = Codebook::<f64>::dft(Side::Transmit, 8).unwrap();
    let rx = Codebook::<f64>::dft(Side::Receive, 4).unwrap();
    let ch = DenseBeamChannel::new(&h, &tx, &rx).unwrap();
    let (m, d) = (6, 2);
    let mut state = SequentialScanState::new();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut seen = [false; 32];
    for _ in 0..32 / (m - d) {
        let out = sequential_step(&mut state, m, d, false, &ch, &mcfg(1e-3, 8), &mut rng).unwrap();
        for a in out.measured {
            seen[a] = true;
        }
    }
    assert!(seen.iter().all(|&s| s));
}

#[test]
fn replayed_traverses_learn_against_a_fixed_genie() {
    let seeds = 20;
    let mut se = [0.0f64; 3];
    for seed in 1..=seeds {
        let cfg = ScenarioConfig {
            seed,
            n_t: 4,
            n_r: 4,
            num_traverses: 3,
            bin_len_slots: 1_000,
            ..ScenarioConfig::default()
        };
        let sim = Simulation::new(cfg).unwrap();
        let bandit = sim.run(Policy::Bandit).unwrap();
        let genie = &bandit.traverses[0].mean_genie_se;
        for (k, s) in bandit.traverses.iter().enumerate() {
            assert_eq!(s.mean_genie_se, *genie);
            se[k] += s.mean_policy_se / seeds as f64;
        }
    }
    assert!(se[0] <= se[1] && se[1] <= se[2], "{se:?}");
}
