use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use koopbound::bounds::{
    corollary1_bounds, corollary2_bound, corollary3_bound, default_grid_points,
    disturbance_admissible, estimate_lipschitz, parseval_energy, theorem2_bounds, BoundInputs,
    Horizon, RewardSample,
};
use koopbound::dmd::{
    action_operator_from_pair, dmd_exact, dmd_standard, relative_error, KoopmanModel,
};
use koopbound::env::uav::{initial_state, path_loss, serve_set, GuState, UavState};
use koopbound::env::{
    downlink_rate, fairness_index, linear_rollout, uav_rollout_detailed, FairnessMode,
    LinearReward, LinearSurrogateConfig, PolicyKind, UavEnvConfig,
};
use koopbound::hinf::{frequency_response, hinf_norm, TransferFunction};
use koopbound::trajectory::{
    build_state_snapshots, ensemble_mean, read_trajectories, write_trajectories, SnapshotKind,
    SnapshotPair, Trajectory, TrajectoryEnsemble,
};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0..1.0f64, rows * cols)
        .prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

fn square(max_n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (1..=max_n).prop_flat_map(|n| matrix(n, n))
}

fn rescaled(a: &DMatrix<f64>, radius: f64) -> DMatrix<f64> {
    let rho = a
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if rho < 1e-3 {
        DMatrix::identity(a.nrows(), a.nrows()) * radius
    } else {
        a * (radius / rho)
    }
}

fn sequence() -> impl Strategy<Value = Vec<DVector<f64>>> {
    (1usize..4, 1usize..120).prop_flat_map(|(dim, len)| {
        prop::collection::vec(
            prop::collection::vec(-5.0..5.0f64, dim).prop_map(DVector::from_vec),
            len,
        )
    })
}

fn ensemble(runs: usize, horizon: usize, seed: u64) -> TrajectoryEnsemble {
    let trajectories = (0..runs as u64)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed + r);
            use rand::Rng;
            let states = (0..=horizon)
                .map(|_| DVector::from_fn(2, |_, _| rng.random_range(-3.0..3.0)))
                .collect();
            let actions = (0..horizon)
                .map(|_| DVector::from_fn(1, |_, _| rng.random_range(-1.0..1.0)))
                .collect();
            let rewards = (0..horizon).map(|_| rng.random_range(-1.0..0.0)).collect();
            Trajectory::new(r, states, actions, rewards, seed + r).unwrap()
        })
        .collect();
    TrajectoryEnsemble::new(trajectories).unwrap()
}

fn multisets_match(a: &[Complex64], b: &[Complex64], tol: f64) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut used = vec![false; b.len()];
    a.iter().all(|x| {
        let best = (0..b.len())
            .filter(|&j| !used[j])
            .min_by(|&i, &j| (x - b[i]).norm().total_cmp(&(x - b[j]).norm()));
        match best {
            Some(j) if (x - b[j]).norm() <= tol => {
                used[j] = true;
                true
            }
            _ => false,
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mean_of_doubled_ensemble(runs in 1usize..5, horizon in 1usize..20, seed in 0u64..1000) {
        let e = ensemble(runs, horizon, seed);
        let mut doubled = e.trajectories().to_vec();
        doubled.extend(e.trajectories().iter().map(|t| Trajectory { run_id: t.run_id + runs as u64, ..t.clone() }));
        let a = ensemble_mean(&e).unwrap();
        let b = ensemble_mean(&TrajectoryEnsemble::new(doubled).unwrap()).unwrap();
        for (x, y) in a.mean_states.iter().zip(&b.mean_states) {
            prop_assert!((x - y).norm() <= 1e-12 * (1.0 + x.norm()));
        }
        for (x, y) in a.mean_rewards.iter().zip(&b.mean_rewards) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn snapshot_shift_consistency(horizon in 2usize..30, seed in 0u64..1000) {
        let mean = ensemble_mean(&ensemble(2, horizon, seed)).unwrap();
        let pair = build_state_snapshots(&mean).unwrap();
        for j in 0..pair.left.ncols() - 1 {
            prop_assert_eq!(pair.left.column(j + 1), pair.right.column(j));
        }
    }

    #[test]
    fn trajectory_file_round_trip(runs in 1usize..4, horizon in 1usize..15, seed in 0u64..1000) {
        let e = ensemble(runs, horizon, seed);
        let mut buf = Vec::new();
        write_trajectories(&e, &mut buf).unwrap();
        let back = read_trajectories(buf.as_slice(), Some((2, 1))).unwrap();
        prop_assert_eq!(back, e);
    }

    #[test]
    fn exact_dmd_eigen_residual(a in square(6), cols in 1usize..20, seed in 0u64..1000) {
        let n = a.nrows();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        let x = DMatrix::from_fn(n, cols, |_, _| rng.random_range(-1.0..1.0));
        let y = &a * &x;
        let pair = SnapshotPair::new(x, y, SnapshotKind::StateShifted).unwrap();
        let dmd = dmd_exact(&pair, 1e-10).unwrap();
        let k = dmd.operator.map(|v| Complex64::new(v, 0.0));
        for (lambda, phi) in dmd.eigenvalues.iter().zip(&dmd.modes) {
            prop_assert!((&k * phi - phi * *lambda).norm() <= 1e-6 * phi.norm());
        }
    }

    #[test]
    fn recovery_from_independent_initial_conditions(a in square(8), radius in 0.2..0.95f64, seed in 0u64..1000) {
        let a = rescaled(&a, radius);
        let n = a.nrows();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        let pairs: Vec<SnapshotPair> = (0..n)
            .map(|_| {
                let mut x = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
                let mut left = Vec::new();
                let mut right = Vec::new();
                for _ in 0..4 {
                    let next = &a * &x;
                    left.push(x.clone());
                    right.push(next.clone());
                    x = next;
                }
                SnapshotPair::new(DMatrix::from_columns(&left), DMatrix::from_columns(&right), SnapshotKind::StateShifted).unwrap()
            })
            .collect();
        let pair = SnapshotPair::concat(&pairs).unwrap();
        let dmd = dmd_standard(&pair, 1e-10).unwrap();
        prop_assert!(relative_error(&dmd.operator, &a) <= 1e-6, "{}", relative_error(&dmd.operator, &a));
    }

    #[test]
    fn standard_and_exact_agree(a in square(6), radius in 0.2..1.0f64, cols in 2usize..25, seed in 0u64..1000) {
        let a = rescaled(&a, radius);
        let n = a.nrows();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        let x = DMatrix::from_fn(n, cols, |_, _| rng.random_range(-1.0..1.0));
        let pair = SnapshotPair::new(x.clone(), &a * &x, SnapshotKind::StateShifted).unwrap();
        let s = dmd_standard(&pair, 1e-10).unwrap();
        let e = dmd_exact(&pair, 1e-10).unwrap();
        prop_assert!(multisets_match(&s.eigenvalues, &e.eigenvalues, 1e-8));
    }

    #[test]
    fn action_operator_is_least_squares(n in 1usize..5, m in 1usize..3, cols in 1usize..30, seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        let x = DMatrix::from_fn(n, cols, |_, _| rng.random_range(-1.0..1.0));
        let u = DMatrix::from_fn(m, cols, |_, _| rng.random_range(-1.0..1.0));
        let pair = SnapshotPair::new(x.clone(), u.clone(), SnapshotKind::StateAction).unwrap();
        let f = action_operator_from_pair(&pair, 1e-10).unwrap();
        let best = (&u - &f * &x).norm();
        for _ in 0..20 {
            let probe = &f + DMatrix::from_fn(m, n, |_, _| rng.random_range(-0.1..0.1));
            prop_assert!(best <= (&u - &probe * &x).norm() + 1e-12);
        }
    }

    #[test]
    fn dmd_scale_equivariance(a in square(5), c in prop_oneof![-10.0..-0.1f64, 0.1..10.0f64], seed in 0u64..1000) {
        let n = a.nrows();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        let x = DMatrix::from_fn(n, 3 * n, |_, _| rng.random_range(-1.0..1.0));
        let y = &a * &x;
        let base = dmd_exact(&SnapshotPair::new(x.clone(), y.clone(), SnapshotKind::StateShifted).unwrap(), 1e-10).unwrap();
        let both = dmd_exact(&SnapshotPair::new(&x * c, &y * c, SnapshotKind::StateShifted).unwrap(), 1e-10).unwrap();
        let right = dmd_exact(&SnapshotPair::new(x, &y * c, SnapshotKind::StateShifted).unwrap(), 1e-10).unwrap();
        let scale = 1e-8 * (1.0 + a.norm() * c.abs());
        prop_assert!(multisets_match(&base.eigenvalues, &both.eigenvalues, scale));
        let scaled: Vec<Complex64> = base.eigenvalues.iter().map(|l| l * c).collect();
        prop_assert!(multisets_match(&scaled, &right.eigenvalues, scale));
    }

    #[test]
    fn hinf_dominates_sampled_gain(a in square(4), radius in 0.0..0.97f64, omega in -3.2..3.2f64) {
        let k = rescaled(&a, radius);
        let tf = TransferFunction::resolvent(k).unwrap();
        let report = hinf_norm(&tf, 512, 1e-10).unwrap();
        let sample = frequency_response(&tf, omega).unwrap().sigma_max;
        prop_assert!(report.value >= sample - 1e-10 * (1.0 + sample), "{} < {}", report.value, sample);
        let mirror = frequency_response(&tf, -omega).unwrap().sigma_max;
        prop_assert!((sample - mirror).abs() <= 1e-10 * (1.0 + sample));
    }

    #[test]
    fn hinf_grid_doubling(a in square(4), radius in 0.0..0.97f64, grid in 16usize..512) {
        let tf = TransferFunction::resolvent(rescaled(&a, radius)).unwrap();
        let coarse = hinf_norm(&tf, grid, 1e-10).unwrap().value;
        let fine = hinf_norm(&tf, 2 * grid, 1e-10).unwrap().value;
        prop_assert!(fine >= coarse - 1e-10 * (1.0 + coarse), "{fine} < {coarse}");
    }

    #[test]
    fn hinf_scalar_and_normal_oracles(values in prop::collection::vec(-0.97..0.97f64, 1..5), q in square(5)) {
        let n = values.len();
        let scalar = hinf_norm(&TransferFunction::resolvent(DMatrix::from_element(1, 1, values[0])).unwrap(), 4096, 1e-10).unwrap();
        prop_assert!((scalar.value - 1.0 / (1.0 - values[0].abs())).abs() <= 1e-6);

        let basis = (q.view((0, 0), (q.nrows().min(n), q.nrows().min(n))).into_owned()
            + DMatrix::identity(q.nrows().min(n), q.nrows().min(n)) * 2.0)
            .resize(n, n, 1.0);
        let orth = basis.qr().q();
        let k = &orth * DMatrix::from_diagonal(&DVector::from_vec(values.clone())) * orth.transpose();
        let expected = values.iter().map(|a| 1.0 / (1.0 - a.abs())).fold(0.0, f64::max);
        let report = hinf_norm(&TransferFunction::resolvent(k).unwrap(), 4096, 1e-10).unwrap();
        prop_assert!((report.value - expected).abs() <= 1e-6, "{} vs {expected}", report.value);
    }

    #[test]
    fn parseval_consistency(w in sequence()) {
        let direct: f64 = w.iter().map(|v| v.norm_squared()).sum();
        let spectral = parseval_energy(&w, default_grid_points(w.len()));
        prop_assert!((spectral - direct).abs() <= 1e-8 * direct.max(f64::MIN_POSITIVE));
    }

    #[test]
    fn admissible_implies_necessary_conditions(w in sequence(), gamma in 0.0..200.0f64) {
        let adm = disturbance_admissible(&w, gamma, default_grid_points(w.len())).unwrap();
        if adm.admissible {
            prop_assert!(adm.energy <= gamma * gamma * (1.0 + 1e-9));
            prop_assert!(adm.max_step_norm <= gamma * (1.0 + 1e-9));
            prop_assert!(adm.necessary_conditions);
        }
    }

    #[test]
    fn bounds_are_monotone(
        base in prop::collection::vec(0.0..10.0f64, 6),
        bump in 0.0..5.0f64,
        which in 0usize..6,
        gamma_d in 0.0..0.99f64,
        k in 0usize..100,
    ) {
        let inputs = |v: &[f64]| BoundInputs {
            gamma: v[0], t_hinf: v[1], kf_hinf: v[2], l: v[3], q: v[4], c: v[5],
            gamma_d, horizon: Horizon::Finite(k),
        };
        let mut raised = base.clone();
        raised[which] += bump;
        let (lo, hi) = (inputs(&base), inputs(&raised));
        let (t_lo, t_hi) = (theorem2_bounds(lo.t_hinf, lo.gamma), theorem2_bounds(hi.t_hinf, hi.gamma));
        prop_assert!(t_hi.0 >= t_lo.0 && t_hi.1 >= t_lo.1);
        let (c_lo, c_hi) = (corollary1_bounds(lo.kf_hinf, lo.t_hinf, lo.gamma), corollary1_bounds(hi.kf_hinf, hi.t_hinf, hi.gamma));
        prop_assert!(c_hi.0 >= c_lo.0 && c_hi.1 >= c_lo.1);
        prop_assert!(corollary2_bound(&hi).unwrap() >= corollary2_bound(&lo).unwrap());
        prop_assert!(corollary3_bound(&hi).unwrap() >= corollary3_bound(&lo).unwrap());
        let longer = BoundInputs { horizon: Horizon::Finite(k + 1), ..lo };
        prop_assert!(corollary2_bound(&longer).unwrap() >= corollary2_bound(&lo).unwrap());
    }

    #[test]
    fn lipschitz_estimate_below_analytic(points in prop::collection::vec(prop::collection::vec(-10.0..10.0f64, 3), 2..60)) {
        let samples: Vec<RewardSample> = points
            .iter()
            .map(|p| {
                let x = DVector::from_vec(p.clone());
                RewardSample { reward: x.norm(), state: x, action: DVector::zeros(1) }
            })
            .collect();
        if let Ok(l) = estimate_lipschitz(&samples) {
            prop_assert!(l <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn fairness_relation(served in prop::collection::vec(any::<bool>(), 1..60)) {
        let j = served.len() as f64;
        let written = fairness_index(&served, FairnessMode::AsWritten);
        let standard = fairness_index(&served, FairnessMode::Standard);
        prop_assert!((written - standard / j).abs() <= 1e-15);
    }

    #[test]
    fn rate_decreases_with_distance(d in 1.0..500.0f64, step in 1e-3..50.0f64) {
        let cfg = UavEnvConfig::default();
        let near = downlink_rate(cfg.bandwidth_hz, path_loss(d, &cfg).unwrap(), &cfg);
        let far = downlink_rate(cfg.bandwidth_hz, path_loss(d + step, &cfg).unwrap(), &cfg);
        prop_assert!(far < near);
    }

    #[test]
    fn serve_set_is_a_fixed_point(seed in 0u64..10_000, j in 1usize..30, bandwidth in 1e8..2e9f64) {
        let cfg = UavEnvConfig { num_gus: j, bandwidth_hz: bandwidth, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = initial_state(&cfg, &mut rng);
        let served = serve_set(&state, &cfg);
        let count = served.iter().filter(|&&s| s).count();
        for (s, g) in served.iter().zip(&state.gus) {
            if *s {
                let (dx, dy) = (state.uav.0 - g.position.0, state.uav.1 - g.position.1);
                let d = (dx * dx + dy * dy + cfg.altitude_m * cfg.altitude_m).sqrt();
                prop_assert!(d <= cfg.coverage_m);
                let rate = downlink_rate(cfg.bandwidth_hz / count as f64, path_loss(d, &cfg).unwrap(), &cfg);
                prop_assert!(rate >= cfg.min_rate_bps);
            }
        }
    }

    #[test]
    fn uav_rollouts_reproducible_and_compliant(
        seed in 0u64..10_000,
        kappa in 0.05..2.0f64,
        lagged in any::<bool>(),
        gamma in 0.0..20.0f64,
    ) {
        let cfg = UavEnvConfig { num_gus: 6, step_s: kappa, ..Default::default() };
        let policy = if lagged { PolicyKind::LaggedCentroid } else { PolicyKind::CentroidGreedy };
        let a = uav_rollout_detailed(&cfg, policy, 60, 0, seed, None).unwrap();
        let b = uav_rollout_detailed(&cfg, policy, 60, 0, seed, None).unwrap();
        prop_assert_eq!(&a.trajectory, &b.trajectory);
        prop_assert_eq!(a.speed_violations, 0);
        let n = cfg.state_dim();
        let limit = cfg.step_s * cfg.v_max + 1e-9;
        for p in a.trajectory.states.windows(2) {
            let step = ((p[1][n - 2] - p[0][n - 2]).powi(2) + (p[1][n - 1] - p[0][n - 1]).powi(2)).sqrt();
            prop_assert!(step <= limit);
        }
        // GU-only disturbances leave the UAV's own moves compliant.
        let w: Vec<DVector<f64>> = (0..60)
            .map(|k| DVector::from_fn(n, |i, _| if i < n - 2 { gamma * ((k + i) as f64).sin() / 60.0 } else { 0.0 }))
            .collect();
        let d = uav_rollout_detailed(&cfg, policy, 60, 0, seed, Some(&w)).unwrap();
        prop_assert_eq!(d.speed_violations, 0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn linear_surrogate_ground_truth(a in square(3), f in matrix(1, 3), radius in 0.5..0.95f64, seed in 0u64..1000) {
        let a = rescaled(&a, radius);
        let n = a.nrows();
        let f = f.columns(0, n).into_owned();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        let cfg = LinearSurrogateConfig {
            a: a.clone(),
            f: f.clone(),
            noise_std: 0.0,
            x0_mean: DVector::from_fn(n, |_, _| rng.random_range(0.5..2.0)),
            x0_std: 0.0,
            horizon: 6 * n,
            seed,
            reward: LinearReward::default(),
        };
        let traj = linear_rollout(&cfg, None).unwrap();
        let mean = ensemble_mean(&TrajectoryEnsemble::new(vec![traj]).unwrap()).unwrap();
        let model = KoopmanModel::fit(&mean, 1e-10).unwrap();
        // Only a well-excited trajectory determines A; skip degenerate draws.
        let sv = &model.state_dmd.singular_values;
        prop_assume!(sv[n - 1] > 1e-6 * sv[0]);
        prop_assert!(relative_error(&model.state_operator, &a) <= 1e-6, "{}", relative_error(&model.state_operator, &a));
        prop_assert!(relative_error(&model.action_operator, &f) <= 1e-6);
    }
}

#[test]
fn uav_state_vector_layout() {
    let state = UavState {
        uav: (7.0, 8.0),
        gus: vec![
            GuState {
                position: (1.0, 2.0),
                speed: 0.0,
                heading: 0.0,
            },
            GuState {
                position: (3.0, 4.0),
                speed: 0.0,
                heading: 0.0,
            },
        ],
        step: 0,
    };
    assert_eq!(
        state.to_vector().as_slice(),
        &[1.0, 2.0, 3.0, 4.0, 7.0, 8.0]
    );
}
