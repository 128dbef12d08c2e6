use nalgebra::DMatrix;
use proptest::prelude::*;

use subspace_limits::cli::config::{apply_override, experiment, parse_table};
use subspace_limits::harness::{fit_rate, AlgorithmSpec, ExperimentConfig, InitSpec, ModelSpec, RateFit, RunSpec};
use subspace_limits::linalg::cosine_similarity;
use subspace_limits::model::{correlated_init, sample_observation, trial_rng, SubspaceModel};
use subspace_limits::schedule::StepSchedule;
use subspace_limits::trackers::{estimate, Algorithm, TrackerParams, TrackerState};

fn algorithm() -> impl Strategy<Value = Algorithm> {
    prop_oneof![Just(Algorithm::Oja), Just(Algorithm::Grouse), Just(Algorithm::Petrels)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn observations_are_reproducible(seed in any::<u64>(), trial in 0u64..1000, alpha in 0.05f64..1.0) {
        let mut rng = trial_rng(seed, trial);
        let model = SubspaceModel::random(40, 2, vec![2.0, 1.0], 0.5, alpha, &mut rng).unwrap();
        let a = sample_observation(&model, 3, &mut trial_rng(seed, trial));
        let b = sample_observation(&model, 3, &mut trial_rng(seed, trial));
        prop_assert_eq!(a, b);
    }

    #[test]
    fn trackers_keep_a_valid_estimate(
        algo in algorithm(),
        seed in any::<u64>(),
        tau in 0.05f64..1.5,
        alpha in 0.2f64..1.0,
        q0 in 0.1f64..1.0,
    ) {
        let n = 60;
        let mut rng = trial_rng(seed, 0);
        let model = SubspaceModel::random(n, 2, vec![3.0, 2.0], 1.0, alpha, &mut rng).unwrap();
        let x0 = correlated_init(&model.u, q0, &mut rng).unwrap();
        let params = TrackerParams::with_defaults(alpha, StepSchedule::constant(tau), 3.0, 1.0);
        let mut st = TrackerState::new(algo, x0, params, alpha).unwrap();
        for k in 0..600 {
            st.step(&sample_observation(&model, k, &mut rng)).unwrap();
        }
        let x = estimate(&st).unwrap();
        prop_assert!((x.tr_mul(&x) - DMatrix::identity(2, 2)).amax() < 1e-8);
        let cos = cosine_similarity(&model.u, &x).unwrap().cosines;
        prop_assert!(cos.iter().all(|c| (0.0..=1.0).contains(c)));
        prop_assert!(cos[0] >= cos[1]);
    }

    #[test]
    fn fit_rate_recovers_power_laws(c in 0.01f64..10.0, slope in -2.0f64..0.0) {
        let pts: Vec<(usize, f64)> = [100usize, 400, 1600, 6400]
            .iter()
            .map(|&n| (n, c * (n as f64).powf(slope)))
            .collect();
        match fit_rate(&pts) {
            RateFit::Fitted { slope: s, intercept } => {
                prop_assert!((s - slope).abs() < 1e-9);
                prop_assert!((intercept - c.ln()).abs() < 1e-8);
            }
            RateFit::Degenerate { reason } => prop_assert!(false, "degenerate: {}", reason),
        }
    }

    #[test]
    fn configs_survive_toml_and_overrides(
        algo in algorithm(),
        n in 10usize..5000,
        alpha in 0.05f64..1.0,
        tau in 0.0f64..2.0,
        trials in 1usize..500,
        seed in 0u64..(i64::MAX as u64),
        new_n in 10usize..5000,
    ) {
        let cfg = ExperimentConfig {
            model: ModelSpec { n, lambdas: vec![3.0, 1.0], sigma: 1.0, alpha },
            algorithm: AlgorithmSpec::new(algo, StepSchedule::constant(tau), 1.0, 2.0),
            init: InitSpec { q0: vec![0.5, 0.25] },
            run: RunSpec { horizon: 1.0, record_times: vec![0.5, 1.0], trials, seed, store_q: false },
        };
        let mut table = parse_table(&toml::to_string(&cfg).unwrap()).unwrap();
        prop_assert_eq!(&experiment(&table).unwrap(), &cfg);
        apply_override(&mut table, &format!("model.n={new_n}")).unwrap();
        let changed = experiment(&table).unwrap();
        prop_assert_eq!(changed.model.n, new_n);
        prop_assert_eq!(&changed.algorithm, &cfg.algorithm);
    }
}
