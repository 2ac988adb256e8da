use proptest::prelude::*;

use brwire_core::functionals::{decomposition_residual, QuenchedNormalizers};
use brwire_core::{
    DisplacementLaw, EnvModel, EnvState, ImmigrantCount, ImmigrationLaw, LdpCase, OffspringLaw, Rates, SimConfig,
    Simulator, SummarySpec,
};

fn state(offspring: OffspringLaw, std: f64, rate: f64) -> EnvState {
    EnvState::new(
        offspring,
        DisplacementLaw::Gaussian { mean: 0.0, std },
        ImmigrationLaw {
            count: ImmigrantCount::Poisson { rate },
            position: DisplacementLaw::Gaussian { mean: 0.0, std },
        },
    )
}

prop_compose! {
    fn small_offspring()(count in 2u32..=3, p in 0.1f64..0.9, fixed in any::<bool>()) -> OffspringLaw {
        if fixed {
            OffspringLaw::Fixed { count }
        } else {
            OffspringLaw::Categorical { support: vec![1, 3], probs: vec![p, 1.0 - p] }
        }
    }
}

prop_compose! {
    fn markov_model()(
        a in small_offspring(),
        b in small_offspring(),
        std_a in 0.2f64..2.0,
        std_b in 0.2f64..2.0,
        rate in 0.0f64..3.0,
        stay in 0.05f64..0.95,
    ) -> EnvModel {
        EnvModel::markov(
            vec![state(a, std_a, rate), state(b, std_b, rate)],
            vec![vec![stay, 1.0 - stay], vec![1.0 - stay, stay]],
        )
        .unwrap()
    }
}

prop_compose! {
    /// Supercritical: every state has mean offspring > 1.
    fn supercritical_model()(
        p in 0.05f64..0.95,
        std_a in 0.2f64..2.0,
        std_b in 0.2f64..2.0,
        q in 0.05f64..0.95,
    ) -> EnvModel {
        EnvModel::iid(
            vec![
                state(OffspringLaw::Categorical { support: vec![1, 3], probs: vec![p, 1.0 - p] }, std_a, 0.0),
                state(OffspringLaw::Fixed { count: 2 }, std_b, 0.0),
            ],
            vec![q, 1.0 - q],
        )
        .unwrap()
    }
}

const GRID: [f64; 5] = [-2.0, -1.0, 0.0, 1.0, 2.0];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn founder_decomposition_is_exact(model in markov_model(), seed in any::<u64>(), n in 1usize..=9) {
        let spec = SummarySpec::new(GRID.to_vec()).with_founders();
        let sim = Simulator::new(&model, SimConfig::new(n, seed), spec).unwrap();
        let norm = QuenchedNormalizers::new(sim.environment(), &GRID);
        let traj = sim.run_replica(0, |_| {}).unwrap();
        for k in 0..=n {
            for ti in 0..GRID.len() {
                let r = decomposition_residual(&traj, &norm, k, ti).unwrap();
                prop_assert!(r <= 1e-9, "n={k} t={} residual {r}", GRID[ti]);
            }
        }
    }

    #[test]
    fn fixed_offspring_population_recurrence(
        count in 2u32..=3,
        rate in 0.0f64..4.0,
        seed in any::<u64>(),
    ) {
        let n = 8;
        let model = EnvModel::constant(state(OffspringLaw::Fixed { count }, 1.0, rate)).unwrap();
        let sim = Simulator::new(&model, SimConfig::new(n, seed), SummarySpec::new(vec![0.0])).unwrap();
        let mut sizes = Vec::new();
        let mut partitions_ok = true;
        let traj = sim
            .run_replica(0, |g| {
                sizes.push(g.len());
                partitions_ok &= g.groups().iter().map(|f| f.len()).sum::<usize>() == g.len();
            })
            .unwrap();
        prop_assert!(partitions_ok);
        for k in 0..n {
            let expected = sizes[k] * count as usize + traj.immigration.count(k);
            prop_assert_eq!(sizes[k + 1], expected);
            prop_assert_eq!(traj.summaries[k + 1].total, expected);
        }
        prop_assert_eq!(traj.summaries[n].root_total, (count as usize).pow(n as u32));
    }

    #[test]
    fn replicas_do_not_depend_on_worker_count(model in markov_model(), seed in any::<u64>()) {
        let config = SimConfig::new(6, seed).with_replicas(5);
        let sim = Simulator::new(&model, config, SummarySpec::new(GRID.to_vec())).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| sim.run_all()).unwrap();
        let b = three.install(|| sim.run_all()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn normalizer_recurrences(model in markov_model(), seed in any::<u64>()) {
        let env = model.sample_environment(12, seed);
        let norm = QuenchedNormalizers::new(&env, &GRID);
        for ti in 0..GRID.len() {
            prop_assert_eq!(norm.log_pi(0, ti), 0.0);
            for k in 0..12 {
                let step = norm.log_pi(k + 1, ti) - norm.log_pi(k, ti) - norm.log_m(k, ti);
                prop_assert!(step.abs() <= 1e-12 * (1.0 + norm.log_pi(k + 1, ti).abs()));
            }
        }
        for k in 0..12 {
            prop_assert!(norm.b(k + 1) >= norm.b(k));
        }
    }

    #[test]
    fn centered_models_are_case_one(model in supercritical_model()) {
        let rates = Rates::new(&model).unwrap();
        prop_assert_eq!(rates.classify().unwrap().case, LdpCase::I);
    }

    #[test]
    fn lambda_is_convex(model in supercritical_model(), t in -4.0f64..4.0, h in 0.01f64..1.0) {
        let rates = Rates::new(&model).unwrap();
        let mid = rates.lambda(t);
        let chord = 0.5 * (rates.lambda(t - h) + rates.lambda(t + h));
        prop_assert!(chord >= mid - 1e-12 * (1.0 + mid.abs()));
    }

    #[test]
    fn legendre_duality_inside_critical_points(model in supercritical_model(), u in 0.02f64..0.98) {
        let rates = Rates::new(&model).unwrap();
        let cp = rates.critical_points();
        let t = cp.lower + u * (cp.upper - cp.lower);
        let x = rates.lambda_prime(t);
        let dual = t * x - rates.lambda(t);
        let got = rates.legendre(x);
        prop_assert!((got - dual).abs() <= 1e-6, "t={t} x={x}: {got} vs {dual}");
    }
}
