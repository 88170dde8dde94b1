use proptest::prelude::*;
use qrc_expressivity::channels::RotationAxis;
use qrc_expressivity::circuits::{build_ansatz, encoding_layer, random_product_state, AnsatzId, ReservoirUnitary};
use qrc_expressivity::expressivity::{
    analyze, rec_finite, rec_infinite, rec_upper_bound, uniform_grid, EncodedStates, Shots,
};
use qrc_expressivity::optimize::{maximize, random_points, OptConfig};
use qrc_expressivity::reservoir::{run_gate_model, run_physical, InputMode, RunConfig};
use qrc_expressivity::rng;
use qrc_expressivity::tfim::{Tfim, TfimSpec};
use rand::Rng;
use std::f64::consts::TAU;

fn reservoir_for(choice: u32, n: usize, g: &mut impl Rng) -> ReservoirUnitary {
    if choice == 0 {
        let spec = TfimSpec::new(n, g.random_range(0.1..2.0), 1.0, g.random()).unwrap();
        return Tfim::sample(spec).unwrap().reservoir(g.random_range(0.5..5.0)).unwrap();
    }
    let c = build_ansatz(AnsatzId::new(choice).unwrap(), n).unwrap();
    let p: Vec<f64> = (0..c.n_params()).map(|_| g.random_range(0.0..TAU)).collect();
    ReservoirUnitary::from_circuit(&c, &p).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rec_never_exceeds_the_encoding_bound(
        choice in 0u32..=19,
        n in 2usize..=4,
        r in 1usize..=9,
        product_start in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let mut g = rng::seeded(seed);
        let axes: Vec<RotationAxis> = (0..r).map(|_| RotationAxis::sample(&mut g)).collect();
        let enc = encoding_layer(n, r, &axes).unwrap();
        let grid = uniform_grid(2 * r + 30);
        let states = if product_start {
            EncodedStates::from_initial(&random_product_state(n, &mut g), &enc, &[], &grid).unwrap()
        } else {
            EncodedStates::new(&enc, &[], &grid).unwrap()
        };
        let ft = states.table(&reservoir_for(choice, n, &mut g)).unwrap();
        for col in ft.columns() {
            prop_assert!(col.iter().all(|&p| p >= -1e-12));
            prop_assert!((col.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let es = analyze(&ft).unwrap();
        let inf = rec_infinite(&es);
        prop_assert!(inf <= rec_upper_bound(r, 1 << n) as f64);
        let mut prev = 0.0;
        for s in [2u64, 10, 100, 1_000, 10_000, 1_000_000] {
            let v = rec_finite(&es, Shots::Finite(s));
            prop_assert!(v >= prev - 1e-12 && v <= inf + 1e-12);
            prev = v;
        }
    }

    #[test]
    fn channel_and_gate_pipelines_agree(
        seed in any::<u64>(),
        n in 2usize..=3,
        v_mux in 1usize..=4,
        gamma in 0.0f64..0.5,
        rotations in any::<bool>(),
        h in 0.2f64..2.0,
    ) {
        let cfg = RunConfig {
            n_qubits: n,
            v_mux,
            gamma,
            input_mode: if rotations { InputMode::Rotations } else { InputMode::Reset },
            warmup_time: 3.0,
            encodes: n,
            seed,
            ..RunConfig::default()
        };
        let spec = TfimSpec::new(n, h, 1.0, seed ^ 1).unwrap();
        let mut g = rng::seeded(seed);
        let inputs: Vec<f64> = (0..12).map(|_| g.random_range(0.0..=1.0)).collect();
        let a = run_physical(&cfg, &spec, &inputs).unwrap();
        let res = Tfim::sample(spec).unwrap().reservoir(cfg.substep()).unwrap();
        let b = run_gate_model(&cfg, &res, &inputs).unwrap();
        prop_assert!(a.max_abs_deviation(&b).unwrap() < 1e-10);
        prop_assert!(a.sigma_z.iter().flatten().all(|z| z.abs() <= 1.0 + 1e-9));
    }

    #[test]
    fn optimizer_history_properties(seed in any::<u64>(), budget in 8usize..120, restarts in 1usize..4, dim in 1usize..4) {
        let f = |p: &[f64]| -> qrc_expressivity::Result<f64> {
            Ok(p.iter().enumerate().map(|(i, x)| (x * (i + 1) as f64).sin()).sum())
        };
        let cfg = OptConfig { budget, restarts, seed, ..OptConfig::default() };
        let init = random_points(restarts.min(budget), dim, seed);
        let a = maximize(f, &init, &cfg).unwrap();
        let b = maximize(f, &init, &cfg).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.history.len() <= budget && a.history.len() >= init.len());
        prop_assert!(a.history.iter().enumerate().all(|(i, e)| e.eval == i));
        prop_assert!(a.history.windows(2).all(|w| w[1].best_so_far >= w[0].best_so_far));
        prop_assert!(a.best_params.iter().all(|x| (0.0..TAU).contains(x)));
        prop_assert!(a.best_value >= a.initial_best);
        prop_assert_eq!(a.best_value, f(&a.best_params).unwrap());
    }
}
