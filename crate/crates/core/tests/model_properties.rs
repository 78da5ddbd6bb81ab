use proptest::prelude::*;
use soliton_flow::integrator::{doubling_error, integrate, FnField, IntegratorConfig};
use soliton_flow::physical::PhysicalSystem;
use soliton_flow::series::series_startup;
use soliton_flow::{OrbitModel, WarpedFactor};

fn arb_warped() -> impl Strategy<Value = OrbitModel> {
    (
        prop::collection::vec((0usize..5, prop_oneof![Just(0.0), Just(1.0), -1.0..4.0f64]), 0..4),
        prop_oneof![Just(1.0), -1.0..2.0f64],
        -2.0..1.0f64,
        0usize..3,
    )
        .prop_map(|(fs, eps, c, k)| {
            let factors = fs.into_iter().map(|(d, l)| WarpedFactor::new(d, l)).collect();
            OrbitModel::warped(factors, eps, c, k)
        })
}

fn arb_two_summand() -> impl Strategy<Value = OrbitModel> {
    (0usize..4, 0usize..5, -1.0..30.0f64, -1.0..3.0f64, -2.0..1.0f64)
        .prop_map(|(d1, d2, a2, a3, c)| OrbitModel::two_summand(d1, d2, a2, a3, 1.0, c))
}

proptest! {
    #[test]
    fn validate_is_pure(m in prop_oneof![arb_warped(), arb_two_summand()], u0 in -2.0..2.0f64) {
        let before = m.clone();
        let a = m.validate(u0);
        let b = m.validate(u0);
        prop_assert_eq!(a, b);
        prop_assert_eq!(m, before);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { max_global_rejects: 20_000, ..ProptestConfig::default() })]

    #[test]
    fn valid_models_have_enough_dimensions(m in prop_oneof![arb_warped(), arb_two_summand()], u0 in -2.0..0.5f64) {
        prop_assume!(m.validate(u0).is_empty());
        prop_assert!(m.total_dim() >= 2);
        if let Some(ls) = m.einstein_constants() {
            if ls.iter().any(|&l| l > 0.0) {
                prop_assert!(m.total_dim() >= 3);
            }
        }
    }
}

proptest! {
    #[test]
    fn adaptive_samples_respect_tolerance(a in 0.2..3.0f64, rel_tol in 1e-10..1e-6f64) {
        let f = FnField::new(2, move |_t, x: &[f64], out: &mut [f64]| {
            out[0] = x[1];
            out[1] = -a * a * x[0] - 0.1 * x[1];
        });
        let cfg = IntegratorConfig { adaptive: true, rel_tol, ..IntegratorConfig::new(0.5, 10.0) };
        let traj = integrate(&f, vec![1.0, 0.0], 0.0, &cfg, &[]);
        prop_assert!(traj.events.is_empty());
        for w in traj.samples.windows(2) {
            let h = w[1].t - w[0].t;
            let err = doubling_error(&f, &w[0].x, w[0].t, h).unwrap();
            let norm = w[1].x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            prop_assert!(err <= rel_tol * (1.0 + norm) * (1.0 + 1e-6), "err {err} at {}", w[0].t);
        }
    }

    #[test]
    fn physical_runs_are_deterministic(hbar in 1.0..8.0f64, h in 5e-4..5e-3f64) {
        let m = OrbitModel::example1(1);
        let x0 = PhysicalSystem::new(&m).to_vector(&series_startup(&m, hbar, -1.0, 4, 1e-4).unwrap());
        let cfg = IntegratorConfig::new(h, 2.0);
        let sys = PhysicalSystem::new(&m);
        let a = integrate(&sys, x0.clone(), 1e-4, &cfg, &[]);
        let b = integrate(&sys, x0, 1e-4, &cfg, &[]);
        prop_assert_eq!(a.samples.len(), b.samples.len());
        for (p, q) in a.samples.iter().zip(&b.samples) {
            prop_assert_eq!(p.t.to_bits(), q.t.to_bits());
            for (u, v) in p.x.iter().zip(&q.x) {
                prop_assert_eq!(u.to_bits(), v.to_bits());
            }
        }
    }
}

#[test]
fn presets_validate() {
    for name in soliton_flow::model::PRESET_NAMES {
        let m = OrbitModel::preset(name).unwrap();
        assert!(m.validate(-1.0).is_empty(), "{name}");
        assert!(m.total_dim() >= 3);
    }
}
