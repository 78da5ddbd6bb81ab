use proptest::prelude::*;
use soliton_flow::integrator::{integrate, IntegratorConfig};
use soliton_flow::phase::{derived, physical_from_phase, rhs_phase, PLaunch, PhaseLayout, PhaseParams, PhaseState, PhaseSystem};
use soliton_flow::physical::phase_from_physical;
use soliton_flow::{OrbitModel, WarpedFactor};

fn model(dims: &[usize], lambdas: &[f64], eps: f64) -> OrbitModel {
    let factors = dims.iter().zip(lambdas).map(|(&d, &l)| WarpedFactor::new(d, l)).collect();
    OrbitModel::warped(factors, eps, -1.0, dims[0])
}

fn arb_model() -> impl Strategy<Value = OrbitModel> {
    (1usize..4, prop::collection::vec((1usize..5, 0.0..3.0f64), 1..3), 0.2..2.0f64).prop_map(|(d1, rest, eps)| {
        let mut dims = vec![d1];
        let mut lambdas = vec![0.0];
        for (d, l) in rest {
            dims.push(d);
            lambdas.push(l);
        }
        model(&dims, &lambdas, eps)
    })
}

fn arb_case() -> impl Strategy<Value = (OrbitModel, PhaseState)> {
    arb_model().prop_flat_map(|m| {
        let r = m.factor_count();
        (
            Just(m),
            prop::collection::vec(-1.5..1.5f64, r),
            prop::collection::vec(-1.5..1.5f64, r),
            -1.0..1.0f64,
        )
            .prop_map(|(m, x, y, w)| (m, PhaseState::new(x, y, w)))
    })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #[test]
    fn h_identity((m, st) in arb_case()) {
        let p = PhaseParams::new(&m).unwrap();
        let d = derived(&st, &m).unwrap();
        let rate = rhs_phase(&st, &m).unwrap();
        let dh: f64 = rate.x.iter().zip(&p.sqrt_d).map(|(x, s)| x * s).sum();
        let rhs = (d.h - 1.0) * (d.g - 1.0 - 0.5 * m.epsilon * st.w * st.w) + d.q;
        prop_assert!(close(dh, rhs, 1e-12), "{dh} vs {rhs}");
    }

    #[test]
    fn q_identity((m, st) in arb_case()) {
        let p = PhaseParams::new(&m).unwrap();
        let d = derived(&st, &m).unwrap();
        let rate = rhs_phase(&st, &m).unwrap();
        let dq: f64 = 2.0 * st.x.iter().zip(&rate.x).map(|(a, b)| a * b).sum::<f64>()
            + 2.0 * (0..p.r()).map(|i| p.lambda[i] * st.y[i] * rate.y[i]).sum::<f64>()
            + m.epsilon * (p.n - 1.0) * st.w * rate.w;
        let rhs = 2.0 * d.q * d.j + m.epsilon * st.w * st.w * (d.h - 1.0);
        prop_assert!(close(dq, rhs, 1e-12), "{dq} vs {rhs}");
    }

    #[test]
    fn zero_loci_invariant((m, mut st) in arb_case(), pick in 0usize..8) {
        let r = m.factor_count();
        let i = pick % (r + 1);
        if i == r { st.w = 0.0 } else { st.y[i] = 0.0 }
        let rate = rhs_phase(&st, &m).unwrap();
        if i == r {
            prop_assert_eq!(rate.w, 0.0);
        } else {
            prop_assert_eq!(rate.y[i], 0.0);
        }
    }

    #[test]
    fn sign_symmetry((m, st) in arb_case(), mask in 0u32..64) {
        let r = m.factor_count();
        let mut mirrored = st.clone();
        for i in 0..r {
            if mask & (1 << i) != 0 { mirrored.y[i] = -mirrored.y[i] }
        }
        let flip_w = mask & 32 != 0;
        if flip_w { mirrored.w = -mirrored.w }
        let a = rhs_phase(&st, &m).unwrap();
        let b = rhs_phase(&mirrored, &m).unwrap();
        for i in 0..r {
            prop_assert_eq!(a.x[i], b.x[i]);
            let sign = if mask & (1 << i) != 0 { -1.0 } else { 1.0 };
            prop_assert_eq!(sign * a.y[i], b.y[i]);
        }
        prop_assert_eq!(if flip_w { -a.w } else { a.w }, b.w);
    }

    #[test]
    fn w_over_y_rate((m, st) in arb_case()) {
        let p = PhaseParams::new(&m).unwrap();
        let rate = rhs_phase(&st, &m).unwrap();
        for i in 0..p.r() {
            prop_assume!(st.y[i].abs() > 0.1);
            let lhs = (rate.w * st.y[i] - st.w * rate.y[i]) / (st.y[i] * st.y[i]);
            let rhs = st.x[i] / p.sqrt_d[i] * st.w / st.y[i];
            prop_assert!(close(lhs, rhs, 1e-12), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn j_identity_on_einstein_locus(x in prop::collection::vec(0.0..1.0f64, 2), w in 0.05..0.6f64) {
        let m = model(&[1, 2], &[0.0, 1.0], 1.0);
        let p = PhaseParams::new(&m).unwrap();
        let mut v = PhaseState::new(x, vec![0.0, 0.0], w).to_vector();
        p.project_einstein(&mut v);
        let st = PhaseState::from_vector(&v, 0.0);
        let d = p.derived(&st);
        prop_assume!(d.q.abs() < 1e-12 && (d.h - 1.0).abs() < 1e-12);
        prop_assert_eq!(&st.y, &vec![0.0, 0.0]);
        let rate = rhs_phase(&st, &m).unwrap();
        let dj = 2.0 * st.x.iter().zip(&rate.x).map(|(a, b)| a * b).sum::<f64>() - m.epsilon * st.w * rate.w;
        prop_assert!(close(dj, 2.0 * d.j * (d.j - 1.0), 1e-10), "{dj}");
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&d.j));
    }
}

fn launch_run(seed: u64, s_end: f64) -> (OrbitModel, soliton_flow::integrator::Trajectory) {
    let m = model(&[1, 2], &[0.0, 1.0], 1.0);
    let st = PLaunch::random(2, seed, 1e-6, -1.0).state(&m).unwrap();
    let sys = PhaseSystem::new(&m, PhaseLayout::Full).unwrap();
    let cfg = IntegratorConfig::new(1e-3, s_end);
    (m, integrate(&sys, st.to_vector(), 0.0, &cfg, &[]))
}

#[test]
fn mirrored_trajectories_match() {
    let m = model(&[1, 2], &[0.0, 1.0], 1.0);
    let st = PLaunch::random(2, 7, 1e-6, -1.0).state(&m).unwrap();
    let mut mirrored = st.clone();
    mirrored.y[1] = -mirrored.y[1];
    mirrored.w = -mirrored.w;
    let sys = PhaseSystem::new(&m, PhaseLayout::Full).unwrap();
    let cfg = IntegratorConfig::new(1e-3, 20.0);
    let a = integrate(&sys, st.to_vector(), 0.0, &cfg, &[]);
    let b = integrate(&sys, mirrored.to_vector(), 0.0, &cfg, &[]);
    assert_eq!(a.samples.len(), b.samples.len());
    for (p, q) in a.samples.iter().zip(&b.samples) {
        assert!((p.x[0] - q.x[0]).abs() <= 1e-12);
        assert!((p.x[3] + q.x[3]).abs() <= 1e-12);
        assert!((p.x[4] + q.x[4]).abs() <= 1e-12);
    }
}

#[test]
fn w_over_y_increases_while_x_positive() {
    let (_, traj) = launch_run(3, 40.0);
    let mut checked = 0;
    for pair in traj.samples.windows(2) {
        let (a, b) = (&pair[0].x, &pair[1].x);
        for i in 0..2 {
            if a[i] > 0.0 && b[i] > 0.0 {
                assert!(b[4] / b[2 + i] >= a[4] / a[2 + i] - 1e-12, "s {}", pair[1].t);
                checked += 1;
            }
        }
    }
    assert!(checked > 1000);
}

#[test]
fn regions_persist() {
    for seed in 0..3 {
        let (m, traj) = launch_run(seed, 30.0);
        assert!(traj.events.is_empty());
        for smp in &traj.samples {
            let d = derived(&PhaseState::from_vector(&smp.x, smp.t), &m).unwrap();
            assert!(d.q < 1e-8 && d.h < 1.0 + 1e-8, "seed {seed} s {}", smp.t);
        }
    }
}

#[test]
fn physical_round_trip() {
    let h = 1e-3;
    let (m, traj) = launch_run(11, 30.0);
    let s0 = traj.samples[0].x.clone();
    let w0 = s0[4];
    let g0 = [w0 / s0[2], 2f64.sqrt() * w0 / s0[3]];
    let recs = physical_from_phase(&traj, &m, &g0, 0.0, 0.0).unwrap();
    assert_eq!(recs.len(), traj.samples.len());
    for (rec, smp) in recs.iter().zip(&traj.samples) {
        let back = phase_from_physical(&rec.state, &m).unwrap().to_vector();
        for (a, b) in back.iter().zip(&smp.x) {
            assert!((a - b).abs() <= 10.0 * h * h, "s {}: {a} vs {b}", smp.t);
        }
    }
    // t grows like W^{-1} integrated, so it is strictly increasing
    assert!(recs.windows(2).all(|p| p[1].state.t > p[0].state.t));
}
