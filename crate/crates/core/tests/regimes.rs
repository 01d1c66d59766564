use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twoscale::averaging::{AveragingEngine, StateStack};
use twoscale::field::{ElectricField, WaveComponent, WaveField};
use twoscale::linalg::vecops;
use twoscale::regimes::{regime_profiles, regime_rhs, Regime, RegimeKind};

fn rel(a: &[f64], b: &[f64]) -> f64 {
    vecops::max_abs(&vecops::sub(a, b)) / vecops::max_abs(b).max(1.0)
}

fn random_stack(rng: &mut ChaCha8Rng, k: usize, variable: bool) -> StateStack<f64> {
    let mut y = Vec::new();
    for j in 0..=k {
        let mut v: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if j == 0 && variable {
            let r = rng.gen_range(0.5..2.0);
            let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            v[0] = r * phi.cos();
            v[1] = r * phi.sin();
        }
        y.push(v);
    }
    StateStack::new(rng.gen_range(0.0..1.0), y).unwrap()
}

/// A time-dependent smooth field so every derivative term is exercised.
fn moving_field() -> WaveField<f64> {
    let wave = |amp: f64, k: [f64; 3], om: f64, ph: f64, off: f64| WaveComponent {
        offset: off,
        amplitude: amp,
        wavevector: k,
        omega: om,
        phase: ph,
        ..Default::default()
    };
    WaveField {
        components: [
            wave(0.8, [0.3, 1.1, -0.4], 0.7, 0.2, 0.1),
            wave(-0.6, [0.9, -0.2, 0.8], -1.3, 1.0, -0.3),
            wave(0.5, [-0.7, 0.5, 1.2], 0.4, -0.6, 0.2),
        ],
    }
}

fn irs_field() -> WaveField<f64> {
    let mut f = moving_field();
    for (i, c) in f.components.iter_mut().enumerate() {
        c.theta_mean = 0.3;
        c.theta_cos = [1.0, 0.5, -0.7][i];
        c.theta_sin = [0.2, -0.9, 0.4][i];
    }
    f
}

fn check(kind: RegimeKind, field: Arc<dyn ElectricField<f64>>, k: usize, tol: f64) {
    let regime = Arc::new(Regime::new(kind, field).unwrap());
    let engine = AveragingEngine::new(regime.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_rate = 0.0_f64;
    let mut worst_prof = 0.0_f64;
    for _ in 0..20 {
        let stack = random_stack(&mut rng, k, kind == RegimeKind::GcVariable);
        let closed = regime_rhs(&regime, k, &stack).unwrap();
        let generic = engine.expand(&stack, k).unwrap().rates();
        let d = rel(&closed, &generic);
        if d > worst_rate {
            eprintln!("{kind} k={k} rates\n closed  {closed:?}\n generic {generic:?}");
        }
        worst_rate = worst_rate.max(d);
        let theta = rng.gen_range(0.0..std::f64::consts::TAU);
        let cp = regime_profiles(&regime, k, theta, &stack).unwrap();
        let gm = twoscale::reconstruct::GenericModel::new(engine.clone());
        let gp = twoscale::reconstruct::ExpansionModel::profiles(&gm, k, &stack, theta).unwrap();
        worst_prof = worst_prof.max(rel(&cp[k], &gp[k]));
    }
    eprintln!("{kind} k={k}: rates {worst_rate:.2e} profiles {worst_prof:.2e}");
    assert!(worst_rate < tol, "{kind} k={k} rates deviate by {worst_rate:e}");
    assert!(worst_prof < tol, "{kind} k={k} profiles deviate by {worst_prof:e}");
}

#[test]
fn gc_closed_forms_match_generic_engine() {
    for k in 0..=2 {
        check(RegimeKind::GcConst, Arc::new(moving_field()), k, 1e-5);
    }
}

#[test]
fn irs_closed_forms_match_generic_engine() {
    for k in 0..=1 {
        check(RegimeKind::IrsConst, Arc::new(irs_field()), k, 1e-5);
    }
}

#[test]
fn flr_closed_form_matches_generic_engine() {
    check(RegimeKind::FlrConst, Arc::new(moving_field()), 0, 1e-5);
}

#[test]
fn variable_closed_form_matches_generic_engine() {
    check(RegimeKind::GcVariable, Arc::new(moving_field()), 0, 1e-5);
}

fn regime(kind: RegimeKind, field: WaveField<f64>) -> Regime<f64> {
    Regime::new(kind, Arc::new(field)).unwrap()
}

fn stack(levels: &[[f64; 6]]) -> StateStack<f64> {
    StateStack::new(0.0, levels.iter().map(|l| l.to_vec()).collect()).unwrap()
}

#[test]
fn gc_examples() {
    let r = regime(RegimeKind::GcConst, WaveField::constant([5.0, 6.0, 7.0]));
    let rate = regime_rhs(&r, 0, &stack(&[[0.1, 0.2, 0.3, 1.0, 2.0, 3.0]])).unwrap();
    assert_eq!(rate, vec![1.0, 0.0, 0.0, 5.0, 0.0, 0.0]);

    let r = regime(RegimeKind::GcConst, WaveField::constant([0.0, 1.0, 0.0]));
    let s = stack(&[[0.0; 6], [0.0; 6]]);
    let rate = regime_rhs(&r, 1, &s).unwrap();
    assert!(vecops::max_abs(&vecops::sub(&rate[6..9], &[0.0, 0.0, -1.0])) < 1e-15);

    // Constant E: the velocity block of α̃¹ vanishes.
    let engine = AveragingEngine::new(Arc::new(r));
    let s = stack(&[[0.3, -0.2, 0.5, 1.0, 0.4, -0.7], [0.1, 0.2, 0.3, -0.4, 0.5, 0.6]]);
    for &th in &[0.3, 2.0, 5.1] {
        let a1 = engine.alpha_k(1, &s, th).unwrap();
        assert!(vecops::max_abs(&a1[3..]) < 1e-9);
    }
}

#[test]
fn gc_profile_examples() {
    let r = regime(RegimeKind::GcConst, moving_field());
    let s = stack(&[
        [0.3, -0.2, 0.5, 1.0, 0.4, -0.7],
        [0.1, 0.2, 0.3, -0.4, 0.5, 0.6],
        [0.7, -0.1, 0.2, 0.9, -0.3, 0.8],
    ]);
    let x2 = regime_profiles(&r, 2, 0.0, &s).unwrap();
    assert!(vecops::max_abs(&vecops::sub(&x2[2][..3], &s.level(2)[..3])) < 1e-15);
    let x0 = &regime_profiles(&r, 0, 1.1, &s).unwrap()[0];
    let v = twoscale::model::rotation_r(1.1).apply(&[1.0, 0.4, -0.7]);
    assert!(vecops::max_abs(&vecops::sub(&x0[3..], &v)) < 1e-15);
}

#[test]
fn gc_energy_structure() {
    let r = Arc::new(regime(RegimeKind::GcConst, WaveField::zero()));
    let model = twoscale::ClosedFormModel::new(r.clone());
    let grid = twoscale::TimeGrid::new(0.0, 2.0, 9).unwrap();
    let x0 = [0.0, 0.0, 0.0, 1.0, 2.0, 3.0];
    let hier = twoscale::solve_hierarchy(&model, 0, &x0, &grid, 200).unwrap();
    for i in 0..grid.samples {
        let u = &hier.y[0][i][3..];
        assert!((vecops::norm(u) - 14f64.sqrt()).abs() < 1e-14);
        assert!((hier.y[0][i][0] - grid.time(i)).abs() < 1e-13);
        let v = &regime_profiles(&r, 0, 0.9, &hier.stack_at(i)).unwrap()[0][3..];
        assert!((vecops::norm(v) - 14f64.sqrt()).abs() < 1e-14);
    }
}

#[test]
fn irs_resonant_drift_and_k0_hierarchy() {
    let r = Arc::new(regime(RegimeKind::IrsConst, WaveField::harmonic([0.0, 1.0, 0.0], 0.0)));
    let rate = regime_rhs(&r, 0, &stack(&[[0.2, 0.4, 0.0, 0.0, 0.0, 0.0]])).unwrap();
    assert!(vecops::max_abs(&vecops::sub(&rate[3..], &[0.0, 0.5, 0.0])) < 1e-12);

    let model = twoscale::ClosedFormModel::new(r);
    let grid = twoscale::TimeGrid::new(0.5, 1.0, 5).unwrap();
    let hier = twoscale::solve_hierarchy(&model, 0, &[0.0; 6], &grid, 100).unwrap();
    for i in 0..5 {
        let u2 = hier.y[0][i][4];
        assert!((u2 - (grid.time(i) - 0.5) / 2.0).abs() < 1e-12);
    }
}

#[test]
fn flr_zero_field() {
    let r = regime(RegimeKind::FlrConst, WaveField::zero());
    let rate = regime_rhs(&r, 0, &stack(&[[0.1, 0.2, 0.3, 1.5, -2.0, 0.5]])).unwrap();
    assert_eq!(rate, vec![1.5, 0.0, 0.0, 0.0, 0.0, 0.0]);
}

#[test]
fn variable_examples() {
    let r = regime(RegimeKind::GcVariable, WaveField::zero());
    let rate = regime_rhs(&r, 0, &stack(&[[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]])).unwrap();
    assert!(vecops::max_abs(&vecops::sub(&rate, &[0.0, 1.0, 0.0, -1.0, 0.0, 0.0])) < 1e-15);
    let engine = AveragingEngine::new(Arc::new(r.clone()));
    let generic = engine.abar0(0.0, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
    assert!(rel(&rate, &generic) < 1e-9);

    let on_axis = stack(&[[0.0, 0.0, 0.3, 1.0, 0.0, 0.0]]);
    assert!(matches!(
        regime_rhs(&r, 0, &on_axis),
        Err(twoscale::Error::AxisProximity { .. })
    ));
}

#[test]
fn variable_flow_solves_the_fast_equation() {
    use twoscale::model::{flow_jacobian_gap, flow_ode_residual, flow_periodicity_gap};
    use twoscale::TwoScaleSystem;
    let r = regime(RegimeKind::GcVariable, moving_field());
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..100 {
        let z = random_stack(&mut rng, 0, true).y.remove(0);
        let th = rng.gen_range(0.0..std::f64::consts::TAU);
        assert!(flow_ode_residual(&r, 0.0, th, &z).unwrap() < 1e-5);
        assert!(flow_periodicity_gap(r.flow(), 0.0, th, &z).unwrap() < 1e-12);
        assert!(flow_jacobian_gap(r.flow(), 0.0, th, &z).unwrap() < 1e-5);
    }
}

#[test]
fn constant_field_flows_solve_the_fast_equation() {
    use twoscale::model::flow_ode_residual;
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for kind in [RegimeKind::IrsConst, RegimeKind::GcConst, RegimeKind::FlrConst] {
        let r = regime(kind, WaveField::zero());
        for _ in 0..50 {
            let z = random_stack(&mut rng, 0, false).y.remove(0);
            let th = rng.gen_range(0.0..std::f64::consts::TAU);
            assert!(flow_ode_residual(&r, 0.0, th, &z).unwrap() < 1e-5, "{kind}");
        }
    }
}

#[test]
fn variable_y1_position_matches_generic() {
    use twoscale::regimes::variable::y1_position_rhs;
    let r = regime(RegimeKind::GcVariable, moving_field());
    let engine = AveragingEngine::new(Arc::new(r.clone()));
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..50 {
        let s = random_stack(&mut rng, 1, true);
        let l = |j: usize, a: usize| -> [f64; 3] { std::array::from_fn(|i| s.level(j)[a + i]) };
        let e = r.field().value(s.t, 0.0, &l(0, 0));
        let closed = y1_position_rhs(&l(0, 0), &l(0, 3), &l(1, 0), &l(1, 3), &e, 1e-6).unwrap();
        let generic = engine.abar_k(1, &s).unwrap();
        assert!(rel(&closed, &generic[..3]) < 1e-5);
    }
}

#[test]
fn analytic_alpha0_jacobian_matches_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for kind in [RegimeKind::IrsConst, RegimeKind::GcConst, RegimeKind::FlrConst] {
        let field = if kind == RegimeKind::IrsConst { irs_field() } else { moving_field() };
        let engine = AveragingEngine::new(Arc::new(regime(kind, field)));
        for _ in 0..10 {
            let s = random_stack(&mut rng, 0, false);
            let th = rng.gen_range(0.0..std::f64::consts::TAU);
            let a = engine.alpha0_jacobian(s.t, th, s.level(0)).unwrap();
            let f = engine.alpha0_fd_jacobian(s.t, th, s.level(0)).unwrap();
            for i in 0..6 {
                for j in 0..6 {
                    assert!((a[(i, j)] - f[(i, j)]).abs() < 1e-5 * (1.0 + a[(i, j)].abs()), "{kind}");
                }
            }
        }
    }
}

#[test]
fn reconstructions_are_periodic() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    for kind in RegimeKind::ALL {
        let field = if kind == RegimeKind::IrsConst { irs_field() } else { moving_field() };
        let r = regime(kind, field);
        let k = if kind == RegimeKind::GcVariable { 0 } else { kind.max_order() };
        for _ in 0..10 {
            let s = random_stack(&mut rng, k, kind == RegimeKind::GcVariable);
            let th = rng.gen_range(0.0..std::f64::consts::TAU);
            let a = regime_profiles(&r, k, th, &s).unwrap();
            let b = regime_profiles(&r, k, th + std::f64::consts::TAU, &s).unwrap();
            for (p, q) in a.iter().zip(&b) {
                assert!(vecops::max_abs(&vecops::sub(p, q)) < 1e-12, "{kind}");
            }
        }
    }
}

#[test]
fn construction_and_order_errors() {
    assert!(Regime::new(RegimeKind::GcConst, Arc::new(irs_field())).is_err());
    assert!(Regime::new(RegimeKind::IrsConst, Arc::new(irs_field())).is_ok());
    let r = regime(RegimeKind::FlrConst, WaveField::zero());
    assert!(matches!(
        regime_rhs(&r, 1, &stack(&[[0.0; 6], [0.0; 6]])),
        Err(twoscale::Error::UnsupportedOrder { max_order: 0, .. })
    ));
    assert_eq!("gc_const".parse::<RegimeKind>().unwrap(), RegimeKind::GcConst);
    let err = "tokamak".parse::<RegimeKind>().unwrap_err();
    assert!(err.to_string().contains("gc_variable"));
}
