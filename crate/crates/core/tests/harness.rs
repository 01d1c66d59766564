use std::sync::Arc;

use twoscale::field::WaveComponent;
use twoscale::harness::{crosscheck, fit_slope, run_convergence, SweepOptions, DEFAULT_EPS_LIST};
use twoscale::{ClosedFormModel, ConvergenceReport, Regime, RegimeKind, WaveField};

const X0: [f64; 6] = [0.0, 0.0, 0.0, 1.0, 0.5, 0.0];

fn sweep(kind: RegimeKind, field: WaveField<f64>, x0: &[f64], orders: &[usize]) -> ConvergenceReport {
    let regime = Arc::new(Regime::new(kind, Arc::new(field)).unwrap());
    run_convergence(
        &ClosedFormModel::new(regime),
        x0,
        0.0,
        1.0,
        &DEFAULT_EPS_LIST,
        orders,
        &SweepOptions::default(),
    )
    .unwrap()
}

/// Errors shrink along the ε grid, allowing one upturn near the floor.
fn assert_monotone(report: &ConvergenceReport, order: usize) {
    let series = report.series(order);
    let ups = series.windows(2).filter(|w| w[1].error > w[0].error).count();
    assert!(ups <= 1, "order {order}: {:?}", series);
}

fn assert_slope(report: &ConvergenceReport, order: usize, expected: f64, tol: f64) {
    let slope = report.slope(order).expect("slope defined");
    assert!((slope - expected).abs() <= tol, "order {order}: slope {slope}");
}

#[test]
fn fit_slope_on_perturbed_power_law() {
    let eps: Vec<f64> = (3..=8).map(|j| 2f64.powi(-j)).collect();
    let err: Vec<f64> = eps.iter().map(|e| e * e * (1.0 + 0.1 * (1.0 / e).sin())).collect();
    // Direct regression on the synthetic sequence.
    let (xs, ys): (Vec<f64>, Vec<f64>) = eps.iter().zip(&err).map(|(e, r)| (e.ln(), r.ln())).unzip();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = fit_slope(&eps, &err).unwrap();
    assert!((slope - num / den).abs() < 1e-12);
    assert!((slope - 2.0).abs() < 0.15);
}

#[test]
fn guiding_centre_orders_zero_to_two() {
    let r = sweep(RegimeKind::GcConst, WaveField::trig(1.0), &X0, &[0, 1, 2]);
    assert!(r.failures.is_empty());
    assert_eq!(r.errors.len(), 15);
    assert!(r.errors.iter().all(|e| !e.below_floor && e.error > 0.0));
    assert_slope(&r, 0, 1.0, 0.3);
    assert_slope(&r, 1, 2.0, 0.3);
    assert_slope(&r, 2, 3.0, 0.4);
    for k in 0..=2 {
        assert_monotone(&r, k);
    }
    let last = *DEFAULT_EPS_LIST.last().unwrap();
    let e = |k| r.error(k, last).unwrap().error;
    assert!(e(2) <= e(1) && e(1) <= e(0));
}

#[test]
fn guiding_centre_without_field() {
    let r = sweep(RegimeKind::GcConst, WaveField::zero(), &X0, &[0, 1]);
    // X⁰ drops the Larmor circle, whose diameter is 2ε|U⁰_⊥|.
    for e in r.series(0) {
        assert!((e.error - e.eps).abs() < 1e-3 * e.eps, "{e:?}");
    }
    assert_slope(&r, 0, 1.0, 1e-6);
    assert!(r.series(1).iter().all(|e| e.below_floor));
    assert_eq!(r.slope(1), None);
}

#[test]
fn isotope_resonant_orders_zero_and_one() {
    let r = sweep(RegimeKind::IrsConst, WaveField::harmonic([0.0, 1.0, 0.0], 0.2), &X0, &[0, 1]);
    assert_slope(&r, 0, 1.0, 0.3);
    assert_slope(&r, 1, 2.0, 0.3);
    assert_monotone(&r, 0);
    assert_monotone(&r, 1);
}

#[test]
fn finite_larmor_radius_order_zero() {
    let r = sweep(RegimeKind::FlrConst, flr_field(), &X0, &[0]);
    assert_slope(&r, 0, 1.0, 0.3);
    assert_monotone(&r, 0);
}

#[test]
fn variable_field_order_zero() {
    let x0 = [1.0, 0.0, 0.0, 1.0, 0.5, 0.0];
    let r = sweep(RegimeKind::GcVariable, WaveField::constant([0.1, 0.2, 0.3]), &x0, &[0]);
    assert_slope(&r, 0, 1.0, 0.3);
}

#[test]
fn failing_eps_is_reported_and_the_rest_kept() {
    // The inward Larmor excursion ε|v⊥| crosses the guard only at ε = 0.5.
    let regime = Regime::new(RegimeKind::GcVariable, Arc::new(WaveField::zero()))
        .unwrap()
        .with_axis_guard(0.9)
        .unwrap();
    let x0 = [1.0, 0.0, 0.0, -0.8, 0.2, 0.0];
    let eps = [0.5, 0.0625, 0.03125, 0.015625, 0.0078125];
    let opts = SweepOptions {
        samples: 50,
        ..Default::default()
    };
    let r = run_convergence(&ClosedFormModel::new(Arc::new(regime)), &x0, 0.0, 1.0, &eps, &[0], &opts).unwrap();
    assert_eq!(r.failures.len(), 1, "{:?}", r.failures);
    assert_eq!(r.failures[0].eps, 0.5);
    assert!(r.failures[0].message.contains("axis"));
    assert_eq!(r.errors.len(), 4);
}

#[test]
fn sweep_rejects_bad_eps_lists() {
    let regime = Arc::new(Regime::new(RegimeKind::GcConst, Arc::new(WaveField::zero())).unwrap());
    let model = ClosedFormModel::new(regime);
    let opts = SweepOptions::default();
    for eps in [&[0.1, 0.05, 0.025][..], &[0.1, 0.2, 0.05, 0.01][..]] {
        assert!(run_convergence(&model, &X0, 0.0, 1.0, eps, &[0], &opts).is_err());
    }
    assert!(run_convergence(&model, &X0, 0.0, 1.0, &DEFAULT_EPS_LIST, &[3], &opts).is_err());
}

#[test]
fn sweep_is_deterministic() {
    let run = || {
        let mut r = sweep(RegimeKind::GcConst, WaveField::trig(1.0), &X0, &[0, 1]);
        r.runtime_seconds = 0.0;
        r
    };
    assert_eq!(run(), run());
}

fn flr_field() -> WaveField<f64> {
    WaveField {
        components: [
            WaveComponent::constant(0.0),
            WaveComponent::sine(1.0, 0, 0.0),
            WaveComponent::constant(0.0),
        ],
    }
}

#[test]
fn crosscheck_examples() {
    let gc = Arc::new(Regime::new(RegimeKind::GcConst, Arc::new(WaveField::trig(1.0))).unwrap());
    let r = crosscheck(gc.clone(), 0, 50, 1).unwrap();
    assert!(r.max_abs < 1e-9 && r.failures.is_empty());
    let flr = Arc::new(Regime::new(RegimeKind::FlrConst, Arc::new(flr_field())).unwrap());
    assert!(crosscheck(flr, 0, 50, 1).unwrap().max_abs < 1e-7);

    let mut a = crosscheck(gc.clone(), 2, 20, 9).unwrap();
    let mut b = crosscheck(gc.clone(), 2, 20, 9).unwrap();
    a.runtime_seconds = 0.0;
    b.runtime_seconds = 0.0;
    assert_eq!(a, b);
    assert!(a.sampling_box.contains("[-1,1]^3"));

    assert!(crosscheck(gc, 3, 5, 1).is_err());
}
