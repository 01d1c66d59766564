//! Structural identities of the rotation helpers and of the expansion
//! coefficients at randomized states.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twoscale::averaging::{AveragingEngine, StateStack};
use twoscale::field::{WaveComponent, WaveField};
use twoscale::linalg::{vecops, Mat3};
use twoscale::model::{projector_p, rotation_cal_r, rotation_r};
use twoscale::quadrature::PeriodicSamples;
use twoscale::regimes::{Regime, RegimeKind};

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

fn random_stack(rng: &mut ChaCha8Rng, k: usize, off_axis: bool) -> StateStack<f64> {
    let mut y = Vec::new();
    for j in 0..=k {
        let mut v: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if j == 0 && off_axis {
            let (r, phi) = (rng.gen_range(0.5..2.0), rng.gen_range(0.0..TAU));
            v[0] = r * f64::cos(phi);
            v[1] = r * f64::sin(phi);
        }
        y.push(v);
    }
    StateStack::new(rng.gen_range(0.0..1.0), y).unwrap()
}

#[test]
fn rotation_integral_is_theta_p_plus_cal_r() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let theta = rng.gen_range(0.0..TAU);
        // Composite Simpson, accurate to ~1e-13 at this resolution.
        let n = 2000;
        let h = theta / n as f64;
        let mut acc = Mat3::zero();
        for i in 0..=n {
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            acc = acc + rotation_r(i as f64 * h).scale(w * h / 3.0);
        }
        let expected = projector_p().scale(theta) + rotation_cal_r(theta);
        assert!(acc.max_abs_diff(&expected) < 1e-11, "theta {theta}");
    }
}

#[test]
fn cal_r_is_difference_of_shifted_rotations() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let theta = rng.gen_range(-10.0..10.0);
        let rhs = rotation_r(FRAC_PI_2) - rotation_r(FRAC_PI_2 + theta);
        assert!(rotation_cal_r(theta).max_abs_diff(&rhs) < 1e-12);
    }
}

#[test]
fn rotations_compose_and_are_orthogonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let (a, b) = (rng.gen_range(-7.0..7.0), rng.gen_range(-7.0..7.0));
        assert!((rotation_r(a) * rotation_r(b)).max_abs_diff(&rotation_r(a + b)) < 1e-12);
        let r = rotation_r(a);
        assert!((r.transpose() * r).max_abs_diff(&Mat3::identity()) < 1e-12);
    }
}

/// `θÃ^k` vanishes at multiples of 2π, its phase derivative is `α̃^k − ã^k`,
/// and `α̃^k − ã^k` has zero period mean.
fn check_expansion_identities(engine: &AveragingEngine<f64>, off_axis: bool, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..5 {
        let stack = random_stack(&mut rng, 2, off_axis);
        let le = engine.expand(&stack, 2).unwrap();
        for k in 0..=2 {
            for m in 0..3 {
                let end = le.theta_a(k, TAU * m as f64);
                assert!(vecops::max_abs(&end) < 1e-12, "k={k} m={m}: {end:?}");
            }
            for _ in 0..3 {
                let th = rng.gen_range(0.1..TAU - 0.1);
                let h = 1e-4;
                let fd = vecops::scale(
                    1.0 / (2.0 * h),
                    &vecops::sub(&le.theta_a(k, th + h), &le.theta_a(k, th - h)),
                );
                let direct = vecops::sub(&le.alpha(k, th).unwrap(), le.abar(k));
                let gap = vecops::max_abs(&vecops::sub(&fd, &direct));
                assert!(gap < 1e-6, "k={k} theta={th}: gap {gap:e}");
            }
            let s = PeriodicSamples::sample(384, |th| Ok(vecops::sub(&le.alpha(k, th)?, le.abar(k)))).unwrap();
            let mean = vecops::max_abs(s.mean());
            assert!(mean < 1e-9, "k={k}: mean {mean:e}");
        }
    }
}

#[test]
fn expansion_identities_guiding_centre() {
    let regime = Regime::new(RegimeKind::GcConst, Arc::new(moving_field())).unwrap();
    check_expansion_identities(&AveragingEngine::new(Arc::new(regime)), false, 11);
}

#[test]
fn expansion_identities_variable_field() {
    let regime = Regime::new(RegimeKind::GcVariable, Arc::new(moving_field())).unwrap();
    check_expansion_identities(&AveragingEngine::new(Arc::new(regime)), true, 12);
}

#[test]
fn theta_a_at_zero_and_gc_closed_form() {
    let field = WaveField::constant([0.4, -1.2, 0.7]);
    let regime = Regime::new(RegimeKind::GcConst, Arc::new(field)).unwrap();
    let engine = AveragingEngine::new(Arc::new(regime));
    let stack = StateStack::new(0.3, vec![vec![0.1, 0.2, 0.3, 1.0, -0.5, 0.25]]).unwrap();
    assert!(vecops::max_abs(&engine.theta_a(0, &stack, 0.0).unwrap()) < 1e-14);
    for &th in &[0.5, PI, 4.0] {
        let got = engine.theta_a(0, &stack, th).unwrap();
        let pos = rotation_cal_r(th).apply(&[1.0, -0.5, 0.25]);
        let vel = rotation_cal_r(-th).apply(&[0.4, -1.2, 0.7]).map(|v| -v);
        let expected = [pos, vel].concat();
        assert!(vecops::max_abs(&vecops::sub(&got, &expected)) < 1e-12);
    }
}
