//! Acceptance criteria 1-8. Runs without the test harness so the PASS/FAIL
//! lines always reach the output; exits nonzero if any criterion fails.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::path::Path;
use std::process::Command;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twoscale::harness::{crosscheck, run_convergence, SweepOptions, DEFAULT_EPS_LIST};
use twoscale::linalg::{vecops, Mat3};
use twoscale::model::{flow_ode_residual, projector_p, rotation_cal_r, rotation_r};
use twoscale::quadrature::PeriodicSamples;
use twoscale::regimes::variable::y1_position_rhs;
use twoscale::{
    transported_density, AveragingEngine, ClosedFormModel, ConvergenceReport, Regime, RegimeKind,
    StateStack, WaveComponent, WaveField,
};

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Outcome);

const X0: [f64; 6] = [0.0, 0.0, 0.0, 1.0, 0.5, 0.0];

fn regime(kind: RegimeKind, field: WaveField<f64>) -> Arc<Regime<f64>> {
    Arc::new(Regime::new(kind, Arc::new(field)).unwrap())
}

fn gc_field() -> WaveField<f64> {
    WaveField::trig(1.0)
}

fn irs_field() -> WaveField<f64> {
    WaveField::harmonic([0.0, 1.0, 0.0], 0.2)
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

fn variable_field() -> WaveField<f64> {
    WaveField::constant([0.1, 0.2, 0.3])
}

fn field_for(kind: RegimeKind) -> WaveField<f64> {
    match kind {
        RegimeKind::IrsConst => irs_field(),
        RegimeKind::GcConst => gc_field(),
        RegimeKind::FlrConst => flr_field(),
        RegimeKind::GcVariable => variable_field(),
    }
}

fn sweep(kind: RegimeKind, x0: &[f64], orders: &[usize]) -> Result<ConvergenceReport, String> {
    let model = ClosedFormModel::new(regime(kind, field_for(kind)));
    run_convergence(&model, x0, 0.0, 1.0, &DEFAULT_EPS_LIST, orders, &SweepOptions::default())
        .map_err(|e| e.to_string())
}

/// Checks each `(order, expected, tolerance)` slope and that no point fell
/// below the reference floor.
fn check_slopes(r: &ConvergenceReport, want: &[(usize, f64, f64)]) -> Outcome {
    if !r.failures.is_empty() {
        return Err(format!("failed eps values: {:?}", r.failures));
    }
    let floored = r.errors.iter().filter(|e| e.below_floor).count();
    let mut parts = Vec::new();
    let mut ok = floored == 0;
    for &(k, expected, tol) in want {
        match r.slope(k) {
            Some(s) => {
                ok &= (s - expected).abs() <= tol;
                parts.push(format!("order {k} slope {s:.3} (want {expected}±{tol})"));
            }
            None => {
                ok = false;
                parts.push(format!("order {k} slope undefined"));
            }
        }
    }
    let msg = format!("{}; {floored} of {} points below floor", parts.join(", "), r.errors.len());
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    vecops::max_abs(&vecops::sub(a, b)) / vecops::max_abs(b).max(1.0)
}

fn random_stack(rng: &mut ChaCha8Rng, k: usize, off_axis: bool) -> StateStack<f64> {
    let mut y = Vec::new();
    for j in 0..=k {
        let mut v: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if j == 0 && off_axis {
            let (r, phi) = (rng.gen_range(0.5..2.0), rng.gen_range(0.0..TAU));
            v[0] = r * phi.cos();
            v[1] = r * phi.sin();
        }
        y.push(v);
    }
    StateStack::new(rng.gen_range(0.0..1.0), y).unwrap()
}

fn criterion_1() -> Outcome {
    let r = sweep(RegimeKind::GcConst, &X0, &[0, 1, 2])?;
    check_slopes(&r, &[(0, 1.0, 0.3), (1, 2.0, 0.3), (2, 3.0, 0.4)])
}

fn criterion_2() -> Outcome {
    let r = sweep(RegimeKind::IrsConst, &X0, &[0, 1])?;
    let slopes = check_slopes(&r, &[(0, 1.0, 0.3), (1, 2.0, 0.3)])?;
    let engine = AveragingEngine::new(regime(RegimeKind::IrsConst, irs_field()));
    let drift = engine.abar0(0.0, &X0).map_err(|e| e.to_string())?[4];
    let msg = format!("{slopes}; dU2/dt at t=s is {drift:.12}");
    if (drift - 0.5).abs() < 1e-6 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_3() -> Outcome {
    let r = sweep(RegimeKind::FlrConst, &X0, &[0])?;
    check_slopes(&r, &[(0, 1.0, 0.3)])
}

fn criterion_4() -> Outcome {
    let r = regime(RegimeKind::GcVariable, variable_field());
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut flow_worst = 0.0f64;
    for _ in 0..100 {
        let z = random_stack(&mut rng, 0, true).y.remove(0);
        let th = rng.gen_range(0.0..TAU);
        flow_worst = flow_worst.max(flow_ode_residual(r.as_ref(), 0.0, th, &z).map_err(|e| e.to_string())?);
    }
    let engine = AveragingEngine::new(r.clone());
    let mut y1_worst = 0.0f64;
    for _ in 0..50 {
        let s = random_stack(&mut rng, 1, true);
        let l = |j: usize, a: usize| -> [f64; 3] { std::array::from_fn(|i| s.level(j)[a + i]) };
        let e = r.field().value(s.t, 0.0, &l(0, 0));
        let closed =
            y1_position_rhs(&l(0, 0), &l(0, 3), &l(1, 0), &l(1, 3), &e, r.axis_guard()).map_err(|e| e.to_string())?;
        let generic = engine.abar_k(1, &s).map_err(|e| e.to_string())?;
        y1_worst = y1_worst.max(rel(&closed, &generic[..3]));
    }
    let x0 = [1.0, 0.0, 0.0, 1.0, 0.5, 0.0];
    let slope = check_slopes(&sweep(RegimeKind::GcVariable, &x0, &[0])?, &[(0, 1.0, 0.3)]);
    let msg = format!(
        "flow residual {flow_worst:.2e}; Y1 position rel {y1_worst:.2e}; {}",
        slope.as_ref().unwrap_or_else(|e| e)
    );
    if flow_worst < 1e-5 && y1_worst < 1e-5 && slope.is_ok() {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_5() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for kind in RegimeKind::ALL {
        for k in 0..=kind.max_order() {
            let rep = crosscheck(regime(kind, field_for(kind)), k, 50, 5).map_err(|e| e.to_string())?;
            ok &= rep.max_rel < 1e-5 && rep.failures.is_empty();
            parts.push(format!("{kind}/{k} {:.1e}", rep.max_rel));
        }
    }
    let msg = format!("max relative deviation: {}", parts.join(", "));
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut rot = 0.0f64;
    for _ in 0..20 {
        let theta = rng.gen_range(0.0..TAU);
        let n = 2000;
        let h = theta / n as f64;
        let mut acc = Mat3::zero();
        for i in 0..=n {
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc = acc + rotation_r(i as f64 * h).scale(w * h / 3.0);
        }
        rot = rot.max(acc.max_abs_diff(&(projector_p().scale(theta) + rotation_cal_r(theta))));
        let shifted = rotation_r(FRAC_PI_2) - rotation_r(FRAC_PI_2 + theta);
        rot = rot.max(rotation_cal_r(theta).max_abs_diff(&shifted));
    }

    let (mut ends, mut deriv, mut mean) = (0.0f64, 0.0f64, 0.0f64);
    for (kind, field, off_axis) in [
        (RegimeKind::GcConst, gc_field(), false),
        (RegimeKind::GcVariable, variable_field(), true),
    ] {
        let engine = AveragingEngine::new(regime(kind, field));
        for _ in 0..5 {
            let stack = random_stack(&mut rng, 2, off_axis);
            let le = engine.expand(&stack, 2).map_err(|e| e.to_string())?;
            for k in 0..=2 {
                for m in 0..3 {
                    ends = ends.max(vecops::max_abs(&le.theta_a(k, TAU * m as f64)));
                }
                for _ in 0..3 {
                    let th = rng.gen_range(0.1..TAU - 0.1);
                    let h = 1e-4;
                    let fd = vecops::scale(
                        1.0 / (2.0 * h),
                        &vecops::sub(&le.theta_a(k, th + h), &le.theta_a(k, th - h)),
                    );
                    let direct = vecops::sub(&le.alpha(k, th).map_err(|e| e.to_string())?, le.abar(k));
                    deriv = deriv.max(vecops::max_abs(&vecops::sub(&fd, &direct)));
                }
                let s = PeriodicSamples::sample(384, |th| Ok(vecops::sub(&le.alpha(k, th)?, le.abar(k))))
                    .map_err(|e| e.to_string())?;
                mean = mean.max(vecops::max_abs(s.mean()));
            }
        }
    }
    let msg = format!("rotation identities {rot:.1e}; end values {ends:.1e}; d/dθ gap {deriv:.1e}; means {mean:.1e}");
    if rot < 1e-10 && ends < 1e-12 && deriv < 1e-6 && mean < 1e-9 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_7() -> Outcome {
    let model = ClosedFormModel::new(regime(RegimeKind::GcConst, WaveField::zero()));
    let c = [0.7, -1.3, 0.4];
    let u0 = |x: &[f64]| c[0] * x[0] + c[1] * x[1] + c[2] * x[2];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let x: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let t = rng.gen_range(0.1..1.0);
        let eps = rng.gen_range(0.01..0.2);
        let got = transported_density(u0, &model, 0, eps, t, 0.0, &x).map_err(|e| e.to_string())?;
        let exact = u0(&[x[0] - t * x[3], x[1], x[2]]);
        worst = worst.max((got - exact).abs());
    }
    let msg = format!("max deviation from free streaming {worst:.1e} over 20 points");
    if worst < 1e-8 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// The report with its `runtime_seconds` line removed.
fn run_cli(config: &str, dir: &Path, name: &str) -> Result<String, String> {
    let cfg = dir.join(format!("{name}.json"));
    let out = dir.join(format!("{name}.out.json"));
    std::fs::write(&cfg, config).map_err(|e| e.to_string())?;
    let status = Command::new(env!("CARGO_BIN_EXE_twoscale"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .arg("--quiet")
        .status()
        .map_err(|e| e.to_string())?;
    if !status.success() {
        return Err(format!("{name} exited with {status}"));
    }
    let text = std::fs::read_to_string(&out).map_err(|e| e.to_string())?;
    Ok(text.lines().filter(|l| !l.contains("\"runtime_seconds\"")).collect::<Vec<_>>().join("\n"))
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let converge = r#"{"command":"converge","regime":"gc_const","order":2,"x0":[0,0,0],"v0":[1,0.5,0],"T":1,
        "field":{"preset":"trig","amplitude":1.0},"seed":3}"#;
    let cross = r#"{"command":"crosscheck","regime":"gc_const","order":2,"field":{"preset":"trig"},"seed":3}"#;
    let mut same = Vec::new();
    for (name, cfg) in [("converge", converge), ("crosscheck", cross)] {
        let a = run_cli(cfg, dir.path(), &format!("{name}_a"))?;
        let b = run_cli(cfg, dir.path(), &format!("{name}_b"))?;
        same.push((name, a == b, a.len()));
    }
    let msg = same
        .iter()
        .map(|(n, eq, len)| format!("{n} {} ({len} bytes)", if *eq { "identical" } else { "differs" }))
        .collect::<Vec<_>>()
        .join(", ");
    if same.iter().all(|s| s.1) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() {
    let criteria: [Criterion; 8] = [
        (1, "guiding-centre convergence", criterion_1),
        (2, "isotope resonant convergence", criterion_2),
        (3, "finite Larmor radius convergence", criterion_3),
        (4, "variable field", criterion_4),
        (5, "closed form vs generic engine", criterion_5),
        (6, "structural identities", criterion_6),
        (7, "transported density", criterion_7),
        (8, "determinism", criterion_8),
    ];
    let mut failed = Vec::new();
    for (n, name, check) in criteria {
        match check() {
            Ok(detail) => println!("criterion {n} PASS {name}: {detail}"),
            Err(detail) => {
                println!("criterion {n} FAIL {name}: {detail}");
                failed.push(n);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
