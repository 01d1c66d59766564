//! One function per command. Each returns the text it would write and a
//! short summary; `execute` routes the text to a file or stdout.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use twoscale::harness::{self, SweepOptions};
use twoscale::integrate::rk4_integrate;
use twoscale::linalg::vecops;
use twoscale::scalar::reduce_phase;
use twoscale::{ExpansionModel, TimeGrid, TwoScaleSystem};

use crate::config::{Command, RunConfig};
use crate::error::CliError;
use crate::output;

/// What a finished command produced.
#[derive(Debug)]
pub struct Outcome {
    pub summary: String,
    /// Report text for stdout when no output path was given.
    pub stdout: Option<String>,
    /// ε values or states that failed inside an otherwise complete report.
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityEntry {
    pub eps: f64,
    pub order: usize,
    pub value: f64,
    /// `u₀` at the foot of the reference backward characteristic.
    pub reference: f64,
    pub abs_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityReport {
    pub t: f64,
    pub s: f64,
    pub point: Vec<f64>,
    pub entries: Vec<DensityEntry>,
    pub runtime_seconds: f64,
}

pub fn execute(cfg: &RunConfig, out: Option<&Path>) -> Result<Outcome, CliError> {
    let out = out.map(Path::to_path_buf).or_else(|| cfg.output.as_ref().map(Into::into));
    match cfg.command() {
        Command::Simulate => {
            let path = out.ok_or_else(|| CliError::Config("simulate needs `output` or --out".into()))?;
            simulate(cfg, &path)
        }
        Command::Converge => {
            let report = converge(cfg)?;
            let failures = report.failures.len();
            let mut summary = String::new();
            for s in &report.slopes {
                let slope = s.slope.map_or("n/a".to_string(), |v| format!("{v:.3}"));
                summary.push_str(&format!(
                    "order {}: slope {slope} (expected {}, {} points)\n",
                    s.order, s.expected, s.points_used
                ));
            }
            for f in &report.failures {
                summary.push_str(&format!("eps {}: {}\n", f.eps, f.message));
            }
            finish(cfg, &report, out.as_deref(), summary, failures)
        }
        Command::Crosscheck => {
            let report = crosscheck(cfg)?;
            let summary = format!(
                "{} order {}: max relative deviation {:.3e} over {} states\n",
                report.regime, report.order, report.max_rel, report.samples
            );
            let failures = report.failures.len();
            finish(cfg, &report, out.as_deref(), summary, failures)
        }
        Command::Density => {
            let report = density(cfg)?;
            let mut summary = String::new();
            for e in &report.entries {
                summary.push_str(&format!(
                    "eps {} order {}: {:.12e} (reference {:.12e})\n",
                    e.eps, e.order, e.value, e.reference
                ));
            }
            finish(cfg, &report, out.as_deref(), summary, 0)
        }
    }
}

fn finish<R: Serialize>(
    cfg: &RunConfig,
    report: &R,
    out: Option<&Path>,
    summary: String,
    failures: usize,
) -> Result<Outcome, CliError> {
    let stdout = match out {
        Some(path) => {
            output::emit_report_json(report, cfg, path)?;
            None
        }
        None => Some(output::report_json(cfg, Some(report))?),
    };
    Ok(Outcome {
        summary,
        stdout,
        failures,
    })
}

fn model(cfg: &RunConfig) -> Result<Box<dyn ExpansionModel<f64>>, CliError> {
    Ok(cfg.model_choice()?.model(cfg.quadrature, cfg.fd))
}

fn horizon(cfg: &RunConfig) -> f64 {
    cfg.horizon.expect("resolved")
}

pub fn simulate(cfg: &RunConfig, path: &Path) -> Result<Outcome, CliError> {
    let model = model(cfg)?;
    let grid = TimeGrid::new(cfg.s, horizon(cfg), cfg.samples)?;
    let orders: Vec<usize> = (0..=cfg.order).collect();
    let bundle = harness::simulate(
        model.as_ref(),
        &cfg.initial_state(),
        &grid,
        cfg.eps.expect("resolved"),
        &orders,
        cfg.osc_resolution.expect("resolved"),
        cfg.hierarchy_steps.expect("resolved"),
    )?;
    output::emit_trajectory_csv(&bundle, cfg, path)?;
    let mut summary = format!("wrote {} rows to {}\n", grid.samples, path.display());
    for (k, rec) in &bundle.reconstruction {
        let err = harness::sup_error(&bundle.reference, rec)?;
        summary.push_str(&format!("order {k}: sup error {err:.3e}\n"));
    }
    Ok(Outcome {
        summary,
        stdout: None,
        failures: 0,
    })
}

pub fn converge(cfg: &RunConfig) -> Result<harness::ConvergenceReport, CliError> {
    let model = model(cfg)?;
    let opts = SweepOptions {
        samples: cfg.samples,
        osc_resolution: cfg.osc_resolution.expect("resolved"),
        hierarchy_steps: cfg.hierarchy_steps.expect("resolved"),
        ..Default::default()
    };
    let orders: Vec<usize> = (0..=cfg.order).collect();
    Ok(harness::run_convergence(
        model.as_ref(),
        &cfg.initial_state(),
        cfg.s,
        horizon(cfg),
        cfg.eps_list.as_deref().expect("resolved"),
        &orders,
        &opts,
    )?)
}

pub fn crosscheck(cfg: &RunConfig) -> Result<harness::CrosscheckReport, CliError> {
    let choice = cfg.model_choice()?;
    Ok(harness::crosscheck(
        choice.regime,
        cfg.order,
        cfg.states.expect("resolved"),
        cfg.seed,
    )?)
}

/// Density at `(s + T, x0, v0)` for every ε and every order up to `order`.
pub fn density(cfg: &RunConfig) -> Result<DensityReport, CliError> {
    let started = Instant::now();
    let model = model(cfg)?;
    let u0 = cfg.density.clone().expect("resolved");
    let (s, t) = (cfg.s, cfg.s + horizon(cfg));
    let point = cfg.initial_state();
    let mut entries = Vec::new();
    for eps in cfg.eps_values() {
        let foot = backward_reference(model.system().as_ref(), eps, s, t, &point, cfg.osc_resolution.expect("resolved"))?;
        let reference = u0.eval(&foot);
        for k in 0..=cfg.order {
            let value = twoscale::transported_density(|z| u0.eval(z), model.as_ref(), k, eps, t, s, &point)?;
            entries.push(DensityEntry {
                eps,
                order: k,
                value,
                reference,
                abs_error: (value - reference).abs(),
            });
        }
    }
    Ok(DensityReport {
        t,
        s,
        point,
        entries,
        runtime_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Stiff solve of the characteristic from `(t, x)` back to time `s`, with
/// the fast phase measured from `s`.
fn backward_reference(
    sys: &dyn TwoScaleSystem<f64>,
    eps: f64,
    s: f64,
    t: f64,
    x: &[f64],
    osc_resolution: usize,
) -> Result<Vec<f64>, CliError> {
    let grid = TimeGrid::new(t, s - t, 2)?;
    let dt = ((s - t).abs() / 1000.0).min(std::f64::consts::TAU * eps / osc_resolution as f64);
    let substeps = ((s - t).abs() / dt).ceil().max(1.0) as usize;
    let path = rk4_integrate(
        |tau, z| {
            let theta = reduce_phase((tau - s) / eps);
            let a = sys.slow_field(tau, theta, z)?;
            let b = sys.fast_field(tau, z)?;
            Ok(vecops::axpy(&a, 1.0 / eps, &b))
        },
        x,
        &grid,
        substeps,
    )?;
    Ok(path.into_iter().last().expect("two grid points"))
}
