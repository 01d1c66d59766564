//! ε sweeps against the reference solver, slope fits, and the closed-form
//! versus generic-engine cross-check.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::averaging::{AveragingEngine, StateStack};
use crate::error::{Error, Result};
use crate::integrate::{
    solve_hierarchy, solve_reference, AveragedHierarchy, TimeGrid, TrajectoryBundle,
    DEFAULT_HIERARCHY_STEPS,
};
use crate::linalg::vecops;
use crate::reconstruct::{expansion_sum, ExpansionModel, GenericModel};
use crate::regimes::{regime_profiles, regime_rhs, variable, Regime, RegimeKind};
use crate::scalar::Real;

/// Default ε sweep `2⁻³ … 2⁻⁷`.
pub const DEFAULT_EPS_LIST: [f64; 5] = [0.125, 0.0625, 0.03125, 0.015625, 0.0078125];

/// RK4 steps per fast period used by the sweep's reference solves.
pub const SWEEP_OSC_RESOLUTION: usize = 4000;

/// Errors at or below this are flagged as exact.
pub const EXACT_FLOOR: f64 = 1e-10;

/// Largest Euclidean distance between paired grid points.
pub fn sup_error<T: Real>(a: &[Vec<T>], b: &[Vec<T>]) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::GridMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let mut worst = T::zero();
    for (x, y) in a.iter().zip(b) {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: y.len(),
            });
        }
        worst = worst.max(vecops::distance(x, y));
    }
    Ok(worst)
}

/// Least-squares slope of `log err` against `log ε`.
pub fn fit_slope(eps: &[f64], err: &[f64]) -> Result<f64> {
    if eps.len() != err.len() {
        return Err(Error::GridMismatch {
            left: eps.len(),
            right: err.len(),
        });
    }
    if eps.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "a slope needs at least 4 points, got {}",
            eps.len()
        )));
    }
    if let Some(bad) = eps.iter().chain(err).find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidInput(format!("slope fit needs positive finite values, got {bad}")));
    }
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("slope fit needs distinct eps values".into()));
    }
    Ok(sxy / sxx)
}

/// Settings of an ε sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepOptions {
    /// Output grid points over `[s, s+T]`.
    pub samples: usize,
    /// RK4 steps per fast period `2πε` of the coarse reference solve; the
    /// Richardson companion runs at twice this.
    pub osc_resolution: usize,
    pub hierarchy_steps: usize,
    /// Points whose error is within this factor of the reference error are
    /// excluded from the slope fit.
    pub floor_factor: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            samples: 400,
            osc_resolution: SWEEP_OSC_RESOLUTION,
            hierarchy_steps: DEFAULT_HIERARCHY_STEPS,
            floor_factor: 100.0,
        }
    }
}

impl SweepOptions {
    pub fn validate(&self) -> Result<()> {
        if self.samples < 2 || self.osc_resolution == 0 || self.hierarchy_steps == 0 {
            return Err(Error::InvalidInput(
                "samples must be at least 2, osc_resolution and hierarchy_steps at least 1".into(),
            ));
        }
        if !(self.floor_factor >= 1.0 && self.floor_factor.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "floor_factor must be a finite value ≥ 1, got {}",
                self.floor_factor
            )));
        }
        Ok(())
    }
}

/// One `(order, ε)` measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorEntry {
    pub order: usize,
    pub eps: f64,
    pub error: f64,
    /// Richardson estimate of the reference solver's own error.
    pub reference_error: f64,
    pub below_floor: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeEntry {
    pub order: usize,
    pub expected: f64,
    /// `None` when fewer than 4 points sit above the floor.
    pub slope: Option<f64>,
    pub points_used: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsFailure {
    pub eps: f64,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSettings {
    pub x0: Vec<f64>,
    pub s: f64,
    pub horizon: f64,
    pub samples: usize,
    pub osc_resolution: usize,
    pub richardson_resolution: usize,
    pub hierarchy_steps: usize,
    pub floor_factor: f64,
    pub exact_floor: f64,
}

/// Sup-norm errors of the partial sums over an ε sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub system: String,
    pub orders: Vec<usize>,
    pub eps_list: Vec<f64>,
    pub errors: Vec<ErrorEntry>,
    pub slopes: Vec<SlopeEntry>,
    pub failures: Vec<EpsFailure>,
    pub reference_settings: ReferenceSettings,
    pub runtime_seconds: f64,
}

impl ConvergenceReport {
    pub fn error(&self, order: usize, eps: f64) -> Option<&ErrorEntry> {
        self.errors.iter().find(|e| e.order == order && e.eps == eps)
    }

    pub fn slope(&self, order: usize) -> Option<f64> {
        self.slopes.iter().find(|s| s.order == order).and_then(|s| s.slope)
    }

    /// Errors of one order along the ε grid.
    pub fn series(&self, order: usize) -> Vec<&ErrorEntry> {
        self.errors.iter().filter(|e| e.order == order).collect()
    }
}

/// At least four positive values, strictly decreasing.
pub fn check_eps_list(eps_list: &[f64]) -> Result<()> {
    if eps_list.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "eps_list needs at least 4 values, got {}",
            eps_list.len()
        )));
    }
    if eps_list.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidInput("eps values must be positive and finite".into()));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("eps_list must be strictly decreasing".into()));
    }
    Ok(())
}

/// Reference trajectory at `2·osc_resolution` and its Richardson error
/// estimate against the coarse solve.
fn reference_pair<T: Real>(
    model: &dyn ExpansionModel<T>,
    eps: T,
    x0: &[T],
    grid: &TimeGrid<T>,
    opts: &SweepOptions,
) -> Result<(Vec<Vec<T>>, f64)> {
    let sys = model.system();
    let coarse = solve_reference(sys.as_ref(), eps, x0, grid, opts.osc_resolution)?;
    let fine = solve_reference(sys.as_ref(), eps, x0, grid, 2 * opts.osc_resolution)?;
    let diff = sup_error(&coarse, &fine)?.to_f64_lossy();
    Ok((fine, diff / 15.0))
}

/// Partial sums `Σ_{i≤k} ε^i X^i` on the grid.
pub fn reconstruct_on_grid<T: Real>(
    model: &dyn ExpansionModel<T>,
    hier: &AveragedHierarchy<T>,
    k: usize,
    eps: T,
) -> Result<Vec<Vec<T>>> {
    (0..hier.grid.samples)
        .map(|i| expansion_sum(model, k, eps, hier.grid.start, &hier.stack_at(i).truncated(k)))
        .collect()
}

/// Reference solve plus the partial sums of the listed orders for one ε.
pub fn simulate<T: Real>(
    model: &dyn ExpansionModel<T>,
    x0: &[T],
    grid: &TimeGrid<T>,
    eps: T,
    orders: &[usize],
    osc_resolution: usize,
    hierarchy_steps: usize,
) -> Result<TrajectoryBundle<T>> {
    let top = orders.iter().copied().max().unwrap_or(0);
    let hier = solve_hierarchy(model, top, x0, grid, hierarchy_steps)?;
    let reference = solve_reference(model.system().as_ref(), eps, x0, grid, osc_resolution)?;
    let mut reconstruction = BTreeMap::new();
    for &k in orders {
        reconstruction.insert(k, reconstruct_on_grid(model, &hier, k, eps)?);
    }
    Ok(TrajectoryBundle {
        grid: *grid,
        eps,
        reference,
        reconstruction,
    })
}

/// Runs the ε sweep: one ε-free hierarchy solve, then per ε a reference
/// solve with its Richardson companion and the partial sums of every order.
/// A failing ε is recorded in `failures` and the sweep carries on.
#[allow(clippy::too_many_arguments)]
pub fn run_convergence<T: Real>(
    model: &dyn ExpansionModel<T>,
    x0: &[T],
    s: T,
    horizon: T,
    eps_list: &[f64],
    orders: &[usize],
    opts: &SweepOptions,
) -> Result<ConvergenceReport> {
    let started = Instant::now();
    check_eps_list(eps_list)?;
    opts.validate()?;
    if orders.is_empty() {
        return Err(Error::InvalidInput("at least one order is required".into()));
    }
    let mut orders = orders.to_vec();
    orders.sort_unstable();
    orders.dedup();
    let top = *orders.last().unwrap();
    let grid = TimeGrid::new(s, horizon, opts.samples)?;
    let hier = solve_hierarchy(model, top, x0, &grid, opts.hierarchy_steps)?;

    let per_eps: Vec<std::result::Result<Vec<ErrorEntry>, EpsFailure>> = eps_list
        .par_iter()
        .map(|&e| {
            let eps = T::lit(e);
            let run = || -> Result<Vec<ErrorEntry>> {
                let (reference, ref_err) = reference_pair(model, eps, x0, &grid, opts)?;
                orders
                    .iter()
                    .map(|&k| {
                        let rec = reconstruct_on_grid(model, &hier, k, eps)?;
                        let error = sup_error(&reference, &rec)?.to_f64_lossy();
                        Ok(ErrorEntry {
                            order: k,
                            eps: e,
                            error,
                            reference_error: ref_err,
                            below_floor: error <= EXACT_FLOOR || error <= opts.floor_factor * ref_err,
                        })
                    })
                    .collect()
            };
            run().map_err(|err| EpsFailure {
                eps: e,
                message: err.to_string(),
            })
        })
        .collect();

    let mut errors = Vec::new();
    let mut failures = Vec::new();
    for r in per_eps {
        match r {
            Ok(entries) => errors.extend(entries),
            Err(f) => failures.push(f),
        }
    }
    errors.sort_by(|a, b| a.order.cmp(&b.order).then(b.eps.total_cmp(&a.eps)));

    let slopes = orders
        .iter()
        .map(|&k| {
            let used: Vec<&ErrorEntry> = errors
                .iter()
                .filter(|e| e.order == k && !e.below_floor && e.error > 0.0)
                .collect();
            let (xs, ys): (Vec<f64>, Vec<f64>) = used.iter().map(|e| (e.eps, e.error)).unzip();
            SlopeEntry {
                order: k,
                expected: (k + 1) as f64,
                slope: fit_slope(&xs, &ys).ok(),
                points_used: used.len(),
            }
        })
        .collect();

    Ok(ConvergenceReport {
        system: model.name(),
        orders,
        eps_list: eps_list.to_vec(),
        errors,
        slopes,
        failures,
        reference_settings: ReferenceSettings {
            x0: x0.iter().map(|v| v.to_f64_lossy()).collect(),
            s: s.to_f64_lossy(),
            horizon: horizon.to_f64_lossy(),
            samples: opts.samples,
            osc_resolution: opts.osc_resolution,
            richardson_resolution: 2 * opts.osc_resolution,
            hierarchy_steps: opts.hierarchy_steps,
            floor_factor: opts.floor_factor,
            exact_floor: EXACT_FLOOR,
        },
        runtime_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Worst deviation of one quantity over the sampled states.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub max_abs: f64,
    pub max_rel: f64,
}

impl Deviation {
    fn record<T: Real>(&mut self, closed: &[T], generic: &[T]) -> Result<()> {
        if closed.len() != generic.len() {
            return Err(Error::DimensionMismatch {
                expected: generic.len(),
                found: closed.len(),
            });
        }
        let diff = vecops::max_abs(&vecops::sub(closed, generic)).to_f64_lossy();
        let scale = vecops::max_abs(generic).to_f64_lossy().max(1.0);
        // NaN propagates through `max` as the other operand, so record it explicitly.
        self.max_abs = if diff.is_nan() { f64::NAN } else { self.max_abs.max(diff) };
        self.max_rel = if diff.is_nan() { f64::NAN } else { self.max_rel.max(diff / scale) };
        Ok(())
    }
}

/// Generic engine against the closed forms over seeded random states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrosscheckReport {
    pub regime: RegimeKind,
    pub order: usize,
    pub samples: usize,
    pub seed: u64,
    pub sampling_box: String,
    pub rates: Deviation,
    pub profiles: Deviation,
    /// Worst of the two relative deviations.
    pub max_rel: f64,
    pub max_abs: f64,
    pub failures: Vec<String>,
    pub runtime_seconds: f64,
}

/// Box the cross-check draws states from.
pub fn sampling_box(kind: RegimeKind) -> &'static str {
    match kind {
        RegimeKind::GcVariable => {
            "t in [0,1); y0 with (y1, y2) at radius in [0.5,2] and angle in [0,2pi), y3 in [-1,1]; \
             velocities and higher levels in [-1,1]^3; theta in [0,2pi)"
        }
        _ => "t in [0,1); positions, velocities and higher levels in [-1,1]^3; theta in [0,2pi)",
    }
}

fn random_stack<T: Real>(rng: &mut ChaCha8Rng, k: usize, kind: RegimeKind) -> Result<StateStack<T>> {
    let t = rng.gen_range(0.0..1.0);
    let mut y = Vec::with_capacity(k + 1);
    for j in 0..=k {
        let mut v: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if j == 0 && kind == RegimeKind::GcVariable {
            let r: f64 = rng.gen_range(0.5..2.0);
            let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            v[0] = r * phi.cos();
            v[1] = r * phi.sin();
        }
        y.push(v.into_iter().map(T::lit).collect());
    }
    StateStack::new(T::lit(t), y)
}

/// Closed-form and generic values at one state: rates and the order-`k`
/// profile. For the variable field at order 1 only the position blocks
/// have closed forms.
/// Closed-form and generic `(rates, profile)` at one state.
type Paired<T> = [(Vec<T>, Vec<T>); 2];

fn crosscheck_state<T: Real>(
    regime: &Regime<T>,
    engine: &AveragingEngine<T>,
    k: usize,
    stack: &StateStack<T>,
    theta: T,
) -> Result<Paired<T>> {
    let generic = GenericModel::new(engine.clone());
    if regime.kind() == RegimeKind::GcVariable && k == 1 {
        regime.check_state(stack.level(0))?;
        let lv = |j: usize| -> [[T; 3]; 2] {
            let l = stack.level(j);
            [[l[0], l[1], l[2]], [l[3], l[4], l[5]]]
        };
        let ([y0, u0], [y1, u1]) = (lv(0), lv(1));
        let e = regime.field().value(stack.t, T::zero(), &y0);
        let closed_rate = variable::y1_position_rhs(&y0, &u0, &y1, &u1, &e, regime.axis_guard())?;
        let generic_rate = engine.abar_k(1, stack)?;
        let closed_prof = variable::x1_position(theta, &y0, &u0, &y1);
        let generic_prof = generic.profiles(1, stack, theta)?.swap_remove(1);
        return Ok([
            (closed_rate.to_vec(), generic_rate[..3].to_vec()),
            (closed_prof.to_vec(), generic_prof[..3].to_vec()),
        ]);
    }
    let closed_rate = regime_rhs(regime, k, stack)?;
    let generic_rate = engine.expand(stack, k)?.rates();
    let closed_prof = regime_profiles(regime, k, theta, stack)?.swap_remove(k);
    let generic_prof = generic.profiles(k, stack, theta)?.swap_remove(k);
    Ok([(closed_rate, generic_rate), (closed_prof, generic_prof)])
}

/// Samples `n` states with a ChaCha8 stream seeded by `seed` and records the
/// worst deviation between the closed forms and the generic engine. States
/// where either side fails are listed in `failures`.
pub fn crosscheck<T: Real>(regime: Arc<Regime<T>>, k: usize, n: usize, seed: u64) -> Result<CrosscheckReport> {
    let started = Instant::now();
    let kind = regime.kind();
    if k > kind.max_order() {
        return Err(Error::UnsupportedOrder {
            what: format!("regime {kind}"),
            order: k,
            max_order: kind.max_order(),
        });
    }
    let engine = AveragingEngine::new(regime.clone()).with_quadrature(*regime.quadrature());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<(StateStack<T>, T)> = (0..n)
        .map(|_| {
            let stack = random_stack(&mut rng, k, kind)?;
            let theta = T::lit(rng.gen_range(0.0..std::f64::consts::TAU));
            Ok((stack, theta))
        })
        .collect::<Result<_>>()?;
    let results: Vec<Result<Paired<T>>> = draws
        .par_iter()
        .map(|(stack, theta)| crosscheck_state(&regime, &engine, k, stack, *theta))
        .collect();

    let mut rates = Deviation::default();
    let mut profiles = Deviation::default();
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok([(cr, gr), (cp, gp)]) => {
                rates.record(&cr, &gr)?;
                profiles.record(&cp, &gp)?;
            }
            Err(e) => failures.push(format!("state {i}: {e}")),
        }
    }
    let worst = |a: f64, b: f64| if a.is_nan() || b.is_nan() { f64::NAN } else { a.max(b) };
    Ok(CrosscheckReport {
        regime: kind,
        order: k,
        samples: n,
        seed,
        sampling_box: sampling_box(kind).to_string(),
        max_rel: worst(rates.max_rel, profiles.max_rel),
        max_abs: worst(rates.max_abs, profiles.max_abs),
        rates,
        profiles,
        failures,
        runtime_seconds: started.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sup_error_examples() {
        let a = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, -1.0]];
        assert_eq!(sup_error(&a, &a).unwrap(), 0.0);
        let shifted: Vec<Vec<f64>> = a.iter().map(|x| vec![x[0] + 3.0, x[1] + 4.0]).collect();
        assert!((sup_error(&a, &shifted).unwrap() - 5.0).abs() < 1e-15);
        let mut spike = a.clone();
        spike[1][0] += 3.0;
        assert_eq!(sup_error(&a, &spike).unwrap(), 3.0);
        assert!(matches!(sup_error(&a, &a[..2]), Err(Error::GridMismatch { .. })));
    }

    #[test]
    fn fit_slope_examples() {
        let eps: Vec<f64> = (3..=7).map(|j| 2f64.powi(-j)).collect();
        let lin: Vec<f64> = eps.iter().map(|e| 7.0 * e).collect();
        assert!((fit_slope(&eps, &lin).unwrap() - 1.0).abs() < 1e-10);
        let quad: Vec<f64> = eps.iter().map(|e| 3.0 * e * e).collect();
        assert!((fit_slope(&eps, &quad).unwrap() - 2.0).abs() < 1e-10);
        assert!(fit_slope(&eps[..3], &quad[..3]).is_err());
        let mut bad = quad.clone();
        bad[2] = 0.0;
        assert!(fit_slope(&eps, &bad).is_err());
    }

    #[test]
    fn eps_list_validation() {
        assert!(check_eps_list(&DEFAULT_EPS_LIST).is_ok());
        assert!(check_eps_list(&[0.1, 0.05, 0.05, 0.01]).is_err());
        assert!(check_eps_list(&[0.1, 0.05, 0.01]).is_err());
        assert!(check_eps_list(&[0.1, 0.05, 0.01, -0.001]).is_err());
    }
}
