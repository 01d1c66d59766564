//! Fixed-step RK4 for the stiff reference problem and for the ε-free
//! averaged hierarchy.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::averaging::StateStack;
use crate::error::{Error, Result};
use crate::linalg::vecops;
use crate::model::TwoScaleSystem;
use crate::reconstruct::ExpansionModel;
use crate::scalar::{reduce_phase, Real};

/// Default RK4 steps per fast period `2πε` for [`solve_reference`].
pub const DEFAULT_OSC_RESOLUTION: usize = 50;

/// Default number of hierarchy steps over the horizon.
pub const DEFAULT_HIERARCHY_STEPS: usize = 2000;

/// Output times `s + i·T/(M−1)`, `i = 0..M`. A negative horizon runs
/// backwards in time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid<T> {
    pub start: T,
    pub horizon: T,
    pub samples: usize,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(start: T, horizon: T, samples: usize) -> Result<Self> {
        if !(start.is_finite() && horizon.is_finite()) || horizon == T::zero() {
            return Err(Error::InvalidInput(format!(
                "time grid needs finite start and nonzero finite horizon, got s = {start}, T = {horizon}"
            )));
        }
        if samples < 2 {
            return Err(Error::InvalidInput(format!("time grid needs at least 2 samples, got {samples}")));
        }
        Ok(TimeGrid { start, horizon, samples })
    }

    pub fn spacing(&self) -> T {
        self.horizon / T::from_count(self.samples - 1)
    }

    pub fn time(&self, i: usize) -> T {
        if i + 1 == self.samples {
            self.start + self.horizon
        } else {
            self.start + self.spacing() * T::from_count(i)
        }
    }

    pub fn times(&self) -> Vec<T> {
        (0..self.samples).map(|i| self.time(i)).collect()
    }
}

/// Classical RK4 with `substeps` uniform steps between consecutive grid
/// points; returns the state at every grid point.
pub fn rk4_integrate<T: Real>(
    mut f: impl FnMut(T, &[T]) -> Result<Vec<T>>,
    x0: &[T],
    grid: &TimeGrid<T>,
    substeps: usize,
) -> Result<Vec<Vec<T>>> {
    if substeps == 0 {
        return Err(Error::InvalidInput("substeps must be at least 1".into()));
    }
    let n = x0.len();
    let half = T::lit(0.5);
    let sixth = T::one() / T::lit(6.0);
    let mut out = Vec::with_capacity(grid.samples);
    let mut x = x0.to_vec();
    out.push(x.clone());
    let mut tmp = vec![T::zero(); n];
    for i in 1..grid.samples {
        let t0 = grid.time(i - 1);
        let h = (grid.time(i) - t0) / T::from_count(substeps);
        for step in 0..substeps {
            let t = t0 + h * T::from_count(step);
            let k1 = f(t, &x)?;
            for j in 0..n {
                tmp[j] = x[j] + half * h * k1[j];
            }
            let k2 = f(t + half * h, &tmp)?;
            for j in 0..n {
                tmp[j] = x[j] + half * h * k2[j];
            }
            let k3 = f(t + half * h, &tmp)?;
            for j in 0..n {
                tmp[j] = x[j] + h * k3[j];
            }
            let k4 = f(t + h, &tmp)?;
            for j in 0..n {
                x[j] = x[j] + h * sixth * (k1[j] + (k2[j] + k3[j]) * T::lit(2.0) + k4[j]);
            }
            if !vecops::all_finite(&x) {
                return Err(Error::BlowUp {
                    time: (t + h).to_f64_lossy(),
                });
            }
        }
        out.push(x.clone());
    }
    Ok(out)
}

fn substeps_for<T: Real>(grid: &TimeGrid<T>, dt: T) -> usize {
    let interval = grid.spacing().abs();
    (interval / dt).ceil().to_usize().unwrap_or(1).max(1)
}

/// Integrates `dX/dt = a(t,(t−s)/ε,X) + b(t,X)/ε` from `grid.start` with
/// step `min(|T|/1000, 2πε/osc_resolution)`.
pub fn solve_reference<T: Real>(
    sys: &dyn TwoScaleSystem<T>,
    eps: T,
    x0: &[T],
    grid: &TimeGrid<T>,
    osc_resolution: usize,
) -> Result<Vec<Vec<T>>> {
    if !(eps > T::zero()) {
        return Err(Error::InvalidInput(format!("eps must be positive, got {eps}")));
    }
    if osc_resolution == 0 {
        return Err(Error::InvalidInput("osc_resolution must be at least 1".into()));
    }
    if x0.len() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            found: x0.len(),
        });
    }
    let dt = (grid.horizon.abs() / T::lit(1000.0))
        .min(T::two_pi() * eps / T::from_count(osc_resolution));
    let s = grid.start;
    let inv = T::one() / eps;
    rk4_integrate(
        |t, x| {
            let theta = reduce_phase((t - s) * inv);
            let a = sys.slow_field(t, theta, x)?;
            let b = sys.fast_field(t, x)?;
            Ok(vecops::axpy(&a, inv, &b))
        },
        x0,
        grid,
        substeps_for(grid, dt),
    )
}

/// Time-sampled solutions `Y⁰ … Y^k` of the averaged hierarchy.
#[derive(Clone, Debug, PartialEq)]
pub struct AveragedHierarchy<T> {
    pub order: usize,
    pub grid: TimeGrid<T>,
    /// `y[j][i]` is `Y^j` at grid point `i`.
    pub y: Vec<Vec<Vec<T>>>,
}

impl<T: Real> AveragedHierarchy<T> {
    /// The stack `(Y⁰, …, Y^k)` at grid point `i`.
    pub fn stack_at(&self, i: usize) -> StateStack<T> {
        StateStack {
            t: self.grid.time(i),
            y: self.y.iter().map(|level| level[i].clone()).collect(),
        }
    }
}

/// Integrates `dY^j/dt = ã^j(t, Y⁰..Y^j)`, `j = 0..k`, as one stacked system
/// with `Y⁰(s) = x0` and `Y^j(s) = 0`, using `steps` RK4 steps over the horizon.
pub fn solve_hierarchy<T: Real>(
    model: &dyn ExpansionModel<T>,
    k: usize,
    x0: &[T],
    grid: &TimeGrid<T>,
    steps: usize,
) -> Result<AveragedHierarchy<T>> {
    if k > model.max_order() {
        return Err(Error::UnsupportedOrder {
            what: model.name(),
            order: k,
            max_order: model.max_order(),
        });
    }
    let d = model.dim();
    if x0.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: x0.len(),
        });
    }
    if steps == 0 {
        return Err(Error::InvalidInput("hierarchy steps must be at least 1".into()));
    }
    let init = StateStack::initial(grid.start, x0, k);
    let flat0: Vec<T> = init.y.concat();
    let dt = grid.horizon.abs() / T::from_count(steps);
    let path = rk4_integrate(
        |t, flat| model.rates(k, &StateStack::from_flat(t, flat, d)?),
        &flat0,
        grid,
        substeps_for(grid, dt),
    )?;
    let y = (0..=k)
        .map(|j| path.iter().map(|row| row[j * d..(j + 1) * d].to_vec()).collect())
        .collect();
    Ok(AveragedHierarchy { order: k, grid: *grid, y })
}

/// Reference solution and partial-sum reconstructions on one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryBundle<T> {
    pub grid: TimeGrid<T>,
    pub eps: T,
    pub reference: Vec<Vec<T>>,
    /// Order `k` maps to `Σ_{i≤k} ε^i X^i` at each grid point.
    pub reconstruction: BTreeMap<usize, Vec<Vec<T>>>,
}
