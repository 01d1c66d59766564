//! Oscillating profiles `X^k(t, θ)` from the averaged states, the partial
//! sums `Σ ε^i X^i`, and densities transported along the approximate
//! characteristics.

use std::sync::Arc;

use crate::averaging::{AveragingEngine, StateStack};
use crate::error::{Error, Result};
use crate::integrate::{solve_hierarchy, TimeGrid, DEFAULT_HIERARCHY_STEPS};
use crate::linalg::vecops;
use crate::model::{tensor_apply, PeriodicFlow, TwoScaleSystem};
use crate::scalar::{reduce_phase, Real};

/// Anything that supplies averaged rates and profiles for a system.
pub trait ExpansionModel<T: Real>: Send + Sync {
    fn dim(&self) -> usize;

    fn max_order(&self) -> usize;

    fn name(&self) -> String;

    fn system(&self) -> Arc<dyn TwoScaleSystem<T>>;

    /// `ã⁰ … ã^k` at `stack`, concatenated.
    fn rates(&self, k: usize, stack: &StateStack<T>) -> Result<Vec<T>>;

    /// `X⁰ … X^k` at `(stack.t, θ)`.
    fn profiles(&self, k: usize, stack: &StateStack<T>, theta: T) -> Result<Vec<Vec<T>>>;
}

/// The recurrence engine applied to an arbitrary system.
#[derive(Clone, Debug)]
pub struct GenericModel<T: Real> {
    engine: AveragingEngine<T>,
}

impl<T: Real> GenericModel<T> {
    pub fn new(engine: AveragingEngine<T>) -> Self {
        GenericModel { engine }
    }

    pub fn from_system(sys: Arc<dyn TwoScaleSystem<T>>) -> Self {
        Self::new(AveragingEngine::new(sys))
    }

    pub fn engine(&self) -> &AveragingEngine<T> {
        &self.engine
    }
}

impl<T: Real> ExpansionModel<T> for GenericModel<T> {
    fn dim(&self) -> usize {
        self.engine.system().dim()
    }

    fn max_order(&self) -> usize {
        crate::averaging::MAX_ENGINE_ORDER.min(self.engine.system().smoothness())
    }

    fn name(&self) -> String {
        "generic engine".into()
    }

    fn system(&self) -> Arc<dyn TwoScaleSystem<T>> {
        self.engine.system_arc()
    }

    fn rates(&self, k: usize, stack: &StateStack<T>) -> Result<Vec<T>> {
        Ok(self.engine.expand(stack, k)?.rates())
    }

    fn profiles(&self, k: usize, stack: &StateStack<T>, theta: T) -> Result<Vec<Vec<T>>> {
        let theta = reduce_phase(theta);
        let sys = self.engine.system();
        let flow = sys.flow();
        let (t, y0) = (stack.t, stack.level(0));
        let mut out = vec![flow.eval(t, theta, y0)?];
        if k == 0 {
            return Ok(out);
        }
        let le = self.engine.expand(stack, k)?;
        let jz = flow.jacobian(t, theta, y0)?;
        let w = le.first_increment(theta);
        out.push(jz.mul_vec(&w)?);
        if k >= 2 {
            let v = vecops::add(stack.level(2), &le.theta_a(1, theta));
            let curv = flow_second_variation(flow, t, theta, y0, &w)?;
            out.push(vecops::axpy(&jz.mul_vec(&v)?, T::lit(0.5), &curv));
        }
        Ok(out)
    }
}

/// `{∇²_z Z}{w, w}`, from the flow's Hessian when it has one and from
/// central differences of `∇_z Z` otherwise.
pub fn flow_second_variation<T: Real>(
    flow: &dyn PeriodicFlow<T>,
    t: T,
    theta: T,
    z: &[T],
    w: &[T],
) -> Result<Vec<T>> {
    if let Some(h) = flow.hessian(t, theta, z) {
        return tensor_apply(&h?, &[w, w]);
    }
    let nw = vecops::norm(w);
    if nw == T::zero() {
        return Ok(vec![T::zero(); z.len()]);
    }
    let s = T::epsilon().cbrt() * (T::one() + vecops::max_abs(z)) / nw;
    let jp = flow.jacobian(t, theta, &vecops::axpy(z, s, w))?;
    let jm = flow.jacobian(t, theta, &vecops::axpy(z, -s, w))?;
    let (a, b) = (jp.mul_vec(w)?, jm.mul_vec(w)?);
    Ok(a.iter().zip(&b).map(|(&p, &m)| (p - m) / (s + s)).collect())
}

/// `X^k(t, θ)` for the given stack.
pub fn reconstruct_x<T: Real>(
    model: &dyn ExpansionModel<T>,
    k: usize,
    theta: T,
    stack: &StateStack<T>,
) -> Result<Vec<T>> {
    check_order(model, k)?;
    Ok(model.profiles(k, stack, theta)?.swap_remove(k))
}

/// `Σ_{i≤k} ε^i X^i(t, (t−s)/ε)`.
pub fn expansion_sum<T: Real>(
    model: &dyn ExpansionModel<T>,
    k: usize,
    eps: T,
    s: T,
    stack: &StateStack<T>,
) -> Result<Vec<T>> {
    check_order(model, k)?;
    let theta = reduce_phase((stack.t - s) / eps);
    let profiles = model.profiles(k, stack, theta)?;
    Ok(weighted_sum(&profiles, eps))
}

/// `Σ_i ε^i p_i`, summed from the highest order down.
pub fn weighted_sum<T: Real>(profiles: &[Vec<T>], eps: T) -> Vec<T> {
    let mut acc = vec![T::zero(); profiles[0].len()];
    for p in profiles.iter().rev() {
        acc = vecops::axpy(p, eps, &acc);
    }
    acc
}

fn check_order<T: Real>(model: &dyn ExpansionModel<T>, k: usize) -> Result<()> {
    if k > model.max_order() {
        return Err(Error::UnsupportedOrder {
            what: model.name(),
            order: k,
            max_order: model.max_order(),
        });
    }
    Ok(())
}

/// `(X_ε − Σ_{i<k} ε^i X^i) / ε^k` at every grid point; `profiles[i]` is the
/// trajectory of `X^i`.
pub fn residual_extract<T: Real>(
    reference: &[Vec<T>],
    profiles: &[Vec<Vec<T>>],
    k: usize,
    eps: T,
) -> Result<Vec<Vec<T>>> {
    if eps == T::zero() {
        return Err(Error::InvalidInput("eps must be nonzero".into()));
    }
    if profiles.len() < k {
        return Err(Error::InvalidInput(format!(
            "residual of order {k} needs {k} profiles, got {}",
            profiles.len()
        )));
    }
    for p in &profiles[..k] {
        if p.len() != reference.len() {
            return Err(Error::GridMismatch {
                left: reference.len(),
                right: p.len(),
            });
        }
    }
    let scale = T::one() / eps.powi(k as i32);
    Ok(reference
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let mut r = x.clone();
            let mut w = T::one();
            for p in &profiles[..k] {
                r = vecops::axpy(&r, -w, &p[i]);
                w = w * eps;
            }
            vecops::scale(scale, &r)
        })
        .collect())
}

/// `u₀(Σ_{i≤k} ε^i X^i(s, −(t−s)/ε; x, t))`: the initial density carried
/// along the order-`k` approximation of the backward characteristic.
pub fn transported_density<T: Real>(
    u0: impl Fn(&[T]) -> T,
    model: &dyn ExpansionModel<T>,
    k: usize,
    eps: T,
    t: T,
    s: T,
    x: &[T],
) -> Result<T> {
    check_order(model, k)?;
    if !(eps > T::zero()) {
        return Err(Error::InvalidInput(format!("eps must be positive, got {eps}")));
    }
    if t == s {
        return Ok(u0(x));
    }
    let grid = TimeGrid::new(t, s - t, 2)?;
    let hier = solve_hierarchy(model, k, x, &grid, DEFAULT_HIERARCHY_STEPS)?;
    let foot = expansion_sum(model, k, eps, t, &hier.stack_at(1))?;
    Ok(u0(&foot))
}
