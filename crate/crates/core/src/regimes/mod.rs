//! The four charged-particle regimes with `𝓜 = e₁` (or a toroidal `𝓜(x)`),
//! their periodic flows and the closed-form averaged systems.
//!
//! Phase space is `(x, v) ∈ ℝ³ × ℝ³`; averaged states are `(y, u)`.

pub mod flr;
pub mod gc;
pub mod irs;
pub mod variable;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::averaging::StateStack;
use crate::error::{Error, Result};
use crate::field::ElectricField;
use crate::linalg::{add3, cross, vec3, Mat3, Matrix, Vec3};
use crate::model::{
    projector_p, rotation_cal_r, rotation_r, PeriodicFlow, Tensor, TwoScaleSystem,
};
use crate::quadrature::QuadratureConfig;
use crate::reconstruct::{ExpansionModel, GenericModel};
use crate::scalar::{reduce_phase, Real};

/// Default minimum distance to the `x₃` axis for the variable field.
pub const DEFAULT_AXIS_GUARD: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeKind {
    /// Isotope resonant separation: `E(t, θ, x)` oscillates with the
    /// cyclotron phase.
    IrsConst,
    /// Guiding centre in a constant strong field.
    GcConst,
    /// Finite Larmor radius in a constant strong field.
    FlrConst,
    /// Guiding centre in the toroidal field `𝓜(x) = (−x₂, x₁, 0)/Ω`.
    GcVariable,
}

impl RegimeKind {
    pub const ALL: [RegimeKind; 4] = [
        RegimeKind::IrsConst,
        RegimeKind::GcConst,
        RegimeKind::FlrConst,
        RegimeKind::GcVariable,
    ];

    /// Highest order with a closed form (the variable field's order 1 runs
    /// through the generic engine).
    pub fn max_order(self) -> usize {
        match self {
            RegimeKind::IrsConst => 1,
            RegimeKind::GcConst => 2,
            RegimeKind::FlrConst => 0,
            RegimeKind::GcVariable => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RegimeKind::IrsConst => "irs_const",
            RegimeKind::GcConst => "gc_const",
            RegimeKind::FlrConst => "flr_const",
            RegimeKind::GcVariable => "gc_variable",
        }
    }

    fn theta_dependent_field(self) -> bool {
        self == RegimeKind::IrsConst
    }
}

impl fmt::Display for RegimeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RegimeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RegimeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "unknown regime `{s}`; expected one of irs_const, gc_const, flr_const, gc_variable"
                ))
            })
    }
}

/// The periodic flow of one regime.
#[derive(Clone, Copy, Debug)]
pub struct RegimeFlow<T> {
    kind: RegimeKind,
    r_min: T,
}

impl<T: Real> RegimeFlow<T> {
    pub fn kind(&self) -> RegimeKind {
        self.kind
    }

    pub fn axis_guard(&self) -> T {
        self.r_min
    }
}

impl<T: Real> PeriodicFlow<T> for RegimeFlow<T> {
    fn eval(&self, _t: T, theta: T, z: &[T]) -> Result<Vec<T>> {
        let (x, w) = split(z)?;
        Ok(match self.kind {
            RegimeKind::IrsConst | RegimeKind::GcConst => join(&x, &rotation_r(theta).apply(&w)),
            RegimeKind::FlrConst => join(
                &add3(&x, &rotation_cal_r(theta).apply(&w)),
                &rotation_r(theta).apply(&w),
            ),
            RegimeKind::GcVariable => {
                variable::guard(&x, self.r_min)?;
                join(&x, &variable::zmat(theta, &x).apply(&w))
            }
        })
    }

    fn jacobian(&self, _t: T, theta: T, z: &[T]) -> Result<Matrix<T>> {
        let (x, w) = split(z)?;
        let (o, i) = (Mat3::zero(), Mat3::identity());
        Ok(match self.kind {
            RegimeKind::IrsConst | RegimeKind::GcConst => {
                Matrix::from_blocks(&i, &o, &o, &rotation_r(theta))
            }
            RegimeKind::FlrConst => {
                Matrix::from_blocks(&i, &rotation_cal_r(theta), &o, &rotation_r(theta))
            }
            RegimeKind::GcVariable => {
                variable::guard(&x, self.r_min)?;
                Matrix::from_blocks(
                    &i,
                    &o,
                    &variable::zmat_w_jacobian(theta, &x, &w),
                    &variable::zmat(theta, &x),
                )
            }
        })
    }

    fn time_derivative(&self, _t: T, _theta: T, z: &[T]) -> Result<Vec<T>> {
        split(z)?;
        Ok(vec![T::zero(); 6])
    }

    fn hessian(&self, _t: T, _theta: T, _z: &[T]) -> Option<Result<Tensor<T>>> {
        match self.kind {
            RegimeKind::GcVariable => None,
            _ => Some(Ok(Tensor::from_fn(6, 3, |_| T::zero()))),
        }
    }

    fn is_time_independent(&self) -> bool {
        true
    }

    fn is_linear(&self) -> bool {
        self.kind != RegimeKind::GcVariable
    }
}

/// A regime together with its prescribed electric field.
#[derive(Clone)]
pub struct Regime<T: Real> {
    kind: RegimeKind,
    field: Arc<dyn ElectricField<T>>,
    flow: RegimeFlow<T>,
    quad: QuadratureConfig,
}

impl<T: Real> fmt::Debug for Regime<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Regime")
            .field("kind", &self.kind)
            .field("axis_guard", &self.flow.r_min)
            .field("quad", &self.quad)
            .finish_non_exhaustive()
    }
}

impl<T: Real> Regime<T> {
    /// Fails when a regime that needs `E(t, x)` gets a phase-dependent field.
    pub fn new(kind: RegimeKind, field: Arc<dyn ElectricField<T>>) -> Result<Self> {
        if !kind.theta_dependent_field() && !field.is_theta_independent() {
            return Err(Error::InvalidInput(format!(
                "regime {kind} needs an electric field independent of the fast phase"
            )));
        }
        Ok(Regime {
            kind,
            field,
            flow: RegimeFlow {
                kind,
                r_min: T::lit(DEFAULT_AXIS_GUARD),
            },
            quad: QuadratureConfig::default(),
        })
    }

    pub fn with_axis_guard(mut self, r_min: T) -> Result<Self> {
        if !(r_min > T::zero()) {
            return Err(Error::InvalidInput(format!("axis guard must be positive, got {r_min}")));
        }
        self.flow.r_min = r_min;
        Ok(self)
    }

    /// Schedule for the phase averages inside the IRS and FLR closed forms.
    pub fn with_quadrature(mut self, quad: QuadratureConfig) -> Result<Self> {
        quad.validate()?;
        self.quad = quad;
        Ok(self)
    }

    pub fn kind(&self) -> RegimeKind {
        self.kind
    }

    pub fn max_order(&self) -> usize {
        self.kind.max_order()
    }

    pub fn field(&self) -> &dyn ElectricField<T> {
        self.field.as_ref()
    }

    pub fn quadrature(&self) -> &QuadratureConfig {
        &self.quad
    }

    pub fn axis_guard(&self) -> T {
        self.flow.r_min
    }

    /// Rejects states too close to the axis of the variable field.
    pub fn check_state(&self, x: &[T]) -> Result<()> {
        let (pos, _) = split(x)?;
        if self.kind == RegimeKind::GcVariable {
            variable::guard(&pos, self.flow.r_min)?;
        }
        Ok(())
    }

    fn e(&self, t: T, theta: T, x: &Vec3<T>) -> Vec3<T> {
        self.field.value(t, theta, x)
    }
}

impl<T: Real> TwoScaleSystem<T> for Regime<T> {
    fn dim(&self) -> usize {
        6
    }

    fn slow_field(&self, t: T, theta: T, z: &[T]) -> Result<Vec<T>> {
        let (x, v) = split(z)?;
        let e = self.e(t, theta, &x);
        Ok(match self.kind {
            RegimeKind::IrsConst | RegimeKind::GcConst => join(&v, &e),
            RegimeKind::FlrConst => join(&projector_p().apply(&v), &e),
            RegimeKind::GcVariable => join(&v, &add3(&e, &cross_e3(&v))),
        })
    }

    fn fast_field(&self, _t: T, z: &[T]) -> Result<Vec<T>> {
        let (x, v) = split(z)?;
        let zero = [T::zero(); 3];
        Ok(match self.kind {
            RegimeKind::IrsConst | RegimeKind::GcConst => join(&zero, &cross(&v, &e1())),
            RegimeKind::FlrConst => join(&[T::zero(), v[1], v[2]], &cross(&v, &e1())),
            RegimeKind::GcVariable => {
                variable::guard(&x, self.flow.r_min)?;
                join(&zero, &cross(&v, &variable::m_vec(&x)))
            }
        })
    }

    fn flow(&self) -> &dyn PeriodicFlow<T> {
        &self.flow
    }

    fn alpha0_jacobian(&self, t: T, theta: T, y0: &[T]) -> Option<Result<Matrix<T>>> {
        let (y, u) = match split(y0) {
            Ok(p) => p,
            Err(e) => return Some(Err(e)),
        };
        let rm = rotation_r(-theta);
        match self.kind {
            RegimeKind::IrsConst | RegimeKind::GcConst => {
                let g = self.field.jacobian(t, theta, &y);
                Some(Ok(Matrix::from_blocks(
                    &Mat3::zero(),
                    &rotation_r(theta),
                    &(rm * g),
                    &Mat3::zero(),
                )))
            }
            RegimeKind::FlrConst => {
                let cr = rotation_cal_r(theta);
                let crm = rotation_cal_r(-theta);
                let x = add3(&y, &cr.apply(&u));
                let g = self.field.jacobian(t, theta, &x);
                Some(Ok(Matrix::from_blocks(
                    &(crm * g),
                    &(projector_p() + crm * g * cr),
                    &(rm * g),
                    &(rm * g * cr),
                )))
            }
            RegimeKind::GcVariable => None,
        }
    }

    fn alpha0_time_derivative(&self, t: T, theta: T, y0: &[T]) -> Option<Result<Vec<T>>> {
        let (y, u) = match split(y0) {
            Ok(p) => p,
            Err(e) => return Some(Err(e)),
        };
        match self.kind {
            RegimeKind::IrsConst | RegimeKind::GcConst => {
                let et = self.field.time_derivative(t, theta, &y);
                Some(Ok(join(&[T::zero(); 3], &rotation_r(-theta).apply(&et))))
            }
            RegimeKind::FlrConst => {
                let x = add3(&y, &rotation_cal_r(theta).apply(&u));
                let et = self.field.time_derivative(t, theta, &x);
                Some(Ok(join(
                    &rotation_cal_r(-theta).apply(&et),
                    &rotation_r(-theta).apply(&et),
                )))
            }
            RegimeKind::GcVariable => None,
        }
    }
}

fn e1<T: Real>() -> Vec3<T> {
    [T::one(), T::zero(), T::zero()]
}

fn cross_e3<T: Real>(v: &Vec3<T>) -> Vec3<T> {
    cross(v, &[T::zero(), T::zero(), T::one()])
}

/// `(x, v)` halves of a 6-vector.
pub fn split<T: Real>(z: &[T]) -> Result<(Vec3<T>, Vec3<T>)> {
    if z.len() != 6 {
        return Err(Error::DimensionMismatch {
            expected: 6,
            found: z.len(),
        });
    }
    Ok((vec3(&z[..3]), vec3(&z[3..])))
}

pub fn join<T: Real>(x: &Vec3<T>, v: &Vec3<T>) -> Vec<T> {
    x.iter().chain(v).copied().collect()
}

fn check_order<T: Real>(regime: &Regime<T>, k: usize, stack: &StateStack<T>) -> Result<()> {
    if k > regime.max_order() {
        return Err(Error::UnsupportedOrder {
            what: format!("regime {}", regime.kind),
            order: k,
            max_order: regime.max_order(),
        });
    }
    if stack.order() < k {
        return Err(Error::InvalidInput(format!(
            "order {k} needs a state stack of order {k}, got {}",
            stack.order()
        )));
    }
    if stack.dim() != 6 {
        return Err(Error::DimensionMismatch {
            expected: 6,
            found: stack.dim(),
        });
    }
    regime.check_state(stack.level(0))
}

fn generic_only(kind: RegimeKind, k: usize) -> Error {
    Error::InvalidInput(format!(
        "{kind} has no closed form at order {k}; that order runs through the generic engine"
    ))
}

/// Closed-form averaged rates `ã⁰ … ã^k`, concatenated.
pub fn regime_rhs<T: Real>(regime: &Regime<T>, k: usize, stack: &StateStack<T>) -> Result<Vec<T>> {
    check_order(regime, k, stack)?;
    match regime.kind {
        RegimeKind::IrsConst => irs::rates(regime, k, stack),
        RegimeKind::GcConst => Ok(gc::rates(regime, k, stack)),
        RegimeKind::FlrConst => flr::rates(regime, stack),
        RegimeKind::GcVariable if k == 0 => variable::rates0(regime, stack),
        RegimeKind::GcVariable => Err(generic_only(regime.kind, k)),
    }
}

/// Closed-form profiles `X⁰ … X^k` at phase `θ`.
pub fn regime_profiles<T: Real>(
    regime: &Regime<T>,
    k: usize,
    theta: T,
    stack: &StateStack<T>,
) -> Result<Vec<Vec<T>>> {
    check_order(regime, k, stack)?;
    let theta = reduce_phase(theta);
    match regime.kind {
        RegimeKind::IrsConst => irs::profiles(regime, k, theta, stack),
        RegimeKind::GcConst => Ok(gc::profiles(regime, k, theta, stack)),
        RegimeKind::FlrConst => Ok(flr::profiles(theta, stack)),
        RegimeKind::GcVariable if k == 0 => Ok(variable::profiles0(theta, stack)),
        RegimeKind::GcVariable => Err(generic_only(regime.kind, k)),
    }
}

/// Closed-form `X^k(t, θ)` of a regime.
pub fn regime_reconstruct<T: Real>(
    regime: &Regime<T>,
    k: usize,
    theta: T,
    stack: &StateStack<T>,
) -> Result<Vec<T>> {
    Ok(regime_profiles(regime, k, theta, stack)?.swap_remove(k))
}

/// Closed forms where a regime has them, the generic engine elsewhere.
#[derive(Clone, Debug)]
pub struct ClosedFormModel<T: Real> {
    regime: Arc<Regime<T>>,
    generic: GenericModel<T>,
}

impl<T: Real> ClosedFormModel<T> {
    pub fn new(regime: Arc<Regime<T>>) -> Self {
        let generic = GenericModel::from_system(regime.clone());
        ClosedFormModel { regime, generic }
    }

    /// Uses `generic` for the orders without a closed form.
    pub fn with_generic(regime: Arc<Regime<T>>, generic: GenericModel<T>) -> Self {
        ClosedFormModel { regime, generic }
    }

    pub fn regime(&self) -> &Regime<T> {
        &self.regime
    }

    fn delegates(&self, k: usize) -> bool {
        self.regime.kind == RegimeKind::GcVariable && k >= 1
    }
}

impl<T: Real> ExpansionModel<T> for ClosedFormModel<T> {
    fn dim(&self) -> usize {
        6
    }

    fn max_order(&self) -> usize {
        self.regime.max_order()
    }

    fn name(&self) -> String {
        format!("regime {}", self.regime.kind)
    }

    fn system(&self) -> Arc<dyn TwoScaleSystem<T>> {
        self.regime.clone()
    }

    fn rates(&self, k: usize, stack: &StateStack<T>) -> Result<Vec<T>> {
        if self.delegates(k) {
            self.regime.check_state(stack.level(0))?;
            return self.generic.rates(k, stack);
        }
        regime_rhs(&self.regime, k, stack)
    }

    fn profiles(&self, k: usize, stack: &StateStack<T>, theta: T) -> Result<Vec<Vec<T>>> {
        if self.delegates(k) {
            self.regime.check_state(stack.level(0))?;
            return self.generic.profiles(k, stack, theta);
        }
        regime_profiles(&self.regime, k, theta, stack)
    }
}

/// Blocks `(y^j, u^j)` of one level of a stack.
fn level<T: Real>(stack: &StateStack<T>, j: usize) -> (Vec3<T>, Vec3<T>) {
    let l = stack.level(j);
    (vec3(&l[..3]), vec3(&l[3..]))
}
