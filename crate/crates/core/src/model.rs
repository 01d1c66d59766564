//! Core domain types: the oscillatory system, its periodic fast flow, the
//! rotation primitives of the plasma regimes and the oscillatory-deviation
//! operator.

use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{vecops, Mat3, Matrix};
use crate::quadrature::PeriodicSamples;
use crate::scalar::Real;

/// Rotation of angle `−θ` around `e₁`.
///
/// Rows `(1,0,0)`, `(0,cosθ,sinθ)`, `(0,−sinθ,cosθ)`.
pub fn rotation_r<T: Real>(theta: T) -> Mat3<T> {
    let (s, c) = theta.sin_cos();
    let (o, l) = (T::zero(), T::one());
    Mat3([[l, o, o], [o, c, s], [o, -s, c]])
}

/// The oscillating part of `∫₀^θ R(σ)dσ = θP + 𝓡(θ)`.
///
/// Rows `(0,0,0)`, `(0,sinθ,1−cosθ)`, `(0,cosθ−1,sinθ)`.
pub fn rotation_cal_r<T: Real>(theta: T) -> Mat3<T> {
    let (s, c) = theta.sin_cos();
    let (o, l) = (T::zero(), T::one());
    Mat3([[o, o, o], [o, s, l - c], [o, c - l, s]])
}

/// Orthogonal projection onto `e₁`.
pub fn projector_p<T: Real>() -> Mat3<T> {
    Mat3::diag([T::one(), T::zero(), T::zero()])
}

/// Point of phase space: position, or position ⊕ velocity for the plasma
/// regimes.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseState<T>(pub Vec<T>);

impl<T: Real> PhaseState<T> {
    pub fn new(coords: Vec<T>) -> Result<Self> {
        if !vecops::all_finite(&coords) {
            return Err(Error::InvalidInput("phase state has non-finite entries".into()));
        }
        Ok(PhaseState(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }

    /// Concatenates a position and a velocity.
    pub fn from_parts(x: &[T], v: &[T]) -> Self {
        PhaseState(x.iter().chain(v).copied().collect())
    }
}

impl<T> Deref for PhaseState<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.0
    }
}

/// Dense derivative tensor `T[i][l₁]…[l_k]` of a vector field on `ℝ^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    dim: usize,
    rank: usize,
    data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    /// `rank` counts all indices, the output index included.
    pub fn from_fn(dim: usize, rank: usize, mut f: impl FnMut(&[usize]) -> T) -> Self {
        let len = dim.pow(rank as u32);
        let mut idx = vec![0usize; rank];
        let mut data = Vec::with_capacity(len);
        for flat in 0..len {
            let mut r = flat;
            for slot in idx.iter_mut().rev() {
                *slot = r % dim;
                r /= dim;
            }
            data.push(f(&idx));
        }
        Tensor { dim, rank, data }
    }

    pub fn from_matrix(m: &Matrix<T>) -> Self {
        Self::from_fn(m.rows(), 2, |i| m[(i[0], i[1])])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn get(&self, idx: &[usize]) -> T {
        let flat = idx.iter().fold(0, |acc, &i| acc * self.dim + i);
        self.data[flat]
    }
}

/// Contracts the trailing indices of `tensor` against `vs`:
/// component `i` is `Σ T[i][l₁]…[l_k] · vs[0][l₁]⋯vs[k−1][l_k]`.
pub fn tensor_apply<T: Real>(tensor: &Tensor<T>, vs: &[&[T]]) -> Result<Vec<T>> {
    let d = tensor.dim;
    if vs.len() + 1 != tensor.rank {
        return Err(Error::DimensionMismatch {
            expected: tensor.rank - 1,
            found: vs.len(),
        });
    }
    if let Some(v) = vs.iter().find(|v| v.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: v.len(),
        });
    }
    // Contract the last index repeatedly.
    let mut data = tensor.data.clone();
    for v in vs.iter().rev() {
        data = data
            .chunks_exact(d)
            .map(|c| c.iter().zip(*v).fold(T::zero(), |acc, (&a, &b)| acc + a * b))
            .collect();
    }
    Ok(data)
}

/// The solution `Z(t,θ;z)` of `∂Z/∂θ = b(t,Z)`, `Z(t,0;z) = z`, known in
/// closed form and 2π-periodic in `θ`.
pub trait PeriodicFlow<T: Real>: Send + Sync {
    fn eval(&self, t: T, theta: T, z: &[T]) -> Result<Vec<T>>;

    /// `∇_z Z`.
    fn jacobian(&self, t: T, theta: T, z: &[T]) -> Result<Matrix<T>>;

    /// `∂Z/∂t`.
    fn time_derivative(&self, t: T, theta: T, z: &[T]) -> Result<Vec<T>>;

    /// `∇²_z Z` when available in closed form.
    fn hessian(&self, _t: T, _theta: T, _z: &[T]) -> Option<Result<Tensor<T>>> {
        None
    }

    fn is_time_independent(&self) -> bool {
        false
    }

    /// `Z` is linear in `z` (equivalently `b` is linear).
    fn is_linear(&self) -> bool {
        false
    }
}

/// `dX/dt = a(t,(t−s)/ε,X) + b(t,X)/ε` together with the periodic flow of `b`.
pub trait TwoScaleSystem<T: Real>: Send + Sync {
    fn dim(&self) -> usize;

    /// Order `m` of the smoothness assumption; bounds the usable expansion order.
    fn smoothness(&self) -> usize {
        2
    }

    /// `a(t, θ, x)`, 2π-periodic in `θ`.
    fn slow_field(&self, t: T, theta: T, x: &[T]) -> Result<Vec<T>>;

    /// `b(t, x)`.
    fn fast_field(&self, t: T, x: &[T]) -> Result<Vec<T>>;

    fn flow(&self) -> &dyn PeriodicFlow<T>;

    /// Closed-form `∇_{y⁰} α̃⁰(t,θ,y⁰)`, when the system knows it.
    fn alpha0_jacobian(&self, _t: T, _theta: T, _y0: &[T]) -> Option<Result<Matrix<T>>> {
        None
    }

    /// Closed-form `∂α̃⁰/∂t`, when the system knows it.
    fn alpha0_time_derivative(&self, _t: T, _theta: T, _y0: &[T]) -> Option<Result<Vec<T>>> {
        None
    }
}

type FieldFn<T> = Arc<dyn Fn(T, T, &[T]) -> Vec<T> + Send + Sync>;
type MatrixFn<T> = Arc<dyn Fn(T, T, &[T]) -> Matrix<T> + Send + Sync>;
type TensorFn<T> = Arc<dyn Fn(T, T, &[T]) -> Tensor<T> + Send + Sync>;
type FastFn<T> = Arc<dyn Fn(T, &[T]) -> Vec<T> + Send + Sync>;

/// A periodic flow assembled from closures.
#[derive(Clone)]
pub struct FnFlow<T> {
    z: FieldFn<T>,
    jac: MatrixFn<T>,
    dz_dt: FieldFn<T>,
    hess: Option<TensorFn<T>>,
    time_independent: bool,
    linear: bool,
}

impl<T: Real> FnFlow<T> {
    pub fn new(
        z: impl Fn(T, T, &[T]) -> Vec<T> + Send + Sync + 'static,
        jac: impl Fn(T, T, &[T]) -> Matrix<T> + Send + Sync + 'static,
        dz_dt: impl Fn(T, T, &[T]) -> Vec<T> + Send + Sync + 'static,
    ) -> Self {
        FnFlow {
            z: Arc::new(z),
            jac: Arc::new(jac),
            dz_dt: Arc::new(dz_dt),
            hess: None,
            time_independent: false,
            linear: false,
        }
    }

    /// `Z(t,θ;z) = z`, the flow of `b ≡ 0`.
    pub fn identity(d: usize) -> Self {
        Self::new(
            |_, _, z| z.to_vec(),
            move |_, _, _| Matrix::identity(d),
            move |_, _, _| vec![T::zero(); d],
        )
        .with_hessian(move |_, _, _| Tensor::from_fn(d, 3, |_| T::zero()))
        .time_independent()
        .linear()
    }

    pub fn with_hessian(mut self, h: impl Fn(T, T, &[T]) -> Tensor<T> + Send + Sync + 'static) -> Self {
        self.hess = Some(Arc::new(h));
        self
    }

    pub fn time_independent(mut self) -> Self {
        self.time_independent = true;
        self
    }

    pub fn linear(mut self) -> Self {
        self.linear = true;
        self
    }
}

impl<T: Real> PeriodicFlow<T> for FnFlow<T> {
    fn eval(&self, t: T, theta: T, z: &[T]) -> Result<Vec<T>> {
        Ok((self.z)(t, theta, z))
    }

    fn jacobian(&self, t: T, theta: T, z: &[T]) -> Result<Matrix<T>> {
        Ok((self.jac)(t, theta, z))
    }

    fn time_derivative(&self, t: T, theta: T, z: &[T]) -> Result<Vec<T>> {
        Ok((self.dz_dt)(t, theta, z))
    }

    fn hessian(&self, t: T, theta: T, z: &[T]) -> Option<Result<Tensor<T>>> {
        self.hess.as_ref().map(|h| Ok(h(t, theta, z)))
    }

    fn is_time_independent(&self) -> bool {
        self.time_independent
    }

    fn is_linear(&self) -> bool {
        self.linear
    }
}

/// A two-scale system assembled from closures.
#[derive(Clone)]
pub struct FnSystem<T> {
    dim: usize,
    smoothness: usize,
    a: FieldFn<T>,
    b: FastFn<T>,
    flow: FnFlow<T>,
}

impl<T: Real> FnSystem<T> {
    pub fn new(
        dim: usize,
        a: impl Fn(T, T, &[T]) -> Vec<T> + Send + Sync + 'static,
        b: impl Fn(T, &[T]) -> Vec<T> + Send + Sync + 'static,
        flow: FnFlow<T>,
    ) -> Self {
        FnSystem {
            dim,
            smoothness: 2,
            a: Arc::new(a),
            b: Arc::new(b),
            flow,
        }
    }

    pub fn with_smoothness(mut self, m: usize) -> Self {
        self.smoothness = m;
        self
    }
}

impl<T: Real> fmt::Debug for FnSystem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnSystem")
            .field("dim", &self.dim)
            .field("smoothness", &self.smoothness)
            .finish_non_exhaustive()
    }
}

impl<T: Real> TwoScaleSystem<T> for FnSystem<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn smoothness(&self) -> usize {
        self.smoothness
    }

    fn slow_field(&self, t: T, theta: T, x: &[T]) -> Result<Vec<T>> {
        Ok((self.a)(t, theta, x))
    }

    fn fast_field(&self, t: T, x: &[T]) -> Result<Vec<T>> {
        Ok((self.b)(t, x))
    }

    fn flow(&self) -> &dyn PeriodicFlow<T> {
        &self.flow
    }
}

/// Oscillatory deviation `∫₀^θ f dσ − (θ/2π)∫₀^{2π} f dσ`.
///
/// `f` is sampled on `nodes` uniform points of `[0, 2π)`; matrix-valued
/// functions are passed flattened. `θ` must already be reduced to `[0, 2π]`.
pub fn osc_deviation<T: Real>(
    f: impl Fn(T) -> Vec<T>,
    theta: T,
    nodes: usize,
) -> Result<Vec<T>> {
    if nodes < 8 || !nodes.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!(
            "osc_deviation needs an even node count >= 8, got {nodes}"
        )));
    }
    if !(theta >= T::zero() && theta <= T::two_pi()) {
        return Err(Error::InvalidInput(format!(
            "phase {theta} outside [0, 2π]; reduce it modulo 2π first"
        )));
    }
    let samples = PeriodicSamples::sample(nodes, |s| Ok(f(s)))?;
    Ok(samples.deviation(theta))
}

/// Relative mismatch between the finite-difference `∂Z/∂θ` and `b(t, Z)`,
/// with a unit floor on the denominator.
pub fn flow_ode_residual<T: Real>(
    sys: &dyn TwoScaleSystem<T>,
    t: T,
    theta: T,
    z: &[T],
) -> Result<T> {
    let flow = sys.flow();
    let h = T::epsilon().cbrt();
    let zp = flow.eval(t, theta + h, z)?;
    let zm = flow.eval(t, theta - h, z)?;
    let fd: Vec<T> = zp
        .iter()
        .zip(&zm)
        .map(|(&p, &m)| (p - m) / (h + h))
        .collect();
    let b = sys.fast_field(t, &flow.eval(t, theta, z)?)?;
    Ok(vecops::distance(&fd, &b) / vecops::norm(&b).max(T::one()))
}

/// Largest entry-wise gap between `Z(t,θ;z)` and `Z(t,θ+2π;z)`.
pub fn flow_periodicity_gap<T: Real>(
    flow: &dyn PeriodicFlow<T>,
    t: T,
    theta: T,
    z: &[T],
) -> Result<T> {
    let a = flow.eval(t, theta, z)?;
    let b = flow.eval(t, theta + T::two_pi(), z)?;
    Ok(vecops::max_abs(&vecops::sub(&a, &b)))
}

/// Largest relative entry gap between the analytic `∇_z Z` and central
/// differences of `Z`.
pub fn flow_jacobian_gap<T: Real>(
    flow: &dyn PeriodicFlow<T>,
    t: T,
    theta: T,
    z: &[T],
) -> Result<T> {
    let jac = flow.jacobian(t, theta, z)?;
    let d = z.len();
    let mut worst = T::zero();
    for j in 0..d {
        let h = T::epsilon().cbrt() * (T::one() + z[j].abs());
        let mut zp = z.to_vec();
        let mut zm = z.to_vec();
        zp[j] = zp[j] + h;
        zm[j] = zm[j] - h;
        let fp = flow.eval(t, theta, &zp)?;
        let fm = flow.eval(t, theta, &zm)?;
        for i in 0..d {
            let fd = (fp[i] - fm[i]) / (h + h);
            let gap = (fd - jac[(i, j)]).abs() / jac[(i, j)].abs().max(T::one());
            worst = worst.max(gap);
        }
    }
    Ok(worst)
}
