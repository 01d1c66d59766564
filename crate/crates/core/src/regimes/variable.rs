//! Guiding centre in the toroidal field `𝓜(x) = (−x₂, x₁, 0)/Ω`,
//! `Ω = √(x₁² + x₂²)`, with the weak field `e₃`.
//!
//! The fast flow rotates the velocity about `𝓜(z)` by `−θ`:
//! `Z = (z, A(θ,z)w)` with `A = cosθ·I + (1−cosθ)𝓜𝓜ᵀ − sinθ[𝓜]ₓ`.

use crate::averaging::StateStack;
use crate::error::{Error, Result};
use crate::linalg::{add3, cross, dot3, Mat3, Vec3};
use crate::scalar::Real;

use super::{join, level, Regime};

/// `Ω(x) = √(x₁² + x₂²)`.
pub fn omega<T: Real>(x: &Vec3<T>) -> T {
    x[0].hypot(x[1])
}

pub fn guard<T: Real>(x: &Vec3<T>, r_min: T) -> Result<()> {
    let r = omega(x);
    if !(r >= r_min) {
        return Err(Error::AxisProximity {
            radius: r.to_f64_lossy(),
            min: r_min.to_f64_lossy(),
        });
    }
    Ok(())
}

/// `𝓜(x) = (−x₂, x₁, 0)/Ω`.
pub fn m_vec<T: Real>(x: &Vec3<T>) -> Vec3<T> {
    let r = omega(x);
    [-x[1] / r, x[0] / r, T::zero()]
}

/// `∂𝓜/∂x₁` and `∂𝓜/∂x₂`; `𝓜` does not depend on `x₃`.
fn m_partials<T: Real>(x: &Vec3<T>) -> [Vec3<T>; 2] {
    let r = omega(x);
    let r3 = r * r * r;
    let (p, q) = (-x[1], x[0]);
    [
        [-p * x[0] / r3, T::one() / r - q * x[0] / r3, T::zero()],
        [-T::one() / r - p * x[1] / r3, -q * x[1] / r3, T::zero()],
    ]
}

fn skew<T: Real>(m: &Vec3<T>) -> Mat3<T> {
    let o = T::zero();
    Mat3([[o, -m[2], m[1]], [m[2], o, -m[0]], [-m[1], m[0], o]])
}

/// `A(θ, z) = ρᵀ(z)R(θ)ρ(z)`.
pub fn zmat<T: Real>(theta: T, z: &Vec3<T>) -> Mat3<T> {
    let (s, c) = theta.sin_cos();
    let m = m_vec(z);
    let mmt = Mat3::from_fn(|i, j| m[i] * m[j]);
    Mat3::identity().scale(c) + mmt.scale(T::one() - c) - skew(&m).scale(s)
}

/// `∇_z(A(θ, z)w)`.
pub fn zmat_w_jacobian<T: Real>(theta: T, z: &Vec3<T>, w: &Vec3<T>) -> Mat3<T> {
    let (s, c) = theta.sin_cos();
    let m = m_vec(z);
    let dm = m_partials(z);
    let mut cols = [[T::zero(); 3]; 3];
    for (j, d) in dm.iter().enumerate() {
        let (mw, dw) = (dot3(&m, w), dot3(d, w));
        let rot = cross(d, w);
        cols[j] = std::array::from_fn(|i| (T::one() - c) * (d[i] * mw + m[i] * dw) - s * rot[i]);
    }
    Mat3::from_columns(cols)
}

/// `Ā(y) = 𝓜𝓜ᵀ`, the phase average of `A`.
pub fn abar<T: Real>(y: &Vec3<T>) -> Mat3<T> {
    let r2 = y[0] * y[0] + y[1] * y[1];
    let o = T::zero();
    Mat3([
        [y[1] * y[1] / r2, -y[0] * y[1] / r2, o],
        [-y[0] * y[1] / r2, y[0] * y[0] / r2, o],
        [o, o, o],
    ])
}

/// `β̄(y, u)`, the average curvature acceleration.
pub fn beta_bar<T: Real>(y: &Vec3<T>, u: &Vec3<T>) -> Vec3<T> {
    let r2 = y[0] * y[0] + y[1] * y[1];
    [
        (y[1] * u[0] - y[0] * u[1]) * u[1] / r2,
        (y[0] * u[1] - y[1] * u[0]) * u[0] / r2,
        T::zero(),
    ]
}

pub(super) fn rates0<T: Real>(regime: &Regime<T>, stack: &StateStack<T>) -> Result<Vec<T>> {
    let (y, u) = level(stack, 0);
    let a = abar(&y);
    let e = regime.e(stack.t, T::zero(), &y);
    let e3 = a.apply(&[T::zero(), T::zero(), T::one()]);
    let du = add3(&add3(&beta_bar(&y, &u), &a.apply(&e)), &cross(&u, &e3));
    Ok(join(&a.apply(&u), &du))
}

pub(super) fn profiles0<T: Real>(theta: T, stack: &StateStack<T>) -> Vec<Vec<T>> {
    let (y, u) = level(stack, 0);
    vec![join(&y, &zmat(theta, &y).apply(&u))]
}

/// Closed-form position block of `X¹(t, θ)`.
pub fn x1_position<T: Real>(theta: T, y0: &Vec3<T>, u0: &Vec3<T>, y1: &Vec3<T>) -> Vec3<T> {
    let om = omega(y0);
    let om2 = om * om;
    let (s, c) = theta.sin_cos();
    let cm1 = c - T::one();
    let yu = y0[0] * u0[0] + y0[1] * u0[1];
    [
        (y0[0] * om * cm1 * u0[2] + y0[0] * yu * s + y1[0] * om2) / om2,
        (y0[1] * om * cm1 * u0[2] + y0[1] * yu * s + y1[1] * om2) / om2,
        ((-y0[0] * u0[0] - y0[1] * u0[1]) * cm1 + y1[2] * om + s * u0[2] * om) / om,
    ]
}

/// Closed-form position block of `dY¹/dt`, with `E` evaluated at `y⁰`.
pub fn y1_position_rhs<T: Real>(
    y0: &Vec3<T>,
    u0: &Vec3<T>,
    y1: &Vec3<T>,
    u1: &Vec3<T>,
    e: &Vec3<T>,
    r_min: T,
) -> Result<Vec3<T>> {
    guard(y0, r_min)?;
    let two = T::lit(2.0);
    let (a1, a2) = (y0[0], y0[1]);
    let (p1, p2, p3) = (u0[0], u0[1], u0[2]);
    let om = omega(y0);
    let (om2, om3) = (om * om, om * om * om);
    let om4 = om2 * om2;
    let k = -p1 * a2 + p2 * a1;

    let d1 = (-om2 * a2 * p2 + two * a1 * a2 * k) * y1[0]
        + ((two * p1 * a2 - p2 * a1) * om2 + two * a2 * a2 * k) * y1[1]
        + a2 * a2 * u1[0] * om2
        - a1 * a2 * om2 * u1[1]
        - om3 * a1 * e[2]
        - a2 * p3 * om3
        - two * a2 * p3 * k * om;

    let d2 = ((two * p2 * a1 - p1 * a2) * om2 - two * a1 * a1 * k) * y1[0]
        + (-om2 * a1 * p1 - two * a1 * a2 * k) * y1[1]
        - a1 * a2 * om2 * u1[0]
        + a1 * a1 * u1[1] * om2
        - om3 * a2 * e[2]
        + om3 * a1 * p3
        + two * a1 * p3 * k * om;

    let yu = a1 * p1 + a2 * p2;
    let d3 = om2 * a1 * e[0] + om2 * a2 * e[1] + (p2 * a1 + p1 * p1 - p1 * a2 + p2 * p2) * om2
        - yu * yu;

    Ok([d1 / om4, d2 / om4, d3 / om3])
}
