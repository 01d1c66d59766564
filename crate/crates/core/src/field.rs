//! Prescribed electric fields `E(t, θ, x)` for the plasma regimes.

use serde::{Deserialize, Serialize};

use crate::linalg::{dot3, Mat3, Vec3};
use crate::scalar::Real;

/// An electric field with the derivatives the closed forms need.
///
/// Only [`value`](ElectricField::value) is required; the derivative methods
/// fall back to central differences.
pub trait ElectricField<T: Real>: Send + Sync {
    fn value(&self, t: T, theta: T, x: &Vec3<T>) -> Vec3<T>;

    /// `∇ₓE`, entry `(i, j) = ∂E_i/∂x_j`.
    fn jacobian(&self, t: T, theta: T, x: &Vec3<T>) -> Mat3<T> {
        let mut cols = [[T::zero(); 3]; 3];
        for (j, col) in cols.iter_mut().enumerate() {
            let h = first_step(x[j]);
            let (mut xp, mut xm) = (*x, *x);
            xp[j] = xp[j] + h;
            xm[j] = xm[j] - h;
            let (fp, fm) = (self.value(t, theta, &xp), self.value(t, theta, &xm));
            for i in 0..3 {
                col[i] = (fp[i] - fm[i]) / (h + h);
            }
        }
        Mat3::from_columns(cols)
    }

    fn time_derivative(&self, t: T, theta: T, x: &Vec3<T>) -> Vec3<T> {
        let h = first_step(t);
        let (fp, fm) = (self.value(t + h, theta, x), self.value(t - h, theta, x));
        std::array::from_fn(|i| (fp[i] - fm[i]) / (h + h))
    }

    /// `∇²ₓE`, entry `[i]` is the Hessian matrix of `E_i`.
    fn hessian(&self, t: T, theta: T, x: &Vec3<T>) -> [Mat3<T>; 3] {
        let mut out = [Mat3::zero(); 3];
        for k in 0..3 {
            let h = second_step(x[k]);
            let (mut xp, mut xm) = (*x, *x);
            xp[k] = xp[k] + h;
            xm[k] = xm[k] - h;
            let d = self.jacobian(t, theta, &xp) - self.jacobian(t, theta, &xm);
            for (i, hi) in out.iter_mut().enumerate() {
                for j in 0..3 {
                    hi.0[j][k] = d.0[i][j] / (h + h);
                }
            }
        }
        out
    }

    /// `∂(∇ₓE)/∂t`.
    fn time_jacobian(&self, t: T, theta: T, x: &Vec3<T>) -> Mat3<T> {
        let h = second_step(t);
        (self.jacobian(t + h, theta, x) - self.jacobian(t - h, theta, x)).scale(T::one() / (h + h))
    }

    /// `∂²E/∂t²`.
    fn time_second(&self, t: T, theta: T, x: &Vec3<T>) -> Vec3<T> {
        let h = second_step(t);
        let (fp, f0, fm) = (
            self.value(t + h, theta, x),
            self.value(t, theta, x),
            self.value(t - h, theta, x),
        );
        std::array::from_fn(|i| (fp[i] - f0[i] - f0[i] + fm[i]) / (h * h))
    }

    /// True when `E` does not depend on the fast phase.
    fn is_theta_independent(&self) -> bool {
        false
    }
}

fn first_step<T: Real>(at: T) -> T {
    T::epsilon().cbrt() * (T::one() + at.abs())
}

fn second_step<T: Real>(at: T) -> T {
    T::epsilon().sqrt().sqrt() * (T::one() + at.abs())
}

/// `{∇²E}{u, v}` for a Hessian stack as returned by [`ElectricField::hessian`].
pub fn hessian_apply<T: Real>(h: &[Mat3<T>; 3], u: &Vec3<T>, v: &Vec3<T>) -> Vec3<T> {
    std::array::from_fn(|i| dot3(u, &h[i].apply(v)))
}

/// One component `h(θ)·(offset + amplitude·sin(k·x + ωt + φ))` with
/// `h(θ) = theta_mean + theta_cos·cosθ + theta_sin·sinθ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    deny_unknown_fields,
    default,
    bound(serialize = "T: Serialize", deserialize = "T: Real + Deserialize<'de>")
)]
pub struct WaveComponent<T> {
    pub offset: T,
    pub amplitude: T,
    pub wavevector: [T; 3],
    pub omega: T,
    pub phase: T,
    pub theta_mean: T,
    pub theta_cos: T,
    pub theta_sin: T,
}

impl<T: Real> Default for WaveComponent<T> {
    fn default() -> Self {
        let o = T::zero();
        WaveComponent {
            offset: o,
            amplitude: o,
            wavevector: [o; 3],
            omega: o,
            phase: o,
            theta_mean: T::one(),
            theta_cos: o,
            theta_sin: o,
        }
    }
}

impl<T: Real> WaveComponent<T> {
    pub fn constant(c: T) -> Self {
        WaveComponent { offset: c, ..Default::default() }
    }

    /// `amplitude·sin(x_axis + phase)`.
    pub fn sine(amplitude: T, axis: usize, phase: T) -> Self {
        let mut k = [T::zero(); 3];
        k[axis] = T::one();
        WaveComponent {
            amplitude,
            wavevector: k,
            phase,
            ..Default::default()
        }
    }

    fn envelope(&self, theta: T) -> T {
        let (s, c) = theta.sin_cos();
        self.theta_mean + self.theta_cos * c + self.theta_sin * s
    }

    fn arg(&self, t: T, x: &Vec3<T>) -> T {
        dot3(&self.wavevector, x) + self.omega * t + self.phase
    }
}

/// Sum-of-plane-waves field with analytic derivatives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    deny_unknown_fields,
    bound(serialize = "T: Serialize", deserialize = "T: Real + Deserialize<'de>")
)]
pub struct WaveField<T> {
    pub components: [WaveComponent<T>; 3],
}

impl<T: Real> WaveField<T> {
    pub fn zero() -> Self {
        Self::constant([T::zero(); 3])
    }

    pub fn constant(e: Vec3<T>) -> Self {
        WaveField {
            components: e.map(WaveComponent::constant),
        }
    }

    /// `amplitude·(sin x₂, cos x₃, sin x₁)`.
    pub fn trig(amplitude: T) -> Self {
        let q = T::FRAC_PI_2();
        WaveField {
            components: [
                WaveComponent::sine(amplitude, 1, T::zero()),
                WaveComponent::sine(amplitude, 2, q),
                WaveComponent::sine(amplitude, 0, T::zero()),
            ],
        }
    }

    /// `direction·cosθ·(1 + modulation·sin x₃)`.
    pub fn harmonic(direction: Vec3<T>, modulation: T) -> Self {
        WaveField {
            components: direction.map(|d| WaveComponent {
                offset: d,
                amplitude: d * modulation,
                wavevector: [T::zero(), T::zero(), T::one()],
                theta_mean: T::zero(),
                theta_cos: T::one(),
                ..Default::default()
            }),
        }
    }

    fn each(&self, mut f: impl FnMut(&WaveComponent<T>) -> T) -> Vec3<T> {
        std::array::from_fn(|i| f(&self.components[i]))
    }
}

impl<T: Real> ElectricField<T> for WaveField<T> {
    fn value(&self, t: T, theta: T, x: &Vec3<T>) -> Vec3<T> {
        self.each(|c| c.envelope(theta) * (c.offset + c.amplitude * c.arg(t, x).sin()))
    }

    fn jacobian(&self, t: T, theta: T, x: &Vec3<T>) -> Mat3<T> {
        Mat3::from_fn(|i, j| {
            let c = &self.components[i];
            c.envelope(theta) * c.amplitude * c.arg(t, x).cos() * c.wavevector[j]
        })
    }

    fn time_derivative(&self, t: T, theta: T, x: &Vec3<T>) -> Vec3<T> {
        self.each(|c| c.envelope(theta) * c.amplitude * c.omega * c.arg(t, x).cos())
    }

    fn hessian(&self, t: T, theta: T, x: &Vec3<T>) -> [Mat3<T>; 3] {
        std::array::from_fn(|i| {
            let c = &self.components[i];
            let w = -c.envelope(theta) * c.amplitude * c.arg(t, x).sin();
            Mat3::from_fn(|j, k| w * c.wavevector[j] * c.wavevector[k])
        })
    }

    fn time_jacobian(&self, t: T, theta: T, x: &Vec3<T>) -> Mat3<T> {
        Mat3::from_fn(|i, j| {
            let c = &self.components[i];
            -c.envelope(theta) * c.amplitude * c.omega * c.arg(t, x).sin() * c.wavevector[j]
        })
    }

    fn time_second(&self, t: T, theta: T, x: &Vec3<T>) -> Vec3<T> {
        self.each(|c| -c.envelope(theta) * c.amplitude * c.omega * c.omega * c.arg(t, x).sin())
    }

    fn is_theta_independent(&self) -> bool {
        self.components
            .iter()
            .all(|c| c.theta_cos == T::zero() && c.theta_sin == T::zero())
    }
}

/// Adapts a closure into an [`ElectricField`] with finite-difference
/// derivatives.
pub struct FnField<F> {
    f: F,
    theta_independent: bool,
}

impl<F> FnField<F> {
    pub fn new(f: F) -> Self {
        FnField { f, theta_independent: false }
    }

    pub fn theta_independent(mut self) -> Self {
        self.theta_independent = true;
        self
    }
}

impl<T: Real, F> ElectricField<T> for FnField<F>
where
    F: Fn(T, T, &Vec3<T>) -> Vec3<T> + Send + Sync,
{
    fn value(&self, t: T, theta: T, x: &Vec3<T>) -> Vec3<T> {
        (self.f)(t, theta, x)
    }

    fn is_theta_independent(&self) -> bool {
        self.theta_independent
    }
}
