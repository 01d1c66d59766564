//! Periodic quadrature on uniform phase grids.
//!
//! Samples of a 2π-periodic function on `n` equispaced nodes determine its
//! trigonometric interpolant. The full-period mean is the periodic trapezoid
//! rule, and partial integrals `∫₀^θ` are integrals of the interpolant, so
//! both converge spectrally for smooth integrands. The FFT kernels run in
//! double precision whatever the caller's scalar type.

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn forward_plan(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n))
}

fn inverse_plan(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n))
}

/// Node-doubling schedule for period averages.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    pub base_nodes: usize,
    pub max_nodes: usize,
    pub rel_tol: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            base_nodes: 64,
            max_nodes: 4096,
            rel_tol: 1e-10,
        }
    }
}

impl QuadratureConfig {
    /// A schedule pinned to a single grid; estimates are accepted unchecked.
    pub fn fixed(nodes: usize) -> Self {
        QuadratureConfig {
            base_nodes: nodes,
            max_nodes: nodes,
            rel_tol: 1e-10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_nodes < 8 || !self.base_nodes.is_power_of_two() {
            return Err(Error::InvalidInput(format!(
                "base_nodes must be a power of two >= 8, got {}",
                self.base_nodes
            )));
        }
        if self.max_nodes < self.base_nodes {
            return Err(Error::InvalidInput(format!(
                "max_nodes ({}) must be >= base_nodes ({})",
                self.max_nodes, self.base_nodes
            )));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidInput(format!(
                "rel_tol must be positive, got {}",
                self.rel_tol
            )));
        }
        Ok(())
    }

    /// Runs `eval` on successively doubled grids until two consecutive
    /// estimates agree.
    ///
    /// `eval(n)` returns the payload, the estimate vector compared between
    /// grids, and the magnitude scale the tolerance is relative to. The
    /// effective tolerance is `max(rel_tol, floor)`, where `floor` is the
    /// precision the integrand itself is evaluated to.
    pub fn refine<T: Real, S>(
        &self,
        floor: f64,
        mut eval: impl FnMut(usize) -> Result<(S, Vec<T>, T)>,
    ) -> Result<(S, usize)> {
        self.validate()?;
        let mut n = self.base_nodes;
        let (mut payload, mut prev, _) = eval(n)?;
        if self.max_nodes == self.base_nodes {
            return Ok((payload, n));
        }
        let tol = T::lit(self.rel_tol.max(floor));
        let mut older = prev.clone();
        while n * 2 <= self.max_nodes {
            n *= 2;
            let (p, cur, scale) = eval(n)?;
            let delta = prev
                .iter()
                .zip(&cur)
                .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()));
            let mag = cur.iter().fold(scale.abs(), |m, &v| m.max(v.abs()));
            payload = p;
            if delta <= tol * mag.max(T::min_positive_value()) {
                return Ok((payload, n));
            }
            older = std::mem::replace(&mut prev, cur);
        }
        Err(Error::QuadratureNotConverged {
            nodes: n,
            previous: older.iter().map(|v| v.to_f64_lossy()).collect(),
            last: prev.iter().map(|v| v.to_f64_lossy()).collect(),
        })
    }
}

/// Uniform phase nodes `2πj/n`, `j = 0..n`.
pub fn phase_nodes<T: Real>(n: usize) -> Vec<T> {
    let h = T::two_pi() / T::from_count(n);
    (0..n).map(|j| h * T::from_count(j)).collect()
}

/// Samples of a vector-valued 2π-periodic function on `n` uniform nodes,
/// with the spectral data needed for means and partial integrals.
#[derive(Clone, Debug)]
pub struct PeriodicSamples<T> {
    n: usize,
    width: usize,
    values: Vec<Vec<T>>,
    mean: Vec<T>,
    /// `coeffs[c][m]` is the Fourier coefficient of mode `m = 0..=n/2` of
    /// component `c`, normalised by `1/n`.
    coeffs: Vec<Vec<Complex<f64>>>,
}

impl<T: Real> PeriodicSamples<T> {
    /// Samples `f` on `n` nodes.
    pub fn sample(n: usize, mut f: impl FnMut(T) -> Result<Vec<T>>) -> Result<Self> {
        let values = phase_nodes::<T>(n)
            .into_iter()
            .map(&mut f)
            .collect::<Result<Vec<_>>>()?;
        Self::from_values(values)
    }

    /// Wraps node values `values[j]` at `θ_j = 2πj/n`.
    pub fn from_values(values: Vec<Vec<T>>) -> Result<Self> {
        let n = values.len();
        if n < 2 || !n.is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "periodic sampling needs an even node count >= 2, got {n}"
            )));
        }
        let width = values[0].len();
        if let Some(bad) = values.iter().find(|v| v.len() != width) {
            return Err(Error::DimensionMismatch {
                expected: width,
                found: bad.len(),
            });
        }
        let fft = forward_plan(n);
        let inv_n = 1.0 / n as f64;
        let mut coeffs = Vec::with_capacity(width);
        let mut mean = Vec::with_capacity(width);
        let mut buf = vec![Complex::new(0.0, 0.0); n];
        for c in 0..width {
            for (b, v) in buf.iter_mut().zip(&values) {
                *b = Complex::new(v[c].to_f64_lossy(), 0.0);
            }
            fft.process(&mut buf);
            let cs: Vec<Complex<f64>> = buf[..=n / 2].iter().map(|z| z * inv_n).collect();
            // Direct summation keeps the mean exact for constant integrands.
            let s = values.iter().fold(T::zero(), |acc, v| acc + v[c]);
            mean.push(s / T::from_count(n));
            coeffs.push(cs);
        }
        Ok(PeriodicSamples {
            n,
            width,
            values,
            mean,
            coeffs,
        })
    }

    pub fn nodes(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[Vec<T>] {
        &self.values
    }

    /// Period average `(1/2π)∫₀^{2π} f`.
    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    /// Largest absolute sample, the natural scale of the integrand.
    pub fn sup(&self) -> T {
        self.values
            .iter()
            .flatten()
            .fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    /// Oscillatory deviation `∫₀^θ f dσ − θ·mean(f)` at any phase `θ`.
    ///
    /// The result is 2π-periodic in `θ`.
    pub fn deviation(&self, theta: T) -> Vec<T> {
        let th = theta.to_f64_lossy();
        let half = self.n / 2;
        // sin(mθ), cos(mθ) by recurrence.
        let (s1, c1) = th.sin_cos();
        let mut trig = Vec::with_capacity(half + 1);
        let (mut s, mut c) = (0.0_f64, 1.0_f64);
        for _ in 0..=half {
            trig.push((s, c));
            let ns = s * c1 + c * s1;
            let nc = c * c1 - s * s1;
            s = ns;
            c = nc;
        }
        // Nyquist mode evaluated directly.
        let (sn, _) = (half as f64 * th).sin_cos();
        self.coeffs
            .iter()
            .map(|cs| {
                let mut acc = 0.0;
                for (m, cm) in cs.iter().enumerate().take(half).skip(1) {
                    let (sm, cm_cos) = trig[m];
                    acc += 2.0 / m as f64 * (cm.re * sm + cm.im * (cm_cos - 1.0));
                }
                acc += cs[half].re * sn / half as f64;
                T::lit(acc)
            })
            .collect()
    }

    /// Deviation evaluated at every node, via one inverse FFT per component.
    pub fn deviation_at_nodes(&self) -> Vec<Vec<T>> {
        let n = self.n;
        let half = n / 2;
        let ifft = inverse_plan(n);
        let mut out = vec![vec![T::zero(); self.width]; n];
        let mut buf = vec![Complex::new(0.0, 0.0); n];
        for (c, cs) in self.coeffs.iter().enumerate() {
            buf.iter_mut().for_each(|b| *b = Complex::new(0.0, 0.0));
            for m in 1..half {
                let d = cs[m] / Complex::new(0.0, m as f64);
                buf[m] = d;
                buf[n - m] = d.conj();
            }
            ifft.process(&mut buf);
            let f0 = buf[0].re;
            for (j, row) in out.iter_mut().enumerate() {
                row[c] = T::lit(buf[j].re - f0);
            }
        }
        out
    }
}
