//! The averaging recurrence: `α̃⁰`, its period mean, the deviation fields
//! `θÃ^k` and the higher coefficients `α̃¹`, `α̃²`.
//!
//! The deviation operator `D[f](θ) = ∫₀^θ f − θ·mean(f)` commutes with
//! derivatives in `t` and `y⁰`, so every term of the recurrence reduces to
//! first and second directional derivatives of `α̃⁰` alone, taken in the
//! joint `(t, y⁰)` space. With `e = (1, ã⁰)`, `w = y¹ + θÃ⁰`,
//! `J = ∇_{y⁰}α̃⁰` and `H = ∇²_{y⁰}α̃⁰`:
//!
//! ```text
//! g  = Dα̃⁰[e]                       θÃ⁰ = D[α̃⁰]
//! α̃¹ = J·w − D[g]
//! r  = D²α̃⁰[e,e] + J·mean(g)
//! q  = D²α̃⁰[e,(0,w)] + J·(ã¹ + D[g]) − D[r]
//! α̃² = J·(y² + D[α̃¹]) + ½H{w,w} − D[q]
//! ```

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{vecops, Matrix};
use crate::model::TwoScaleSystem;
use crate::quadrature::{phase_nodes, PeriodicSamples, QuadratureConfig};
use crate::scalar::Real;

/// Highest order the recurrence is implemented for.
pub const MAX_ENGINE_ORDER: usize = 2;

/// The averaged states `(y⁰, …, y^k)` at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateStack<T> {
    pub t: T,
    pub y: Vec<Vec<T>>,
}

impl<T: Real> StateStack<T> {
    pub fn new(t: T, y: Vec<Vec<T>>) -> Result<Self> {
        let d = y
            .first()
            .ok_or_else(|| Error::InvalidInput("state stack needs at least y⁰".into()))?
            .len();
        if let Some(bad) = y.iter().find(|v| v.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.len(),
            });
        }
        if !y.iter().all(|v| vecops::all_finite(v)) || !t.is_finite() {
            return Err(Error::InvalidInput("state stack has non-finite entries".into()));
        }
        Ok(StateStack { t, y })
    }

    /// Splits a stacked vector of length `(k+1)·d`.
    pub fn from_flat(t: T, flat: &[T], d: usize) -> Result<Self> {
        if d == 0 || !flat.len().is_multiple_of(d) || flat.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: flat.len(),
            });
        }
        Self::new(t, flat.chunks(d).map(<[T]>::to_vec).collect())
    }

    /// `y⁰` followed by `k` zero levels.
    pub fn initial(t: T, x0: &[T], k: usize) -> Self {
        let mut y = vec![x0.to_vec()];
        y.extend((0..k).map(|_| vec![T::zero(); x0.len()]));
        StateStack { t, y }
    }

    pub fn order(&self) -> usize {
        self.y.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.y[0].len()
    }

    pub fn level(&self, j: usize) -> &[T] {
        &self.y[j]
    }

    /// Keeps levels `0..=k`.
    pub fn truncated(&self, k: usize) -> Self {
        StateStack {
            t: self.t,
            y: self.y[..=k.min(self.order())].to_vec(),
        }
    }
}

/// Relative finite-difference steps; `None` selects `ε_mach^{1/3}` for
/// first derivatives and `ε_mach^{1/6}` for the fourth-order second-derivative
/// stencils. Steps are scaled by `1 + |y|`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FdConfig {
    pub h1: Option<f64>,
    pub h2: Option<f64>,
}

impl FdConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, h) in [("h1", self.h1), ("h2", self.h2)] {
            if let Some(h) = h {
                if !(h > 0.0 && h.is_finite()) {
                    return Err(Error::InvalidInput(format!("{name} must be positive, got {h}")));
                }
            }
        }
        Ok(())
    }

    pub fn first<T: Real>(&self) -> T {
        self.h1.map_or_else(|| T::epsilon().cbrt(), T::lit)
    }

    pub fn second<T: Real>(&self) -> T {
        self.h2.map_or_else(|| T::epsilon().powf(T::one() / T::lit(6.0)), T::lit)
    }
}

/// How `α̃²` is assembled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alpha2Route {
    /// Derivatives of `α̃⁰`; valid for any flow.
    #[default]
    Recurrence,
    /// Derivatives of `a` pulled back by `∇Z`; needs a linear, time-independent flow.
    LinearFlow,
}

/// Precision floor of order-`k` coefficients, set by finite-difference noise.
pub fn noise_floor<T: Real>(k: usize) -> f64 {
    let eps = T::epsilon().to_f64_lossy();
    match k {
        0 => 0.0,
        1 => 100.0 * eps.powf(2.0 / 3.0),
        _ => 100.0 * eps.sqrt(),
    }
}

/// Recurrence engine bound to one system.
#[derive(Clone)]
pub struct AveragingEngine<T: Real> {
    sys: Arc<dyn TwoScaleSystem<T>>,
    quad: QuadratureConfig,
    fd: FdConfig,
    route: Alpha2Route,
}

impl<T: Real> AveragingEngine<T> {
    pub fn new(sys: Arc<dyn TwoScaleSystem<T>>) -> Self {
        AveragingEngine {
            sys,
            quad: QuadratureConfig::default(),
            fd: FdConfig::default(),
            route: Alpha2Route::default(),
        }
    }

    pub fn with_quadrature(mut self, quad: QuadratureConfig) -> Self {
        self.quad = quad;
        self
    }

    pub fn with_fd(mut self, fd: FdConfig) -> Self {
        self.fd = fd;
        self
    }

    pub fn with_route(mut self, route: Alpha2Route) -> Self {
        self.route = route;
        self
    }

    pub fn system(&self) -> &dyn TwoScaleSystem<T> {
        self.sys.as_ref()
    }

    pub fn system_arc(&self) -> Arc<dyn TwoScaleSystem<T>> {
        self.sys.clone()
    }

    pub fn quadrature(&self) -> &QuadratureConfig {
        &self.quad
    }

    pub fn fd(&self) -> &FdConfig {
        &self.fd
    }

    /// `{∇_z Z}⁻¹ (a(t,θ,Z(t,θ;y⁰)) − ∂Z/∂t)`.
    pub fn alpha0(&self, t: T, theta: T, y0: &[T]) -> Result<Vec<T>> {
        let flow = self.sys.flow();
        let z = flow.eval(t, theta, y0)?;
        let a = self.sys.slow_field(t, theta, &z)?;
        let dz = flow.time_derivative(t, theta, y0)?;
        let jac = flow.jacobian(t, theta, y0)?;
        jac.solve(&vecops::sub(&a, &dz)).ok_or(Error::SingularJacobian {
            t: t.to_f64_lossy(),
            theta: theta.to_f64_lossy(),
        })
    }

    /// `ã⁰(t, y⁰)`.
    pub fn abar0(&self, t: T, y0: &[T]) -> Result<Vec<T>> {
        self.quad
            .refine(noise_floor::<T>(0), |n| {
                let s = PeriodicSamples::sample(n, |th| self.alpha0(t, th, y0))?;
                let m = s.mean().to_vec();
                let scale = s.sup();
                Ok((m.clone(), m, scale))
            })
            .map(|(m, _)| m)
    }

    /// `∇_{y⁰}α̃⁰`, closed form when the system provides it.
    pub fn alpha0_jacobian(&self, t: T, theta: T, y0: &[T]) -> Result<Matrix<T>> {
        match self.sys.alpha0_jacobian(t, theta, y0) {
            Some(j) => j,
            None => self.alpha0_fd_jacobian(t, theta, y0),
        }
    }

    /// `∇_{y⁰}α̃⁰` by central differences, whatever the system provides.
    pub fn alpha0_fd_jacobian(&self, t: T, theta: T, y0: &[T]) -> Result<Matrix<T>> {
        let d = y0.len();
        let h = self.fd.first::<T>() * (T::one() + vecops::max_abs(y0));
        let mut jac = Matrix::zeros(d, d);
        for j in 0..d {
            let mut yp = y0.to_vec();
            let mut ym = y0.to_vec();
            yp[j] = yp[j] + h;
            ym[j] = ym[j] - h;
            let fp = self.alpha0(t, theta, &yp)?;
            let fm = self.alpha0(t, theta, &ym)?;
            for i in 0..d {
                jac[(i, j)] = (fp[i] - fm[i]) / (h + h);
            }
        }
        Ok(jac)
    }

    /// `∂α̃⁰/∂t`, closed form when the system provides it.
    pub fn alpha0_dt(&self, t: T, theta: T, y0: &[T]) -> Result<Vec<T>> {
        if let Some(v) = self.sys.alpha0_time_derivative(t, theta, y0) {
            return v;
        }
        let h = self.fd.first::<T>() * (T::one() + t.abs());
        let fp = self.alpha0(t + h, theta, y0)?;
        let fm = self.alpha0(t - h, theta, y0)?;
        Ok(fp.iter().zip(&fm).map(|(&p, &m)| (p - m) / (h + h)).collect())
    }

    fn check_order(&self, k: usize, stack: &StateStack<T>) -> Result<()> {
        let cap = MAX_ENGINE_ORDER.min(self.sys.smoothness());
        if k > cap {
            return Err(Error::UnsupportedOrder {
                what: "averaging engine".into(),
                order: k,
                max_order: cap,
            });
        }
        if stack.order() < k {
            return Err(Error::InvalidInput(format!(
                "order {k} needs y⁰..y^{k}, stack holds {} levels",
                stack.order() + 1
            )));
        }
        if stack.dim() != self.sys.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.sys.dim(),
                found: stack.dim(),
            });
        }
        if self.route == Alpha2Route::LinearFlow && k >= 2 {
            let flow = self.sys.flow();
            if !(flow.is_linear() && flow.is_time_independent()) {
                return Err(Error::InvalidInput(
                    "the linear-flow α̃² route needs a linear, time-independent flow".into(),
                ));
            }
        }
        Ok(())
    }

    /// All coefficients up to order `k` at `stack`, on the first node count
    /// whose period means agree with the next coarser grid.
    pub fn expand(&self, stack: &StateStack<T>, k: usize) -> Result<LocalExpansion<T>> {
        self.check_order(k, stack)?;
        self.fd.validate()?;
        let stack = stack.truncated(k);
        self.quad
            .refine(noise_floor::<T>(k), |n| {
                let le = self.expand_on(&stack, k, n)?;
                let est: Vec<T> = le.abar.iter().flatten().copied().collect();
                let scale = le.scale();
                Ok((le, est, scale))
            })
            .map(|(le, _)| le)
    }

    /// `θÃ^k(t, θ, y⁰..y^k)`.
    pub fn theta_a(&self, k: usize, stack: &StateStack<T>, theta: T) -> Result<Vec<T>> {
        Ok(self.expand(stack, k)?.theta_a(k, theta))
    }

    /// `α̃^k(t, θ, y⁰..y^k)`.
    pub fn alpha_k(&self, k: usize, stack: &StateStack<T>, theta: T) -> Result<Vec<T>> {
        self.expand(stack, k)?.alpha(k, theta)
    }

    /// `ã^k(t, y⁰..y^k)`.
    pub fn abar_k(&self, k: usize, stack: &StateStack<T>) -> Result<Vec<T>> {
        Ok(self.expand(stack, k)?.abar(k).to_vec())
    }

    fn expand_on(&self, stack: &StateStack<T>, k: usize, n: usize) -> Result<LocalExpansion<T>> {
        let t = stack.t;
        let y0 = stack.level(0);
        let thetas = phase_nodes::<T>(n);
        let probe = Probe::new(self, t, y0);

        let a0: Vec<Vec<T>> = thetas
            .iter()
            .map(|&th| self.alpha0(t, th, y0))
            .collect::<Result<_>>()?;
        let s0 = PeriodicSamples::from_values(a0)?;
        let mut le = LocalExpansion {
            engine: self.clone(),
            stack: stack.clone(),
            nodes: n,
            abar: vec![s0.mean().to_vec()],
            gbar: Vec::new(),
            s0,
            sg: None,
            s1: None,
            sq: None,
            s2: None,
        };
        if k == 0 {
            return Ok(le);
        }

        // Order 1.
        let abar0 = le.abar[0].clone();
        let e = Dir::along_rate(&abar0);
        let jacs: Vec<Matrix<T>> = thetas
            .iter()
            .map(|&th| self.alpha0_jacobian(t, th, y0))
            .collect::<Result<_>>()?;
        let g: Vec<Vec<T>> = thetas
            .iter()
            .zip(&jacs)
            .map(|(&th, j)| Ok(vecops::add(&self.alpha0_dt(t, th, y0)?, &j.mul_vec(&abar0)?)))
            .collect::<Result<_>>()?;
        let sg = PeriodicSamples::from_values(g)?;
        let dg = sg.deviation_at_nodes();
        let d0 = le.s0.deviation_at_nodes();
        let w: Vec<Vec<T>> = d0.iter().map(|d| vecops::add(stack.level(1), d)).collect();
        let a1: Vec<Vec<T>> = jacs
            .iter()
            .zip(w.iter().zip(&dg))
            .map(|(j, (wj, dgj))| Ok(vecops::sub(&j.mul_vec(wj)?, dgj)))
            .collect::<Result<_>>()?;
        let s1 = PeriodicSamples::from_values(a1)?;
        le.abar.push(s1.mean().to_vec());
        le.gbar = sg.mean().to_vec();
        if k == 1 {
            le.sg = Some(sg);
            le.s1 = Some(s1);
            return Ok(le);
        }

        // Order 2.
        let gbar = le.gbar.clone();
        let abar1 = le.abar[1].clone();
        let r: Vec<Vec<T>> = thetas
            .iter()
            .zip(&jacs)
            .map(|(&th, j)| Ok(vecops::add(&probe.second(th, &e, &e)?, &j.mul_vec(&gbar)?)))
            .collect::<Result<_>>()?;
        let dr = PeriodicSamples::from_values(r)?.deviation_at_nodes();
        let q: Vec<Vec<T>> = (0..n)
            .map(|i| {
                let mixed = probe.second(thetas[i], &e, &Dir::state(&w[i]))?;
                let lin = jacs[i].mul_vec(&vecops::add(&abar1, &dg[i]))?;
                Ok(vecops::sub(&vecops::add(&mixed, &lin), &dr[i]))
            })
            .collect::<Result<_>>()?;
        let sq = PeriodicSamples::from_values(q)?;
        let dq = sq.deviation_at_nodes();
        let d1 = s1.deviation_at_nodes();
        let a2: Vec<Vec<T>> = (0..n)
            .map(|i| {
                let v = vecops::add(stack.level(2), &d1[i]);
                let quad = probe.curvature_terms(thetas[i], &jacs[i], &v, &w[i])?;
                Ok(vecops::sub(&quad, &dq[i]))
            })
            .collect::<Result<_>>()?;
        let s2 = PeriodicSamples::from_values(a2)?;
        le.abar.push(s2.mean().to_vec());
        le.sg = Some(sg);
        le.s1 = Some(s1);
        le.sq = Some(sq);
        le.s2 = Some(s2);
        Ok(le)
    }
}

impl<T: Real> std::fmt::Debug for AveragingEngine<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AveragingEngine")
            .field("dim", &self.sys.dim())
            .field("quad", &self.quad)
            .field("fd", &self.fd)
            .field("route", &self.route)
            .finish()
    }
}

/// A direction in the joint `(t, y)` space.
#[derive(Clone, Debug)]
struct Dir<T> {
    dt: T,
    dy: Vec<T>,
}

impl<T: Real> Dir<T> {
    fn along_rate(rate: &[T]) -> Self {
        Dir { dt: T::one(), dy: rate.to_vec() }
    }

    fn state(v: &[T]) -> Self {
        Dir { dt: T::zero(), dy: v.to_vec() }
    }

    fn norm(&self) -> T {
        (self.dt * self.dt + self.dy.iter().fold(T::zero(), |a, &v| a + v * v)).sqrt()
    }
}

/// Finite-difference probe of `α̃⁰` around a base point `(t, y⁰)`.
struct Probe<'e, T: Real> {
    engine: &'e AveragingEngine<T>,
    t: T,
    y0: &'e [T],
    h: T,
    /// Closed-form first derivatives of `α̃⁰` are available, so second
    /// derivatives difference them once instead of differencing `α̃⁰` twice.
    analytic: bool,
}

impl<'e, T: Real> Probe<'e, T> {
    fn new(engine: &'e AveragingEngine<T>, t: T, y0: &'e [T]) -> Self {
        let sys = engine.system();
        let analytic = sys.alpha0_jacobian(t, T::zero(), y0).is_some()
            && sys.alpha0_time_derivative(t, T::zero(), y0).is_some();
        let h = if analytic { engine.fd.first::<T>() } else { engine.fd.second::<T>() };
        let h = h * (T::one() + vecops::max_abs(y0));
        Probe { engine, t, y0, h, analytic }
    }

    fn moved(&self, moves: &[(T, &Dir<T>)]) -> (T, Vec<T>) {
        let mut t = self.t;
        let mut y = self.y0.to_vec();
        for (s, d) in moves {
            t = t + *s * d.dt;
            y = vecops::axpy(&y, *s, &d.dy);
        }
        (t, y)
    }

    fn at(&self, theta: T, moves: &[(T, &Dir<T>)]) -> Result<Vec<T>> {
        let (t, y) = self.moved(moves);
        self.engine.alpha0(t, theta, &y)
    }

    /// `Dα̃⁰[v]` from the closed-form derivatives at a displaced point.
    fn first_at(&self, theta: T, moves: &[(T, &Dir<T>)], v: &Dir<T>) -> Result<Vec<T>> {
        let (t, y) = self.moved(moves);
        let jv = self.engine.alpha0_jacobian(t, theta, &y)?.mul_vec(&v.dy)?;
        if v.dt == T::zero() {
            return Ok(jv);
        }
        Ok(vecops::axpy(&jv, v.dt, &self.engine.alpha0_dt(t, theta, &y)?))
    }

    fn step(&self, d: &Dir<T>) -> Option<T> {
        let n = d.norm();
        (n > T::zero()).then(|| self.h / n)
    }

    /// `D²α̃⁰[u, v]`.
    fn second(&self, theta: T, u: &Dir<T>, v: &Dir<T>) -> Result<Vec<T>> {
        let dim = self.y0.len();
        let (Some(su), Some(_)) = (self.step(u), self.step(v)) else {
            return Ok(vec![T::zero(); dim]);
        };
        if self.analytic {
            let p = self.first_at(theta, &[(su, u)], v)?;
            let m = self.first_at(theta, &[(-su, u)], v)?;
            return Ok((0..dim).map(|i| (p[i] - m[i]) / (su + su)).collect());
        }
        // Polarization keeps the mixed derivative on the fourth-order stencil.
        let plus = Dir {
            dt: u.dt + v.dt,
            dy: vecops::add(&u.dy, &v.dy),
        };
        let minus = Dir {
            dt: u.dt - v.dt,
            dy: vecops::sub(&u.dy, &v.dy),
        };
        let (a, b) = (self.second_diag(theta, &plus)?, self.second_diag(theta, &minus)?);
        Ok((0..dim).map(|i| (a[i] - b[i]) * T::lit(0.25)).collect())
    }

    /// `D²α̃⁰[v, v]`.
    fn second_diag(&self, theta: T, v: &Dir<T>) -> Result<Vec<T>> {
        if self.analytic {
            return self.second(theta, v, v);
        }
        let dim = self.y0.len();
        let Some(s) = self.step(v) else {
            return Ok(vec![T::zero(); dim]);
        };
        let two = T::lit(2.0);
        let p1 = self.at(theta, &[(s, v)])?;
        let p2 = self.at(theta, &[(two * s, v)])?;
        let c = self.at(theta, &[])?;
        let m1 = self.at(theta, &[(-s, v)])?;
        let m2 = self.at(theta, &[(-two * s, v)])?;
        let den = T::lit(12.0) * s * s;
        Ok((0..dim)
            .map(|i| (T::lit(16.0) * (p1[i] + m1[i]) - (p2[i] + m2[i]) - T::lit(30.0) * c[i]) / den)
            .collect())
    }

    /// `J·v + ½H{w,w}`, by the route the engine is configured with.
    fn curvature_terms(&self, theta: T, jac: &Matrix<T>, v: &[T], w: &[T]) -> Result<Vec<T>> {
        match self.engine.route {
            Alpha2Route::Recurrence => {
                let h = self.second_diag(theta, &Dir::state(w))?;
                Ok(vecops::axpy(&jac.mul_vec(v)?, T::lit(0.5), &h))
            }
            Alpha2Route::LinearFlow => self.pulled_back(theta, v, w),
        }
    }

    /// `{∇Z}⁻¹(∇a{∇Z v} + ½∇²a{∇Z w}²)`.
    fn pulled_back(&self, theta: T, v: &[T], w: &[T]) -> Result<Vec<T>> {
        let sys = self.engine.system();
        let flow = sys.flow();
        let jz = flow.jacobian(self.t, theta, self.y0)?;
        let z = flow.eval(self.t, theta, self.y0)?;
        let zv = jz.mul_vec(v)?;
        let zw = jz.mul_vec(w)?;
        let scale = T::one() + vecops::max_abs(&z);
        let a = |p: &[T]| sys.slow_field(self.t, theta, p);
        let mut rhs = vec![T::zero(); z.len()];
        let nv = vecops::norm(&zv);
        if nv > T::zero() {
            let s = self.engine.fd.first::<T>() * scale / nv;
            let ap = a(&vecops::axpy(&z, s, &zv))?;
            let am = a(&vecops::axpy(&z, -s, &zv))?;
            for i in 0..rhs.len() {
                rhs[i] = (ap[i] - am[i]) / (s + s);
            }
        }
        let nw = vecops::norm(&zw);
        if nw > T::zero() {
            let s = self.engine.fd.second::<T>() * scale / nw;
            let ap = a(&vecops::axpy(&z, s, &zw))?;
            let ac = a(&z)?;
            let am = a(&vecops::axpy(&z, -s, &zw))?;
            for i in 0..rhs.len() {
                rhs[i] = rhs[i] + T::lit(0.5) * (ap[i] - ac[i] - ac[i] + am[i]) / (s * s);
            }
        }
        jz.solve(&rhs).ok_or(Error::SingularJacobian {
            t: self.t.to_f64_lossy(),
            theta: theta.to_f64_lossy(),
        })
    }
}

/// Spectral samples of the recurrence at one state stack, enough to
/// evaluate `α̃^j`, `θÃ^j` at any phase and read off `ã^j`.
#[derive(Clone)]
pub struct LocalExpansion<T: Real> {
    engine: AveragingEngine<T>,
    stack: StateStack<T>,
    nodes: usize,
    abar: Vec<Vec<T>>,
    gbar: Vec<T>,
    s0: PeriodicSamples<T>,
    sg: Option<PeriodicSamples<T>>,
    s1: Option<PeriodicSamples<T>>,
    sq: Option<PeriodicSamples<T>>,
    s2: Option<PeriodicSamples<T>>,
}

impl<T: Real> LocalExpansion<T> {
    pub fn order(&self) -> usize {
        self.abar.len() - 1
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn stack(&self) -> &StateStack<T> {
        &self.stack
    }

    /// `ã^k`.
    pub fn abar(&self, k: usize) -> &[T] {
        &self.abar[k]
    }

    /// `ã⁰ … ã^k` concatenated.
    pub fn rates(&self) -> Vec<T> {
        self.abar.iter().flatten().copied().collect()
    }

    fn samples(&self, k: usize) -> &PeriodicSamples<T> {
        match k {
            0 => &self.s0,
            1 => self.s1.as_ref().expect("order 1 expanded"),
            _ => self.s2.as_ref().expect("order 2 expanded"),
        }
    }

    /// `θÃ^k` at any phase; 2π-periodic.
    pub fn theta_a(&self, k: usize, theta: T) -> Vec<T> {
        self.samples(k).deviation(theta)
    }

    /// `α̃^k` evaluated directly at `θ`.
    pub fn alpha(&self, k: usize, theta: T) -> Result<Vec<T>> {
        if k > self.order() {
            return Err(Error::UnsupportedOrder {
                what: "local expansion".into(),
                order: k,
                max_order: self.order(),
            });
        }
        let eng = &self.engine;
        let (t, y0) = (self.stack.t, self.stack.level(0));
        if k == 0 {
            return eng.alpha0(t, theta, y0);
        }
        let jac = eng.alpha0_jacobian(t, theta, y0)?;
        let w = vecops::add(self.stack.level(1), &self.s0.deviation(theta));
        let dg = self.sg.as_ref().expect("order 1 expanded").deviation(theta);
        if k == 1 {
            return Ok(vecops::sub(&jac.mul_vec(&w)?, &dg));
        }
        let v = vecops::add(self.stack.level(2), &self.theta_a(1, theta));
        let probe = Probe::new(eng, t, y0);
        let quad = probe.curvature_terms(theta, &jac, &v, &w)?;
        let dq = self.sq.as_ref().expect("order 2 expanded").deviation(theta);
        Ok(vecops::sub(&quad, &dq))
    }

    /// `w = y¹ + θÃ⁰`, the argument of the order-2 quadratic terms.
    pub fn first_increment(&self, theta: T) -> Vec<T> {
        vecops::add(self.stack.level(1), &self.s0.deviation(theta))
    }

    /// Period mean of `Dα̃⁰[(1, ã⁰)]`.
    pub fn gbar(&self) -> &[T] {
        &self.gbar
    }

    fn scale(&self) -> T {
        [Some(&self.s0), self.s1.as_ref(), self.s2.as_ref()]
            .into_iter()
            .flatten()
            .fold(T::zero(), |m, s| m.max(s.sup()))
    }
}

impl<T: Real> std::fmt::Debug for LocalExpansion<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LocalExpansion")
            .field("order", &self.order())
            .field("nodes", &self.nodes)
            .field("abar", &self.abar)
            .finish_non_exhaustive()
    }
}
