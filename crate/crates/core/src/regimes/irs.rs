//! Isotope resonant separation: `E(t, θ, x)` is 2π-periodic in the phase,
//! so every average is a phase quadrature.

use crate::averaging::StateStack;
use crate::error::Result;
use crate::linalg::{add3, scale3, sub3, vec3, Mat3, Vec3};
use crate::model::{projector_p, rotation_cal_r, rotation_r};
use crate::quadrature::PeriodicSamples;
use crate::scalar::Real;

use super::{join, level, Regime};

/// Phase samples of `R(−σ)E`, `R(−σ)∇E`, `R(−σ)∂ₜE` and `R(−σ)∇E𝓡(σ)`
/// at `(t, y⁰)`, in that order (3 + 9 + 3 + 9 columns).
fn sample<T: Real>(regime: &Regime<T>, t: T, y: &Vec3<T>, n: usize, k: usize) -> Result<PeriodicSamples<T>> {
    let f = regime.field();
    PeriodicSamples::sample(n, |s: T| {
        let rm = rotation_r(-s);
        let mut row = rm.apply(&f.value(t, s, y)).to_vec();
        if k >= 1 {
            let g = rm * f.jacobian(t, s, y);
            row.extend(g.to_vec());
            row.extend(rm.apply(&f.time_derivative(t, s, y)));
            row.extend((g * rotation_cal_r(s)).to_vec());
        }
        Ok(row)
    })
}

fn rates_on<T: Real>(regime: &Regime<T>, k: usize, stack: &StateStack<T>, n: usize) -> Result<Vec<T>> {
    let (y0, u0) = level(stack, 0);
    let samples = sample(regime, stack.t, &y0, n, k)?;
    let mean = samples.mean();
    let p = projector_p();
    let upar = p.apply(&u0);
    let abar_v = vec3(&mean[..3]);
    let mut out = join(&upar, &abar_v);
    if k == 0 {
        return Ok(out);
    }

    let (y1, u1) = level(stack, 1);
    let dev = samples.deviation_at_nodes();
    let nodes = crate::quadrature::phase_nodes::<T>(n);
    let inv_n = T::one() / T::from_count(n);
    // Period means of R(θ)·D[R(−σ)E](θ), D[R(−σ)∇E](θ) and D[R(−σ)∂ₜE](θ).
    let mut rot_dev = [T::zero(); 3];
    let mut dev_g = [T::zero(); 9];
    let mut dev_t = [T::zero(); 3];
    for (th, d) in nodes.iter().zip(&dev) {
        let rd = rotation_r(*th).apply(&vec3(&d[..3]));
        rot_dev = add3(&rot_dev, &scale3(inv_n, &rd));
        for (acc, v) in dev_g.iter_mut().zip(&d[3..12]) {
            *acc = *acc + *v * inv_n;
        }
        dev_t = add3(&dev_t, &scale3(inv_n, &vec3(&d[12..15])));
    }
    let mean_g = Mat3::from_slice(&mean[3..12]);
    let mean_gr = Mat3::from_slice(&mean[15..24]);
    let sp = rotation_r(T::FRAC_PI_2()) - p;
    let dy1 = sub3(&add3(&p.apply(&u1), &rot_dev), &sp.apply(&abar_v));
    let du1 = sub3(
        &sub3(
            &add3(&mean_g.apply(&y1), &mean_gr.apply(&u0)),
            &Mat3::from_slice(&dev_g).apply(&upar),
        ),
        &dev_t,
    );
    out.extend(join(&dy1, &du1));
    Ok(out)
}

pub(super) fn rates<T: Real>(regime: &Regime<T>, k: usize, stack: &StateStack<T>) -> Result<Vec<T>> {
    let (out, _) = regime.quadrature().refine(0.0, |n| {
        let r = rates_on(regime, k, stack, n)?;
        let scale = crate::linalg::vecops::max_abs(&r);
        Ok((r.clone(), r, scale))
    })?;
    Ok(out)
}

pub(super) fn profiles<T: Real>(
    regime: &Regime<T>,
    k: usize,
    theta: T,
    stack: &StateStack<T>,
) -> Result<Vec<Vec<T>>> {
    let (y0, u0) = level(stack, 0);
    let r = rotation_r(theta);
    let mut out = vec![join(&y0, &r.apply(&u0))];
    if k == 0 {
        return Ok(out);
    }
    let (y1, u1) = level(stack, 1);
    let (dev, _) = regime.quadrature().refine(0.0, |n| {
        let d = sample(regime, stack.t, &y0, n, 0)?.deviation(theta);
        let scale = crate::linalg::vecops::max_abs(&d);
        Ok((d.clone(), d, scale))
    })?;
    out.push(join(
        &add3(&y1, &rotation_cal_r(theta).apply(&u0)),
        &r.apply(&add3(&u1, &vec3(&dev))),
    ));
    Ok(out)
}
