//! Finite Larmor radius: the field is sampled along the Larmor circle
//! `y⁰ + 𝓡(θ)u⁰`.

use crate::averaging::StateStack;
use crate::error::Result;
use crate::linalg::{add3, vec3};
use crate::model::{projector_p, rotation_cal_r, rotation_r};
use crate::quadrature::PeriodicSamples;
use crate::scalar::Real;

use super::{join, level, Regime};

pub(super) fn rates<T: Real>(regime: &Regime<T>, stack: &StateStack<T>) -> Result<Vec<T>> {
    let (y0, u0) = level(stack, 0);
    let t = stack.t;
    let f = regime.field();
    let (mean, _) = regime.quadrature().refine(0.0, |n| {
        let s = PeriodicSamples::sample(n, |th| {
            let e = f.value(t, th, &add3(&y0, &rotation_cal_r(th).apply(&u0)));
            Ok(join(&rotation_cal_r(-th).apply(&e), &rotation_r(-th).apply(&e)))
        })?;
        let m = s.mean().to_vec();
        let scale = s.sup();
        Ok((m.clone(), m, scale))
    })?;
    let pos = add3(&projector_p().apply(&u0), &vec3(&mean[..3]));
    Ok(join(&pos, &vec3(&mean[3..])))
}

pub(super) fn profiles<T: Real>(theta: T, stack: &StateStack<T>) -> Vec<Vec<T>> {
    let (y0, u0) = level(stack, 0);
    vec![join(
        &add3(&y0, &rotation_cal_r(theta).apply(&u0)),
        &rotation_r(theta).apply(&u0),
    )]
}
