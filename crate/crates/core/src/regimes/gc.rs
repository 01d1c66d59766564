//! Guiding centre in a constant strong field: closed forms up to order 2.

use crate::averaging::StateStack;
use crate::field::hessian_apply;
use crate::linalg::{add3, scale3, Mat3, Vec3};
use crate::model::{projector_p, rotation_cal_r, rotation_r};
use crate::scalar::Real;

use super::{join, level, Regime};

/// `E` and its derivatives at `(t, y⁰)`.
struct Local<T: Real> {
    e: Vec3<T>,
    g: Mat3<T>,
    et: Vec3<T>,
    gt: Mat3<T>,
    ett: Vec3<T>,
    h: [Mat3<T>; 3],
}

impl<T: Real> Local<T> {
    fn new(regime: &Regime<T>, t: T, y: &Vec3<T>, k: usize) -> Self {
        let f = regime.field();
        let o = T::zero();
        let e = f.value(t, o, y);
        let g = if k >= 1 { f.jacobian(t, o, y) } else { Mat3::zero() };
        let et = if k >= 1 { f.time_derivative(t, o, y) } else { [o; 3] };
        let (gt, ett, h) = if k >= 2 {
            (f.time_jacobian(t, o, y), f.time_second(t, o, y), f.hessian(t, o, y))
        } else {
            (Mat3::zero(), [o; 3], [Mat3::zero(); 3])
        };
        Local { e, g, et, gt, ett, h }
    }
}

/// `P`, `I − P`, `R(π/2) − P`, `R(−π/2) − P`.
struct Frames<T: Real> {
    p: Mat3<T>,
    q: Mat3<T>,
    sp: Mat3<T>,
    sm: Mat3<T>,
}

impl<T: Real> Frames<T> {
    fn new() -> Self {
        let p = projector_p();
        let half_pi = T::FRAC_PI_2();
        Frames {
            p,
            q: Mat3::identity() - p,
            sp: rotation_r(half_pi) - p,
            sm: rotation_r(-half_pi) - p,
        }
    }
}

fn sum<T: Real, const N: usize>(vs: [Vec3<T>; N]) -> Vec3<T> {
    vs.iter().fold([T::zero(); 3], |a, v| add3(&a, v))
}

pub(super) fn rates<T: Real>(regime: &Regime<T>, k: usize, stack: &StateStack<T>) -> Vec<T> {
    let (y0, u0) = level(stack, 0);
    let l = Local::new(regime, stack.t, &y0, k);
    let f = Frames::new();
    let (p, q, sp, sm) = (f.p, f.q, f.sp, f.sm);
    let half = T::lit(0.5);
    let upar = p.apply(&u0);
    let uperp = q.apply(&u0);

    let mut out = join(&upar, &p.apply(&l.e));
    if k == 0 {
        return out;
    }

    let (g, e) = (l.g, l.e);
    let tr_q = half * (q * g).trace();
    let tr_m = half * (sm * g).trace();
    let (y1, u1) = level(stack, 1);
    let dy1 = add3(&p.apply(&u1), &sp.apply(&e));
    let du1 = sum([
        (p * g).apply(&y1),
        (p * g * sp).apply(&u0),
        scale3(tr_q, &sm.apply(&u0)),
        scale3(tr_m, &uperp),
        scale3(-T::one(), &(sm * g).apply(&upar)),
        scale3(-T::one(), &sm.apply(&l.et)),
    ]);
    out.extend(join(&dy1, &du1));
    if k == 1 {
        return out;
    }

    let (y2, u2) = level(stack, 2);
    let (gt, h) = (l.gt, &l.h);
    let one = T::one();
    let quarter = T::lit(0.25);
    let three_q = T::lit(0.75);
    let gu_et = add3(&g.apply(&upar), &l.et);

    let dy2 = sum([
        p.apply(&u2),
        (sp * g).apply(&y1),
        q.apply(&gu_et),
        (p * g * q + sp * g * sp).apply(&u0),
        scale3(-tr_q, &uperp),
        scale3(-tr_m, &sp.apply(&u0)),
    ]);

    let j = sp;
    let ju = j.apply(&u0);
    let hb = |a: &Vec3<T>, b: &Vec3<T>| hessian_apply(h, a, b);
    let mean_rgr = p * g * p + q.scale(tr_q) + sp.scale(tr_m);
    // Phase means of R(−θ)X𝓡(θ) weighted by the deviation operator.
    let dev_mean = |x: &dyn Fn(&Vec3<T>) -> Vec3<T>| {
        sum([
            p.apply(&x(&uperp)),
            scale3(quarter, &q.apply(&x(&uperp))),
            scale3(three_q, &sm.apply(&x(&ju))),
        ])
    };
    let rho = sum([
        l.ett,
        scale3(T::lit(2.0), &gt.apply(&upar)),
        hb(&upar, &upar),
        g.apply(&p.apply(&e)),
    ]);
    let du2 = sum([
        (p * g).apply(&y2),
        (p * g * sp).apply(&u1),
        scale3(tr_q, &sm.apply(&u1)),
        scale3(tr_m, &q.apply(&u1)),
        (p * g).apply(&e),
        scale3(-one, &mean_rgr.apply(&e)),
        scale3(half, &p.apply(&hb(&y1, &y1))),
        p.apply(&hb(&y1, &ju)),
        scale3(-half, &q.apply(&hb(&y1, &ju))),
        scale3(-half, &j.apply(&hb(&y1, &uperp))),
        p.apply(&add3(&scale3(quarter, &hb(&uperp, &uperp)), &scale3(three_q, &hb(&ju, &ju)))),
        scale3(-half, &q.apply(&hb(&ju, &ju))),
        scale3(-half, &j.apply(&hb(&uperp, &ju))),
        j.apply(&sum([
            gt.apply(&y1),
            hb(&upar, &y1),
            (g * p).apply(&u1),
            (g * j).apply(&e),
        ])),
        scale3(-one, &dev_mean(&|v| gt.apply(v))),
        scale3(-one, &dev_mean(&|v| hb(&upar, v))),
        q.apply(&rho),
    ]);
    out.extend(join(&dy2, &du2));
    out
}

pub(super) fn profiles<T: Real>(
    regime: &Regime<T>,
    k: usize,
    theta: T,
    stack: &StateStack<T>,
) -> Vec<Vec<T>> {
    let (y0, u0) = level(stack, 0);
    let r = rotation_r(theta);
    let cr = rotation_cal_r(theta);
    let mut out = vec![join(&y0, &r.apply(&u0))];
    if k == 0 {
        return out;
    }
    let l = Local::new(regime, stack.t, &y0, 1);
    let (y1, u1) = level(stack, 1);
    out.push(join(
        &add3(&y1, &cr.apply(&u0)),
        &add3(&r.apply(&u1), &cr.apply(&l.e)),
    ));
    if k == 1 {
        return out;
    }
    let (y2, u2) = level(stack, 2);
    let f = Frames::new();
    let (p, sp, g) = (f.p, f.sp, l.g);
    let id = Mat3::identity();
    let half = T::lit(0.5);
    let x2 = add3(&add3(&y2, &cr.apply(&u1)), &(id - r).apply(&l.e));
    let gu_et = add3(&g.apply(&p.apply(&u0)), &l.et);
    let shifted = rotation_r(theta - T::FRAC_PI_2()) - p;
    let m = p * g * (id - r) + (sp * g * (cr + sp)).scale(half) + (shifted * g * sp).scale(half);
    let v2 = sum([
        r.apply(&u2),
        (cr * g).apply(&y1),
        scale3(-T::one(), &(r - id).apply(&gu_et)),
        m.apply(&u0),
    ]);
    out.push(join(&x2, &v2));
    out
}
