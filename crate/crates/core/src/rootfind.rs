//! Brent's bracketing root finder.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Root {
    pub x: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Finds `x` in `[a, b]` with `|f(x)| <= f_tol`; `f(a)` and `f(b)` must differ in sign.
pub(crate) fn brent<F: Fn(f64) -> f64>(
    f: F,
    mut a: f64,
    mut b: f64,
    f_tol: f64,
    max_iter: usize,
) -> Result<Root> {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa.abs() <= f_tol {
        return Ok(Root { x: a, residual: fa, iterations: 0 });
    }
    if fb.abs() <= f_tol {
        return Ok(Root { x: b, residual: fb, iterations: 0 });
    }
    if fa.signum() == fb.signum() {
        return Err(Error::invalid("bracket", "function has equal signs at both ends"));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for iter in 1..=max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5e-300;
        let half = 0.5 * (c - b);
        if fb.abs() <= f_tol || half.abs() <= tol {
            return if fb.abs() <= f_tol {
                Ok(Root { x: b, residual: fb, iterations: iter })
            } else {
                Err(Error::NoConvergence { iterations: iter, residual: fb })
            };
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            // inverse quadratic interpolation, or secant when only two points differ
            let s = fb / fa;
            let (mut p, mut q) = if a == c {
                (2.0 * half * s, 1.0 - s)
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                (
                    s * (2.0 * half * qa * (qa - r) - (b - a) * (r - 1.0)),
                    (qa - 1.0) * (r - 1.0) * (s - 1.0),
                )
            };
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * half * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = half;
                e = d;
            }
        } else {
            d = half;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(half) };
        fb = f(b);
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: fb })
}
