//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use infotree::subordination::{sample_stable_increment, y_scale, ScaleForm};
use infotree::{seeded_rng, MarketParams, OptionSpec};
use rand::Rng;
use rand_distr::StandardNormal;

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fb) = (f(a), f(b));
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `e^(-disc T) E max(S_T - K, 0)` for `S_T = S exp((drift - v^2/2) T + v sqrt(T) Z)`,
/// integrated over the standard normal density.
pub fn lognormal_call(s: f64, k: f64, t: f64, drift: f64, disc: f64, vol: f64) -> f64 {
    let sd = vol * t.sqrt();
    let mean = (drift - 0.5 * vol * vol) * t;
    let z0 = ((k / s).ln() - mean) / sd;
    let integrand = |z: f64| (s * (mean + sd * z).exp() - k) * (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
    (-disc * t).exp() * simpson(integrand, z0, z0.max(0.0) + 12.0, 1e-14)
}

/// `Phi(x)` by quadrature of the density.
pub fn phi_quad(x: f64) -> f64 {
    let dens = |z: f64| (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
    if x < 0.0 {
        simpson(dens, x - 40.0, x, 1e-17)
    } else {
        0.5 + simpson(dens, 0.0, x, 1e-17)
    }
}

/// `E exp(-s c V)` for `V` totally skewed `(alpha/2)`-stable with unit scale.
pub fn stable_laplace(alpha: f64, c: f64, s: f64) -> f64 {
    let a = 0.5 * alpha;
    (-(c * s).powf(a) / (0.5 * PI * a).cos()).exp()
}

/// Discounted call price by simulating `S_T = S e^(rT - Y/2 + sqrt(Y) Z)` with
/// `Y` the stable clock variance; the call is priced through the put and parity.
pub fn pathwise_call(opt: &OptionSpec, m: &MarketParams, alpha: f64, form: ScaleForm, n: usize, seed: u64) -> (f64, f64) {
    let t = opt.tenor();
    let c = y_scale(m, alpha, t, form).unwrap();
    let mut rng = seeded_rng(seed, 1_000_003);
    let disc = (-m.r() * t).exp();
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..n {
        let y = sample_stable_increment(alpha, c, &mut rng).unwrap();
        let z: f64 = rng.sample(StandardNormal);
        let st = opt.spot() * (m.r() * t - 0.5 * y + y.sqrt() * z).exp();
        let put = disc * (opt.strike() - st).max(0.0);
        sum += put;
        sq += put * put;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let se = ((sq / nf - mean * mean) / (nf - 1.0)).sqrt();
    (mean + opt.spot() - opt.strike() * disc, se)
}

/// Averages prices at `n` and `n + 1` steps to damp odd-even oscillation.
pub fn paired<F: Fn(usize) -> f64>(price: F, n: usize) -> f64 {
    0.5 * (price(n) + price(n + 1))
}
