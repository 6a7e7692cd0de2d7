//! Random-clock market: a binary tree run on a subordinated (random) clock,
//! its exponential Lévy limit and the log-stable call price.
//!
//! Clock increments are measured in subordinated time; the total variance
//! over a tenor is `Y = sigma^2 * (tau(T) - tau(t))`. For the stable clock
//! `Y = C * V` with `V` a totally skewed `alpha/2`-stable variate of unit
//! scale and `C` given by [`y_scale`].

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{norm_cdf, MarketParams, OptionKind, OptionSpec};
use crate::stats::{mc_moments, stream_rng};

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, std_error: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClockKind {
    /// `alpha/2`-stable subordinator, `alpha` in (1, 2).
    Stable { alpha: f64 },
    /// Calendar time: `tau(t) = t`.
    Deterministic,
    /// Increments resampled uniformly from observed positive values.
    Empirical { increments: Vec<f64> },
}

/// How the scale constant of the stable clock groups its factors.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleForm {
    /// `2 sigma^2 * cos(pi alpha / 4)^(2/alpha) * T^(2/alpha)`: variance linear in `sigma^2`.
    #[default]
    Linear,
    /// `(2 sigma^2 cos(pi alpha / 4))^(2/alpha) * T^(2/alpha)`.
    Grouped,
}

/// Integrand of the mixture distributions used by the call price.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MixtureForm {
    /// `F(+/-)(x) = E Phi((x +/- Y/2) / sqrt(Y))`.
    #[default]
    TwoSided,
    /// `E Phi((x + Y) / sqrt(Y))` in both legs.
    OneSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MixtureSide {
    Plus,
    Minus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubordinatorSpec {
    kind: ClockKind,
    rho: f64,
    base_dt: f64,
    scale_form: ScaleForm,
    mixture_form: MixtureForm,
    absorb_at_zero: bool,
}

impl SubordinatorSpec {
    pub fn new(kind: ClockKind, rho: f64, base_dt: f64) -> Result<Self> {
        match &kind {
            ClockKind::Stable { alpha } => check_alpha(*alpha)?,
            ClockKind::Deterministic => {}
            ClockKind::Empirical { increments } => {
                if increments.is_empty() {
                    return Err(Error::InsufficientData("empirical clock needs increments".into()));
                }
                if increments.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
                    return Err(Error::invalid("increments", "every clock increment must be > 0"));
                }
            }
        }
        if !rho.is_finite() {
            return Err(Error::invalid("rho", format!("must be finite, got {rho}")));
        }
        if !(base_dt.is_finite() && base_dt > 0.0) {
            return Err(Error::invalid("base_dt", format!("must be > 0, got {base_dt}")));
        }
        Ok(Self {
            kind,
            rho,
            base_dt,
            scale_form: ScaleForm::default(),
            mixture_form: MixtureForm::default(),
            absorb_at_zero: false,
        })
    }

    pub fn stable(alpha: f64, rho: f64, base_dt: f64) -> Result<Self> {
        Self::new(ClockKind::Stable { alpha }, rho, base_dt)
    }

    pub fn deterministic(rho: f64, base_dt: f64) -> Result<Self> {
        Self::new(ClockKind::Deterministic, rho, base_dt)
    }

    pub fn with_scale_form(mut self, form: ScaleForm) -> Self {
        self.scale_form = form;
        self
    }

    pub fn with_mixture_form(mut self, form: MixtureForm) -> Self {
        self.mixture_form = form;
        self
    }

    /// Paths hitting a nonpositive growth factor stay at zero instead of failing.
    pub fn with_absorption(mut self, absorb: bool) -> Self {
        self.absorb_at_zero = absorb;
        self
    }

    pub fn kind(&self) -> &ClockKind {
        &self.kind
    }
    pub fn rho(&self) -> f64 {
        self.rho
    }
    pub fn base_dt(&self) -> f64 {
        self.base_dt
    }
    pub fn scale_form(&self) -> ScaleForm {
        self.scale_form
    }
    pub fn mixture_form(&self) -> MixtureForm {
        self.mixture_form
    }
    pub fn absorb_at_zero(&self) -> bool {
        self.absorb_at_zero
    }

    /// One clock increment (subordinated time) over a calendar step `dt`.
    pub fn sample_increment<R: Rng + ?Sized>(&self, m: &MarketParams, dt: f64, rng: &mut R) -> f64 {
        match &self.kind {
            ClockKind::Deterministic => dt,
            ClockKind::Stable { alpha } => {
                let scale = scale_unchecked(m.sigma(), *alpha, dt, self.scale_form) / (m.sigma() * m.sigma());
                stable_unchecked(*alpha, scale, rng)
            }
            ClockKind::Empirical { increments } => increments[rng.random_range(0..increments.len())],
        }
    }

    /// Total variance `Y` accumulated over `tenor`.
    fn sample_variance<R: Rng + ?Sized>(&self, m: &MarketParams, tenor: f64, rng: &mut R) -> f64 {
        let s2 = m.sigma() * m.sigma();
        match &self.kind {
            ClockKind::Deterministic => s2 * tenor,
            ClockKind::Stable { alpha } => {
                stable_unchecked(*alpha, scale_unchecked(m.sigma(), *alpha, tenor, self.scale_form), rng)
            }
            ClockKind::Empirical { increments } => {
                let n = empirical_steps(tenor, self.base_dt);
                let total: f64 = (0..n)
                    .map(|_| increments[rng.random_range(0..increments.len())])
                    .sum();
                s2 * total
            }
        }
    }
}

fn empirical_steps(tenor: f64, base_dt: f64) -> usize {
    ((tenor / base_dt).round() as usize).max(1)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 1.0 && alpha < 2.0 {
        Ok(())
    } else {
        Err(Error::invalid("alpha", format!("must lie in (1, 2), got {alpha}")))
    }
}

/// Market price of risk `-(rho + sigma^2/2) / sigma` of the random-clock market.
pub fn psi(m: &MarketParams, spec: &SubordinatorSpec) -> f64 {
    -(spec.rho + 0.5 * m.sigma() * m.sigma()) / m.sigma()
}

/// Draws `scale * V` with `V` totally skewed `(alpha/2)`-stable of unit scale,
/// so that `E exp(-s V) = exp(-s^(alpha/2) / cos(pi alpha / 4))`.
///
/// Uses the Chambers-Mallows-Stuck transformation of a uniform angle and a
/// unit exponential.
pub fn sample_stable_increment<R: Rng + ?Sized>(alpha: f64, scale: f64, rng: &mut R) -> Result<f64> {
    check_alpha(alpha)?;
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::invalid("scale", format!("must be > 0, got {scale}")));
    }
    Ok(stable_unchecked(alpha, scale, rng))
}

fn stable_unchecked<R: Rng + ?Sized>(alpha: f64, scale: f64, rng: &mut R) -> f64 {
    let a = 0.5 * alpha;
    // with unit skewness the shift angle is pi/2 for every a < 1
    let norm = (1.0 / (0.5 * PI * a).cos()).powf(1.0 / a);
    loop {
        let u: f64 = rng.random();
        let w: f64 = Exp1.sample(rng);
        let v = PI * (u - 0.5);
        let shifted = a * (v + 0.5 * PI);
        let x = norm * shifted.sin() / v.cos().powf(1.0 / a)
            * ((v - shifted).cos() / w).powf((1.0 - a) / a);
        if x.is_finite() && x > 0.0 {
            return scale * x;
        }
    }
}

/// Scale `C` of the total variance `Y = C V` over `tenor`.
pub fn y_scale(m: &MarketParams, alpha: f64, tenor: f64, form: ScaleForm) -> Result<f64> {
    check_alpha(alpha)?;
    if !(tenor.is_finite() && tenor > 0.0) {
        return Err(Error::invalid("tenor", format!("must be > 0, got {tenor}")));
    }
    Ok(scale_unchecked(m.sigma(), alpha, tenor, form))
}

fn scale_unchecked(sigma: f64, alpha: f64, tenor: f64, form: ScaleForm) -> f64 {
    let e = 2.0 / alpha;
    let c = (0.25 * PI * alpha).cos();
    let time = tenor.powf(e);
    match form {
        ScaleForm::Linear => 2.0 * sigma * sigma * c.powf(e) * time,
        ScaleForm::Grouped => (2.0 * sigma * sigma * c).powf(e) * time,
    }
}

fn mixture_integrand(x: f64, y: f64, side: MixtureSide, form: MixtureForm) -> f64 {
    let sy = y.sqrt();
    match (form, side) {
        (MixtureForm::TwoSided, MixtureSide::Plus) => norm_cdf((x + 0.5 * y) / sy),
        (MixtureForm::TwoSided, MixtureSide::Minus) => norm_cdf((x - 0.5 * y) / sy),
        (MixtureForm::OneSided, _) => norm_cdf((x + y) / sy),
    }
}

fn check_tenor_samples(tenor: f64, n_mc: usize) -> Result<()> {
    if !(tenor.is_finite() && tenor > 0.0) {
        return Err(Error::invalid("tenor", format!("must be > 0, got {tenor}")));
    }
    if n_mc == 0 {
        return Err(Error::invalid("n_mc", "need at least one sample"));
    }
    Ok(())
}

/// Mixture distribution `E Phi((x +/- Y/2) / sqrt(Y))` over the clock's total variance.
///
/// The deterministic clock has a single atom and is evaluated exactly.
pub fn f_mixture(
    x: f64,
    side: MixtureSide,
    spec: &SubordinatorSpec,
    m: &MarketParams,
    tenor: f64,
    n_mc: usize,
    seed: u64,
) -> Result<Estimate> {
    check_tenor_samples(tenor, n_mc)?;
    let form = spec.mixture_form;
    if let ClockKind::Deterministic = spec.kind {
        let y = m.sigma() * m.sigma() * tenor;
        return Ok(Estimate::exact(mixture_integrand(x, y, side, form)));
    }
    let mo = mc_moments(n_mc, seed, |rng| {
        [mixture_integrand(x, spec.sample_variance(m, tenor, rng), side, form)]
    });
    Ok(Estimate {
        value: mo.mean[0],
        std_error: mo.se[0],
    })
}

/// Call price `S F(+)(x) - K' F(-)(x)` with `K' = K e^(-r (T - t))` and `x = ln(S / K')`.
///
/// Both mixtures share the same clock draws. Puts use parity on the same
/// discounted strike.
pub fn logstable_call(
    opt: &OptionSpec,
    m: &MarketParams,
    spec: &SubordinatorSpec,
    n_mc: usize,
    seed: u64,
) -> Result<Estimate> {
    let tenor = opt.tenor();
    if tenor == 0.0 {
        return Ok(Estimate::exact(opt.payoff(opt.spot())));
    }
    check_tenor_samples(tenor, n_mc)?;
    let s = opt.spot();
    let kd = opt.strike() * (-m.r() * tenor).exp();
    let x = (s / kd).ln();
    let form = spec.mixture_form;
    let price_at = |y: f64| {
        s * mixture_integrand(x, y, MixtureSide::Plus, form)
            - kd * mixture_integrand(x, y, MixtureSide::Minus, form)
    };
    let call = match spec.kind {
        ClockKind::Deterministic => Estimate::exact(price_at(m.sigma() * m.sigma() * tenor)),
        _ => {
            let mo = mc_moments(n_mc, seed, |rng| [price_at(spec.sample_variance(m, tenor, rng))]);
            Estimate {
                value: mo.mean[0],
                std_error: mo.se[0],
            }
        }
    };
    Ok(match opt.kind() {
        OptionKind::Call => call,
        OptionKind::Put => Estimate {
            value: call.value - s + kd,
            std_error: call.std_error,
        },
    })
}

/// Clock increments drawn for `count` calendar steps of size `dt`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClockIncrementSample {
    pub increments: Vec<f64>,
    pub seed: u64,
}

pub fn sample_clock_increments(
    spec: &SubordinatorSpec,
    m: &MarketParams,
    dt: f64,
    count: usize,
    seed: u64,
) -> Result<ClockIncrementSample> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("dt", format!("must be > 0, got {dt}")));
    }
    let mut rng = stream_rng(seed, 0);
    let increments = (0..count).map(|_| spec.sample_increment(m, dt, &mut rng)).collect();
    Ok(ClockIncrementSample { increments, seed })
}

/// One path of the subordinated binary tree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubordinatedPath {
    /// Calendar times `k dt`.
    pub times: Vec<f64>,
    /// Subordinated clock `tau(k dt)`.
    pub clock: Vec<f64>,
    pub prices: Vec<f64>,
    /// Step at which the path was absorbed at zero, if any.
    pub absorbed_at: Option<usize>,
}

/// Growth factor of one subordinated tree step with sign `up`.
pub fn subordinated_factor(m: &MarketParams, rho: f64, p: f64, dt: f64, increment: f64, up: bool) -> f64 {
    let base = 1.0 + m.r() * dt + rho * increment;
    let sv = m.sigma() * increment.sqrt();
    if up {
        base + ((1.0 - p) / p).sqrt() * sv
    } else {
        base - (p / (1.0 - p)).sqrt() * sv
    }
}

/// Simulates `S_{k+1} = S_k (1 + r dt + rho D + sign * sigma sqrt(D) * weight)` with
/// up-sign probability `p` and clock increments `D` from `spec`.
///
/// A nonpositive factor is an error unless absorption is enabled on `spec`.
pub fn simulate_subordinated_path(
    spec: &SubordinatorSpec,
    m: &MarketParams,
    s0: f64,
    p: f64,
    horizon: f64,
    n_steps: usize,
    seed: u64,
) -> Result<SubordinatedPath> {
    check_path_inputs(s0, p, horizon, n_steps)?;
    let mut rng = stream_rng(seed, 0);
    path_with(spec, m, s0, p, horizon, n_steps, &mut rng)
}

fn check_path_inputs(s0: f64, p: f64, horizon: f64, n_steps: usize) -> Result<()> {
    if !(s0.is_finite() && s0 > 0.0) {
        return Err(Error::invalid("spot", format!("must be > 0, got {s0}")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid("p", format!("must lie in (0, 1), got {p}")));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::invalid("horizon", format!("must be > 0, got {horizon}")));
    }
    if n_steps == 0 {
        return Err(Error::invalid("n_steps", "must be >= 1"));
    }
    Ok(())
}

fn path_with<R: Rng + ?Sized>(
    spec: &SubordinatorSpec,
    m: &MarketParams,
    s0: f64,
    p: f64,
    horizon: f64,
    n_steps: usize,
    rng: &mut R,
) -> Result<SubordinatedPath> {
    let dt = horizon / n_steps as f64;
    let mut path = SubordinatedPath {
        times: Vec::with_capacity(n_steps + 1),
        clock: Vec::with_capacity(n_steps + 1),
        prices: Vec::with_capacity(n_steps + 1),
        absorbed_at: None,
    };
    path.times.push(0.0);
    path.clock.push(0.0);
    path.prices.push(s0);
    let (mut s, mut clock) = (s0, 0.0);
    for k in 0..n_steps {
        let d = spec.sample_increment(m, dt, rng);
        let up = rng.random::<f64>() < p;
        let factor = subordinated_factor(m, spec.rho, p, dt, d, up);
        clock += d;
        if path.absorbed_at.is_none() {
            if factor > 0.0 {
                s *= factor;
            } else if spec.absorb_at_zero {
                s = 0.0;
                path.absorbed_at = Some(k);
            } else {
                return Err(Error::InadmissibleStep {
                    step: k,
                    dt,
                    max_dt: 0.0,
                    reason: format!("growth factor {factor} <= 0 at clock increment {d}"),
                });
            }
        }
        path.times.push((k + 1) as f64 * dt);
        path.clock.push(clock);
        path.prices.push(s);
    }
    Ok(path)
}

/// Mean terminal value of the subordinated tree over `n_paths` paths.
#[allow(clippy::too_many_arguments)]
pub fn subordinated_terminal_mean(
    spec: &SubordinatorSpec,
    m: &MarketParams,
    s0: f64,
    p: f64,
    horizon: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<Estimate> {
    check_path_inputs(s0, p, horizon, n_steps)?;
    if n_paths == 0 {
        return Err(Error::invalid("n_paths", "need at least one path"));
    }
    // validate once so the parallel sampler only sees admissible inputs
    if !spec.absorb_at_zero {
        let mut rng = stream_rng(seed, u64::MAX);
        path_with(spec, m, s0, p, horizon, n_steps, &mut rng)?;
    }
    let failure = std::sync::atomic::AtomicBool::new(false);
    let mo = mc_moments(n_paths, seed, |rng| match path_with(spec, m, s0, p, horizon, n_steps, rng) {
        Ok(path) => [*path.prices.last().expect("nonempty path")],
        Err(_) => {
            failure.store(true, std::sync::atomic::Ordering::Relaxed);
            [0.0]
        }
    });
    if failure.into_inner() {
        return Err(Error::InadmissibleStep {
            step: 0,
            dt: horizon / n_steps as f64,
            max_dt: 0.0,
            reason: "a simulated path reached a nonpositive growth factor; enable absorption".into(),
        });
    }
    Ok(Estimate {
        value: mo.mean[0],
        std_error: mo.se[0],
    })
}

/// Draws `S_T = S_0 exp(r T + rho tau(T) + sigma B(tau(T)))` from the continuous limit.
pub fn sample_terminal<R: Rng + ?Sized>(
    spec: &SubordinatorSpec,
    m: &MarketParams,
    s0: f64,
    horizon: f64,
    rng: &mut R,
) -> f64 {
    let y = spec.sample_variance(m, horizon, rng);
    let tau = y / (m.sigma() * m.sigma());
    let z: f64 = rng.sample(rand_distr::StandardNormal);
    s0 * (m.r() * horizon + spec.rho * tau + y.sqrt() * z).exp()
}

/// Sample mean of the continuous-limit terminal value.
pub fn terminal_mean(
    spec: &SubordinatorSpec,
    m: &MarketParams,
    s0: f64,
    horizon: f64,
    n_mc: usize,
    seed: u64,
) -> Result<Estimate> {
    check_tenor_samples(horizon, n_mc)?;
    let mo = mc_moments(n_mc, seed, |rng| [sample_terminal(spec, m, s0, horizon, rng)]);
    Ok(Estimate {
        value: mo.mean[0],
        std_error: mo.se[0],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn market() -> MarketParams {
        MarketParams::new(0.1, 0.2, 0.05).unwrap()
    }

    #[test]
    fn scale_values() {
        let m = market();
        let lin = y_scale(&m, 1.7, 1.0, ScaleForm::Linear).unwrap();
        let grp = y_scale(&m, 1.7, 1.0, ScaleForm::Grouped).unwrap();
        assert!((lin - 0.014_447_028_196_932_672).abs() < 1e-16);
        assert!((grp - 0.009_251_372_442_787_937).abs() < 1e-16);
        let two = y_scale(&m, 1.7, 2.0, ScaleForm::Linear).unwrap();
        assert!((two / lin - 2f64.powf(2.0 / 1.7)).abs() < 1e-13);
        assert!(y_scale(&m, 2.0, 1.0, ScaleForm::Linear).is_err());
    }

    #[test]
    fn sampler_is_positive_and_scales() {
        let mut a = stream_rng(3, 0);
        let mut b = stream_rng(3, 0);
        for _ in 0..10_000 {
            let x = sample_stable_increment(1.5, 1.0, &mut a).unwrap();
            let y = sample_stable_increment(1.5, 2.5, &mut b).unwrap();
            assert!(x > 0.0);
            assert!((y - 2.5 * x).abs() <= 1e-12 * y);
        }
        assert!(sample_stable_increment(1.5, 0.0, &mut a).is_err());
        assert!(sample_stable_increment(0.9, 1.0, &mut a).is_err());
    }

    #[test]
    fn deterministic_mixture_is_a_single_atom() {
        let m = market();
        let spec = SubordinatorSpec::deterministic(0.0, 0.01).unwrap();
        let y0: f64 = 0.04 * 0.5;
        let f = f_mixture(0.1, MixtureSide::Plus, &spec, &m, 0.5, 10, 1).unwrap();
        assert_eq!(f.value, norm_cdf((0.1 + 0.5 * y0) / y0.sqrt()));
        assert_eq!(f.std_error, 0.0);
        let g = f_mixture(0.1, MixtureSide::Minus, &spec, &m, 0.5, 10, 1).unwrap();
        assert_eq!(g.value, norm_cdf((0.1 - 0.5 * y0) / y0.sqrt()));
    }

    #[test]
    fn psi_matches_definition() {
        let spec = SubordinatorSpec::deterministic(0.1, 0.01).unwrap();
        assert!((psi(&market(), &spec) - (-(0.1 + 0.02) / 0.2)).abs() < 1e-15);
    }

    #[test]
    fn deterministic_path_is_binary_tree() {
        let m = market();
        let spec = SubordinatorSpec::deterministic(0.0, 0.01).unwrap();
        let path = simulate_subordinated_path(&spec, &m, 100.0, 0.5, 1.0, 50, 9).unwrap();
        let dt: f64 = 0.02;
        let up = 1.0 + 0.05 * dt + 0.2 * dt.sqrt();
        let down = 1.0 + 0.05 * dt - 0.2 * dt.sqrt();
        for w in path.prices.windows(2) {
            let f = w[1] / w[0];
            assert!((f - up).abs() < 1e-12 || (f - down).abs() < 1e-12);
        }
        assert!((path.clock[50] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spec_validation() {
        assert!(SubordinatorSpec::stable(1.0, 0.0, 0.01).is_err());
        assert!(SubordinatorSpec::new(ClockKind::Empirical { increments: vec![] }, 0.0, 0.01).is_err());
        assert!(SubordinatorSpec::new(ClockKind::Empirical { increments: vec![0.1, -0.1] }, 0.0, 0.01).is_err());
        assert!(SubordinatorSpec::deterministic(0.0, 0.0).is_err());
    }
}
