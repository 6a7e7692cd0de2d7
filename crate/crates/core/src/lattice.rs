//! Binomial and trinomial step distributions and European backward induction.
//!
//! Every tree here is homogeneous: one [`BranchDistribution`] describes a step
//! and a lattice is `n_steps` copies of it. Branch factors are gross growth
//! multipliers listed from the highest to the lowest.
//!
//! Two construction modes exist. The default (corrected) mode keeps the
//! physical branch factors and lets the measure choose only the probabilities,
//! so each risk-neutral style step has the exact first moment of its
//! continuous-time limit. `literal_mode` reproduces the printed formulas for
//! side-by-side study, including those whose step mean drifts away from the
//! martingale value.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{sharpe, BinaryProbModel, MarketParams, OptionSpec, TraderInfo};

/// Margin kept between every built probability and the ends of [0, 1].
pub const PROB_MARGIN: f64 = 1e-12;

/// Tolerance on the sum of branch probabilities.
const PROB_SUM_TOL: f64 = 1e-14;

/// One lattice step: branch factors, their probabilities and the one-step discount factor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchDistribution {
    factors: Vec<f64>,
    probs: Vec<f64>,
    discount: f64,
}

impl BranchDistribution {
    pub fn new(factors: Vec<f64>, probs: Vec<f64>, discount: f64) -> Result<Self> {
        if factors.len() < 2 || factors.len() != probs.len() {
            return Err(Error::invalid(
                "factors",
                format!(
                    "need at least two branches with one probability each ({} factors, {} probs)",
                    factors.len(),
                    probs.len()
                ),
            ));
        }
        if factors.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(Error::invalid(
                "factors",
                format!("branch factors must be finite and positive: {factors:?}"),
            ));
        }
        if factors.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::invalid(
                "factors",
                format!("branch factors must be strictly decreasing: {factors:?}"),
            ));
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid(
                "probs",
                format!("probabilities must lie in [0, 1]: {probs:?}"),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::invalid(
                "probs",
                format!("probabilities sum to {total}, not 1"),
            ));
        }
        if !(discount.is_finite() && discount > 0.0) {
            return Err(Error::invalid(
                "discount",
                format!("must be finite and positive, got {discount}"),
            ));
        }
        Ok(Self {
            factors,
            probs,
            discount,
        })
    }

    /// Two-branch step with up-probability `p`.
    pub fn binomial(up: f64, down: f64, p: f64, discount: f64) -> Result<Self> {
        Self::new(vec![up, down], vec![p, 1.0 - p], discount)
    }

    pub fn factors(&self) -> &[f64] {
        &self.factors
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    fn min_interior_margin(&self, allow_zero_middle: bool) -> Option<f64> {
        self.probs
            .iter()
            .enumerate()
            .filter(|(i, p)| {
                !(allow_zero_middle && self.probs.len() == 3 && *i == 1 && **p == 0.0)
            })
            .map(|(_, p)| p.min(1.0 - p))
            .fold(None, |acc: Option<f64>, m| Some(acc.map_or(m, |a| a.min(m))))
    }
}

/// Exact mean and variance of the branch factor.
pub fn step_moments(b: &BranchDistribution) -> (f64, f64) {
    let mean: f64 = b.factors.iter().zip(&b.probs).map(|(f, p)| f * p).sum();
    let var: f64 = b
        .factors
        .iter()
        .zip(&b.probs)
        .map(|(f, p)| p * (f - mean) * (f - mean))
        .sum();
    (mean, var)
}

fn check_unit(what: &'static str, value: f64, dt: f64) -> Result<f64> {
    if value > 0.0 && value < 1.0 {
        Ok(value)
    } else {
        Err(Error::ProbabilityOutOfRange {
            what,
            value,
            dt,
            max_dt: None,
        })
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if dt.is_finite() && dt > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid("dt", format!("must be finite and > 0, got {dt}")))
    }
}

/// Physical up-probability of the log-symmetric tree:
/// `1/2 + (mu - sigma^2/2) / (2 sigma) * sqrt(dt)`.
pub fn crr_up_prob(m: &MarketParams, dt: f64) -> Result<f64> {
    check_dt(dt)?;
    let s = m.sigma();
    let p = 0.5 + (m.mu() - 0.5 * s * s) / (2.0 * s) * dt.sqrt();
    check_unit("p_dt", p, dt).map_err(|e| with_max_dt(e, crr_max_dt(m)))
}

fn crr_max_dt(m: &MarketParams) -> Option<f64> {
    let s = m.sigma();
    let slope = ((m.mu() - 0.5 * s * s) / (2.0 * s)).abs();
    (slope > 0.0).then(|| (0.5 / slope).powi(2))
}

fn with_max_dt(e: Error, max: Option<f64>) -> Error {
    match e {
        Error::ProbabilityOutOfRange {
            what, value, dt, ..
        } => Error::ProbabilityOutOfRange {
            what,
            value,
            dt,
            max_dt: max,
        },
        other => other,
    }
}

/// Risk-neutral up-probability `p - sqrt(p (1 - p)) * theta * sqrt(dt)`.
pub fn rn_up_prob(p: f64, theta: f64, dt: f64) -> Result<f64> {
    check_dt(dt)?;
    check_unit("p", p, dt)?;
    let q = p - (p * (1.0 - p)).sqrt() * theta * dt.sqrt();
    check_unit("q_dt", q, dt)
}

/// Informed risk-neutral probability in its subtractive form:
/// `q - 2 C_tau (tau / sigma) sqrt(dt) q (1 - q)`.
///
/// Tends to 1 (resp. 0) together with `q` at any fixed `dt`.
pub fn informed_up_prob(q: f64, info: &TraderInfo, m: &MarketParams, dt: f64) -> Result<f64> {
    check_dt(dt)?;
    check_unit("q", q, dt)?;
    let k = 2.0 * info.c_tau() / m.sigma() * dt.sqrt() * q * (1.0 - q);
    let value = q - k * info.tau();
    if value > 0.0 && value < 1.0 {
        return Ok(value);
    }
    let (tau_min, tau_max) = if k > 0.0 {
        ((q - 1.0) / k, q / k)
    } else {
        (f64::NEG_INFINITY, f64::INFINITY)
    };
    Err(Error::InformedOutOfRange {
        value,
        dt,
        tau_min,
        tau_max,
    })
}

/// The affine form `1/2 + (r - C_tau tau - sigma^2/2) / (2 sigma) * sqrt(dt)`.
///
/// Agrees with [`informed_up_prob`] only up to `O(dt)` and loses the limit
/// behaviour as the physical probability tends to 0 or 1.
pub fn informed_up_prob_affine(info: &TraderInfo, m: &MarketParams, dt: f64) -> f64 {
    let s = m.sigma();
    0.5 + (m.r() - info.info_yield() - 0.5 * s * s) / (2.0 * s) * dt.sqrt()
}

/// Informed probability that shifts the step mean by exactly `-C_tau tau dt`
/// on a step whose branch spread is `up - down`.
pub fn informed_up_prob_matched(q: f64, info: &TraderInfo, dt: f64, spread: f64) -> Result<f64> {
    check_dt(dt)?;
    let value = q - info.info_yield() * dt / spread;
    check_unit("q_informed", value, dt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Physical,
    RiskNeutral,
}

/// Probabilities of the tree whose factors carry the perceived mean return `nu`:
/// physical `1/2 + (mu - nu)/(2 sigma) sqrt(dt)`, risk-neutral `1/2 + (r - nu)/(2 sigma) sqrt(dt)`.
pub fn mean_return_probs(m: &MarketParams, nu: f64, dt: f64, side: Side) -> Result<f64> {
    check_dt(dt)?;
    let drift = match side {
        Side::Physical => m.mu(),
        Side::RiskNeutral => m.r(),
    };
    let slope = (drift - nu) / (2.0 * m.sigma());
    let p = 0.5 + slope * dt.sqrt();
    let what = match side {
        Side::Physical => "p_nu",
        Side::RiskNeutral => "q_nu",
    };
    check_unit(what, p, dt).map_err(|e| with_max_dt(e, half_slope_max_dt(slope)))
}

fn half_slope_max_dt(slope: f64) -> Option<f64> {
    (slope != 0.0).then(|| (0.5 / slope.abs()).powi(2))
}

/// Trinomial step with factors `1 + gamma dt + {rho, 0, -rho} sqrt(dt)`.
///
/// Outer branches carry `sigma^2 / (2 rho^2)` plus a tilt and the middle one
/// `1 - sigma^2 / rho^2`. In corrected mode the tilt is `(mu - gamma)/(2 rho) sqrt(dt)`
/// (physical) or `(r - gamma)/(2 rho) sqrt(dt)` (risk-neutral), which makes the step
/// mean exactly `1 + mu dt` (resp. `1 + r dt`). Literal mode uses `(theta - phi) sqrt(dt)`
/// and `-phi sqrt(dt)` with `phi = (gamma - r)/rho`.
pub fn trinomial_probs(
    m: &MarketParams,
    gamma: f64,
    rho_vol: f64,
    dt: f64,
    side: Side,
    literal_mode: bool,
) -> Result<BranchDistribution> {
    check_dt(dt)?;
    if !(rho_vol.is_finite() && rho_vol > 0.0) {
        return Err(Error::invalid("rho_vol", format!("must be > 0, got {rho_vol}")));
    }
    let s = m.sigma();
    if rho_vol < s {
        return Err(Error::invalid(
            "rho_vol",
            format!("middle probability 1 - sigma^2/rho^2 is negative (rho_vol = {rho_vol} < sigma = {s})"),
        ));
    }
    let sq = dt.sqrt();
    let ratio = s * s / (rho_vol * rho_vol);
    let tilt = if literal_mode {
        let phi = (gamma - m.r()) / rho_vol;
        match side {
            Side::Physical => (sharpe(m) - phi) * sq,
            Side::RiskNeutral => -phi * sq,
        }
    } else {
        let target = match side {
            Side::Physical => m.mu(),
            Side::RiskNeutral => m.r(),
        };
        (target - gamma) / (2.0 * rho_vol) * sq
    };
    let up = 0.5 * ratio + tilt;
    let mid = 1.0 - ratio;
    let down = 0.5 * ratio - tilt;
    check_unit("p_up", up, dt)?;
    check_unit("p_down", down, dt)?;
    let centre = 1.0 + gamma * dt;
    BranchDistribution::new(
        vec![centre + rho_vol * sq, centre, centre - rho_vol * sq],
        vec![up, mid, down],
        (-m.r() * dt).exp(),
    )
}

/// Probabilities of the tree with factors `1 + lambda dt +- sigma sqrt(dt)`,
/// `lambda = r - R + sigma^2/2`.
///
/// Physical: `1/2 + (mu - lambda)/(2 sigma) sqrt(dt)`. Risk-neutral as printed
/// (`literal_mode`): `1/2 + (R - sigma^2)/(2 sigma) sqrt(dt)`; corrected:
/// `1/2 + (R - lambda)/(2 sigma) sqrt(dt)`, which gives step mean `1 + R dt` and reduces
/// to `1/2 + (R - sigma^2/2)/(2 sigma) sqrt(dt)` when `R = r`.
pub fn discount_probs(
    m: &MarketParams,
    rate: f64,
    dt: f64,
    side: Side,
    literal_mode: bool,
) -> Result<f64> {
    check_dt(dt)?;
    let s = m.sigma();
    let lambda = discount_lambda(m, rate);
    let slope = match side {
        Side::Physical => (m.mu() - lambda) / (2.0 * s),
        Side::RiskNeutral if literal_mode => (rate - s * s) / (2.0 * s),
        Side::RiskNeutral => (rate - lambda) / (2.0 * s),
    };
    let what = match side {
        Side::Physical => "p_R",
        Side::RiskNeutral => "q_R",
    };
    check_unit(what, 0.5 + slope * dt.sqrt(), dt).map_err(|e| with_max_dt(e, half_slope_max_dt(slope)))
}

/// Factor drift `r - R + sigma^2/2` of the discount-information tree.
pub fn discount_lambda(m: &MarketParams, rate: f64) -> f64 {
    m.r() - rate + 0.5 * m.sigma() * m.sigma()
}

/// Risk-adjusted probability `p - theta (1 + lambda) sqrt(p (1 - p)) sqrt(dt)`.
pub fn risk_adjusted_prob(p: f64, theta: f64, lambda: f64, dt: f64) -> Result<f64> {
    check_dt(dt)?;
    check_unit("p", p, dt)?;
    let q = p - theta * (1.0 + lambda) * (p * (1.0 - p)).sqrt() * dt.sqrt();
    check_unit("Q_lambda", q, dt)
}

/// Number of steps implied by the hedge-turnover constraint `dt = T phi^2 / B^2`,
/// rounded up.
pub fn steps_for_turnover(phi: f64, bound: f64) -> Result<usize> {
    if !(phi.is_finite() && phi > 0.0) {
        return Err(Error::invalid("phi_ht", format!("must be > 0, got {phi}")));
    }
    if !(bound.is_finite() && bound > 0.0) {
        return Err(Error::invalid("b_ht", format!("must be > 0, got {bound}")));
    }
    let n = (bound * bound / (phi * phi)).ceil();
    Ok((n as usize).max(1))
}

/// Up/down factors `1 + drift dt +- sqrt((1-p)/p), sqrt(p/(1-p)) * sigma sqrt(dt)`.
pub fn skewed_factors(drift: f64, p: f64, sigma: f64, dt: f64) -> (f64, f64) {
    let centre = 1.0 + drift * dt;
    let sv = sigma * dt.sqrt();
    (
        centre + ((1.0 - p) / p).sqrt() * sv,
        centre - (p / (1.0 - p)).sqrt() * sv,
    )
}

/// Which probability measure (and tree family) a lattice is built under.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Measure {
    /// Skewed physical tree with the log-symmetric up-probability.
    Physical,
    /// Same factors, risk-neutral probability.
    RiskNeutral,
    /// Risk-neutral tree deformed by a direction-informed trader.
    Informed { tau: f64 },
    /// Factors carry the perceived mean return `nu`; optional informed deformation.
    MeanReturn {
        nu: f64,
        side: Side,
        informed_tau: Option<f64>,
    },
    Trinomial { gamma: f64, rho_vol: f64, side: Side },
    /// Perceived discount rate `R`; the informed variant discounts at `R + C^(tau) tau`.
    Discount {
        rate: f64,
        side: Side,
        informed_tau: Option<f64>,
    },
    /// Mean-variance risk-adjusted tree with perceived mean return `gamma`.
    RiskAdjusted { gamma: f64, lambda: f64 },
    Binary { model: BinaryProbModel, side: Side },
}

impl Measure {
    pub fn name(&self) -> &'static str {
        match self {
            Measure::Physical => "physical",
            Measure::RiskNeutral => "risk_neutral",
            Measure::Informed { .. } => "informed",
            Measure::MeanReturn {
                informed_tau: Some(_),
                ..
            } => "mean_return_informed",
            Measure::MeanReturn {
                side: Side::Physical,
                ..
            } => "mean_return_physical",
            Measure::MeanReturn { .. } => "mean_return",
            Measure::Trinomial {
                side: Side::Physical,
                ..
            } => "trinomial_physical",
            Measure::Trinomial { .. } => "trinomial",
            Measure::Discount {
                informed_tau: Some(_),
                ..
            } => "discount_informed",
            Measure::Discount {
                side: Side::Physical,
                ..
            } => "discount_physical",
            Measure::Discount { .. } => "discount",
            Measure::RiskAdjusted { .. } => "risk_adjusted",
            Measure::Binary {
                side: Side::Physical,
                ..
            } => "binary_physical",
            Measure::Binary { .. } => "binary",
        }
    }

    /// Drift of the continuous-time limit, i.e. the exact step mean `1 + drift * dt`
    /// of a corrected-mode step.
    pub fn effective_drift(&self, m: &MarketParams, info: &TraderInfo) -> f64 {
        let informed = |tau: f64| m.r() - info.c_tau() * tau;
        match *self {
            Measure::Physical => m.mu(),
            Measure::RiskNeutral => m.r(),
            Measure::Informed { tau } => informed(tau),
            Measure::MeanReturn {
                informed_tau: Some(tau),
                ..
            } => informed(tau),
            Measure::MeanReturn { side, .. }
            | Measure::Trinomial { side, .. }
            | Measure::Binary { side, .. } => match side {
                Side::Physical => m.mu(),
                Side::RiskNeutral => m.r(),
            },
            Measure::Discount { rate, side, .. } => match side {
                Side::Physical => m.mu(),
                Side::RiskNeutral => rate,
            },
            Measure::RiskAdjusted { gamma, lambda } => m.r() - (gamma - m.r()) * lambda,
        }
    }

    /// Continuously compounded rate of the per-step discount factor.
    pub fn discount_rate(&self, m: &MarketParams, info: &TraderInfo) -> f64 {
        match *self {
            Measure::Discount {
                rate, informed_tau, ..
            } => rate + info.c_disc() * informed_tau.unwrap_or(0.0),
            _ => m.r(),
        }
    }
}

/// Everything needed to build a homogeneous lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatticeSpec {
    n_steps: usize,
    horizon: f64,
    measure: Measure,
    literal_mode: bool,
}

impl LatticeSpec {
    pub fn new(n_steps: usize, horizon: f64, measure: Measure, literal_mode: bool) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::invalid("n_steps", "must be >= 1"));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::invalid(
                "horizon",
                format!("must be finite and > 0, got {horizon}"),
            ));
        }
        if let Measure::MeanReturn {
            side: Side::Physical,
            informed_tau: Some(_),
            ..
        }
        | Measure::Discount {
            side: Side::Physical,
            informed_tau: Some(_),
            ..
        } = measure
        {
            return Err(Error::invalid(
                "measure",
                "the informed deformation applies to the risk-neutral side only",
            ));
        }
        Ok(Self {
            n_steps,
            horizon,
            measure,
            literal_mode,
        })
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn measure(&self) -> Measure {
        self.measure
    }
    pub fn literal_mode(&self) -> bool {
        self.literal_mode
    }
    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn with_steps(&self, n_steps: usize) -> Result<Self> {
        Self::new(n_steps, self.horizon, self.measure, self.literal_mode)
    }
}

/// A built homogeneous lattice.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lattice {
    steps: Vec<BranchDistribution>,
    dt: f64,
}

impl Lattice {
    pub fn steps(&self) -> &[BranchDistribution] {
        &self.steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn price(&self, opt: &OptionSpec) -> Result<f64> {
        price_european(&self.steps, opt)
    }
}

fn step_distribution(
    measure: Measure,
    literal: bool,
    m: &MarketParams,
    info: &TraderInfo,
    dt: f64,
) -> Result<BranchDistribution> {
    let s = m.sigma();
    let disc = (-measure.discount_rate(m, info) * dt).exp();
    let rn_step = |literal: bool| -> Result<(f64, f64, f64, f64)> {
        let p = crr_up_prob(m, dt)?;
        let q = rn_up_prob(p, sharpe(m), dt)?;
        let basis = if literal { q } else { p };
        let (u, d) = skewed_factors(m.mu(), basis, s, dt);
        Ok((p, q, u, d))
    };
    match measure {
        Measure::Physical => {
            let p = crr_up_prob(m, dt)?;
            let (u, d) = skewed_factors(m.mu(), p, s, dt);
            BranchDistribution::binomial(u, d, p, disc)
        }
        Measure::RiskNeutral => {
            let (_, q, u, d) = rn_step(literal)?;
            BranchDistribution::binomial(u, d, q, disc)
        }
        Measure::Informed { tau } => {
            let info = info.with_tau(tau)?;
            let (_, q, u, d) = rn_step(literal)?;
            let q_inf = if literal {
                informed_up_prob(q, &info, m, dt)?
            } else {
                informed_up_prob_matched(q, &info, dt, u - d)?
            };
            BranchDistribution::binomial(u, d, q_inf, disc)
        }
        Measure::MeanReturn {
            nu,
            side,
            informed_tau,
        } => {
            let mut q = mean_return_probs(m, nu, dt, side)?;
            let centre = 1.0 + nu * dt;
            let (u, d) = (centre + s * dt.sqrt(), centre - s * dt.sqrt());
            if let Some(tau) = informed_tau {
                let info = info.with_tau(tau)?;
                q = if literal {
                    informed_up_prob(q, &info, m, dt)?
                } else {
                    informed_up_prob_matched(q, &info, dt, u - d)?
                };
            }
            BranchDistribution::binomial(u, d, q, disc)
        }
        Measure::Trinomial {
            gamma,
            rho_vol,
            side,
        } => trinomial_probs(m, gamma, rho_vol, dt, side, literal),
        Measure::Discount { rate, side, .. } => {
            let q = discount_probs(m, rate, dt, side, literal)?;
            let centre = 1.0 + discount_lambda(m, rate) * dt;
            BranchDistribution::binomial(centre + s * dt.sqrt(), centre - s * dt.sqrt(), q, disc)
        }
        Measure::RiskAdjusted { gamma, lambda } => {
            let (p, theta) = if literal {
                (crr_up_prob(m, dt)?, sharpe(m))
            } else {
                let tree = m.with_mu(gamma)?;
                (crr_up_prob(&tree, dt)?, sharpe(&tree))
            };
            let q = risk_adjusted_prob(p, theta, lambda, dt)?;
            let (u, d) = skewed_factors(gamma, p, s, dt);
            BranchDistribution::binomial(u, d, q, disc)
        }
        Measure::Binary { model, side } => {
            let p = model.prob(dt)?;
            let (u, d) = skewed_factors(m.mu(), p, s, dt);
            let prob = match side {
                Side::Physical => p,
                Side::RiskNeutral => rn_up_prob(p, sharpe(m), dt)?,
            };
            BranchDistribution::binomial(u, d, prob, disc)
        }
    }
}

fn admissible_step(
    measure: Measure,
    literal: bool,
    m: &MarketParams,
    info: &TraderInfo,
    dt: f64,
) -> Result<BranchDistribution> {
    let step = step_distribution(measure, literal, m, info, dt)?;
    let allow_zero_middle = matches!(measure, Measure::Trinomial { .. });
    if let Some(margin) = step.min_interior_margin(allow_zero_middle) {
        if margin <= PROB_MARGIN {
            return Err(Error::ProbabilityOutOfRange {
                what: "branch probability",
                value: margin,
                dt,
                max_dt: None,
            });
        }
    }
    Ok(step)
}

/// Largest step size below `dt` at which the step still validates (bisection).
fn max_admissible_dt(
    measure: Measure,
    literal: bool,
    m: &MarketParams,
    info: &TraderInfo,
    dt: f64,
) -> f64 {
    let ok = |h: f64| admissible_step(measure, literal, m, info, h).is_ok();
    let mut lo = dt * 1e-12;
    if !ok(lo) {
        return 0.0;
    }
    let mut hi = dt;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    lo
}

/// Builds the homogeneous lattice for `spec`.
///
/// Rejects any step whose probabilities leave `(1e-12, 1 - 1e-12)` or whose
/// factors are not positive, reporting the maximal admissible step size.
pub fn build_lattice(spec: &LatticeSpec, m: &MarketParams, info: &TraderInfo) -> Result<Lattice> {
    let dt = spec.dt();
    let step = admissible_step(spec.measure, spec.literal_mode, m, info, dt).map_err(|e| {
        if e.is_validation() {
            return e;
        }
        Error::InadmissibleStep {
            step: 0,
            dt,
            max_dt: max_admissible_dt(spec.measure, spec.literal_mode, m, info, dt),
            reason: e.to_string(),
        }
    })?;
    Ok(Lattice {
        steps: vec![step; spec.n_steps],
        dt,
    })
}

/// Prices a European option by backward induction over `tree`.
///
/// All steps must share their branch factors (probabilities and discounts may
/// vary per step). Binomial trees use O(n) memory induction over the up-count.
/// Trinomial trees with identical steps sum the multinomial terminal law
/// directly; varying trinomial steps fall back to induction over (up, down)
/// counts, which is O(n^3).
pub fn price_european(tree: &[BranchDistribution], opt: &OptionSpec) -> Result<f64> {
    let first = tree
        .first()
        .ok_or_else(|| Error::invalid("tree", "lattice has no steps"))?;
    if let Some(step) = tree.iter().position(|b| b.factors != first.factors) {
        return Err(Error::NonRecombining { step });
    }
    match first.factors.len() {
        2 => Ok(binomial_induction(tree, opt)),
        3 if tree.iter().all(|b| b == first) => Ok(trinomial_terminal_sum(first, tree.len(), opt)),
        3 => Ok(trinomial_induction(tree, opt)),
        k => Err(Error::invalid(
            "tree",
            format!("{k}-branch steps are not supported"),
        )),
    }
}

fn binomial_induction(tree: &[BranchDistribution], opt: &OptionSpec) -> f64 {
    let n = tree.len();
    let (lu, ld) = (tree[0].factors[0].ln(), tree[0].factors[1].ln());
    let ls = opt.spot().ln();
    // values[j] holds the node with j up-moves
    let mut values: Vec<f64> = (0..=n)
        .map(|j| opt.payoff((ls + j as f64 * lu + (n - j) as f64 * ld).exp()))
        .collect();
    for (i, step) in tree.iter().enumerate().rev() {
        let (q, disc) = (step.probs[0], step.discount);
        for j in 0..=i {
            values[j] = disc * (q * values[j + 1] + (1.0 - q) * values[j]);
        }
    }
    values[0]
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

fn trinomial_terminal_sum(step: &BranchDistribution, n: usize, opt: &OptionSpec) -> f64 {
    let lf = ln_factorials(n);
    let lnf: Vec<f64> = step.factors.iter().map(|f| f.ln()).collect();
    let lnp: Vec<f64> = step.probs.iter().map(|p| p.ln()).collect();
    let ls = opt.spot().ln();
    let middle_is_empty = step.probs[1] == 0.0;
    let mut total = 0.0;
    for up in 0..=n {
        for down in 0..=(n - up) {
            let mid = n - up - down;
            if middle_is_empty && mid > 0 {
                continue;
            }
            let mut lw = lf[n] - lf[up] - lf[mid] - lf[down];
            let mut lx = ls;
            for (count, (lfac, lprob)) in [up, mid, down].into_iter().zip(lnf.iter().zip(&lnp)) {
                if count > 0 {
                    lw += count as f64 * lprob;
                    lx += count as f64 * lfac;
                }
            }
            let payoff = opt.payoff(lx.exp());
            if payoff > 0.0 {
                total += lw.exp() * payoff;
            }
        }
    }
    step.discount.powi(n as i32) * total
}

fn trinomial_induction(tree: &[BranchDistribution], opt: &OptionSpec) -> f64 {
    let n = tree.len();
    let lnf: Vec<f64> = tree[0].factors.iter().map(|f| f.ln()).collect();
    let ls = opt.spot().ln();
    // Node (up, down) at level i; middle count is i - up - down.
    let idx = |up: usize, down: usize, level: usize| up * (level + 1) + down;
    let mut values = vec![0.0; (n + 1) * (n + 1)];
    for up in 0..=n {
        for down in 0..=(n - up) {
            let mid = n - up - down;
            let lx = ls + up as f64 * lnf[0] + mid as f64 * lnf[1] + down as f64 * lnf[2];
            values[idx(up, down, n)] = opt.payoff(lx.exp());
        }
    }
    for (i, step) in tree.iter().enumerate().rev() {
        let (pu, pm, pd) = (step.probs[0], step.probs[1], step.probs[2]);
        let mut next = vec![0.0; (i + 1) * (i + 1)];
        for up in 0..=i {
            for down in 0..=(i - up) {
                next[idx(up, down, i)] = step.discount
                    * (pu * values[idx(up + 1, down, i + 1)]
                        + pm * values[idx(up, down, i + 1)]
                        + pd * values[idx(up, down + 1, i + 1)]);
            }
        }
        values = next;
    }
    values[0]
}
