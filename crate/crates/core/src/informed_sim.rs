//! Payoffs of informed traders: forward contracts entered on a direction
//! call, the mean-variance hedge under a turnover constraint, and arbitrage on
//! a random clock together with a test for arbitrage-like return series.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{build_lattice, crr_up_prob, skewed_factors, LatticeSpec, Measure, Side};
use crate::model::{BinaryProbModel, MarketParams, TraderInfo};
use crate::stats::{quantile_upper, robust_sd, stream_rng};
use crate::subordination::SubordinatorSpec;

/// Finite distribution of payoffs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PayoffDistribution {
    outcomes: Vec<(f64, f64)>,
}

impl PayoffDistribution {
    /// `outcomes` are `(payoff, probability)` pairs.
    pub fn new(outcomes: Vec<(f64, f64)>) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::invalid("outcomes", "need at least one outcome"));
        }
        if outcomes.iter().any(|(x, p)| !x.is_finite() || !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid(
                "outcomes",
                "payoffs must be finite and probabilities in [0, 1]",
            ));
        }
        let total: f64 = outcomes.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-14 {
            return Err(Error::invalid("outcomes", format!("probabilities sum to {total}")));
        }
        Ok(Self { outcomes })
    }

    pub fn outcomes(&self) -> &[(f64, f64)] {
        &self.outcomes
    }

    pub fn variance(&self) -> f64 {
        let mean = expected_info_payoff(self);
        self.outcomes.iter().map(|(x, p)| p * (x - mean) * (x - mean)).sum()
    }

    /// Draws one payoff by inverting the cumulative probabilities.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (x, p) in &self.outcomes {
            acc += p;
            if u < acc {
                return *x;
            }
        }
        self.outcomes[self.outcomes.len() - 1].0
    }
}

/// Payoff of one forward contract entered on the trader's direction call.
///
/// The four outcomes are (up, called right), (up, called wrong), (down, called
/// right), (down, called wrong); the forward price is `spot e^(r dt)`.
pub fn forward_payoff_dist(
    m: &MarketParams,
    info: &TraderInfo,
    spot: f64,
    dt: f64,
) -> Result<PayoffDistribution> {
    if !(spot.is_finite() && spot > 0.0) {
        return Err(Error::invalid("spot", format!("must be > 0, got {spot}")));
    }
    let p = crr_up_prob(m, dt)?;
    let (u, d) = skewed_factors(m.mu(), p, m.sigma(), dt);
    let fwd = (m.r() * dt).exp();
    let ps = info.p_success();
    let up_gain = spot * (u - fwd);
    let down_gain = spot * (fwd - d);
    PayoffDistribution::new(vec![
        (up_gain, p * ps),
        (-up_gain, (1.0 - ps) * p),
        (down_gain, ps * (1.0 - p)),
        (-down_gain, (1.0 - ps) * (1.0 - p)),
    ])
}

/// Probability-weighted mean, summed in outcome order.
pub fn expected_info_payoff(dist: &PayoffDistribution) -> f64 {
    dist.outcomes.iter().fold(0.0, |acc, (x, p)| acc + x * p)
}

/// Risk budget `lambda (f_u - f_d) sqrt(p (1 - p))` of the mean-variance trader.
pub fn mv_epsilon(info: &TraderInfo, f_up: f64, f_down: f64, p: f64) -> f64 {
    info.lambda() * (f_up - f_down) * (p * (1.0 - p)).sqrt()
}

/// Optimal stock position (in currency, delta times `y`) of the mean-variance
/// hedger: `eps / (sigma sqrt(dt)) + (f_u - f_d) sqrt(p (1 - p)) / (sigma sqrt(dt))`.
///
/// At this position the hedged portfolio's variance equals `eps^2`.
pub fn mv_optimal_delta(
    f_up: f64,
    f_down: f64,
    m: &MarketParams,
    p: f64,
    dt: f64,
    epsilon: f64,
) -> Result<f64> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("dt", format!("must be > 0, got {dt}")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid("p", format!("must lie in (0, 1), got {p}")));
    }
    let sv = m.sigma() * dt.sqrt();
    Ok(epsilon / sv + (f_up - f_down) * (p * (1.0 - p)).sqrt() / sv)
}

/// Hedged portfolio `position * factor - f` with factors `1 + gamma dt +- ...`.
pub fn mv_portfolio(
    position: f64,
    f_up: f64,
    f_down: f64,
    m: &MarketParams,
    gamma: f64,
    p: f64,
    dt: f64,
) -> Result<PayoffDistribution> {
    let (u, d) = skewed_factors(gamma, p, m.sigma(), dt);
    PayoffDistribution::new(vec![(position * u - f_up, p), (position * d - f_down, 1.0 - p)])
}

/// Payoff of a forward entered with perfect direction knowledge on a random clock:
/// `spot (rho D +- weight * sigma sqrt(D))` with probabilities `(p, 1 - p)`.
pub fn arb_payoff_dist(
    m: &MarketParams,
    spec: &SubordinatorSpec,
    spot: f64,
    p: f64,
    clock_increment: f64,
) -> Result<PayoffDistribution> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid("p", format!("must lie in (0, 1), got {p}")));
    }
    if !(clock_increment.is_finite() && clock_increment > 0.0) {
        return Err(Error::invalid("clock_increment", format!("must be > 0, got {clock_increment}")));
    }
    let base = spec.rho() * clock_increment;
    let sv = m.sigma() * clock_increment.sqrt();
    PayoffDistribution::new(vec![
        (spot * (base + ((1.0 - p) / p).sqrt() * sv), p),
        (spot * (base - (p / (1.0 - p)).sqrt() * sv), 1.0 - p),
    ])
}

/// Arbitrage probability `1/2 + (p - 1/2) / (1 + (2 rho / sigma) sqrt(D) sqrt(p (1 - p)))`.
pub fn arb_step_prob(p: f64, rho: f64, sigma: f64, clock_increment: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid("p", format!("must lie in (0, 1), got {p}")));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid("sigma", format!("must be > 0, got {sigma}")));
    }
    if !(clock_increment.is_finite() && clock_increment > 0.0) {
        return Err(Error::invalid("clock_increment", format!("must be > 0, got {clock_increment}")));
    }
    let denom = 1.0 + 2.0 * rho / sigma * clock_increment.sqrt() * (p * (1.0 - p)).sqrt();
    if denom <= 0.0 {
        return Err(Error::ProbabilityOutOfRange {
            what: "arbitrage denominator",
            value: denom,
            dt: clock_increment,
            max_dt: None,
        });
    }
    let q = 0.5 + (p - 0.5) / denom;
    if q > 0.0 && q < 1.0 {
        Ok(q)
    } else {
        Err(Error::ProbabilityOutOfRange {
            what: "q_a",
            value: q,
            dt: clock_increment,
            max_dt: None,
        })
    }
}

/// Outcome of [`arbitrage_diagnostic`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticReport {
    /// Share of observations within `band` of the arbitrage return.
    pub fraction: f64,
    pub band: f64,
    /// Smallest band capturing at least 95% of observations.
    pub band95: f64,
    pub n: usize,
}

/// Arbitrage log-return `r dt + 2 rho p D` for one clock increment `D`, with `dt = spec.base_dt()`.
pub fn arbitrage_return(m: &MarketParams, spec: &SubordinatorSpec, p: f64, clock_increment: f64) -> f64 {
    m.r() * spec.base_dt() + 2.0 * spec.rho() * p * clock_increment
}

/// Default band: three robust standard deviations of the arbitrage return over the clock sample.
pub fn default_band(m: &MarketParams, spec: &SubordinatorSpec, p: f64, clock_increments: &[f64]) -> f64 {
    let predicted: Vec<f64> = clock_increments
        .iter()
        .map(|d| arbitrage_return(m, spec, p, *d))
        .collect();
    3.0 * robust_sd(&predicted)
}

/// Share of log-returns lying within `band` of `r dt + 2 rho p D_k`.
///
/// Without a band the default of [`default_band`] is used.
pub fn arbitrage_diagnostic(
    log_returns: &[f64],
    clock_increments: &[f64],
    m: &MarketParams,
    spec: &SubordinatorSpec,
    p: f64,
    band: Option<f64>,
) -> Result<DiagnosticReport> {
    if log_returns.len() != clock_increments.len() {
        return Err(Error::LengthMismatch {
            left: log_returns.len(),
            right: clock_increments.len(),
        });
    }
    if log_returns.is_empty() {
        return Err(Error::InsufficientData("no observations".into()));
    }
    let band = match band {
        Some(b) if b.is_finite() && b >= 0.0 => b,
        Some(b) => return Err(Error::invalid("band", format!("must be >= 0, got {b}"))),
        None => default_band(m, spec, p, clock_increments),
    };
    let dev: Vec<f64> = log_returns
        .iter()
        .zip(clock_increments)
        .map(|(x, d)| (x - arbitrage_return(m, spec, p, *d)).abs())
        .collect();
    let hits = dev.iter().filter(|e| **e <= band).count();
    Ok(DiagnosticReport {
        fraction: hits as f64 / dev.len() as f64,
        band,
        band95: quantile_upper(&dev, 0.95),
        n: dev.len(),
    })
}

/// Log-returns of the risk-neutral binary tree with `p = g + v sqrt(dt)`, `dt = spec.base_dt()`,
/// paired with clock increments drawn independently from `spec`. This is the
/// no-arbitrage null for [`arbitrage_diagnostic`].
pub fn simulate_null_returns(
    m: &MarketParams,
    model: &BinaryProbModel,
    spec: &SubordinatorSpec,
    count: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let dt = spec.base_dt();
    let lattice_spec = LatticeSpec::new(
        1,
        dt,
        Measure::Binary {
            model: *model,
            side: Side::RiskNeutral,
        },
        false,
    )?;
    let lattice = build_lattice(&lattice_spec, m, &TraderInfo::default())?;
    let step = &lattice.steps()[0];
    let (lu, ld, q) = (step.factors()[0].ln(), step.factors()[1].ln(), step.probs()[0]);
    let mut rng = stream_rng(seed, 0);
    let mut returns = Vec::with_capacity(count);
    let mut increments = Vec::with_capacity(count);
    for _ in 0..count {
        increments.push(spec.sample_increment(m, dt, &mut rng));
        returns.push(if rng.random::<f64>() < q { lu } else { ld });
    }
    Ok((returns, increments))
}

/// Log-returns that follow the arbitrage relation exactly for the given increments.
pub fn arbitrage_returns(m: &MarketParams, spec: &SubordinatorSpec, p: f64, clock_increments: &[f64]) -> Vec<f64> {
    clock_increments
        .iter()
        .map(|d| arbitrage_return(m, spec, p, *d))
        .collect()
}
