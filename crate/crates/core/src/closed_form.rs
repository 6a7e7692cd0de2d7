//! Closed-form European prices built on one Black-Scholes kernel with a yield.
//!
//! Every information model maps to a [`YieldSpec`]: the yield applied to the
//! spot leg, the rate discounting the strike and the effective volatility.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{LatticeSpec, Measure};
use crate::model::{norm_cdf, MarketParams, OptionKind, OptionSpec, TraderInfo};

/// Parameters of the generalized kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct YieldSpec {
    info_yield: f64,
    disc_rate: f64,
    vol_eff: f64,
    d1_drift: Option<f64>,
}

impl YieldSpec {
    pub fn new(info_yield: f64, disc_rate: f64, vol_eff: f64) -> Result<Self> {
        if !info_yield.is_finite() {
            return Err(Error::invalid("info_yield", format!("must be finite, got {info_yield}")));
        }
        if !disc_rate.is_finite() {
            return Err(Error::invalid("disc_rate", format!("must be finite, got {disc_rate}")));
        }
        if !(vol_eff.is_finite() && vol_eff > 0.0) {
            return Err(Error::invalid("vol_eff", format!("must be finite and > 0, got {vol_eff}")));
        }
        Ok(Self {
            info_yield,
            disc_rate,
            vol_eff,
            d1_drift: None,
        })
    }

    /// Plain Black-Scholes at rate `r` and volatility `sigma`.
    pub fn black_scholes(m: &MarketParams) -> Self {
        Self {
            info_yield: 0.0,
            disc_rate: m.r(),
            vol_eff: m.sigma(),
            d1_drift: None,
        }
    }

    /// Overrides the drift used inside `d1` (normally `disc_rate - info_yield`).
    pub fn with_d1_drift(mut self, drift: f64) -> Result<Self> {
        if !drift.is_finite() {
            return Err(Error::invalid("d1_drift", format!("must be finite, got {drift}")));
        }
        self.d1_drift = Some(drift);
        Ok(self)
    }

    pub fn info_yield(&self) -> f64 {
        self.info_yield
    }
    pub fn disc_rate(&self) -> f64 {
        self.disc_rate
    }
    pub fn vol_eff(&self) -> f64 {
        self.vol_eff
    }
    pub fn d1_drift(&self) -> f64 {
        self.d1_drift.unwrap_or(self.disc_rate - self.info_yield)
    }
}

/// `e^(-q T) S N(d1) - K e^(-r_d T) N(d2)`; puts follow from parity on the same forward.
///
/// At zero tenor the intrinsic value is returned.
pub fn gbs_call(opt: &OptionSpec, y: &YieldSpec) -> f64 {
    let tenor = opt.tenor();
    let (s, k) = (opt.spot(), opt.strike());
    if tenor == 0.0 {
        return opt.payoff(s);
    }
    let spot_leg = s * (-y.info_yield * tenor).exp();
    let strike_leg = k * (-y.disc_rate * tenor).exp();
    let sd = y.vol_eff * tenor.sqrt();
    let d1 = ((s / k).ln() + (y.d1_drift() + 0.5 * y.vol_eff * y.vol_eff) * tenor) / sd;
    let d2 = d1 - sd;
    match opt.kind() {
        OptionKind::Call => spot_leg * norm_cdf(d1) - strike_leg * norm_cdf(d2),
        OptionKind::Put => strike_leg * norm_cdf(-d2) - spot_leg * norm_cdf(-d1),
    }
}

pub fn black_scholes(opt: &OptionSpec, m: &MarketParams) -> f64 {
    gbs_call(opt, &YieldSpec::black_scholes(m))
}

/// Direction information: yield `C_tau tau`.
pub fn prop1_yield(m: &MarketParams, info: &TraderInfo) -> Result<YieldSpec> {
    YieldSpec::new(info.info_yield(), m.r(), m.sigma())
}

pub fn prop1_price(opt: &OptionSpec, m: &MarketParams, info: &TraderInfo) -> Result<f64> {
    Ok(gbs_call(opt, &prop1_yield(m, info)?))
}

/// Mean-return information: yield `(C_tau tau nu - sigma^2) / 2`.
///
/// At `tau = 0` the yield is `-sigma^2 / 2`, so this does not reduce to
/// Black-Scholes for an uninformed trader.
pub fn prop2_yield(m: &MarketParams, nu: f64, info: &TraderInfo) -> Result<YieldSpec> {
    let j = 0.5 * (info.info_yield() * nu - m.sigma() * m.sigma());
    YieldSpec::new(j, m.r(), m.sigma())
}

pub fn prop2_price(opt: &OptionSpec, m: &MarketParams, nu: f64, info: &TraderInfo) -> Result<f64> {
    Ok(gbs_call(opt, &prop2_yield(m, nu, info)?))
}

/// Mean-return and volatility information: yield `D_tau tau`, volatility `A e^(-B tau) sigma`.
pub fn prop3_yield(m: &MarketParams, info: &TraderInfo) -> Result<YieldSpec> {
    if info.a_tau() <= 0.0 {
        return Err(Error::invalid("a_tau", "informed volatility needs A_tau > 0"));
    }
    YieldSpec::new(info.d_tau() * info.tau(), m.r(), info.vol_factor() * m.sigma())
}

pub fn prop3_price(opt: &OptionSpec, m: &MarketParams, info: &TraderInfo) -> Result<f64> {
    Ok(gbs_call(opt, &prop3_yield(m, info)?))
}

/// Which drift enters `d1` of the discount-information formula.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscountD1 {
    /// `R + sigma^2/2`, consistent with a forward growing at `R`.
    #[default]
    PerceivedRate,
    /// `R + C tau + sigma^2/2`, for sensitivity studies.
    InformedRate,
}

/// Discount-rate information: spot leg discounted at `C tau`, strike leg at `R + C tau`.
pub fn prop4_yield(m: &MarketParams, rate: f64, info: &TraderInfo, d1: DiscountD1) -> Result<YieldSpec> {
    let c = info.c_disc() * info.tau();
    let y = YieldSpec::new(c, rate + c, m.sigma())?;
    match d1 {
        DiscountD1::PerceivedRate => y.with_d1_drift(rate),
        DiscountD1::InformedRate => y.with_d1_drift(rate + c),
    }
}

pub fn prop4_price(opt: &OptionSpec, m: &MarketParams, rate: f64, info: &TraderInfo) -> Result<f64> {
    Ok(gbs_call(opt, &prop4_yield(m, rate, info, DiscountD1::PerceivedRate)?))
}

/// Mean-variance trader: yield `(gamma - r) lambda0`.
pub fn mv_yield(m: &MarketParams, gamma: f64, lambda0: f64) -> Result<YieldSpec> {
    if !(lambda0.is_finite() && lambda0 >= 0.0) {
        return Err(Error::invalid("lambda0", format!("must be >= 0, got {lambda0}")));
    }
    YieldSpec::new((gamma - m.r()) * lambda0, m.r(), m.sigma())
}

pub fn mv_price(opt: &OptionSpec, m: &MarketParams, gamma: f64, lambda0: f64) -> Result<f64> {
    Ok(gbs_call(opt, &mv_yield(m, gamma, lambda0)?))
}

/// The closed form a corrected-mode lattice converges to: the kernel at the
/// lattice's discount rate with yield `discount rate - effective drift`.
pub fn lattice_counterpart(spec: &LatticeSpec, m: &MarketParams, info: &TraderInfo) -> Result<YieldSpec> {
    let measure = spec.measure();
    let disc = measure.discount_rate(m, info);
    let drift = measure.effective_drift(m, info);
    let y = YieldSpec::new(disc - drift, disc, m.sigma())?;
    match measure {
        // d1 must carry the tree drift even though the strike leg discounts at R + C tau
        Measure::Discount { .. } => y.with_d1_drift(drift),
        _ => Ok(y),
    }
}

/// Delta and vega by central differences.
pub fn fd_greeks(opt: &OptionSpec, y: &YieldSpec) -> Result<(f64, f64)> {
    let hs = 1e-4 * opt.spot();
    let up = gbs_call(&opt.with_spot(opt.spot() + hs)?, y);
    let down = gbs_call(&opt.with_spot(opt.spot() - hs)?, y);
    let hv = 1e-5;
    let mut yu = *y;
    yu.vol_eff += hv;
    let mut yd = *y;
    yd.vol_eff -= hv;
    Ok((
        (up - down) / (2.0 * hs),
        (gbs_call(opt, &yu) - gbs_call(opt, &yd)) / (2.0 * hv),
    ))
}
