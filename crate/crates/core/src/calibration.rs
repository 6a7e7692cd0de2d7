//! Implied information surfaces from option quotes, and estimation of the
//! binary tree's probability model from return series.

use rayon::prelude::*;
use serde::Serialize;

use crate::closed_form::{gbs_call, YieldSpec};
use crate::error::{Error, Result};
use crate::model::OptionSpec;
use crate::rootfind::brent;

/// Price tolerance of the inversion.
pub const PRICE_TOL: f64 = 1e-10;
pub const MAX_ITER: usize = 200;
const BRACKETS: [f64; 5] = [5.0, 10.0, 20.0, 40.0, 50.0];

/// A market call quote with its externally supplied volatility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptionQuote {
    pub strike: f64,
    pub maturity: f64,
    pub mid: f64,
    pub spot: f64,
    pub rate: f64,
    pub vol: f64,
}

impl OptionQuote {
    pub fn new(strike: f64, maturity: f64, mid: f64, spot: f64, rate: f64, vol: f64) -> Result<Self> {
        let q = Self {
            strike,
            maturity,
            mid,
            spot,
            rate,
            vol,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("strike", self.strike),
            ("maturity", self.maturity),
            ("spot", self.spot),
            ("vol", self.vol),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(field, format!("must be finite and > 0, got {v}")));
            }
        }
        if !(self.mid.is_finite() && self.mid >= 0.0) {
            return Err(Error::invalid("mid", format!("must be finite and >= 0, got {}", self.mid)));
        }
        if !self.rate.is_finite() {
            return Err(Error::invalid("rate", format!("must be finite, got {}", self.rate)));
        }
        Ok(())
    }

    fn option(&self) -> Result<OptionSpec> {
        OptionSpec::call(self.spot, self.strike, self.maturity)
    }
}

/// Which closed form is inverted for the information yield `I`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum CalibrationModel {
    /// Yield `I` on the spot leg.
    Prop1,
    /// Yield `I` with the quote's volatility scaled by `vol_factor`.
    Prop3 { vol_factor: f64 },
    /// Spot leg at `I`, strike leg at `rate + I`, `d1` drift at the quote's rate.
    Prop4,
}

impl CalibrationModel {
    fn yield_spec(&self, q: &OptionQuote, info: f64) -> Result<YieldSpec> {
        match *self {
            CalibrationModel::Prop1 => YieldSpec::new(info, q.rate, q.vol),
            CalibrationModel::Prop3 { vol_factor } => {
                if !(vol_factor.is_finite() && vol_factor > 0.0) {
                    return Err(Error::invalid("vol_factor", format!("must be > 0, got {vol_factor}")));
                }
                YieldSpec::new(info, q.rate, q.vol * vol_factor)
            }
            CalibrationModel::Prop4 => YieldSpec::new(info, q.rate + info, q.vol)?.with_d1_drift(q.rate),
        }
    }
}

/// Model price of the quote's call at information yield `info`.
pub fn model_price(q: &OptionQuote, model: CalibrationModel, info: f64) -> Result<f64> {
    Ok(gbs_call(&q.option()?, &model.yield_spec(q, info)?))
}

/// Inverts `model` for the information yield reproducing `q.mid`.
///
/// Searches `[-5, 5]` first and widens the bracket geometrically up to
/// `[-50, 50]`; quotes outside the prices attainable there are out of band.
pub fn implied_info_point(q: &OptionQuote, model: CalibrationModel) -> Result<f64> {
    q.validate()?;
    let opt = q.option()?;
    model.yield_spec(q, 0.0)?;
    let price = |i: f64| gbs_call(&opt, &model.yield_spec(q, i).expect("validated yield"));
    let mut band = (0.0, 0.0);
    for half in BRACKETS {
        let (high, low) = (price(-half), price(half));
        band = (low, high);
        if low < q.mid && q.mid < high {
            let root = brent(|i| price(i) - q.mid, -half, half, PRICE_TOL, MAX_ITER)?;
            return Ok(root.x);
        }
    }
    Err(Error::OutOfBand {
        mid: q.mid,
        low: band.0,
        high: band.1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Converged,
    OutOfBand,
    NoConvergence,
    Invalid,
}

impl PointStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            PointStatus::Converged => "converged",
            PointStatus::OutOfBand => "out_of_band",
            PointStatus::NoConvergence => "no_convergence",
            PointStatus::Invalid => "invalid",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfacePoint {
    pub strike: f64,
    pub maturity: f64,
    pub implied_info: Option<f64>,
    pub status: PointStatus,
    /// Absolute difference between the re-priced model and the quote.
    pub repricing_error: Option<f64>,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfoSurface {
    pub points: Vec<SurfacePoint>,
}

impl InfoSurface {
    pub fn converged(&self) -> usize {
        self.points
            .iter()
            .filter(|p| p.status == PointStatus::Converged)
            .count()
    }

    pub fn max_repricing_error(&self) -> Option<f64> {
        self.points
            .iter()
            .filter_map(|p| p.repricing_error)
            .fold(None, |acc, e| Some(acc.map_or(e, |a: f64| a.max(e))))
    }
}

fn invert_one(q: &OptionQuote, model: CalibrationModel) -> SurfacePoint {
    let mut point = SurfacePoint {
        strike: q.strike,
        maturity: q.maturity,
        implied_info: None,
        status: PointStatus::Converged,
        repricing_error: None,
        message: None,
    };
    match implied_info_point(q, model) {
        Ok(i) => {
            point.implied_info = Some(i);
            point.repricing_error = model_price(q, model, i).ok().map(|p| (p - q.mid).abs());
        }
        Err(e) => {
            point.status = match e {
                Error::OutOfBand { .. } => PointStatus::OutOfBand,
                Error::NoConvergence { .. } => PointStatus::NoConvergence,
                _ => PointStatus::Invalid,
            };
            point.message = Some(e.to_string());
        }
    }
    point
}

/// Inverts every quote independently; failures are kept with their status.
/// Points are ordered by strike, then maturity.
pub fn implied_info_surface(quotes: &[OptionQuote], model: CalibrationModel) -> InfoSurface {
    let mut points: Vec<SurfacePoint> = quotes.par_iter().map(|q| invert_one(q, model)).collect();
    points.sort_by(|a, b| {
        a.strike
            .total_cmp(&b.strike)
            .then(a.maturity.total_cmp(&b.maturity))
    });
    InfoSurface { points }
}

/// Estimates of the binary tree's parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinaryEstimate {
    pub mu: f64,
    pub sigma: f64,
    pub g: f64,
    pub v: f64,
    pub g_se: f64,
    pub v_se: f64,
}

/// Minimum number of observations per sampling interval.
pub const MIN_OBS_PER_INTERVAL: usize = 10;

/// Estimates `mu`, `sigma` from log-return moments at the finest interval and
/// `(g, v)` in `P(return >= 0) = g + v sqrt(dt)` by weighted least squares of
/// the per-interval nonnegative-return frequencies against `sqrt(dt)`.
///
/// Weights are the inverse binomial variances `n / (f (1 - f))`; the reported
/// standard errors follow from those weights.
pub fn estimate_binary_params(log_returns: &[f64], dts: &[f64]) -> Result<BinaryEstimate> {
    if log_returns.len() != dts.len() {
        return Err(Error::LengthMismatch {
            left: log_returns.len(),
            right: dts.len(),
        });
    }
    if log_returns.iter().chain(dts).any(|x| !x.is_finite()) {
        return Err(Error::invalid("returns", "all returns and intervals must be finite"));
    }
    if dts.iter().any(|d| *d <= 0.0) {
        return Err(Error::invalid("dts", "sampling intervals must be > 0"));
    }
    // groups keyed by the exact interval value, in increasing order
    let mut keys: Vec<f64> = dts.to_vec();
    keys.sort_by(f64::total_cmp);
    keys.dedup();
    if keys.len() < 2 {
        return Err(Error::DegenerateDesign(
            "need at least two distinct sampling intervals".into(),
        ));
    }
    let groups: Vec<Vec<f64>> = keys
        .iter()
        .map(|k| {
            log_returns
                .iter()
                .zip(dts)
                .filter(|(_, d)| *d == k)
                .map(|(x, _)| *x)
                .collect()
        })
        .collect();
    if let Some((k, g)) = keys.iter().zip(&groups).find(|(_, g)| g.len() < MIN_OBS_PER_INTERVAL) {
        return Err(Error::InsufficientData(format!(
            "interval {k} has {} observations, need {MIN_OBS_PER_INTERVAL}",
            g.len()
        )));
    }

    let finest = &groups[0];
    let dt0 = keys[0];
    let n0 = finest.len() as f64;
    let mean = finest.iter().sum::<f64>() / n0;
    let var = finest.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n0 - 1.0);
    if finest.iter().all(|x| *x == finest[0]) || var <= 0.0 {
        return Err(Error::DegenerateDesign("log-returns have zero variance".into()));
    }
    let sigma = (var / dt0).sqrt();
    let mu = mean / dt0 + 0.5 * sigma * sigma;

    let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (k, g) in keys.iter().zip(&groups) {
        let n = g.len() as f64;
        let f = g.iter().filter(|x| **x >= 0.0).count() as f64 / n;
        let w = n / (f * (1.0 - f)).max(0.25 / n);
        let x = k.sqrt();
        s0 += w;
        s1 += w * x;
        s2 += w * x * x;
        t0 += w * f;
        t1 += w * x * f;
    }
    let det = s0 * s2 - s1 * s1;
    if det <= 1e-12 * s0 * s2 {
        return Err(Error::DegenerateDesign("sampling intervals are too close together".into()));
    }
    Ok(BinaryEstimate {
        mu,
        sigma,
        g: (s2 * t0 - s1 * t1) / det,
        v: (s0 * t1 - s1 * t0) / det,
        g_se: (s2 / det).sqrt(),
        v_se: (s0 / det).sqrt(),
    })
}
