//! Domain types shared by every pricing route, plus the standard normal CDF.
//!
//! All types are plain immutable values. Constructors validate every invariant
//! and report the offending field by name.

use serde::Serialize;

use crate::error::{Error, Result};

fn finite(field: &'static str, x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::invalid(field, format!("must be finite, got {x}")))
    }
}

fn positive(field: &'static str, x: f64) -> Result<f64> {
    finite(field, x)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(Error::invalid(field, format!("must be > 0, got {x}")))
    }
}

fn nonnegative(field: &'static str, x: f64) -> Result<f64> {
    finite(field, x)?;
    if x >= 0.0 {
        Ok(x)
    } else {
        Err(Error::invalid(field, format!("must be >= 0, got {x}")))
    }
}

/// True dynamics of the geometric Brownian motion world.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarketParams {
    mu: f64,
    sigma: f64,
    r: f64,
}

impl MarketParams {
    pub fn new(mu: f64, sigma: f64, r: f64) -> Result<Self> {
        Ok(Self {
            mu: finite("mu", mu)?,
            sigma: positive("sigma", sigma)?,
            r: finite("r", r)?,
        })
    }

    /// Instantaneous mean return per year.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Volatility per square-root year.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Risk-free rate per year.
    pub fn r(&self) -> f64 {
        self.r
    }

    /// Copy with a different mean return.
    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        Self::new(mu, self.sigma, self.r)
    }

    /// Copy with a different risk-free rate.
    pub fn with_r(&self, r: f64) -> Result<Self> {
        Self::new(self.mu, self.sigma, r)
    }
}

/// Quantities as perceived by the market. Each is optional; the pricing routes
/// that need one report a missing value as an invalid parameter.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PerceivedParams {
    nu: Option<f64>,
    gamma: Option<f64>,
    rho_vol: Option<f64>,
    rate: Option<f64>,
}

impl PerceivedParams {
    pub fn new(
        nu: Option<f64>,
        gamma: Option<f64>,
        rho_vol: Option<f64>,
        rate: Option<f64>,
    ) -> Result<Self> {
        Ok(Self {
            nu: nu.map(|v| finite("nu", v)).transpose()?,
            gamma: gamma.map(|v| finite("gamma", v)).transpose()?,
            rho_vol: rho_vol.map(|v| positive("rho_vol", v)).transpose()?,
            rate: rate.map(|v| finite("R_rate", v)).transpose()?,
        })
    }

    pub fn nu(&self) -> Result<f64> {
        self.nu
            .ok_or_else(|| Error::invalid("nu", "perceived mean return not supplied"))
    }

    pub fn gamma(&self) -> Result<f64> {
        self.gamma
            .ok_or_else(|| Error::invalid("gamma", "perceived mean return not supplied"))
    }

    pub fn rho_vol(&self) -> Result<f64> {
        self.rho_vol
            .ok_or_else(|| Error::invalid("rho_vol", "perceived volatility not supplied"))
    }

    /// Market-perceived discount rate `R`.
    pub fn rate(&self) -> Result<f64> {
        self.rate
            .ok_or_else(|| Error::invalid("R_rate", "perceived discount rate not supplied"))
    }

    /// Checks the trinomial requirement `rho_vol >= sigma`.
    pub fn check_trinomial(&self, m: &MarketParams) -> Result<()> {
        let rho = self.rho_vol()?;
        if rho < m.sigma() {
            return Err(Error::invalid(
                "rho_vol",
                format!(
                    "must be >= sigma = {} so the middle branch probability is nonnegative, got {rho}",
                    m.sigma()
                ),
            ));
        }
        Ok(())
    }
}

/// Hedge-turnover constraint: turnover rate and its bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Turnover {
    pub phi: f64,
    pub bound: f64,
}

/// Information parameters of a trader.
///
/// `tau` may be any finite real; negative values describe a misinformed trader.
/// Large `|tau|` can push informed branch probabilities out of (0, 1) at coarse
/// step sizes, which the lattice reports at build time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraderInfo {
    tau: f64,
    c_tau: f64,
    d_tau: f64,
    a_tau: f64,
    b_tau: f64,
    c_disc: f64,
    p_success: f64,
    lambda0: f64,
    turnover: Option<Turnover>,
}

impl Default for TraderInfo {
    /// An uninformed trader: `tau = 0`, unit informed-volatility scale, coin-flip
    /// direction calls.
    fn default() -> Self {
        Self {
            tau: 0.0,
            c_tau: 0.0,
            d_tau: 0.0,
            a_tau: 1.0,
            b_tau: 0.0,
            c_disc: 0.0,
            p_success: 0.5,
            lambda0: 0.0,
            turnover: None,
        }
    }
}

impl TraderInfo {
    pub fn builder() -> TraderInfoBuilder {
        TraderInfoBuilder(Self::default())
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn c_tau(&self) -> f64 {
        self.c_tau
    }
    pub fn d_tau(&self) -> f64 {
        self.d_tau
    }
    pub fn a_tau(&self) -> f64 {
        self.a_tau
    }
    pub fn b_tau(&self) -> f64 {
        self.b_tau
    }
    pub fn c_disc(&self) -> f64 {
        self.c_disc
    }
    pub fn p_success(&self) -> f64 {
        self.p_success
    }
    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }
    pub fn turnover(&self) -> Option<Turnover> {
        self.turnover
    }

    /// Information yield `C_tau * tau` of the direction-informed trader.
    pub fn info_yield(&self) -> f64 {
        self.c_tau * self.tau
    }

    /// Informed volatility multiplier `A_tau * exp(-B_tau * tau)`.
    pub fn vol_factor(&self) -> f64 {
        self.a_tau * (-self.b_tau * self.tau).exp()
    }

    /// Mean-variance risk aversion `lambda0 + phi / B` (just `lambda0` without a turnover constraint).
    pub fn lambda(&self) -> f64 {
        match self.turnover {
            Some(t) => self.lambda0 + t.phi / t.bound,
            None => self.lambda0,
        }
    }

    /// Copy with a different information level, everything else unchanged.
    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        let mut out = *self;
        out.tau = finite("tau", tau)?;
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TraderInfoBuilder(TraderInfo);

impl TraderInfoBuilder {
    pub fn tau(mut self, v: f64) -> Self {
        self.0.tau = v;
        self
    }
    pub fn c_tau(mut self, v: f64) -> Self {
        self.0.c_tau = v;
        self
    }
    pub fn d_tau(mut self, v: f64) -> Self {
        self.0.d_tau = v;
        self
    }
    pub fn a_tau(mut self, v: f64) -> Self {
        self.0.a_tau = v;
        self
    }
    pub fn b_tau(mut self, v: f64) -> Self {
        self.0.b_tau = v;
        self
    }
    pub fn c_disc(mut self, v: f64) -> Self {
        self.0.c_disc = v;
        self
    }
    pub fn p_success(mut self, v: f64) -> Self {
        self.0.p_success = v;
        self
    }
    pub fn lambda0(mut self, v: f64) -> Self {
        self.0.lambda0 = v;
        self
    }
    pub fn turnover(mut self, phi: f64, bound: f64) -> Self {
        self.0.turnover = Some(Turnover { phi, bound });
        self
    }

    pub fn build(self) -> Result<TraderInfo> {
        let t = self.0;
        finite("tau", t.tau)?;
        nonnegative("c_tau", t.c_tau)?;
        nonnegative("d_tau", t.d_tau)?;
        nonnegative("a_tau", t.a_tau)?;
        nonnegative("b_tau", t.b_tau)?;
        nonnegative("c_disc", t.c_disc)?;
        nonnegative("lambda0", t.lambda0)?;
        finite("p_success", t.p_success)?;
        if !(0.0..=1.0).contains(&t.p_success) {
            return Err(Error::invalid(
                "p_success",
                format!("must lie in [0, 1], got {}", t.p_success),
            ));
        }
        if let Some(turn) = t.turnover {
            positive("phi_ht", turn.phi)?;
            positive("b_ht", turn.bound)?;
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Call,
    Put,
}

/// A European option on the stock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptionSpec {
    spot: f64,
    strike: f64,
    t: f64,
    maturity: f64,
    kind: OptionKind,
}

impl OptionSpec {
    pub fn new(spot: f64, strike: f64, t: f64, maturity: f64, kind: OptionKind) -> Result<Self> {
        positive("spot", spot)?;
        positive("strike", strike)?;
        finite("t", t)?;
        finite("T", maturity)?;
        if t < 0.0 {
            return Err(Error::invalid("t", format!("must be >= 0, got {t}")));
        }
        if maturity < t {
            return Err(Error::invalid(
                "T",
                format!("maturity {maturity} precedes valuation time {t}"),
            ));
        }
        Ok(Self {
            spot,
            strike,
            t,
            maturity,
            kind,
        })
    }

    /// Call valued at `t = 0` with the given time to maturity.
    pub fn call(spot: f64, strike: f64, maturity: f64) -> Result<Self> {
        Self::new(spot, strike, 0.0, maturity, OptionKind::Call)
    }

    pub fn spot(&self) -> f64 {
        self.spot
    }
    pub fn strike(&self) -> f64 {
        self.strike
    }
    pub fn t(&self) -> f64 {
        self.t
    }
    pub fn maturity(&self) -> f64 {
        self.maturity
    }
    pub fn kind(&self) -> OptionKind {
        self.kind
    }

    /// Time to maturity `T - t`.
    pub fn tenor(&self) -> f64 {
        self.maturity - self.t
    }

    pub fn payoff(&self, terminal: f64) -> f64 {
        match self.kind {
            OptionKind::Call => (terminal - self.strike).max(0.0),
            OptionKind::Put => (self.strike - terminal).max(0.0),
        }
    }

    pub fn with_spot(&self, spot: f64) -> Result<Self> {
        Self::new(spot, self.strike, self.t, self.maturity, self.kind)
    }

    pub fn with_strike(&self, strike: f64) -> Result<Self> {
        Self::new(self.spot, strike, self.t, self.maturity, self.kind)
    }
}

/// Probability model `p(dt) = g + v * sqrt(dt)` for a nonnegative return over `dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinaryProbModel {
    g: f64,
    v: f64,
}

impl BinaryProbModel {
    pub fn new(g: f64, v: f64) -> Result<Self> {
        finite("g", g)?;
        finite("v", v)?;
        if !(g > 0.0 && g < 1.0) {
            return Err(Error::invalid("g", format!("must lie in (0, 1), got {g}")));
        }
        Ok(Self { g, v })
    }

    pub fn g(&self) -> f64 {
        self.g
    }
    pub fn v(&self) -> f64 {
        self.v
    }

    /// `g + v * sqrt(dt)`, rejected when it leaves (0, 1).
    pub fn prob(&self, dt: f64) -> Result<f64> {
        let p = self.g + self.v * dt.sqrt();
        if p > 0.0 && p < 1.0 {
            Ok(p)
        } else {
            Err(Error::ProbabilityOutOfRange {
                what: "p_dt",
                value: p,
                dt,
                max_dt: None,
            })
        }
    }
}

/// Market price of risk `(mu - r) / sigma`.
pub fn sharpe(m: &MarketParams) -> f64 {
    (m.mu - m.r) / m.sigma
}

/// Market-perceived Sharpe ratio `(gamma - r) / rho_vol`.
pub fn perceived_sharpe(m: &MarketParams, perceived: &PerceivedParams) -> Result<f64> {
    Ok((perceived.gamma()? - m.r) / perceived.rho_vol()?)
}

// Rational Chebyshev approximations of W. J. Cody (1969, 1993), in the
// three-region form used by most statistical libraries. Coefficients are
// kept as published.
#[allow(clippy::excessive_precision)]
const A: [f64; 5] = [
    2.2352520354606839287,
    161.02823106855587881,
    1067.6894854603709582,
    18154.981253343561249,
    0.065682337918207449113,
];
#[allow(clippy::excessive_precision)]
const B: [f64; 4] = [
    47.20258190468824187,
    976.09855173777669322,
    10260.932208618978205,
    45507.789335026729956,
];
#[allow(clippy::excessive_precision)]
const C: [f64; 9] = [
    0.39894151208813466764,
    8.8831497943883759412,
    93.506656132177855979,
    597.27027639480026226,
    2494.5375852903726711,
    6848.1904505362823326,
    11602.651437647350124,
    9842.7148383839780218,
    1.0765576773720192317e-8,
];
#[allow(clippy::excessive_precision)]
const D: [f64; 8] = [
    22.266688044328115691,
    235.38790178262499861,
    1519.377599407554805,
    6485.558298266760755,
    18615.571640885098091,
    34900.952721145977266,
    38912.003286093271411,
    19685.429676859990727,
];
#[allow(clippy::excessive_precision)]
const P: [f64; 6] = [
    0.21589853405795699,
    0.1274011611602473639,
    0.022235277870649807,
    0.001421619193227893466,
    2.9112874951168792e-5,
    0.02307344176494017303,
];
#[allow(clippy::excessive_precision)]
const Q: [f64; 5] = [
    1.28426009614491121,
    0.468238212480865118,
    0.0659881378689285515,
    0.00378239633202758244,
    7.29751555083966205e-5,
];

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// `exp(-x^2/2)` split so the exponent keeps full relative precision.
fn gauss_tail_factor(x: f64) -> f64 {
    let xsq = (x * 16.0).trunc() / 16.0;
    let del = (x - xsq) * (x + xsq);
    (-xsq * xsq * 0.5).exp() * (-del * 0.5).exp()
}

/// Returns `(Phi(x), 1 - Phi(x))`, each with full relative accuracy.
fn norm_cdf_pair(x: f64) -> (f64, f64) {
    let y = x.abs();
    if y <= 0.674_489_75 {
        let (mut xnum, mut xden) = (0.0, 0.0);
        if y > f64::EPSILON * 0.5 {
            let xsq = x * x;
            xnum = A[4] * xsq;
            xden = xsq;
            for i in 0..3 {
                xnum = (xnum + A[i]) * xsq;
                xden = (xden + B[i]) * xsq;
            }
        }
        let temp = x * (xnum + A[3]) / (xden + B[3]);
        return (0.5 + temp, 0.5 - temp);
    }
    let lower = if y <= 32f64.sqrt() {
        let mut xnum = C[8] * y;
        let mut xden = y;
        for i in 0..7 {
            xnum = (xnum + C[i]) * y;
            xden = (xden + D[i]) * y;
        }
        gauss_tail_factor(y) * (xnum + C[7]) / (xden + D[7])
    } else if y < 50.0 {
        let xsq = 1.0 / (y * y);
        let mut xnum = P[5] * xsq;
        let mut xden = xsq;
        for i in 0..4 {
            xnum = (xnum + P[i]) * xsq;
            xden = (xden + Q[i]) * xsq;
        }
        let temp = xsq * (xnum + P[4]) / (xden + Q[4]);
        gauss_tail_factor(y) * (FRAC_1_SQRT_2PI - temp) / y
    } else {
        0.0
    };
    if x > 0.0 {
        (1.0 - lower, lower)
    } else {
        (lower, 1.0 - lower)
    }
}

/// Standard normal cumulative distribution function.
pub fn norm_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    norm_cdf_pair(x).0
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_center_and_symmetry() {
        assert_eq!(norm_cdf(0.0), 0.5);
        for i in 0..=800 {
            let x = i as f64 * 0.01;
            assert!((norm_cdf(x) + norm_cdf(-x) - 1.0).abs() <= 1e-14, "x = {x}");
        }
    }

    #[test]
    fn cdf_frozen_values() {
        // High-precision quadrature of the normal density (40 digits).
        let cases = [
            (1.96, 0.975_002_104_851_779_5),
            (-3.5, 2.326_290_790_355_250_4e-4),
            (0.3, 0.617_911_422_188_952_7),
            (-7.2, 3.010_627_981_117_437_5e-13),
        ];
        for (x, want) in cases {
            assert!((norm_cdf(x) - want).abs() <= 1e-15, "x = {x}: {}", norm_cdf(x));
        }
        // Relative accuracy deep in the lower tail.
        assert!((norm_cdf(-7.2) / 3.010_627_981_117_437_5e-13 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn cdf_monotone_and_bounded() {
        let mut prev = 0.0;
        for i in -4000..=4000 {
            let v = norm_cdf(i as f64 * 0.01);
            assert!((0.0..=1.0).contains(&v));
            assert!(v >= prev);
            prev = v;
        }
        assert_eq!(norm_cdf(f64::INFINITY), 1.0);
        assert_eq!(norm_cdf(f64::NEG_INFINITY), 0.0);
    }

    #[test]
    fn sharpe_ratios() {
        let m = MarketParams::new(0.05, 0.2, 0.05).unwrap();
        assert_eq!(sharpe(&m), 0.0);
        let m = MarketParams::new(0.1, 0.2, 0.05).unwrap();
        let th = sharpe(&m);
        assert!((th - 0.25).abs() < 1e-15);
        assert!((th * m.sigma() + m.r() - m.mu()).abs() < 1e-15);
        let perceived = PerceivedParams::new(None, Some(0.08), Some(0.3), None).unwrap();
        assert!((perceived_sharpe(&m, &perceived).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn validation_names_the_field() {
        let err = MarketParams::new(0.1, 0.0, 0.05).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { field: "sigma", .. }));
        let err = MarketParams::new(f64::NAN, 0.2, 0.05).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { field: "mu", .. }));
        let err = TraderInfo::builder().p_success(1.2).build().unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { field: "p_success", .. }));
        let err = TraderInfo::builder().c_tau(-1.0).build().unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { field: "c_tau", .. }));
        let err = TraderInfo::builder().turnover(0.0, 1.0).build().unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { field: "phi_ht", .. }));
        let err = OptionSpec::new(100.0, 100.0, 1.0, 0.5, OptionKind::Call).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { field: "T", .. }));
        let err = PerceivedParams::new(None, None, Some(-0.1), None).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { field: "rho_vol", .. }));
        let err = BinaryProbModel::new(1.0, 0.0).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { field: "g", .. }));
    }

    #[test]
    fn trader_lambda_and_vol_factor() {
        let info = TraderInfo::builder()
            .lambda0(0.2)
            .turnover(0.1, 0.5)
            .a_tau(1.0)
            .b_tau(0.5)
            .tau(0.4)
            .build()
            .unwrap();
        assert!((info.lambda() - 0.4).abs() < 1e-15);
        assert!((info.vol_factor() - (-0.2f64).exp()).abs() < 1e-15);
        assert_eq!(TraderInfo::default().lambda(), 0.0);
    }

    #[test]
    fn trinomial_requires_wide_perceived_vol() {
        let m = MarketParams::new(0.1, 0.2, 0.05).unwrap();
        let narrow = PerceivedParams::new(None, Some(0.08), Some(0.15), None).unwrap();
        assert!(narrow.check_trinomial(&m).is_err());
        let wide = PerceivedParams::new(None, Some(0.08), Some(0.25), None).unwrap();
        assert!(wide.check_trinomial(&m).is_ok());
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn cdf_symmetry_holds(x in -8.0f64..8.0) {
                prop_assert!((norm_cdf(x) + norm_cdf(-x) - 1.0).abs() <= 1e-14);
            }

            #[test]
            fn cdf_is_monotone(x in -10.0f64..10.0, h in 0.0f64..1.0) {
                prop_assert!(norm_cdf(x + h) >= norm_cdf(x));
            }
        }
    }
}
