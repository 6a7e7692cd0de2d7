//! Flat `key = value` run configuration.
//!
//! ```text
//! # market
//! market.mu = 0.1
//! market.sigma = 0.2
//! market.r = 0.05
//! trader.c_tau = 0.02
//! trader.tau = 1
//! option.spot = 100
//! option.strike = 100
//! option.maturity = 1
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Each key may appear
//! once; unknown keys are rejected.

use std::collections::BTreeMap;

use infotree::subordination::{ClockKind, MixtureForm, ScaleForm, SubordinatorSpec};
use infotree::{BinaryProbModel, MarketParams, OptionKind, OptionSpec, PerceivedParams, TraderInfo};
use sha2::{Digest, Sha256};

use crate::CliError;

const KEYS: &[&str] = &[
    "market.mu",
    "market.sigma",
    "market.r",
    "perceived.nu",
    "perceived.gamma",
    "perceived.rho_vol",
    "perceived.rate",
    "trader.tau",
    "trader.c_tau",
    "trader.d_tau",
    "trader.a_tau",
    "trader.b_tau",
    "trader.c_disc",
    "trader.p_success",
    "trader.lambda0",
    "trader.turnover_phi",
    "trader.turnover_bound",
    "option.spot",
    "option.strike",
    "option.t",
    "option.maturity",
    "option.kind",
    "lattice.n_steps",
    "lattice.literal_mode",
    "clock.kind",
    "clock.alpha",
    "clock.rho",
    "clock.base_dt",
    "clock.increments",
    "clock.scale_form",
    "clock.mixture_form",
    "clock.absorb",
    "mc.n_samples",
    "binary.g",
    "binary.v",
    "diagnostic.p",
    "diagnostic.band",
    "seed",
];

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub market: MarketParams,
    pub perceived: PerceivedParams,
    pub trader: TraderInfo,
    pub option: OptionSpec,
    pub n_steps: usize,
    pub literal_mode: bool,
    pub clock: SubordinatorSpec,
    pub n_samples: usize,
    pub binary: BinaryProbModel,
    pub diagnostic_p: f64,
    pub diagnostic_band: Option<f64>,
    pub seed: u64,
    /// Normalized entries, as echoed in reports.
    pub entries: BTreeMap<String, String>,
    /// SHA-256 of the normalized entries.
    pub hash: String,
}

fn parse_entries(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let lineno = i + 1;
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("line {lineno}: expected `key = value`")))?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(CliError::config(format!("line {lineno}: unknown key `{key}`")));
        }
        if value.is_empty() {
            return Err(CliError::config(format!("line {lineno}: empty value for `{key}`")));
        }
        if out.insert(key.to_string(), value.to_string()).is_some() {
            return Err(CliError::config(format!("line {lineno}: duplicate key `{key}`")));
        }
    }
    Ok(out)
}

struct Entries<'a>(&'a BTreeMap<String, String>);

impl Entries<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn f64_opt(&self, key: &str) -> Result<Option<f64>, CliError> {
        self.raw(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| CliError::config(format!("`{key}`: `{v}` is not a number")))
            })
            .transpose()
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        Ok(self.f64_opt(key)?.unwrap_or(default))
    }

    fn f64_req(&self, key: &str) -> Result<f64, CliError> {
        self.f64_opt(key)?
            .ok_or_else(|| CliError::config(format!("missing required key `{key}`")))
    }

    fn u64_or(&self, key: &str, default: u64) -> Result<u64, CliError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| CliError::config(format!("`{key}`: `{v}` is not a nonnegative integer"))),
        }
    }

    fn bool_or(&self, key: &str, default: bool) -> Result<bool, CliError> {
        match self.raw(key) {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(v) => Err(CliError::config(format!("`{key}`: expected true or false, got `{v}`"))),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let map = parse_entries(text)?;
        let e = Entries(&map);

        let market = MarketParams::new(e.f64_req("market.mu")?, e.f64_req("market.sigma")?, e.f64_req("market.r")?)?;
        let perceived = PerceivedParams::new(
            e.f64_opt("perceived.nu")?,
            e.f64_opt("perceived.gamma")?,
            e.f64_opt("perceived.rho_vol")?,
            e.f64_opt("perceived.rate")?,
        )?;

        let mut tb = TraderInfo::builder()
            .tau(e.f64_or("trader.tau", 0.0)?)
            .c_tau(e.f64_or("trader.c_tau", 0.0)?)
            .d_tau(e.f64_or("trader.d_tau", 0.0)?)
            .a_tau(e.f64_or("trader.a_tau", 1.0)?)
            .b_tau(e.f64_or("trader.b_tau", 0.0)?)
            .c_disc(e.f64_or("trader.c_disc", 0.0)?)
            .p_success(e.f64_or("trader.p_success", 0.5)?)
            .lambda0(e.f64_or("trader.lambda0", 0.0)?);
        match (e.f64_opt("trader.turnover_phi")?, e.f64_opt("trader.turnover_bound")?) {
            (Some(phi), Some(bound)) => tb = tb.turnover(phi, bound),
            (None, None) => {}
            _ => {
                return Err(CliError::config(
                    "trader.turnover_phi and trader.turnover_bound must be given together",
                ))
            }
        }
        let trader = tb.build()?;

        let kind = match e.raw("option.kind").unwrap_or("call") {
            "call" => OptionKind::Call,
            "put" => OptionKind::Put,
            v => return Err(CliError::config(format!("`option.kind`: expected call or put, got `{v}`"))),
        };
        let option = OptionSpec::new(
            e.f64_req("option.spot")?,
            e.f64_req("option.strike")?,
            e.f64_or("option.t", 0.0)?,
            e.f64_req("option.maturity")?,
            kind,
        )?;

        let n_steps = e.u64_or("lattice.n_steps", 1024)? as usize;
        let literal_mode = e.bool_or("lattice.literal_mode", false)?;

        let rho = e.f64_or("clock.rho", 0.0)?;
        let base_dt = e.f64_or("clock.base_dt", 1.0 / 252.0)?;
        let clock_kind = match e.raw("clock.kind").unwrap_or("deterministic") {
            "deterministic" => ClockKind::Deterministic,
            "stable" => ClockKind::Stable {
                alpha: e.f64_req("clock.alpha")?,
            },
            "empirical" => {
                let list = e
                    .raw("clock.increments")
                    .ok_or_else(|| CliError::config("empirical clock needs `clock.increments`"))?;
                let increments = list
                    .split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<f64>()
                            .map_err(|_| CliError::config(format!("`clock.increments`: `{}` is not a number", s.trim())))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                ClockKind::Empirical { increments }
            }
            v => {
                return Err(CliError::config(format!(
                    "`clock.kind`: expected deterministic, stable or empirical, got `{v}`"
                )))
            }
        };
        let scale_form = match e.raw("clock.scale_form").unwrap_or("linear") {
            "linear" => ScaleForm::Linear,
            "grouped" => ScaleForm::Grouped,
            v => return Err(CliError::config(format!("`clock.scale_form`: expected linear or grouped, got `{v}`"))),
        };
        let mixture_form = match e.raw("clock.mixture_form").unwrap_or("two_sided") {
            "two_sided" => MixtureForm::TwoSided,
            "one_sided" => MixtureForm::OneSided,
            v => {
                return Err(CliError::config(format!(
                    "`clock.mixture_form`: expected two_sided or one_sided, got `{v}`"
                )))
            }
        };
        let clock = SubordinatorSpec::new(clock_kind, rho, base_dt)?
            .with_scale_form(scale_form)
            .with_mixture_form(mixture_form)
            .with_absorption(e.bool_or("clock.absorb", false)?);

        let n_samples = e.u64_or("mc.n_samples", 100_000)? as usize;
        if n_samples == 0 {
            return Err(CliError::config("`mc.n_samples` must be >= 1"));
        }
        let binary = BinaryProbModel::new(e.f64_or("binary.g", 0.5)?, e.f64_or("binary.v", 0.0)?)?;
        let diagnostic_p = e.f64_or("diagnostic.p", 0.5)?;
        let diagnostic_band = e.f64_opt("diagnostic.band")?;
        let seed = e.u64_or("seed", 0)?;

        let mut hasher = Sha256::new();
        for (k, v) in &map {
            hasher.update(k.as_bytes());
            hasher.update(b"=");
            hasher.update(v.as_bytes());
            hasher.update(b"\n");
        }
        let hash = hex::encode(hasher.finalize());

        Ok(RunConfig {
            market,
            perceived,
            trader,
            option,
            n_steps,
            literal_mode,
            clock,
            n_samples,
            binary,
            diagnostic_p,
            diagnostic_band,
            seed,
            entries: map,
            hash,
        })
    }
}
