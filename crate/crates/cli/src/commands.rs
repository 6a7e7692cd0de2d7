use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use infotree::calibration::{implied_info_surface, CalibrationModel, OptionQuote, PointStatus};
use infotree::closed_form::{
    black_scholes, gbs_call, lattice_counterpart, mv_price, prop1_price, prop2_price, prop3_price, prop4_price,
};
use infotree::informed_sim::{
    arbitrage_diagnostic, arbitrage_returns, default_band, expected_info_payoff, forward_payoff_dist,
    simulate_null_returns,
};
use infotree::lattice::{build_lattice, LatticeSpec, Measure, Side};
use infotree::subordination::{logstable_call, simulate_subordinated_path};
use infotree::{seeded_rng, TraderInfo};
use rand::RngCore;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{emit, fmt_f64, to_json, Num, Table};
use crate::{CliError, SimKind};

pub struct Ctx {
    pub config: RunConfig,
    pub seed: u64,
    pub model: String,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum LatticeMode {
    Physical,
    RiskNeutral,
    Informed,
    MeanReturn,
    Trinomial,
    Discount,
    RiskAdjusted,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Model {
    Prop1,
    Prop2,
    Prop3,
    Prop4,
    Mv,
    LogStable,
    Lattice(LatticeMode),
}

fn parse_model(s: &str) -> Result<Model, CliError> {
    Ok(match s {
        "prop1" => Model::Prop1,
        "prop2" => Model::Prop2,
        "prop3" => Model::Prop3,
        "prop4" => Model::Prop4,
        "mv" => Model::Mv,
        "logstable" => Model::LogStable,
        _ => {
            let mode = s.strip_prefix("lattice:").ok_or_else(|| {
                CliError::config(format!(
                    "unknown model `{s}`; expected prop1, prop2, prop3, prop4, mv, logstable or lattice:MODE"
                ))
            })?;
            Model::Lattice(match mode {
                "physical" => LatticeMode::Physical,
                "risk_neutral" => LatticeMode::RiskNeutral,
                "informed" => LatticeMode::Informed,
                "mean_return" => LatticeMode::MeanReturn,
                "trinomial" => LatticeMode::Trinomial,
                "discount" => LatticeMode::Discount,
                "risk_adjusted" => LatticeMode::RiskAdjusted,
                "binary" => LatticeMode::Binary,
                _ => {
                    return Err(CliError::config(format!(
                        "unknown lattice mode `{mode}`; expected physical, risk_neutral, informed, mean_return, \
                         trinomial, discount, risk_adjusted or binary"
                    )))
                }
            })
        }
    })
}

fn measure(mode: LatticeMode, cfg: &RunConfig, trader: &TraderInfo) -> Result<Measure, CliError> {
    let p = &cfg.perceived;
    Ok(match mode {
        LatticeMode::Physical => Measure::Physical,
        LatticeMode::RiskNeutral => Measure::RiskNeutral,
        LatticeMode::Informed => Measure::Informed { tau: trader.tau() },
        LatticeMode::MeanReturn => Measure::MeanReturn {
            nu: p.nu()?,
            side: Side::RiskNeutral,
            informed_tau: Some(trader.tau()),
        },
        LatticeMode::Trinomial => {
            p.check_trinomial(&cfg.market)?;
            Measure::Trinomial {
                gamma: p.gamma()?,
                rho_vol: p.rho_vol()?,
                side: Side::RiskNeutral,
            }
        }
        LatticeMode::Discount => Measure::Discount {
            rate: p.rate()?,
            side: Side::RiskNeutral,
            informed_tau: Some(trader.tau()),
        },
        LatticeMode::RiskAdjusted => Measure::RiskAdjusted {
            gamma: p.gamma()?,
            lambda: trader.lambda(),
        },
        LatticeMode::Binary => Measure::Binary {
            model: cfg.binary,
            side: Side::RiskNeutral,
        },
    })
}

/// The same trader without information or risk aversion.
fn uninformed(t: &TraderInfo) -> Result<TraderInfo, CliError> {
    Ok(TraderInfo::builder()
        .c_tau(t.c_tau())
        .d_tau(t.d_tau())
        .a_tau(t.a_tau())
        .b_tau(t.b_tau())
        .c_disc(t.c_disc())
        .p_success(t.p_success())
        .build()?)
}

fn lattice_spec(cfg: &RunConfig, measure: Measure, n: usize) -> Result<LatticeSpec, CliError> {
    Ok(LatticeSpec::new(n, cfg.option.tenor(), measure, cfg.literal_mode)?)
}

fn price_model(model: Model, cfg: &RunConfig, trader: &TraderInfo, seed: u64) -> Result<(f64, Option<f64>), CliError> {
    let (opt, m) = (&cfg.option, &cfg.market);
    let p = &cfg.perceived;
    let price = match model {
        Model::Prop1 => prop1_price(opt, m, trader)?,
        Model::Prop2 => prop2_price(opt, m, p.nu()?, trader)?,
        Model::Prop3 => prop3_price(opt, m, trader)?,
        Model::Prop4 => prop4_price(opt, m, p.rate()?, trader)?,
        Model::Mv => mv_price(opt, m, p.gamma()?, trader.lambda())?,
        Model::LogStable => {
            let est = logstable_call(opt, m, &cfg.clock, cfg.n_samples, seed)?;
            return Ok((est.value, Some(est.std_error)));
        }
        Model::Lattice(mode) => {
            let spec = lattice_spec(cfg, measure(mode, cfg, trader)?, cfg.n_steps)?;
            build_lattice(&spec, m, trader)?.price(opt)?
        }
    };
    Ok((price, None))
}

#[derive(Serialize)]
struct Reductions {
    bs_price: Num,
    tau0_price: Option<Num>,
}

#[derive(Serialize)]
struct PriceReport<'a> {
    command: &'static str,
    model: &'a str,
    config_hash: &'a str,
    seed: u64,
    inputs: &'a BTreeMap<String, String>,
    price: Num,
    standard_error: Option<Num>,
    reductions: Reductions,
}

pub fn price(ctx: &Ctx) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let model = parse_model(&ctx.model)?;
    let (price, se) = price_model(model, cfg, &cfg.trader, ctx.seed)?;
    let tau0 = match model {
        Model::LogStable => None,
        _ => Some(Num(price_model(model, cfg, &uninformed(&cfg.trader)?, ctx.seed)?.0)),
    };
    let report = PriceReport {
        command: "price",
        model: &ctx.model,
        config_hash: &cfg.hash,
        seed: ctx.seed,
        inputs: &cfg.entries,
        price: Num(price),
        standard_error: se.map(Num),
        reductions: Reductions {
            bs_price: Num(black_scholes(&cfg.option, &cfg.market)),
            tau0_price: tau0,
        },
    };
    emit(ctx.out.as_deref(), format!("{}\n", to_json(&report)).as_bytes())
}

fn parse_n_list(s: &str) -> Result<Vec<usize>, CliError> {
    let list: Vec<usize> = s
        .split(',')
        .map(|x| match x.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(CliError::config(format!("--n-list: `{}` is not a positive integer", x.trim()))),
        })
        .collect::<Result<_, _>>()?;
    Ok(list)
}

#[derive(Serialize)]
struct ConvergeSummary<'a> {
    command: &'static str,
    model: &'a str,
    config_hash: &'a str,
    seed: u64,
    rows: usize,
    closed_form_price: Num,
    final_abs_error: Num,
    final_averaged_error: Num,
    averaged_nonincreasing: bool,
}

pub fn converge(ctx: &Ctx, n_list: &str) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let ns = parse_n_list(n_list)?;
    let mode = match parse_model(&ctx.model)? {
        Model::Lattice(mode) => mode,
        Model::Prop1 => LatticeMode::Informed,
        Model::Prop4 => LatticeMode::Discount,
        Model::Mv => LatticeMode::RiskAdjusted,
        _ => return Err(CliError::config(format!("model `{}` has no lattice counterpart", ctx.model))),
    };
    let trader = &cfg.trader;
    let meas = measure(mode, cfg, trader)?;
    let base = lattice_spec(cfg, meas, ns[0])?;
    let closed = gbs_call(&cfg.option, &lattice_counterpart(&base, &cfg.market, trader)?);
    let price_at = |n: usize| -> Result<f64, CliError> {
        Ok(build_lattice(&base.with_steps(n)?, &cfg.market, trader)?.price(&cfg.option)?)
    };

    let mut table = Table::new(&[
        "n",
        "lattice_price",
        "closed_form_price",
        "abs_error",
        "averaged_price",
        "averaged_error",
    ]);
    let (mut last_err, mut avg_errs) = (f64::NAN, Vec::new());
    for &n in &ns {
        let p = price_at(n)?;
        let avg = 0.5 * (p + price_at(n + 1)?);
        last_err = (p - closed).abs();
        avg_errs.push((avg - closed).abs());
        table.row([
            n.to_string(),
            fmt_f64(p),
            fmt_f64(closed),
            fmt_f64(last_err),
            fmt_f64(avg),
            fmt_f64(*avg_errs.last().expect("pushed")),
        ]);
    }
    emit(ctx.out.as_deref(), &table.into_bytes())?;
    let summary = ConvergeSummary {
        command: "converge",
        model: &ctx.model,
        config_hash: &cfg.hash,
        seed: ctx.seed,
        rows: ns.len(),
        closed_form_price: Num(closed),
        final_abs_error: Num(last_err),
        final_averaged_error: Num(*avg_errs.last().expect("nonempty n-list")),
        averaged_nonincreasing: avg_errs.windows(2).all(|w| w[1] <= w[0]),
    };
    print_summary(ctx, &summary)
}

fn print_summary<T: Serialize>(ctx: &Ctx, summary: &T) -> Result<(), CliError> {
    if ctx.out.is_some() {
        emit(None, format!("{}\n", to_json(summary)).as_bytes())?;
    }
    Ok(())
}

const CHAIN_HEADER: [&str; 6] = ["strike", "maturity_years", "mid_price", "spot", "rate", "vol"];

#[derive(Debug, Serialize)]
struct RowError {
    line: u64,
    message: String,
}

fn read_chain(path: &Path) -> Result<(Vec<OptionQuote>, Vec<RowError>), CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let header = rdr
        .headers()
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
        .clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(CliError::config(format!("{}: empty chain file", path.display())));
    }
    if header.iter().ne(CHAIN_HEADER.iter().copied()) {
        return Err(CliError::config(format!(
            "{}: header must be `{}`",
            path.display(),
            CHAIN_HEADER.join(",")
        )));
    }
    let (mut quotes, mut errors) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                errors.push(RowError {
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != CHAIN_HEADER.len() {
            errors.push(RowError {
                line,
                message: format!("expected {} fields, found {}", CHAIN_HEADER.len(), rec.len()),
            });
            continue;
        }
        let mut vals = [0.0; 6];
        let mut bad = None;
        for (i, field) in rec.iter().enumerate() {
            match field.parse::<f64>() {
                Ok(v) => vals[i] = v,
                Err(_) => {
                    bad = Some(format!("{}: `{field}` is not a number", CHAIN_HEADER[i]));
                    break;
                }
            }
        }
        if let Some(message) = bad {
            errors.push(RowError { line, message });
            continue;
        }
        match OptionQuote::new(vals[0], vals[1], vals[2], vals[3], vals[4], vals[5]) {
            Ok(q) => quotes.push(q),
            Err(e) => errors.push(RowError {
                line,
                message: e.to_string(),
            }),
        }
    }
    Ok((quotes, errors))
}

#[derive(Serialize)]
struct CalibrateSummary<'a> {
    command: &'static str,
    model: &'a str,
    config_hash: &'a str,
    seed: u64,
    points: usize,
    converged: usize,
    out_of_band: usize,
    no_convergence: usize,
    invalid: usize,
    max_repricing_error: Option<Num>,
    row_errors: Vec<RowError>,
}

pub fn calibrate(ctx: &Ctx, chain: &Path) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let model = match parse_model(&ctx.model)? {
        Model::Prop1 => CalibrationModel::Prop1,
        Model::Prop3 => CalibrationModel::Prop3 {
            vol_factor: cfg.trader.vol_factor(),
        },
        Model::Prop4 => CalibrationModel::Prop4,
        _ => {
            return Err(CliError::config(format!(
                "model `{}` cannot be calibrated; use prop1, prop3 or prop4",
                ctx.model
            )))
        }
    };
    let (quotes, row_errors) = read_chain(chain)?;
    if quotes.is_empty() {
        let detail = row_errors
            .iter()
            .map(|e| format!("line {}: {}", e.line, e.message))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(CliError::config(if detail.is_empty() {
            format!("{}: chain has no rows", chain.display())
        } else {
            format!("{}: no valid rows ({detail})", chain.display())
        }));
    }
    let surface = implied_info_surface(&quotes, model);
    let mut table = Table::new(&["strike", "maturity_years", "implied_info", "status"]);
    for p in &surface.points {
        table.row([
            fmt_f64(p.strike),
            fmt_f64(p.maturity),
            p.implied_info.map(fmt_f64).unwrap_or_default(),
            p.status.as_str().to_string(),
        ]);
    }
    emit(ctx.out.as_deref(), &table.into_bytes())?;
    let count = |s: PointStatus| surface.points.iter().filter(|p| p.status == s).count();
    let summary = CalibrateSummary {
        command: "calibrate",
        model: &ctx.model,
        config_hash: &cfg.hash,
        seed: ctx.seed,
        points: surface.points.len(),
        converged: surface.converged(),
        out_of_band: count(PointStatus::OutOfBand),
        no_convergence: count(PointStatus::NoConvergence),
        invalid: count(PointStatus::Invalid),
        max_repricing_error: surface.max_repricing_error().map(Num),
        row_errors,
    };
    print_summary(ctx, &summary)?;
    if summary.converged == 0 {
        return Err(CliError::numerical("no quote converged"));
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    command: &'static str,
    kind: &'static str,
    config_hash: &'a str,
    seed: u64,
    count: usize,
    stats: BTreeMap<&'static str, Num>,
}

pub fn simulate(ctx: &Ctx, kind: SimKind, count: usize) -> Result<(), CliError> {
    let cfg = &ctx.config;
    if count == 0 {
        return Err(CliError::config("--count must be >= 1"));
    }
    let m = &cfg.market;
    let mut stats = BTreeMap::new();
    let (name, table) = match kind {
        SimKind::Paths => {
            let horizon = cfg.option.tenor();
            if horizon <= 0.0 {
                return Err(CliError::config("paths need a positive option tenor"));
            }
            let dt = horizon / cfg.n_steps as f64;
            let p = cfg.binary.prob(dt)?;
            let mut seeds = seeded_rng(ctx.seed, 0);
            let mut table = Table::new(&["path", "step", "time", "clock", "price"]);
            let mut total = 0.0;
            for i in 0..count {
                let path = simulate_subordinated_path(
                    &cfg.clock,
                    m,
                    cfg.option.spot(),
                    p,
                    horizon,
                    cfg.n_steps,
                    seeds.next_u64(),
                )?;
                for k in 0..path.prices.len() {
                    table.row([
                        i.to_string(),
                        k.to_string(),
                        fmt_f64(path.times[k]),
                        fmt_f64(path.clock[k]),
                        fmt_f64(path.prices[k]),
                    ]);
                }
                total += path.prices.last().copied().unwrap_or(f64::NAN);
            }
            stats.insert("mean_terminal_price", Num(total / count as f64));
            stats.insert("up_probability", Num(p));
            ("paths", table)
        }
        SimKind::Payoffs => {
            let dist = forward_payoff_dist(m, &cfg.trader, cfg.option.spot(), cfg.clock.base_dt())?;
            let mut rng = seeded_rng(ctx.seed, 0);
            let mut table = Table::new(&["index", "payoff"]);
            let (mut sum, mut sq) = (0.0, 0.0);
            for i in 0..count {
                let x = dist.sample(&mut rng);
                sum += x;
                sq += x * x;
                table.row([i.to_string(), fmt_f64(x)]);
            }
            let n = count as f64;
            let mean = sum / n;
            let se = if count > 1 {
                ((sq / n - mean * mean).max(0.0) / (n - 1.0)).sqrt()
            } else {
                f64::NAN
            };
            stats.insert("mean", Num(mean));
            stats.insert("standard_error", Num(se));
            stats.insert("expected", Num(expected_info_payoff(&dist)));
            ("payoffs", table)
        }
        SimKind::Diagnostic => {
            let p = cfg.diagnostic_p;
            let (null, incs) = simulate_null_returns(m, &cfg.binary, &cfg.clock, count, ctx.seed)?;
            let arb = arbitrage_returns(m, &cfg.clock, p, &incs);
            let band = match cfg.diagnostic_band {
                Some(b) => b,
                None => default_band(m, &cfg.clock, p, &incs),
            };
            let hit = arbitrage_diagnostic(&arb, &incs, m, &cfg.clock, p, Some(band))?;
            let miss = arbitrage_diagnostic(&null, &incs, m, &cfg.clock, p, Some(band))?;
            let mut table = Table::new(&["index", "clock_increment", "arbitrage_return", "null_return"]);
            for i in 0..count {
                table.row([i.to_string(), fmt_f64(incs[i]), fmt_f64(arb[i]), fmt_f64(null[i])]);
            }
            stats.insert("band", Num(band));
            stats.insert("arbitrage_fraction", Num(hit.fraction));
            stats.insert("null_fraction", Num(miss.fraction));
            stats.insert("null_band95", Num(miss.band95));
            ("diagnostic", table)
        }
    };
    emit(ctx.out.as_deref(), &table.into_bytes())?;
    print_summary(
        ctx,
        &SimulateSummary {
            command: "simulate",
            kind: name,
            config_hash: &cfg.hash,
            seed: ctx.seed,
            count,
            stats,
        },
    )
}
