use infotree::informed_sim::*;
use infotree::subordination::SubordinatorSpec;
use infotree::{BinaryProbModel, MarketParams, TraderInfo};
use proptest::prelude::*;

fn market() -> MarketParams {
    MarketParams::new(0.1, 0.2, 0.05).unwrap()
}

fn with_success(ps: f64) -> TraderInfo {
    TraderInfo::builder().p_success(ps).build().unwrap()
}

#[test]
fn coin_flip_trader_expects_nothing() {
    for dt in [1.0 / 252.0, 0.01, 0.25] {
        for spot in [1.0, 100.0, 3217.5] {
            let dist = forward_payoff_dist(&market(), &with_success(0.5), spot, dt).unwrap();
            assert_eq!(expected_info_payoff(&dist), 0.0);
            assert!(dist.variance() > 0.0);
        }
    }
}

#[test]
fn expected_payoff_rises_with_success_rate() {
    let vals: Vec<f64> = (0..=20)
        .map(|i| {
            let dist = forward_payoff_dist(&market(), &with_success(i as f64 / 20.0), 100.0, 0.01).unwrap();
            expected_info_payoff(&dist)
        })
        .collect();
    assert!(vals.windows(2).all(|w| w[1] > w[0]), "{vals:?}");
    assert!(vals[0] < 0.0 && vals[20] > 0.0);
}

fn portfolio_sd(pos: f64, fu: f64, fd: f64, m: &MarketParams, p: f64, dt: f64) -> f64 {
    mv_portfolio(pos, fu, fd, m, 0.08, p, dt).unwrap().variance().sqrt()
}

#[test]
fn optimal_delta_meets_the_variance_budget() {
    let m = market();
    let info = TraderInfo::builder().lambda0(0.3).turnover(0.5, 2.0).build().unwrap();
    for (fu, fd, p, dt) in [(12.0, 4.0, 0.55, 0.01), (3.0, 0.5, 0.4, 0.004), (20.0, 19.0, 0.7, 0.02)] {
        let eps = mv_epsilon(&info, fu, fd, p);
        let delta = mv_optimal_delta(fu, fd, &m, p, dt, eps).unwrap();
        // grid search for the upper position whose portfolio sd equals eps
        let hi_bound = 4.0 * delta.abs() + 100.0;
        let n = 100_000;
        let g = |x: f64| portfolio_sd(x, fu, fd, &m, p, dt) - eps;
        let mut lo = None;
        for i in (0..n).rev() {
            let x = hi_bound * i as f64 / n as f64;
            if g(x) <= 0.0 {
                lo = Some((x, x + hi_bound / n as f64));
                break;
            }
        }
        let (mut a, mut b) = lo.expect("bracket");
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if g(mid) <= 0.0 {
                a = mid
            } else {
                b = mid
            }
        }
        assert!((delta - a).abs() <= 1e-8 * delta.abs().max(1.0), "{delta} vs {a}");
        assert!((portfolio_sd(delta, fu, fd, &m, p, dt) - eps).abs() < 1e-9 * eps.max(1.0));
    }
}

#[test]
fn arbitrage_probability_limits() {
    for p in [0.1, 0.3, 0.5, 0.8, 0.97] {
        let q = arb_step_prob(p, 1e-12, 0.2, 0.01).unwrap();
        assert!((q - p).abs() < 1e-12);
        // interior exactly when the denominator exceeds |2p - 1|
        for rho in [-0.5, 0.2, 1.0, 4.0] {
            let denom = 1.0 + 2.0 * rho / 0.2 * 0.1 * (p * (1.0 - p)).sqrt();
            match arb_step_prob(p, rho, 0.2, 0.01) {
                Ok(q) => assert!(q > 0.0 && q < 1.0 && denom > (2.0 * p - 1.0).abs()),
                Err(_) => assert!(denom <= (2.0 * p - 1.0).abs(), "p={p} rho={rho}"),
            }
        }
    }
    assert!(arb_step_prob(0.5, -10.0, 0.2, 1.0).is_err());
}

fn diag_setup() -> (MarketParams, SubordinatorSpec, BinaryProbModel) {
    let m = market();
    let spec = SubordinatorSpec::stable(1.7, 0.5, 1.0 / 252.0).unwrap();
    (m, spec, BinaryProbModel::new(0.5, 0.0).unwrap())
}

#[test]
fn diagnostic_separates_arbitrage_from_null() {
    let (m, spec, model) = diag_setup();
    for seed in 0..100u64 {
        let (null, incs) = simulate_null_returns(&m, &model, &spec, 500, seed).unwrap();
        let arb = arbitrage_returns(&m, &spec, 0.5, &incs);
        let hit = arbitrage_diagnostic(&arb, &incs, &m, &spec, 0.5, None).unwrap();
        assert_eq!(hit.fraction, 1.0);
        let miss = arbitrage_diagnostic(&null, &incs, &m, &spec, 0.5, Some(hit.band)).unwrap();
        assert!(miss.fraction < 0.5, "seed {seed}: {}", miss.fraction);
    }
}

#[test]
fn zero_band_catches_nothing_on_continuous_data() {
    let (m, spec, model) = diag_setup();
    let (null, incs) = simulate_null_returns(&m, &model, &spec, 1000, 4).unwrap();
    let r = arbitrage_diagnostic(&null, &incs, &m, &spec, 0.5, Some(0.0)).unwrap();
    assert_eq!(r.fraction, 0.0);
    assert!(r.band95 > 0.0);
    assert!(arbitrage_diagnostic(&null[..10], &incs, &m, &spec, 0.5, None).is_err());
    assert!(arbitrage_diagnostic(&null, &incs, &m, &spec, 0.5, Some(-1.0)).is_err());
}

#[test]
fn null_returns_are_reproducible() {
    let (m, spec, model) = diag_setup();
    let a = simulate_null_returns(&m, &model, &spec, 300, 12).unwrap();
    assert_eq!(a, simulate_null_returns(&m, &model, &spec, 300, 12).unwrap());
    assert_ne!(a.1, simulate_null_returns(&m, &model, &spec, 300, 13).unwrap().1);
}

proptest! {
    #[test]
    fn payoff_distributions_are_distributions(ps in 0.0f64..=1.0, dt in 1e-4f64..0.1, spot in 1.0f64..1e4) {
        let dist = forward_payoff_dist(&market(), &with_success(ps), spot, dt).unwrap();
        let total: f64 = dist.outcomes().iter().map(|o| o.1).sum();
        prop_assert!((total - 1.0).abs() <= 1e-14);
        prop_assert!(dist.outcomes().iter().all(|o| (0.0..=1.0).contains(&o.1)));
    }

    #[test]
    fn arbitrage_payoffs_are_distributions(p in 0.01f64..0.99, d in 1e-5f64..0.1, rho in -1.0f64..1.0) {
        let spec = SubordinatorSpec::stable(1.7, rho, 1.0 / 252.0).unwrap();
        let dist = arb_payoff_dist(&market(), &spec, 100.0, p, d).unwrap();
        let total: f64 = dist.outcomes().iter().map(|o| o.1).sum();
        prop_assert!((total - 1.0).abs() <= 1e-14);
        // the tree part is centred: only the clock drift remains
        let mean = expected_info_payoff(&dist);
        prop_assert!((mean - 100.0 * rho * d).abs() <= 1e-12 * 100.0);
    }
}
