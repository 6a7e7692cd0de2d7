mod common;

use infotree::closed_form::{black_scholes, gbs_call, lattice_counterpart, prop1_price};
use infotree::lattice::*;
use infotree::{sharpe, BinaryProbModel, Error, MarketParams, OptionSpec, TraderInfo};
use proptest::prelude::*;

fn market() -> MarketParams {
    MarketParams::new(0.1, 0.2, 0.05).unwrap()
}

fn info() -> TraderInfo {
    TraderInfo::builder()
        .c_tau(0.02)
        .tau(1.0)
        .c_disc(0.01)
        .lambda0(0.2)
        .build()
        .unwrap()
}

fn corrected_modes() -> Vec<Measure> {
    vec![
        Measure::RiskNeutral,
        Measure::Informed { tau: 1.0 },
        Measure::Informed { tau: -0.7 },
        Measure::MeanReturn {
            nu: 0.07,
            side: Side::RiskNeutral,
            informed_tau: None,
        },
        Measure::MeanReturn {
            nu: 0.07,
            side: Side::RiskNeutral,
            informed_tau: Some(0.5),
        },
        Measure::Trinomial {
            gamma: 0.08,
            rho_vol: 0.25,
            side: Side::RiskNeutral,
        },
        Measure::Discount {
            rate: 0.06,
            side: Side::RiskNeutral,
            informed_tau: None,
        },
        Measure::Discount {
            rate: 0.06,
            side: Side::RiskNeutral,
            informed_tau: Some(1.0),
        },
        Measure::RiskAdjusted {
            gamma: 0.08,
            lambda: 0.2,
        },
        Measure::Binary {
            model: BinaryProbModel::new(0.5, 0.1).unwrap(),
            side: Side::RiskNeutral,
        },
    ]
}

fn step(measure: Measure, n: usize, literal: bool, m: &MarketParams, info: &TraderInfo) -> BranchDistribution {
    let spec = LatticeSpec::new(n, 1.0, measure, literal).unwrap();
    build_lattice(&spec, m, info).unwrap().steps()[0].clone()
}

#[test]
fn corrected_steps_are_martingales() {
    let (m, info) = (market(), info());
    for measure in corrected_modes() {
        for n in [4usize, 50, 365, 4096] {
            let b = step(measure, n, false, &m, &info);
            let dt = 1.0 / n as f64;
            let want = 1.0 + measure.effective_drift(&m, &info) * dt;
            let (mean, _) = step_moments(&b);
            assert!((mean - want).abs() <= 1e-13, "{measure:?} n={n}: {mean} vs {want}");
        }
    }
}

#[test]
fn literal_trinomial_breaks_the_martingale() {
    let m = market();
    let meas = Measure::Trinomial {
        gamma: 0.08,
        rho_vol: 0.2,
        side: Side::RiskNeutral,
    };
    let dt = 1.0 / 100.0;
    let (mean, _) = step_moments(&step(meas, 100, true, &m, &TraderInfo::default()));
    assert!((mean - (1.0 + (2.0 * 0.05 - 0.08) * dt)).abs() < 1e-15);
    assert!((mean - (1.0 + 0.05 * dt)).abs() > 1e-5);
}

#[test]
fn literal_risk_neutral_tree_has_physical_mean() {
    let m = market();
    let b = step(Measure::RiskNeutral, 100, true, &m, &TraderInfo::default());
    let (mean, _) = step_moments(&b);
    assert!((mean - (1.0 + 0.1 * 0.01)).abs() < 1e-14);
}

#[test]
fn physical_step_matches_continuous_moments() {
    let m = market();
    for n in [10usize, 100, 1000] {
        let dt = 1.0 / n as f64;
        let b = step(Measure::Physical, n, false, &m, &TraderInfo::default());
        let (mean, var) = step_moments(&b);
        assert!((mean - (1.0 + 0.1 * dt)).abs() < 1e-15);
        assert!((var - 0.04 * dt).abs() < 1e-15);
    }
}

#[test]
fn corrected_trinomial_matches_variance_to_leading_order() {
    let m = market();
    for side in [Side::Physical, Side::RiskNeutral] {
        let meas = Measure::Trinomial {
            gamma: 0.08,
            rho_vol: 0.3,
            side,
        };
        let dt = 1e-3;
        let (_, var) = step_moments(&step(meas, 1000, false, &m, &TraderInfo::default()));
        assert!((var - 0.04 * dt).abs() < 1e-6 * dt, "{var}");
    }
}

#[test]
fn measure_switches() {
    let m = market();
    let info = TraderInfo::builder().c_tau(0.3).build().unwrap();
    let opt = OptionSpec::call(100.0, 105.0, 1.0).unwrap();
    let price = |measure: Measure| {
        let spec = LatticeSpec::new(4096, 1.0, measure, false).unwrap();
        build_lattice(&spec, &m, &info).unwrap().price(&opt).unwrap()
    };
    let rn = price(Measure::RiskNeutral);
    assert_eq!(rn, price(Measure::Informed { tau: 0.0 }));
    // the risk-adjusted tree with gamma = mu and lambda = 0 is the risk-neutral tree
    assert_eq!(
        rn,
        price(Measure::RiskAdjusted {
            gamma: m.mu(),
            lambda: 0.0
        })
    );
    // mean-return factors differ from the skewed ones, so only the limits agree
    let mr_spec = LatticeSpec::new(
        64,
        1.0,
        Measure::MeanReturn {
            nu: m.r(),
            side: Side::RiskNeutral,
            informed_tau: Some(0.0),
        },
        false,
    )
    .unwrap();
    let avg = |spec: &LatticeSpec| {
        common::paired(
            |n| build_lattice(&spec.with_steps(n).unwrap(), &m, &info).unwrap().price(&opt).unwrap(),
            4096,
        )
    };
    let rn_spec = LatticeSpec::new(64, 1.0, Measure::RiskNeutral, false).unwrap();
    let (mr, rn) = (avg(&mr_spec), avg(&rn_spec));
    assert!((mr - rn).abs() < 5e-4, "{mr} vs {rn}");
}

#[test]
fn risk_neutral_price_converges() {
    let m = market();
    let opt = OptionSpec::call(100.0, 100.0, 1.0).unwrap();
    let spec = LatticeSpec::new(4096, 1.0, Measure::RiskNeutral, false).unwrap();
    let p = build_lattice(&spec, &m, &TraderInfo::default()).unwrap().price(&opt).unwrap();
    assert!((p - black_scholes(&opt, &m)).abs() < 5e-3);
}

#[test]
fn informed_lattice_matches_direction_formula() {
    let (m, info) = (market(), info());
    let opt = OptionSpec::call(100.0, 100.0, 1.0).unwrap();
    for literal in [false, true] {
        let spec = LatticeSpec::new(4096, 1.0, Measure::Informed { tau: 1.0 }, literal).unwrap();
        let p = build_lattice(&spec, &m, &info).unwrap().price(&opt).unwrap();
        let cf = prop1_price(&opt, &m, &info).unwrap();
        // the literal tree drifts at mu rather than r, so only the corrected one converges here
        if !literal {
            assert!((p - cf).abs() < 1e-2, "{p} vs {cf}");
        }
    }
}

#[test]
fn averaged_errors_shrink() {
    let (m, info) = (market(), info());
    let opt = OptionSpec::call(100.0, 100.0, 1.0).unwrap();
    let modes = [
        Measure::RiskNeutral,
        Measure::Informed { tau: 1.0 },
        Measure::Discount {
            rate: 0.06,
            side: Side::RiskNeutral,
            informed_tau: Some(1.0),
        },
        Measure::RiskAdjusted {
            gamma: 0.08,
            lambda: 0.2,
        },
    ];
    for measure in modes {
        let spec = LatticeSpec::new(64, 1.0, measure, false).unwrap();
        let cf = gbs_call(&opt, &lattice_counterpart(&spec, &m, &info).unwrap());
        let price = |n: usize| {
            build_lattice(&spec.with_steps(n).unwrap(), &m, &info)
                .unwrap()
                .price(&opt)
                .unwrap()
        };
        let errs: Vec<f64> = [64usize, 256, 1024]
            .iter()
            .map(|n| (common::paired(price, *n) - cf).abs())
            .collect();
        assert!(errs.windows(2).all(|w| w[1] <= w[0]), "{measure:?}: {errs:?}");
        // error times n stays bounded
        assert!(errs[2] * 1024.0 < 2.0 * errs[0] * 64.0 + 1.0, "{errs:?}");
    }
}

#[test]
fn trinomial_lattice_converges() {
    let m = market();
    let opt = OptionSpec::call(100.0, 95.0, 0.5).unwrap();
    let meas = Measure::Trinomial {
        gamma: 0.08,
        rho_vol: 0.3,
        side: Side::RiskNeutral,
    };
    let spec = LatticeSpec::new(600, 0.5, meas, false).unwrap();
    let p = build_lattice(&spec, &m, &TraderInfo::default()).unwrap().price(&opt).unwrap();
    assert!((p - black_scholes(&opt, &m)).abs() < 2e-3);
}

#[test]
fn varying_trinomial_steps_use_induction() {
    let m = market();
    let a = trinomial_probs(&m, 0.08, 0.3, 0.01, Side::RiskNeutral, false).unwrap();
    let b = BranchDistribution::new(a.factors().to_vec(), vec![0.3, 0.3, 0.4], a.discount()).unwrap();
    let opt = OptionSpec::call(100.0, 100.0, 0.02).unwrap();
    let p = price_european(&[a.clone(), b.clone()], &opt).unwrap();
    // two steps by hand
    let f = a.factors();
    let mut expect = 0.0;
    for (i, pa) in a.probs().iter().enumerate() {
        for (j, pb) in b.probs().iter().enumerate() {
            expect += pa * pb * (100.0 * f[i] * f[j] - 100.0).max(0.0);
        }
    }
    expect *= a.discount() * b.discount();
    assert!((p - expect).abs() < 1e-12);
}

#[test]
fn informed_probability_follows_physical_limit() {
    let m = market();
    let info = TraderInfo::builder().c_tau(0.05).tau(1.0).build().unwrap();
    let dt = 0.01;
    let mut gaps = Vec::new();
    for p in [0.9, 0.99, 0.999, 0.999_999] {
        let q = rn_up_prob(p, sharpe(&m), dt).unwrap();
        let qa = informed_up_prob(q, &info, &m, dt).unwrap();
        assert!(qa < 1.0);
        gaps.push(1.0 - qa);
    }
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!(gaps[3] < 1e-4);
}

#[test]
fn inadmissible_specs_name_the_bound() {
    let m = MarketParams::new(0.1, 0.2, 0.05).unwrap();
    let info = TraderInfo::builder().c_tau(2.0).tau(3.0).build().unwrap();
    let spec = LatticeSpec::new(2, 1.0, Measure::Informed { tau: 3.0 }, false).unwrap();
    match build_lattice(&spec, &m, &info).unwrap_err() {
        Error::InadmissibleStep { max_dt, .. } => {
            assert!(max_dt > 0.0 && max_dt < 0.5);
            let n = (1.0 / max_dt).ceil() as usize + 1;
            assert!(build_lattice(&spec.with_steps(n).unwrap(), &m, &info).is_ok());
        }
        other => panic!("unexpected {other:?}"),
    }
    let bad = Measure::Trinomial {
        gamma: 0.08,
        rho_vol: 0.1,
        side: Side::Physical,
    };
    let spec = LatticeSpec::new(10, 1.0, bad, false).unwrap();
    assert!(build_lattice(&spec, &m, &TraderInfo::default()).unwrap_err().is_validation());
}

#[test]
fn literal_informed_step_reproduces_one_step_value() {
    let m = market();
    let info = TraderInfo::builder().c_tau(0.1).tau(1.0).build().unwrap();
    let dt = 0.04;
    let spec = LatticeSpec::new(1, dt, Measure::Informed { tau: 1.0 }, true).unwrap();
    let lat = build_lattice(&spec, &m, &info).unwrap();
    let p = crr_up_prob(&m, dt).unwrap();
    let q = rn_up_prob(p, sharpe(&m), dt).unwrap();
    let qa = informed_up_prob(q, &info, &m, dt).unwrap();
    let (u, d) = skewed_factors(m.mu(), q, m.sigma(), dt);
    let opt = OptionSpec::call(100.0, 100.0, dt).unwrap();
    let (fu, fd) = ((100.0 * u - 100.0).max(0.0), (100.0 * d - 100.0).max(0.0));
    let expect = (-m.r() * dt).exp() * (qa * fu + (1.0 - qa) * fd);
    assert!((lat.price(&opt).unwrap() - expect).abs() < 1e-13);
}

fn arb_measure() -> impl Strategy<Value = (Measure, f64, f64, f64)> {
    (0.0f64..0.2, 0.1f64..0.4, 0.0f64..0.08, 0usize..8).prop_map(|(mu, sigma, r, k)| {
        let meas = match k {
            0 => Measure::RiskNeutral,
            1 => Measure::Informed { tau: 0.5 },
            2 => Measure::MeanReturn {
                nu: r + 0.02,
                side: Side::RiskNeutral,
                informed_tau: Some(0.3),
            },
            3 => Measure::Trinomial {
                gamma: mu,
                rho_vol: sigma * 1.2,
                side: Side::RiskNeutral,
            },
            4 => Measure::Discount {
                rate: r + 0.01,
                side: Side::RiskNeutral,
                informed_tau: Some(0.5),
            },
            5 => Measure::RiskAdjusted {
                gamma: mu + 0.01,
                lambda: 0.3,
            },
            6 => Measure::Physical,
            _ => Measure::Binary {
                model: BinaryProbModel::new(0.5, 0.1).unwrap(),
                side: Side::RiskNeutral,
            },
        };
        (meas, mu, sigma, r)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn emitted_steps_are_distributions((meas, mu, sigma, r) in arb_measure(), n in 20usize..400) {
        let m = MarketParams::new(mu, sigma, r).unwrap();
        let info = TraderInfo::builder().c_tau(0.05).c_disc(0.02).build().unwrap();
        let spec = LatticeSpec::new(n, 1.0, meas, false).unwrap();
        let lat = build_lattice(&spec, &m, &info).unwrap();
        let b = &lat.steps()[0];
        let total: f64 = b.probs().iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-14);
        prop_assert!(b.probs().iter().all(|p| (0.0..1.0).contains(p)));
        prop_assert!(b.factors().iter().all(|f| *f > 0.0));
        let (mean, _) = step_moments(b);
        let want = 1.0 + meas.effective_drift(&m, &info) * lat.dt();
        prop_assert!((mean - want).abs() <= 1e-13, "{} vs {}", mean, want);
    }

    #[test]
    fn call_prices_are_bounded(s in 50.0f64..150.0, k in 50.0f64..150.0, t in 0.1f64..2.0, n in 1usize..200) {
        let m = market();
        let opt = OptionSpec::call(s, k, t).unwrap();
        let spec = LatticeSpec::new(n, t, Measure::RiskNeutral, false).unwrap();
        let p = build_lattice(&spec, &m, &TraderInfo::default()).unwrap().price(&opt).unwrap();
        prop_assert!(p >= 0.0);
        prop_assert!(p <= s * (1.0 + 1e-12));
        // the discrete step mean is 1 + r dt, so the forward is compounded per step
        let fwd = s * (1.0 + m.r() * t / n as f64).powi(n as i32);
        prop_assert!(p >= (-m.r() * t).exp() * (fwd - k) - 1e-9);
    }
}
