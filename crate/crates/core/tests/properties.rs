use std::f64::consts::PI;

use proptest::prelude::*;
use twinmarket::market::assemble_twin;
use twinmarket::*;

fn prices_from_returns(first: f64, xi: &[f64]) -> PriceSeries {
    let mut prices = vec![first];
    for r in xi {
        prices.push(prices.last().unwrap() * (1.0 + r));
    }
    PriceSeries::new(prices, 1.0, 1.0).unwrap()
}

fn returns_strategy(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(
        (0.005f64..0.05, any::<bool>()).prop_map(|(d, up)| if up { d } else { -d }),
        len,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_is_even(fraction in 0.01f64..0.99, u in -10_000i64..10_000) {
        let spec = BandSpec::from_fraction_of_pi(fraction).unwrap();
        prop_assert_eq!(sinc_kernel(spec, u), sinc_kernel(spec, -u));
        prop_assert_eq!(sinc_kernel(spec, 0), spec.omega() / PI);
    }

    #[test]
    fn fit_is_linear_in_the_data(
        xs in prop::collection::vec(-1.0f64..1.0, 16),
        ys in prop::collection::vec(-1.0f64..1.0, 16),
        alpha in -3.0f64..3.0,
        beta in -3.0f64..3.0,
        fraction in 0.3f64..0.95,
    ) {
        let spec = BandSpec::from_fraction_of_pi(fraction).unwrap();
        let fit = |v: Vec<f64>| {
            fit_bandlimited(&SampledSignal::contiguous(-15, v).unwrap(), spec, &FitOptions::default())
                .unwrap()
        };
        let combined: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| alpha * x + beta * y).collect();
        let (ex, ey, ez) = (fit(xs), fit(ys), fit(combined));
        for t in -20..5 {
            let lhs = ez.evaluate(t);
            let rhs = alpha * ex.evaluate(t) + beta * ey.evaluate(t);
            // rounding in the kernel sums scales with the coefficient mass
            let mass = |e: &BandLimitedExtension| e.coefficients.iter().map(|c| c.abs()).sum::<f64>();
            let scale = alpha.abs() * mass(&ex) + beta.abs() * mass(&ey) + 1.0;
            prop_assert!((lhs - rhs).abs() <= 1e-10 * scale, "t={} {} vs {}", t, lhs, rhs);
        }
    }

    #[test]
    fn residual_bounds_anchor_mismatch(
        xs in prop::collection::vec(-1.0f64..1.0, 2..24),
        fraction in 0.2f64..0.98,
    ) {
        let start = 1 - xs.len() as i64;
        let samples = SampledSignal::contiguous(start, xs).unwrap();
        let spec = BandSpec::from_fraction_of_pi(fraction).unwrap();
        if let Ok(ext) = interpolate_bandlimited(&samples, spec, 0.0, None) {
            for (t, x) in samples.iter() {
                prop_assert!((ext.evaluate(t) - x).abs() <= ext.residual);
            }
        }
    }

    #[test]
    fn discount_roundtrip(
        xi in returns_strategy(2..40),
        rho in 1.0f64..1.1,
        base in 0.5f64..3.0,
    ) {
        let mut discounted = vec![50.0];
        for r in &xi {
            discounted.push(discounted.last().unwrap() * (1.0 + r));
        }
        let start = -(xi.len() as i64);
        let prices: Vec<f64> = discounted
            .iter()
            .enumerate()
            .map(|(k, d)| d * base * rho.powf((start + k as i64) as f64))
            .collect();
        let series = PriceSeries::new(prices.clone(), rho, base).unwrap();
        let returns = discount(&series).unwrap();
        for (a, b) in returns.xi().iter().zip(&xi) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        for (k, (rebuilt, t)) in returns.reconstruct().iter().zip(series.times()).enumerate() {
            let exact = series.discounted(t).unwrap();
            prop_assert!((rebuilt - exact).abs() <= 1e-12 * exact);
            prop_assert!((rebuilt * series.bond(t) - prices[k]).abs() <= 1e-12 * prices[k]);
        }
    }

    #[test]
    fn feasibility_is_monotone_in_epsilon(xi in returns_strategy(8..40), eps in 1e-6f64..0.5) {
        let prices = prices_from_returns(100.0, &xi);
        let grid = omega_grid(0.5 * PI, 0.995 * PI, 12).unwrap();
        let w = WeightConfig::unweighted();
        let tight = build_twin(&prices, eps, &w, &grid, 0.0).unwrap();
        if tight.within_epsilon {
            let loose = build_twin(&prices, 2.0 * eps, &w, &grid, 0.0).unwrap();
            prop_assert!(loose.within_epsilon);
            prop_assert!(loose.omega <= tight.omega);
        }
    }

    #[test]
    fn pricing_is_linear(
        a in prop::collection::vec(0.01f64..0.6, 1..8),
        alpha in -5.0f64..5.0,
        beta in -5.0f64..5.0,
        k1 in 50.0f64..150.0,
        k2 in 50.0f64..150.0,
    ) {
        let mags = PredictableMagnitudes::from_steps(a);
        let c1 = Claim::call(k1);
        let c2 = Claim::put(k2);
        let (x1, x2) = (c1.clone(), c2.clone());
        let mix = Claim::terminal(move |s| {
            let path = SignPath { bits: 0, len: 0 };
            alpha * x1.payoff(path, s) + beta * x2.payoff(path, s)
        });
        let p1 = price(&c1, &mags, 100.0).unwrap();
        let p2 = price(&c2, &mags, 100.0).unwrap();
        let pm = price(&mix, &mags, 100.0).unwrap();
        let scale = (alpha * p1).abs() + (beta * p2).abs();
        prop_assert!((pm - alpha * p1 - beta * p2).abs() <= 1e-12 * scale.max(1e-300));
    }

    #[test]
    fn replication_scales_with_bond_normalisation(
        a in prop::collection::vec(0.01f64..0.6, 1..8),
        rho in 1.0f64..1.2,
        base in 0.2f64..5.0,
    ) {
        let mags = PredictableMagnitudes::from_steps(a);
        let claim = Claim::call(95.0);
        let discounted = price(&claim, &mags, 100.0).unwrap();
        let flat = replicate(&claim, &mags, 100.0, 1.0, 1.0).unwrap();
        let grown = replicate(&claim, &mags, 100.0, base, rho).unwrap();
        prop_assert!((flat.initial_wealth - discounted).abs() <= 1e-12 * discounted.max(1.0));
        prop_assert!((grown.initial_wealth - discounted).abs() <= 1e-12 * discounted.max(1.0));
        let gap = verify_replication(&grown, &claim, &mags, 100.0, base, rho);
        prop_assert!(gap <= 1e-9 * (1.0 + 100.0));
        prop_assert!(grown.max_self_financing_gap() <= 1e-9);
    }

    #[test]
    fn rounding_stability(
        xi in returns_strategy(4..30),
        shift in prop::collection::vec(-0.0049f64..0.0049, 31),
    ) {
        let prices = prices_from_returns(100.0, &xi);
        let tick = 0.01;
        let rounded = round_to_tick(&prices, tick).unwrap();
        for (p, s) in prices.prices().iter().zip(&shift) {
            let moved = PriceSeries::new(vec![p + s, 1.0], 1.0, 1.0).unwrap();
            let a = round_to_tick(&moved, tick).unwrap().prices()[0];
            let b = round_to_tick(&PriceSeries::new(vec![*p, 1.0], 1.0, 1.0).unwrap(), tick)
                .unwrap()
                .prices()[0];
            prop_assert!(((a - b) / tick).round().abs() <= 1.0);
        }
        prop_assert_eq!(round_to_tick(&rounded, tick).unwrap(), rounded);
    }
}

#[test]
fn twin_is_a_fixed_point_of_the_construction() {
    let prices = simulate_incomplete(&IncompleteModelSpec::golden()).unwrap();
    let omega = 0.905 * PI;
    let w = WeightConfig::unweighted();
    let twin = build_twin(&prices, 1.0, &w, &[omega], 0.0).unwrap();
    assert!(twin.validity.all_in_unit_interval);
    let again = build_twin(&twin.price_series().unwrap(), 1e-6, &w, &[omega], 0.0).unwrap();
    assert!(again.within_epsilon);
    assert!(again.combined_error < 1e-6, "{}", again.combined_error);
}

#[test]
fn golden_twin_verifies_at_one_percent() {
    let prices = simulate_incomplete(&IncompleteModelSpec::golden()).unwrap();
    let grid = omega_grid(0.5 * PI, 0.995 * PI, 12).unwrap();
    let w = WeightConfig::unweighted();
    let twin = build_twin(&prices, 0.01, &w, &grid, 0.0).unwrap();
    assert!(twin.sup_price_error < 0.01);
    let check = verify_twin(&twin, &prices, 0.01, prices.start(), &w).unwrap();
    assert!(check.pass());
}

#[test]
fn ratio_error_is_price_error_over_anchor() {
    let prices = simulate_incomplete(&IncompleteModelSpec::golden()).unwrap();
    let w = WeightConfig::unweighted();
    let twin = build_twin(&prices, 1.0, &w, &[0.8 * PI], 0.0).unwrap();
    let check = verify_twin(&twin, &prices, 1.0, prices.start(), &w).unwrap();
    let expected = twin.sup_price_error / prices.prices()[0];
    assert!((check.price_ratios.value - expected).abs() <= 1e-15 * expected.max(1e-300) * 10.0);
    assert!((twin.ratio_error - expected).abs() <= 1e-14 * expected);
}

#[test]
fn weighted_case_reports_both_bounds() {
    let prices = simulate_incomplete(&IncompleteModelSpec {
        horizon: 128,
        ..IncompleteModelSpec::golden()
    })
    .unwrap();
    let w = WeightConfig::new(0.75).unwrap();
    let grid = omega_grid(0.5 * PI, 0.995 * PI, 12).unwrap();
    let twin = build_twin(&prices, 0.01, &w, &grid, 0.0).unwrap();
    let check = verify_twin(&twin, &prices, 0.01, -32, &w).unwrap();
    assert!(check.weighted_returns.pass);
    assert!(check.price_ratios.pass);
    assert!((check.weighted_returns.value - twin.weighted_l2_error).abs() < 1e-18);
}

#[test]
fn predicted_magnitudes_match_band_limited_truth() {
    // |xi| = 0.2 h(t)^2 with h of band 0.4 pi, so |xi| has band 0.8 pi
    let band = BandSpec::from_fraction_of_pi(0.4).unwrap();
    let anchors = [
        (-118, 0.9),
        (-101, -0.7),
        (-77, 0.5),
        (-60, 0.8),
        (-31, -0.6),
        (-12, 0.4),
        (-3, 0.7),
    ];
    let h = |t: i64| -> f64 {
        anchors
            .iter()
            .map(|&(m, b)| b * sinc_kernel(band, t - m))
            .sum()
    };
    let magnitude = |t: i64| 0.2 * h(t) * h(t);
    let xi: Vec<f64> = (-255..=0)
        .map(|t| {
            if t % 3 == 0 {
                -magnitude(t)
            } else {
                magnitude(t)
            }
        })
        .collect();
    let prices = prices_from_returns(100.0, &xi);
    let w = WeightConfig::unweighted();
    let returns = discount(&prices).unwrap();
    let (_, x) = decompose(&returns, &w);
    let scale = x.max_abs();
    let ext = fit_bandlimited(
        &x,
        BandSpec::from_fraction_of_pi(0.85).unwrap(),
        &FitOptions::default(),
    )
    .unwrap();
    let twin = assemble_twin(&prices, &w, ext, 1.0).unwrap();
    let demo = predictability_demo(&twin, 1);
    let truth = magnitude(1);
    assert!(
        (demo[0].1 - truth).abs() / scale < 1e-2,
        "{} vs {}",
        demo[0].1,
        truth
    );
}

#[test]
fn re_solving_the_same_window_predicts_the_same_future() {
    let prices = simulate_incomplete(&IncompleteModelSpec::golden()).unwrap();
    let w = WeightConfig::unweighted();
    let a = build_twin(&prices, 1.0, &w, &[0.9 * PI], 0.0).unwrap();
    let b = build_twin(&prices, 0.5, &w, &[0.9 * PI], 0.0).unwrap();
    let (pa, pb) = (predictability_demo(&a, 5), predictability_demo(&b, 5));
    for ((_, x), (_, y)) in pa.iter().zip(&pb) {
        assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
    }
}

#[test]
fn degenerate_spec_is_already_complete() {
    let spec = IncompleteModelSpec::binomial(0.02, 0.02, 64, 9, 100.0);
    let prices = simulate_incomplete(&spec).unwrap();
    let returns = discount(&prices).unwrap();
    let mags = PredictableMagnitudes::new(
        prices.start(),
        0,
        returns.xi().iter().map(|x| x.abs()).collect(),
    )
    .unwrap();
    assert!(check_crr_completeness(&mags).complete);
    let twin = build_twin(&prices, 1.0, &WeightConfig::unweighted(), &[0.99 * PI], 0.0).unwrap();
    assert!(twin.sup_return_error < 1e-2);
}

#[test]
fn twin_prices_and_hedges_exactly() {
    let prices = simulate_incomplete(&IncompleteModelSpec::golden()).unwrap();
    let grid = omega_grid(0.5 * PI, 0.995 * PI, 12).unwrap();
    let twin = build_twin(&prices, 0.01, &WeightConfig::unweighted(), &grid, 0.0).unwrap();
    assert!(twin.validity.all_in_unit_interval);
    let (s, q) = (-10, 0);
    let a: Vec<f64> = (s + 1..=q).map(|t| twin.magnitude_at(t).unwrap()).collect();
    let mags = PredictableMagnitudes::new(s, q, a).unwrap();
    let spot = twin.discounted_price(s).unwrap();
    let claim = Claim::call(spot);
    let plan = replicate(&claim, &mags, spot, 1.0, 1.0).unwrap();
    assert!(verify_replication(&plan, &claim, &mags, spot, 1.0, 1.0) < 1e-9 * (1.0 + spot));
    assert!(martingale_prob(&mags).unwrap().iter().all(|&p| p == 0.5));
}
