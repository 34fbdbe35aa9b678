use proptest::prelude::*;
use straddle_bounds::fixtures::random_dispersed;
use straddle_bounds::{
    convex_order_leq, decompose, jensen_bound, CouplingMap, HedgePair, Measure, Potential, Selection, ShapeVerdict,
    UpperCouplingMap,
};

const CASES: u32 = 24;

fn grid_sup_d(mu: &Measure, nu: &Measure) -> f64 {
    let (lo, hi) = (-8.0, 8.0);
    (0..=4000)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / 4000.0;
            nu.call(x) - mu.call(x)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(std::env::var("PROPTEST_CASES").ok().and_then(|v| v.parse().ok()).unwrap_or(CASES)))]

    #[test]
    fn random_pairs_are_dispersed(seed in any::<u64>(), common in any::<bool>()) {
        let (mu, nu) = random_dispersed(seed, common);
        prop_assert!(convex_order_leq(&mu, &nu).holds());
        let pair = decompose(&mu, &nu).unwrap();
        prop_assert_eq!(Potential::new(&pair).shape_check(), ShapeVerdict::Ok);
        prop_assert!(!convex_order_leq(&nu, &mu).holds() || pair.identical());
    }

    #[test]
    fn lower_map_invariants(seed in any::<u64>(), common in any::<bool>()) {
        let (mu, nu) = random_dispersed(seed, common);
        let pair = decompose(&mu, &nu).unwrap();
        let map = CouplingMap::build(&pair).unwrap();
        let recs = map.records();
        for r in &recs {
            prop_assert!(r.p <= pair.a && pair.a <= r.x && r.x <= pair.b && pair.b <= r.q, "{:?}", r);
            let w = r.down_weight();
            prop_assert!((w * r.p + (1.0 - w) * r.q - r.x).abs() < 1e-10);
        }
        for w in recs.windows(2) {
            let (r, s) = (w[0], w[1]);
            prop_assert!(s.p <= r.p + 1e-12 && s.q <= r.q + 1e-12 && s.phi <= r.phi + 1e-12 && s.zeta <= r.zeta + 1e-12);
        }
        let law = map.pushforward_law();
        for i in 0..50 {
            let y = -8.0 + 16.0 * i as f64 / 49.0;
            prop_assert!((law.cdf(y).unwrap() - nu.cdf(y)).abs() < 1e-9);
        }
    }

    #[test]
    fn price_is_sandwiched(seed in any::<u64>()) {
        let (mu, nu) = random_dispersed(seed, false);
        let lower = CouplingMap::build(&decompose(&mu, &nu).unwrap()).unwrap().primal_price();
        let upper = UpperCouplingMap::from_marginals(&mu, &nu).unwrap().price();
        prop_assert!(lower >= 2.0 * grid_sup_d(&mu, &nu) - 1e-9);
        prop_assert!(lower <= upper + 1e-9, "{} > {}", lower, upper);
        prop_assert!(upper <= jensen_bound(&mu, &nu) + 1e-9);
    }

    #[test]
    fn upper_map_invariants(seed in any::<u64>()) {
        let (mu, nu) = random_dispersed(seed, false);
        let map = UpperCouplingMap::from_marginals(&mu, &nu).unwrap();
        let (a, b) = mu.support().unwrap();
        let recs = map.records();
        for r in &recs {
            prop_assert!(r.g <= a && b <= r.h);
            let w = (r.h - r.x) / (r.h - r.g);
            prop_assert!((w * r.g + (1.0 - w) * r.h - r.x).abs() < 1e-10);
        }
        for w in recs.windows(2) {
            prop_assert!(w[0].g <= w[1].g + 1e-12 && w[0].h <= w[1].h + 1e-12);
        }
        for i in 0..50 {
            let y = -8.0 + 16.0 * i as f64 / 49.0;
            prop_assert!((map.pushforward_cdf(y).unwrap() - nu.cdf(y)).abs() < 1e-8);
        }
    }

    #[test]
    fn strong_duality_and_subhedge(seed in any::<u64>(), common in any::<bool>()) {
        let (mu, nu) = random_dispersed(seed, common);
        let map = CouplingMap::build(&decompose(&mu, &nu).unwrap()).unwrap();
        let hedge = HedgePair::new(&map).unwrap();
        prop_assert!((map.primal_price() - hedge.dual_value().unwrap()).abs() < 1e-6);
        let cert = hedge.verify_subhedge(150, 150).unwrap();
        prop_assert!(cert.passed, "{:?}", cert);
    }

    #[test]
    fn selection_does_not_change_the_law(seed in any::<u64>(), common in any::<bool>()) {
        let (mu, nu) = random_dispersed(seed, common);
        let pair = decompose(&mu, &nu).unwrap();
        let a = CouplingMap::build(&pair).unwrap();
        let b = CouplingMap::build_with(&pair, Selection::default().opposite()).unwrap();
        prop_assert!((a.primal_price() - b.primal_price()).abs() < 1e-9);
        for i in 0..30 {
            let y = -8.0 + 16.0 * i as f64 / 29.0;
            prop_assert!((b.pushforward_law().cdf(y).unwrap() - nu.cdf(y)).abs() < 1e-9);
        }
    }

    #[test]
    fn quantile_inverts_cdf(seed in any::<u64>(), u in 0.001f64..0.999) {
        let (mu, _) = random_dispersed(seed, false);
        let x = mu.quantile_left(u).unwrap();
        prop_assert!(mu.cdf(x) >= u - 1e-12);
        prop_assert!(mu.cdf_left(x) <= u + 1e-12);
    }

    #[test]
    fn mixing_in_more_spread_stays_in_order(seed in any::<u64>(), t in 0.0f64..1.0) {
        let (mu, nu) = random_dispersed(seed, false);
        let mid = Measure::mixture(&[(t, &mu), (1.0 - t, &nu)]).unwrap();
        prop_assert!(convex_order_leq(&mu, &mid).holds());
        prop_assert!(convex_order_leq(&mid, &nu).holds());
    }

    #[test]
    fn sampler_has_martingale_increments(seed in 0u64..1000) {
        let (mu, nu) = random_dispersed(seed, true);
        let map = CouplingMap::build(&decompose(&mu, &nu).unwrap()).unwrap();
        let draws = map.sample(seed, 20_000).unwrap();
        let n = draws.len() as f64;
        let drift = draws.iter().map(|(x, y)| y - x).sum::<f64>() / n;
        let spread = (draws.iter().map(|(x, y)| (y - x).powi(2)).sum::<f64>() / n).sqrt();
        prop_assert!(drift.abs() < 5.0 * spread / n.sqrt() + 1e-12);
    }
}
