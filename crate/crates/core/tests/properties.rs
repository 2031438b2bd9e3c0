use proptest::prelude::*;

use mrdprice::equilibrium::optimal_price;
use mrdprice::market::{aggregate_ratio, realized_profits, supplier_shares};
use mrdprice::orders::{check_order, OrderKind};
use mrdprice::sim::{sample, SimConfig};
use mrdprice::DemandDistribution;

fn regular_law() -> impl Strategy<Value = DemandDistribution> {
    prop_oneof![
        (0.2f64..5.0).prop_map(|l| DemandDistribution::exponential(l).unwrap()),
        (0.5f64..10.0).prop_map(|l| DemandDistribution::kumaraswamy(l).unwrap()),
        (0.5f64..5.0).prop_map(|b| DemandDistribution::uniform(0.0, b).unwrap()),
        (1.0f64..6.0, 0.2f64..3.0).prop_map(|(k, t)| DemandDistribution::gamma(k, t).unwrap()),
        (0.5f64..3.0, 0.1f64..1.0).prop_map(|(m, s)| DemandDistribution::normal(m, s).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn price_is_a_fixed_point(d in regular_law()) {
        let eq = optimal_price(&d).unwrap();
        prop_assert!(eq.unique);
        let r = eq.price().unwrap();
        prop_assert!((d.mrd(r) - r).abs() < 1e-8 * (1.0 + r));
    }

    #[test]
    fn scaling_multiplies_the_mrd(d in regular_law(), c in 1.0f64..4.0, t in 0.05f64..0.95) {
        let r = d.quantile(t);
        let cd = d.scaled(c).unwrap();
        prop_assert!((cd.mrd(c * r) - c * d.mrd(r)).abs() < 1e-9 * (1.0 + c * d.mrd(r)));
        let (r1, r2) = (optimal_price(&d).unwrap().price().unwrap(), optimal_price(&cd).unwrap().price().unwrap());
        prop_assert!(r1 <= r2 + 1e-7);
    }

    #[test]
    fn mrl_ordered_exponentials_order_prices(a in 0.2f64..5.0, b in 0.2f64..5.0) {
        let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
        let x1 = DemandDistribution::exponential(hi).unwrap();
        let x2 = DemandDistribution::exponential(lo).unwrap();
        prop_assert!(check_order(OrderKind::Mrl, &x1, &x2, None).unwrap().holds_1_le_2);
        prop_assert!(optimal_price(&x1).unwrap().price().unwrap() <= optimal_price(&x2).unwrap().price().unwrap() + 1e-7);
    }

    #[test]
    fn mixtures_are_bracketed(l1 in 0.5f64..10.0, l2 in 0.5f64..10.0, p in 0.05f64..0.95) {
        let (x1, x2) = (DemandDistribution::kumaraswamy(l1.max(l2)).unwrap(), DemandDistribution::kumaraswamy(l1.min(l2)).unwrap());
        let mix = DemandDistribution::mixture(p, &x1, &x2).unwrap();
        let r1 = optimal_price(&x1).unwrap().price().unwrap();
        let r2 = optimal_price(&x2).unwrap().price().unwrap();
        for r in optimal_price(&mix).unwrap().prices {
            prop_assert!(r1 - 1e-7 <= r && r <= r2 + 1e-7);
        }
    }

    #[test]
    fn variability_orders_imply_each_other(d in regular_law(), kappa in 0.1f64..0.9) {
        let xk = d.mean_preserving(kappa).unwrap();
        let disp = check_order(OrderKind::Disp, &xk, &d, None).unwrap();
        let ew = check_order(OrderKind::Ew, &xk, &d, None).unwrap();
        let cx = check_order(OrderKind::Cx, &xk, &d, None).unwrap();
        if disp.holds_1_le_2 {
            prop_assert!(ew.holds_1_le_2, "ew margin {}", ew.margin);
        }
        if ew.holds_1_le_2 {
            prop_assert!(cx.holds_1_le_2, "cx margin {}", cx.margin);
        }
    }

    #[test]
    fn hazard_order_implies_mrl_order(a in regular_law(), b in regular_law()) {
        let hr = check_order(OrderKind::Hr, &a, &b, None).unwrap();
        if hr.holds_1_le_2 {
            prop_assert!(check_order(OrderKind::Mrl, &a, &b, None).unwrap().holds_1_le_2);
        }
    }

    #[test]
    fn profit_accounting(alpha in 0.01f64..100.0, r in 0.0f64..50.0, n in 1usize..20) {
        let o = realized_profits(alpha, r, n);
        let nf = n as f64;
        prop_assert!((o.pi_a_u - o.pi_s_u - nf * o.pi_i_u).abs() <= 1e-12 * (1.0 + o.pi_a_u));
        prop_assert!((o.pi_a_d - o.pi_s_d - nf * o.pi_i_d).abs() <= 1e-12 * (1.0 + o.pi_a_d));
        prop_assert!(o.pi_s_u >= 0.0 && o.pi_i_u >= 0.0 && o.pi_s_d >= 0.0 && o.pi_i_d >= 0.0);
        if alpha <= r {
            prop_assert_eq!(o.pi_s_u, 0.0);
        } else {
            let ratio = o.pi_s_u / o.pi_s_d;
            let t = r / alpha;
            prop_assert!((ratio - 4.0 * t * (1.0 - t)).abs() < 1e-12);
            prop_assert!((o.ratio - o.pi_a_u / o.pi_a_d).abs() < 1e-12 * (1.0 + o.ratio));
        }
    }

    #[test]
    fn crossovers_at_twice_the_price(r in 0.1f64..10.0, x in 1.0001f64..10.0, n in 1usize..12) {
        let alpha = x * r;
        let o = realized_profits(alpha, r, n);
        let s = supplier_shares(alpha, r, n).unwrap();
        if x < 2.0 - 1e-9 {
            prop_assert!(o.pi_i_u < o.pi_i_d && s.share_u > s.share_d);
        } else if x > 2.0 + 1e-9 {
            prop_assert!(o.pi_i_u > o.pi_i_d && s.share_u < s.share_d);
        }
        let next = aggregate_ratio(alpha, r, n + 1);
        let this = aggregate_ratio(alpha, r, n);
        if x < 2.0 - 1e-9 {
            prop_assert!(next > this);
        } else if x > 2.0 + 1e-9 {
            prop_assert!(next < this);
        }
    }
}

#[test]
fn draws_do_not_depend_on_thread_count() {
    let d = DemandDistribution::gamma(2.0, 1.0).unwrap();
    let many = sample(&d, 100_000, 9);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let one = pool.install(|| sample(&d, 100_000, 9));
    assert_eq!(many, one);
    let cfg = SimConfig::new(9, 100_000, mrdprice::market::MarketStructure::cournot_n(2).unwrap(), vec![0.5, 1.0]).unwrap();
    let a = mrdprice::sim::mc_profit_curve(&d, &cfg.price_grid, 1.0, &cfg).unwrap();
    let b = pool.install(|| mrdprice::sim::mc_profit_curve(&d, &cfg.price_grid, 1.0, &cfg).unwrap());
    assert_eq!(a, b);
}
