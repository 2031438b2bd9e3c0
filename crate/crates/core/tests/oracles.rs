//! Prices and tail quantities checked against references computed here,
//! independently of the library's closed forms and quadrature.

use mrdprice::equilibrium::{expected_profit, optimal_price, BoundaryCase};
use mrdprice::DemandDistribution;

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// `int_r^hi F_bar` from the cdf alone.
fn tail_by_simpson(d: &DemandDistribution, r: f64, hi: f64) -> f64 {
    simpson(|u| 1.0 - d.cdf(u), r, hi, 20_000)
}

/// Golden-section maximum of `r int_r F_bar` on `[lo, hi]`, using only the cdf.
fn argmax_by_golden(d: &DemandDistribution, lo: f64, hi: f64, cut: f64) -> f64 {
    let profit = |r: f64| r * tail_by_simpson(d, r, cut);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut e = a + g * (b - a);
    let (mut fc, mut fe) = (profit(c), profit(e));
    while b - a > 1e-9 {
        if fc > fe {
            b = e;
            e = c;
            fe = fc;
            c = b - g * (b - a);
            fc = profit(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + g * (b - a);
            fe = profit(e);
        }
    }
    0.5 * (a + b)
}

fn price(d: &DemandDistribution) -> f64 {
    let eq = optimal_price(d).unwrap();
    assert!(eq.unique, "{}: {:?}", d.describe(), eq.prices);
    eq.price().unwrap()
}

#[test]
fn exponential_prices() {
    for lambda in [0.5, 1.0, 2.0, 5.0] {
        let d = DemandDistribution::exponential(lambda).unwrap();
        assert!((price(&d) - 1.0 / lambda).abs() < 1e-9);
    }
}

#[test]
fn kumaraswamy_prices() {
    for lambda in [1.0, 2.0, 4.0, 8.0] {
        let d = DemandDistribution::kumaraswamy(lambda).unwrap();
        assert!((price(&d) - 1.0 / (lambda + 2.0)).abs() < 1e-9);
    }
}

#[test]
fn pareto_prices_sit_below_the_support() {
    for k in [2.5, 3.0, 4.0, 6.0] {
        let d = DemandDistribution::pareto(1.0, k).unwrap();
        let eq = optimal_price(&d).unwrap();
        assert_eq!(eq.boundary_case, BoundaryCase::BelowL);
        assert!((eq.price().unwrap() - k / (2.0 * (k - 1.0))).abs() < 1e-12);
    }
}

#[test]
fn uniform_and_gamma_prices() {
    let d = DemandDistribution::uniform(0.0, 3.0).unwrap();
    assert!((price(&d) - 1.0).abs() < 1e-9);
    // Gamma(2, theta): (2 + x) / (1 + x) = x with x = r / theta.
    let d = DemandDistribution::gamma(2.0, 2.0).unwrap();
    assert!((price(&d) - 2.0 * 2f64.sqrt()).abs() < 1e-9);
}

#[test]
fn piecewise_counterexample_prices() {
    let x = DemandDistribution::uniform(0.0, 1.0).unwrap();
    let y = DemandDistribution::piecewise_linear(&[(0.0, 0.0), (1.0 / 3.0, 7.0 / 9.0), (2.0 / 3.0, 7.0 / 9.0), (1.0, 1.0)])
        .unwrap();
    assert!((price(&x) - 1.0 / 3.0).abs() < 1e-9);
    assert!((price(&y) - 5.0 / 12.0).abs() < 1e-9);
}

#[test]
fn prices_match_direct_profit_maximization() {
    let cases = [
        (DemandDistribution::lognormal(0.0, 0.5).unwrap(), 30.0),
        (DemandDistribution::normal(2.0, 0.5).unwrap(), 6.0),
        (DemandDistribution::gamma(3.0, 0.5).unwrap(), 20.0),
        (DemandDistribution::generalized_pareto(0.5, 1.0, 0.2).unwrap(), 400.0),
    ];
    for (d, cut) in cases {
        let r = price(&d);
        let oracle = argmax_by_golden(&d, 1e-3, d.quantile(0.999), cut);
        assert!((r - oracle).abs() < 1e-5, "{}: {r} vs {oracle}", d.describe());
    }
}

#[test]
fn tail_integrals_match_simpson() {
    let cases = [
        (DemandDistribution::lognormal(0.5, 1.0).unwrap(), 1.0, 4000.0, 1e-4),
        (DemandDistribution::normal(1.0, 0.3).unwrap(), 0.8, 5.0, 1e-9),
        (DemandDistribution::gamma(2.0, 0.25).unwrap(), 0.3, 20.0, 1e-9),
        (DemandDistribution::kumaraswamy(3.0).unwrap(), 0.2, 1.0, 1e-9),
        (DemandDistribution::exponential(1.0).unwrap().convex_map(mrdprice::ConvexMap::Power { gamma: 2.0 }).unwrap(), 0.5, 2500.0, 1e-6),
    ];
    for (d, r, hi, tol) in cases {
        let a = d.tail_integral(r);
        let b = tail_by_simpson(&d, r, hi);
        assert!((a - b).abs() < tol * (1.0 + a), "{}: {a} vs {b}", d.describe());
    }
}

#[test]
fn expected_profit_is_flat_for_pareto_two() {
    let d = DemandDistribution::pareto(1.0, 2.0).unwrap();
    let p1 = expected_profit(&d, 1.0, 1.0);
    for r in [1.5, 3.0, 10.0] {
        assert!((expected_profit(&d, r, 1.0) - p1).abs() < 1e-9);
    }
    assert!(expected_profit(&d, 0.5, 1.0) < p1);
}
