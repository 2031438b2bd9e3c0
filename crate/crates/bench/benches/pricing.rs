use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use mrdprice::equilibrium::optimal_price;
use mrdprice::market::{no_trade_probability, MarketStructure};
use mrdprice::orders::{check_order, OrderKind};
use mrdprice::sim::{mc_profit_curve, SimConfig};
use mrdprice::DemandDistribution;

fn laws() -> Vec<(&'static str, DemandDistribution)> {
    vec![
        ("exponential", DemandDistribution::exponential(1.0).unwrap()),
        ("gamma", DemandDistribution::gamma(2.0, 2.0).unwrap()),
        ("lognormal", DemandDistribution::lognormal(0.5, 1.0).unwrap()),
        ("normal", DemandDistribution::normal(2.0, 0.5).unwrap()),
        ("pareto", DemandDistribution::pareto(1.0, 3.0).unwrap()),
    ]
}

fn solve(c: &mut Criterion) {
    let mut g = c.benchmark_group("optimal_price");
    for (name, d) in laws() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &d, |b, d| b.iter(|| optimal_price(black_box(d)).unwrap()));
    }
    g.finish();
}

fn tails(c: &mut Criterion) {
    let mut g = c.benchmark_group("mrd");
    for (name, d) in laws() {
        let r = d.quantile(0.7);
        g.bench_with_input(BenchmarkId::from_parameter(name), &d, |b, d| b.iter(|| d.mrd(black_box(r))));
    }
    g.finish();
}

fn orders(c: &mut Criterion) {
    let x = DemandDistribution::gamma(2.0, 1.0).unwrap();
    let y = x.mean_preserving(0.5).unwrap();
    let mut g = c.benchmark_group("check_order");
    for order in [OrderKind::St, OrderKind::Mrl, OrderKind::Cx, OrderKind::Disp] {
        g.bench_function(order.name(), |b| b.iter(|| check_order(order, &y, &x, None).unwrap()));
    }
    g.finish();
}

fn market(c: &mut Criterion) {
    let d = DemandDistribution::kumaraswamy(4.0).unwrap();
    c.bench_function("no_trade_probability", |b| b.iter(|| no_trade_probability(black_box(&d)).unwrap()));
}

fn monte_carlo(c: &mut Criterion) {
    let d = DemandDistribution::gamma(2.0, 2.0).unwrap();
    let s = MarketStructure::cournot_n(2).unwrap();
    let prices: Vec<f64> = (1..=8).map(|k| 0.5 * k as f64).collect();
    let cfg = SimConfig::new(1, 100_000, s, prices.clone()).unwrap();
    let mut g = c.benchmark_group("monte_carlo");
    g.sample_size(20);
    g.bench_function("profit_curve_1e5_x8", |b| b.iter(|| mc_profit_curve(&d, &prices, s.lambda_total(), &cfg).unwrap()));
    g.finish();
}

criterion_group!(benches, solve, tails, orders, market, monte_carlo);
criterion_main!(benches);
