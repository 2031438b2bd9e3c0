//! Plot-ready data. The files are plain CSV; the gnuplot scripts are optional.

use std::fs;
use std::io;
use std::path::Path;

use mrdprice::market::{aggregate_ratio, no_trade_probability, ratio_analytics, MarketError, NO_TRADE_BOUND};
use mrdprice::numerics::GridSpec;
use mrdprice::orders::demand_grid;
use mrdprice::DemandDistribution;

use crate::manifest::Manifest;

/// Location of the generalized Pareto sweep.
pub const GPARETO_LOCATION: f64 = 0.02;
const SWEEP_POINTS: usize = 25;

fn sweep(lo: f64, hi: f64) -> Vec<f64> {
    GridSpec::geometric(lo, hi, SWEEP_POINTS).build().expect("static sweep")
}

/// `F(r*)` for exponential, Kumaraswamy and generalized Pareto sweeps.
pub fn no_trade_sweeps() -> Result<String, MarketError> {
    let mut s = String::from("family,parameter,r_star,no_trade,bound,is_dmrd\n");
    let mut emit = |family: &str, param: f64, d: DemandDistribution| -> Result<(), MarketError> {
        let rep = no_trade_probability(&d)?;
        s.push_str(&format!(
            "{family},{param:.12e},{:.12e},{:.12e},{:.12e},{}\n",
            rep.r_star, rep.probability, NO_TRADE_BOUND, rep.bound_check.is_dmrd
        ));
        Ok(())
    };
    let law = |r: Result<DemandDistribution, _>| r.map_err(|e: mrdprice::DistributionError| MarketError::InvalidStructure(e.to_string()));
    for l in sweep(0.1, 10.0) {
        emit("exponential", l, law(DemandDistribution::exponential(l))?)?;
    }
    for l in sweep(0.5, 200.0) {
        emit("kumaraswamy", l, law(DemandDistribution::kumaraswamy(l))?)?;
    }
    for e in sweep(0.05, 2.0) {
        emit("gpareto", e, law(DemandDistribution::generalized_pareto_eps(GPARETO_LOCATION, e))?)?;
    }
    Ok(s)
}

/// Ratio curves on `alphas` (with the markers spliced in) and the marker table.
pub fn ratio_curves(r_star: f64, ns: &[usize], alphas: &[f64]) -> (String, String) {
    let mut curves = String::from("n,alpha,ratio\n");
    let mut markers = String::from("n,r_star,argmax,ratio_at_argmax,max_value,crossing,ratio_at_crossing,limit\n");
    for &n in ns {
        let a = ratio_analytics(r_star, n);
        let crossing = 2.0 * r_star;
        let mut grid: Vec<f64> = alphas.to_vec();
        grid.push(crossing);
        grid.extend(a.argmax);
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        for x in grid {
            curves.push_str(&format!("{n},{x:.12e},{:.12e}\n", aggregate_ratio(x, r_star, n)));
        }
        let nan = f64::NAN;
        let argmax = a.argmax.unwrap_or(nan);
        markers.push_str(&format!(
            "{n},{r_star:.12e},{argmax:.12e},{:.12e},{:.12e},{crossing:.12e},{:.12e},{:.12e}\n",
            a.argmax.map_or(nan, |x| aggregate_ratio(x, r_star, n)),
            a.max_value.unwrap_or(nan),
            aggregate_ratio(crossing, r_star, n),
            a.limit
        ));
    }
    (curves, markers)
}

/// Side-by-side cdf, MRD, GMRD and tail-integral curves of two laws.
pub fn write_comparison(
    m: &Manifest,
    dir: &Path,
    d1: &DemandDistribution,
    d2: &DemandDistribution,
    points: usize,
    gnuplot: bool,
) -> io::Result<()> {
    let hi = demand_grid(d1, d2, true).map(|g| g[g.len() - 1]).unwrap_or(1.0);
    let grid = GridSpec::linear(hi / points as f64, hi, points).build().map_err(io::Error::other)?;
    let mut s = String::from("r,cdf_1,cdf_2,mrd_1,mrd_2,gmrd_1,gmrd_2,tail_1,tail_2,log_tail_ratio\n");
    for r in grid {
        let (t1, t2) = (d1.tail_integral(r), d2.tail_integral(r));
        let (m1, m2) = (d1.mrd(r), d2.mrd(r));
        s.push_str(&format!(
            "{r:.12e},{:.12e},{:.12e},{m1:.12e},{m2:.12e},{:.12e},{:.12e},{t1:.12e},{t2:.12e},{:.12e}\n",
            d1.cdf(r),
            d2.cdf(r),
            m1 / r,
            m2 / r,
            (t1 / t2).ln()
        ));
    }
    m.write_csv(dir, "curves.csv", &s)?;
    if gnuplot {
        fs::write(dir.join("curves.gp"), COMPARISON_SCRIPT)?;
    }
    Ok(())
}

pub const COMPARISON_SCRIPT: &str = r##"set datafile separator ","
set datafile commentschars "#"
set key autotitle columnhead
set terminal pngcairo size 1200,400
set output "curves.png"
set multiplot layout 1,3
set title "cdf"
plot "curves.csv" using 1:2 with lines, "" using 1:3 with lines
set title "m(r)/r"
set yrange [0:3]
plot "curves.csv" using 1:6 with lines, "" using 1:7 with lines, 1 with lines dt 2 notitle
set autoscale y
set title "log of tail-integral ratio"
plot "curves.csv" using 1:10 with lines
unset multiplot
"##;

pub const PERFORMANCE_SCRIPT: &str = r##"set datafile separator ","
set datafile commentschars "#"
set terminal pngcairo size 1200,400
set output "figure4.png"
set multiplot layout 1,3
set yrange [0:1]
do for [f in "exponential kumaraswamy gpareto"] {
    set title f
    plot "figure4_notrade.csv" using 2:(strcol(1) eq f ? $4 : 1/0) with linespoints notitle, \
         "" using 2:(strcol(1) eq f ? $5 : 1/0) with lines dt 2 notitle
}
unset multiplot
set autoscale y
set output "figure5.png"
set terminal pngcairo size 600,400
set xlabel "alpha"
set ylabel "aggregate profit ratio"
plot for [n in "2 5 8"] "figure5_ratio.csv" using 2:(strcol(1) eq n ? $3 : 1/0) with lines title "n=".n, \
     "figure5_markers.csv" using 3:4 with points pt 7 title "argmax", \
     "" using 6:7 with points pt 6 title "2r*"
"##;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn markers_follow_the_formulas() {
        let r = 2.0 * 2f64.sqrt();
        let (_, markers) = ratio_curves(r, &[2, 5, 8], &[0.0, 10.0]);
        for line in markers.lines().skip(1) {
            let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
            assert!((f[3] - f[4]).abs() < 1e-12);
            assert!((f[6] - 1.0).abs() < 1e-12);
        }
    }
}
