//! The supplier's pricing problem.
//!
//! With retailers ordering `lambda_M (alpha - r)_+`, the supplier maximizes
//! `Pi(r) = lambda_M r int_r^inf F_bar(u) du`. The derivative is
//! `lambda_M (m(r) / r - 1) r F_bar(r)`, so interior optima are fixed points of
//! the mean residual demand and the profit is unimodal when `m(r) / r` is
//! decreasing. When `E alpha / 2 < L` the optimum sits below the support at
//! `E alpha / 2`.

use serde::Serialize;
use thiserror::Error;

use crate::distributions::{classify, ClassificationReport, DemandDistribution};
use crate::numerics::{
    find_all_roots_on, find_root_bracketed, GridSpec, Plateau, DEFAULT_GRID_POINTS, DEFAULT_ROOT_TOL, PLATEAU_TOL,
};

/// Tolerance of the constancy test of `F_bar(r) r^2` on a plateau.
pub const PLATEAU_CONSTANCY_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EquilibriumError {
    #[error(
        "no finite optimum: m(r) - r stays positive up to the truncation point r = {truncation} and the second moment is infinite, so the expected profit increases without bound"
    )]
    NoFiniteOptimum { truncation: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCase {
    /// Every price is a fixed point inside the support.
    Interior,
    /// `E alpha / 2 < L`: the price `E alpha / 2` lies below the support.
    BelowL,
    /// No isolated price was found.
    None,
}

/// The sufficient conditions for a unique optimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Sufficiency {
    pub dgmrd_strict: bool,
    pub second_moment_finite: bool,
}

impl Sufficiency {
    pub fn holds(&self) -> bool {
        self.dgmrd_strict && self.second_moment_finite
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumResult {
    /// Sorted optimal prices; several when the fixed point is not unique.
    pub prices: Vec<f64>,
    /// Intervals on which `m(r) = r` (flat profit).
    pub plateaus: Vec<Plateau>,
    pub unique: bool,
    pub sufficiency: Sufficiency,
    pub boundary_case: BoundaryCase,
    /// `|m(r*) - r*|` for each price.
    pub residuals: Vec<f64>,
    /// The profit is constant on a plateau reaching the truncation point.
    pub flat_optimum: bool,
    pub mean: f64,
    pub second_moment: f64,
    pub scan: (f64, f64),
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub classification: Option<ClassificationReport>,
}

impl EquilibriumResult {
    /// The price when it is unique.
    pub fn price(&self) -> Option<f64> {
        if self.unique {
            self.prices.first().copied()
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverSettings {
    /// Absolute tolerance on `m(r) - r`.
    pub root_tol: f64,
    /// Seeds of each of the linear and geometric scans.
    pub seed_points: usize,
    /// Points of the classification grid.
    pub grid_points: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { root_tol: DEFAULT_ROOT_TOL, seed_points: DEFAULT_GRID_POINTS, grid_points: DEFAULT_GRID_POINTS }
    }
}

/// Price under full information: `alpha / 2`.
pub fn deterministic_price(alpha: f64) -> f64 {
    0.5 * alpha.max(0.0)
}

/// `lambda_M r E(alpha - r)_+`.
pub fn expected_profit(d: &DemandDistribution, r: f64, lambda_m: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    lambda_m * r * d.tail_integral(r)
}

/// Range `[eps, hi]` scanned for fixed points.
pub fn scan_bounds(d: &DemandDistribution) -> (f64, f64) {
    let s = d.support();
    let lo = d.quantile(1e-9).max(1e-12);
    let hi = if s.upper.is_finite() { s.upper } else { d.quantile(1.0 - 1e-9) };
    (lo, hi.max(lo * (1.0 + 1e-9)))
}

pub fn optimal_price(d: &DemandDistribution) -> Result<EquilibriumResult, EquilibriumError> {
    optimal_price_with(d, &SolverSettings::default())
}

pub fn optimal_price_with(d: &DemandDistribution, settings: &SolverSettings) -> Result<EquilibriumResult, EquilibriumError> {
    let mean = d.mean();
    if !mean.is_finite() || mean <= 0.0 {
        return Err(EquilibriumError::InvalidInput(format!("mean demand must be positive and finite, got {mean}")));
    }
    let second_moment = d.second_moment();
    let lower = d.support().lower;
    let (lo, hi) = scan_bounds(d);
    let mut warnings = Vec::new();

    let f = |r: f64| d.mrd(r) - r;
    let seeds = scan_seeds(lo, hi, settings.seed_points);
    let scan = find_all_roots_on(f, &seeds, settings.root_tol);
    let mut prices: Vec<(f64, f64)> = scan.roots.iter().map(|r| (r.root, r.residual.abs())).collect();

    let below = 0.5 * mean;
    // Equality puts the fixed point on L itself, just below the scan range.
    let below_l = lower > 0.0 && below <= lower * (1.0 + 1e-12);
    if below_l {
        // On [0, L] m(r) = E alpha - r, so E alpha / 2 is a fixed point there.
        prices.push((below, f(below).abs()));
    } else if f(lo) < -settings.root_tol {
        // The price lies below the scan's first quantile, where F is
        // numerically zero and m(r) ~ E alpha - r; f(0+) = E alpha > 0 brackets it.
        if let Ok(root) = find_root_bracketed(f, lo * 1e-6, lo, settings.root_tol) {
            prices.push((root.root, root.residual.abs()));
        }
    }
    // A fixed point at the start of a plateau belongs to the plateau.
    prices.retain(|p| !scan.plateaus.iter().any(|q| p.0 >= q.start * (1.0 - 1e-9) && p.0 <= q.end));
    prices.sort_by(|a, b| a.0.total_cmp(&b.0));
    prices.dedup_by(|a, b| (a.0 - b.0).abs() <= 1e-9 * (1.0 + a.0.abs()));

    let f_hi = f(hi);
    let plateau_reaches_end = scan.plateaus.last().is_some_and(|p| p.end >= hi * (1.0 - 1e-12));
    if prices.is_empty() && scan.plateaus.is_empty() && f_hi > PLATEAU_TOL * (1.0 + hi) {
        if second_moment.is_infinite() {
            return Err(EquilibriumError::NoFiniteOptimum { truncation: hi });
        }
        warnings.push(format!("m(r) - r is still positive at the truncation point {hi}; no price found"));
    }
    let flat_optimum = plateau_reaches_end && prices.is_empty();
    if flat_optimum {
        let p = scan.plateaus.last().expect("checked above");
        warnings.push(format!(
            "profit is constant for r in [{}, {}] (m(r) = r up to the truncation point){}",
            p.start,
            p.end,
            if second_moment.is_infinite() { "; the second moment is infinite" } else { "" }
        ));
    }
    if !scan.plateaus.is_empty() && !flat_optimum {
        warnings.push(format!("{} interval(s) with m(r) = r; every point there is optimal", scan.plateaus.len()));
    }
    if second_moment.is_infinite() && prices.is_empty() && !flat_optimum {
        warnings.push("second moment is infinite and no fixed point exists".into());
    }

    let grid = crate::distributions::default_grid(d, settings.grid_points);
    let classification = grid.ok().and_then(|g| classify(d, Some(&g)).ok());
    if classification.is_none() {
        warnings.push("shape classification failed; sufficiency reported as false".into());
    }
    let sufficiency = Sufficiency {
        dgmrd_strict: classification.as_ref().is_some_and(|c| c.dgmrd_strict),
        second_moment_finite: second_moment.is_finite(),
    };
    let unique = prices.len() == 1 && scan.plateaus.is_empty();
    if prices.len() > 1 {
        warnings.push(format!("{} fixed points; all are reported", prices.len()));
    }
    let boundary_case = if below_l && prices.iter().any(|p| p.0 == below) {
        BoundaryCase::BelowL
    } else if prices.is_empty() {
        BoundaryCase::None
    } else {
        BoundaryCase::Interior
    };
    Ok(EquilibriumResult {
        residuals: prices.iter().map(|p| p.1).collect(),
        prices: prices.into_iter().map(|p| p.0).collect(),
        plateaus: scan.plateaus,
        unique,
        sufficiency,
        boundary_case,
        flat_optimum,
        mean,
        second_moment,
        scan: (lo, hi),
        warnings,
        classification,
    })
}

/// Union of a geometric and a linear grid on `[lo, hi]`.
fn scan_seeds(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let n = n.max(32);
    let mut seeds = GridSpec::linear(lo, hi, n + 1).build().unwrap_or_else(|_| vec![lo, hi]);
    if lo > 0.0 {
        if let Ok(g) = GridSpec::geometric(lo, hi, n + 1).build() {
            seeds.extend(g);
        }
    }
    seeds.sort_by(f64::total_cmp);
    seeds.dedup();
    seeds
}

/// Sampled expected profit.
#[derive(Debug, Clone, Serialize)]
pub struct ProfitCurve {
    pub lambda_m: f64,
    pub samples: Vec<(f64, f64)>,
}

impl ProfitCurve {
    /// First grid point attaining the largest profit.
    pub fn argmax(&self) -> (f64, f64) {
        self.samples.iter().fold((f64::NAN, f64::NEG_INFINITY), |best, &(r, v)| if v > best.1 { (r, v) } else { best })
    }

    /// Nondecreasing within `tol * (1 + |Pi|)` per step.
    pub fn is_nondecreasing(&self, tol: f64) -> bool {
        self.samples.windows(2).all(|w| w[1].1 >= w[0].1 - tol * (1.0 + w[0].1.abs()))
    }
}

pub fn profit_curve(d: &DemandDistribution, lambda_m: f64, grid: &[f64]) -> ProfitCurve {
    ProfitCurve { lambda_m, samples: grid.iter().map(|&r| (r, expected_profit(d, r, lambda_m))).collect() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Positive,
    Zero,
    Negative,
}

/// A change of sign of `m(r) - r` between consecutive grid points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignChange {
    pub from: f64,
    pub to: f64,
    pub upward: bool,
}

/// A stretch of grid points with `m(r) = r` and the test of whether
/// `F_bar(r) r^2` is constant on it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlateauCheck {
    pub start: f64,
    pub end: f64,
    pub fbar_r2: f64,
    pub max_relative_deviation: f64,
    pub fbar_r2_constant: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct UnimodalityReport {
    pub sign_changes: Vec<SignChange>,
    pub plateaus: Vec<PlateauCheck>,
    /// Exactly one change of `m(r) - r` from positive to negative and no plateau.
    pub unimodal: bool,
    /// `m(r) = r` on an interval, equivalently `F_bar(r) r^2` constant there.
    pub linear_segment: bool,
}

/// Sign pattern of `m(r) - r` on `grid`. Values within
/// `PLATEAU_TOL (1 + r)` of zero count as zero; three or more consecutive
/// zeros form a plateau.
pub fn unimodality_report(d: &DemandDistribution, grid: &[f64]) -> UnimodalityReport {
    let signs: Vec<Sign> = grid
        .iter()
        .map(|&r| {
            let v = d.mrd(r) - r;
            if v.abs() <= PLATEAU_TOL * (1.0 + r) {
                Sign::Zero
            } else if v > 0.0 {
                Sign::Positive
            } else {
                Sign::Negative
            }
        })
        .collect();
    let mut sign_changes = Vec::new();
    let mut last: Option<(usize, Sign)> = None;
    for (i, &s) in signs.iter().enumerate() {
        if s == Sign::Zero {
            continue;
        }
        if let Some((j, prev)) = last {
            if prev != s {
                sign_changes.push(SignChange { from: grid[j], to: grid[i], upward: s == Sign::Positive });
            }
        }
        last = Some((i, s));
    }
    let mut plateaus = Vec::new();
    let mut i = 0;
    while i < signs.len() {
        if signs[i] != Sign::Zero {
            i += 1;
            continue;
        }
        let start = i;
        while i < signs.len() && signs[i] == Sign::Zero {
            i += 1;
        }
        if i - start >= 3 {
            let pts = &grid[start..i];
            let reference = d.survival(pts[0]) * pts[0] * pts[0];
            let dev = pts
                .iter()
                .map(|&r| ((d.survival(r) * r * r - reference) / reference).abs())
                .fold(0.0, f64::max);
            plateaus.push(PlateauCheck {
                start: pts[0],
                end: pts[pts.len() - 1],
                fbar_r2: reference,
                max_relative_deviation: dev,
                fbar_r2_constant: dev <= PLATEAU_CONSTANCY_TOL,
            });
        }
    }
    let unimodal = plateaus.is_empty() && sign_changes.len() == 1 && !sign_changes[0].upward;
    let linear_segment = plateaus.iter().any(|p| p.fbar_r2_constant);
    UnimodalityReport { sign_changes, plateaus, unimodal, linear_segment }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_price() {
        let r = optimal_price(&DemandDistribution::exponential(2.0).unwrap()).unwrap();
        assert_eq!(r.prices.len(), 1);
        assert!((r.prices[0] - 0.5).abs() < 1e-9);
        assert!(r.unique);
        assert!(r.sufficiency.holds());
        assert_eq!(r.boundary_case, BoundaryCase::Interior);
    }

    #[test]
    fn pareto_price_below_support() {
        let r = optimal_price(&DemandDistribution::pareto(1.0, 3.0).unwrap()).unwrap();
        assert_eq!(r.prices, vec![0.75]);
        assert_eq!(r.boundary_case, BoundaryCase::BelowL);
        assert!(r.residuals[0] < 1e-12);
    }

    #[test]
    fn price_below_the_first_scan_quantile() {
        let d = DemandDistribution::normal(3.48, 0.24).unwrap();
        let r = optimal_price(&d).unwrap();
        assert!(r.unique);
        let p = r.prices[0];
        assert!(p < scan_bounds(&d).0);
        assert!((p - 1.74).abs() < 1e-9 && (d.mrd(p) - p).abs() < 1e-9);
    }

    #[test]
    fn kumaraswamy_and_piecewise_prices() {
        let r = optimal_price(&DemandDistribution::kumaraswamy(2.0).unwrap()).unwrap();
        assert!((r.price().unwrap() - 0.25).abs() < 1e-9);
        let pw = DemandDistribution::piecewise_linear(&[(0.0, 0.0), (1.0 / 3.0, 7.0 / 9.0), (2.0 / 3.0, 7.0 / 9.0), (1.0, 1.0)])
            .unwrap();
        let r = optimal_price(&pw).unwrap();
        assert_eq!(r.prices.len(), 1);
        assert!((r.prices[0] - 5.0 / 12.0).abs() < 1e-9);
    }

    #[test]
    fn pareto_two_is_flat_not_divergent() {
        let r = optimal_price(&DemandDistribution::pareto(1.0, 2.0).unwrap()).unwrap();
        assert!(r.prices.is_empty());
        assert!(r.flat_optimum);
        assert_eq!(r.plateaus.len(), 1);
        assert!((r.plateaus[0].start - 1.0).abs() < 1e-6);
        assert!(!r.sufficiency.second_moment_finite);
    }

    #[test]
    fn heavy_pareto_has_no_finite_optimum() {
        let e = optimal_price(&DemandDistribution::pareto(1.0, 1.5).unwrap()).unwrap_err();
        assert!(matches!(e, EquilibriumError::NoFiniteOptimum { .. }));
    }

    #[test]
    fn deterministic_examples() {
        assert_eq!(deterministic_price(2.0), 1.0);
        assert_eq!(deterministic_price(1.0), 0.5);
        assert_eq!(deterministic_price(7.0), 3.5);
        let r = optimal_price(&DemandDistribution::deterministic(2.0).unwrap()).unwrap();
        assert!((r.price().unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn expected_profit_examples() {
        let e = DemandDistribution::exponential(1.0).unwrap();
        assert!((expected_profit(&e, 1.0, 1.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(expected_profit(&e, 0.0, 1.0), 0.0);
        let p = DemandDistribution::pareto(1.0, 3.0).unwrap();
        assert!((expected_profit(&p, 2.0, 1.0) - 0.25).abs() < 1e-15);
        let via_mrd = 2.0 * p.mrd(2.0) * p.survival(2.0);
        assert!((via_mrd - 0.25).abs() < 1e-15);
    }

    #[test]
    fn profit_curve_examples() {
        let e = DemandDistribution::exponential(1.0).unwrap();
        let grid = GridSpec::linear(0.0, 6.0, 64).build().unwrap();
        let c = profit_curve(&e, 1.0, &grid);
        let step = grid[1] - grid[0];
        assert!((c.argmax().0 - 1.0).abs() <= step);

        let det = DemandDistribution::deterministic(2.0).unwrap();
        let c = profit_curve(&det, 1.0, &GridSpec::linear(0.0, 3.0, 301).build().unwrap());
        assert!((c.argmax().0 - 1.0).abs() < 1e-12);
        assert!(c.samples.iter().all(|&(r, v)| (v - r * (2.0 - r).max(0.0)).abs() < 1e-12));

        let p2 = DemandDistribution::pareto(1.0, 2.0).unwrap();
        let c = profit_curve(&p2, 1.0, &GridSpec::linear(0.0, 10.0, 101).build().unwrap());
        assert!(c.is_nondecreasing(1e-12));
        assert!(c.samples.iter().filter(|s| s.0 >= 1.0).all(|s| (s.1 - 1.0).abs() < 1e-12));
    }

    #[test]
    fn unimodality_examples() {
        let e = DemandDistribution::exponential(1.0).unwrap();
        let grid = GridSpec::linear(0.05, 5.0, 100).build().unwrap();
        let rep = unimodality_report(&e, &grid);
        assert!(rep.unimodal);
        assert!(rep.sign_changes[0].from <= 1.0 && rep.sign_changes[0].to >= 1.0);

        let p2 = DemandDistribution::pareto(1.0, 2.0).unwrap();
        let grid = GridSpec::linear(1.0, 100.0, 200).build().unwrap();
        let rep = unimodality_report(&p2, &grid);
        assert!(!rep.unimodal);
        assert!(rep.linear_segment);
        assert!(rep.plateaus[0].max_relative_deviation < 1e-12);

        let u = DemandDistribution::kumaraswamy(1.0).unwrap();
        let grid = GridSpec::linear(0.01, 0.99, 99).build().unwrap();
        let rep = unimodality_report(&u, &grid);
        assert!(rep.unimodal);
        let c = rep.sign_changes[0];
        assert!(c.from <= 1.0 / 3.0 && c.to >= 1.0 / 3.0);
    }
}
