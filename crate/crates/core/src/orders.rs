//! Stochastic orders and comparative statics of the optimal price.
//!
//! Orders are certified on grids, not proved: a verdict "holds" when no grid
//! point violates the defining inequality by more than [`ORDER_TOL`] (scaled by
//! the magnitude of the compared values). Sign changes are refined by
//! bisection to [`CROSSING_TOL`].

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::distributions::spec::{from_value, SpecError};
use crate::distributions::{
    ClassificationReport, ConvexMap, ConvolutionMethod, DemandDistribution, Derived, DistributionError, Family,
    DEFAULT_CONVOLUTION_SAMPLES, DEFAULT_CONVOLUTION_SEED,
};
use crate::equilibrium::{optimal_price, EquilibriumResult};
use crate::numerics::{find_root_bracketed, GridError, GridSpec, DEFAULT_GRID_POINTS};

pub const ORDER_TOL: f64 = 1e-9;
pub const CROSSING_TOL: f64 = 1e-8;
/// Relative tolerance on the means for a convex-order verdict.
pub const MEAN_MATCH_TOL: f64 = 1e-6;
/// Tolerance of every asserted price ordering.
pub const PRICE_TOL: f64 = 1e-7;
/// Width of the Monte Carlo guard band in standard errors.
pub const GUARD_SIGMAS: f64 = 3.0;

#[derive(Debug, Error)]
pub enum OrderError {
    #[error("convex order needs equal means, got {mean1} and {mean2}")]
    MeansDiffer { mean1: f64, mean2: f64 },
    #[error("hazard rate order needs densities without gaps: {0}")]
    NoHazard(String),
    #[error("unknown order `{0}`; use st, hr, mrl, cx, disp or ew")]
    UnknownOrder(String),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("scenario: {0}")]
    Scenario(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OrderKind {
    St,
    Hr,
    Mrl,
    Cx,
    Disp,
    Ew,
}

impl OrderKind {
    pub const ALL: [OrderKind; 6] = [OrderKind::St, OrderKind::Hr, OrderKind::Mrl, OrderKind::Cx, OrderKind::Disp, OrderKind::Ew];

    pub fn name(self) -> &'static str {
        match self {
            OrderKind::St => "st",
            OrderKind::Hr => "hr",
            OrderKind::Mrl => "mrl",
            OrderKind::Cx => "cx",
            OrderKind::Disp => "disp",
            OrderKind::Ew => "ew",
        }
    }

    /// Whether the order compares values at demand levels rather than at
    /// probability levels.
    fn on_demand_axis(self) -> bool {
        !matches!(self, OrderKind::Disp | OrderKind::Ew)
    }
}

impl std::str::FromStr for OrderKind {
    type Err = OrderError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OrderKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| OrderError::UnknownOrder(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Demand,
    Probability,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderVerdict {
    pub order: OrderKind,
    pub holds_1_le_2: bool,
    pub holds_2_le_1: bool,
    /// Abscissae where the comparison changes sign.
    pub crossings: Vec<f64>,
    pub axis: Axis,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_points: usize,
    pub tol: f64,
    /// Smallest signed gap in the `1 <= 2` direction; negative when violated.
    pub margin: f64,
    /// Smallest signed gap in the `2 <= 1` direction.
    pub reverse_margin: f64,
}

/// Default demand grid: 512 linear points on `[0, hi]` merged with 512
/// geometric points, where `hi` is the larger `1 - 1e-6` quantile.
pub fn demand_grid(d1: &DemandDistribution, d2: &DemandDistribution, inside_both: bool) -> Result<Vec<f64>, GridError> {
    let (s1, s2) = (d1.support(), d2.support());
    let upper = if inside_both { s1.upper.min(s2.upper) } else { s1.upper.max(s2.upper) };
    let mut hi = d1.quantile(1.0 - 1e-6).max(d2.quantile(1.0 - 1e-6));
    if hi >= upper {
        hi = upper * (1.0 - 1e-9);
    }
    let lo = d1.quantile(1e-6).min(d2.quantile(1e-6)).max(hi * 1e-9);
    let mut g = GridSpec::linear(0.0, hi, DEFAULT_GRID_POINTS).build()?;
    if lo < hi {
        g.extend(GridSpec::geometric(lo, hi, DEFAULT_GRID_POINTS).build()?);
    }
    g.sort_by(f64::total_cmp);
    g.dedup();
    Ok(g)
}

/// Probability grid on `[1e-6, 1 - 1e-6]`, dense near both ends.
pub fn probability_grid() -> Vec<f64> {
    let mut g = GridSpec::linear(1e-3, 1.0 - 1e-3, DEFAULT_GRID_POINTS).build().expect("static grid");
    let ends = GridSpec::geometric(1e-6, 1e-3, 64).build().expect("static grid");
    g.extend(ends.iter().copied());
    g.extend(ends.iter().map(|p| 1.0 - p));
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

/// Checks `order` between `d1` and `d2` in both directions.
///
/// `grid` overrides the default abscissae (demand levels, or probability
/// levels for `disp` and `ew`).
pub fn check_order(
    order: OrderKind,
    d1: &DemandDistribution,
    d2: &DemandDistribution,
    grid: Option<&[f64]>,
) -> Result<OrderVerdict, OrderError> {
    check_order_with(order, d1, d2, grid, ORDER_TOL)
}

/// [`check_order`] with an explicit violation tolerance.
pub fn check_order_with(
    order: OrderKind,
    d1: &DemandDistribution,
    d2: &DemandDistribution,
    grid: Option<&[f64]>,
    tol: f64,
) -> Result<OrderVerdict, OrderError> {
    if order == OrderKind::Cx {
        let (mean1, mean2) = (d1.mean(), d2.mean());
        if !((mean1 - mean2).abs() <= MEAN_MATCH_TOL * (1.0 + mean1.abs())) {
            return Err(OrderError::MeansDiffer { mean1, mean2 });
        }
    }
    if order == OrderKind::Hr {
        for d in [d1, d2] {
            if !d.has_gapless_density() {
                return Err(OrderError::NoHazard(d.describe()));
            }
        }
    }
    let owned;
    let xs = match grid {
        Some(g) => g,
        None => {
            owned = if order.on_demand_axis() { demand_grid(d1, d2, order == OrderKind::Hr)? } else { probability_grid() };
            &owned
        }
    };
    if xs.len() < 2 {
        return Err(GridError::TooFewPoints { got: xs.len(), min: 2 }.into());
    }
    let hazard = |d: &DemandDistribution, r: f64| d.hazard(r).map(|h| h.value).unwrap_or(f64::INFINITY);
    let gap = |r: f64| -> (f64, f64) {
        let (a, b) = match order {
            OrderKind::St => (d1.survival(r), d2.survival(r)),
            // X1 <=hr X2 iff h1 >= h2.
            OrderKind::Hr => (hazard(d2, r), hazard(d1, r)),
            OrderKind::Mrl => (d1.mrd(r), d2.mrd(r)),
            OrderKind::Cx => (d1.tail_integral(r), d2.tail_integral(r)),
            OrderKind::Ew => (d1.tail_integral(d1.quantile(r)), d2.tail_integral(d2.quantile(r))),
            OrderKind::Disp => unreachable!(),
        };
        (b - a, a.abs().max(b.abs()).max(1.0))
    };
    let axis = if order.on_demand_axis() { Axis::Demand } else { Axis::Probability };
    let mut v = if order == OrderKind::Disp { dispersive(d1, d2, xs, tol) } else { pointwise(xs, gap, tol) };
    v.order = order;
    v.axis = axis;
    Ok(v)
}

fn blank(xs: &[f64], tol: f64) -> OrderVerdict {
    OrderVerdict {
        order: OrderKind::St,
        holds_1_le_2: true,
        holds_2_le_1: true,
        crossings: Vec::new(),
        axis: Axis::Demand,
        grid_lo: xs[0],
        grid_hi: xs[xs.len() - 1],
        grid_points: xs.len(),
        tol,
        margin: f64::INFINITY,
        reverse_margin: f64::INFINITY,
    }
}

fn sign(gap: f64, scale: f64, tol: f64) -> i8 {
    if gap > tol * scale {
        1
    } else if gap < -tol * scale {
        -1
    } else {
        0
    }
}

fn pointwise(xs: &[f64], gap: impl Fn(f64) -> (f64, f64), tol: f64) -> OrderVerdict {
    let mut v = blank(xs, tol);
    let mut last: Option<(f64, i8)> = None;
    for &x in xs {
        let (g, scale) = gap(x);
        if g.is_nan() {
            continue;
        }
        v.margin = v.margin.min(g);
        v.reverse_margin = v.reverse_margin.min(-g);
        let s = sign(g, scale, tol);
        v.holds_1_le_2 &= s >= 0;
        v.holds_2_le_1 &= s <= 0;
        if s == 0 {
            continue;
        }
        if let Some((x0, s0)) = last {
            if s0 != s {
                let root = find_root_bracketed(|u| gap(u).0, x0, x, CROSSING_TOL).map(|r| r.root).unwrap_or(0.5 * (x0 + x));
                v.crossings.push(root);
            }
        }
        last = Some((x, s));
    }
    v
}

/// `X1 <=disp X2` iff `Q2 - Q1` is nondecreasing; every pair `p <= q` of the
/// grid is compared through running extrema.
fn dispersive(d1: &DemandDistribution, d2: &DemandDistribution, ps: &[f64], tol: f64) -> OrderVerdict {
    let mut v = blank(ps, tol);
    let (mut run_max, mut run_min) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut prev: Option<(f64, f64)> = None;
    let mut last_sign: Option<(f64, i8)> = None;
    for &p in ps {
        let (q1, q2) = (d1.quantile(p), d2.quantile(p));
        let delta = q2 - q1;
        let scale = q1.abs().max(q2.abs()).max(1.0);
        run_max = run_max.max(delta);
        run_min = run_min.min(delta);
        let up = delta - run_max;
        let down = run_min - delta;
        v.margin = v.margin.min(up);
        v.reverse_margin = v.reverse_margin.min(down);
        v.holds_1_le_2 &= up >= -tol * scale;
        v.holds_2_le_1 &= down >= -tol * scale;
        if let Some((p0, d0)) = prev {
            let s = sign(delta - d0, scale, tol);
            if s != 0 {
                if let Some((_, s0)) = last_sign {
                    if s0 != s {
                        v.crossings.push(0.5 * (p0 + p));
                    }
                }
                last_sign = Some((p, s));
            }
        }
        prev = Some((p, delta));
    }
    v
}

#[derive(Debug, Clone, Serialize)]
pub struct LogRatioReport {
    /// `(r, log(int_r F1_bar / int_r F2_bar))`.
    pub samples: Vec<(f64, f64)>,
    pub all_positive: bool,
    pub increasing: bool,
}

/// Log ratio of the tail integrals of `d1` and `d2`, without requiring equal means.
pub fn tail_integral_log_ratio(d1: &DemandDistribution, d2: &DemandDistribution, points: usize) -> Result<LogRatioReport, OrderError> {
    let mut hi = d1.quantile(1.0 - 1e-6).min(d2.quantile(1.0 - 1e-6));
    let upper = d1.support().upper.min(d2.support().upper);
    if hi >= upper {
        hi = upper * (1.0 - 1e-9);
    }
    let grid = GridSpec::linear(0.0, hi, points).build()?;
    let samples: Vec<(f64, f64)> = grid.iter().map(|&r| (r, (d1.tail_integral(r) / d2.tail_integral(r)).ln())).collect();
    Ok(LogRatioReport {
        all_positive: samples.iter().all(|s| s.1 > 0.0),
        increasing: samples.windows(2).all(|w| w[1].1 >= w[0].1 - ORDER_TOL),
        samples,
    })
}

/// A demand transformation from the comparative-statics results.
#[derive(Debug, Clone)]
pub enum TransformNode {
    Scale { of: DemandDistribution, c: f64 },
    Convolve { of: DemandDistribution, with: DemandDistribution, method: ConvolutionMethod },
    Mixture { p: f64, first: DemandDistribution, second: DemandDistribution },
    ConvexMap { map: ConvexMap, of: DemandDistribution },
    MeanPreserving { kappa: f64, of: DemandDistribution },
}

pub fn apply_transform(node: &TransformNode) -> Result<DemandDistribution, DistributionError> {
    match node {
        TransformNode::Scale { of, c } => of.scaled(*c),
        TransformNode::Convolve { of, with, method } => of.convolve(with, *method),
        TransformNode::Mixture { p, first, second } => DemandDistribution::mixture(*p, first, second),
        TransformNode::ConvexMap { map, of } => of.convex_map(*map),
        TransformNode::MeanPreserving { kappa, of } => of.mean_preserving(*kappa),
    }
}

/// Optimal prices of one market, with a Monte Carlo standard error when the
/// law is an empirical convolution.
#[derive(Debug, Clone, Serialize)]
pub struct PriceSet {
    pub label: String,
    pub law: String,
    pub prices: Vec<f64>,
    pub stderr: f64,
    pub flat_optimum: bool,
    pub error: Option<String>,
    #[serde(skip)]
    pub classification: Option<ClassificationReport>,
    #[serde(skip)]
    pub second_moment_finite: bool,
}

impl PriceSet {
    pub fn of(label: &str, d: &DemandDistribution) -> Self {
        let mut set = PriceSet {
            label: label.to_string(),
            law: d.describe(),
            prices: Vec::new(),
            stderr: 0.0,
            flat_optimum: false,
            error: None,
            classification: None,
            second_moment_finite: d.second_moment().is_finite(),
        };
        match optimal_price(d) {
            Ok(EquilibriumResult { prices, flat_optimum, classification, .. }) => {
                set.stderr = prices.iter().map(|&r| empirical_price_stderr(d, r).unwrap_or(0.0)).fold(0.0, f64::max);
                set.prices = prices;
                set.flat_optimum = flat_optimum;
                set.classification = classification;
            }
            Err(e) => set.error = Some(e.to_string()),
        }
        set
    }

    fn strictly_dgmrd(&self) -> bool {
        self.classification.as_ref().is_some_and(|c| c.dgmrd_strict)
    }

    fn dmrd(&self) -> bool {
        self.classification.as_ref().is_some_and(|c| c.dmrd)
    }

    fn ifr(&self) -> bool {
        self.classification.as_ref().is_some_and(|c| c.ifr == Some(true))
    }

    fn min(&self) -> f64 {
        self.prices.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn max(&self) -> f64 {
        self.prices.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Delta-method standard error of the fixed point of an empirical
/// convolution, `None` for other laws.
pub fn empirical_price_stderr(d: &DemandDistribution, r: f64) -> Option<f64> {
    match d.family() {
        Family::Derived(Derived::Convolution { method: ConvolutionMethod::Empirical { .. }, table, .. }) => {
            Some(crate::sim::fixed_point_stderr(table.abscissae(), r))
        }
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    HypothesisFailed,
    Inconclusive,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::HypothesisFailed => "hypothesis_failed",
            Status::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Premise {
    pub name: String,
    pub holds: bool,
}

/// One row of the comparative-statics summary.
#[derive(Debug, Clone, Serialize)]
pub struct StaticsRow {
    pub theorem: String,
    pub transformation: String,
    pub hypothesis: String,
    pub price_relation: String,
    pub status: Status,
    pub premises: Vec<Premise>,
    pub prices: Vec<PriceSet>,
    /// Smallest slack of the asserted inequalities.
    pub margin: Option<f64>,
    pub guard_band: f64,
    pub notes: Vec<String>,
}

impl StaticsRow {
    fn new(theorem: &str, transformation: &str, hypothesis: &str, price_relation: &str) -> Self {
        Self {
            theorem: theorem.into(),
            transformation: transformation.into(),
            hypothesis: hypothesis.into(),
            price_relation: price_relation.into(),
            status: Status::Inconclusive,
            premises: Vec::new(),
            prices: Vec::new(),
            margin: None,
            guard_band: PRICE_TOL,
            notes: Vec::new(),
        }
    }

    fn premise(&mut self, name: impl Into<String>, holds: bool) {
        self.premises.push(Premise { name: name.into(), holds });
    }

    fn regular(&mut self, set: &PriceSet) {
        self.premise(format!("{} strictly DGMRD", set.label), set.strictly_dgmrd());
        self.premise(format!("{} finite second moment", set.label), set.second_moment_finite);
    }

    fn hypotheses_hold(&self) -> bool {
        self.premises.iter().all(|p| p.holds)
    }

    /// Asserts `all(lo) <= all(hi)` for each pair and settles the status.
    fn assert_le(&mut self, pairs: &[(usize, usize)]) {
        if !self.hypotheses_hold() {
            self.status = Status::HypothesisFailed;
            return;
        }
        let mut margin = f64::INFINITY;
        let mut ok = true;
        for &(i, j) in pairs {
            let (a, b) = (&self.prices[i], &self.prices[j]);
            if a.prices.is_empty() || b.prices.is_empty() {
                self.notes.push(format!("no isolated price for {} or {}", a.label, b.label));
                ok = false;
                continue;
            }
            let guard = PRICE_TOL + GUARD_SIGMAS * (a.stderr + b.stderr);
            self.guard_band = self.guard_band.max(guard);
            let slack = b.min() - a.max();
            margin = margin.min(slack);
            ok &= slack >= -guard;
        }
        self.margin = Some(margin);
        self.status = if ok { Status::Pass } else { Status::Fail };
    }
}

/// A comparative-statics experiment.
#[derive(Debug, Clone)]
pub enum Scenario {
    /// `X1 <=mrl X2` orders the prices.
    Mrl { x1: DemandDistribution, x2: DemandDistribution },
    SizeScale { x: DemandDistribution, c: f64 },
    SizeSum { x: DemandDistribution, z: DemandDistribution, method: ConvolutionMethod },
    TransformSum { x1: DemandDistribution, x2: DemandDistribution, z: DemandDistribution, method: ConvolutionMethod },
    TransformConvex { x1: DemandDistribution, x2: DemandDistribution, map: ConvexMap },
    TransformMixture { x1: DemandDistribution, x2: DemandDistribution, p: f64 },
    Stochastic { x1: DemandDistribution, x2: DemandDistribution },
    Convex { x1: DemandDistribution, x2: DemandDistribution },
    ExcessWealth { x1: DemandDistribution, x2: DemandDistribution },
    Dispersive { x1: DemandDistribution, x2: DemandDistribution },
    CoefficientOfVariation { x: DemandDistribution, pairs: Vec<(f64, f64)> },
    MeanPreserving { x: DemandDistribution, kappas: Vec<f64> },
}

/// Parses a scenario such as
/// `{"theorem": "transform_iii", "X1": {...}, "X2": {...}, "p": 0.3}`.
pub fn parse_scenario(text: &str) -> Result<Scenario, OrderError> {
    let v: Value = serde_json::from_str(text).map_err(SpecError::from)?;
    scenario_from_value(&v)
}

pub fn scenario_from_value(v: &Value) -> Result<Scenario, OrderError> {
    let bad = |m: String| OrderError::Scenario(m);
    let obj = v.as_object().ok_or_else(|| bad("expected an object".into()))?;
    let law = |k: &str| -> Result<DemandDistribution, OrderError> {
        Ok(from_value(obj.get(k).ok_or_else(|| bad(format!("missing `{k}`")))?)?)
    };
    let num = |k: &str| obj.get(k).and_then(Value::as_f64).ok_or_else(|| bad(format!("missing number `{k}`")));
    let method = || -> Result<ConvolutionMethod, OrderError> {
        match obj.get("method").and_then(Value::as_str).unwrap_or("empirical") {
            "grid" => Ok(ConvolutionMethod::Grid),
            "empirical" => Ok(ConvolutionMethod::Empirical {
                samples: obj.get("samples").and_then(Value::as_u64).map_or(DEFAULT_CONVOLUTION_SAMPLES, |s| s as usize),
                seed: obj.get("seed").and_then(Value::as_u64).unwrap_or(DEFAULT_CONVOLUTION_SEED),
            }),
            m => Err(bad(format!("unknown convolution method `{m}`"))),
        }
    };
    let theorem = obj.get("theorem").and_then(Value::as_str).ok_or_else(|| bad("missing `theorem`".into()))?;
    Ok(match theorem {
        "mrl" | "lemma" => Scenario::Mrl { x1: law("X1")?, x2: law("X2")? },
        "size_i" | "scale" => Scenario::SizeScale { x: law("X")?, c: num("c")? },
        "size_ii" | "sum" => Scenario::SizeSum { x: law("X")?, z: law("Z")?, method: method()? },
        "transform_i" => Scenario::TransformSum { x1: law("X1")?, x2: law("X2")?, z: law("Z")?, method: method()? },
        "transform_ii" => {
            let m = obj.get("map").ok_or_else(|| bad("missing `map`".into()))?;
            let map: ConvexMap = serde_json::from_value(m.clone()).map_err(|e| bad(format!("map: {e}")))?;
            Scenario::TransformConvex { x1: law("X1")?, x2: law("X2")?, map }
        }
        "transform_iii" | "mixture" => Scenario::TransformMixture { x1: law("X1")?, x2: law("X2")?, p: num("p")? },
        "st" => Scenario::Stochastic { x1: law("X1")?, x2: law("X2")? },
        "cx" => Scenario::Convex { x1: law("X1")?, x2: law("X2")? },
        "var_i" | "ew" => Scenario::ExcessWealth { x1: law("X1")?, x2: law("X2")? },
        "var_ii" | "disp" => Scenario::Dispersive { x1: law("X1")?, x2: law("X2")? },
        "cv" => {
            let pairs = obj
                .get("pairs")
                .and_then(Value::as_array)
                .ok_or_else(|| bad("missing `pairs`".into()))?
                .iter()
                .map(|p| match p.as_array().map(|a| a.iter().map(Value::as_f64).collect::<Vec<_>>()) {
                    Some(a) if a.len() == 2 && a[0].is_some() && a[1].is_some() => Ok((a[0].unwrap(), a[1].unwrap())),
                    _ => Err(bad("each pair must be [delta, lambda]".into())),
                })
                .collect::<Result<Vec<_>, _>>()?;
            Scenario::CoefficientOfVariation { x: law("X")?, pairs }
        }
        "mean_preserving" => {
            let kappas = match obj.get("kappas").or_else(|| obj.get("kappa")) {
                Some(Value::Array(a)) => a.iter().map(|k| k.as_f64().ok_or_else(|| bad("kappas must be numbers".into()))).collect::<Result<_, _>>()?,
                Some(k) => vec![k.as_f64().ok_or_else(|| bad("kappa must be a number".into()))?],
                None => vec![0.0, 0.25, 0.5, 0.75],
            };
            Scenario::MeanPreserving { x: law("X")?, kappas }
        }
        other => return Err(bad(format!("unknown theorem `{other}`"))),
    })
}

/// Runs one scenario. Failed hypotheses are reported in the row, not raised.
pub fn statics_suite(scenario: &Scenario) -> Result<StaticsRow, OrderError> {
    Ok(match scenario {
        Scenario::Mrl { x1, x2 } => {
            let mut row = StaticsRow::new("mrl", "X1 <=mrl X2", "X1, X2 strictly DGMRD, finite second moments", "r*_1 <= r*_2");
            let v = check_order(OrderKind::Mrl, x1, x2, None)?;
            row.premise("X1 <=mrl X2", v.holds_1_le_2);
            pair_prices(&mut row, x1, x2);
            row.assert_le(&[(0, 1)]);
            row
        }
        Scenario::SizeScale { x, c } => {
            let mut row = StaticsRow::new("size_i", "X -> cX", "c >= 1, X DGMRD", "r*_X <= r*_cX");
            let cx = x.scaled(*c)?;
            row.premise("c >= 1", *c >= 1.0);
            row.prices.push(PriceSet::of("X", x));
            row.prices.push(PriceSet::of("cX", &cx));
            let p = &row.prices[0];
            let (dgmrd, m2) = (p.classification.as_ref().is_some_and(|c| c.dgmrd), p.second_moment_finite);
            row.premise("X DGMRD", dgmrd);
            row.premise("X finite second moment", m2);
            row.assert_le(&[(0, 1)]);
            row
        }
        Scenario::SizeSum { x, z, method } => {
            let mut row = StaticsRow::new("size_ii", "X -> X + Z", "X DMRD, Z >= 0 with finite second moment", "r*_X <= r*_{X+Z}");
            let s = x.convolve(z, *method)?;
            row.prices.push(PriceSet::of("X", x));
            row.prices.push(PriceSet::of("X+Z", &s));
            let dmrd = row.prices[0].dmrd();
            let m2 = row.prices[0].second_moment_finite;
            row.premise("X DMRD", dmrd);
            row.premise("X finite second moment", m2);
            row.premise("Z nonnegative", z.support().lower >= 0.0);
            row.premise("Z finite second moment", z.second_moment().is_finite());
            row.assert_le(&[(0, 1)]);
            row
        }
        Scenario::TransformSum { x1, x2, z, method } => {
            let mut row = StaticsRow::new("transform_i", "X1 <=mrl X2, add Z", "Z >= 0 IFR, independent", "r*_{X1+Z} <= r*_{X2+Z}");
            mrl_premise(&mut row, x1, x2)?;
            pair_prices(&mut row, x1, x2);
            let zs = PriceSet::of("Z", z);
            row.premise("Z IFR", zs.ifr());
            row.premise("Z nonnegative", z.support().lower >= 0.0);
            row.prices.push(PriceSet::of("X1+Z", &x1.convolve(z, *method)?));
            row.prices.push(PriceSet::of("X2+Z", &x2.convolve(z, *method)?));
            row.assert_le(&[(2, 3)]);
            row
        }
        Scenario::TransformConvex { x1, x2, map } => {
            let mut row = StaticsRow::new("transform_ii", "X1 <=mrl X2, apply phi", "phi increasing and convex", "r*_{phi(X1)} <= r*_{phi(X2)}");
            mrl_premise(&mut row, x1, x2)?;
            pair_prices(&mut row, x1, x2);
            row.premise(format!("phi = {map} increasing and convex"), map.validate().is_ok());
            row.prices.push(PriceSet::of("phi(X1)", &x1.convex_map(*map)?));
            row.prices.push(PriceSet::of("phi(X2)", &x2.convex_map(*map)?));
            row.assert_le(&[(2, 3)]);
            row
        }
        Scenario::TransformMixture { x1, x2, p } => {
            let mut row = StaticsRow::new("transform_iii", "X1 <=mrl X2, mix", "X_p ~ p F1 + (1 - p) F2, p in (0, 1)", "r*_1 <= r*_{X_p} <= r*_2");
            mrl_premise(&mut row, x1, x2)?;
            pair_prices(&mut row, x1, x2);
            row.premise("p in (0, 1)", *p > 0.0 && *p < 1.0);
            row.prices.push(PriceSet::of("X_p", &DemandDistribution::mixture(*p, x1, x2)?));
            row.assert_le(&[(0, 2), (2, 1)]);
            row
        }
        Scenario::Stochastic { x1, x2 } => {
            let mut row = StaticsRow::new("st", "X1 <=st X2", "-", "no general ordering");
            let v = check_order(OrderKind::St, x1, x2, None)?;
            row.premise("X1 <=st X2", v.holds_1_le_2);
            pair_prices(&mut row, x1, x2);
            demonstrate(&mut row);
            row
        }
        Scenario::Convex { x1, x2 } => {
            let mut row = StaticsRow::new("cx", "X1 <=cx X2", "-", "no general ordering");
            match check_order(OrderKind::Cx, x1, x2, None) {
                Ok(v) => row.premise("X1 <=cx X2", v.holds_1_le_2),
                Err(OrderError::MeansDiffer { mean1, mean2 }) => {
                    row.premise("E X1 = E X2", false);
                    let lr = tail_integral_log_ratio(x2, x1, DEFAULT_GRID_POINTS)?;
                    row.notes.push(format!(
                        "means {mean1:.6} and {mean2:.6} differ; log(int F2_bar / int F1_bar) positive on the grid: {}, increasing: {}",
                        lr.all_positive, lr.increasing
                    ));
                }
                Err(e) => return Err(e),
            }
            pair_prices(&mut row, x1, x2);
            demonstrate(&mut row);
            row
        }
        Scenario::ExcessWealth { x1, x2 } => {
            let mut row = StaticsRow::new("var_i", "X1 <=ew X2", "L1 <= L2 and X1 or X2 DMRD", "r*_1 <= r*_2");
            let v = check_order(OrderKind::Ew, x1, x2, None)?;
            row.premise("X1 <=ew X2", v.holds_1_le_2);
            row.premise("L1 <= L2", x1.support().lower <= x2.support().lower);
            pair_prices(&mut row, x1, x2);
            let dmrd = row.prices[0].dmrd() || row.prices[1].dmrd();
            row.premise("X1 or X2 DMRD", dmrd);
            row.assert_le(&[(0, 1)]);
            row
        }
        Scenario::Dispersive { x1, x2 } => {
            let mut row = StaticsRow::new("var_ii", "X1 <=disp X2", "X1 or X2 IFR", "r*_1 <= r*_2");
            let v = check_order(OrderKind::Disp, x1, x2, None)?;
            row.premise("X1 <=disp X2", v.holds_1_le_2);
            pair_prices(&mut row, x1, x2);
            let ifr = row.prices[0].ifr() || row.prices[1].ifr();
            row.premise("X1 or X2 IFR", ifr);
            row.assert_le(&[(0, 1)]);
            row
        }
        Scenario::CoefficientOfVariation { x, pairs } => {
            let mut row = StaticsRow::new("cv", "X_i = delta_i + lambda_i X", "CV_1 <= CV_2", "no general ordering");
            let report = cv_comparison(x, pairs)?;
            row.notes.push(format!("lower CV implies a higher price for every pair: {}", report.lower_cv_higher_price));
            for r in &report.rows {
                row.notes.push(format!("{}: CV = {:.6}, r* = {:?}", r.label, r.cv, r.prices));
            }
            for (i, &(delta, lambda)) in pairs.iter().enumerate() {
                row.prices.push(PriceSet::of(&format!("X_{}", i + 1), &x.affine(delta, lambda)?));
            }
            demonstrate(&mut row);
            row
        }
        Scenario::MeanPreserving { x, kappas } => {
            let mut row = StaticsRow::new("mean_preserving", "X_k = k X + (1 - k) E X", "k in [0, 1], X DGMRD", "r*_k <= r*, nondecreasing in k");
            let mut ks = kappas.clone();
            ks.sort_by(f64::total_cmp);
            ks.dedup();
            row.premise("k in [0, 1]", ks.iter().all(|k| (0.0..=1.0).contains(k)));
            row.prices.push(PriceSet::of("X", x));
            let base = &row.prices[0];
            let (dgmrd, m2) = (base.classification.as_ref().is_some_and(|c| c.dgmrd), base.second_moment_finite);
            row.premise("X DGMRD", dgmrd);
            row.premise("X finite second moment", m2);
            if !row.hypotheses_hold() {
                row.status = Status::HypothesisFailed;
                return Ok(row);
            }
            for &k in &ks {
                row.prices.push(PriceSet::of(&format!("X_{k}"), &x.mean_preserving(k)?));
            }
            let n = row.prices.len();
            let mut pairs: Vec<(usize, usize)> = (1..n).map(|i| (i, 0)).collect();
            pairs.extend((1..n.saturating_sub(1)).map(|i| (i, i + 1)));
            row.assert_le(&pairs);
            row
        }
    })
}

fn pair_prices(row: &mut StaticsRow, x1: &DemandDistribution, x2: &DemandDistribution) {
    let a = PriceSet::of("X1", x1);
    let b = PriceSet::of("X2", x2);
    if !matches!(row.theorem.as_str(), "st" | "cx") {
        row.regular(&a);
        row.regular(&b);
    }
    row.prices.push(a);
    row.prices.push(b);
}

fn mrl_premise(row: &mut StaticsRow, x1: &DemandDistribution, x2: &DemandDistribution) -> Result<(), OrderError> {
    let v = check_order(OrderKind::Mrl, x1, x2, None)?;
    row.premise("X1 <=mrl X2", v.holds_1_le_2);
    Ok(())
}

/// Rows whose price relation is not determined: report both orderings.
fn demonstrate(row: &mut StaticsRow) {
    row.status = Status::Inconclusive;
    if let [a, b, ..] = row.prices.as_slice() {
        if !a.prices.is_empty() && !b.prices.is_empty() {
            row.margin = Some(b.min() - a.max());
            let rel = if a.max() <= b.min() { "<=" } else if b.max() <= a.min() { ">=" } else { "overlap" };
            row.notes.push(format!("r*_1 {rel} r*_2 ({:?} vs {:?})", a.prices, b.prices));
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CvRow {
    pub label: String,
    pub mean: f64,
    pub sd: f64,
    pub cv: f64,
    pub prices: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CvReport {
    pub rows: Vec<CvRow>,
    /// Whether every strictly lower CV came with a strictly higher price.
    pub lower_cv_higher_price: bool,
    /// Index pairs `(i, j)` with `CV_i < CV_j` but `r*_i <= r*_j`.
    pub violations: Vec<(usize, usize)>,
}

/// Prices of the affine children `delta + lambda X` against their CVs.
pub fn cv_comparison(x: &DemandDistribution, pairs: &[(f64, f64)]) -> Result<CvReport, OrderError> {
    let laws = pairs
        .iter()
        .map(|&(delta, lambda)| Ok((format!("{delta} + {lambda} X"), x.affine(delta, lambda)?)))
        .collect::<Result<Vec<_>, DistributionError>>()?;
    Ok(cv_report(&laws))
}

/// Compares the CV ordering of arbitrary laws with their price ordering.
pub fn cv_report(laws: &[(String, DemandDistribution)]) -> CvReport {
    let rows: Vec<CvRow> = laws
        .iter()
        .map(|(label, d)| {
            let (mean, sd) = (d.mean(), d.variance().sqrt());
            let prices = optimal_price(d).map(|e| e.prices).unwrap_or_default();
            CvRow { label: label.clone(), mean, sd, cv: sd / mean, prices }
        })
        .collect();
    let mut violations = Vec::new();
    for (i, a) in rows.iter().enumerate() {
        for (j, b) in rows.iter().enumerate() {
            if a.cv < b.cv - 1e-12 {
                let (ra, rb) = (a.prices.first().copied(), b.prices.first().copied());
                if let (Some(ra), Some(rb)) = (ra, rb) {
                    if ra <= rb {
                        violations.push((i, j));
                    }
                }
            }
        }
    }
    CvReport { lower_cv_higher_price: violations.is_empty(), violations, rows }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn piecewise() -> DemandDistribution {
        DemandDistribution::piecewise_linear(&[(0.0, 0.0), (1.0 / 3.0, 7.0 / 9.0), (2.0 / 3.0, 7.0 / 9.0), (1.0, 1.0)]).unwrap()
    }

    #[test]
    fn stochastic_counterexample_orders() {
        let x = DemandDistribution::uniform(0.0, 1.0).unwrap();
        let y = piecewise();
        let st = check_order(OrderKind::St, &x, &y, None).unwrap();
        assert!(st.holds_2_le_1 && !st.holds_1_le_2);
        let mrl = check_order(OrderKind::Mrl, &x, &y, None).unwrap();
        assert!(!mrl.holds_1_le_2 && !mrl.holds_2_le_1);
        assert!(!mrl.crossings.is_empty());
        assert!(matches!(check_order(OrderKind::Hr, &x, &y, None), Err(OrderError::NoHazard(_))));
    }

    #[test]
    fn reflexive_orders() {
        let d = DemandDistribution::exponential(1.0).unwrap();
        for k in OrderKind::ALL {
            let v = check_order(k, &d, &d, None).unwrap();
            assert!(v.holds_1_le_2 && v.holds_2_le_1, "{k:?}");
            assert_eq!(v.margin, 0.0);
            assert!(v.crossings.is_empty());
        }
    }

    #[test]
    fn exponential_rates_are_ordered() {
        let a = DemandDistribution::exponential(2.0).unwrap();
        let b = DemandDistribution::exponential(1.0).unwrap();
        for k in [OrderKind::St, OrderKind::Hr, OrderKind::Mrl, OrderKind::Disp, OrderKind::Ew] {
            let v = check_order(k, &a, &b, None).unwrap();
            assert!(v.holds_1_le_2 && !v.holds_2_le_1, "{k:?}");
        }
        assert!(matches!(check_order(OrderKind::Cx, &a, &b, None), Err(OrderError::MeansDiffer { .. })));
    }

    #[test]
    fn mean_preserving_contraction_is_convex_smaller() {
        let x = DemandDistribution::gamma(2.0, 1.0).unwrap();
        let xk = x.mean_preserving(0.5).unwrap();
        for k in [OrderKind::Cx, OrderKind::Ew, OrderKind::Disp, OrderKind::Mrl] {
            let v = check_order(k, &xk, &x, None).unwrap();
            assert!(v.holds_1_le_2, "{k:?} margin {}", v.margin);
        }
    }

    #[test]
    fn transforms() {
        let e = DemandDistribution::exponential(1.0).unwrap();
        let s = apply_transform(&TransformNode::Scale { of: e.clone(), c: 2.0 }).unwrap();
        assert!((optimal_price(&s).unwrap().price().unwrap() - 2.0).abs() < 1e-8);
        let u = DemandDistribution::uniform(0.0, 1.0).unwrap();
        let k0 = apply_transform(&TransformNode::MeanPreserving { kappa: 0.0, of: u }).unwrap();
        assert_eq!(k0.family(), &Family::Deterministic { value: 0.5 });
        assert!((optimal_price(&k0).unwrap().price().unwrap() - 0.25).abs() < 1e-12);
        let e2 = DemandDistribution::exponential(2.0).unwrap();
        let m = apply_transform(&TransformNode::Mixture { p: 0.5, first: e.clone(), second: e2 }).unwrap();
        let r = 0.7f64;
        assert!((m.cdf(r) - (0.5 * (1.0 - (-r).exp()) + 0.5 * (1.0 - (-2.0 * r).exp()))).abs() < 1e-15);
        assert!(apply_transform(&TransformNode::Mixture { p: 1.0, first: e.clone(), second: e.clone() }).is_err());
        assert!(apply_transform(&TransformNode::MeanPreserving { kappa: 1.5, of: e.clone() }).is_err());
        assert!(apply_transform(&TransformNode::ConvexMap { map: ConvexMap::Power { gamma: 0.5 }, of: e }).is_err());
    }

    #[test]
    fn lemma_and_size_rows() {
        let x1 = DemandDistribution::kumaraswamy(3.0).unwrap();
        let x2 = DemandDistribution::kumaraswamy(1.0).unwrap();
        let row = statics_suite(&Scenario::Mrl { x1, x2 }).unwrap();
        assert_eq!(row.status, Status::Pass, "{row:?}");
        assert!((row.prices[0].prices[0] - 0.2).abs() < 1e-9);
        let x = DemandDistribution::exponential(1.0).unwrap();
        let row = statics_suite(&Scenario::SizeScale { x, c: 3.0 }).unwrap();
        assert_eq!(row.status, Status::Pass);
        assert!((row.prices[1].prices[0] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn hypothesis_failures_are_reported() {
        let x1 = DemandDistribution::kumaraswamy(1.0).unwrap();
        let x2 = DemandDistribution::kumaraswamy(3.0).unwrap();
        let row = statics_suite(&Scenario::Mrl { x1, x2 }).unwrap();
        assert_eq!(row.status, Status::HypothesisFailed);
        assert!(row.premises.iter().any(|p| p.name == "X1 <=mrl X2" && !p.holds));
    }

    #[test]
    fn mean_preserving_row() {
        let x = DemandDistribution::exponential(1.0).unwrap();
        let row = statics_suite(&Scenario::MeanPreserving { x, kappas: vec![0.25, 0.5, 0.75] }).unwrap();
        assert_eq!(row.status, Status::Pass, "{row:?}");
        assert!(row.prices.iter().all(|p| p.prices[0] <= 1.0 + 1e-9));
    }

    #[test]
    fn stochastic_row_is_a_demonstration() {
        let row = statics_suite(&Scenario::Stochastic { x1: piecewise(), x2: DemandDistribution::uniform(0.0, 1.0).unwrap() }).unwrap();
        assert_eq!(row.status, Status::Inconclusive);
        assert!(row.premises[0].holds);
        assert!((row.prices[0].prices[0] - 5.0 / 12.0).abs() < 1e-7);
        assert!((row.prices[1].prices[0] - 1.0 / 3.0).abs() < 1e-7);
        assert!(row.margin.unwrap() < 0.0);
    }

    #[test]
    fn cv_does_not_predict_prices() {
        let laws = vec![
            ("N(1, 0.1)".to_string(), DemandDistribution::normal(1.0, 0.1).unwrap()),
            ("N(2, 0.3)".to_string(), DemandDistribution::normal(2.0, 0.3).unwrap()),
        ];
        let rep = cv_report(&laws);
        assert!(rep.rows[0].cv < rep.rows[1].cv);
        assert!(rep.rows[0].prices[0] < rep.rows[1].prices[0]);
        assert!(!rep.lower_cv_higher_price);
        let x = DemandDistribution::exponential(1.0).unwrap();
        let rep = cv_comparison(&x, &[(0.0, 1.0), (0.0, 1.0)]).unwrap();
        assert_eq!(rep.rows[0].prices, rep.rows[1].prices);
    }

    #[test]
    fn parses_scenarios() {
        let s = parse_scenario(
            r#"{"theorem": "transform_iii", "p": 0.3,
                "X1": {"family": "kumaraswamy", "params": {"lambda": 4}},
                "X2": {"family": "kumaraswamy", "params": {"lambda": 1}}}"#,
        )
        .unwrap();
        let row = statics_suite(&s).unwrap();
        assert_eq!(row.status, Status::Pass, "{row:?}");
        let s = parse_scenario(
            r#"{"theorem": "transform_ii", "map": {"map": "power", "gamma": 2},
                "X1": {"family": "exponential", "params": {"lambda": 2}},
                "X2": {"family": "exponential", "params": {"lambda": 1}}}"#,
        )
        .unwrap();
        assert!(matches!(s, Scenario::TransformConvex { .. }));
        assert!(parse_scenario(r#"{"theorem": "nope"}"#).is_err());
    }
}
