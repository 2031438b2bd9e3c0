//! Quadrature, bracketed root finding and grid diagnostics.
//!
//! Everything here is a pure function of its inputs. The analytical modules
//! build on three primitives:
//!
//! * adaptive Gauss-Kronrod (10/21 point) integration on finite intervals and
//!   on `[a, inf)` through the map `x = a + t / (1 - t)`,
//! * Brent's method for a single bracketed root, and a seeded scan that
//!   collects every sign change and every flat stretch (plateau) of a function,
//! * finite-difference monotonicity verdicts on a grid.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::DemandDistribution;

/// Default absolute tolerance for adaptive quadrature.
pub const DEFAULT_ABS_TOL: f64 = 1e-10;
/// Default relative tolerance for adaptive quadrature.
pub const DEFAULT_REL_TOL: f64 = 1e-9;
/// Default subdivision budget for adaptive quadrature.
pub const DEFAULT_MAX_SUBDIVISIONS: usize = 2000;
/// Default absolute tolerance on `m(r) - r` when solving for a price.
pub const DEFAULT_ROOT_TOL: f64 = 1e-10;
/// Default number of points of a diagnostic grid.
pub const DEFAULT_GRID_POINTS: usize = 512;
/// Smallest grid accepted by the monotonicity diagnostics.
pub const MIN_GRID_POINTS: usize = 16;
/// Relative threshold `|f(r)| <= PLATEAU_TOL * (1 + |r|)` that marks a plateau.
pub const PLATEAU_TOL: f64 = 1e-8;
/// Number of consecutive flat seed subintervals needed to report a plateau.
pub const PLATEAU_MIN_SUBINTERVALS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("invalid quadrature settings: {0}")]
    InvalidSettings(&'static str),
    #[error("quadrature did not converge within the subdivision budget (estimate {estimate}, error bound {error_bound})")]
    NonConvergence { estimate: f64, error_bound: f64 },
    #[error("integrand returned a non-finite value at x = {x}")]
    NonFinite { x: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RootError {
    #[error("no sign change on [{lo}, {hi}] (f(lo) = {f_lo}, f(hi) = {f_hi}); rebracket the root")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("function is not finite at x = {x}")]
    NonFinite { x: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid has {got} points, at least {min} are required")]
    TooFewPoints { got: usize, min: usize },
    #[error("grid is not strictly increasing at index {index}")]
    NotIncreasing { index: usize },
    #[error("invalid grid bounds [{lo}, {hi}]")]
    InvalidBounds { lo: f64, hi: f64 },
    #[error("sampled function is NaN at r = {r}")]
    NanSample { r: f64 },
}

/// Tolerances and budget of the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            abs_tol: DEFAULT_ABS_TOL,
            rel_tol: DEFAULT_REL_TOL,
            max_subdivisions: DEFAULT_MAX_SUBDIVISIONS,
        }
    }
}

impl QuadratureSettings {
    pub fn new(abs_tol: f64, rel_tol: f64, max_subdivisions: usize) -> Result<Self, QuadratureError> {
        let s = Self { abs_tol, rel_tol, max_subdivisions };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), QuadratureError> {
        if !(self.abs_tol > 0.0) {
            return Err(QuadratureError::InvalidSettings("abs_tol must be positive"));
        }
        if !(self.rel_tol > 0.0) {
            return Err(QuadratureError::InvalidSettings("rel_tol must be positive"));
        }
        if self.max_subdivisions < 16 {
            return Err(QuadratureError::InvalidSettings("max_subdivisions must be at least 16"));
        }
        Ok(())
    }
}

/// Value and error estimate of a converged integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

// Kronrod abscissae and weights of the 21-point rule; odd indices carry the
// embedded 10-point Gauss rule.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_289_219_602,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gauss_kronrod_21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Segment, QuadratureError> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let eval = |x: f64| {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(QuadratureError::NonFinite { x })
        }
    };
    let fc = eval(center)?;
    let mut kronrod = fc * WGK[10];
    let mut gauss = 0.0;
    let mut res_abs = kronrod.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let x = half * XGK[j];
        let f1 = eval(center - x)?;
        let f2 = eval(center + x)?;
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let abs_half = half.abs();
    let mut err = ((kronrod - gauss) * half).abs();
    let res_abs = res_abs * abs_half;
    let res_asc = res_asc * abs_half;
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok(Segment { a, b, value: kronrod * half, error: err })
}

/// Adaptive Gauss-Kronrod integration of `f` over the finite interval `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    settings: &QuadratureSettings,
) -> Result<Integral, QuadratureError> {
    settings.validate()?;
    if a == b {
        return Ok(Integral { value: 0.0, error: 0.0 });
    }
    if b < a {
        let r = integrate(f, b, a, settings)?;
        return Ok(Integral { value: -r.value, error: r.error });
    }
    let first = gauss_kronrod_21(&f, a, b)?;
    let mut total = first.value;
    let mut total_err = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    // Segments too narrow to split further.
    let mut frozen: Vec<Segment> = Vec::new();
    let mut segments = 1usize;
    loop {
        let target = settings.abs_tol.max(settings.rel_tol * total.abs());
        if total_err <= target {
            return Ok(Integral { value: total, error: total_err });
        }
        let Some(worst) = heap.pop() else {
            break;
        };
        if segments >= settings.max_subdivisions {
            heap.push(worst);
            break;
        }
        let mid = 0.5 * (worst.a + worst.b);
        let width = worst.b - worst.a;
        if width <= 64.0 * f64::EPSILON * worst.a.abs().max(worst.b.abs()).max(f64::MIN_POSITIVE) {
            frozen.push(worst);
            if heap.is_empty() {
                break;
            }
            continue;
        }
        let left = gauss_kronrod_21(&f, worst.a, mid)?;
        let right = gauss_kronrod_21(&f, mid, worst.b)?;
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        segments += 1;
    }
    // Re-sum to shed accumulated rounding from the incremental updates.
    let value: f64 = heap.iter().chain(frozen.iter()).map(|s| s.value).sum();
    let error = total_err;
    let target = settings.abs_tol.max(settings.rel_tol * value.abs());
    if error <= target {
        Ok(Integral { value, error })
    } else {
        Err(QuadratureError::NonConvergence { estimate: value, error_bound: error })
    }
}

/// Integrates `f` over `[a, inf)` through the map `x = a + t / (1 - t)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    settings: &QuadratureSettings,
) -> Result<Integral, QuadratureError> {
    let mapped = |t: f64| {
        if t >= 1.0 {
            return 0.0;
        }
        let s = 1.0 - t;
        let x = a + t / s;
        if !x.is_finite() {
            return 0.0;
        }
        let v = f(x) / (s * s);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate(mapped, 0.0, 1.0, settings)
}

/// Purely numerical `int_r^inf F_bar(u) du`, independent of any closed form the
/// distribution may carry.
///
/// The integral is split at the truncation point `U = quantile(1 - 1e-10)`.
/// On `[r, U]` adaptive quadrature is used; beyond `U` the remainder is taken
/// from the analytic tail where the family has one (exponential, Pareto,
/// generalized Pareto) and otherwise from the mapped infinite-interval rule.
pub fn tail_integral(
    d: &DemandDistribution,
    r: f64,
    settings: &QuadratureSettings,
) -> Result<f64, QuadratureError> {
    let r = r.max(0.0);
    let h = d.support().upper;
    if r >= h {
        return Ok(0.0);
    }
    let survival = |u: f64| d.survival(u);
    if h.is_finite() {
        // Integrate piece by piece over the support so kinks sit on segment ends.
        let v = integrate_with_breaks(&survival, r, h, &d.breakpoints(), settings)?;
        return Ok(v);
    }
    let cut = d.quantile(1.0 - 1e-10).max(r);
    let body = integrate_with_breaks(&survival, r, cut, &d.breakpoints(), settings)?;
    let remainder = match d.analytic_tail_remainder(cut) {
        Some(v) => v,
        None => integrate_to_infinity(survival, cut, settings)?.value,
    };
    Ok(body + remainder)
}

fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    breaks: &[f64],
    settings: &QuadratureSettings,
) -> Result<f64, QuadratureError> {
    if b <= a {
        return Ok(0.0);
    }
    let mut points = vec![a];
    points.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    points.push(b);
    points.sort_by(f64::total_cmp);
    points.dedup();
    let mut total = 0.0;
    let mut failure = None;
    for w in points.windows(2) {
        match integrate(f, w[0], w[1], settings) {
            Ok(i) => total += i.value,
            Err(QuadratureError::NonConvergence { estimate, error_bound }) => {
                total += estimate;
                let prev = match failure {
                    Some(QuadratureError::NonConvergence { error_bound: e, .. }) => e,
                    _ => 0.0,
                };
                failure = Some(QuadratureError::NonConvergence { estimate: 0.0, error_bound: prev + error_bound });
            }
            Err(e) => return Err(e),
        }
    }
    match failure {
        Some(QuadratureError::NonConvergence { error_bound, .. }) => {
            Err(QuadratureError::NonConvergence { estimate: total, error_bound })
        }
        _ => Ok(total),
    }
}

/// Outcome of a bracketed root search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootResult {
    pub root: f64,
    pub residual: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
    pub converged: bool,
}

const MAX_BRENT_ITERATIONS: usize = 300;

/// Brent's method on `[lo, hi]`.
///
/// Iterates until `|f(root)| <= tol` or the bracket collapses to machine
/// resolution. `converged` is set when either `|f(root)| <= tol` or the final
/// bracket is narrower than `tol * (1 + |root|)`.
pub fn find_root_bracketed<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<RootResult, RootError> {
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut fa = f(a);
    let mut fb = f(b);
    if !fa.is_finite() {
        return Err(RootError::NonFinite { x: a });
    }
    if !fb.is_finite() {
        return Err(RootError::NonFinite { x: b });
    }
    if fa == 0.0 {
        return Ok(RootResult { root: a, residual: 0.0, bracket: (a, a), iterations: 0, converged: true });
    }
    if fb == 0.0 {
        return Ok(RootResult { root: b, residual: 0.0, bracket: (b, b), iterations: 0, converged: true });
    }
    if fa.signum() == fb.signum() {
        return Err(RootError::NoSignChange { lo: a, hi: b, f_lo: fa, f_hi: fb });
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    let mut iterations = 0;
    loop {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let machine = 2.0 * f64::EPSILON * b.abs() + f64::MIN_POSITIVE;
        let half = 0.5 * (c - b);
        if fb.abs() <= tol || half.abs() <= machine || iterations >= MAX_BRENT_ITERATIONS {
            let width = (c - b).abs();
            let converged = fb.abs() <= tol || width <= tol * (1.0 + b.abs());
            let bracket = if b <= c { (b, c) } else { (c, b) };
            return Ok(RootResult { root: b, residual: fb, bracket, iterations, converged });
        }
        if e.abs() >= machine && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * half * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let rr = fb / fc;
                p = s * (2.0 * half * qq * (qq - rr) - (b - a) * (rr - 1.0));
                q = (qq - 1.0) * (rr - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * half * q - (machine * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = half;
                e = d;
            }
        } else {
            d = half;
            e = d;
        }
        a = b;
        fa = fb;
        if d.abs() > machine {
            b += d;
        } else {
            b += machine.copysign(half);
        }
        fb = f(b);
        if !fb.is_finite() {
            return Err(RootError::NonFinite { x: b });
        }
        iterations += 1;
    }
}

/// Closed interval on which a function stays within the plateau threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    pub start: f64,
    pub end: f64,
}

/// Every root and every plateau found by a seeded scan.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RootScan {
    pub roots: Vec<RootResult>,
    pub plateaus: Vec<Plateau>,
}

/// Scans `n_seed` equal subintervals of `[lo, hi]` for sign changes and
/// plateaus, refining each sign change with [`find_root_bracketed`].
pub fn find_all_roots<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n_seed: usize, tol: f64) -> RootScan {
    let n_seed = n_seed.max(32);
    let seeds: Vec<f64> = (0..=n_seed)
        .map(|i| if i == n_seed { hi } else { lo + (hi - lo) * i as f64 / n_seed as f64 })
        .collect();
    find_all_roots_on(f, &seeds, tol)
}

/// Same as [`find_all_roots`] on caller-supplied, increasing seed points.
pub fn find_all_roots_on<F: Fn(f64) -> f64>(f: F, seeds: &[f64], tol: f64) -> RootScan {
    let mut scan = RootScan::default();
    if seeds.len() < 2 {
        return scan;
    }
    let values: Vec<f64> = seeds.iter().map(|&x| f(x)).collect();
    let flat_at = |x: f64, v: f64| v.is_finite() && v.abs() <= PLATEAU_TOL * (1.0 + x.abs());

    // A subinterval is flat when both ends and its midpoint are within the threshold.
    let flat: Vec<bool> = seeds
        .windows(2)
        .zip(values.windows(2))
        .map(|(x, v)| {
            flat_at(x[0], v[0]) && flat_at(x[1], v[1]) && {
                let m = 0.5 * (x[0] + x[1]);
                flat_at(m, f(m))
            }
        })
        .collect();
    let mut i = 0;
    let mut in_plateau = vec![false; flat.len()];
    while i < flat.len() {
        if flat[i] {
            let start = i;
            while i < flat.len() && flat[i] {
                i += 1;
            }
            if i - start >= PLATEAU_MIN_SUBINTERVALS {
                in_plateau[start..i].iter_mut().for_each(|b| *b = true);
                let left = refine_plateau_edge(&f, seeds[start], start.checked_sub(1).map(|k| seeds[k]));
                let right = refine_plateau_edge(&f, seeds[i], seeds.get(i + 1).copied());
                scan.plateaus.push(Plateau { start: left, end: right });
            }
        } else {
            i += 1;
        }
    }

    for k in 0..seeds.len() - 1 {
        if in_plateau[k] {
            continue;
        }
        let (x0, x1) = (seeds[k], seeds[k + 1]);
        let (v0, v1) = (values[k], values[k + 1]);
        if !v0.is_finite() || !v1.is_finite() {
            continue;
        }
        let candidate = if v0 == 0.0 {
            Some(RootResult { root: x0, residual: 0.0, bracket: (x0, x0), iterations: 0, converged: true })
        } else if v0.signum() != v1.signum() && v1 != 0.0 {
            find_root_bracketed(&f, x0, x1, tol).ok()
        } else if k + 2 == seeds.len() && v1 == 0.0 {
            Some(RootResult { root: x1, residual: 0.0, bracket: (x1, x1), iterations: 0, converged: true })
        } else {
            None
        };
        if let Some(root) = candidate {
            let inside_plateau = scan.plateaus.iter().any(|p| root.root >= p.start && root.root <= p.end);
            let duplicate = scan
                .roots
                .last()
                .is_some_and(|prev| (prev.root - root.root).abs() <= 10.0 * tol.max(1e-14) * (1.0 + root.root.abs()));
            if !inside_plateau && !duplicate {
                scan.roots.push(root);
            }
        }
    }
    scan.roots.sort_by(|a, b| a.root.total_cmp(&b.root));
    scan
}

/// Bisects between a flat point and its non-flat neighbour to locate where the
/// plateau begins or ends.
fn refine_plateau_edge<F: Fn(f64) -> f64>(f: &F, flat_x: f64, neighbour: Option<f64>) -> f64 {
    let Some(out) = neighbour else {
        return flat_x;
    };
    let is_flat = |x: f64| {
        let v = f(x);
        v.is_finite() && v.abs() <= PLATEAU_TOL * (1.0 + x.abs())
    };
    if is_flat(out) {
        return out;
    }
    let (mut inside, mut outside) = (flat_x, out);
    for _ in 0..80 {
        let mid = 0.5 * (inside + outside);
        if is_flat(mid) {
            inside = mid;
        } else {
            outside = mid;
        }
        if (inside - outside).abs() <= 1e-12 * (1.0 + inside.abs()) {
            break;
        }
    }
    inside
}

/// Spacing of a [`GridSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    Geometric,
}

/// Serializable description of an evaluation grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub spacing: Spacing,
}

impl GridSpec {
    pub fn linear(lo: f64, hi: f64, points: usize) -> Self {
        Self { lo, hi, points, spacing: Spacing::Linear }
    }

    pub fn geometric(lo: f64, hi: f64, points: usize) -> Self {
        Self { lo, hi, points, spacing: Spacing::Geometric }
    }

    /// Materializes the grid; both end points are included exactly.
    pub fn build(&self) -> Result<Vec<f64>, GridError> {
        let n = self.points;
        if n < 2 {
            return Err(GridError::TooFewPoints { got: n, min: 2 });
        }
        let valid = self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi;
        if !valid || (self.spacing == Spacing::Geometric && self.lo <= 0.0) {
            return Err(GridError::InvalidBounds { lo: self.lo, hi: self.hi });
        }
        let last = (n - 1) as f64;
        let pts = (0..n)
            .map(|i| {
                if i == 0 {
                    return self.lo;
                }
                if i == n - 1 {
                    return self.hi;
                }
                let t = i as f64 / last;
                match self.spacing {
                    Spacing::Linear => self.lo + (self.hi - self.lo) * t,
                    Spacing::Geometric => self.lo * (self.hi / self.lo).powf(t),
                }
            })
            .collect();
        Ok(pts)
    }
}

/// Checks that a grid is usable by the monotonicity diagnostics.
pub fn validate_grid(grid: &[f64]) -> Result<(), GridError> {
    if grid.len() < MIN_GRID_POINTS {
        return Err(GridError::TooFewPoints { got: grid.len(), min: MIN_GRID_POINTS });
    }
    for (i, w) in grid.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(GridError::NotIncreasing { index: i + 1 });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonotoneVerdict {
    Increasing,
    Decreasing,
    Constant,
    NonMonotone,
}

/// Signed step `f(x_{i+1}) - f(x_i)` located at `x_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub r: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneReport {
    pub verdict: MonotoneVerdict,
    /// Largest step against the reported direction (against "decreasing" for
    /// constant and non-monotone verdicts).
    pub worst_violation: Step,
    /// Every step is below `-tol * (1 + |f|)`.
    pub strictly_decreasing: bool,
    /// Every step is above `tol * (1 + |f|)`.
    pub strictly_increasing: bool,
    pub max_rise: Step,
    pub max_fall: Step,
}

/// Finite-difference monotonicity of `f` on `grid`.
///
/// A step counts as a rise when it exceeds `tol * (1 + |f(x_i)|)` and as a
/// fall when it is below the negative of that threshold.
pub fn monotone_check<F: Fn(f64) -> f64>(f: F, grid: &[f64], tol: f64) -> Result<MonotoneReport, GridError> {
    validate_grid(grid)?;
    let values = grid
        .iter()
        .map(|&r| {
            let v = f(r);
            if v.is_nan() {
                Err(GridError::NanSample { r })
            } else {
                Ok(v)
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(monotone_from_samples(grid, &values, tol))
}

/// [`monotone_check`] on values that were already sampled on `grid`.
pub fn monotone_from_samples(grid: &[f64], values: &[f64], tol: f64) -> MonotoneReport {
    let mut rises = false;
    let mut falls = false;
    let mut strict_dec = true;
    let mut strict_inc = true;
    let mut max_rise = Step { r: grid[0], delta: f64::NEG_INFINITY };
    let mut max_fall = Step { r: grid[0], delta: f64::INFINITY };
    for i in 0..values.len() - 1 {
        let delta = values[i + 1] - values[i];
        let threshold = tol * (1.0 + values[i].abs());
        // Infinite samples (e.g. a divergent tail) compare by sign only.
        let delta = if delta.is_nan() { 0.0 } else { delta };
        if delta > threshold {
            rises = true;
        }
        if delta < -threshold {
            falls = true;
        }
        if !(delta < -threshold) {
            strict_dec = false;
        }
        if !(delta > threshold) {
            strict_inc = false;
        }
        if delta > max_rise.delta {
            max_rise = Step { r: grid[i], delta };
        }
        if delta < max_fall.delta {
            max_fall = Step { r: grid[i], delta };
        }
    }
    let verdict = match (rises, falls) {
        (false, false) => MonotoneVerdict::Constant,
        (true, false) => MonotoneVerdict::Increasing,
        (false, true) => MonotoneVerdict::Decreasing,
        (true, true) => MonotoneVerdict::NonMonotone,
    };
    let worst_violation = match verdict {
        MonotoneVerdict::Increasing => max_fall,
        _ => max_rise,
    };
    MonotoneReport {
        verdict,
        worst_violation,
        strictly_decreasing: strict_dec,
        strictly_increasing: strict_inc,
        max_rise,
        max_fall,
    }
}

impl MonotoneReport {
    /// Nonincreasing within tolerance.
    pub fn is_nonincreasing(&self) -> bool {
        matches!(self.verdict, MonotoneVerdict::Decreasing | MonotoneVerdict::Constant)
    }

    /// Nondecreasing within tolerance.
    pub fn is_nondecreasing(&self) -> bool {
        matches!(self.verdict, MonotoneVerdict::Increasing | MonotoneVerdict::Constant)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_kronrod_is_exact_for_polynomials() {
        let s = QuadratureSettings::default();
        let v = integrate(|x| 3.0 * x * x - 2.0 * x + 1.0, -1.0, 2.0, &s).unwrap();
        assert!((v.value - 9.0).abs() < 1e-13);
        let v = integrate(|x| x.powi(20), 0.0, 1.0, &s).unwrap();
        assert!((v.value - 1.0 / 21.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_kinks_and_reversed_limits() {
        let s = QuadratureSettings::default();
        let v = integrate(|x: f64| (x - 0.3).abs(), 0.0, 1.0, &s).unwrap();
        assert!((v.value - (0.045 + 0.245)).abs() < 1e-10);
        let w = integrate(|x: f64| x, 1.0, 0.0, &s).unwrap();
        assert!((w.value + 0.5).abs() < 1e-14);
    }

    #[test]
    fn infinite_interval_matches_antiderivative() {
        let s = QuadratureSettings::default();
        let v = integrate_to_infinity(|u: f64| (-u).exp(), 1.0, &s).unwrap();
        assert!((v.value - (-1.0f64).exp()).abs() < 1e-10);
        let v = integrate_to_infinity(|u: f64| u.powi(-3), 2.0, &s).unwrap();
        assert!((v.value - 0.125).abs() < 1e-10);
    }

    #[test]
    fn budget_exhaustion_reports_best_estimate() {
        let s = QuadratureSettings { abs_tol: 1e-15, rel_tol: 1e-15, max_subdivisions: 16 };
        let err = integrate(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, &s).unwrap_err();
        match err {
            QuadratureError::NonConvergence { estimate, error_bound } => {
                assert!(estimate.is_finite());
                assert!(error_bound > 0.0);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn settings_are_validated() {
        assert!(QuadratureSettings::new(0.0, 1e-9, 2000).is_err());
        assert!(QuadratureSettings::new(1e-10, -1.0, 2000).is_err());
        assert!(QuadratureSettings::new(1e-10, 1e-9, 8).is_err());
        assert!(QuadratureSettings::new(1e-10, 1e-9, 16).is_ok());
    }

    #[test]
    fn brent_linear_and_fixed_point_examples() {
        let r = find_root_bracketed(|r| 1.0 - r, 0.0, 2.0, 1e-10).unwrap();
        assert!(r.converged);
        assert!((r.root - 1.0).abs() < 1e-10);
        // Uniform MRD fixed point: (1 - r) / 2 = r.
        let r = find_root_bracketed(|r| (1.0 - r) / 2.0 - r, 0.0, 1.0, 1e-10).unwrap();
        assert!((r.root - 1.0 / 3.0).abs() < 1e-10);
        assert!(r.residual.abs() <= 1e-10);
        assert!(r.bracket.0 <= r.root && r.root <= r.bracket.1);
    }

    #[test]
    fn brent_rejects_missing_sign_change() {
        let e = find_root_bracketed(|r| r * r + 1.0, -1.0, 1.0, 1e-10).unwrap_err();
        assert!(matches!(e, RootError::NoSignChange { .. }));
    }

    #[test]
    fn scan_finds_both_quadratic_roots() {
        let scan = find_all_roots(|r| (r - 1.0) * (r - 2.0), 0.0, 3.0, 64, 1e-12);
        let roots: Vec<f64> = scan.roots.iter().map(|r| r.root).collect();
        assert_eq!(roots.len(), 2, "{roots:?}");
        assert!((roots[0] - 1.0).abs() < 1e-10);
        assert!((roots[1] - 2.0).abs() < 1e-10);
        assert!(scan.plateaus.is_empty());
    }

    #[test]
    fn scan_reports_plateau_instead_of_roots() {
        let f = |r: f64| if r < 1.0 { 1.0 - r } else { 0.0 };
        let scan = find_all_roots(f, 0.0, 10.0, 64, 1e-12);
        assert!(scan.roots.is_empty(), "{:?}", scan.roots);
        assert_eq!(scan.plateaus.len(), 1);
        assert!((scan.plateaus[0].start - 1.0).abs() < 1e-6);
        assert_eq!(scan.plateaus[0].end, 10.0);
    }

    #[test]
    fn monotone_examples() {
        let grid = GridSpec::linear(0.1, 10.0, 64).build().unwrap();
        let rep = monotone_check(|r| 1.0 / r, &grid, 1e-9).unwrap();
        assert_eq!(rep.verdict, MonotoneVerdict::Decreasing);
        assert!(rep.strictly_decreasing);
        let rep = monotone_check(|_| 4.2, &grid, 1e-9).unwrap();
        assert_eq!(rep.verdict, MonotoneVerdict::Constant);
        let rep = monotone_check(|r| (r - 1.0).abs(), &grid, 1e-9).unwrap();
        assert_eq!(rep.verdict, MonotoneVerdict::NonMonotone);
        assert!(rep.worst_violation.delta > 0.0);
    }

    #[test]
    fn monotone_rejects_nan_and_short_grids() {
        let grid = GridSpec::linear(0.0, 1.0, 32).build().unwrap();
        let e = monotone_check(|r| if r > 0.5 { f64::NAN } else { r }, &grid, 1e-9).unwrap_err();
        match e {
            GridError::NanSample { r } => assert!(r > 0.5),
            other => panic!("{other:?}"),
        }
        let short = GridSpec::linear(0.0, 1.0, 8).build().unwrap();
        assert!(matches!(monotone_check(|r| r, &short, 1e-9), Err(GridError::TooFewPoints { .. })));
    }

    #[test]
    fn geometric_grid_hits_endpoints() {
        let g = GridSpec::geometric(1e-3, 10.0, 100).build().unwrap();
        assert_eq!(g[0], 1e-3);
        assert_eq!(*g.last().unwrap(), 10.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert!(GridSpec::geometric(0.0, 1.0, 10).build().is_err());
    }
}
