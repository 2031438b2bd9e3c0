//! Demand distributions and the residual-demand evaluators built on them.
//!
//! A [`DemandDistribution`] is an immutable description of a nonnegative
//! demand law. Parametric families carry closed forms for the cdf, quantile,
//! moments and the tail integral `int_r^inf F_bar(u) du`; derived laws
//! (scaling, affine maps, mixtures, convex maps, convolutions) evaluate through
//! their construction tree.
//!
//! The mean residual demand is `m(r) = int_r^inf F_bar(u) du / F_bar(r)` for
//! `r < H` and `0` beyond the support; its ratio to the price is the
//! generalized mean residual demand `l(r) = m(r) / r`, whose reciprocal is the
//! price elasticity of expected demand.

mod classify;
mod piecewise;
pub mod spec;

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution as _, Exp, Gamma as GammaSampler, LogNormal, Normal as NormalSampler, Open01, Pareto};
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};
use thiserror::Error;

use crate::numerics::{self, find_root_bracketed, GridError, QuadratureError, QuadratureSettings};

pub use classify::{classify, default_grid, ClassificationReport, MrdProfile};
pub use piecewise::PiecewiseLinearCdf;

/// Survival probabilities below this value make `m(r)` numerically undefined.
pub const SURVIVAL_UNDERFLOW: f64 = 1e-300;

/// Default sample count of an empirical convolution.
pub const DEFAULT_CONVOLUTION_SAMPLES: usize = 1_000_000;
/// Default seed of an empirical convolution.
pub const DEFAULT_CONVOLUTION_SEED: u64 = 0x5eed_c0de;
/// Number of abscissae of a grid convolution.
pub const GRID_CONVOLUTION_POINTS: usize = 2048;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("invalid {family} parameters: {reason}")]
    InvalidParameter { family: &'static str, reason: String },
    #[error("{op} is undefined at r = {r}: {reason}")]
    OutOfDomain { op: &'static str, r: f64, reason: &'static str },
    #[error("{0} has no density")]
    NoDensity(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

fn invalid(family: &'static str, reason: impl Into<String>) -> DistributionError {
    DistributionError::InvalidParameter { family, reason: reason.into() }
}

/// Support `[L, H]` of a demand law: `L = sup{F = 0}`, `H = inf{F = 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportBounds {
    pub lower: f64,
    pub upper: f64,
}

impl SupportBounds {
    pub fn is_bounded(&self) -> bool {
        self.upper.is_finite()
    }
}

/// Increasing convex maps with analytic inverses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "map", rename_all = "snake_case")]
pub enum ConvexMap {
    /// `x^gamma`, `gamma >= 1`.
    Power { gamma: f64 },
    /// `exp(s x) - 1`, `s > 0`.
    ExpScale { s: f64 },
    /// `a + b x`, `a >= 0`, `b > 0`.
    AffineIncreasing { a: f64, b: f64 },
}

impl ConvexMap {
    pub fn validate(&self) -> Result<(), DistributionError> {
        let ok = match *self {
            ConvexMap::Power { gamma } => gamma.is_finite() && gamma >= 1.0,
            ConvexMap::ExpScale { s } => s.is_finite() && s > 0.0,
            ConvexMap::AffineIncreasing { a, b } => a.is_finite() && a >= 0.0 && b.is_finite() && b > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(invalid("convex_map", format!("{self:?} is not an increasing convex map on [0, inf)")))
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            ConvexMap::Power { gamma } => x.max(0.0).powf(gamma),
            ConvexMap::ExpScale { s } => (s * x).exp_m1(),
            ConvexMap::AffineIncreasing { a, b } => a + b * x,
        }
    }

    pub fn inverse(&self, y: f64) -> f64 {
        match *self {
            ConvexMap::Power { gamma } => {
                if y <= 0.0 {
                    // Below the image of the support: any negative preimage.
                    if y < 0.0 {
                        -1.0
                    } else {
                        0.0
                    }
                } else {
                    y.powf(1.0 / gamma)
                }
            }
            ConvexMap::ExpScale { s } => {
                if y <= -1.0 {
                    f64::NEG_INFINITY
                } else {
                    y.ln_1p() / s
                }
            }
            ConvexMap::AffineIncreasing { a, b } => (y - a) / b,
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            ConvexMap::Power { gamma } => gamma * x.max(0.0).powf(gamma - 1.0),
            ConvexMap::ExpScale { s } => s * (s * x).exp(),
            ConvexMap::AffineIncreasing { b, .. } => b,
        }
    }
}

impl fmt::Display for ConvexMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ConvexMap::Power { gamma } => write!(f, "x^{gamma}"),
            ConvexMap::ExpScale { s } => write!(f, "exp({s}x)-1"),
            ConvexMap::AffineIncreasing { a, b } => write!(f, "{a}+{b}x"),
        }
    }
}

/// How the law of a sum `X + Z` is tabulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ConvolutionMethod {
    /// Piecewise-linear empirical cdf of `samples` paired draws.
    Empirical { samples: usize, seed: u64 },
    /// Stieltjes sum of `F_X(t - z)` over a quantile grid of `Z`.
    Grid,
}

impl Default for ConvolutionMethod {
    fn default() -> Self {
        ConvolutionMethod::Empirical { samples: DEFAULT_CONVOLUTION_SAMPLES, seed: DEFAULT_CONVOLUTION_SEED }
    }
}

/// Construction tree of a derived law.
#[derive(Debug, Clone, PartialEq)]
pub enum Derived {
    /// `c X`.
    Scale { c: f64, of: Arc<DemandDistribution> },
    /// `shift + factor X`.
    Affine { shift: f64, factor: f64, of: Arc<DemandDistribution> },
    /// `p F_1 + (1 - p) F_2`.
    Mixture { p: f64, first: Arc<DemandDistribution>, second: Arc<DemandDistribution> },
    /// `phi(X)`.
    Convex { map: ConvexMap, of: Arc<DemandDistribution> },
    /// `X + Z` with independent summands, tabulated by `method`.
    Convolution {
        first: Arc<DemandDistribution>,
        second: Arc<DemandDistribution>,
        method: ConvolutionMethod,
        table: Arc<PiecewiseLinearCdf>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Exponential { rate: f64 },
    Pareto { scale: f64, shape: f64 },
    GeneralizedPareto { location: f64, scale: f64, shape: f64 },
    /// Kumaraswamy law with first shape parameter 1: `F(r) = 1 - (1 - r)^shape` on `[0, 1]`.
    Kumaraswamy { shape: f64 },
    Uniform { lower: f64, upper: f64 },
    Gamma { shape: f64, scale: f64 },
    Lognormal { mu: f64, sigma: f64 },
    /// Normal law, optionally truncated to `[0, inf)` and renormalized.
    Normal { mean: f64, sd: f64, truncated: bool },
    PiecewiseLinear(Arc<PiecewiseLinearCdf>),
    Deterministic { value: f64 },
    Derived(Derived),
}

/// A density value; `one_sided` marks a right derivative taken at a kink.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointValue {
    pub value: f64,
    pub one_sided: bool,
}

/// A mean residual demand value; `underflow` is set when `F_bar(r)` is below
/// [`SURVIVAL_UNDERFLOW`] and the value was replaced by zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MrdValue {
    pub value: f64,
    pub underflow: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemandDistribution {
    family: Family,
}

fn positive(family: &'static str, name: &str, v: f64) -> Result<(), DistributionError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(family, format!("{name} must be positive and finite, got {v}")))
    }
}

fn nonnegative(family: &'static str, name: &str, v: f64) -> Result<(), DistributionError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(invalid(family, format!("{name} must be nonnegative and finite, got {v}")))
    }
}

impl DemandDistribution {
    pub fn exponential(rate: f64) -> Result<Self, DistributionError> {
        positive("exponential", "rate", rate)?;
        Ok(Self { family: Family::Exponential { rate } })
    }

    /// Pareto law on `[scale, inf)` with `F(r) = 1 - (scale / r)^shape`.
    ///
    /// `shape <= 1` is rejected: the mean would be infinite.
    pub fn pareto(scale: f64, shape: f64) -> Result<Self, DistributionError> {
        positive("pareto", "scale", scale)?;
        positive("pareto", "shape", shape)?;
        if shape <= 1.0 {
            return Err(invalid("pareto", format!("shape must exceed 1 for a finite mean, got {shape}")));
        }
        Ok(Self { family: Family::Pareto { scale, shape } })
    }

    /// Generalized Pareto law with `F_bar(r) = (1 + shape (r - location) / scale)^(-1/shape)`.
    pub fn generalized_pareto(location: f64, scale: f64, shape: f64) -> Result<Self, DistributionError> {
        nonnegative("generalized_pareto", "location", location)?;
        positive("generalized_pareto", "scale", scale)?;
        if !shape.is_finite() || shape >= 1.0 {
            return Err(invalid("generalized_pareto", format!("shape must be below 1 for a finite mean, got {shape}")));
        }
        Ok(Self { family: Family::GeneralizedPareto { location, scale, shape } })
    }

    /// The one-parameter generalized Pareto family with
    /// `scale = shape = 1 / (2 + epsilon)`, whose price is `(1 - location) / epsilon`.
    pub fn generalized_pareto_eps(location: f64, epsilon: f64) -> Result<Self, DistributionError> {
        positive("generalized_pareto", "epsilon", epsilon)?;
        let k = 1.0 / (2.0 + epsilon);
        Self::generalized_pareto(location, k, k)
    }

    pub fn kumaraswamy(shape: f64) -> Result<Self, DistributionError> {
        positive("kumaraswamy", "shape", shape)?;
        Ok(Self { family: Family::Kumaraswamy { shape } })
    }

    pub fn uniform(lower: f64, upper: f64) -> Result<Self, DistributionError> {
        nonnegative("uniform", "lower", lower)?;
        if !upper.is_finite() || upper <= lower {
            return Err(invalid("uniform", format!("need lower < upper, got [{lower}, {upper}]")));
        }
        Ok(Self { family: Family::Uniform { lower, upper } })
    }

    pub fn gamma(shape: f64, scale: f64) -> Result<Self, DistributionError> {
        positive("gamma", "shape", shape)?;
        positive("gamma", "scale", scale)?;
        Ok(Self { family: Family::Gamma { shape, scale } })
    }

    pub fn lognormal(mu: f64, sigma: f64) -> Result<Self, DistributionError> {
        if !mu.is_finite() {
            return Err(invalid("lognormal", "mu must be finite"));
        }
        positive("lognormal", "sigma", sigma)?;
        Ok(Self { family: Family::Lognormal { mu, sigma } })
    }

    /// Normal law truncated to `[0, inf)`.
    pub fn normal(mean: f64, sd: f64) -> Result<Self, DistributionError> {
        Self::normal_with(mean, sd, true)
    }

    /// Normal law on the whole line. Demand can then be negative; use only to
    /// compare with results stated for untruncated normals.
    pub fn normal_untruncated(mean: f64, sd: f64) -> Result<Self, DistributionError> {
        Self::normal_with(mean, sd, false)
    }

    fn normal_with(mean: f64, sd: f64, truncated: bool) -> Result<Self, DistributionError> {
        if !mean.is_finite() {
            return Err(invalid("normal", "mean must be finite"));
        }
        positive("normal", "sd", sd)?;
        if truncated && std_normal_sf(-mean / sd) < 1e-300 {
            return Err(invalid("normal", "no mass on [0, inf) after truncation"));
        }
        Ok(Self { family: Family::Normal { mean, sd, truncated } })
    }

    pub fn piecewise_linear(knots: &[(f64, f64)]) -> Result<Self, DistributionError> {
        Ok(Self { family: Family::PiecewiseLinear(Arc::new(PiecewiseLinearCdf::new(knots)?)) })
    }

    pub fn from_cdf_table(table: PiecewiseLinearCdf) -> Self {
        Self { family: Family::PiecewiseLinear(Arc::new(table)) }
    }

    pub fn deterministic(value: f64) -> Result<Self, DistributionError> {
        positive("deterministic", "value", value)?;
        Ok(Self { family: Family::Deterministic { value } })
    }

    /// Law of `c X`.
    pub fn scaled(&self, c: f64) -> Result<Self, DistributionError> {
        positive("scale", "c", c)?;
        Ok(Self { family: Family::Derived(Derived::Scale { c, of: Arc::new(self.clone()) }) })
    }

    /// Law of `shift + factor X`; `factor = 0` collapses to a point mass.
    pub fn affine(&self, shift: f64, factor: f64) -> Result<Self, DistributionError> {
        nonnegative("affine", "shift", shift)?;
        nonnegative("affine", "factor", factor)?;
        if factor == 0.0 {
            return Self::deterministic(shift);
        }
        Ok(Self { family: Family::Derived(Derived::Affine { shift, factor, of: Arc::new(self.clone()) }) })
    }

    /// Mean-preserving contraction `kappa X + (1 - kappa) E X`, `kappa` in `[0, 1]`.
    pub fn mean_preserving(&self, kappa: f64) -> Result<Self, DistributionError> {
        if !(0.0..=1.0).contains(&kappa) {
            return Err(invalid("mean_preserving", format!("kappa must lie in [0, 1], got {kappa}")));
        }
        if kappa == 1.0 {
            return Ok(self.clone());
        }
        self.affine((1.0 - kappa) * self.mean(), kappa)
    }

    /// Law with cdf `p F_first + (1 - p) F_second`.
    pub fn mixture(p: f64, first: &Self, second: &Self) -> Result<Self, DistributionError> {
        if !(p > 0.0 && p < 1.0) {
            return Err(invalid("mixture", format!("weight must lie in (0, 1), got {p}")));
        }
        Ok(Self {
            family: Family::Derived(Derived::Mixture { p, first: Arc::new(first.clone()), second: Arc::new(second.clone()) }),
        })
    }

    /// Law of `phi(X)`.
    pub fn convex_map(&self, map: ConvexMap) -> Result<Self, DistributionError> {
        map.validate()?;
        match map {
            ConvexMap::AffineIncreasing { a, b } => return self.affine(a, b),
            ConvexMap::Power { gamma } => {
                if !self.moment_finite(gamma) {
                    return Err(invalid("convex_map", format!("E X^{gamma} is infinite, so phi(X) has no finite mean")));
                }
            }
            ConvexMap::ExpScale { s } => {
                if !self.exp_moment_finite(s) {
                    return Err(invalid("convex_map", format!("E exp({s} X) is infinite, so phi(X) has no finite mean")));
                }
            }
        }
        if self.support().lower < 0.0 {
            return Err(invalid("convex_map", "the operand must be nonnegative"));
        }
        Ok(Self { family: Family::Derived(Derived::Convex { map, of: Arc::new(self.clone()) }) })
    }

    /// Law of `X + Z` for independent `X`, `Z`.
    pub fn convolve(&self, other: &Self, method: ConvolutionMethod) -> Result<Self, DistributionError> {
        let table = match method {
            ConvolutionMethod::Empirical { samples, seed } => {
                if samples < 2 {
                    return Err(invalid("convolution", "at least two samples are required"));
                }
                PiecewiseLinearCdf::from_samples(crate::sim::sample_sum(self, other, samples, seed))?
            }
            ConvolutionMethod::Grid => grid_convolution(self, other)?,
        };
        Ok(Self {
            family: Family::Derived(Derived::Convolution {
                first: Arc::new(self.clone()),
                second: Arc::new(other.clone()),
                method,
                table: Arc::new(table),
            }),
        })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// Whether every value is computed from a closed form (no quadrature).
    pub fn has_closed_form_tail(&self) -> bool {
        match &self.family {
            Family::Derived(Derived::Convex { .. }) => false,
            Family::Derived(Derived::Scale { of, .. }) | Family::Derived(Derived::Affine { of, .. }) => {
                of.has_closed_form_tail()
            }
            Family::Derived(Derived::Mixture { first, second, .. }) => {
                first.has_closed_form_tail() && second.has_closed_form_tail()
            }
            _ => true,
        }
    }

    pub fn support(&self) -> SupportBounds {
        let (lower, upper) = match &self.family {
            Family::Exponential { .. } | Family::Gamma { .. } | Family::Lognormal { .. } => (0.0, f64::INFINITY),
            Family::Pareto { scale, .. } => (*scale, f64::INFINITY),
            Family::GeneralizedPareto { location, scale, shape } => {
                let upper = if *shape < 0.0 { location - scale / shape } else { f64::INFINITY };
                (*location, upper)
            }
            Family::Kumaraswamy { .. } => (0.0, 1.0),
            Family::Uniform { lower, upper } => (*lower, *upper),
            Family::Normal { truncated, .. } => {
                if *truncated {
                    (0.0, f64::INFINITY)
                } else {
                    (f64::NEG_INFINITY, f64::INFINITY)
                }
            }
            Family::PiecewiseLinear(t) => table_support(t),
            Family::Deterministic { value } => (*value, *value),
            Family::Derived(d) => match d {
                Derived::Scale { c, of } => {
                    let s = of.support();
                    (c * s.lower, c * s.upper)
                }
                Derived::Affine { shift, factor, of } => {
                    let s = of.support();
                    (shift + factor * s.lower, shift + factor * s.upper)
                }
                Derived::Mixture { first, second, .. } => {
                    let (a, b) = (first.support(), second.support());
                    (a.lower.min(b.lower), a.upper.max(b.upper))
                }
                Derived::Convex { map, of } => {
                    let s = of.support();
                    (map.apply(s.lower), map.apply(s.upper))
                }
                Derived::Convolution { table, .. } => table_support(table),
            },
        };
        SupportBounds { lower, upper }
    }

    pub fn cdf(&self, r: f64) -> f64 {
        match &self.family {
            Family::Exponential { rate } => {
                if r <= 0.0 {
                    0.0
                } else {
                    -(-rate * r).exp_m1()
                }
            }
            Family::Gamma { shape, scale } => {
                let x = r / scale;
                if x <= 0.0 {
                    0.0
                } else if x.is_infinite() {
                    1.0
                } else {
                    gamma_lr(*shape, x)
                }
            }
            Family::Normal { mean, sd, truncated } => {
                let z = (r - mean) / sd;
                if *truncated {
                    if r <= 0.0 {
                        return 0.0;
                    }
                    let z0 = -mean / sd;
                    // Difference of lower tails is accurate where the survival cancels.
                    ((std_normal_sf(z0) - std_normal_sf(z)) / std_normal_sf(z0)).clamp(0.0, 1.0)
                } else {
                    std_normal_sf(-z)
                }
            }
            Family::Lognormal { mu, sigma } => {
                if r <= 0.0 {
                    0.0
                } else {
                    std_normal_sf(-(r.ln() - mu) / sigma)
                }
            }
            Family::PiecewiseLinear(t) => t.cdf(r),
            Family::Derived(Derived::Scale { c, of }) => of.cdf(r / c),
            Family::Derived(Derived::Affine { shift, factor, of }) => of.cdf((r - shift) / factor),
            Family::Derived(Derived::Mixture { p, first, second }) => p * first.cdf(r) + (1.0 - p) * second.cdf(r),
            Family::Derived(Derived::Convex { map, of }) => of.cdf(map.inverse(r)),
            Family::Derived(Derived::Convolution { table, .. }) => table.cdf(r),
            _ => 1.0 - self.survival(r),
        }
    }

    pub fn survival(&self, r: f64) -> f64 {
        match &self.family {
            Family::Exponential { rate } => {
                if r <= 0.0 {
                    1.0
                } else {
                    (-rate * r).exp()
                }
            }
            Family::Pareto { scale, shape } => {
                if r <= *scale {
                    1.0
                } else {
                    (scale / r).powf(*shape)
                }
            }
            Family::GeneralizedPareto { location, scale, shape } => {
                if r <= *location {
                    return 1.0;
                }
                let z = (r - location) / scale;
                if *shape == 0.0 {
                    (-z).exp()
                } else {
                    let base = 1.0 + shape * z;
                    if base <= 0.0 {
                        0.0
                    } else {
                        (-base.ln() / shape).exp()
                    }
                }
            }
            Family::Kumaraswamy { shape } => {
                if r <= 0.0 {
                    1.0
                } else if r >= 1.0 {
                    0.0
                } else {
                    (1.0 - r).powf(*shape)
                }
            }
            Family::Uniform { lower, upper } => ((upper - r) / (upper - lower)).clamp(0.0, 1.0),
            Family::Gamma { shape, scale } => {
                let x = r / scale;
                if x <= 0.0 {
                    1.0
                } else if x.is_infinite() {
                    0.0
                } else {
                    gamma_ur(*shape, x)
                }
            }
            Family::Lognormal { mu, sigma } => {
                if r <= 0.0 {
                    1.0
                } else {
                    std_normal_sf((r.ln() - mu) / sigma)
                }
            }
            Family::Normal { mean, sd, truncated } => {
                let z = (r - mean) / sd;
                if *truncated {
                    if r <= 0.0 {
                        1.0
                    } else {
                        (std_normal_sf(z) / std_normal_sf(-mean / sd)).min(1.0)
                    }
                } else {
                    std_normal_sf(z)
                }
            }
            Family::PiecewiseLinear(t) => t.survival(r),
            Family::Deterministic { value } => {
                if r < *value {
                    1.0
                } else {
                    0.0
                }
            }
            Family::Derived(d) => match d {
                Derived::Scale { c, of } => of.survival(r / c),
                Derived::Affine { shift, factor, of } => of.survival((r - shift) / factor),
                Derived::Mixture { p, first, second } => p * first.survival(r) + (1.0 - p) * second.survival(r),
                Derived::Convex { map, of } => of.survival(map.inverse(r)),
                Derived::Convolution { table, .. } => table.survival(r),
            },
        }
    }

    /// Density at `r`. At kinks of a piecewise-linear cdf the right density is
    /// returned with `one_sided` set.
    pub fn pdf(&self, r: f64) -> Result<PointValue, DistributionError> {
        let exact = |value: f64| Ok(PointValue { value, one_sided: false });
        let s = self.support();
        if (r < s.lower || r > s.upper) && !matches!(self.family, Family::Deterministic { .. }) {
            return exact(0.0);
        }
        match &self.family {
            Family::Exponential { rate } => exact(rate * (-rate * r).exp()),
            Family::Pareto { scale, shape } => exact(shape / r * (scale / r).powf(*shape)),
            Family::GeneralizedPareto { location, scale, shape } => {
                let z = (r - location) / scale;
                if *shape == 0.0 {
                    exact((-z).exp() / scale)
                } else {
                    let base = 1.0 + shape * z;
                    if base <= 0.0 {
                        exact(0.0)
                    } else {
                        exact((-(1.0 / shape + 1.0) * base.ln()).exp() / scale)
                    }
                }
            }
            Family::Kumaraswamy { shape } => {
                if r >= 1.0 {
                    exact(0.0)
                } else {
                    exact(shape * (1.0 - r).powf(shape - 1.0))
                }
            }
            Family::Uniform { lower, upper } => {
                if r >= *upper {
                    exact(0.0)
                } else {
                    exact(1.0 / (upper - lower))
                }
            }
            Family::Gamma { shape, scale } => {
                let x = r / scale;
                if x <= 0.0 {
                    return exact(match shape.partial_cmp(&1.0) {
                        Some(std::cmp::Ordering::Less) => f64::INFINITY,
                        Some(std::cmp::Ordering::Equal) => 1.0 / scale,
                        _ => 0.0,
                    });
                }
                exact(((shape - 1.0) * x.ln() - x - ln_gamma(*shape)).exp() / scale)
            }
            Family::Lognormal { mu, sigma } => {
                if r <= 0.0 {
                    return exact(0.0);
                }
                let z = (r.ln() - mu) / sigma;
                exact(std_normal_pdf(z) / (r * sigma))
            }
            Family::Normal { mean, sd, truncated } => {
                let z = (r - mean) / sd;
                let norm = if *truncated { std_normal_sf(-mean / sd) } else { 1.0 };
                exact(std_normal_pdf(z) / (sd * norm))
            }
            Family::PiecewiseLinear(t) => {
                let (value, one_sided) = t.density(r);
                Ok(PointValue { value, one_sided })
            }
            Family::Deterministic { value } => Err(DistributionError::NoDensity(format!("deterministic({value})"))),
            Family::Derived(d) => match d {
                Derived::Scale { c, of } => {
                    let v = of.pdf(r / c)?;
                    Ok(PointValue { value: v.value / c, one_sided: v.one_sided })
                }
                Derived::Affine { shift, factor, of } => {
                    let v = of.pdf((r - shift) / factor)?;
                    Ok(PointValue { value: v.value / factor, one_sided: v.one_sided })
                }
                Derived::Mixture { p, first, second } => {
                    let (a, b) = (first.pdf(r)?, second.pdf(r)?);
                    Ok(PointValue { value: p * a.value + (1.0 - p) * b.value, one_sided: a.one_sided || b.one_sided })
                }
                Derived::Convex { map, of } => {
                    let x = map.inverse(r);
                    let v = of.pdf(x)?;
                    Ok(PointValue { value: v.value / map.derivative(x), one_sided: v.one_sided })
                }
                Derived::Convolution { table, .. } => {
                    let (value, one_sided) = table.density(r);
                    Ok(PointValue { value, one_sided })
                }
            },
        }
    }

    /// Whether the law has a density that is positive throughout its support.
    /// Hazard-based checks require this.
    pub fn has_gapless_density(&self) -> bool {
        match &self.family {
            Family::Deterministic { .. } => false,
            Family::PiecewiseLinear(t) => !t.has_gaps(),
            Family::Derived(d) => match d {
                Derived::Scale { of, .. } | Derived::Affine { of, .. } | Derived::Convex { of, .. } => {
                    of.has_gapless_density()
                }
                Derived::Mixture { first, second, .. } => {
                    first.has_gapless_density() && second.has_gapless_density() && {
                        let (a, b) = (first.support(), second.support());
                        a.lower <= b.upper && b.lower <= a.upper
                    }
                }
                Derived::Convolution { table, .. } => !table.has_gaps(),
            },
            _ => true,
        }
    }

    /// Smallest `x` with `F(x) >= p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let s = self.support();
        if p <= 0.0 {
            return s.lower;
        }
        if p >= 1.0 {
            return s.upper;
        }
        match &self.family {
            Family::Exponential { rate } => -(-p).ln_1p() / rate,
            Family::Pareto { scale, shape } => scale * (-(-p).ln_1p() / shape).exp(),
            Family::GeneralizedPareto { location, scale, shape } => {
                let t = -(-p).ln_1p();
                if *shape == 0.0 {
                    location + scale * t
                } else {
                    location + scale * (shape * t).exp_m1() / shape
                }
            }
            Family::Kumaraswamy { shape } => -((-p).ln_1p() / shape).exp_m1(),
            Family::Uniform { lower, upper } => lower + p * (upper - lower),
            Family::Lognormal { mu, sigma } => (mu + sigma * std_normal_isf(1.0 - p)).exp(),
            Family::Normal { mean, sd, truncated } => {
                if *truncated {
                    let tail0 = std_normal_sf(-mean / sd);
                    (mean + sd * std_normal_isf((1.0 - p) * tail0)).max(0.0)
                } else {
                    mean + sd * std_normal_isf(1.0 - p)
                }
            }
            Family::PiecewiseLinear(t) => t.quantile(p),
            Family::Deterministic { value } => *value,
            Family::Gamma { shape, scale } => {
                let mean = shape * scale;
                let sd = shape.sqrt() * scale;
                let mut hi = mean + 10.0 * sd;
                while self.survival(hi) > 1.0 - p {
                    hi *= 2.0;
                }
                self.invert_cdf(p, 0.0, hi)
            }
            Family::Derived(d) => match d {
                Derived::Scale { c, of } => c * of.quantile(p),
                Derived::Affine { shift, factor, of } => shift + factor * of.quantile(p),
                Derived::Convex { map, of } => map.apply(of.quantile(p)),
                Derived::Convolution { table, .. } => table.quantile(p),
                Derived::Mixture { first, second, .. } => {
                    // The mixture quantile lies between the component quantiles.
                    let (a, b) = (first.quantile(p), second.quantile(p));
                    self.invert_cdf(p, a.min(b), a.max(b))
                }
            },
        }
    }

    /// Solves `F(x) = p` on `[lo, hi]`, in log space so that tail quantiles
    /// keep relative accuracy.
    fn invert_cdf(&self, p: f64, lo: f64, hi: f64) -> f64 {
        if lo >= hi {
            return lo;
        }
        let upper_tail = p > 0.5;
        let target = if upper_tail { (1.0 - p).ln() } else { p.ln() };
        let g = |x: f64| {
            if upper_tail {
                target - self.survival(x).max(1e-300).ln()
            } else {
                self.cdf(x).max(1e-300).ln() - target
            }
        };
        match find_root_bracketed(g, lo, hi, 1e-14) {
            Ok(res) => res.root,
            Err(_) => {
                if g(lo) >= 0.0 {
                    lo
                } else {
                    hi
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match &self.family {
            Family::Exponential { rate } => 1.0 / rate,
            Family::Pareto { scale, shape } => shape * scale / (shape - 1.0),
            Family::GeneralizedPareto { location, scale, shape } => location + scale / (1.0 - shape),
            Family::Kumaraswamy { shape } => 1.0 / (shape + 1.0),
            Family::Uniform { lower, upper } => 0.5 * (lower + upper),
            Family::Gamma { shape, scale } => shape * scale,
            Family::Lognormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
            Family::Normal { mean, sd, truncated } => {
                if *truncated {
                    let z0 = -mean / sd;
                    mean + sd * std_normal_pdf(z0) / std_normal_sf(z0)
                } else {
                    *mean
                }
            }
            Family::PiecewiseLinear(t) => t.mean(),
            Family::Deterministic { value } => *value,
            Family::Derived(d) => match d {
                Derived::Scale { c, of } => c * of.mean(),
                Derived::Affine { shift, factor, of } => shift + factor * of.mean(),
                Derived::Mixture { p, first, second } => p * first.mean() + (1.0 - p) * second.mean(),
                Derived::Convex { .. } => self.tail_integral(self.support().lower.max(0.0)) + self.support().lower.max(0.0),
                Derived::Convolution { table, .. } => table.mean(),
            },
        }
    }

    /// `E X^2`, `+inf` when it diverges.
    pub fn second_moment(&self) -> f64 {
        match &self.family {
            Family::Exponential { rate } => 2.0 / (rate * rate),
            Family::Pareto { scale, shape } => {
                if *shape > 2.0 {
                    shape * scale * scale / (shape - 2.0)
                } else {
                    f64::INFINITY
                }
            }
            Family::GeneralizedPareto { location, scale, shape } => {
                if *shape >= 0.5 {
                    return f64::INFINITY;
                }
                let var = scale * scale / ((1.0 - shape).powi(2) * (1.0 - 2.0 * shape));
                let mean = location + scale / (1.0 - shape);
                var + mean * mean
            }
            Family::Kumaraswamy { shape } => 2.0 / ((shape + 1.0) * (shape + 2.0)),
            Family::Uniform { lower, upper } => (lower * lower + lower * upper + upper * upper) / 3.0,
            Family::Gamma { shape, scale } => shape * (shape + 1.0) * scale * scale,
            Family::Lognormal { mu, sigma } => (2.0 * mu + 2.0 * sigma * sigma).exp(),
            Family::Normal { mean, sd, truncated } => {
                if *truncated {
                    let z0 = -mean / sd;
                    let lambda = std_normal_pdf(z0) / std_normal_sf(z0);
                    let var = sd * sd * (1.0 + z0 * lambda - lambda * lambda);
                    let m = mean + sd * lambda;
                    var + m * m
                } else {
                    mean * mean + sd * sd
                }
            }
            Family::PiecewiseLinear(t) => t.second_moment(),
            Family::Deterministic { value } => value * value,
            Family::Derived(d) => match d {
                Derived::Scale { c, of } => c * c * of.second_moment(),
                Derived::Affine { shift, factor, of } => {
                    shift * shift + 2.0 * shift * factor * of.mean() + factor * factor * of.second_moment()
                }
                Derived::Mixture { p, first, second } => p * first.second_moment() + (1.0 - p) * second.second_moment(),
                Derived::Convex { map, of } => {
                    let finite = match *map {
                        ConvexMap::Power { gamma } => of.moment_finite(2.0 * gamma),
                        ConvexMap::ExpScale { s } => of.exp_moment_finite(2.0 * s),
                        ConvexMap::AffineIncreasing { .. } => of.moment_finite(2.0),
                    };
                    if !finite {
                        return f64::INFINITY;
                    }
                    numeric_second_moment(self)
                }
                Derived::Convolution { table, .. } => table.second_moment(),
            },
        }
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        (self.second_moment() - m * m).max(0.0)
    }

    /// Whether `E |X|^order` is finite.
    pub fn moment_finite(&self, order: f64) -> bool {
        match &self.family {
            Family::Pareto { shape, .. } => order < *shape,
            Family::GeneralizedPareto { shape, .. } => *shape <= 0.0 || order * shape < 1.0,
            Family::Derived(d) => match d {
                Derived::Scale { of, .. } | Derived::Affine { of, .. } => of.moment_finite(order),
                Derived::Mixture { first, second, .. } | Derived::Convolution { first, second, .. } => {
                    first.moment_finite(order) && second.moment_finite(order)
                }
                Derived::Convex { map, of } => match *map {
                    ConvexMap::Power { gamma } => of.moment_finite(order * gamma),
                    ConvexMap::ExpScale { s } => of.exp_moment_finite(order * s),
                    ConvexMap::AffineIncreasing { .. } => of.moment_finite(order),
                },
            },
            _ => true,
        }
    }

    /// Whether `E exp(s X)` is finite for `s > 0`.
    pub fn exp_moment_finite(&self, s: f64) -> bool {
        match &self.family {
            Family::Exponential { rate } => s < *rate,
            Family::Gamma { scale, .. } => s * scale < 1.0,
            Family::Pareto { .. } | Family::Lognormal { .. } => false,
            Family::GeneralizedPareto { shape, scale, .. } => {
                if *shape > 0.0 {
                    false
                } else if *shape == 0.0 {
                    s * scale < 1.0
                } else {
                    true
                }
            }
            Family::Derived(d) => match d {
                Derived::Scale { c, of } => of.exp_moment_finite(s * c),
                Derived::Affine { factor, of, .. } => of.exp_moment_finite(s * factor),
                Derived::Mixture { first, second, .. } | Derived::Convolution { first, second, .. } => {
                    first.exp_moment_finite(s) && second.exp_moment_finite(s)
                }
                Derived::Convex { map, of } => match *map {
                    ConvexMap::AffineIncreasing { b, .. } => of.exp_moment_finite(s * b),
                    _ => of.support().is_bounded(),
                },
            },
            _ => true,
        }
    }

    /// `int_r^inf F_bar(u) du = E (X - r)_+`.
    ///
    /// Closed forms are used throughout except for convex maps, which fall
    /// back to [`numerics::tail_integral`] (returning its best estimate if the
    /// subdivision budget runs out).
    pub fn tail_integral(&self, r: f64) -> f64 {
        let s = self.support();
        if r >= s.upper {
            return 0.0;
        }
        match &self.family {
            Family::Exponential { rate } => {
                if r <= 0.0 {
                    1.0 / rate - r
                } else {
                    (-rate * r).exp() / rate
                }
            }
            Family::Pareto { scale, shape } => {
                if r < *scale {
                    (scale - r) + scale / (shape - 1.0)
                } else {
                    r * (scale / r).powf(*shape) / (shape - 1.0)
                }
            }
            Family::GeneralizedPareto { location, scale, shape } => {
                if r < *location {
                    return (location - r) + scale / (1.0 - shape);
                }
                let z = (r - location) / scale;
                if *shape == 0.0 {
                    scale * (-z).exp()
                } else {
                    let base = 1.0 + shape * z;
                    if base <= 0.0 {
                        0.0
                    } else {
                        scale / (1.0 - shape) * ((1.0 - 1.0 / shape) * base.ln()).exp()
                    }
                }
            }
            Family::Kumaraswamy { shape } => {
                if r < 0.0 {
                    self.mean() - r
                } else {
                    (1.0 - r).powf(shape + 1.0) / (shape + 1.0)
                }
            }
            Family::Uniform { lower, upper } => {
                if r < *lower {
                    0.5 * (lower + upper) - r
                } else {
                    (upper - r).powi(2) / (2.0 * (upper - lower))
                }
            }
            Family::Gamma { shape, scale } => {
                let x = r / scale;
                if x <= 0.0 {
                    return shape * scale - r;
                }
                let q = gamma_ur(*shape, x);
                let kernel = (shape * x.ln() - x - ln_gamma(*shape)).exp();
                (scale * ((shape - x) * q + kernel)).max(0.0)
            }
            Family::Lognormal { mu, sigma } => {
                if r <= 0.0 {
                    return self.mean() - r;
                }
                let d1 = (mu + sigma * sigma - r.ln()) / sigma;
                let d2 = d1 - sigma;
                ((mu + 0.5 * sigma * sigma).exp() * std_normal_sf(-d1) - r * std_normal_sf(-d2)).max(0.0)
            }
            Family::Normal { mean, sd, truncated } => {
                if *truncated && r < 0.0 {
                    return self.mean() - r;
                }
                let z = (r - mean) / sd;
                let norm = if *truncated { std_normal_sf(-mean / sd) } else { 1.0 };
                sd * normal_partial_expectation(z) / norm
            }
            Family::PiecewiseLinear(t) => t.tail_integral(r),
            Family::Deterministic { value } => (value - r).max(0.0),
            Family::Derived(d) => match d {
                Derived::Scale { c, of } => c * of.tail_integral(r / c),
                Derived::Affine { shift, factor, of } => factor * of.tail_integral((r - shift) / factor),
                Derived::Mixture { p, first, second } => {
                    p * first.tail_integral(r) + (1.0 - p) * second.tail_integral(r)
                }
                Derived::Convolution { table, .. } => table.tail_integral(r),
                Derived::Convex { .. } => {
                    let base = r.max(s.lower).max(0.0);
                    let below = base - r;
                    let settings = QuadratureSettings::default();
                    let tail = match numerics::tail_integral(self, base, &settings) {
                        Ok(v) => v,
                        Err(QuadratureError::NonConvergence { estimate, .. }) => estimate,
                        Err(_) => f64::NAN,
                    };
                    below + tail
                }
            },
        }
    }

    /// Points where the survival function has kinks; quadrature splits there.
    pub fn breakpoints(&self) -> Vec<f64> {
        const MAX_BREAKS: usize = 256;
        let mut v = match &self.family {
            Family::Pareto { scale, .. } => vec![*scale],
            Family::GeneralizedPareto { location, .. } => vec![*location],
            Family::Uniform { lower, upper } => vec![*lower, *upper],
            Family::Kumaraswamy { .. } => vec![0.0, 1.0],
            Family::Deterministic { value } => vec![*value],
            Family::PiecewiseLinear(t) | Family::Derived(Derived::Convolution { table: t, .. }) => {
                if t.len() <= MAX_BREAKS {
                    t.abscissae().to_vec()
                } else {
                    vec![t.first(), t.last()]
                }
            }
            Family::Derived(d) => match d {
                Derived::Scale { c, of } => of.breakpoints().into_iter().map(|x| c * x).collect(),
                Derived::Affine { shift, factor, of } => {
                    of.breakpoints().into_iter().map(|x| shift + factor * x).collect()
                }
                Derived::Mixture { first, second, .. } => {
                    let mut b = first.breakpoints();
                    b.extend(second.breakpoints());
                    b
                }
                Derived::Convex { map, of } => of.breakpoints().into_iter().map(|x| map.apply(x)).collect(),
                Derived::Convolution { .. } => unreachable!(),
            },
            _ => Vec::new(),
        };
        v.retain(|x| x.is_finite());
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// `int_cut^inf F_bar(u) du` for families whose tail has a closed form.
    pub fn analytic_tail_remainder(&self, cut: f64) -> Option<f64> {
        match &self.family {
            Family::Exponential { .. } | Family::Pareto { .. } | Family::GeneralizedPareto { .. } => {
                Some(self.tail_integral(cut))
            }
            Family::Derived(Derived::Scale { c, of }) => of.analytic_tail_remainder(cut / c).map(|v| c * v),
            _ => None,
        }
    }

    /// Mean residual demand `m(r)` together with the underflow flag.
    pub fn mrd_eval(&self, r: f64) -> MrdValue {
        let ok = |value: f64| MrdValue { value: value.max(0.0), underflow: false };
        let s = self.support();
        if r >= s.upper {
            return ok(0.0);
        }
        if r < s.lower {
            return ok(self.tail_integral(r));
        }
        if let Some(v) = self.closed_form_mrd(r) {
            return ok(v);
        }
        let sf = self.survival(r);
        if sf < SURVIVAL_UNDERFLOW {
            return MrdValue { value: 0.0, underflow: true };
        }
        ok(self.tail_integral(r) / sf)
    }

    /// Mean residual demand `m(r)`.
    pub fn mrd(&self, r: f64) -> f64 {
        self.mrd_eval(r).value
    }

    /// Direct expressions for `m(r)` with `L <= r < H` that stay accurate
    /// where `F_bar(r)` underflows.
    fn closed_form_mrd(&self, r: f64) -> Option<f64> {
        match &self.family {
            Family::Exponential { rate } => Some(1.0 / rate),
            Family::Pareto { shape, .. } => Some(r / (shape - 1.0)),
            Family::GeneralizedPareto { location, scale, shape } => {
                Some((scale + shape * (r - location)) / (1.0 - shape))
            }
            Family::Kumaraswamy { shape } => Some((1.0 - r) / (shape + 1.0)),
            Family::Uniform { upper, .. } => Some(0.5 * (upper - r)),
            Family::Deterministic { value } => Some(value - r),
            Family::Normal { mean, sd, .. } => Some(sd * normal_mills_mrd((r - mean) / sd)),
            Family::Derived(Derived::Scale { c, of }) => Some(c * of.mrd(r / c)),
            Family::Derived(Derived::Affine { shift, factor, of }) => Some(factor * of.mrd((r - shift) / factor)),
            _ => None,
        }
    }

    /// Generalized mean residual demand `l(r) = m(r) / r` for `0 < r < H`.
    pub fn gmrd(&self, r: f64) -> Result<f64, DistributionError> {
        self.check_interior("gmrd", r)?;
        Ok(self.mrd(r) / r)
    }

    /// Price elasticity of expected demand, `r / m(r)`.
    pub fn elasticity(&self, r: f64) -> Result<f64, DistributionError> {
        self.check_interior("elasticity", r)?;
        Ok(r / self.mrd(r))
    }

    /// Hazard rate `f(r) / F_bar(r)` for `0 < r < H`.
    pub fn hazard(&self, r: f64) -> Result<PointValue, DistributionError> {
        self.check_interior("hazard", r)?;
        if let Some(v) = self.closed_form_hazard(r) {
            return Ok(PointValue { value: v, one_sided: false });
        }
        let f = self.pdf(r)?;
        let sf = self.survival(r);
        if sf < SURVIVAL_UNDERFLOW {
            return Err(DistributionError::OutOfDomain { op: "hazard", r, reason: "survival underflows" });
        }
        Ok(PointValue { value: f.value / sf, one_sided: f.one_sided })
    }

    fn closed_form_hazard(&self, r: f64) -> Option<f64> {
        match &self.family {
            Family::Exponential { rate } => Some(*rate),
            Family::Pareto { scale, shape } if r >= *scale => Some(shape / r),
            Family::GeneralizedPareto { location, scale, shape } if r >= *location => {
                Some(1.0 / (scale + shape * (r - location)))
            }
            Family::Kumaraswamy { shape } => Some(shape / (1.0 - r)),
            Family::Normal { mean, sd, .. } => Some(1.0 / (sd * normal_mills_ratio((r - mean) / sd))),
            Family::Derived(Derived::Scale { c, of }) => of.closed_form_hazard(r / c).map(|h| h / c),
            _ => None,
        }
    }

    /// Generalized failure rate `r h(r)`.
    pub fn gfr(&self, r: f64) -> Result<PointValue, DistributionError> {
        let h = self.hazard(r)?;
        Ok(PointValue { value: r * h.value, one_sided: h.one_sided })
    }

    fn check_interior(&self, op: &'static str, r: f64) -> Result<(), DistributionError> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(DistributionError::OutOfDomain { op, r, reason: "requires r > 0" });
        }
        if r >= self.support().upper {
            return Err(DistributionError::OutOfDomain { op, r, reason: "requires r below the support's upper end" });
        }
        Ok(())
    }

    /// One draw. Families with native samplers use them; the rest use inverse
    /// transform sampling on an open-interval uniform.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.family {
            Family::Exponential { rate } => Exp::new(*rate).expect("validated rate").sample(rng),
            Family::Pareto { scale, shape } => Pareto::new(*scale, *shape).expect("validated").sample(rng),
            Family::Gamma { shape, scale } => GammaSampler::new(*shape, *scale).expect("validated").sample(rng),
            Family::Lognormal { mu, sigma } => LogNormal::new(*mu, *sigma).expect("validated").sample(rng),
            Family::Normal { mean, sd, truncated } => {
                let normal = NormalSampler::new(*mean, *sd).expect("validated");
                if !*truncated {
                    return normal.sample(rng);
                }
                if std_normal_sf(-mean / sd) > 0.5 {
                    loop {
                        let x = normal.sample(rng);
                        if x >= 0.0 {
                            return x;
                        }
                    }
                }
                let u: f64 = rng.sample(Open01);
                self.quantile(u)
            }
            Family::Deterministic { value } => *value,
            Family::Derived(d) => match d {
                Derived::Scale { c, of } => c * of.sample(rng),
                Derived::Affine { shift, factor, of } => shift + factor * of.sample(rng),
                Derived::Mixture { p, first, second } => {
                    let u: f64 = rng.random();
                    if u < *p {
                        first.sample(rng)
                    } else {
                        second.sample(rng)
                    }
                }
                Derived::Convex { map, of } => map.apply(of.sample(rng)),
                Derived::Convolution { first, second, .. } => first.sample(rng) + second.sample(rng),
            },
            _ => {
                let u: f64 = rng.sample(Open01);
                self.quantile(u)
            }
        }
    }

    /// Short human-readable description.
    pub fn describe(&self) -> String {
        match &self.family {
            Family::Exponential { rate } => format!("exponential(lambda={rate})"),
            Family::Pareto { scale, shape } => format!("pareto(L={scale}, k={shape})"),
            Family::GeneralizedPareto { location, scale, shape } => {
                format!("gpareto(mu={location}, sigma={scale}, k={shape})")
            }
            Family::Kumaraswamy { shape } => format!("kumaraswamy(1, lambda={shape})"),
            Family::Uniform { lower, upper } => format!("uniform({lower}, {upper})"),
            Family::Gamma { shape, scale } => format!("gamma(shape={shape}, scale={scale})"),
            Family::Lognormal { mu, sigma } => format!("lognormal(mu={mu}, sigma={sigma})"),
            Family::Normal { mean, sd, truncated } => {
                format!("normal(mu={mean}, sigma={sd}{})", if *truncated { ", truncated" } else { "" })
            }
            Family::PiecewiseLinear(t) => format!("piecewise({} knots)", t.len()),
            Family::Deterministic { value } => format!("deterministic({value})"),
            Family::Derived(d) => match d {
                Derived::Scale { c, of } => format!("{c}*[{}]", of.describe()),
                Derived::Affine { shift, factor, of } => format!("{shift}+{factor}*[{}]", of.describe()),
                Derived::Mixture { p, first, second } => {
                    format!("mixture({p}; [{}], [{}])", first.describe(), second.describe())
                }
                Derived::Convex { map, of } => format!("phi=({map})[{}]", of.describe()),
                Derived::Convolution { first, second, .. } => format!("[{}]+[{}]", first.describe(), second.describe()),
            },
        }
    }
}

impl fmt::Display for DemandDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

fn table_support(t: &PiecewiseLinearCdf) -> (f64, f64) {
    let mut lower = t.first();
    let mut upper = t.last();
    for (x, f) in t.knots() {
        if f == 0.0 {
            lower = x;
        }
    }
    for (x, f) in t.knots() {
        if f == 1.0 {
            upper = x;
            break;
        }
    }
    (lower, upper)
}

fn numeric_second_moment(d: &DemandDistribution) -> f64 {
    // E X^2 = 2 int_0^inf u F_bar(u) du for X >= 0.
    let settings = QuadratureSettings::default();
    let f = |u: f64| 2.0 * u * d.survival(u);
    let s = d.support();
    let res = if s.upper.is_finite() {
        numerics::integrate(f, 0.0, s.upper, &settings)
    } else {
        let cut = d.quantile(0.5);
        numerics::integrate(f, 0.0, cut, &settings)
            .and_then(|a| numerics::integrate_to_infinity(f, cut, &settings).map(|b| numerics::Integral { value: a.value + b.value, error: a.error + b.error }))
    };
    match res {
        Ok(i) => i.value,
        Err(QuadratureError::NonConvergence { estimate, .. }) => estimate,
        Err(_) => f64::NAN,
    }
}

/// Tabulates the cdf of `X + Z` on a uniform grid by averaging `F_X(t - z_j)`
/// over midpoint quantiles `z_j` of `Z`.
fn grid_convolution(x: &DemandDistribution, z: &DemandDistribution) -> Result<PiecewiseLinearCdf, DistributionError> {
    let m = GRID_CONVOLUTION_POINTS;
    let zs: Vec<f64> = (0..m).map(|j| z.quantile((j as f64 + 0.5) / m as f64)).collect();
    let lo = (x.support().lower + z.support().lower).max(0.0);
    let hi = x.quantile(1.0 - 1e-9) + z.quantile(1.0 - 1e-9);
    if !(hi > lo) {
        return Err(invalid("convolution", "degenerate support"));
    }
    let mut knots = Vec::with_capacity(m + 1);
    let mut prev = 0.0;
    for i in 0..=m {
        let t = lo + (hi - lo) * i as f64 / m as f64;
        let f = if i == 0 {
            0.0
        } else if i == m {
            1.0
        } else {
            let v = zs.iter().map(|&zj| x.cdf(t - zj)).sum::<f64>() / m as f64;
            v.clamp(prev, 1.0)
        };
        prev = f;
        knots.push((t, f));
    }
    PiecewiseLinearCdf::new(&knots)
}

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub(crate) fn std_normal_pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * z * z).exp()
}

/// `P(Z > z)` for a standard normal `Z`.
pub(crate) fn std_normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// Inverse of [`std_normal_sf`].
pub(crate) fn std_normal_isf(q: f64) -> f64 {
    std::f64::consts::SQRT_2 * erfc_inv(2.0 * q)
}

/// Continued fraction `C_1 = z + 1/(z + 2/(z + 3/(...)))`; returns `(C_1, C_2)`.
/// The Mills ratio is `1 / C_1`.
fn mills_fraction(z: f64) -> (f64, f64) {
    const TERMS: usize = 120;
    let mut c = z;
    let mut c2 = z;
    for j in (1..TERMS).rev() {
        let next = z + j as f64 / c;
        if j == 1 {
            c2 = c;
        }
        c = next;
    }
    (c, c2)
}

/// Mills ratio `P(Z > z) / phi(z)`.
fn normal_mills_ratio(z: f64) -> f64 {
    if z > 3.0 {
        1.0 / mills_fraction(z).0
    } else {
        std_normal_sf(z) / std_normal_pdf(z)
    }
}

/// `E (Z - z)_+ = phi(z) - z P(Z > z)`.
fn normal_partial_expectation(z: f64) -> f64 {
    if z > 3.0 {
        let (c1, c2) = mills_fraction(z);
        std_normal_pdf(z) / (c1 * c2)
    } else {
        (std_normal_pdf(z) - z * std_normal_sf(z)).max(0.0)
    }
}

/// `E (Z - z | Z > z)` for a standard normal.
fn normal_mills_mrd(z: f64) -> f64 {
    if z > 3.0 {
        1.0 / mills_fraction(z).1
    } else {
        normal_partial_expectation(z) / std_normal_sf(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const E: f64 = std::f64::consts::E;

    #[test]
    fn cdf_examples() {
        let k = DemandDistribution::kumaraswamy(2.0).unwrap();
        assert!((k.cdf(0.5) - 0.75).abs() < 1e-15);
        let u = DemandDistribution::uniform(0.0, 1.0).unwrap();
        assert!((u.cdf(0.5) - 0.5).abs() < 1e-15);
        let p = DemandDistribution::pareto(1.0, 2.0).unwrap();
        assert!((p.cdf(2.0) - 0.75).abs() < 1e-15);
        assert_eq!(p.cdf(0.5), 0.0);
    }

    #[test]
    fn moment_examples() {
        assert!((DemandDistribution::pareto(1.0, 3.0).unwrap().mean() - 1.5).abs() < 1e-15);
        assert!(DemandDistribution::pareto(1.0, 2.0).unwrap().second_moment().is_infinite());
        assert!((DemandDistribution::exponential(2.0).unwrap().mean() - 0.5).abs() < 1e-15);
        assert!(DemandDistribution::generalized_pareto(0.0, 1.0, 0.5).unwrap().second_moment().is_infinite());
        assert!(DemandDistribution::generalized_pareto(0.0, 1.0, 0.49).unwrap().second_moment().is_finite());
        assert!(DemandDistribution::pareto(1.0, 1.0).is_err());
        assert!(DemandDistribution::pareto(1.0, 0.5).is_err());
    }

    #[test]
    fn mrd_examples() {
        let e = DemandDistribution::exponential(2.0).unwrap();
        for r in [0.0, 0.3, 1.0, 5.0, 10.0] {
            assert!((e.mrd(r) - 0.5).abs() < 1e-15);
        }
        let k = DemandDistribution::kumaraswamy(3.0).unwrap();
        assert!((k.mrd(0.5) - 0.125).abs() < 1e-15);
        let u = DemandDistribution::uniform(0.0, 1.0).unwrap();
        assert!((u.mrd(0.4) - 0.3).abs() < 1e-15);
        assert_eq!(u.mrd(1.0), 0.0);
        assert_eq!(u.mrd(3.0), 0.0);
    }

    #[test]
    fn gmrd_and_hazard_examples() {
        let p3 = DemandDistribution::pareto(1.0, 3.0).unwrap();
        assert!((p3.gmrd(2.0).unwrap() - 0.5).abs() < 1e-15);
        let e1 = DemandDistribution::exponential(1.0).unwrap();
        assert!((e1.gmrd(2.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((e1.elasticity(2.0).unwrap() - 2.0).abs() < 1e-15);
        let u = DemandDistribution::uniform(0.0, 1.0).unwrap();
        assert!((u.gmrd(1.0 / 3.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(u.gmrd(0.0).is_err());

        let p4 = DemandDistribution::pareto(1.0, 4.0).unwrap();
        assert!((p4.hazard(3.0).unwrap().value - 4.0 / 3.0).abs() < 1e-15);
        assert!((p4.gfr(3.0).unwrap().value - 4.0).abs() < 1e-14);
        let e3 = DemandDistribution::exponential(3.0).unwrap();
        assert!((e3.hazard(1.0).unwrap().value - 3.0).abs() < 1e-15);
        assert!((u.hazard(0.5).unwrap().value - 2.0).abs() < 1e-15);
    }

    #[test]
    fn piecewise_hazard_is_one_sided_at_knots() {
        let d = DemandDistribution::piecewise_linear(&[(0.0, 0.0), (0.5, 0.5), (1.0, 1.0)]).unwrap();
        let h = d.hazard(0.5).unwrap();
        assert!(h.one_sided);
        assert!((h.value - 2.0).abs() < 1e-12);
        assert!(!d.hazard(0.25).unwrap().one_sided);
    }

    #[test]
    fn deterministic_has_no_density() {
        let d = DemandDistribution::deterministic(2.0).unwrap();
        assert!(matches!(d.pdf(1.0), Err(DistributionError::NoDensity(_))));
        assert_eq!(d.mrd(0.5), 1.5);
        assert_eq!(d.tail_integral(0.5), 1.5);
        assert_eq!(d.quantile(0.3), 2.0);
    }

    #[test]
    fn generalized_pareto_division_form() {
        let eps = 0.5;
        let mu = 0.02;
        let d = DemandDistribution::generalized_pareto_eps(mu, eps).unwrap();
        for r in [0.05, 0.5, 2.0, 10.0] {
            let expected = (1.0 + r - mu) / (1.0 + eps);
            assert!((d.mrd(r) - expected).abs() < 1e-13, "r = {r}");
        }
        let r_star = (1.0 - mu) / eps;
        assert!((d.mrd(r_star) - r_star).abs() < 1e-12);
    }

    #[test]
    fn lognormal_and_gamma_tails_match_their_means() {
        let ln = DemandDistribution::lognormal(0.5, 1.0).unwrap();
        assert!((ln.mean() - E).abs() < 1e-12);
        assert!((ln.tail_integral(1e-300) - ln.mean()).abs() < 1e-12);
        let g = DemandDistribution::gamma(2.0, 2.0).unwrap();
        assert!((g.tail_integral(0.0) - 4.0).abs() < 1e-12);
        // Shape 2: m(r) = theta (2 + x) / (1 + x) ... with x = r / theta; r* = sqrt(2) theta.
        let r = 2.0 * std::f64::consts::SQRT_2;
        assert!((g.mrd(r) - r).abs() < 1e-12);
    }

    #[test]
    fn normal_tail_forms_agree_across_the_switch() {
        let d = DemandDistribution::normal_untruncated(0.0, 1.0).unwrap();
        let a = normal_partial_expectation(3.0 - 1e-9);
        let b = normal_partial_expectation(3.0 + 1e-9);
        // Slope is -P(Z > 3), so the two sides differ by about 2.7e-12.
        assert!((a - b).abs() < 1e-11);
        let r1 = normal_mills_ratio(3.0 - 1e-9);
        let r2 = normal_mills_ratio(3.0 + 1e-9);
        // Slope about -0.09 plus an erfc error of a few 1e-11.
        assert!((r1 - r2).abs() < 5e-10);
        // Reference values from 40-digit arithmetic.
        assert!((d.mrd(40.0) - 0.024_968_847_207_263_723).abs() < 1e-15);
        assert!((d.mrd(10.0) - 0.098_093_233_962_511_963).abs() < 1e-14);
        assert!((d.mean() - 0.0).abs() < 1e-15);
    }

    #[test]
    fn truncated_normal_moments() {
        let d = DemandDistribution::normal(0.0, 1.0).unwrap();
        // Half-normal: mean sqrt(2/pi), second moment 1.
        assert!((d.mean() - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-14);
        assert!((d.second_moment() - 1.0).abs() < 1e-13);
        assert!((d.tail_integral(0.0) - d.mean()).abs() < 1e-14);
        assert!((d.cdf(d.quantile(0.3)) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn quantiles_invert_cdfs() {
        let fams = [
            DemandDistribution::exponential(1.3).unwrap(),
            DemandDistribution::pareto(2.0, 3.5).unwrap(),
            DemandDistribution::generalized_pareto(0.1, 0.7, 0.3).unwrap(),
            DemandDistribution::generalized_pareto(0.1, 0.7, -0.3).unwrap(),
            DemandDistribution::kumaraswamy(4.0).unwrap(),
            DemandDistribution::uniform(1.0, 3.0).unwrap(),
            DemandDistribution::gamma(2.5, 0.8).unwrap(),
            DemandDistribution::lognormal(0.2, 0.6).unwrap(),
            DemandDistribution::normal(1.0, 0.5).unwrap(),
        ];
        for d in &fams {
            for p in [1e-6, 0.1, 0.5, 0.9, 1.0 - 1e-9] {
                let x = d.quantile(p);
                let back = d.cdf(x);
                assert!((back - p).abs() < 1e-9, "{d}: p = {p}, x = {x}, F(x) = {back}");
            }
            for r in [0.3, 1.1, 2.7] {
                assert!((d.cdf(r) + d.survival(r) - 1.0).abs() < 1e-12, "{d}");
            }
        }
    }

    #[test]
    fn scale_and_affine_nodes() {
        let e = DemandDistribution::exponential(1.0).unwrap();
        let s = e.scaled(2.0).unwrap();
        assert!((s.mrd(3.0) - 2.0).abs() < 1e-15);
        assert!((s.mean() - 2.0).abs() < 1e-15);
        assert!((s.hazard(1.0).unwrap().value - 0.5).abs() < 1e-15);
        let k0 = DemandDistribution::uniform(0.0, 1.0).unwrap().mean_preserving(0.0).unwrap();
        assert_eq!(k0.family(), &Family::Deterministic { value: 0.5 });
        let a = e.affine(1.0, 1.0).unwrap();
        assert!((a.mean() - 2.0).abs() < 1e-15);
        assert!((a.tail_integral(0.5) - 1.5).abs() < 1e-15);
        assert!((a.mrd(2.0) - 1.0).abs() < 1e-15);
        assert_eq!(a.support().lower, 1.0);
    }

    #[test]
    fn mixture_cdf_is_the_weighted_sum() {
        let a = DemandDistribution::exponential(1.0).unwrap();
        let b = DemandDistribution::exponential(2.0).unwrap();
        let m = DemandDistribution::mixture(0.5, &a, &b).unwrap();
        for r in [0.1f64, 0.7, 2.0] {
            let expected = 0.5 * (1.0 - (-r).exp()) + 0.5 * (1.0 - (-2.0 * r).exp());
            assert!((m.cdf(r) - expected).abs() < 1e-15);
        }
        let q = m.quantile(0.6);
        assert!((m.cdf(q) - 0.6).abs() < 1e-12);
        assert!(DemandDistribution::mixture(1.0, &a, &b).is_err());
    }

    #[test]
    fn convex_map_of_exponential() {
        // X ~ Exp(1), Y = X^2: E Y = 2, E (Y - 1)_+ = int_1^inf e^{-sqrt(u)} du = 4/e.
        let e = DemandDistribution::exponential(1.0).unwrap();
        let y = e.convex_map(ConvexMap::Power { gamma: 2.0 }).unwrap();
        assert!((y.mean() - 2.0).abs() < 1e-8);
        assert!((y.tail_integral(1.0) - 4.0 / E).abs() < 1e-8);
        assert!((y.second_moment() - 24.0).abs() < 1e-6);
        assert!(e.convex_map(ConvexMap::ExpScale { s: 1.5 }).is_err());
        let p = DemandDistribution::pareto(1.0, 3.0).unwrap();
        assert!(p.convex_map(ConvexMap::Power { gamma: 3.0 }).is_err());
        assert!(ConvexMap::Power { gamma: 0.5 }.validate().is_err());
    }

    #[test]
    fn grid_convolution_of_exponentials() {
        // Exp(1) + Exp(1) = Gamma(2, 1).
        let e = DemandDistribution::exponential(1.0).unwrap();
        let s = e.convolve(&e, ConvolutionMethod::Grid).unwrap();
        let g = DemandDistribution::gamma(2.0, 1.0).unwrap();
        for r in [0.5, 1.0, 2.0, 4.0] {
            assert!((s.cdf(r) - g.cdf(r)).abs() < 2e-3, "r = {r}");
            assert!((s.tail_integral(r) - g.tail_integral(r)).abs() < 5e-3, "r = {r}");
        }
    }
}
