//! Wholesale pricing under stochastic linear demand.
//!
//! A supplier posts a uniform wholesale price `r` before the demand intercept
//! `alpha` is realized; retailers then order `lambda_M (alpha - r)_+`. The
//! supplier's expected profit is `lambda_M r E(alpha - r)_+`, maximized at the
//! fixed points `r* = m(r*)` of the mean residual demand `m`.
//!
//! * [`distributions`]: demand laws, `m`, `m/r`, hazard and shape classification,
//! * [`numerics`]: quadrature, root finding, grid diagnostics,
//! * [`equilibrium`]: optimal prices and profit curves,
//! * [`orders`]: stochastic-order checks and comparative statics,
//! * [`market`]: market structures, no-trade probability, realized profits,
//! * [`sim`]: seeded Monte Carlo checks of all of the above.

pub mod distributions;
pub mod equilibrium;
pub mod market;
pub mod numerics;
pub mod orders;
pub mod sim;

pub use distributions::{
    classify, ClassificationReport, ConvexMap, ConvolutionMethod, DemandDistribution, DistributionError, Family,
    MrdProfile, PiecewiseLinearCdf, SupportBounds,
};
pub use numerics::{GridSpec, QuadratureSettings, RootResult};
