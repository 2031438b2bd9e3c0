//! Second-stage market structures, stockout probability and realized-profit
//! accounting.
//!
//! The profit formulas assume classic Cournot competition among `n` symmetric
//! retailers with inverse demand `p = alpha - sum q` (slope scaled to one).
//! The other structures are used by the simulator through
//! [`MarketStructure::lambda_per_retailer`] and [`MarketStructure::retail_price`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::DemandDistribution;
use crate::equilibrium::{optimal_price, EquilibriumError};
use crate::numerics::{integrate, QuadratureError, QuadratureSettings};

/// `1 - e^{-1}`.
pub const NO_TRADE_BOUND: f64 = 1.0 - 0.367_879_441_171_442_33;

/// Maximum allowed gap between `F(r*)` and its MRD representation.
pub const REPRESENTATION_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("invalid market structure: {0}")]
    InvalidStructure(String),
    #[error("optimal price is not unique; candidates {0:?}")]
    NonUniquePrice(Vec<f64>),
    #[error("shares are undefined when alpha = {alpha} <= r* = {r_star} (no trade)")]
    UndefinedShare { alpha: f64, r_star: f64 },
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarketKind {
    CournotDiff,
    BertrandDiff,
    SingleRetailer,
    CompetingNoReturns,
    CompetingFullReturns,
    Collusion,
    CournotN,
}

impl MarketKind {
    pub const ALL: [MarketKind; 7] = [
        MarketKind::CournotDiff,
        MarketKind::BertrandDiff,
        MarketKind::SingleRetailer,
        MarketKind::CompetingNoReturns,
        MarketKind::CompetingFullReturns,
        MarketKind::Collusion,
        MarketKind::CournotN,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MarketKind::CournotDiff => "cournot_diff",
            MarketKind::BertrandDiff => "bertrand_diff",
            MarketKind::SingleRetailer => "single_retailer",
            MarketKind::CompetingNoReturns => "competing_no_returns",
            MarketKind::CompetingFullReturns => "competing_full_returns",
            MarketKind::Collusion => "collusion",
            MarketKind::CournotN => "cournot_n",
        }
    }
}

impl std::str::FromStr for MarketKind {
    type Err = MarketError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MarketKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| MarketError::InvalidStructure(format!("unknown market kind `{s}`")))
    }
}

/// A second-stage market with own-price slope `beta` and cross slope `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketStructure {
    pub kind: MarketKind,
    pub beta: f64,
    pub gamma: f64,
    /// Number of retailers; only read by `cournot_n`.
    pub n: usize,
}

impl MarketStructure {
    /// Validates the slopes. `gamma` must satisfy `|gamma| <= beta` unless
    /// `allow_any_gamma` is set.
    pub fn new(kind: MarketKind, beta: f64, gamma: f64, n: usize, allow_any_gamma: bool) -> Result<Self, MarketError> {
        let bad = |m: String| Err(MarketError::InvalidStructure(m));
        if !(beta.is_finite() && beta > 0.0) {
            return bad(format!("beta must be positive, got {beta}"));
        }
        if !gamma.is_finite() {
            return bad(format!("gamma must be finite, got {gamma}"));
        }
        if !allow_any_gamma && gamma.abs() > beta {
            return bad(format!("|gamma| = {} exceeds beta = {beta}", gamma.abs()));
        }
        if kind == MarketKind::CournotN && n == 0 {
            return bad("cournot_n needs at least one retailer".into());
        }
        let s = Self { kind, beta, gamma, n: if kind == MarketKind::CournotN { n } else { 1 } };
        let lambda = s.lambda_per_retailer();
        let two_sided = matches!(kind, MarketKind::BertrandDiff | MarketKind::CompetingFullReturns);
        if two_sided && !(2.0 * beta - gamma > 0.0 && beta + gamma > 0.0) {
            return bad(format!("{} requires 2 beta - gamma > 0 and beta + gamma > 0", kind.name()));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return bad(format!("{} with beta = {beta}, gamma = {gamma} gives lambda_M = {lambda}", kind.name()));
        }
        Ok(s)
    }

    /// Classic Cournot oligopoly with unit slope.
    pub fn cournot_n(n: usize) -> Result<Self, MarketError> {
        Self::new(MarketKind::CournotN, 1.0, 0.0, n, false)
    }

    pub fn retailers(&self) -> usize {
        match self.kind {
            MarketKind::SingleRetailer => 1,
            MarketKind::CournotN => self.n,
            _ => 2,
        }
    }

    /// Equilibrium order of one retailer per unit of `(alpha - r)_+`.
    pub fn lambda_per_retailer(&self) -> f64 {
        let (b, g) = (self.beta, self.gamma);
        match self.kind {
            MarketKind::CournotDiff | MarketKind::CompetingNoReturns => 1.0 / (2.0 * b + g),
            MarketKind::BertrandDiff | MarketKind::CompetingFullReturns => b / ((2.0 * b - g) * (b + g)),
            MarketKind::SingleRetailer => 1.0 / (2.0 * b),
            // The joint-monopoly total 1/(beta + gamma) split between two retailers.
            MarketKind::Collusion => 0.5 / (b + g),
            MarketKind::CournotN => 1.0 / (b * (self.n as f64 + 1.0)),
        }
    }

    /// Total order across retailers per unit of `(alpha - r)_+`.
    pub fn lambda_total(&self) -> f64 {
        self.lambda_per_retailer() * self.retailers() as f64
    }

    /// Symmetric per-retailer order at wholesale price `r`.
    pub fn order_quantity(&self, alpha: f64, r: f64) -> f64 {
        self.lambda_per_retailer() * (alpha - r).max(0.0)
    }

    /// Retail price when every retailer orders `q`.
    pub fn retail_price(&self, alpha: f64, q: f64) -> f64 {
        match self.kind {
            MarketKind::SingleRetailer => alpha - self.beta * q,
            MarketKind::CournotN => alpha - self.beta * q * self.n as f64,
            _ => alpha - (self.beta + self.gamma) * q,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundCheck {
    pub is_dmrd: bool,
    pub bound: f64,
    /// `None` when the law is not DMRD and the bound does not apply.
    pub satisfied: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NoTradeReport {
    pub r_star: f64,
    pub probability: f64,
    /// `1 - (m(0)/m(r*)) exp(-int_0^{r*} du / m(u))`.
    pub via_mrd: f64,
    pub representation_gap: f64,
    pub representation_agrees: bool,
    pub bound_check: BoundCheck,
}

/// `F(r*)`, the probability that realized demand falls below the optimal
/// wholesale price.
pub fn no_trade_probability(d: &DemandDistribution) -> Result<NoTradeReport, MarketError> {
    let eq = optimal_price(d)?;
    let r_star = eq.price().ok_or_else(|| MarketError::NonUniquePrice(eq.prices.clone()))?;
    let probability = d.cdf(r_star);
    let via_mrd = mrd_representation_cdf(d, r_star)?;
    let representation_gap = (probability - via_mrd).abs();
    let is_dmrd = eq.classification.as_ref().is_some_and(|c| c.dmrd);
    Ok(NoTradeReport {
        r_star,
        probability,
        via_mrd,
        representation_gap,
        representation_agrees: representation_gap <= REPRESENTATION_TOL,
        bound_check: BoundCheck {
            is_dmrd,
            bound: NO_TRADE_BOUND,
            satisfied: is_dmrd.then_some(probability <= NO_TRADE_BOUND + 1e-9),
        },
    })
}

/// Recovers `F(r)` from the MRD function alone.
pub fn mrd_representation_cdf(d: &DemandDistribution, r: f64) -> Result<f64, MarketError> {
    if r <= 0.0 {
        return Ok(0.0);
    }
    let settings = QuadratureSettings::default();
    let mut cuts = vec![0.0, d.support().lower, r];
    cuts.extend(d.breakpoints());
    cuts.retain(|&b| (0.0..=r).contains(&b));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut exponent = 0.0;
    for w in cuts.windows(2) {
        exponent += integrate(|u| 1.0 / d.mrd(u), w[0], w[1], &settings)?.value;
    }
    Ok(1.0 - d.mrd(0.0) / d.mrd(r) * (-exponent).exp())
}

/// Realized profits in the stochastic (`U`) and full-information (`D`) markets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarketOutcome {
    pub alpha: f64,
    pub r_star: f64,
    pub n: usize,
    pub pi_s_u: f64,
    pub pi_i_u: f64,
    pub pi_a_u: f64,
    pub pi_s_d: f64,
    pub pi_i_d: f64,
    pub pi_a_d: f64,
    /// Supplier share in the stochastic market; `None` without trade.
    pub share_u: Option<f64>,
    pub share_d: f64,
    pub ratio: f64,
}

impl MarketOutcome {
    pub const CSV_HEADER: &'static str = "alpha,n,r_star,pi_s_U,pi_i_U,pi_A_U,pi_s_D,pi_i_D,pi_A_D,share_U,share_D,ratio";

    pub fn csv_row(&self) -> String {
        let share_u = self.share_u.map_or_else(|| "NaN".to_string(), |s| format!("{s:.12e}"));
        format!(
            "{:.12e},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{},{:.12e},{:.12e}",
            self.alpha,
            self.n,
            self.r_star,
            self.pi_s_u,
            self.pi_i_u,
            self.pi_a_u,
            self.pi_s_d,
            self.pi_i_d,
            self.pi_a_d,
            share_u,
            self.share_d,
            self.ratio
        )
    }
}

pub fn realized_profits(alpha: f64, r_star: f64, n: usize) -> MarketOutcome {
    let nf = n as f64;
    let excess = (alpha - r_star).max(0.0);
    let half = 0.5 * alpha.max(0.0);
    let k = 1.0 / ((nf + 1.0) * (nf + 1.0));
    let pi_s_u = nf / (nf + 1.0) * r_star * excess;
    let pi_i_u = k * excess * excess;
    let pi_s_d = nf / (nf + 1.0) * half * half;
    let pi_i_d = k * half * half;
    let shares = supplier_shares(alpha, r_star, n).ok();
    MarketOutcome {
        alpha,
        r_star,
        n,
        pi_s_u,
        pi_i_u,
        pi_a_u: pi_s_u + nf * pi_i_u,
        pi_s_d,
        pi_i_d,
        pi_a_d: pi_s_d + nf * pi_i_d,
        share_u: shares.map(|s| s.share_u),
        share_d: (nf + 1.0) / (nf + 2.0),
        ratio: aggregate_ratio(alpha, r_star, n),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Shares {
    pub share_u: f64,
    pub share_d: f64,
}

/// Supplier's fraction of aggregate realized profit in both markets.
pub fn supplier_shares(alpha: f64, r_star: f64, n: usize) -> Result<Shares, MarketError> {
    if !(alpha > r_star) {
        return Err(MarketError::UndefinedShare { alpha, r_star });
    }
    let nf = n as f64;
    Ok(Shares { share_u: (nf + 1.0) * r_star / (nf * r_star + alpha), share_d: (nf + 1.0) / (nf + 2.0) })
}

/// `Pi_A^U / Pi_A^D`; zero when there is no trade.
pub fn aggregate_ratio(alpha: f64, r_star: f64, n: usize) -> f64 {
    if !(alpha > r_star) || alpha <= 0.0 {
        return 0.0;
    }
    let nf = n as f64;
    4.0 * (alpha - r_star) * (alpha + nf * r_star) / ((nf + 2.0) * alpha * alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioAnalytics {
    /// `2 n r* / (n - 1)`; `None` for one retailer, where the ratio only rises.
    pub argmax: Option<f64>,
    pub max_value: Option<f64>,
    /// Value as `alpha -> infinity`.
    pub limit: f64,
    /// Demand levels where the ratio exceeds one; the upper end is infinite for `n <= 2`.
    pub gt1_interval: (f64, f64),
}

pub fn ratio_analytics(r_star: f64, n: usize) -> RatioAnalytics {
    let nf = n as f64;
    let (argmax, max_value) = if n >= 2 {
        (Some(2.0 * nf * r_star / (nf - 1.0)), Some(1.0 + 1.0 / (nf * (nf + 2.0))))
    } else {
        (None, None)
    };
    // The ratio equals one at 2 r* and at 2 n r* / (n - 2); the second root is
    // negative for n = 1, so the interval is unbounded there too.
    let upper = if n >= 3 { 2.0 * nf * r_star / (nf - 2.0) } else { f64::INFINITY };
    RatioAnalytics { argmax, max_value, limit: 4.0 / (nf + 2.0), gt1_interval: (2.0 * r_star, upper) }
}

#[derive(Debug, Clone, Serialize)]
pub struct SupportCheck {
    pub upper: f64,
    pub needed: f64,
    pub ok: bool,
}

/// Checks `H > 2 r*` and, for `n >= 3`, `H > 2 n r* / (n - 2)`.
pub fn support_check(d: &DemandDistribution, r_star: f64, n: usize) -> SupportCheck {
    let upper = d.support().upper;
    let a = ratio_analytics(r_star, n);
    let needed = if a.gt1_interval.1.is_finite() { a.gt1_interval.1 } else { 2.0 * r_star };
    SupportCheck { upper, needed, ok: upper > needed }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structure_constants() {
        let s = MarketStructure::new(MarketKind::CournotDiff, 1.0, 1.0, 2, false).unwrap();
        assert!((s.lambda_per_retailer() - 1.0 / 3.0).abs() < 1e-15);
        let s = MarketStructure::new(MarketKind::CournotDiff, 1.0, 0.0, 2, false).unwrap();
        assert_eq!(s.lambda_per_retailer(), 0.5);
        let s = MarketStructure::cournot_n(4).unwrap();
        assert_eq!(s.lambda_per_retailer(), 0.2);
        assert_eq!(s.lambda_total(), 0.8);
        let s = MarketStructure::new(MarketKind::Collusion, 1.0, 1.0, 2, false).unwrap();
        assert_eq!(s.lambda_total(), 0.5);
        assert!(MarketStructure::new(MarketKind::CournotDiff, 1.0, 2.0, 2, false).is_err());
        assert!(MarketStructure::new(MarketKind::CournotDiff, 1.0, 2.0, 2, true).is_ok());
        assert!(MarketStructure::new(MarketKind::BertrandDiff, 1.0, 2.0, 2, true).is_err());
        assert!(MarketStructure::new(MarketKind::BertrandDiff, 1.0, -1.0, 2, true).is_err());
        assert!(MarketStructure::new(MarketKind::SingleRetailer, 0.0, 0.0, 1, false).is_err());
        assert!(MarketStructure::cournot_n(0).is_err());
    }

    #[test]
    fn retail_prices_reproduce_first_order_conditions() {
        // Best responses in the quantity game: q = (p - r) / beta for Cournot,
        // so the margin must equal beta * q in every Cournot-type row.
        let (alpha, r) = (5.0, 1.5);
        for kind in [MarketKind::CournotDiff, MarketKind::SingleRetailer, MarketKind::CournotN] {
            let s = MarketStructure::new(kind, 1.3, 0.4, 3, false).unwrap();
            let q = s.order_quantity(alpha, r);
            assert!((s.retail_price(alpha, q) - r - s.beta * q).abs() < 1e-12, "{kind:?}");
        }
    }

    #[test]
    fn table_three_example() {
        let o = realized_profits(4.0, 1.0, 2);
        assert!((o.pi_s_u - 2.0).abs() < 1e-15);
        assert!((o.pi_s_d - 8.0 / 3.0).abs() < 1e-15);
        assert!((o.pi_i_u - 1.0).abs() < 1e-15);
        assert!((o.pi_i_d - 4.0 / 9.0).abs() < 1e-15);
        assert!((o.ratio - 1.125).abs() < 1e-15);
        let o = realized_profits(0.5, 1.0, 3);
        assert_eq!((o.pi_s_u, o.pi_i_u, o.pi_a_u, o.ratio), (0.0, 0.0, 0.0, 0.0));
        assert!(o.share_u.is_none());
    }

    #[test]
    fn shares() {
        let s = supplier_shares(2.0, 1.0, 3).unwrap();
        assert!((s.share_u - 0.8).abs() < 1e-15 && (s.share_d - 0.8).abs() < 1e-15);
        let s = supplier_shares(3.0, 1.0, 1).unwrap();
        assert!((s.share_u - 0.5).abs() < 1e-15 && (s.share_d - 2.0 / 3.0).abs() < 1e-15);
        assert!(matches!(supplier_shares(1.0, 1.0, 2), Err(MarketError::UndefinedShare { .. })));
    }

    #[test]
    fn ratio_analytics_values() {
        let a = ratio_analytics(1.0, 2);
        assert_eq!(a.argmax, Some(4.0));
        assert_eq!(a.gt1_interval, (2.0, f64::INFINITY));
        assert!((aggregate_ratio(2.0, 1.0, 2) - 1.0).abs() < 1e-15);
        assert!((aggregate_ratio(1e6, 1.0, 8) - 0.4).abs() < 1e-5);
        let a = ratio_analytics(1.0, 1);
        assert_eq!(a.argmax, None);
        assert!(aggregate_ratio(1.5, 1.0, 1) < 1.0);
        assert!(aggregate_ratio(2.5, 1.0, 1) > 1.0);
        let a = ratio_analytics(1.0, 4);
        assert_eq!(a.gt1_interval, (2.0, 4.0));
        assert!((aggregate_ratio(4.0, 1.0, 4) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn no_trade_examples() {
        let d = DemandDistribution::exponential(5.0).unwrap();
        let rep = no_trade_probability(&d).unwrap();
        assert!((rep.probability - NO_TRADE_BOUND).abs() < 1e-9);
        assert!(rep.representation_agrees, "{}", rep.representation_gap);
        assert_eq!(rep.bound_check.satisfied, Some(true));

        let d = DemandDistribution::kumaraswamy(4.0).unwrap();
        let rep = no_trade_probability(&d).unwrap();
        assert!((rep.probability - (1.0 - (5.0f64 / 6.0).powi(4))).abs() < 1e-7);
        assert!(rep.representation_agrees, "{}", rep.representation_gap);

        let d = DemandDistribution::generalized_pareto_eps(0.02, 0.1).unwrap();
        let rep = no_trade_probability(&d).unwrap();
        assert!(rep.probability > NO_TRADE_BOUND);
        assert!(!rep.bound_check.is_dmrd);
        assert_eq!(rep.bound_check.satisfied, None);
    }

    #[test]
    fn representation_on_pareto() {
        let d = DemandDistribution::pareto(1.0, 3.0).unwrap();
        for r in [0.5, 1.0, 1.5, 4.0] {
            let f = mrd_representation_cdf(&d, r).unwrap();
            assert!((f - d.cdf(r)).abs() < 1e-8, "r = {r}: {f} vs {}", d.cdf(r));
        }
    }
}
