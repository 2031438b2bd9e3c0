//! Monte Carlo oracle for the pricing game.
//!
//! Draws come from ChaCha8 substreams, one per chunk of [`CHUNK_SIZE`]
//! realizations, so results do not depend on the number of worker threads.
//! Every price on a grid sees the same draws (common random numbers).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::DemandDistribution;
use crate::equilibrium::{expected_profit, optimal_price, EquilibriumError};
use crate::market::{realized_profits, MarketKind, MarketStructure};

/// Draws per substream.
pub const CHUNK_SIZE: usize = 1 << 14;
pub const MIN_DRAWS: usize = 10_000;
pub const DEFAULT_DRAWS: usize = 1_000_000;
/// Playout records kept in a report.
pub const PLAYOUT_RECORDS: usize = 1000;
/// Per-draw tolerance of the playout against the closed-form profits.
pub const IDENTITY_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("n_draws = {0} is below the minimum of {MIN_DRAWS}")]
    TooFewDraws(usize),
    #[error("price grid is empty")]
    EmptyGrid,
    #[error("prices must be finite and nonnegative, got {0}")]
    BadPrice(f64),
    #[error("the stochastic policy needs a unique optimal price; found {0:?}")]
    NonUniquePrice(Vec<f64>),
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
}

/// Generator of substream `stream` under `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `n` reproducible draws from `d`.
pub fn sample(d: &DemandDistribution, n: usize, seed: u64) -> Vec<f64> {
    let mut out = vec![0.0; n];
    out.par_chunks_mut(CHUNK_SIZE).enumerate().for_each(|(i, chunk)| {
        let mut rng = substream(seed, i as u64);
        for v in chunk.iter_mut() {
            *v = d.sample(&mut rng);
        }
    });
    out
}

/// `n` independent draws of `X + Z`.
pub fn sample_sum(x: &DemandDistribution, z: &DemandDistribution, n: usize, seed: u64) -> Vec<f64> {
    let mut out = vec![0.0; n];
    out.par_chunks_mut(CHUNK_SIZE).enumerate().for_each(|(i, chunk)| {
        let mut rng = substream(seed, i as u64);
        for v in chunk.iter_mut() {
            *v = x.sample(&mut rng) + z.sample(&mut rng);
        }
    });
    out
}

/// Running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, o: Moments) -> Moments {
        if o.n == 0.0 {
            return self;
        }
        if self.n == 0.0 {
            return o;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Moments { n, mean: self.mean + d * o.n / n, m2: self.m2 + o.m2 + d * d * self.n * o.n / n }
    }

    fn estimate(self) -> Estimate {
        let var = if self.n > 1.0 { self.m2 / (self.n - 1.0) } else { 0.0 };
        Estimate { mean: self.mean, stderr: (var / self.n).sqrt() }
    }
}

/// Merges per-chunk moments in chunk order, so the result is independent of
/// scheduling.
fn reduce<const K: usize>(parts: Vec<[Moments; K]>) -> [Moments; K] {
    parts.into_iter().fold([Moments::default(); K], |mut acc, p| {
        for (a, b) in acc.iter_mut().zip(p) {
            *a = a.merge(b);
        }
        acc
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    /// Distance to `target` in standard errors.
    pub fn z_score(&self, target: f64) -> f64 {
        if self.stderr == 0.0 {
            if self.mean == target { 0.0 } else { f64::INFINITY }
        } else {
            (self.mean - target).abs() / self.stderr
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub n_draws: usize,
    pub structure: MarketStructure,
    pub price_grid: Vec<f64>,
}

impl SimConfig {
    pub fn new(seed: u64, n_draws: usize, structure: MarketStructure, price_grid: Vec<f64>) -> Result<Self, SimError> {
        let c = Self { seed, n_draws, structure, price_grid };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_draws < MIN_DRAWS {
            return Err(SimError::TooFewDraws(self.n_draws));
        }
        if self.price_grid.is_empty() {
            return Err(SimError::EmptyGrid);
        }
        if let Some(&r) = self.price_grid.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(SimError::BadPrice(r));
        }
        Ok(())
    }
}

/// `lambda_M r E(alpha - r)_+` estimated from `config.n_draws` draws.
pub fn mc_expected_profit(d: &DemandDistribution, r: f64, lambda_m: f64, config: &SimConfig) -> Result<Estimate, SimError> {
    Ok(mc_profit_curve(d, &[r], lambda_m, config)?[0])
}

/// Profit estimates at every price of `prices`, all from the same draws.
pub fn mc_profit_curve(d: &DemandDistribution, prices: &[f64], lambda_m: f64, config: &SimConfig) -> Result<Vec<Estimate>, SimError> {
    config.validate()?;
    if let Some(&r) = prices.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
        return Err(SimError::BadPrice(r));
    }
    let chunks = config.n_draws.div_ceil(CHUNK_SIZE);
    let parts: Vec<Vec<Moments>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK_SIZE.min(config.n_draws - c * CHUNK_SIZE);
            let mut rng = substream(config.seed, c as u64);
            let draws: Vec<f64> = (0..len).map(|_| d.sample(&mut rng)).collect();
            prices
                .iter()
                .map(|&r| {
                    let mut m = Moments::default();
                    for &a in &draws {
                        m.push(lambda_m * r * (a - r).max(0.0));
                    }
                    m
                })
                .collect()
        })
        .collect();
    let mut acc = vec![Moments::default(); prices.len()];
    for p in parts {
        for (a, b) in acc.iter_mut().zip(p) {
            *a = a.merge(b);
        }
    }
    Ok(acc.into_iter().map(Moments::estimate).collect())
}

/// Delta-method standard error of the fixed point `r = m(r)` estimated from
/// `samples`.
///
/// The fixed point solves `g(r) = E[(alpha - 2r) 1{alpha > r}] = 0`, so
/// `sd(r) ~ sd(g_hat) / |g'(r)|` with `g'` from a central difference.
pub fn fixed_point_stderr(samples: &[f64], r: f64) -> f64 {
    let n = samples.len() as f64;
    if n < 2.0 {
        return f64::INFINITY;
    }
    let g = |r: f64| samples.iter().map(|&a| if a > r { a - 2.0 * r } else { 0.0 }).sum::<f64>() / n;
    let mut h = Moments::default();
    let mut x = Moments::default();
    for &a in samples {
        h.push(if a > r { a - 2.0 * r } else { 0.0 });
        x.push(a);
    }
    let sd_g = (h.m2 / (n - 1.0) / n).sqrt();
    let step = 0.01 * (x.m2 / (n - 1.0)).sqrt().max(1e-12);
    let slope = (g(r + step) - g((r - step).max(0.0))) / (r + step - (r - step).max(0.0));
    sd_g / slope.abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PricePolicy {
    /// The supplier posts `r*` before demand is realized.
    OptimalStochastic,
    /// The supplier observes `alpha` and posts `alpha / 2`.
    OracleDeterministic,
}

/// One simulated round of the game.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Playout {
    pub alpha: f64,
    pub r: f64,
    /// Per-retailer order.
    pub q: f64,
    pub retail_price: f64,
    pub supplier_profit: f64,
    pub retailer_profit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PriceEstimate {
    pub r: f64,
    pub profit: Estimate,
    pub analytic: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimReport {
    pub seed: u64,
    pub n_draws: usize,
    pub structure: MarketStructure,
    pub policy: PricePolicy,
    /// Optimal stochastic price, when unique.
    pub r_star: Option<f64>,
    pub curve: Vec<PriceEstimate>,
    pub empirical_argmax: f64,
    /// Frequency of `alpha <= r`.
    pub no_trade: Estimate,
    pub supplier_profit: Estimate,
    pub retailer_profit: Estimate,
    pub aggregate_profit: Estimate,
    /// Largest relative gap between played-out and closed-form per-draw
    /// profits; only for `cournot_n` with unit slope.
    pub identity_max_deviation: Option<f64>,
    pub playout: Vec<Playout>,
}

impl SimReport {
    pub const CURVE_HEADER: &'static str = "r,profit_mc,stderr,profit_quadrature";
    pub const PLAYOUT_HEADER: &'static str = "alpha,r,q,retail_price,supplier_profit,retailer_profit";

    pub fn curve_csv(&self) -> String {
        let mut s = String::from(Self::CURVE_HEADER);
        s.push('\n');
        for p in &self.curve {
            s.push_str(&format!("{:.12e},{:.12e},{:.12e},{:.12e}\n", p.r, p.profit.mean, p.profit.stderr, p.analytic));
        }
        s
    }

    pub fn playout_csv(&self) -> String {
        let mut s = String::from(Self::PLAYOUT_HEADER);
        s.push('\n');
        for p in &self.playout {
            s.push_str(&format!(
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                p.alpha, p.r, p.q, p.retail_price, p.supplier_profit, p.retailer_profit
            ));
        }
        s
    }
}

/// Plays the two-stage game forward: the supplier prices, demand is
/// realized, retailers order their equilibrium quantities and profits are
/// computed from the inverse demand.
pub fn play(structure: &MarketStructure, alpha: f64, r: f64) -> Playout {
    let q = structure.order_quantity(alpha, r);
    let p = structure.retail_price(alpha, q);
    Playout {
        alpha,
        r,
        q,
        retail_price: p,
        supplier_profit: r * q * structure.retailers() as f64,
        retailer_profit: q * (p - r),
    }
}

pub fn mc_two_stage(d: &DemandDistribution, policy: PricePolicy, config: &SimConfig) -> Result<SimReport, SimError> {
    config.validate()?;
    let s = config.structure;
    let eq = optimal_price(d);
    let r_star = eq.as_ref().ok().and_then(|e| e.price());
    let posted = match policy {
        PricePolicy::OptimalStochastic => match (&eq, r_star) {
            (_, Some(r)) => Some(r),
            (Ok(e), None) => return Err(SimError::NonUniquePrice(e.prices.clone())),
            (Err(e), None) => return Err(e.clone().into()),
        },
        PricePolicy::OracleDeterministic => None,
    };
    let table3 = s.kind == MarketKind::CournotN && s.beta == 1.0;
    let chunks = config.n_draws.div_ceil(CHUNK_SIZE);
    let parts: Vec<([Moments; 4], f64, Vec<Playout>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK_SIZE.min(config.n_draws - c * CHUNK_SIZE);
            let mut rng = substream(config.seed, c as u64);
            let mut m = [Moments::default(); 4];
            let mut dev: f64 = 0.0;
            let keep = PLAYOUT_RECORDS.saturating_sub(c * CHUNK_SIZE).min(len);
            let mut records = Vec::with_capacity(keep);
            for i in 0..len {
                let alpha = d.sample(&mut rng);
                let r = posted.unwrap_or(0.5 * alpha);
                let o = play(&s, alpha, r);
                let n = s.retailers() as f64;
                m[0].push(if alpha <= r { 1.0 } else { 0.0 });
                m[1].push(o.supplier_profit);
                m[2].push(o.retailer_profit);
                m[3].push(o.supplier_profit + n * o.retailer_profit);
                if table3 {
                    let t = realized_profits(alpha, posted.unwrap_or(0.0), s.n);
                    let (ps, pi) = match policy {
                        PricePolicy::OptimalStochastic => (t.pi_s_u, t.pi_i_u),
                        PricePolicy::OracleDeterministic => (t.pi_s_d, t.pi_i_d),
                    };
                    dev = dev
                        .max((ps - o.supplier_profit).abs() / ps.abs().max(1.0))
                        .max((pi - o.retailer_profit).abs() / pi.abs().max(1.0));
                }
                if i < keep {
                    records.push(o);
                }
            }
            (m, dev, records)
        })
        .collect();
    let mut dev: f64 = 0.0;
    let mut playout = Vec::new();
    let mut moments = Vec::with_capacity(parts.len());
    for (m, d, rec) in parts {
        dev = dev.max(d);
        playout.extend(rec);
        moments.push(m);
    }
    let [no_trade, sup, ret, agg] = reduce(moments);

    let lambda = s.lambda_total();
    let estimates = mc_profit_curve(d, &config.price_grid, lambda, config)?;
    let curve: Vec<PriceEstimate> = config
        .price_grid
        .iter()
        .zip(estimates)
        .map(|(&r, profit)| PriceEstimate { r, profit, analytic: expected_profit(d, r, lambda) })
        .collect();
    let empirical_argmax = curve
        .iter()
        .fold((f64::NAN, f64::NEG_INFINITY), |best, p| if p.profit.mean > best.1 { (p.r, p.profit.mean) } else { best })
        .0;
    Ok(SimReport {
        seed: config.seed,
        n_draws: config.n_draws,
        structure: s,
        policy,
        r_star,
        curve,
        empirical_argmax,
        no_trade: no_trade.estimate(),
        supplier_profit: sup.estimate(),
        retailer_profit: ret.estimate(),
        aggregate_profit: agg.estimate(),
        identity_max_deviation: table3.then_some(dev),
        playout,
    })
}
