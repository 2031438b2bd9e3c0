//! Piecewise-linear cumulative distribution functions.
//!
//! Used both for hand-specified laws (knots given as `(x, F(x))` pairs) and
//! for empirical laws built from sorted samples, where the cdf is linearly
//! interpolated between consecutive order statistics. Tail integrals are exact:
//! the survival function is linear on every segment, so each segment
//! contributes a trapezoid, and suffix sums are built once at construction.

use super::DistributionError;

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearCdf {
    xs: Vec<f64>,
    fs: Vec<f64>,
    /// `suffix[i] = int_{xs[i]}^{xs[last]} F_bar(u) du`.
    suffix: Vec<f64>,
}

impl PiecewiseLinearCdf {
    /// Builds a cdf from `(x, F(x))` knots.
    ///
    /// Knots must have strictly increasing, nonnegative abscissae, a
    /// nondecreasing cdf, `F = 0` at the first knot and `F = 1` at the last.
    pub fn new(knots: &[(f64, f64)]) -> Result<Self, DistributionError> {
        let invalid = |reason: String| DistributionError::InvalidParameter { family: "piecewise", reason };
        if knots.len() < 2 {
            return Err(invalid("at least two knots are required".into()));
        }
        for (i, &(x, f)) in knots.iter().enumerate() {
            if !x.is_finite() || !f.is_finite() {
                return Err(invalid(format!("knot {i} is not finite")));
            }
            if !(0.0..=1.0).contains(&f) {
                return Err(invalid(format!("knot {i} has F = {f} outside [0, 1]")));
            }
        }
        if knots[0].0 < 0.0 {
            return Err(invalid("support must be nonnegative".into()));
        }
        if knots[0].1 != 0.0 {
            return Err(invalid("the first knot must have F = 0".into()));
        }
        if knots[knots.len() - 1].1 != 1.0 {
            return Err(invalid("the last knot must have F = 1".into()));
        }
        for (i, w) in knots.windows(2).enumerate() {
            if !(w[1].0 > w[0].0) {
                return Err(invalid(format!("abscissae must be strictly increasing (knot {})", i + 1)));
            }
            if w[1].1 < w[0].1 {
                return Err(invalid(format!("cdf must be nondecreasing (knot {})", i + 1)));
            }
        }
        let xs = knots.iter().map(|k| k.0).collect();
        let fs = knots.iter().map(|k| k.1).collect();
        Ok(Self::from_parts(xs, fs))
    }

    /// Empirical cdf of `samples`, interpolated linearly between order
    /// statistics: the i-th distinct value (0-based) of `n` gets `F = i / (n - 1)`.
    pub fn from_samples(mut samples: Vec<f64>) -> Result<Self, DistributionError> {
        let invalid = |reason: &str| DistributionError::InvalidParameter { family: "empirical", reason: reason.into() };
        if samples.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(invalid("samples must be finite and nonnegative"));
        }
        samples.sort_by(f64::total_cmp);
        samples.dedup();
        if samples.len() < 2 {
            return Err(invalid("at least two distinct samples are required"));
        }
        let last = (samples.len() - 1) as f64;
        let fs = (0..samples.len()).map(|i| i as f64 / last).collect();
        Ok(Self::from_parts(samples, fs))
    }

    fn from_parts(xs: Vec<f64>, fs: Vec<f64>) -> Self {
        let n = xs.len();
        let mut suffix = vec![0.0; n];
        for i in (0..n - 1).rev() {
            let s0 = 1.0 - fs[i];
            let s1 = 1.0 - fs[i + 1];
            suffix[i] = suffix[i + 1] + 0.5 * (xs[i + 1] - xs[i]) * (s0 + s1);
        }
        Self { xs, fs, suffix }
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.fs.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn abscissae(&self) -> &[f64] {
        &self.xs
    }

    pub fn first(&self) -> f64 {
        self.xs[0]
    }

    pub fn last(&self) -> f64 {
        self.xs[self.xs.len() - 1]
    }

    /// Index `i` of the segment `[xs[i], xs[i+1])` holding `r`; requires
    /// `first() <= r < last()`.
    fn segment(&self, r: f64) -> usize {
        self.xs.partition_point(|&x| x <= r) - 1
    }

    pub fn cdf(&self, r: f64) -> f64 {
        1.0 - self.survival(r)
    }

    pub fn survival(&self, r: f64) -> f64 {
        if r < self.first() {
            return 1.0;
        }
        if r >= self.last() {
            return 0.0;
        }
        let i = self.segment(r);
        let t = (r - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
        let s0 = 1.0 - self.fs[i];
        let s1 = 1.0 - self.fs[i + 1];
        s0 + (s1 - s0) * t
    }

    /// Right density at `r`, and whether `r` sits on an interior knot (where
    /// the density is only one-sided).
    pub fn density(&self, r: f64) -> (f64, bool) {
        if r < self.first() || r >= self.last() {
            return (0.0, false);
        }
        let i = self.segment(r);
        let slope = (self.fs[i + 1] - self.fs[i]) / (self.xs[i + 1] - self.xs[i]);
        (slope, r == self.xs[i] && i > 0)
    }

    /// Smallest `x` with `F(x) >= p`.
    pub fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return self.first();
        }
        if p >= 1.0 {
            return self.last();
        }
        let i = self.fs.partition_point(|&f| f < p);
        let (x0, x1) = (self.xs[i - 1], self.xs[i]);
        let (f0, f1) = (self.fs[i - 1], self.fs[i]);
        x0 + (p - f0) / (f1 - f0) * (x1 - x0)
    }

    pub fn tail_integral(&self, r: f64) -> f64 {
        if r >= self.last() {
            return 0.0;
        }
        if r < self.first() {
            return (self.first() - r) + self.suffix[0];
        }
        let i = self.segment(r);
        let s_r = self.survival(r);
        let s1 = 1.0 - self.fs[i + 1];
        0.5 * (self.xs[i + 1] - r) * (s_r + s1) + self.suffix[i + 1]
    }

    pub fn mean(&self) -> f64 {
        self.first() + self.suffix[0]
    }

    pub fn second_moment(&self) -> f64 {
        // E X^2 = 2 int_0^inf u F_bar(u) du; F_bar is linear on each segment.
        let x0 = self.first();
        let mut acc = x0 * x0;
        for i in 0..self.xs.len() - 1 {
            let (a, b) = (self.xs[i], self.xs[i + 1]);
            let (sa, sb) = (1.0 - self.fs[i], 1.0 - self.fs[i + 1]);
            acc += (b - a) / 3.0 * (sa * (2.0 * a + b) + sb * (a + 2.0 * b));
        }
        acc
    }

    /// Whether some segment carries no probability mass (flat cdf).
    pub fn has_gaps(&self) -> bool {
        self.fs.windows(2).any(|w| w[1] == w[0])
    }
}
