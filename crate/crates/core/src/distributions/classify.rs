//! Grid-based shape classification (IFR, DMRD, DGMRD, IGFR).

use serde::Serialize;

use super::{DemandDistribution, DistributionError};
use crate::numerics::{monotone_from_samples, validate_grid, GridSpec, MonotoneReport, DEFAULT_GRID_POINTS};

/// Finite-difference tolerance of the shape verdicts.
pub const CLASSIFY_TOL: f64 = 1e-9;

/// `m`, `l`, hazard and generalized failure rate sampled on a fixed grid.
///
/// All values are computed at construction, so a profile can be shared across
/// threads without synchronization.
#[derive(Debug, Clone)]
pub struct MrdProfile {
    source: DemandDistribution,
    grid: Vec<f64>,
    mrd: Vec<f64>,
    gmrd: Vec<f64>,
    hazard: Option<Vec<f64>>,
    underflow: bool,
}

impl MrdProfile {
    /// Evaluates the profile on `grid`, which must be strictly increasing and
    /// lie inside `(0, H)`.
    pub fn new(d: &DemandDistribution, grid: &[f64]) -> Result<Self, DistributionError> {
        validate_grid(grid)?;
        let upper = d.support().upper;
        if let Some(&r) = grid.iter().find(|&&r| !(r > 0.0 && r < upper)) {
            return Err(DistributionError::OutOfDomain { op: "classify", r, reason: "grid must lie inside (0, H)" });
        }
        let mut underflow = false;
        let mrd: Vec<f64> = grid
            .iter()
            .map(|&r| {
                let v = d.mrd_eval(r);
                underflow |= v.underflow;
                v.value
            })
            .collect();
        let gmrd = grid.iter().zip(&mrd).map(|(r, m)| m / r).collect();
        let hazard = if d.has_gapless_density() {
            grid.iter().map(|&r| d.hazard(r).map(|h| h.value)).collect::<Result<Vec<_>, _>>().ok()
        } else {
            None
        };
        Ok(Self { source: d.clone(), grid: grid.to_vec(), mrd, gmrd, hazard, underflow })
    }

    pub fn source(&self) -> &DemandDistribution {
        &self.source
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn mrd(&self) -> &[f64] {
        &self.mrd
    }

    pub fn gmrd(&self) -> &[f64] {
        &self.gmrd
    }

    /// Hazard values, `None` when the law has no gapless density.
    pub fn hazard(&self) -> Option<&[f64]> {
        self.hazard.as_deref()
    }

    pub fn gfr(&self) -> Option<Vec<f64>> {
        self.hazard.as_ref().map(|h| h.iter().zip(&self.grid).map(|(h, r)| h * r).collect())
    }

    /// Whether any `m(r)` was replaced by zero because `F_bar(r)` underflowed.
    pub fn underflow(&self) -> bool {
        self.underflow
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassificationReport {
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_points: usize,
    /// `None` when the hazard is undefined (no density or a zero-density gap).
    pub ifr: Option<bool>,
    pub dmrd: bool,
    pub dgmrd: bool,
    /// Every step of `l` on the grid falls by more than the tolerance.
    pub dgmrd_strict: bool,
    pub igfr: Option<bool>,
    /// Whether the raw verdicts respected IFR => DMRD => DGMRD and IGFR => DGMRD.
    pub inclusion_consistent: bool,
    /// Verdicts overridden to restore the inclusions, one line each.
    pub grid_artifacts: Vec<String>,
    pub mrd_shape: MonotoneReport,
    pub gmrd_shape: MonotoneReport,
    pub hazard_shape: Option<MonotoneReport>,
    pub gfr_shape: Option<MonotoneReport>,
}

/// Geometric grid on `[quantile(1e-6), quantile(1 - 1e-6)]`, clipped into `(0, H)`.
pub fn default_grid(d: &DemandDistribution, points: usize) -> Result<Vec<f64>, DistributionError> {
    let s = d.support();
    let mut lo = d.quantile(1e-6).max(1e-12);
    let mut hi = d.quantile(1.0 - 1e-6);
    if hi >= s.upper {
        hi = s.upper * (1.0 - 1e-9);
    }
    if lo >= hi {
        // Point masses: everything below the atom.
        lo = hi * 1e-3;
    }
    Ok(GridSpec::geometric(lo, hi, points.max(2)).build()?)
}

/// Classifies `d` by finite differences on `grid`.
///
/// Pass `None` for the default 512-point grid. Verdicts that break the class
/// inclusions are corrected and listed in `grid_artifacts`.
pub fn classify(d: &DemandDistribution, grid: Option<&[f64]>) -> Result<ClassificationReport, DistributionError> {
    let owned;
    let grid = match grid {
        Some(g) => g,
        None => {
            owned = default_grid(d, DEFAULT_GRID_POINTS)?;
            &owned
        }
    };
    let profile = MrdProfile::new(d, grid)?;
    Ok(classify_profile(&profile))
}

pub(crate) fn classify_profile(p: &MrdProfile) -> ClassificationReport {
    let grid = p.grid();
    let mrd_shape = monotone_from_samples(grid, p.mrd(), CLASSIFY_TOL);
    let gmrd_shape = monotone_from_samples(grid, p.gmrd(), CLASSIFY_TOL);
    let hazard_shape = p.hazard().map(|h| monotone_from_samples(grid, h, CLASSIFY_TOL));
    let gfr_shape = p.gfr().map(|g| monotone_from_samples(grid, &g, CLASSIFY_TOL));

    let ifr = hazard_shape.as_ref().map(|s| s.is_nondecreasing());
    let igfr = gfr_shape.as_ref().map(|s| s.is_nondecreasing());
    let mut dmrd = mrd_shape.is_nonincreasing();
    let mut dgmrd = gmrd_shape.is_nonincreasing();
    let mut artifacts = Vec::new();
    if ifr == Some(true) && !dmrd {
        artifacts.push(format!(
            "IFR on the grid but m(r) rises by {:.3e} at r = {:.6e}; DMRD set to true",
            mrd_shape.max_rise.delta, mrd_shape.max_rise.r
        ));
        dmrd = true;
    }
    if (dmrd || igfr == Some(true)) && !dgmrd {
        artifacts.push(format!(
            "{} on the grid but l(r) rises by {:.3e} at r = {:.6e}; DGMRD set to true",
            if dmrd { "DMRD" } else { "IGFR" },
            gmrd_shape.max_rise.delta,
            gmrd_shape.max_rise.r
        ));
        dgmrd = true;
    }
    ClassificationReport {
        grid_lo: grid[0],
        grid_hi: grid[grid.len() - 1],
        grid_points: grid.len(),
        ifr,
        dmrd,
        dgmrd,
        dgmrd_strict: dgmrd && gmrd_shape.strictly_decreasing,
        igfr,
        inclusion_consistent: artifacts.is_empty(),
        grid_artifacts: artifacts,
        mrd_shape,
        gmrd_shape,
        hazard_shape,
        gfr_shape,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::MonotoneVerdict;

    #[test]
    fn exponential_is_flat_mrd_and_strictly_dgmrd() {
        let d = DemandDistribution::exponential(1.0).unwrap();
        let c = classify(&d, None).unwrap();
        assert!(c.dmrd);
        assert_eq!(c.mrd_shape.verdict, MonotoneVerdict::Constant);
        assert!(c.dgmrd && c.dgmrd_strict);
        assert_eq!(c.ifr, Some(true));
        assert_eq!(c.igfr, Some(true));
        assert!(c.inclusion_consistent);
    }

    #[test]
    fn pareto_is_dgmrd_but_not_dmrd() {
        let d = DemandDistribution::pareto(1.0, 3.0).unwrap();
        let c = classify(&d, None).unwrap();
        assert!(!c.dmrd);
        assert!(c.dgmrd);
        assert!(!c.dgmrd_strict);
        assert_eq!(c.ifr, Some(false));
        assert_eq!(c.igfr, Some(true));
    }

    #[test]
    fn pareto_mrd_falls_then_rises_across_the_scale() {
        let d = DemandDistribution::pareto(1.0, 3.0).unwrap();
        let grid = GridSpec::linear(0.1, 5.0, 128).build().unwrap();
        let profile = MrdProfile::new(&d, &grid).unwrap();
        let shape = monotone_from_samples(&grid, profile.mrd(), CLASSIFY_TOL);
        assert_eq!(shape.verdict, MonotoneVerdict::NonMonotone);
    }

    #[test]
    fn generalized_pareto_example() {
        let d = DemandDistribution::generalized_pareto_eps(0.02, 0.5).unwrap();
        let c = classify(&d, None).unwrap();
        assert!(c.dgmrd);
        assert!(!c.dmrd);
    }

    #[test]
    fn short_grids_are_rejected() {
        let d = DemandDistribution::uniform(0.0, 1.0).unwrap();
        let grid = GridSpec::linear(0.1, 0.9, 8).build().unwrap();
        assert!(classify(&d, Some(&grid)).is_err());
    }

    #[test]
    fn grid_outside_support_is_rejected() {
        let d = DemandDistribution::uniform(0.0, 1.0).unwrap();
        let grid = GridSpec::linear(0.1, 1.5, 32).build().unwrap();
        assert!(classify(&d, Some(&grid)).is_err());
    }

    #[test]
    fn default_grid_below_an_atom() {
        let d = DemandDistribution::deterministic(2.0).unwrap();
        let g = default_grid(&d, 64).unwrap();
        assert!(g[0] > 0.0 && g[63] < 2.0);
        assert!(classify(&d, None).is_ok());
    }

    #[test]
    fn deterministic_law_has_no_hazard_verdict() {
        let d = DemandDistribution::deterministic(2.0).unwrap();
        let grid = GridSpec::linear(0.1, 1.9, 32).build().unwrap();
        let c = classify(&d, Some(&grid)).unwrap();
        assert_eq!(c.ifr, None);
        assert!(c.dmrd && c.dgmrd_strict);
    }
}
