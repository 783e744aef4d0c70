//! Beurling–Landau counting, concentration operators and interpolation
//! diagnostics.
//!
//! Counts are taken in the disks `A_n(p,Λ) = D(p, Λ/√(nΔQ(p)))`, which hold
//! about `Λ²` points of a configuration distributed like `nσ` in the bulk.

mod concentration;
mod lagrange;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::equilibrium::Droplet;
use crate::error::{invalid, Error, Result};
use crate::fekete::Configuration;
use crate::potential::Potential;
use crate::Complex64;

pub use concentration::{
    concentration_spectrum, concentration_spectrum_on, counting_inequalities, disk_grid, trace_defect,
    ConcentrationSpectrum, CountingCheck,
};
pub use lagrange::{
    bernstein_check, bernstein_ratio, interpolation_certificate, m_family_certificate, max_principle_check,
    BernsteinReport, InterpolationCertificate, LagrangeBasis, LagrangeSup, MFamilyCertificate, MaxPrinciple,
};

/// Rescaled distance `√(nΔQ)·δ` separating the bulk from the boundary regime.
pub const BULK_THRESHOLD: f64 = 5.0;

/// How the point `p = p_n` moves with `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum PlanRule {
    Fixed {
        point: Complex64,
    },
    /// `p_n` lies on the inward normal through the boundary point with
    /// parameter `param`, at distance `τ/√(nΔQ)` from `∂S`.
    BoundaryAnchored {
        param: f64,
        tau: f64,
    },
}

/// A moving point together with the `n` values at which it is realized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovingPointPlan {
    pub rule: PlanRule,
    pub ns: Vec<usize>,
}

impl MovingPointPlan {
    pub fn fixed(point: Complex64, ns: Vec<usize>) -> Self {
        MovingPointPlan { rule: PlanRule::Fixed { point }, ns }
    }

    pub fn boundary_anchored(param: f64, tau: f64, ns: Vec<usize>) -> Self {
        MovingPointPlan { rule: PlanRule::BoundaryAnchored { param, tau }, ns }
    }

    /// `p_n`, which must lie in `S`.
    pub fn point(&self, n: usize, droplet: &Droplet, pot: &Potential) -> Result<Complex64> {
        if n == 0 {
            return invalid("n must be positive");
        }
        let p = match self.rule {
            PlanRule::Fixed { point } => point,
            PlanRule::BoundaryAnchored { param, tau } => {
                if !(tau >= 0.0) {
                    return invalid(format!("boundary offset must be non-negative, got {tau}"));
                }
                let b = droplet.boundary_point(param);
                let lap = pot.laplacian(b.point)?;
                b.point - b.normal * tau / (n as f64 * lap).sqrt()
            }
        };
        if !(droplet.contains(p) || droplet.distance_to_boundary(p) < 1e-12) {
            return Err(Error::Configuration(format!("plan point {p} lies outside the droplet for n={n}")));
        }
        Ok(p)
    }

    /// `a_n(p) = √(nΔQ(p_n))·δ(p_n)`.
    pub fn rescaled_distance(&self, n: usize, droplet: &Droplet, pot: &Potential) -> Result<f64> {
        let p = self.point(n, droplet, pot)?;
        Ok((n as f64 * pot.laplacian(p)?).sqrt() * droplet.distance_to_boundary(p))
    }
}

/// Regime of a moving point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Bulk,
    RegularBoundary,
    Unclassified,
}

/// Classifies a plan by its rescaled distances to the boundary over the
/// plan's `n` values. Built-in droplets have everywhere regular boundary.
pub fn classify_regime(plan: &MovingPointPlan, droplet: &Droplet, pot: &Potential, threshold: f64) -> Result<Regime> {
    if plan.ns.is_empty() {
        return invalid("plan has no n values");
    }
    let a = plan.ns.iter().map(|&n| plan.rescaled_distance(n, droplet, pot)).collect::<Result<Vec<f64>>>()?;
    let lo = a.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = a.iter().copied().fold(0.0, f64::max);
    Ok(if lo >= threshold {
        Regime::Bulk
    } else if hi <= threshold {
        Regime::RegularBoundary
    } else {
        Regime::Unclassified
    })
}

/// Radius `Λ/√(nΔQ(p))` of `A_n(p,Λ)`.
pub fn counting_radius(pot: &Potential, p: Complex64, n: usize, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return invalid(format!("Λ must be positive, got {lambda}"));
    }
    if n == 0 {
        return invalid("n must be positive");
    }
    let lap = pot.laplacian(p)?;
    if !(lap > 0.0) {
        return invalid(format!("Laplacian of Q must be positive at {p}"));
    }
    Ok(lambda / (n as f64 * lap).sqrt())
}

/// `N_n(p,Λ)`: number of points of `cfg` in the open disk `A_n(p,Λ)`.
pub fn count_in_disk(cfg: &Configuration, pot: &Potential, p: Complex64, n: usize, lambda: f64) -> Result<usize> {
    let r = counting_radius(pot, p, n, lambda)?;
    Ok(cfg.points.iter().filter(|z| (*z - p).norm() < r).count())
}

/// One entry of a [`DensityEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityCell {
    pub n: usize,
    pub lambda: f64,
    pub count: usize,
    /// `N_n(p,Λ)/Λ²`.
    pub ratio: f64,
}

/// Table of normalized counts and the `D^±` summaries over the window of
/// the two largest `n` and three largest `Λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub plan: MovingPointPlan,
    pub table: Vec<DensityCell>,
    pub d_plus: f64,
    pub d_minus: f64,
}

impl DensityEstimate {
    pub fn cell(&self, n: usize, lambda: f64) -> Option<&DensityCell> {
        self.table.iter().find(|c| c.n == n && c.lambda == lambda)
    }
}

/// Fills the `(n, Λ)` table from one configuration per `n` of the plan.
pub fn bl_density(
    pot: &Potential,
    droplet: &Droplet,
    family: &[Configuration],
    plan: &MovingPointPlan,
    lambdas: &[f64],
) -> Result<DensityEstimate> {
    if family.is_empty() || lambdas.is_empty() || plan.ns.is_empty() {
        return invalid("density estimation needs configurations, Λ values and plan n values");
    }
    let by_n: BTreeMap<usize, &Configuration> = family.iter().map(|c| (c.n(), c)).collect();
    let mut ls = lambdas.to_vec();
    ls.sort_by(f64::total_cmp);
    let mut ns = plan.ns.clone();
    ns.sort_unstable();
    ns.dedup();
    let mut table = Vec::with_capacity(ns.len() * ls.len());
    for &n in &ns {
        let cfg =
            by_n.get(&n).ok_or_else(|| Error::InvalidArgument(format!("family has no configuration with n={n}")))?;
        let p = plan.point(n, droplet, pot)?;
        for &lambda in &ls {
            let count = count_in_disk(cfg, pot, p, n, lambda)?;
            table.push(DensityCell { n, lambda, count, ratio: count as f64 / (lambda * lambda) });
        }
    }
    let top_n = &ns[ns.len().saturating_sub(2)..];
    let top_l = &ls[ls.len().saturating_sub(3)..];
    let window: Vec<f64> =
        table.iter().filter(|c| top_n.contains(&c.n) && top_l.contains(&c.lambda)).map(|c| c.ratio).collect();
    let d_plus = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let d_minus = window.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(DensityEstimate { plan: plan.clone(), table, d_plus, d_minus })
}

/// The strip `{p + e^{iθ}(x + iy)/√(nΔQ(p)) : |y| ≤ T}` in rescaled units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Strip {
    pub center: Complex64,
    pub theta: f64,
    pub half_width: f64,
}

impl Strip {
    fn rescale(&self, pot: &Potential, n: usize) -> Result<f64> {
        let lap = pot.laplacian(self.center)?;
        if !(lap > 0.0) {
            return invalid("Laplacian of Q must be positive at the strip center");
        }
        Ok((n as f64 * lap).sqrt())
    }
}

/// Count in a strip-confined disk and the constant `C = N/(TΛ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripCount {
    pub lambda: f64,
    pub count: usize,
    /// `N/Λ²`, which tends to zero like `C·T/Λ`.
    pub ratio: f64,
    pub constant: f64,
}

/// Counts the points of a strip-confined configuration in `A_n(p,Λ)`.
///
/// Fails if a point of the disk lies outside the strip.
pub fn strip_count_bound(
    cfg: &Configuration,
    pot: &Potential,
    strip: &Strip,
    n: usize,
    lambda: f64,
) -> Result<StripCount> {
    if !(strip.half_width > 0.0) {
        return invalid("strip half-width must be positive");
    }
    let s = strip.rescale(pot, n)?;
    let r = counting_radius(pot, strip.center, n, lambda)?;
    let rot = Complex64::from_polar(1.0, -strip.theta);
    let mut count = 0;
    for &z in &cfg.points {
        if (z - strip.center).norm() < r {
            let w = rot * (z - strip.center) * s;
            if w.im.abs() > strip.half_width * (1.0 + 1e-12) {
                return invalid(format!("point {z} of the counting disk lies outside the strip"));
            }
            count += 1;
        }
    }
    Ok(StripCount {
        lambda,
        count,
        ratio: count as f64 / (lambda * lambda),
        constant: count as f64 / (strip.half_width * lambda),
    })
}

/// A triangular lattice with the given rescaled `spacing`, clipped to the
/// strip and to rescaled length `|x| ≤ reach`. Rows are shifted by
/// `row_shift` across the strip.
pub fn strip_lattice(
    pot: &Potential,
    strip: &Strip,
    n: usize,
    spacing: f64,
    reach: f64,
    row_shift: f64,
) -> Result<Configuration> {
    if !(spacing > 0.0 && reach > 0.0) {
        return invalid("lattice spacing and reach must be positive");
    }
    let s = strip.rescale(pot, n)?;
    let rot = Complex64::from_polar(1.0, strip.theta);
    let dy = spacing * 3f64.sqrt() / 2.0;
    let mut points = Vec::new();
    let rows = ((strip.half_width + row_shift.abs()) / dy).ceil() as i64 + 1;
    let cols = (reach / spacing).ceil() as i64 + 1;
    for i in -rows..=rows {
        let y = i as f64 * dy + row_shift;
        if y.abs() > strip.half_width {
            continue;
        }
        let x0 = if i.rem_euclid(2) == 1 { spacing / 2.0 } else { 0.0 };
        for k in -cols..=cols {
            let x = x0 + k as f64 * spacing;
            if x.abs() <= reach {
                points.push(strip.center + rot * Complex64::new(x, y) / s);
            }
        }
    }
    Ok(Configuration::for_potential(points, pot))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::solve_droplet_radial;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ginibre() -> (Potential, Droplet) {
        let pot = Potential::ginibre();
        let d = solve_droplet_radial(&pot).unwrap();
        (pot, d)
    }

    #[test]
    fn regimes() {
        let (pot, d) = ginibre();
        let bulk = MovingPointPlan::fixed(c(0.0, 0.0), vec![100, 400]);
        assert_eq!(classify_regime(&bulk, &d, &pot, BULK_THRESHOLD).unwrap(), Regime::Bulk);
        let edge = MovingPointPlan::boundary_anchored(0.0, 0.0, vec![100, 400]);
        assert_eq!(classify_regime(&edge, &d, &pot, BULK_THRESHOLD).unwrap(), Regime::RegularBoundary);
        let near = MovingPointPlan::boundary_anchored(0.0, 2.0, vec![100, 400]);
        let p = near.point(100, &d, &pot).unwrap();
        assert!((p - c(0.8, 0.0)).norm() < 1e-12, "{p}");
        assert!((near.rescaled_distance(400, &d, &pot).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(classify_regime(&near, &d, &pot, BULK_THRESHOLD).unwrap(), Regime::RegularBoundary);
        let mixed = MovingPointPlan::fixed(c(0.7, 0.0), vec![100, 1000]);
        assert_eq!(classify_regime(&mixed, &d, &pot, BULK_THRESHOLD).unwrap(), Regime::Unclassified);
    }

    #[test]
    fn counting_limits() {
        let (pot, _) = ginibre();
        let cfg = Configuration::new(vec![c(0.1, 0.0), c(-0.3, 0.2), c(0.5, 0.5)]);
        assert_eq!(count_in_disk(&cfg, &pot, c(0.0, 0.0), 3, 1e-6).unwrap(), 0);
        assert_eq!(count_in_disk(&cfg, &pot, c(0.0, 0.0), 3, 1e6).unwrap(), 3);
        assert!(count_in_disk(&cfg, &pot, c(0.0, 0.0), 3, 0.0).is_err());
    }

    #[test]
    fn lattice_counts_grow_like_area() {
        // unit density in dA: a hexagonal cell has dA-area 1
        let (pot, _) = ginibre();
        let n = 10_000;
        let spacing = (2.0 * std::f64::consts::PI / 3f64.sqrt()).sqrt();
        let strip = Strip { center: c(0.0, 0.0), theta: 0.0, half_width: 40.0 };
        let cfg = strip_lattice(&pot, &strip, n, spacing, 40.0, 0.3).unwrap();
        for lambda in [10.0, 20.0, 30.0] {
            let count = count_in_disk(&cfg, &pot, c(0.0, 0.0), n, lambda).unwrap() as f64;
            assert!((count - lambda * lambda).abs() <= 4.0 * lambda, "{count} vs {}", lambda * lambda);
        }
    }

    #[test]
    fn strip_line_oracle() {
        let (pot, _) = ginibre();
        let n = 10_000;
        let strip = Strip { center: c(0.0, 0.0), theta: 0.7, half_width: 1.0 };
        // a single row with unit spacing, offset by half a step
        let row: Vec<Complex64> = (-150..150)
            .map(|k| strip.center + Complex64::from_polar(1.0, 0.7) * (k as f64 + 0.5) / (n as f64).sqrt())
            .collect();
        let cfg = Configuration::new(row);
        for lambda in [5.0, 20.0, 100.0] {
            let s = strip_count_bound(&cfg, &pot, &strip, n, lambda).unwrap();
            assert!(s.ratio <= 2.0 / lambda + 1e-12);
        }
        assert!(strip_count_bound(&cfg, &pot, &strip, n, 100.0).unwrap().ratio <= 0.03);
        let empty = Configuration::new(vec![]);
        assert_eq!(strip_count_bound(&empty, &pot, &strip, n, 10.0).unwrap().count, 0);
        let outside = Configuration::new(vec![c(0.0, 0.05)]);
        assert!(strip_count_bound(&outside, &pot, &Strip { theta: 0.0, ..strip }, n, 10.0).is_err());
    }

    #[test]
    fn density_table_shape() {
        let (pot, d) = ginibre();
        let plan = MovingPointPlan::fixed(c(0.0, 0.0), vec![4, 8]);
        let fam = vec![
            Configuration::new((0..4).map(|k| Complex64::from_polar(0.5, k as f64)).collect()),
            Configuration::new((0..8).map(|k| Complex64::from_polar(0.6, k as f64)).collect()),
        ];
        let est = bl_density(&pot, &d, &fam, &plan, &[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(est.table.len(), 6);
        assert_eq!(est.cell(8, 1.0).unwrap().count, 0);
        assert_eq!(est.cell(8, 2.0).unwrap().count, 8);
        for n in [4, 8] {
            let counts: Vec<usize> = est.table.iter().filter(|c| c.n == n).map(|c| c.count).collect();
            assert!(counts.windows(2).all(|w| w[0] <= w[1]));
        }
        assert!(bl_density(&pot, &d, &[], &plan, &[1.0]).is_err());
    }
}
