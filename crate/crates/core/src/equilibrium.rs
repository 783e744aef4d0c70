//! Droplets, equilibrium measures and their logarithmic potentials.
//!
//! Logarithmic potentials are computed by integrating along rays emanating
//! from the evaluation point, which removes the `log(1/|ζ−η|)` singularity:
//!
//! ```text
//! U(ζ) = ∫ dφ/2π ∫ 2ρ log(1/ρ) f(ζ + ρe^{iφ}) dρ
//! ```
//!
//! Ray/boundary intersections are found in closed form, and for constant
//! densities the radial integral is exact.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::potential::Potential;
use crate::quadrature::{annulus_grid, gauss_legendre, pairwise_sum, polar_grid_centered, Grid2D};
use crate::Complex64;

/// Geometry of a droplet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    Disk {
        center: Complex64,
        radius: f64,
    },
    /// Centered at the origin.
    Annulus {
        r0: f64,
        r1: f64,
    },
    /// Centered at the origin with semi-axes `a ≥ b` along the coordinate axes.
    Ellipse {
        a: f64,
        b: f64,
    },
}

/// A point of `∂S` with its outward unit normal `e^{iθ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub point: Complex64,
    pub normal: Complex64,
    /// Boundary parameter: polar angle for circles, eccentric anomaly for ellipses.
    pub param: f64,
    /// `0` for the outer boundary, `1` for the inner circle of an annulus.
    pub component: usize,
}

impl BoundaryPoint {
    /// The phase `θ` of the outward normal.
    pub fn theta(&self) -> f64 {
        self.normal.arg()
    }
}

/// The support `S` of an equilibrium measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Droplet {
    pub shape: Shape,
}

impl Droplet {
    pub fn disk(center: Complex64, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return invalid(format!("disk radius must be positive, got {radius}"));
        }
        Ok(Droplet { shape: Shape::Disk { center, radius } })
    }

    pub fn annulus(r0: f64, r1: f64) -> Result<Self> {
        if !(r0 > 0.0 && r1 > r0) {
            return invalid(format!("annulus radii must satisfy 0 < r0 < r1, got ({r0}, {r1})"));
        }
        Ok(Droplet { shape: Shape::Annulus { r0, r1 } })
    }

    pub fn ellipse(a: f64, b: f64) -> Result<Self> {
        if !(b > 0.0 && a >= b && a.is_finite()) {
            return invalid(format!("ellipse semi-axes must satisfy a >= b > 0, got ({a}, {b})"));
        }
        Ok(Droplet { shape: Shape::Ellipse { a, b } })
    }

    /// Membership in the closed droplet.
    pub fn contains(&self, z: Complex64) -> bool {
        match self.shape {
            Shape::Disk { center, radius } => (z - center).norm() <= radius,
            Shape::Annulus { r0, r1 } => {
                let r = z.norm();
                r >= r0 && r <= r1
            }
            Shape::Ellipse { a, b } => (z.re / a).powi(2) + (z.im / b).powi(2) <= 1.0,
        }
    }

    /// `δ(ζ)`: Euclidean distance from `ζ` to `∂S`.
    pub fn distance_to_boundary(&self, z: Complex64) -> f64 {
        (z - self.nearest_boundary_point(z).point).norm()
    }

    /// Nearest point of `∂S`; ties go to the smaller boundary parameter.
    pub fn nearest_boundary_point(&self, z: Complex64) -> BoundaryPoint {
        match self.shape {
            Shape::Disk { center, .. } => {
                let d = z - center;
                let phi = if d.norm() == 0.0 { 0.0 } else { d.arg().rem_euclid(TAU) };
                self.boundary_point(phi)
            }
            Shape::Annulus { r0, r1 } => {
                let r = z.norm();
                let phi = if r == 0.0 { 0.0 } else { z.arg().rem_euclid(TAU) };
                if r1 - r <= r - r0 {
                    self.boundary_point(phi)
                } else {
                    let u = Complex64::from_polar(1.0, phi);
                    BoundaryPoint { point: u * r0, normal: -u, param: phi, component: 1 }
                }
            }
            Shape::Ellipse { a, b } => {
                let s = nearest_ellipse_param(a, b, z);
                self.boundary_point(s)
            }
        }
    }

    /// Point of the outer boundary at parameter `s`.
    pub fn boundary_point(&self, s: f64) -> BoundaryPoint {
        let s = s.rem_euclid(TAU);
        match self.shape {
            Shape::Disk { center, radius } => {
                let u = Complex64::from_polar(1.0, s);
                BoundaryPoint { point: center + u * radius, normal: u, param: s, component: 0 }
            }
            Shape::Annulus { r1, .. } => {
                let u = Complex64::from_polar(1.0, s);
                BoundaryPoint { point: u * r1, normal: u, param: s, component: 0 }
            }
            Shape::Ellipse { a, b } => {
                let (sn, cs) = s.sin_cos();
                let n = Complex64::new(b * cs, a * sn);
                BoundaryPoint { point: Complex64::new(a * cs, b * sn), normal: n / n.norm(), param: s, component: 0 }
            }
        }
    }

    /// Area of `S` under `dA`.
    pub fn area(&self) -> f64 {
        match self.shape {
            Shape::Disk { radius, .. } => radius * radius,
            Shape::Annulus { r0, r1 } => r1 * r1 - r0 * r0,
            Shape::Ellipse { a, b } => a * b,
        }
    }

    /// Center of symmetry.
    pub fn center(&self) -> Complex64 {
        match self.shape {
            Shape::Disk { center, .. } => center,
            _ => Complex64::new(0.0, 0.0),
        }
    }

    /// Radius of the smallest disk about [`Droplet::center`] containing `S`.
    pub fn extent(&self) -> f64 {
        match self.shape {
            Shape::Disk { radius, .. } => radius,
            Shape::Annulus { r1, .. } => r1,
            Shape::Ellipse { a, .. } => a,
        }
    }

    /// `(xmin, xmax, ymin, ymax)`.
    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        match self.shape {
            Shape::Disk { center, radius } => {
                (center.re - radius, center.re + radius, center.im - radius, center.im + radius)
            }
            Shape::Annulus { r1, .. } => (-r1, r1, -r1, r1),
            Shape::Ellipse { a, b } => (-a, a, -b, b),
        }
    }

    /// A quadrature grid on `S` adapted to its shape.
    pub fn grid(&self, nr: usize, ntheta: usize) -> Result<Grid2D> {
        match self.shape {
            Shape::Disk { center, radius } => polar_grid_centered(center, radius, nr, ntheta),
            Shape::Annulus { r0, r1 } => annulus_grid(Complex64::new(0.0, 0.0), r0, r1, nr, ntheta),
            Shape::Ellipse { a, b } => Ok(polar_grid_centered(Complex64::new(0.0, 0.0), 1.0, nr, ntheta)?.stretched(
                Complex64::new(0.0, 0.0),
                a,
                b,
            )),
        }
    }

    /// A grid on the droplet dilated by `margin` in every direction
    /// (a disk or ellipse with semi-axes increased by `margin`).
    pub fn dilated_grid(&self, margin: f64, nr: usize, ntheta: usize) -> Result<Grid2D> {
        match self.shape {
            Shape::Disk { center, radius } => polar_grid_centered(center, radius + margin, nr, ntheta),
            Shape::Annulus { r1, .. } => polar_grid_centered(Complex64::new(0.0, 0.0), r1 + margin, nr, ntheta),
            Shape::Ellipse { a, b } => Ok(polar_grid_centered(Complex64::new(0.0, 0.0), 1.0, nr, ntheta)?.stretched(
                Complex64::new(0.0, 0.0),
                a + margin,
                b + margin,
            )),
        }
    }

    /// Level coordinate: `0` at the center (the inner circle for an
    /// annulus), `1` on the outer boundary, larger outside.
    pub fn gauge(&self, z: Complex64) -> f64 {
        match self.shape {
            Shape::Disk { center, radius } => (z - center).norm() / radius,
            Shape::Annulus { r0, r1 } => ((z.norm() - r0) / (r1 - r0)).max(0.0),
            Shape::Ellipse { a, b } => ((z.re / a).powi(2) + (z.im / b).powi(2)).sqrt(),
        }
    }

    /// A grid on the band `s0 < gauge < s1`.
    pub fn band_grid(&self, s0: f64, s1: f64, nr: usize, ntheta: usize) -> Result<Grid2D> {
        let o = Complex64::new(0.0, 0.0);
        match self.shape {
            Shape::Disk { center, radius } => annulus_grid(center, s0 * radius, s1 * radius, nr, ntheta),
            Shape::Annulus { r0, r1 } => annulus_grid(o, r0 + s0 * (r1 - r0), r0 + s1 * (r1 - r0), nr, ntheta),
            Shape::Ellipse { a, b } => Ok(annulus_grid(o, s0, s1, nr, ntheta)?.stretched(o, a, b)),
        }
    }

    /// Disks and ellipses whose signed sum is the indicator of `S`.
    fn pieces(&self) -> Vec<(Region, f64)> {
        let o = Complex64::new(0.0, 0.0);
        match self.shape {
            Shape::Disk { center, radius } => vec![(Region { c: center, a: radius, b: radius }, 1.0)],
            Shape::Annulus { r0, r1 } => {
                vec![(Region { c: o, a: r1, b: r1 }, 1.0), (Region { c: o, a: r0, b: r0 }, -1.0)]
            }
            Shape::Ellipse { a, b } => vec![(Region { c: o, a, b }, 1.0)],
        }
    }
}

fn nearest_ellipse_param(a: f64, b: f64, z: Complex64) -> f64 {
    let dist2 = |s: f64| {
        let (sn, cs) = s.sin_cos();
        (a * cs - z.re).powi(2) + (b * sn - z.im).powi(2)
    };
    let g = |s: f64| {
        let (sn, cs) = s.sin_cos();
        (b * b - a * a) * sn * cs + a * z.re * sn - b * z.im * cs
    };
    let dg = |s: f64| {
        let (sn, cs) = s.sin_cos();
        (b * b - a * a) * (cs * cs - sn * sn) + a * z.re * cs + b * z.im * sn
    };
    const STARTS: usize = 32;
    let mut best = (f64::INFINITY, 0.0);
    let mut consider = |s: f64| {
        let s = s.rem_euclid(TAU);
        let d = dist2(s);
        if d < best.0 - 1e-15 || ((d - best.0).abs() <= 1e-15 && s < best.1) {
            best = (d, s);
        }
    };
    for k in 0..STARTS {
        let s0 = TAU * k as f64 / STARTS as f64;
        consider(s0);
        let mut s = s0;
        for _ in 0..50 {
            let h = dg(s);
            if h.abs() < 1e-300 {
                break;
            }
            let step = (g(s) / h).clamp(-0.5, 0.5);
            s -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        consider(s);
    }
    best.1
}

/// Axis-aligned ellipse `((x−cx)/a)² + ((y−cy)/b)² ≤ 1`; a disk when `a = b`.
#[derive(Debug, Clone, Copy)]
struct Region {
    c: Complex64,
    a: f64,
    b: f64,
}

impl Region {
    /// Parameters `ρ` where the ray `ζ + ρe^{iφ}` crosses the boundary, if any.
    fn ray(&self, z: Complex64, phi: f64) -> Option<(f64, f64)> {
        let (s, c) = phi.sin_cos();
        let d = z - self.c;
        let (ia2, ib2) = (1.0 / (self.a * self.a), 1.0 / (self.b * self.b));
        let qa = c * c * ia2 + s * s * ib2;
        let qb = d.re * c * ia2 + d.im * s * ib2;
        let qc = d.re * d.re * ia2 + d.im * d.im * ib2 - 1.0;
        let disc = qb * qb - qa * qc;
        if disc < 0.0 {
            return None;
        }
        let sq = disc.sqrt();
        let hi = (-qb + sq) / qa;
        if hi <= 0.0 {
            return None;
        }
        let lo = qc / (qa * hi);
        Some((lo.max(0.0), hi))
    }

    fn contains(&self, z: Complex64) -> bool {
        let d = z - self.c;
        (d.re / self.a).powi(2) + (d.im / self.b).powi(2) < 1.0
    }

    /// The arc of directions `(φ−, φ+)` in which rays from an exterior
    /// point meet the region.
    fn visible_arc(&self, z: Complex64) -> (f64, f64) {
        let toward = (self.c - z).arg();
        let hit = |phi: f64| self.ray(z, phi).is_some_and(|(lo, hi)| hi > lo);
        let edge = |sign: f64| {
            let (mut inside, mut outside) = (0.0, PI);
            for _ in 0..64 {
                let mid = 0.5 * (inside + outside);
                if hit(toward + sign * mid) {
                    inside = mid;
                } else {
                    outside = mid;
                }
            }
            0.5 * (inside + outside)
        };
        (toward - edge(-1.0), toward + edge(1.0))
    }
}

/// Resolution of the ray quadrature used for logarithmic potentials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayQuadrature {
    /// Number of ray directions.
    pub angles: usize,
    /// Gauss–Legendre nodes per ray segment (non-constant densities only).
    pub radial: usize,
}

impl Default for RayQuadrature {
    fn default() -> Self {
        RayQuadrature { angles: 256, radial: 32 }
    }
}

#[derive(Clone, Copy)]
enum RayKernel {
    /// `∫ 2ρ log(1/ρ) f dρ`.
    Log,
    /// `∫ 2 f dρ`, weighted by `e^{iφ}` to give `∇U`.
    Grad,
}

type DensityFn = Arc<dyn Fn(Complex64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Density {
    /// `ΔQ` of the potential.
    Laplacian,
    Custom(DensityFn),
}

/// A probability measure `ΔQ·χ_S dA / Z` on a droplet, where `Z` is the
/// `ΔQ`-mass of `S` (so `Z = 1` for the true equilibrium droplet).
#[derive(Clone)]
pub struct EquilibriumMeasure {
    pot: Potential,
    droplet: Droplet,
    density: Density,
    constant: Option<f64>,
    raw_mass: f64,
    quad: RayQuadrature,
}

impl std::fmt::Debug for EquilibriumMeasure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EquilibriumMeasure")
            .field("potential", &self.pot)
            .field("droplet", &self.droplet)
            .field("raw_mass", &self.raw_mass)
            .finish()
    }
}

impl EquilibriumMeasure {
    /// The measure `ΔQ·χ_S dA`, normalized to be a probability measure.
    pub fn new(pot: &Potential, droplet: Droplet) -> Result<Self> {
        let constant = pot.constant_laplacian();
        let raw_mass = match (constant, droplet.shape) {
            (Some(c), _) => c * droplet.area(),
            (None, Shape::Disk { center, radius }) if pot.is_radial() && center == Complex64::new(0.0, 0.0) => {
                radial_mass(pot, radius)
            }
            (None, Shape::Annulus { r0, r1 }) if pot.is_radial() => radial_mass(pot, r1) - radial_mass(pot, r0),
            _ => droplet.grid(64, 128)?.integrate_real(|z| pot.laplacian_unchecked(z))?,
        };
        if !(raw_mass > 0.0 && raw_mass.is_finite()) {
            return Err(Error::Configuration(format!("droplet carries non-positive mass {raw_mass}")));
        }
        Ok(EquilibriumMeasure {
            pot: pot.clone(),
            droplet,
            density: Density::Laplacian,
            constant: constant.map(|c| c / raw_mass),
            raw_mass,
            quad: RayQuadrature::default(),
        })
    }

    /// A probability measure with density proportional to `f` on `droplet`.
    /// Useful as a competitor in energy comparisons.
    pub fn trial(
        pot: &Potential,
        droplet: Droplet,
        f: impl Fn(Complex64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let raw_mass = droplet.grid(64, 128)?.integrate_real(&f)?;
        if !(raw_mass > 0.0) {
            return Err(Error::Configuration("trial density has non-positive mass".into()));
        }
        Ok(EquilibriumMeasure {
            pot: pot.clone(),
            droplet,
            density: Density::Custom(Arc::new(f)),
            constant: None,
            raw_mass,
            quad: RayQuadrature::default(),
        })
    }

    pub fn with_quadrature(mut self, quad: RayQuadrature) -> Self {
        self.quad = quad;
        self
    }

    pub fn potential(&self) -> &Potential {
        &self.pot
    }

    pub fn droplet(&self) -> &Droplet {
        &self.droplet
    }

    /// Mass of the unnormalized density on the droplet; `1` for the true droplet.
    pub fn raw_mass(&self) -> f64 {
        self.raw_mass
    }

    /// Density with respect to `dA` (zero off the droplet).
    pub fn density(&self, z: Complex64) -> f64 {
        if self.droplet.contains(z) {
            self.density_formula(z)
        } else {
            0.0
        }
    }

    fn density_formula(&self, z: Complex64) -> f64 {
        if let Some(c) = self.constant {
            return c;
        }
        match &self.density {
            Density::Laplacian => self.pot.laplacian_unchecked(z) / self.raw_mass,
            Density::Custom(f) => f(z) / self.raw_mass,
        }
    }

    /// `μ(S)` by quadrature on the droplet grid.
    pub fn total_mass(&self) -> Result<f64> {
        self.droplet.grid(64, 128)?.integrate_real(|z| self.density_formula(z))
    }

    /// `U^μ(ζ) = ∫ log(1/|ζ−η|) dμ(η)`.
    pub fn log_potential(&self, z: Complex64) -> Result<f64> {
        Ok(self.ray_integral(z, RayKernel::Log)?.re)
    }

    /// Gradient of `U^μ`, encoded as `∂U/∂x + i ∂U/∂y`.
    pub fn log_potential_grad(&self, z: Complex64) -> Result<Complex64> {
        self.ray_integral(z, RayKernel::Grad)
    }

    /// `U^μ(ζ)` by direct summation over `grid`.
    ///
    /// Nodes within half a cell of `ζ` are dropped and replaced by the exact
    /// integral over a disk of the same mass. With `correct = false` a node
    /// coinciding with `ζ` is an error.
    pub fn log_potential_on_grid(&self, z: Complex64, grid: &Grid2D, correct: bool) -> Result<f64> {
        let (_, w_near) = grid
            .nodes
            .iter()
            .zip(&grid.weights)
            .map(|(n, &w)| ((n - z).norm(), w))
            .fold((f64::INFINITY, 0.0), |acc, x| if x.0 < acc.0 { x } else { acc });
        let cutoff = if correct { 0.5 * w_near.sqrt() } else { 0.0 };
        let mut terms = Vec::with_capacity(grid.len());
        let mut excluded = 0.0;
        for (&eta, &w) in grid.nodes.iter().zip(&grid.weights) {
            let d = (eta - z).norm();
            let f = self.density(eta);
            if d == 0.0 && !correct {
                if f != 0.0 {
                    return Err(Error::IntegrationFailure(format!("evaluation point {z} coincides with a grid node")));
                }
            } else if d <= cutoff {
                excluded += w;
            } else {
                terms.push(w * f * (-d.ln()));
            }
        }
        let r = excluded.sqrt();
        let cell = if r > 0.0 { self.density(z) * r * r * (0.5 - r.ln()) } else { 0.0 };
        Ok(pairwise_sum(&terms) + cell)
    }

    fn ray_integral(&self, z: Complex64, kernel: RayKernel) -> Result<Complex64> {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::OutOfDomain { re: z.re, im: z.im });
        }
        let mut total = Complex64::new(0.0, 0.0);
        for (region, sign) in self.droplet.pieces() {
            total += sign * self.region_integral(&region, z, kernel)?;
        }
        if !(total.re.is_finite() && total.im.is_finite()) {
            return Err(Error::IntegrationFailure(format!("non-finite potential at {z}")));
        }
        Ok(total)
    }

    fn region_integral(&self, region: &Region, z: Complex64, kernel: RayKernel) -> Result<Complex64> {
        let weigh = |phi: f64| {
            let v = match region.ray(z, phi) {
                Some((lo, hi)) if hi > lo => self.segment(z, phi, lo, hi, kernel),
                _ => 0.0,
            };
            match kernel {
                RayKernel::Log => Complex64::new(v, 0.0),
                RayKernel::Grad => Complex64::from_polar(v, phi),
            }
        };
        if region.contains(z) {
            let n = self.quad.angles;
            let sum: Complex64 = (0..n).map(|k| weigh(TAU * k as f64 / n as f64)).sum();
            Ok(sum / n as f64)
        } else {
            // φ = mid − α cos t smooths the square-root behaviour at tangent rays
            let (lo, hi) = region.visible_arc(z);
            let (mid, alpha) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            let q = gauss_legendre(self.quad.angles / 2 + 1, 0.0, PI)?;
            let mut acc = Complex64::new(0.0, 0.0);
            for (&t, &w) in q.nodes.iter().zip(&q.weights) {
                acc += weigh(mid - alpha * t.cos()) * (w * alpha * t.sin());
            }
            Ok(acc / TAU)
        }
    }

    /// Radial integral along one ray segment `[lo, hi]`.
    fn segment(&self, z: Complex64, phi: f64, lo: f64, hi: f64, kernel: RayKernel) -> f64 {
        let antiderivative = |r: f64| if r == 0.0 { 0.0 } else { r * r * (0.5 - r.ln()) };
        if let Some(c) = self.constant {
            return c * match kernel {
                RayKernel::Log => antiderivative(hi) - antiderivative(lo),
                RayKernel::Grad => 2.0 * (hi - lo),
            };
        }
        let e = Complex64::from_polar(1.0, phi);
        let f = |r: f64| self.density_formula(z + e * r);
        let q = gauss_legendre(self.quad.radial, 0.0, 1.0).expect("radial node count is positive");
        match kernel {
            RayKernel::Log if lo == 0.0 => {
                // ρ = hi·u² tames the logarithm at the evaluation point
                q.integrate(|u| {
                    let r = hi * u * u;
                    if r == 0.0 {
                        0.0
                    } else {
                        2.0 * r * (-r.ln()) * f(r) * 2.0 * hi * u
                    }
                })
            }
            RayKernel::Log => q.integrate(|u| {
                let r = lo + (hi - lo) * u;
                2.0 * r * (-r.ln()) * f(r) * (hi - lo)
            }),
            RayKernel::Grad => q.integrate(|u| 2.0 * f(lo + (hi - lo) * u) * (hi - lo)),
        }
    }

    /// Robin constant `γ = min (Q + 2U^σ)` over a default sample set.
    pub fn robin_constant(&self) -> Result<RobinConstant> {
        let support: Vec<Complex64> = self.droplet.grid(10, 24)?.nodes;
        let (x0, x1, y0, y1) = self.droplet.bounding_box();
        let c = self.droplet.center();
        let span = (x1 - x0).max(y1 - y0);
        let mut outside = Vec::new();
        for scale in [0.55, 0.6, 0.75, 1.0, 1.5] {
            for k in 0..24 {
                let z = c + Complex64::from_polar(scale * span, TAU * k as f64 / 24.0);
                if !self.droplet.contains(z) {
                    outside.push(z);
                }
            }
        }
        self.robin_constant_on(&support, &outside)
    }

    /// Robin constant from explicit samples on and off the support.
    pub fn robin_constant_on(&self, support: &[Complex64], outside: &[Complex64]) -> Result<RobinConstant> {
        let eval = |z: &Complex64| -> Result<f64> { Ok(self.pot.value(*z) + 2.0 * self.log_potential(*z)?) };
        let on: Vec<f64> = support.iter().map(eval).collect::<Result<_>>()?;
        let off: Vec<f64> = outside.iter().map(eval).collect::<Result<_>>()?;
        let min_on = on.iter().copied().fold(f64::INFINITY, f64::min);
        let max_on = on.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min_off = off.iter().copied().fold(f64::INFINITY, f64::min);
        let gamma = min_on.min(min_off);
        let spread = max_on - gamma;
        Ok(RobinConstant { gamma, spread_on_support: spread, covers_support: spread <= ROBIN_TOL })
    }

    /// Obstacle function `Q̂(ζ) = γ − 2U^σ(ζ)`.
    pub fn obstacle(&self, gamma: f64, z: Complex64) -> Result<f64> {
        Ok(gamma - 2.0 * self.log_potential(z)?)
    }

    /// Samples `Q̂` on and off the support and reports how well it matches
    /// `Q` on `S`, stays below `Q`, and is harmonic off `S`.
    pub fn obstacle_report(&self, gamma: f64, samples: &[Complex64]) -> Result<ObstacleReport> {
        let mut values = Vec::with_capacity(samples.len());
        let mut on_support = 0.0f64;
        let mut above_q = f64::NEG_INFINITY;
        let mut harmonic = 0.0f64;
        for &z in samples {
            let qh = self.obstacle(gamma, z)?;
            let q = self.pot.value(z);
            values.push(ObstacleSample { z, q_hat: qh, q });
            above_q = above_q.max(qh - q);
            if self.droplet.contains(z) {
                on_support = on_support.max((qh - q).abs());
            } else if self.droplet.distance_to_boundary(z) > HARMONIC_RADIUS {
                let avg = self.circle_average(z, HARMONIC_RADIUS, 16, gamma)?;
                harmonic = harmonic.max((avg - qh).abs());
            }
        }
        Ok(ObstacleReport {
            gamma,
            samples: values,
            max_deviation_on_support: on_support,
            max_excess_over_q: above_q,
            max_harmonic_defect: harmonic,
        })
    }

    fn circle_average(&self, z: Complex64, r: f64, m: usize, gamma: f64) -> Result<f64> {
        let mut s = 0.0;
        for k in 0..m {
            s += self.obstacle(gamma, z + Complex64::from_polar(r, TAU * k as f64 / m as f64))?;
        }
        Ok(s / m as f64)
    }

    /// `I_Q[μ] = ∫∫ log(1/|ζ−η|) dμ dμ + ∫ Q dμ`.
    pub fn equilibrium_energy(&self) -> Result<f64> {
        self.equilibrium_energy_on(&self.droplet.grid(24, 48)?)
    }

    /// [`EquilibriumMeasure::equilibrium_energy`] with an explicit outer grid on `S`.
    pub fn equilibrium_energy_on(&self, grid: &Grid2D) -> Result<f64> {
        let mut terms = Vec::with_capacity(grid.len());
        for (&z, &w) in grid.nodes.iter().zip(&grid.weights) {
            let f = self.density_formula(z);
            terms.push(w * f * (self.log_potential(z)? + self.pot.value(z)));
        }
        Ok(pairwise_sum(&terms))
    }

    /// Largest `|∇(Q + 2U^σ)|` over interior nodes of a droplet grid.
    pub fn equilibrium_residual(&self) -> Result<f64> {
        self.equilibrium_residual_on(&self.droplet.grid(8, 24)?.nodes)
    }

    pub fn equilibrium_residual_on(&self, samples: &[Complex64]) -> Result<f64> {
        let mut worst = 0.0f64;
        for &z in samples {
            if !self.droplet.contains(z) {
                continue;
            }
            let g = self.pot.grad_unchecked(z) + 2.0 * self.log_potential_grad(z)?;
            worst = worst.max(g.norm());
        }
        Ok(worst)
    }
}

const ROBIN_TOL: f64 = 1e-6;
const HARMONIC_RADIUS: f64 = 0.1;

/// Result of [`EquilibriumMeasure::robin_constant`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RobinConstant {
    pub gamma: f64,
    /// `max_S (Q + 2U) − γ` over the support samples.
    pub spread_on_support: f64,
    /// True when the minimizing set covers the sampled support.
    pub covers_support: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObstacleSample {
    pub z: Complex64,
    pub q_hat: f64,
    pub q: f64,
}

/// Samples of the obstacle function and their residual statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObstacleReport {
    pub gamma: f64,
    pub samples: Vec<ObstacleSample>,
    /// `max |Q̂ − Q|` on `S`.
    pub max_deviation_on_support: f64,
    /// `max (Q̂ − Q)`; non-positive up to quadrature error.
    pub max_excess_over_q: f64,
    /// Largest gap between `Q̂` and its circle averages off `S`.
    pub max_harmonic_defect: f64,
}

/// `∫_{|ζ|<R} ΔQ dA = R q′(R)/2` for a radial potential.
fn radial_mass(pot: &Potential, r: f64) -> f64 {
    r * pot.grad_unchecked(Complex64::new(r, 0.0)).re / 2.0
}

/// Droplet of a radially symmetric potential from the mass condition.
///
/// When `Q` decreases near the origin the droplet is an annulus whose inner
/// radius is the critical point of `q(r) = Q(r)`.
pub fn solve_droplet_radial(pot: &Potential) -> Result<Droplet> {
    if !pot.is_radial() {
        return invalid(format!("{} is not radially symmetric", pot.name()));
    }
    let dq = |r: f64| pot.grad_unchecked(Complex64::new(r, 0.0)).re;
    let small = 1e-6;
    let r0 = if dq(small) < 0.0 {
        let hi = expand_bracket(|r| dq(r) > 0.0, small)?;
        bisect(|r| dq(r) > 0.0, small, hi)
    } else {
        0.0
    };
    let base = if r0 > 0.0 { radial_mass(pot, r0) } else { 0.0 };
    let start = r0.max(small);
    let hi = expand_bracket(|r| radial_mass(pot, r) - base >= 1.0, start)?;
    let r1 = bisect(|r| radial_mass(pot, r) - base >= 1.0, start, hi);
    if r0 > 0.0 {
        Droplet::annulus(r0, r1)
    } else {
        Droplet::disk(Complex64::new(0.0, 0.0), r1)
    }
}

fn expand_bracket(done: impl Fn(f64) -> bool, start: f64) -> Result<f64> {
    let mut hi = start.max(1e-3);
    for _ in 0..80 {
        if done(hi) {
            return Ok(hi);
        }
        hi *= 2.0;
    }
    Err(Error::Configuration("mass condition has no solution in the search bracket".into()))
}

/// Smallest `r` in `(lo, hi]` with `done(r)`, assuming monotonicity.
fn bisect(done: impl Fn(f64) -> bool, mut lo: f64, mut hi: f64) -> f64 {
    while hi - lo > 1e-12 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if done(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Droplet of the ellipse potential `|ζ|² − t Re ζ²`: semi-axes with `ab = 1`
/// and `a/b = (1+t)/(1−t)`.
pub fn droplet_ellipse(t: f64) -> Result<Droplet> {
    if !(t > 0.0 && t < 1.0) {
        return invalid(format!("ellipse parameter must lie in (0,1), got {t}"));
    }
    let a = ((1.0 + t) / (1.0 - t)).sqrt();
    Droplet::ellipse(a, 1.0 / a)
}

/// Droplet of a built-in potential.
pub fn droplet_for(pot: &Potential) -> Result<Droplet> {
    match pot.spec() {
        Some(crate::PotentialSpec::Ellipse { t }) => droplet_ellipse(t),
        _ => solve_droplet_radial(pot),
    }
}

/// A finite sum of point masses `Σ wⱼ δ_{ζⱼ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointMasses {
    pub points: Vec<Complex64>,
    pub weights: Vec<f64>,
}

impl PointMasses {
    pub fn new(points: Vec<Complex64>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() || points.is_empty() {
            return invalid("point masses need matching, nonempty point and weight lists");
        }
        Ok(PointMasses { points, weights })
    }

    /// `U(ζ) = Σ wⱼ log(1/|ζ−ζⱼ|)`; `+∞` at an atom.
    pub fn log_potential(&self, z: Complex64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| -w * (z - p).norm().ln()).sum()
    }

    /// The weighted energy, always `+∞` because of the diagonal.
    pub fn energy(&self, _pot: &Potential) -> f64 {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ginibre() -> (Potential, EquilibriumMeasure) {
        let p = Potential::ginibre();
        let d = solve_droplet_radial(&p).unwrap();
        let m = EquilibriumMeasure::new(&p, d).unwrap();
        (p, m)
    }

    /// Mass-condition oracle for `|ζ|^{2p}`: `p R^{2p} = 1`.
    fn ml_radius(p: f64) -> f64 {
        (1.0 / p).powf(1.0 / (2.0 * p))
    }

    #[test]
    fn radial_droplets() {
        let d = solve_droplet_radial(&Potential::ginibre()).unwrap();
        match d.shape {
            Shape::Disk { radius, .. } => assert!((radius - 1.0).abs() < 1e-10),
            _ => panic!(),
        }
        let d = solve_droplet_radial(&Potential::mittag_leffler(2.0).unwrap()).unwrap();
        assert!((d.extent() - ml_radius(2.0)).abs() < 1e-10);
        assert!((d.extent() - 0.840_896_415_253_714_5).abs() < 1e-10);
        let d1 = solve_droplet_radial(&Potential::mittag_leffler(1.0).unwrap()).unwrap();
        assert_eq!(d1, solve_droplet_radial(&Potential::ginibre()).unwrap());
    }

    #[test]
    fn annulus_droplet() {
        use crate::potential::CustomPotential;
        let p = Potential::custom(
            CustomPotential::new("r4-r2", |z| z.norm_sqr() * z.norm_sqr() - z.norm_sqr())
                .with_gradient(|z| z * (4.0 * z.norm_sqr() - 2.0))
                .with_laplacian(|z| 4.0 * z.norm_sqr() - 1.0)
                .radial(),
        );
        let d = solve_droplet_radial(&p).unwrap();
        match d.shape {
            Shape::Annulus { r0, r1 } => {
                assert!((r0 - 0.5f64.sqrt()).abs() < 1e-9);
                assert!((r1 - 1.0).abs() < 1e-9);
            }
            _ => panic!("expected annulus"),
        }
        let m = EquilibriumMeasure::new(&p, d).unwrap();
        assert!((m.raw_mass() - 1.0).abs() < 1e-8);
        assert!((m.total_mass().unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn ellipse_droplet() {
        let d = droplet_ellipse(0.5).unwrap();
        match d.shape {
            Shape::Ellipse { a, b } => {
                assert!((a - 3f64.sqrt()).abs() < 1e-14);
                assert!((b - 1.0 / 3f64.sqrt()).abs() < 1e-14);
            }
            _ => panic!(),
        }
        assert!((d.area() - 1.0).abs() < 1e-14);
        let d = droplet_ellipse(1e-9).unwrap();
        assert!((d.extent() - 1.0).abs() < 1e-8);
        assert!(droplet_ellipse(1.0).is_err());
    }

    #[test]
    fn boundary_queries() {
        let d = droplet_ellipse(0.5).unwrap();
        let a = 3f64.sqrt();
        let bp = d.nearest_boundary_point(c(a + 1.0, 0.0));
        assert!((bp.point - c(a, 0.0)).norm() < 1e-12);
        assert!((bp.normal - c(1.0, 0.0)).norm() < 1e-12);
        assert!((d.distance_to_boundary(c(a + 1.0, 0.0)) - 1.0).abs() < 1e-12);
        // the center is equidistant from (0, ±b): smaller parameter wins
        let bp = d.nearest_boundary_point(c(0.0, 0.0));
        assert!((bp.param - PI / 2.0).abs() < 1e-9);
        for k in 0..40 {
            let s = TAU * k as f64 / 40.0;
            let b = d.boundary_point(s);
            assert!(d.distance_to_boundary(b.point) < 1e-10);
            // normal is orthogonal to the tangent
            let tangent = d.boundary_point(s + 1e-6).point - d.boundary_point(s - 1e-6).point;
            assert!((tangent.conj() * b.normal).re.abs() < 1e-8);
        }
        let g = Droplet::disk(c(0.0, 0.0), 1.0).unwrap();
        assert!((g.nearest_boundary_point(c(0.0, 2.0)).theta() - PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn ginibre_log_potential() {
        let (_, m) = ginibre();
        assert!((m.log_potential(c(0.0, 0.0)).unwrap() - 0.5).abs() < 1e-12);
        assert!((m.log_potential(c(0.0, 2.0)).unwrap() - 0.5f64.ln()).abs() < 1e-10);
        for z in [c(0.3, 0.4), c(-0.7, 0.1), c(0.0, -0.99)] {
            let expected = (1.0 - z.norm_sqr()) / 2.0;
            assert!((m.log_potential(z).unwrap() - expected).abs() < 1e-9, "{z}");
        }
        for z in [c(1.01, 0.0), c(1.5, -1.5), c(0.0, 10.0)] {
            assert!((m.log_potential(z).unwrap() + z.norm().ln()).abs() < 1e-9, "{z}");
        }
        let g = m.log_potential_grad(c(0.4, -0.2)).unwrap();
        assert!((g + c(0.4, -0.2)).norm() < 1e-10);
    }

    #[test]
    fn grid_log_potential_with_cell_correction() {
        let (_, m) = ginibre();
        let grid = polar_grid_centered(c(0.0, 0.0), 1.0, 60, 120).unwrap();
        let u = m.log_potential_on_grid(c(0.0, 0.0), &grid, true).unwrap();
        assert!((u - 0.5).abs() < 1e-2, "{u}");
        let node = grid.nodes[5];
        assert!(m.log_potential_on_grid(node, &grid, false).is_err());
        let u = m.log_potential_on_grid(node, &grid, true).unwrap();
        assert!((u - (1.0 - node.norm_sqr()) / 2.0).abs() < 2e-2);
    }

    #[test]
    fn point_mass() {
        let pm = PointMasses::new(vec![c(0.0, 0.0)], vec![1.0]).unwrap();
        assert!((pm.log_potential(c(std::f64::consts::E, 0.0)) + 1.0).abs() < 1e-15);
        assert_eq!(pm.energy(&Potential::ginibre()), f64::INFINITY);
    }

    #[test]
    fn robin_and_obstacle() {
        let (p, m) = ginibre();
        let r = m.robin_constant().unwrap();
        assert!((r.gamma - 1.0).abs() < 1e-9);
        assert!(r.covers_support);
        let v = p.value(c(2.0, 0.0)) + 2.0 * m.log_potential(c(2.0, 0.0)).unwrap();
        assert!((v - (4.0 - 2.0 * 2f64.ln())).abs() < 1e-9);
        let qh = m.obstacle(r.gamma, c(0.0, 2.0)).unwrap();
        assert!((qh - (2.0 * 2f64.ln() + 1.0)).abs() < 1e-9);
        let samples: Vec<_> = (0..30).map(|k| Complex64::from_polar(0.1 * k as f64, 0.7 * k as f64)).collect();
        let rep = m.obstacle_report(r.gamma, &samples).unwrap();
        assert!(rep.max_deviation_on_support < 1e-6, "{}", rep.max_deviation_on_support);
        assert!(rep.max_excess_over_q < 1e-6);
        assert!(rep.max_harmonic_defect < 1e-4);
    }

    #[test]
    fn energy_of_ginibre_measure() {
        let (_, m) = ginibre();
        assert!((m.equilibrium_energy().unwrap() - 0.75).abs() < 1e-9);
    }

    #[test]
    fn residuals() {
        let (p, m) = ginibre();
        assert!(m.equilibrium_residual().unwrap() < 1e-9);
        let wrong = EquilibriumMeasure::new(&p, Droplet::disk(c(0.0, 0.0), 1.1).unwrap()).unwrap();
        assert!(wrong.equilibrium_residual().unwrap() >= 0.1);
        let e = Potential::ellipse(0.5).unwrap();
        let em = EquilibriumMeasure::new(&e, droplet_ellipse(0.5).unwrap()).unwrap();
        assert!(em.equilibrium_residual().unwrap() < 1e-6);
        let bad = EquilibriumMeasure::new(&e, Droplet::ellipse(1.5, 1.0 / 1.5).unwrap()).unwrap();
        assert!(bad.equilibrium_residual().unwrap() > 0.05);
    }

    #[test]
    fn mittag_leffler_measure() {
        let p = Potential::mittag_leffler(2.0).unwrap();
        let d = solve_droplet_radial(&p).unwrap();
        let m = EquilibriumMeasure::new(&p, d).unwrap();
        assert!((m.raw_mass() - 1.0).abs() < 1e-9);
        assert!((m.total_mass().unwrap() - 1.0).abs() < 1e-9);
        assert!(m.equilibrium_residual().unwrap() < 1e-6);
        let r = m.robin_constant().unwrap();
        assert!(r.covers_support, "{r:?}");
    }
}
