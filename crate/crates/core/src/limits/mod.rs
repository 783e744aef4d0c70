//! Universal limiting kernels of the rescaled Coulomb gas.
//!
//! The translation-invariant kernels `K^m(z,w) = G(z,w) F(z + w̄ − 2m)` and
//! their Berezin kernels `B^m` are the boundary limits; `m = +∞` recovers the
//! Ginibre kernel `G` of the bulk.

mod special;

use std::f64::consts::{PI, TAU};

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::quadrature::{gauss_legendre, pairwise_sum, polar_grid_centered, Grid2D};
use crate::Complex64;

pub use special::{dawson_h, erfc, faddeeva, gaussian, ln_plasma_f, plasma_f, plasma_f_real, PLASMA_WINDOW};

/// Translation offset of a limiting kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlasmaParams {
    /// `+∞` selects the Ginibre kernel.
    pub m: f64,
}

impl PlasmaParams {
    pub fn new(m: f64) -> Result<Self> {
        if m.is_nan() || m == f64::NEG_INFINITY {
            return invalid(format!("plasma offset must be finite or +inf, got {m}"));
        }
        Ok(PlasmaParams { m })
    }

    pub fn ginibre() -> Self {
        PlasmaParams { m: f64::INFINITY }
    }

    /// The regular-boundary kernel, `m = 0`.
    pub fn boundary() -> Self {
        PlasmaParams { m: 0.0 }
    }

    pub fn is_ginibre(&self) -> bool {
        self.m == f64::INFINITY
    }
}

/// Ginibre kernel `G(z,w) = e^{z w̄ − |z|²/2 − |w|²/2}`.
pub fn ginibre_g(z: Complex64, w: Complex64) -> Complex64 {
    ln_ginibre_g(z, w).exp()
}

fn ln_ginibre_g(z: Complex64, w: Complex64) -> Complex64 {
    z * w.conj() - 0.5 * (z.norm_sqr() + w.norm_sqr())
}

/// A branch of `ln K^m(z,w)`.
pub fn ln_kernel_km(params: PlasmaParams, z: Complex64, w: Complex64) -> Complex64 {
    let g = ln_ginibre_g(z, w);
    if params.is_ginibre() {
        g
    } else {
        g + ln_plasma_f(z + w.conj() - 2.0 * params.m)
    }
}

/// `K^m(z,w) = G(z,w) F(z + w̄ − 2m)`.
pub fn kernel_km(params: PlasmaParams, z: Complex64, w: Complex64) -> Complex64 {
    ln_kernel_km(params, z, w).exp()
}

/// `R^m(z) = K^m(z,z) = F(2 Re z − 2m)`.
pub fn one_point_rm(params: PlasmaParams, z: Complex64) -> f64 {
    if params.is_ginibre() {
        1.0
    } else {
        plasma_f_real(2.0 * z.re - 2.0 * params.m)
    }
}

/// `ln R^m(z)`, finite even where `R^m` underflows.
pub fn ln_one_point_rm(params: PlasmaParams, z: Complex64) -> f64 {
    if params.is_ginibre() {
        0.0
    } else {
        ln_plasma_f(Complex64::new(2.0 * z.re - 2.0 * params.m, 0.0)).re
    }
}

/// `B^m(z,w) = |K^m(z,w)|² / K^m(z,z)`.
pub fn berezin_bm(params: PlasmaParams, z: Complex64, w: Complex64) -> f64 {
    (2.0 * ln_kernel_km(params, z, w).re - ln_one_point_rm(params, z)).exp()
}

/// `μ(Λ) = ∫_{|w−z|≤Λ} B^m(z,w) dA(w)`.
pub fn mass_one_mu(params: PlasmaParams, z: Complex64, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return invalid(format!("radius must be positive, got {lambda}"));
    }
    let nr = 48 + (4.0 * lambda).ceil() as usize;
    let grid = polar_grid_centered(z, lambda, nr, 128)?;
    grid.integrate_real(|w| berezin_bm(params, z, w))
}

/// `∫_ℂ B^m(z,w) dA(w)` over the whole plane.
///
/// For finite `m` the Berezin kernel decays like a Gaussian in `Re w` but
/// only like `|Im w|^{−2}` in `Im w`, so the imaginary direction is mapped
/// onto a bounded interval by `Im w = Im z + tan s`.
pub fn berezin_full_mass(params: PlasmaParams, z: Complex64) -> Result<f64> {
    let u = composite_gl(z.re - 10.0, z.re + 10.0, 8, 24)?;
    let s = composite_gl(-PI / 2.0, PI / 2.0, 16, 24)?;
    let mut terms = Vec::with_capacity(u.len() * s.len());
    for &(x, wx) in &u {
        for &(t, wt) in &s {
            let (sn, cs) = t.sin_cos();
            let y = z.im + sn / cs;
            let b = berezin_bm(params, z, Complex64::new(x, y));
            if !b.is_finite() {
                return Err(Error::IntegrationFailure(format!("non-finite Berezin kernel at {x}+{y}i")));
            }
            terms.push(b * wx * wt / (cs * cs) / PI);
        }
    }
    Ok(pairwise_sum(&terms))
}

fn composite_gl(a: f64, b: f64, panels: usize, nodes: usize) -> Result<Vec<(f64, f64)>> {
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * nodes);
    for k in 0..panels {
        let q = gauss_legendre(nodes, a + k as f64 * h, a + (k + 1) as f64 * h)?;
        out.extend(q.nodes.into_iter().zip(q.weights));
    }
    Ok(out)
}

/// `Φ_e(z) = ∫_e γ(z − t) dt` for a finite union of intervals `e`.
///
/// Infinite endpoints are truncated where the Gaussian is negligible.
pub fn phi_of_intervals(intervals: &[(f64, f64)], z: Complex64) -> Result<Complex64> {
    let mut total = Complex64::new(0.0, 0.0);
    let reach = z.im.abs() + 40.0;
    for &(lo, hi) in intervals {
        if !(lo < hi) {
            return invalid(format!("interval ({lo}, {hi}) is empty"));
        }
        let lo = lo.max(z.re - reach);
        let hi = hi.min(z.re + reach);
        if lo >= hi {
            continue;
        }
        let panels = ((hi - lo) / 0.5).ceil().max(1.0) as usize;
        for (t, w) in composite_gl(lo, hi, panels, 20)? {
            total += gaussian(z - t) * w;
        }
    }
    Ok(total)
}

/// Quadrature settings for the Cauchy transform in Ward's equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WardQuadrature {
    /// Truncation radius of the `w`-integral about `z`.
    pub radius: f64,
    pub nr: usize,
    pub ntheta: usize,
    /// Step of the central differences for `∂̄C` and `Δ log R`.
    pub fd_step: f64,
}

impl Default for WardQuadrature {
    fn default() -> Self {
        WardQuadrature { radius: 8.0, nr: 64, ntheta: 64, fd_step: 1e-3 }
    }
}

impl WardQuadrature {
    /// Polar template grid about the origin; translated to each `z`.
    pub fn template(&self) -> Result<Grid2D> {
        polar_grid_centered(Complex64::new(0.0, 0.0), self.radius, self.nr, self.ntheta)
    }

    /// Both resolutions doubled.
    pub fn refined(&self) -> Self {
        WardQuadrature { nr: 2 * self.nr, ntheta: 2 * self.ntheta, ..*self }
    }
}

/// Cauchy transform `C(z) = ∫ B^m(z,w)/(z−w) dA(w)` over `z + template`.
///
/// The template must not contain the origin; on a polar template the
/// `1/ρ` singularity is absorbed by the area weight.
pub fn cauchy_transform(params: PlasmaParams, z: Complex64, template: &Grid2D) -> Result<Complex64> {
    let mut re = Vec::with_capacity(template.len());
    let mut im = Vec::with_capacity(template.len());
    for (&eta, &w) in template.nodes.iter().zip(&template.weights) {
        if eta == Complex64::new(0.0, 0.0) {
            return Err(Error::IntegrationFailure("Cauchy template contains the origin".into()));
        }
        let v = -berezin_bm(params, z, z + eta) / eta * w;
        re.push(v.re);
        im.push(v.im);
    }
    Ok(Complex64::new(pairwise_sum(&re), pairwise_sum(&im)))
}

/// Ward's equation at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WardPoint {
    pub z: Complex64,
    /// `∂̄C(z)`.
    pub dbar_c: Complex64,
    /// `R − 1 − Δ log R`.
    pub rhs: f64,
    pub residual: f64,
}

/// `|∂̄C − (R − 1 − Δ log R)|` at each point of `zs`.
pub fn ward_residual(
    params: PlasmaParams,
    zs: &[Complex64],
    template: &Grid2D,
    fd_step: f64,
) -> Result<Vec<WardPoint>> {
    if !(fd_step > 0.0) {
        return invalid("finite-difference step must be positive");
    }
    let h = fd_step;
    let ih = Complex64::new(0.0, h);
    zs.iter()
        .map(|&z| {
            if one_point_rm(params, z) <= 0.0 {
                return Err(Error::DivisionGuard(format!("one-point function vanishes at {z}")));
            }
            let cx =
                (cauchy_transform(params, z + h, template)? - cauchy_transform(params, z - h, template)?) / (2.0 * h);
            let cy =
                (cauchy_transform(params, z + ih, template)? - cauchy_transform(params, z - ih, template)?) / (2.0 * h);
            let dbar_c = 0.5 * (cx + Complex64::new(0.0, 1.0) * cy);
            let lr = |w: Complex64| ln_one_point_rm(params, w);
            let lap = (lr(z + h) + lr(z - h) + lr(z + ih) + lr(z - ih) - 4.0 * lr(z)) / (4.0 * h * h);
            let rhs = one_point_rm(params, z) - 1.0 - lap;
            Ok(WardPoint { z, dbar_c, rhs, residual: (dbar_c - rhs).norm() })
        })
        .collect()
}

/// Ward residuals at the given and at doubled resolution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WardReport {
    pub quadrature: WardQuadrature,
    pub points: Vec<WardPoint>,
    pub max_residual: f64,
    /// Maximum residual with both resolutions doubled.
    pub refined_max_residual: f64,
    /// `refined_max_residual / max_residual`.
    pub refinement_ratio: f64,
    /// False when refinement moves some residual by more than `tol`.
    pub converged: bool,
}

/// Runs [`ward_residual`] at `quad` and at `quad.refined()`.
pub fn ward_check(params: PlasmaParams, zs: &[Complex64], quad: WardQuadrature, tol: f64) -> Result<WardReport> {
    let coarse = ward_residual(params, zs, &quad.template()?, quad.fd_step)?;
    let fine_quad = quad.refined();
    let fine = ward_residual(params, zs, &fine_quad.template()?, fine_quad.fd_step)?;
    let max_of = |v: &[WardPoint]| v.iter().map(|p| p.residual).fold(0.0, f64::max);
    let (max_residual, refined_max_residual) = (max_of(&coarse), max_of(&fine));
    let converged = coarse.iter().zip(&fine).all(|(a, b)| (a.residual - b.residual).abs() <= tol);
    Ok(WardReport {
        quadrature: quad,
        points: coarse,
        max_residual,
        refined_max_residual,
        refinement_ratio: if max_residual > 0.0 { refined_max_residual / max_residual } else { 0.0 },
        converged,
    })
}

/// Points of a polar sample of the disk `|z| ≤ r` (origin included).
pub fn disk_samples(r: f64, rings: usize, per_ring: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0)];
    for i in 1..=rings {
        let rho = r * i as f64 / rings as f64;
        for k in 0..per_ring {
            out.push(Complex64::from_polar(rho, TAU * (k as f64 + 0.5 * (i % 2) as f64) / per_ring as f64));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn ginibre_kernel_identities() {
        let (z, w) = (c(0.3, -1.1), c(-0.4, 0.9));
        assert!((ginibre_g(z, z) - 1.0).norm() < 1e-15);
        assert!((ginibre_g(z, w).norm() - (-(z - w).norm_sqr() / 2.0).exp()).abs() < 1e-15);
        let g = polar_grid_centered(z, 7.0, 60, 64).unwrap();
        let mass = g.integrate_real(|w| ginibre_g(z, w).norm_sqr()).unwrap();
        assert!((mass - 1.0).abs() < 1e-8);
    }

    #[test]
    fn km_reduces_and_diagonal() {
        let inf = PlasmaParams::ginibre();
        assert_eq!(kernel_km(inf, c(1.0, 2.0), c(0.5, -1.0)), ginibre_g(c(1.0, 2.0), c(0.5, -1.0)));
        let zero = PlasmaParams::boundary();
        for x in [-2.0, -0.3, 0.0, 1.7] {
            let k = kernel_km(zero, c(x, 0.0), c(x, 0.0));
            assert!((k - c(plasma_f_real(2.0 * x), 0.0)).norm() < 1e-14);
        }
        assert!((berezin_bm(inf, c(0.2, 0.1), c(1.0, -1.0)) - (-(c(0.8, -1.1)).norm_sqr()).exp()).abs() < 1e-15);
    }

    #[test]
    fn ginibre_mu() {
        for lambda in [0.5, 1.0, 2.0, 3.0] {
            let mu = mass_one_mu(PlasmaParams::ginibre(), c(0.7, -0.2), lambda).unwrap();
            assert!((mu - (1.0 - (-lambda * lambda).exp())).abs() < 1e-6);
        }
    }

    #[test]
    fn boundary_mu_tail() {
        // 1 − μ(Λ) decays like c/Λ, with c fixed by the Dawson tail
        let mu = |l: f64| mass_one_mu(PlasmaParams::boundary(), c(0.0, 0.0), l).unwrap();
        let (a, b, d) = (mu(3.0), mu(6.0), mu(12.0));
        assert!(a < b && b < d && d < 1.0);
        let ratio = (1.0 - b) / (1.0 - d);
        assert!((ratio - 2.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn full_plane_mass() {
        for z in [c(0.0, 0.0), c(-1.0, 0.5), c(0.8, -2.0)] {
            let m = berezin_full_mass(PlasmaParams::boundary(), z).unwrap();
            assert!((m - 1.0).abs() < 1e-6, "{z}: {m}");
        }
        let m = berezin_full_mass(PlasmaParams::ginibre(), c(0.4, 0.4)).unwrap();
        assert!((m - 1.0).abs() < 1e-8);
    }

    #[test]
    fn phi_matches_plasma() {
        for z in [c(0.0, 0.0), c(1.0, 0.5), c(-2.0, -1.0), c(0.3, 3.0)] {
            for m in [0.0, 1.5] {
                let phi = phi_of_intervals(&[(f64::NEG_INFINITY, m)], z).unwrap();
                assert!((phi - plasma_f(z - m)).norm() < 1e-8, "{z} {m}");
            }
        }
    }

    #[test]
    fn ward_ginibre_is_exact() {
        let zs = disk_samples(2.0, 2, 6);
        let pts =
            ward_residual(PlasmaParams::ginibre(), &zs, &WardQuadrature::default().template().unwrap(), 1e-3).unwrap();
        assert!(pts.iter().all(|p| p.residual <= 1e-6));
    }

    #[test]
    fn ward_boundary_kernel() {
        let zs = [c(0.0, 0.5), c(0.3, 0.2), c(-1.0, 1.0)];
        let pts =
            ward_residual(PlasmaParams::boundary(), &zs, &WardQuadrature::default().template().unwrap(), 1e-3).unwrap();
        for p in pts {
            assert!(p.residual <= 5e-2, "{p:?}");
        }
    }

    #[test]
    fn dawson_bound() {
        let worst = (0..=100_000)
            .map(|k| -50.0 + k as f64 * 1e-3)
            .map(|t| (1.0 + t.abs()) * dawson_h(t).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1.1, "{worst}");
    }

    #[test]
    fn boundary_profile_gaussian_bound() {
        for k in 0..=1200 {
            let x = -6.0 + k as f64 * 0.01;
            let step = if x < 0.0 { 1.0 } else { 0.0 };
            assert!((plasma_f_real(2.0 * x) - step).abs() <= (-x * x).exp() + 1e-15);
        }
    }

    proptest! {
        #[test]
        fn one_point_positive(x in -30.0f64..30.0, y in -5.0f64..5.0, m in -5.0f64..5.0) {
            let p = PlasmaParams::new(m).unwrap();
            prop_assert!(ln_one_point_rm(p, c(x, y)).is_finite());
            if x - m < 15.0 {
                prop_assert!(one_point_rm(p, c(x, y)) > 0.0);
            }
        }

        #[test]
        fn km_off_diagonal_bound(zr in -3.0f64..3.0, zi in -3.0f64..3.0, wr in -3.0f64..3.0, wi in -3.0f64..3.0) {
            let (z, w) = (c(zr, zi), c(wr, wi));
            let d = z - w;
            let k = kernel_km(PlasmaParams::boundary(), z, w).norm();
            let bound = (-d.norm_sqr() / 2.0).exp() + (-d.re * d.re / 2.0).exp() * dawson_h(d.im).abs();
            prop_assert!(k <= bound + 1e-12);
        }

        #[test]
        fn kernel_hermitian(zr in -3.0f64..3.0, zi in -3.0f64..3.0, wr in -3.0f64..3.0, wi in -3.0f64..3.0, m in -2.0f64..2.0) {
            let p = PlasmaParams::new(m).unwrap();
            let (z, w) = (c(zr, zi), c(wr, wi));
            let a = kernel_km(p, z, w);
            let b = kernel_km(p, w, z).conj();
            prop_assert!((a - b).norm() <= 1e-12 * a.norm().max(1e-300) + 1e-300);
        }

        #[test]
        fn berezin_nonnegative(zr in -3.0f64..3.0, zi in -3.0f64..3.0, wr in -9.0f64..9.0, wi in -9.0f64..9.0) {
            prop_assert!(berezin_bm(PlasmaParams::boundary(), c(zr, zi), c(wr, wi)) >= 0.0);
        }
    }
}
