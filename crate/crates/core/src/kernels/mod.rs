//! Reproducing kernels of weighted polynomial spaces and their rescalings.
//!
//! The correlation kernel `bfK_n(ζ,η) = Σ φ_k(ζ) conj(φ_k(η))` is the
//! reproducing kernel of `Pol_n`. Rescaled quantities live in the frame
//! `z = e^{−iθ} √(nΔQ(p)) (ζ − p)`, where `e^{iθ}` is the outward normal at
//! the boundary point nearest to `p`.

mod basis;

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::sync::{Arc, RwLock};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::equilibrium::Droplet;
use crate::error::{invalid, Error, Result};
use crate::potential::Potential;
use crate::quadrature::{pairwise_sum, polar_grid_centered, Grid2D};
use crate::Complex64;

pub use basis::{default_grid, BasisSummary, BasisValues, WeightedBasis, CONDITION_CAP};

/// Whether a [`KernelModel`] memoizes diagonal values `bfR_n(ζ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CachePolicy {
    #[default]
    None,
    Diagonal,
}

/// The correlation kernel of `Pol_n`.
#[derive(Debug)]
pub struct KernelModel {
    basis: Arc<WeightedBasis>,
    policy: CachePolicy,
    diagonal: RwLock<HashMap<(u64, u64), f64>>,
}

impl Clone for KernelModel {
    fn clone(&self) -> Self {
        KernelModel { basis: self.basis.clone(), policy: self.policy, diagonal: RwLock::new(HashMap::new()) }
    }
}

impl KernelModel {
    pub fn new(basis: WeightedBasis) -> Self {
        Self::shared(Arc::new(basis))
    }

    pub fn shared(basis: Arc<WeightedBasis>) -> Self {
        KernelModel { basis, policy: CachePolicy::None, diagonal: RwLock::new(HashMap::new()) }
    }

    /// Builds the basis of `Pol_n` for `pot` and wraps it.
    pub fn build(pot: &Potential, n: usize) -> Result<Self> {
        Ok(Self::new(WeightedBasis::build(pot, n)?))
    }

    pub fn with_cache(mut self, policy: CachePolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn basis(&self) -> &WeightedBasis {
        &self.basis
    }

    pub fn n(&self) -> usize {
        self.basis.n()
    }

    /// `bfK_n(ζ,η)`.
    pub fn kernel(&self, z: Complex64, w: Complex64) -> Complex64 {
        match self.basis.ln_norms() {
            Some(ln_h) => {
                let (ln_mag, phase) = self.radial_log_kernel(ln_h, z, w);
                Complex64::from_polar(ln_mag.exp(), phase)
            }
            None => {
                let a = self.basis.eval_all(z);
                let b = self.basis.eval_all(w);
                a.iter().zip(&b).map(|(x, y)| x * y.conj()).sum()
            }
        }
    }

    /// `ln |bfK_n(ζ,η)|`, finite where the kernel itself underflows.
    pub fn ln_kernel_abs(&self, z: Complex64, w: Complex64) -> f64 {
        match self.basis.ln_norms() {
            Some(ln_h) => self.radial_log_kernel(ln_h, z, w).0,
            None => self.kernel(z, w).norm().ln(),
        }
    }

    /// Log-magnitude and phase of the radial kernel, summed with the
    /// largest term factored out.
    fn radial_log_kernel(&self, ln_h: &[f64], z: Complex64, w: Complex64) -> (f64, f64) {
        let pot = self.basis.potential();
        let base = -0.5 * self.n() as f64 * (pot.value(z) + pot.value(w));
        let u = z * w.conj();
        if u.norm() == 0.0 {
            return (base - ln_h[0], 0.0);
        }
        let (lu, th) = (u.norm().ln(), u.arg());
        let top = ln_h.iter().enumerate().map(|(k, lh)| k as f64 * lu - lh).fold(f64::NEG_INFINITY, f64::max);
        let mut s = Complex64::new(0.0, 0.0);
        for (k, lh) in ln_h.iter().enumerate() {
            let t = k as f64 * lu - lh - top;
            if t > -745.0 {
                s += Complex64::from_polar(t.exp(), k as f64 * th);
            }
        }
        (base + top + s.norm().ln(), s.arg())
    }

    /// `bfR_n(ζ) = bfK_n(ζ,ζ)`.
    pub fn one_point(&self, z: Complex64) -> f64 {
        if self.policy == CachePolicy::Diagonal {
            let key = (z.re.to_bits(), z.im.to_bits());
            if let Some(v) = self.diagonal.read().expect("cache lock").get(&key) {
                return *v;
            }
            let v = self.one_point_uncached(z);
            self.diagonal.write().expect("cache lock").insert(key, v);
            return v;
        }
        self.one_point_uncached(z)
    }

    fn one_point_uncached(&self, z: Complex64) -> f64 {
        match self.basis.ln_norms() {
            Some(_) => self.ln_kernel_abs(z, z).exp(),
            None => self.basis.eval_all(z).iter().map(|v| v.norm_sqr()).sum(),
        }
    }

    /// `∫ |bfK_n(ζ,η)|² dA(η)` on `grid`; equals `bfR_n(ζ)` by the
    /// reproducing property.
    pub fn reproducing_integral(&self, z: Complex64, grid: &Grid2D) -> Result<f64> {
        let terms: Vec<f64> = grid
            .nodes
            .par_iter()
            .zip(grid.weights.par_iter())
            .map(|(&eta, &w)| w * (2.0 * self.ln_kernel_abs(z, eta)).exp())
            .collect();
        if terms.iter().any(|t| !t.is_finite()) {
            return Err(Error::IntegrationFailure(format!("non-finite kernel near {z}")));
        }
        Ok(pairwise_sum(&terms))
    }

    /// A grid on which `η ↦ |bfK_n(ζ,η)|²` is integrated essentially exactly.
    pub fn mass_grid(&self, droplet: &Droplet) -> Result<Grid2D> {
        default_grid(droplet, self.n())
    }
}

/// The rescaling `ζ ↦ z = e^{−iθ} s (ζ − p)` with `s = √(nΔQ(p))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RescaleFrame {
    pub center: Complex64,
    pub theta: f64,
    pub scale: f64,
    pub droplet: Droplet,
}

impl RescaleFrame {
    pub fn new(pot: &Potential, droplet: &Droplet, p: Complex64, n: usize) -> Result<Self> {
        let lap = pot.laplacian(p)?;
        if !(lap > 0.0) {
            return invalid(format!("Laplacian of Q must be positive at the frame center, got {lap}"));
        }
        if n == 0 {
            return invalid("n must be positive");
        }
        let theta = droplet.nearest_boundary_point(p).theta();
        Ok(RescaleFrame { center: p, theta, scale: (n as f64 * lap).sqrt(), droplet: *droplet })
    }

    /// `e^{iθ}`.
    pub fn phase(&self) -> Complex64 {
        Complex64::from_polar(1.0, self.theta)
    }

    pub fn forward(&self, zeta: Complex64) -> Complex64 {
        self.phase().conj() * (zeta - self.center) * self.scale
    }

    pub fn inverse(&self, z: Complex64) -> Complex64 {
        self.center + self.phase() * z / self.scale
    }
}

/// `R_n(z) = bfR_n(ζ)/(nΔQ(p))`.
pub fn rescaled_one_point(km: &KernelModel, frame: &RescaleFrame, z: Complex64) -> f64 {
    km.one_point(frame.inverse(z)) / frame.scale.powi(2)
}

/// `K_n(z,w) = bfK_n(ζ,η)/(nΔQ(p))`.
pub fn rescaled_kernel(km: &KernelModel, frame: &RescaleFrame, z: Complex64, w: Complex64) -> Complex64 {
    km.kernel(frame.inverse(z), frame.inverse(w)) / frame.scale.powi(2)
}

/// Berezin kernel `B_n(z,w) = |K_n(z,w)|²/R_n(z)`.
pub fn berezin(km: &KernelModel, frame: &RescaleFrame, z: Complex64, w: Complex64) -> Result<f64> {
    let (zeta, eta) = (frame.inverse(z), frame.inverse(w));
    let ln_r = km.ln_kernel_abs(zeta, zeta);
    if !ln_r.is_finite() {
        return Err(Error::DivisionGuard(format!("one-point function vanishes at rescaled point {z}")));
    }
    Ok((2.0 * km.ln_kernel_abs(zeta, eta) - ln_r).exp() / frame.scale.powi(2))
}

/// `∫ B_n(z,w) dA(w)`, computed in unrescaled coordinates on `grid`.
pub fn berezin_mass(km: &KernelModel, frame: &RescaleFrame, z: Complex64, grid: &Grid2D) -> Result<f64> {
    let zeta = frame.inverse(z);
    let r = km.one_point(zeta);
    if !(r > 0.0) {
        return Err(Error::DivisionGuard(format!("one-point function vanishes at rescaled point {z}")));
    }
    Ok(km.reproducing_integral(zeta, grid)? / r)
}

/// A weighted polynomial `f = Σ c_k φ_k` in a given orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPolynomial {
    pub coeffs: Vec<Complex64>,
}

impl WeightedPolynomial {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        WeightedPolynomial { coeffs }
    }

    /// Coefficients uniform on the unit sphere of `ℂ^n`, so `‖f‖ = 1`.
    pub fn random(n: usize, rng: &mut impl Rng) -> Self {
        let mut c: Vec<Complex64> =
            (0..n).map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
        let norm = c.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        c.iter_mut().for_each(|x| *x /= norm);
        WeightedPolynomial { coeffs: c }
    }

    pub fn scaled(&self, s: f64) -> Self {
        WeightedPolynomial { coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    pub fn value(&self, basis: &WeightedBasis, z: Complex64) -> Complex64 {
        basis.eval_all(z).iter().zip(&self.coeffs).map(|(p, c)| p * c).sum()
    }

    /// `|∇|f||(ζ) = |p′ − n ∂Q · p| e^{−nQ/2}`.
    pub fn grad_abs(&self, basis: &WeightedBasis, z: Complex64) -> f64 {
        let v = basis.eval_with_derivative(z);
        let f: Complex64 = v.phi.iter().zip(&self.coeffs).map(|(p, c)| p * c).sum();
        let df: Complex64 = v.dphi.iter().zip(&self.coeffs).map(|(p, c)| p * c).sum();
        (df - basis.n() as f64 * basis.potential().d_holomorphic(z) * f).norm()
    }

    /// `sup_S |f|`: dense droplet grid and boundary sampling, refined by
    /// local pattern search around the best candidates.
    pub fn sup_on_droplet(&self, basis: &WeightedBasis, droplet: &Droplet) -> Result<SupNorm> {
        let n = basis.n();
        let nr = 24 + 2 * (n as f64).sqrt() as usize;
        let nt = (4 * n + 64).max(128);
        let mut cands: Vec<(f64, Complex64)> = droplet
            .grid(nr, nt)?
            .nodes
            .into_iter()
            .chain((0..nt).map(|k| droplet.boundary_point(TAU * k as f64 / nt as f64).point))
            .map(|z| (self.value(basis, z).norm(), z))
            .collect();
        cands.sort_by(|a, b| b.0.total_cmp(&a.0));
        cands.truncate(8);
        let step0 = 2.0 * droplet.extent() / nt.max(nr) as f64;
        let mut best = cands[0];
        for &(v, z) in &cands {
            let r = self.refine(basis, droplet, z, v, step0);
            if r.0 > best.0 {
                best = r;
            }
        }
        Ok(SupNorm { value: best.0, at: best.1 })
    }

    fn refine(
        &self,
        basis: &WeightedBasis,
        droplet: &Droplet,
        mut z: Complex64,
        mut v: f64,
        mut step: f64,
    ) -> (f64, Complex64) {
        let project = |w: Complex64| {
            if droplet.contains(w) {
                w
            } else {
                droplet.nearest_boundary_point(w).point
            }
        };
        while step > 1e-10 {
            let mut moved = false;
            for k in 0..8 {
                let cand = project(z + Complex64::from_polar(step, TAU * k as f64 / 8.0));
                let cv = self.value(basis, cand).norm();
                if cv > v {
                    v = cv;
                    z = cand;
                    moved = true;
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
        (v, z)
    }
}

/// Location and value of an estimated supremum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupNorm {
    pub value: f64,
    pub at: Complex64,
}

/// `|f(ζ)|² / (n ∫_{D(ζ, c/√n)} |f|² dA)`; bounded in `n` by the
/// sub-mean-value property of weighted polynomials.
pub fn sub_mean_value_ratio(f: &WeightedPolynomial, basis: &WeightedBasis, z: Complex64, c: f64) -> Result<f64> {
    let n = basis.n() as f64;
    let grid = polar_grid_centered(z, c / n.sqrt(), 24, 48)?;
    let local = grid.integrate_real(|w| f.value(basis, w).norm_sqr())?;
    Ok(f.value(basis, z).norm_sqr() / (n * local))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{droplet_ellipse, solve_droplet_radial};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ln_factorial(k: usize) -> f64 {
        (1..=k).map(|j| (j as f64).ln()).sum()
    }

    #[test]
    fn ginibre_norms() {
        let b = WeightedBasis::build(&Potential::ginibre(), 50).unwrap();
        let ln_h = b.ln_norms().unwrap();
        for (k, h) in ln_h.iter().enumerate().take(21) {
            let exact = ln_factorial(k) - (k + 1) as f64 * 50f64.ln();
            assert!((h - exact).abs() < 1e-10, "k={k}");
        }
    }

    #[test]
    fn mittag_leffler_norms() {
        // ∫ r^{2k} e^{−n r⁴} 2r dr = Γ((k+1)/2) / (2 n^{(k+1)/2})
        let n = 30;
        let b = WeightedBasis::build(&Potential::mittag_leffler(2.0).unwrap(), n).unwrap();
        for k in [0usize, 1, 7, 29] {
            let s = (k + 1) as f64 / 2.0;
            let exact = ln_gamma_half_integer(k + 1) - 2f64.ln() - s * (n as f64).ln();
            assert!((b.ln_norms().unwrap()[k] - exact).abs() < 1e-10, "k={k}");
        }
    }

    /// `ln Γ(m/2)` for a positive integer `m`.
    fn ln_gamma_half_integer(m: usize) -> f64 {
        if m % 2 == 0 {
            ln_factorial(m / 2 - 1)
        } else {
            // Γ(j + 1/2) = (2j)! √π / (4^j j!)
            let j = (m - 1) / 2;
            ln_factorial(2 * j) + 0.5 * std::f64::consts::PI.ln() - j as f64 * 4f64.ln() - ln_factorial(j)
        }
    }

    #[test]
    fn single_element_basis() {
        let b = WeightedBasis::build(&Potential::ginibre(), 1).unwrap();
        let z = c(0.3, 0.2);
        let v = b.eval_all(z);
        assert_eq!(v.len(), 1);
        assert!((v[0].re - (-z.norm_sqr() / 2.0).exp()).abs() < 1e-14);
    }

    #[test]
    fn ginibre_diagonal_at_origin() {
        let km = KernelModel::build(&Potential::ginibre(), 400).unwrap();
        assert!((km.one_point(c(0.0, 0.0)) / 400.0 - 1.0).abs() < 1e-8);
    }

    #[test]
    fn ellipse_gram_is_orthonormal() {
        let pot = Potential::ellipse(0.5).unwrap();
        let b = WeightedBasis::build(&pot, 16).unwrap();
        assert!(!b.is_radial());
        let g = b.grid().unwrap().clone();
        assert!(b.orthonormality_defect(&g) < 1e-8);
        // a finer grid certifies that the quadrature itself is converged
        let fine = droplet_ellipse(0.5).unwrap().dilated_grid(5.0 / 4.0, 300, 512).unwrap();
        assert!(b.orthonormality_defect(&fine) < 1e-8);
    }

    #[test]
    fn gram_path_agrees_with_radial_path() {
        let pot = Potential::ginibre();
        let d = solve_droplet_radial(&pot).unwrap();
        let radial = KernelModel::build(&pot, 20).unwrap();
        let gram = KernelModel::new(WeightedBasis::build_gram(&pot, 20, default_grid(&d, 20).unwrap()).unwrap());
        for (z, w) in [(c(0.1, 0.2), c(-0.3, 0.5)), (c(0.9, 0.0), c(0.8, 0.3)), (c(1.2, -0.4), c(0.0, 0.0))] {
            let (a, b) = (radial.kernel(z, w), gram.kernel(z, w));
            assert!((a - b).norm() < 1e-8 * a.norm().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn hermitian_and_reproducing() {
        for pot in [Potential::ginibre(), Potential::ellipse(0.5).unwrap()] {
            let n = 24;
            let km = KernelModel::build(&pot, n).unwrap();
            let d = crate::equilibrium::droplet_for(&pot).unwrap();
            let grid = km.mass_grid(&d).unwrap();
            for (z, w) in [(c(0.1, 0.2), c(-0.3, 0.5)), (c(0.7, -0.1), c(0.2, 0.2))] {
                let (a, b) = (km.kernel(z, w), km.kernel(w, z).conj());
                assert!((a - b).norm() <= 1e-10 * a.norm());
                let r = km.one_point(z);
                assert!((km.reproducing_integral(z, &grid).unwrap() / r - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn frames() {
        let pot = Potential::ginibre();
        let d = solve_droplet_radial(&pot).unwrap();
        let f = RescaleFrame::new(&pot, &d, c(1.0, 0.0), 100).unwrap();
        assert!(f.theta.abs() < 1e-15 && (f.scale - 10.0).abs() < 1e-14);
        let f = RescaleFrame::new(&pot, &d, c(0.0, 1.0), 100).unwrap();
        assert!((f.theta - std::f64::consts::FRAC_PI_2).abs() < 1e-14);
        let z = c(0.37, -0.81);
        assert!((f.inverse(f.forward(z)) - z).norm() < 1e-14);
    }

    #[test]
    fn gradient_formula_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for pot in [Potential::ginibre(), Potential::ellipse(0.5).unwrap()] {
            let b = WeightedBasis::build(&pot, 12).unwrap();
            let f = WeightedPolynomial::random(12, &mut rng);
            let z = c(0.31, -0.22);
            let h = 1e-6;
            let abs = |w: Complex64| f.value(&b, w).norm();
            let gx = (abs(z + h) - abs(z - h)) / (2.0 * h);
            let gy = (abs(z + c(0.0, h)) - abs(z - c(0.0, h))) / (2.0 * h);
            let fd = (gx * gx + gy * gy).sqrt();
            assert!((f.grad_abs(&b, z) - fd).abs() < 1e-5 * fd.max(1.0));
        }
    }

    #[test]
    fn berezin_guard() {
        // the radial path works in the log domain and never underflows
        let pot = Potential::ginibre();
        let d = solve_droplet_radial(&pot).unwrap();
        let km = KernelModel::build(&pot, 10).unwrap();
        let f = RescaleFrame::new(&pot, &d, c(0.0, 0.0), 10).unwrap();
        assert!(berezin(&km, &f, c(1e3, 0.0), c(1e3, 0.1)).unwrap().is_finite());
        let pot = Potential::ellipse(0.5).unwrap();
        let d = droplet_ellipse(0.5).unwrap();
        let km = KernelModel::build(&pot, 10).unwrap();
        let f = RescaleFrame::new(&pot, &d, c(0.0, 0.0), 10).unwrap();
        assert!(matches!(berezin(&km, &f, c(1e6, 0.0), c(0.0, 0.0)), Err(Error::DivisionGuard(_))));
        assert!(berezin(&km, &f, c(0.5, 0.0), c(0.0, 0.0)).unwrap() >= 0.0);
    }

    #[test]
    fn diagonal_cache_is_transparent() {
        let km = KernelModel::build(&Potential::ginibre(), 30).unwrap().with_cache(CachePolicy::Diagonal);
        let z = c(0.2, 0.4);
        let a = km.one_point(z);
        assert_eq!(a, km.one_point(z));
        assert_eq!(a, km.clone().one_point(z));
    }
}
