use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::counting_radius;
use crate::error::{invalid, Error, Result};
use crate::kernels::{KernelModel, WeightedBasis};
use crate::quadrature::{pairwise_sum, polar_grid_centered, Grid2D};
use crate::Complex64;

/// Spectrum of `T_{n,Λ} : f ↦ P_{nρ}[1_{A_n(p,Λ)} f]` on `Pol_{nρ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationSpectrum {
    pub n: usize,
    pub rho: f64,
    /// Dimension `nρ` of the space.
    pub m: usize,
    pub lambda: f64,
    pub p: Complex64,
    /// Eigenvalues in decreasing order.
    pub eigenvalues: Vec<f64>,
    /// `Tr T` from the matrix diagonal.
    pub trace: f64,
    /// `Tr T²` from the matrix entries.
    pub trace_sq: f64,
    /// `∫_{A_n(p,Λ)} bfR_{nρ} dA` on an independent finer grid.
    pub trace_direct: f64,
}

impl ConcentrationSpectrum {
    /// `Σ λ_j`.
    pub fn eigen_trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    /// `Σ λ_j²`.
    pub fn eigen_trace_sq(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l * l).sum()
    }
}

/// Polar grid on `A_n(p,Λ)` resolving products `φ_j conj(φ_k)` of an
/// `m`-dimensional basis; `refine` multiplies both resolutions.
pub fn disk_grid(
    pot: &crate::Potential,
    p: Complex64,
    n: usize,
    lambda: f64,
    m: usize,
    refine: usize,
) -> Result<Grid2D> {
    let r = counting_radius(pot, p, n, lambda)?;
    let refine = refine.max(1);
    polar_grid_centered(p, r, refine * (40 + m / 2), refine * (2 * m + 64))
}

/// Concentration spectrum with automatically sized grids.
///
/// `basis` spans `Pol_m` with `m = round(nρ)`; the disk `A_n(p,Λ)` uses `n`.
pub fn concentration_spectrum(
    basis: &WeightedBasis,
    n: usize,
    rho: f64,
    p: Complex64,
    lambda: f64,
) -> Result<ConcentrationSpectrum> {
    let grid = disk_grid(basis.potential(), p, n, lambda, basis.n(), 1)?;
    concentration_spectrum_on(basis, n, rho, p, lambda, &grid)
}

pub fn concentration_spectrum_on(
    basis: &WeightedBasis,
    n: usize,
    rho: f64,
    p: Complex64,
    lambda: f64,
    grid: &Grid2D,
) -> Result<ConcentrationSpectrum> {
    let m = basis.n();
    if !(rho > 0.0) || (n as f64 * rho).round() as usize != m {
        return invalid(format!("basis dimension {m} does not match nρ = {}", n as f64 * rho));
    }
    // rows √w φ(ζ) split into real and imaginary parts
    let rows: Vec<Vec<Complex64>> = grid
        .nodes
        .par_iter()
        .zip(grid.weights.par_iter())
        .map(|(&z, &w)| basis.eval_all(z).into_iter().map(|v| v * w.sqrt()).collect())
        .collect();
    let re = DMatrix::from_fn(rows.len(), m, |i, k| rows[i][k].re);
    let im = DMatrix::from_fn(rows.len(), m, |i, k| rows[i][k].im);
    drop(rows);
    // A^H A with A = X + iY
    let real = re.transpose() * &re + im.transpose() * &im;
    let imag = re.transpose() * &im - im.transpose() * &re;
    let gram = DMatrix::from_fn(m, m, |j, k| Complex64::new(real[(j, k)], imag[(j, k)]));
    if gram.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::IntegrationFailure("non-finite concentration matrix".into()));
    }
    let trace = (0..m).map(|j| gram[(j, j)].re).sum();
    let trace_sq = gram.iter().map(|v| v.norm_sqr()).sum();
    let eig = SymmetricEigen::try_new(gram, 1e-15, 10_000)
        .ok_or_else(|| Error::EigenSolve(format!("Hermitian eigen-solve did not converge (m={m})")))?;
    let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(|a, b| b.total_cmp(a));
    let fine = disk_grid(basis.potential(), p, n, lambda, m, 2)?;
    let km = KernelModel::new(basis.clone());
    let samples: Vec<f64> =
        fine.nodes.par_iter().zip(fine.weights.par_iter()).map(|(&z, &w)| w * km.one_point(z)).collect();
    let trace_direct = pairwise_sum(&samples);
    Ok(ConcentrationSpectrum { n, rho, m, lambda, p, eigenvalues, trace, trace_sq, trace_direct })
}

/// `Tr(T − T²)/Λ²`.
pub fn trace_defect(spec: &ConcentrationSpectrum) -> f64 {
    (spec.trace - spec.trace_sq) / (spec.lambda * spec.lambda)
}

/// The two eigenvalue-counting inequalities at one level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountingCheck {
    pub level: f64,
    /// `#{λ_j > γ}`.
    pub above: usize,
    /// `Tr T − Tr(T−T²)/(1−γ)`.
    pub lower_bound: f64,
    /// `#{λ_j ≥ δ}`.
    pub at_least: usize,
    /// `Tr T + Tr(T−T²)/δ`.
    pub upper_bound: f64,
    pub holds: bool,
}

/// Checks `#{λ > γ} ≥ Tr T − Tr(T−T²)/(1−γ)` and
/// `#{λ ≥ γ} ≤ Tr T + Tr(T−T²)/γ` for each level `γ ∈ (0,1)`.
pub fn counting_inequalities(spec: &ConcentrationSpectrum, levels: &[f64]) -> Result<Vec<CountingCheck>> {
    let tr = spec.eigen_trace();
    let defect = tr - spec.eigen_trace_sq();
    levels
        .iter()
        .map(|&g| {
            if !(g > 0.0 && g < 1.0) {
                return invalid(format!("counting level must lie in (0, 1), got {g}"));
            }
            let above = spec.eigenvalues.iter().filter(|&&l| l > g).count();
            let at_least = spec.eigenvalues.iter().filter(|&&l| l >= g).count();
            let lower_bound = tr - defect / (1.0 - g);
            let upper_bound = tr + defect / g;
            let slack = 1e-9 * tr.max(1.0);
            let holds = above as f64 >= lower_bound - slack && at_least as f64 <= upper_bound + slack;
            Ok(CountingCheck { level: g, above, lower_bound, at_least, upper_bound, holds })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Potential;

    /// Regularized lower incomplete gamma `P(a, x)` for integer `a`, via
    /// `1 − e^{−x} Σ_{j<a} x^j/j!` summed in the log domain.
    fn reg_gamma(a: usize, x: f64) -> f64 {
        // complementary terms e^{−x} x^j / j!
        let mut ln_t = -x;
        let mut q = 0.0;
        for j in 0..a {
            if j > 0 {
                ln_t += x.ln() - (j as f64).ln();
            }
            q += ln_t.exp();
        }
        1.0 - q
    }

    #[test]
    fn ginibre_center_is_diagonal() {
        // at p=0 the eigenvalues are P(k+1, ρΛ²)
        let pot = Potential::ginibre();
        let (n, lambda) = (60, 4.0);
        let basis = WeightedBasis::build(&pot, n).unwrap();
        let s = concentration_spectrum(&basis, n, 1.0, Complex64::new(0.0, 0.0), lambda).unwrap();
        let mut exact: Vec<f64> = (0..n).map(|k| reg_gamma(k + 1, lambda * lambda)).collect();
        exact.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in s.eigenvalues.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        assert!((s.trace - s.eigen_trace()).abs() < 1e-8);
        assert!((s.trace_sq - s.eigen_trace_sq()).abs() < 1e-8);
        assert!((s.trace - s.trace_direct).abs() < 1e-6 * s.trace);
    }

    #[test]
    fn boundary_spectrum_invariants() {
        let pot = Potential::ginibre();
        let n = 80;
        let basis = WeightedBasis::build(&pot, n).unwrap();
        let s = concentration_spectrum(&basis, n, 1.0, Complex64::new(1.0, 0.0), 5.0).unwrap();
        assert!(s.eigenvalues[0] < 1.0 + 1e-12 && *s.eigenvalues.last().unwrap() > -1e-12);
        assert!((s.trace - s.trace_direct).abs() < 1e-6 * s.trace);
        assert!(trace_defect(&s) >= 0.0);
        let checks = counting_inequalities(&s, &[0.1, 0.5, 0.9]).unwrap();
        assert!(checks.iter().all(|c| c.holds));
    }

    #[test]
    fn rejects_mismatched_dimension() {
        let pot = Potential::ginibre();
        let basis = WeightedBasis::build(&pot, 10).unwrap();
        assert!(concentration_spectrum(&basis, 20, 1.0, Complex64::new(0.0, 0.0), 2.0).is_err());
        assert!(concentration_spectrum(&basis, 20, 0.5, Complex64::new(0.0, 0.0), 2.0).is_ok());
    }
}
