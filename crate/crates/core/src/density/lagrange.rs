use std::f64::consts::{E, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{droplet_for, Droplet};
use crate::error::{invalid, Error, Result};
use crate::fekete::Configuration;
use crate::kernels::{default_grid, WeightedBasis, WeightedPolynomial};
use crate::potential::Potential;
use crate::quadrature::{pairwise_sum, Grid2D};
use crate::Complex64;

/// Weighted Lagrange polynomials
/// `ℓ_j(ζ) = Π_{i≠j}(ζ−ζ_i)/(ζ_j−ζ_i) · e^{−n(Q(ζ)−Q(ζ_j))/2}`,
/// evaluated through logarithms.
#[derive(Debug, Clone)]
pub struct LagrangeBasis {
    pot: Potential,
    nodes: Vec<Complex64>,
    ln_denom: Vec<Complex64>,
    q: Vec<f64>,
}

impl LagrangeBasis {
    pub fn new(pot: &Potential, cfg: &Configuration) -> Result<Self> {
        cfg.validate()?;
        if cfg.n() == 0 {
            return invalid("Lagrange basis needs at least one node");
        }
        let nodes = cfg.points.clone();
        let ln_denom = nodes
            .iter()
            .enumerate()
            .map(|(j, &z)| nodes.iter().enumerate().filter(|&(i, _)| i != j).map(|(_, &w)| (z - w).ln()).sum())
            .collect();
        let q = nodes.iter().map(|&z| pot.eval(z)).collect::<Result<Vec<f64>>>()?;
        Ok(LagrangeBasis { pot: pot.clone(), nodes, ln_denom, q })
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Complex64] {
        &self.nodes
    }

    fn node_at(&self, z: Complex64) -> Option<usize> {
        self.nodes.iter().position(|&w| w == z)
    }

    /// All `ℓ_j(ζ)`.
    pub fn values(&self, z: Complex64) -> Vec<Complex64> {
        let n = self.n();
        if let Some(k) = self.node_at(z) {
            let mut out = vec![Complex64::new(0.0, 0.0); n];
            out[k] = Complex64::new(1.0, 0.0);
            return out;
        }
        let logs: Vec<Complex64> = self.nodes.iter().map(|&w| (z - w).ln()).collect();
        let total: Complex64 = logs.iter().sum();
        let qz = 0.5 * n as f64 * self.pot.value(z);
        (0..n).map(|j| (total - logs[j] - self.ln_denom[j] - qz + 0.5 * n as f64 * self.q[j]).exp()).collect()
    }

    /// All `|ℓ_j(ζ)|`.
    pub fn abs_values(&self, z: Complex64) -> Vec<f64> {
        let n = self.n();
        if let Some(k) = self.node_at(z) {
            let mut out = vec![0.0; n];
            out[k] = 1.0;
            return out;
        }
        let logs: Vec<f64> = self.nodes.iter().map(|&w| (z - w).norm().ln()).collect();
        let total: f64 = logs.iter().sum();
        let qz = 0.5 * n as f64 * self.pot.value(z);
        (0..n).map(|j| (total - logs[j] - self.ln_denom[j].re - qz + 0.5 * n as f64 * self.q[j]).exp()).collect()
    }

    pub fn value(&self, j: usize, z: Complex64) -> Complex64 {
        self.values(z)[j]
    }

    /// `max_j sup |ℓ_j|` over the droplet dilated by `2/√n`: a dense grid
    /// followed by local refinement of the best candidates.
    pub fn sup_estimate(&self, droplet: &Droplet) -> Result<LagrangeSup> {
        let n = self.n();
        let nf = n as f64;
        let nr = 40 + (8.0 * nf.sqrt()) as usize;
        let nt = 8 * n + 128;
        let grid = droplet.dilated_grid(2.0 / nf.sqrt(), nr, nt)?;
        let mut cands: Vec<(f64, usize, Complex64)> = grid
            .nodes
            .par_iter()
            .map(|&z| {
                let v = self.abs_values(z);
                let (j, m) = v.iter().enumerate().fold((0, 0.0), |acc, (j, &x)| if x > acc.1 { (j, x) } else { acc });
                (m, j, z)
            })
            .collect();
        cands.sort_by(|a, b| b.0.total_cmp(&a.0));
        cands.truncate(24);
        let step0 = 0.5 / nf.sqrt();
        let best = cands
            .par_iter()
            .map(|&(v, j, z)| {
                let f = |w: Complex64| self.abs_values(w)[j];
                let (v, z) = climb(f, z, v, step0, |w| w);
                (v, j, z)
            })
            .reduce(
                || (0.0, 0, Complex64::new(0.0, 0.0)),
                |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
            );
        Ok(LagrangeSup { max: best.0, node: best.1, at: best.2 })
    }
}

/// Location of the largest Lagrange polynomial value found.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagrangeSup {
    pub max: f64,
    pub node: usize,
    pub at: Complex64,
}

/// Compass search maximizing `f`, with `project` mapping trial points
/// back into the admissible set.
fn climb(
    f: impl Fn(Complex64) -> f64,
    mut z: Complex64,
    mut v: f64,
    mut step: f64,
    project: impl Fn(Complex64) -> Complex64,
) -> (f64, Complex64) {
    while step > 1e-10 {
        let mut moved = false;
        for k in 0..8 {
            let w = project(z + Complex64::from_polar(step, TAU * k as f64 / 8.0));
            let fw = f(w);
            if fw > v {
                v = fw;
                z = w;
                moved = true;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    (v, z)
}

fn into_droplet(droplet: &Droplet) -> impl Fn(Complex64) -> Complex64 + '_ {
    move |w| if droplet.contains(w) { w } else { droplet.nearest_boundary_point(w).point }
}

/// `max_{ζ∈S} |∇|f|(ζ)| / (√(e·nΔQ(ζ))·‖f‖_{L∞(S)})`.
pub fn bernstein_ratio(f: &WeightedPolynomial, basis: &WeightedBasis, droplet: &Droplet) -> Result<f64> {
    let pot = basis.potential();
    let n = basis.n();
    let sup = f.sup_on_droplet(basis, droplet)?.value;
    if !(sup > 0.0) {
        return invalid("weighted polynomial vanishes on the droplet");
    }
    let ratio = |z: Complex64| f.grad_abs(basis, z) / ((E * n as f64 * pot.laplacian_unchecked(z)).sqrt() * sup);
    let nr = 24 + 2 * (n as f64).sqrt() as usize;
    let nt = (4 * n + 64).max(128);
    let mut cands: Vec<(f64, Complex64)> = droplet
        .grid(nr, nt)?
        .nodes
        .into_iter()
        .chain((0..nt).map(|k| droplet.boundary_point(TAU * k as f64 / nt as f64).point))
        .map(|z| (ratio(z), z))
        .collect();
    cands.sort_by(|a, b| b.0.total_cmp(&a.0));
    cands.truncate(6);
    let step0 = droplet.extent() / nt as f64;
    let best = cands.iter().map(|&(v, z)| climb(ratio, z, v, step0, into_droplet(droplet)).0).fold(0.0, f64::max);
    if !best.is_finite() {
        return Err(Error::IntegrationFailure("non-finite Bernstein ratio".into()));
    }
    Ok(best)
}

/// Bernstein ratios of random unit-norm weighted polynomials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernsteinReport {
    pub n: usize,
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
}

pub fn bernstein_check(basis: &WeightedBasis, droplet: &Droplet, samples: usize, seed: u64) -> Result<BernsteinReport> {
    let ratios = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let f = WeightedPolynomial::random(basis.n(), &mut rng);
            bernstein_ratio(&f, basis, droplet)
        })
        .collect::<Result<Vec<f64>>>()?;
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok(BernsteinReport { n: basis.n(), ratios, max_ratio })
}

/// Comparison of `sup_S |f|` with the largest value found outside `S`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxPrinciple {
    pub inside: f64,
    pub outside: f64,
    pub holds: bool,
}

/// Samples `|f|` on curves parallel to `∂S` at rescaled offsets up to twice
/// the droplet's extent and compares with `sup_S |f|` (relative slack `1e−6`).
pub fn max_principle_check(f: &WeightedPolynomial, basis: &WeightedBasis, droplet: &Droplet) -> Result<MaxPrinciple> {
    let n = basis.n();
    let s = 1.0 / (n as f64).sqrt();
    let inside = f.sup_on_droplet(basis, droplet)?.value;
    let offsets = [0.05 * s, 0.25 * s, 0.5 * s, s, 2.0 * s, 4.0 * s, 0.5 * droplet.extent(), droplet.extent()];
    let nt = (8 * n + 128).max(256);
    let outside = offsets
        .iter()
        .flat_map(|&t| {
            (0..nt).map(move |k| {
                let b = droplet.boundary_point(TAU * k as f64 / nt as f64);
                b.point + b.normal * t
            })
        })
        .map(|z| f.value(basis, z).norm())
        .fold(0.0, f64::max);
    Ok(MaxPrinciple { inside, outside, holds: outside <= inside * (1.0 + 1e-6) })
}

fn random_vector(len: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    (0..len).map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect()
}

/// Measured constants for the interpolation family built from a
/// configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolationCertificate {
    pub eps: f64,
    /// Degree `εn` of the auxiliary kernel.
    pub m: usize,
    /// `‖f‖²·n/Σ|c_j|²` per trial.
    pub constants: Vec<f64>,
    pub constant: f64,
    /// `max |f(ζ_j) − c_j| / max |c_j|` over trials.
    pub interpolation_error: f64,
    /// `min_j bfR_{εn}(ζ_j)/(εn)`.
    pub min_node_ratio: f64,
}

/// Interpolates random data with `L_j = (bfK_{εn}(ζ,ζ_j)/bfR_{εn}(ζ_j))²·ℓ_j`
/// and measures `‖Σ c_j L_j‖²·n/Σ|c_j|²`.
pub fn interpolation_certificate(
    pot: &Potential,
    cfg: &Configuration,
    eps: f64,
    trials: usize,
    seed: u64,
) -> Result<InterpolationCertificate> {
    if !(eps > 0.0) {
        return invalid(format!("ε must be positive, got {eps}"));
    }
    if trials == 0 {
        return invalid("need at least one trial");
    }
    let n = cfg.n();
    let lag = LagrangeBasis::new(pot, cfg)?;
    let m = ((eps * n as f64).round() as usize).max(1);
    let basis = WeightedBasis::build(pot, m)?;
    let node_phi: Vec<Vec<Complex64>> = cfg.points.iter().map(|&z| basis.eval_all(z)).collect();
    let node_r: Vec<f64> = node_phi.iter().map(|v| v.iter().map(|x| x.norm_sqr()).sum()).collect();
    if let Some(j) = node_r.iter().position(|&r| !(r > 0.0)) {
        return Err(Error::Certificate(format!("one-point function of degree {m} vanishes at node {j}")));
    }
    let min_node_ratio = node_r.iter().copied().fold(f64::INFINITY, f64::min) / m as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<Vec<Complex64>> = (0..trials).map(|_| random_vector(n, &mut rng)).collect();
    let eval = |z: Complex64| -> Vec<Complex64> {
        let phi = basis.eval_all(z);
        let ell = lag.values(z);
        let ls: Vec<Complex64> = (0..n)
            .map(|j| {
                let k: Complex64 = phi.iter().zip(&node_phi[j]).map(|(a, b)| a * b.conj()).sum();
                let r = k / node_r[j];
                r * r * ell[j]
            })
            .collect();
        coeffs.iter().map(|c| c.iter().zip(&ls).map(|(a, b)| a * b).sum()).collect()
    };
    let mut interpolation_error: f64 = 0.0;
    for (k, &z) in cfg.points.iter().enumerate() {
        for (t, v) in eval(z).into_iter().enumerate() {
            let scale = coeffs[t].iter().map(|c| c.norm()).fold(0.0, f64::max);
            interpolation_error = interpolation_error.max((v - coeffs[t][k]).norm() / scale);
        }
    }
    let rho = 1.0 + 2.0 * eps;
    let grid = default_grid(&droplet_for(pot)?, (rho * n as f64).round() as usize)?;
    let norms = integrate_trials(&grid, trials, |z| eval(z).into_iter().map(|v| v.norm_sqr()).collect())?;
    let constants: Vec<f64> = norms
        .iter()
        .zip(&coeffs)
        .map(|(nrm, c)| nrm * n as f64 / c.iter().map(|x| x.norm_sqr()).sum::<f64>())
        .collect();
    let constant = constants.iter().copied().fold(0.0, f64::max);
    Ok(InterpolationCertificate { eps, m, constants, constant, interpolation_error, min_node_ratio })
}

/// `∫ g_t dA` for each trial `t`, with node contributions summed in order.
fn integrate_trials(grid: &Grid2D, trials: usize, g: impl Fn(Complex64) -> Vec<f64> + Sync) -> Result<Vec<f64>> {
    let rows: Vec<Vec<f64>> = grid
        .nodes
        .par_iter()
        .zip(grid.weights.par_iter())
        .map(|(&z, &w)| g(z).into_iter().map(|v| v * w).collect())
        .collect();
    (0..trials)
        .map(|t| {
            let col: Vec<f64> = rows.iter().map(|r| r[t]).collect();
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::IntegrationFailure("non-finite integrand in certificate".into()));
            }
            Ok(pairwise_sum(&col))
        })
        .collect()
}

/// Measured sampling constants for `Pol_{nρ}` on a separated configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MFamilyCertificate {
    pub rho: f64,
    pub s: f64,
    pub m: usize,
    /// `∫_{S_s}|f|² / ((1/n)Σ_j|f(ζ_j)|²)` per trial.
    pub constants: Vec<f64>,
    pub constant: f64,
    /// `s²·(1/n)Σ_j|f(ζ_j)|² / ∫_{S_s}|f|²` per trial.
    pub converse_constants: Vec<f64>,
    pub converse_constant: f64,
}

/// Samples random `f ∈ Pol_{nρ}` and measures both sides of the sampling
/// inequality on `S_s = S + D(0, s/√n)`. Requires the configuration to be
/// `2s/√n`-separated.
pub fn m_family_certificate(
    pot: &Potential,
    cfg: &Configuration,
    rho: f64,
    s: f64,
    trials: usize,
    seed: u64,
) -> Result<MFamilyCertificate> {
    if !(rho > 0.0 && s > 0.0) || trials == 0 {
        return invalid("ρ and s must be positive and trials nonzero");
    }
    let n = cfg.n();
    let nf = n as f64;
    let min_dist = cfg.min_distance();
    if min_dist < 2.0 * s / nf.sqrt() {
        return invalid(format!("configuration is not {}-separated: minimal distance {min_dist:.4e}", 2.0 * s));
    }
    let m = ((rho * nf).round() as usize).max(1);
    let basis = WeightedBasis::build(pot, m)?;
    let droplet = droplet_for(pot)?;
    let margin = s / nf.sqrt();
    let full = droplet.dilated_grid(3.0 * margin, 200, (4 * m + 64).max(256))?;
    let (nodes, weights): (Vec<Complex64>, Vec<f64>) = full
        .nodes
        .iter()
        .zip(&full.weights)
        .filter(|(z, _)| droplet.contains(**z) || droplet.distance_to_boundary(**z) <= margin)
        .map(|(z, w)| (*z, *w))
        .unzip();
    let grid = Grid2D { nodes, weights, layout: full.layout };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let polys: Vec<WeightedPolynomial> = (0..trials).map(|_| WeightedPolynomial::random(m, &mut rng)).collect();
    let integrals = integrate_trials(&grid, trials, |z| {
        let phi = basis.eval_all(z);
        polys.iter().map(|f| f.coeffs.iter().zip(&phi).map(|(c, p)| c * p).sum::<Complex64>().norm_sqr()).collect()
    })?;
    let mut constants = Vec::with_capacity(trials);
    let mut converse_constants = Vec::with_capacity(trials);
    for (f, int) in polys.iter().zip(&integrals) {
        let avg = cfg.points.iter().map(|&z| f.value(&basis, z).norm_sqr()).sum::<f64>() / nf;
        constants.push(if avg > 0.0 { int / avg } else { f64::INFINITY });
        converse_constants.push(s * s * avg / int);
    }
    let constant = constants.iter().copied().fold(0.0, f64::max);
    let converse_constant = converse_constants.iter().copied().fold(0.0, f64::max);
    Ok(MFamilyCertificate { rho, s, m, constants, constant, converse_constants, converse_constant })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::solve_droplet_radial;
    use crate::fekete::{solve_fekete, SolverConfig};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn cardinality() {
        let pot = Potential::ellipse(0.4).unwrap();
        let pts: Vec<Complex64> =
            (0..12).map(|k| Complex64::from_polar(0.3 + 0.05 * k as f64, 2.1 * k as f64)).collect();
        let lag = LagrangeBasis::new(&pot, &Configuration::new(pts.clone())).unwrap();
        for (k, &z) in pts.iter().enumerate() {
            // slightly off the node exercises the logarithmic path
            let v = lag.values(z + 1e-13);
            for (j, x) in v.iter().enumerate() {
                let target = if j == k { 1.0 } else { 0.0 };
                assert!((x - target).norm() < 1e-10, "{j},{k}: {x}");
            }
        }
        let w = c(0.2, -0.1);
        let abs: Vec<f64> = lag.values(w).iter().map(|v| v.norm()).collect();
        for (a, b) in abs.iter().zip(lag.abs_values(w)) {
            assert!((a - b).abs() < 1e-12 * a.max(1.0));
        }
    }

    #[test]
    fn two_point_oracle_sup_is_attained_at_nodes() {
        let pot = Potential::ginibre();
        let d = solve_droplet_radial(&pot).unwrap();
        let lag = LagrangeBasis::new(&pot, &Configuration::new(vec![c(0.5, 0.0), c(-0.5, 0.0)])).unwrap();
        let sup = lag.sup_estimate(&d).unwrap();
        assert!((sup.max - 1.0).abs() < 1e-9, "{sup:?}");
        assert!((sup.at - lag.nodes()[sup.node]).norm() < 1e-4);
    }

    #[test]
    fn coincident_nodes_rejected() {
        let cfg = Configuration::new(vec![c(0.1, 0.0), c(0.1, 0.0)]);
        assert!(matches!(LagrangeBasis::new(&Potential::ginibre(), &cfg), Err(Error::Collision(0, 1))));
    }

    #[test]
    fn bernstein_constant_function() {
        let pot = Potential::ginibre();
        let d = solve_droplet_radial(&pot).unwrap();
        let basis = WeightedBasis::build(&pot, 40).unwrap();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 40];
        coeffs[0] = Complex64::new(1.0, 0.0);
        let r = bernstein_ratio(&WeightedPolynomial::new(coeffs), &basis, &d).unwrap();
        // |∇|φ₀|| = n r |φ₀|, and n r e^{−nr²/2}/√(en) peaks at 1/e
        let exact = (-1f64).exp();
        assert!((r - exact).abs() < 1e-6, "{r} vs {exact}");
        let rep = bernstein_check(&basis, &d, 4, 1).unwrap();
        assert!(rep.max_ratio.is_finite() && rep.max_ratio <= 1.1);
    }

    #[test]
    fn maximum_principle() {
        let pot = Potential::ellipse(0.5).unwrap();
        let d = droplet_for(&pot).unwrap();
        let basis = WeightedBasis::build(&pot, 20).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..3 {
            let f = WeightedPolynomial::random(20, &mut rng);
            let mp = max_principle_check(&f, &basis, &d).unwrap();
            assert!(mp.holds, "{mp:?}");
        }
    }

    #[test]
    fn certificates_on_small_fekete_set() {
        let pot = Potential::ginibre();
        let d = solve_droplet_radial(&pot).unwrap();
        let (cfg, _) =
            solve_fekete(&pot, 40, &SolverConfig { restarts: 2, seed: 5, ..Default::default() }, &d).unwrap();
        let cert = interpolation_certificate(&pot, &cfg, 0.1, 3, 1).unwrap();
        assert!(cert.interpolation_error < 1e-8);
        assert!(cert.constant.is_finite() && cert.constant > 0.0);
        assert!(cert.min_node_ratio > 0.0);
        let mf = m_family_certificate(&pot, &cfg, 0.9, 0.25, 5, 2).unwrap();
        assert!(mf.constant.is_finite() && mf.constant > 0.0);
        assert!(m_family_certificate(&pot, &cfg, 0.9, 10.0, 5, 2).is_err());
    }
}
