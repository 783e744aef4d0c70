//! Discrete logarithmic energy, Fekete configurations and the Coulomb gas.
//!
//! `H_n(ζ) = Σ_{j≠k} log(1/|ζ_j − ζ_k|) + n Σ_j Q(ζ_j)`, with the pair sum
//! over ordered pairs.

mod gas;
mod solver;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{EquilibriumMeasure, Shape};
use crate::error::{invalid, Error, Result};
use crate::potential::{Potential, PotentialSpec};
use crate::quadrature::pairwise_sum;
use crate::Complex64;

pub use gas::{
    metropolis_accept, metropolis_sample, radial_histogram, two_state_ratio, GasChain, GasSample, HistogramBin,
    MetropolisConfig, RadialHistogram,
};
pub use solver::{descend, solve_fekete, DescentRun, SolverConfig, SolverReport};

/// Pair distances below this are treated as collisions.
pub const COLLISION_DISTANCE: f64 = 1e-12;

/// Rows of the pair sums are processed in parallel above this size.
const PARALLEL_THRESHOLD: usize = 128;

/// An `n`-point configuration `{ζ_j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub points: Vec<Complex64>,
    /// Name of the potential the configuration was produced for.
    #[serde(default)]
    pub potential: String,
}

impl Configuration {
    pub fn new(points: Vec<Complex64>) -> Self {
        Configuration { points, potential: String::new() }
    }

    pub fn for_potential(points: Vec<Complex64>, pot: &Potential) -> Self {
        Configuration { points, potential: pot.name() }
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    /// First pair of points closer than [`COLLISION_DISTANCE`].
    pub fn collision(&self) -> Option<(usize, usize)> {
        first_collision(&self.points)
    }

    /// Fails with [`Error::Collision`] unless all points are distinct.
    pub fn validate(&self) -> Result<()> {
        match self.collision() {
            Some((j, k)) => Err(Error::Collision(j, k)),
            None => Ok(()),
        }
    }

    /// Smallest mutual distance (`+∞` for fewer than two points).
    pub fn min_distance(&self) -> f64 {
        nearest_distances(&self.points).into_iter().fold(f64::INFINITY, f64::min)
    }
}

fn first_collision(points: &[Complex64]) -> Option<(usize, usize)> {
    for j in 0..points.len() {
        for k in j + 1..points.len() {
            if (points[j] - points[k]).norm() < COLLISION_DISTANCE {
                return Some((j, k));
            }
        }
    }
    None
}

/// `d_n(ζ_j) = min_{k≠j} |ζ_k − ζ_j|`.
fn nearest_distances(points: &[Complex64]) -> Vec<f64> {
    let row = |j: usize| {
        let z = points[j];
        points.iter().enumerate().filter(|&(k, _)| k != j).map(|(_, w)| (z - w).norm()).fold(f64::INFINITY, f64::min)
    };
    if points.len() >= PARALLEL_THRESHOLD {
        (0..points.len()).into_par_iter().map(row).collect()
    } else {
        (0..points.len()).map(row).collect()
    }
}

/// Value of `H_n` together with a collision flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Energy {
    /// `+∞` when two points coincide.
    pub value: f64,
    pub collision: Option<(usize, usize)>,
}

/// `H_n` for the configuration, with `n` the number of points.
pub fn energy(pot: &Potential, cfg: &Configuration) -> Result<Energy> {
    if let Some(c) = cfg.collision() {
        return Ok(Energy { value: f64::INFINITY, collision: Some(c) });
    }
    Ok(Energy { value: energy_of(pot, &cfg.points)?, collision: None })
}

pub(crate) fn energy_of(pot: &Potential, points: &[Complex64]) -> Result<f64> {
    let n = points.len();
    let row = |j: usize| -> f64 {
        let z = points[j];
        points[j + 1..].iter().map(|w| -(z - w).norm().ln()).sum::<f64>()
    };
    let rows: Vec<f64> =
        if n >= PARALLEL_THRESHOLD { (0..n).into_par_iter().map(row).collect() } else { (0..n).map(row).collect() };
    let mut q = Vec::with_capacity(n);
    for &z in points {
        q.push(pot.eval(z)?);
    }
    Ok(2.0 * pairwise_sum(&rows) + n as f64 * pairwise_sum(&q))
}

/// Per-point gradient `−2 Σ_{k≠j} (ζ_j−ζ_k)/|ζ_j−ζ_k|² + n ∇Q(ζ_j)`,
/// complex-encoded as `∂_x + i∂_y`.
pub fn energy_gradient(pot: &Potential, cfg: &Configuration) -> Result<Vec<Complex64>> {
    cfg.validate()?;
    gradient_of(pot, &cfg.points)
}

pub(crate) fn gradient_of(pot: &Potential, points: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = points.len();
    let nf = n as f64;
    let row = |j: usize| -> Result<Complex64> {
        let z = points[j];
        let mut s = Complex64::new(0.0, 0.0);
        for (k, &w) in points.iter().enumerate() {
            if k != j {
                let d = z - w;
                s += d / d.norm_sqr();
            }
        }
        Ok(-2.0 * s + nf * pot.grad(z)?)
    };
    if n >= PARALLEL_THRESHOLD {
        (0..n).into_par_iter().map(row).collect()
    } else {
        (0..n).map(row).collect()
    }
}

/// `H_n(ζ + s) − H_n(ζ)` computed from the displacements, free of the
/// cancellation in a difference of two large energies.
pub(crate) fn energy_increment(pot: &Potential, points: &[Complex64], step: &[Complex64]) -> Result<f64> {
    let n = points.len();
    let row = |j: usize| -> f64 {
        let (z, s) = (points[j], step[j]);
        let mut acc = 0.0;
        for k in j + 1..n {
            let old = z - points[k];
            let ds = s - step[k];
            let new = old + ds;
            // ln(|old|²/|new|²) = −ln(1 + (|new|² − |old|²)/|old|²)
            let grow = (ds * (new + old).conj()).re / old.norm_sqr();
            acc -= grow.ln_1p();
        }
        acc
    };
    let rows: Vec<f64> =
        if n >= PARALLEL_THRESHOLD { (0..n).into_par_iter().map(row).collect() } else { (0..n).map(row).collect() };
    let mut dq = Vec::with_capacity(n);
    for (&z, &s) in points.iter().zip(step) {
        dq.push(q_increment(pot, z, s)?);
    }
    Ok(pairwise_sum(&rows) + n as f64 * pairwise_sum(&dq))
}

/// `Q(z + s) − Q(z)`. Simpson's rule on the directional derivative is exact
/// for the polynomial built-ins and avoids cancellation.
fn q_increment(pot: &Potential, z: Complex64, s: Complex64) -> Result<f64> {
    let polynomial = match pot.spec() {
        Some(PotentialSpec::Ginibre) | Some(PotentialSpec::Ellipse { .. }) => true,
        Some(PotentialSpec::MittagLeffler { p }) => p == 1.0 || p == 2.0,
        None => false,
    };
    let end = z + s;
    if !pot.in_domain(end) {
        return Err(Error::OutOfDomain { re: end.re, im: end.im });
    }
    if !polynomial {
        return Ok(pot.eval(end)? - pot.eval(z)?);
    }
    let dir = |w: Complex64| -> Result<f64> { Ok((pot.grad(w)?.conj() * s).re) };
    Ok((dir(z)? + 4.0 * dir(z + 0.5 * s)? + dir(end)?) / 6.0)
}

/// Separation data of a configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Separation {
    /// `Δ_n = min_j √(nΔQ(ζ_j)) d_n(ζ_j)`.
    pub delta: f64,
    /// Index attaining the minimum.
    pub argmin: usize,
    /// `d_n(ζ_j)` for each point.
    pub nearest: Vec<f64>,
}

pub fn separation(pot: &Potential, cfg: &Configuration) -> Result<Separation> {
    let n = cfg.n();
    if n < 2 {
        return invalid(format!("separation needs at least two points, got {n}"));
    }
    let nearest = nearest_distances(&cfg.points);
    let mut delta = f64::INFINITY;
    let mut argmin = 0;
    for (j, (&z, &d)) in cfg.points.iter().zip(&nearest).enumerate() {
        let lap = pot.laplacian(z)?;
        let v = (n as f64 * lap).sqrt() * d;
        if v < delta {
            delta = v;
            argmin = j;
        }
    }
    Ok(Separation { delta, argmin, nearest })
}

/// Comparison of the normalized counting measure with `σ` on level bands
/// of the droplet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingReport {
    /// Band edges in the droplet's level coordinate; the last band also
    /// collects points outside `S`.
    pub edges: Vec<f64>,
    pub empirical: Vec<f64>,
    pub expected: Vec<f64>,
    pub max_discrepancy: f64,
}

pub fn counting_vs_sigma(cfg: &Configuration, mu: &EquilibriumMeasure, bins: usize) -> Result<CountingReport> {
    if bins == 0 {
        return invalid("counting needs at least one bin");
    }
    let droplet = mu.droplet();
    let edges: Vec<f64> = (0..=bins).map(|k| k as f64 / bins as f64).collect();
    let mut empirical = vec![0.0; bins];
    let n = cfg.n().max(1) as f64;
    for &z in &cfg.points {
        let b = ((droplet.gauge(z) * bins as f64) as usize).min(bins - 1);
        empirical[b] += 1.0 / n;
    }
    let ntheta = if matches!(droplet.shape, Shape::Ellipse { .. }) { 256 } else { 64 };
    let expected = edges
        .windows(2)
        .map(|e| droplet.band_grid(e[0], e[1], 24, ntheta)?.integrate_real(|z| mu.density(z)))
        .collect::<Result<Vec<f64>>>()?;
    let max_discrepancy = empirical.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(CountingReport { edges, empirical, expected, max_discrepancy })
}

/// `count` independent draws from `σ` by rejection sampling on the
/// droplet's bounding box.
pub fn sample_equilibrium(mu: &EquilibriumMeasure, count: usize, rng: &mut impl Rng) -> Result<Vec<Complex64>> {
    let droplet = mu.droplet();
    let probes = droplet.grid(16, 64)?.nodes.into_iter().chain((0..64).map(|k| {
        let b = droplet.boundary_point(std::f64::consts::TAU * k as f64 / 64.0);
        b.point - b.normal * 1e-9
    }));
    let top = 1.05 * probes.map(|z| mu.density(z)).fold(0.0, f64::max);
    if !(top > 0.0 && top.is_finite()) {
        return Err(Error::Configuration("equilibrium density has no positive maximum".into()));
    }
    let (x0, x1, y0, y1) = droplet.bounding_box();
    let mut out: Vec<Complex64> = Vec::with_capacity(count);
    let mut tries = 0usize;
    while out.len() < count {
        tries += 1;
        if tries > 1000 * (count + 10) {
            return Err(Error::Configuration("rejection sampling of the equilibrium measure stalled".into()));
        }
        let z = Complex64::new(rng.random_range(x0..x1), rng.random_range(y0..y1));
        if rng.random::<f64>() * top < mu.density(z) && out.iter().all(|w| (w - z).norm() >= COLLISION_DISTANCE) {
            out.push(z);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::solve_droplet_radial;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn two_point_oracle() {
        let pot = Potential::ginibre();
        let cfg = Configuration::new(vec![c(0.5, 0.0), c(-0.5, 0.0)]);
        assert!((energy(&pot, &cfg).unwrap().value - 1.0).abs() < 1e-15);
        for g in energy_gradient(&pot, &cfg).unwrap() {
            assert!(g.norm() < 1e-12);
        }
        let s = separation(&pot, &cfg).unwrap();
        assert!((s.delta - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn trivial_cases() {
        let pot = Potential::ginibre();
        let one = Configuration::new(vec![c(0.0, 0.0)]);
        assert_eq!(energy(&pot, &one).unwrap().value, 0.0);
        assert_eq!(energy_gradient(&pot, &one).unwrap()[0], c(0.0, 0.0));
        assert!(separation(&pot, &one).is_err());
        let dup = Configuration::new(vec![c(0.0, 0.0), c(0.0, 0.0)]);
        let e = energy(&pot, &dup).unwrap();
        assert_eq!(e.value, f64::INFINITY);
        assert_eq!(e.collision, Some((0, 1)));
        assert_eq!(energy_gradient(&pot, &dup), Err(Error::Collision(0, 1)));
    }

    #[test]
    fn lattice_separation_unwinds() {
        // square lattice of spacing 1 scaled by 1/√n; ΔQ = 1 for Ginibre
        let n = 49;
        let pts: Vec<Complex64> =
            (0..n).map(|k| c((k % 7) as f64 - 3.0, (k / 7) as f64 - 3.0) / (n as f64).sqrt()).collect();
        let s = separation(&Potential::ginibre(), &Configuration::new(pts)).unwrap();
        assert!((s.delta - 1.0).abs() < 1e-14);
    }

    fn random_config(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let pots = [Potential::ginibre(), Potential::ellipse(0.5).unwrap(), Potential::mittag_leffler(2.0).unwrap()];
        for seed in 0..20u64 {
            let pot = &pots[seed as usize % 3];
            let pts = random_config(12, seed);
            let g = gradient_of(pot, &pts).unwrap();
            let h = 1e-6;
            for j in [0, 5, 11] {
                let mut p = pts.clone();
                let mut fd = c(0.0, 0.0);
                for (dir, unit) in [(c(h, 0.0), c(1.0, 0.0)), (c(0.0, h), c(0.0, 1.0))] {
                    p[j] = pts[j] + dir;
                    let up = energy_of(pot, &p).unwrap();
                    p[j] = pts[j] - dir;
                    let down = energy_of(pot, &p).unwrap();
                    p[j] = pts[j];
                    fd += unit * (up - down) / (2.0 * h);
                }
                assert!((g[j] - fd).norm() <= 1e-5 * g[j].norm().max(1.0), "seed {seed}, point {j}");
            }
        }
    }

    #[test]
    fn increment_matches_difference() {
        for pot in [Potential::ginibre(), Potential::ellipse(0.3).unwrap(), Potential::mittag_leffler(1.5).unwrap()] {
            let pts = random_config(30, 9);
            let step: Vec<Complex64> = random_config(30, 10).into_iter().map(|s| s * 1e-2).collect();
            let moved: Vec<Complex64> = pts.iter().zip(&step).map(|(a, b)| a + b).collect();
            let direct = energy_of(&pot, &moved).unwrap() - energy_of(&pot, &pts).unwrap();
            let inc = energy_increment(&pot, &pts, &step).unwrap();
            assert!((direct - inc).abs() < 1e-10 * direct.abs().max(1.0), "{direct} vs {inc}");
        }
    }

    #[test]
    fn counting_degenerate_and_converged() {
        let pot = Potential::ginibre();
        let mu = EquilibriumMeasure::new(&pot, solve_droplet_radial(&pot).unwrap()).unwrap();
        let one = Configuration::new(vec![c(0.0, 0.0)]);
        let r = counting_vs_sigma(&one, &mu, 10).unwrap();
        assert!(r.max_discrepancy <= 1.0);
        assert!((r.expected.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // a configuration placing the exact σ-mass of each band on it
        let mut pts = Vec::new();
        for k in 0..10 {
            let count = (2 * k + 1) * 2;
            let r = (k as f64 + 0.5) / 10.0;
            pts.extend((0..count).map(|j| Complex64::from_polar(r, j as f64)));
        }
        let r = counting_vs_sigma(&Configuration::new(pts), &mu, 10).unwrap();
        assert!(r.max_discrepancy < 1e-12);
    }

    #[test]
    fn equilibrium_samples_lie_in_droplet() {
        let pot = Potential::ellipse(0.5).unwrap();
        let mu = EquilibriumMeasure::new(&pot, crate::equilibrium::droplet_ellipse(0.5).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = sample_equilibrium(&mu, 500, &mut rng).unwrap();
        assert!(pts.iter().all(|&z| mu.droplet().contains(z)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn permutation_and_rotation_invariance(seed in 0u64..1000, shift in 0usize..15, angle in 0.0f64..std::f64::consts::TAU) {
            let pot = Potential::ginibre();
            let pts = random_config(15, seed);
            let cfg = Configuration::new(pts.clone());
            let mut perm = pts.clone();
            perm.rotate_left(shift);
            let perm = Configuration::new(perm);
            let rot = Configuration::new(pts.iter().map(|z| z * Complex64::from_polar(1.0, angle)).collect());
            let e = energy(&pot, &cfg).unwrap().value;
            prop_assert!((energy(&pot, &perm).unwrap().value - e).abs() < 1e-10 * e.abs().max(1.0));
            prop_assert!((energy(&pot, &rot).unwrap().value - e).abs() < 1e-10 * e.abs().max(1.0));
            prop_assert_eq!(separation(&pot, &cfg).unwrap().delta, separation(&pot, &perm).unwrap().delta);
        }
    }
}
