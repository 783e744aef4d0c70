use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{sample_equilibrium, Configuration, COLLISION_DISTANCE};
use crate::equilibrium::{Droplet, EquilibriumMeasure};
use crate::error::{invalid, Result};
use crate::potential::Potential;
use crate::Complex64;

/// The Metropolis rule: accept an energy change `dh` with probability
/// `min(1, e^{−β·dh})`.
pub fn metropolis_accept(beta: f64, dh: f64, rng: &mut impl Rng) -> bool {
    dh <= 0.0 || rng.random::<f64>() < (-beta * dh).exp()
}

/// Parameters of a Boltzmann–Gibbs chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetropolisConfig {
    pub beta: f64,
    /// Sweeps of `n` single-site updates.
    pub sweeps: usize,
    /// Standard deviation of the Gaussian proposal; defaults to
    /// `0.5/√(n·max(β,1))`.
    pub proposal_scale: Option<f64>,
    pub seed: u64,
}

impl Default for MetropolisConfig {
    fn default() -> Self {
        MetropolisConfig { beta: 1.0, sweeps: 1000, proposal_scale: None, seed: 0 }
    }
}

/// A Markov chain on `ℂ^n` with stationary density `∝ e^{−βH_n}`.
#[derive(Debug, Clone)]
pub struct GasChain {
    pot: Potential,
    beta: f64,
    scale: f64,
    points: Vec<Complex64>,
    rng: ChaCha8Rng,
    proposed: u64,
    accepted: u64,
}

impl GasChain {
    /// Starts from an independent sample of the equilibrium measure.
    pub fn new(pot: &Potential, n: usize, droplet: &Droplet, mc: &MetropolisConfig) -> Result<Self> {
        if !(mc.beta > 0.0) {
            return invalid(format!("inverse temperature must be positive, got {}", mc.beta));
        }
        if n == 0 {
            return invalid("n must be at least 1");
        }
        let scale = mc.proposal_scale.unwrap_or(0.5 / (n as f64 * mc.beta.max(1.0)).sqrt());
        if !(scale > 0.0) {
            return invalid("proposal scale must be positive");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
        let mu = EquilibriumMeasure::new(pot, *droplet)?;
        let points = sample_equilibrium(&mu, n, &mut rng)?;
        Ok(GasChain { pot: pot.clone(), beta: mc.beta, scale, points, rng, proposed: 0, accepted: 0 })
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    /// One proposal for the point `j`.
    fn update(&mut self, j: usize) {
        let n = self.points.len() as f64;
        let z = self.points[j];
        let kick = Complex64::new(self.rng.sample(StandardNormal), self.rng.sample(StandardNormal));
        let w = z + kick * self.scale;
        self.proposed += 1;
        if !self.pot.in_domain(w) {
            return;
        }
        let mut dh = n * (self.pot.value(w) - self.pot.value(z));
        for (k, &p) in self.points.iter().enumerate() {
            if k == j {
                continue;
            }
            let dw = (w - p).norm_sqr();
            if dw < COLLISION_DISTANCE * COLLISION_DISTANCE {
                return;
            }
            // 2 ln(|z−p|/|w−p|)
            dh += ((z - p).norm_sqr() / dw).ln();
        }
        if metropolis_accept(self.beta, dh, &mut self.rng) {
            self.points[j] = w;
            self.accepted += 1;
        }
    }

    /// `n` single-site updates in index order.
    pub fn sweep(&mut self) {
        for j in 0..self.points.len() {
            self.update(j);
        }
    }

    pub fn run(&mut self, sweeps: usize) {
        for _ in 0..sweeps {
            self.sweep();
        }
    }

    pub fn configuration(&self) -> Configuration {
        Configuration::for_potential(self.points.clone(), &self.pot)
    }
}

/// Final state of a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GasSample {
    pub configuration: Configuration,
    pub acceptance_rate: f64,
    pub sweeps: usize,
    pub beta: f64,
}

/// Runs a chain for `mc.sweeps` sweeps and returns its final state.
pub fn metropolis_sample(pot: &Potential, n: usize, droplet: &Droplet, mc: &MetropolisConfig) -> Result<GasSample> {
    let mut chain = GasChain::new(pot, n, droplet, mc)?;
    chain.run(mc.sweeps);
    Ok(GasSample {
        configuration: chain.configuration(),
        acceptance_rate: chain.acceptance_rate(),
        sweeps: mc.sweeps,
        beta: mc.beta,
    })
}

/// One radial band of a [`RadialHistogram`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    /// Mean fraction of the `n` points with `lo ≤ |ζ| < hi`.
    pub fraction: f64,
    /// Batch-means standard error of `fraction`.
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialHistogram {
    pub bins: Vec<HistogramBin>,
    pub samples: usize,
    pub batches: usize,
    pub acceptance_rate: f64,
}

/// Radial histogram of the chain over `sweeps` further sweeps, recording
/// once per sweep. Edges must be increasing; use `f64::INFINITY` as the
/// last edge to capture the tail.
pub fn radial_histogram(chain: &mut GasChain, edges: &[f64], sweeps: usize, batches: usize) -> Result<RadialHistogram> {
    if edges.len() < 2 || edges.windows(2).any(|e| !(e[1] > e[0])) {
        return invalid("histogram edges must be increasing with at least two entries");
    }
    if batches < 2 || sweeps < batches {
        return invalid("need at least two batches and one sweep per batch");
    }
    let nb = edges.len() - 1;
    let per_batch = sweeps / batches;
    let n = chain.points().len() as f64;
    let mut batch_means = vec![vec![0.0; nb]; batches];
    for batch in batch_means.iter_mut() {
        for _ in 0..per_batch {
            chain.sweep();
            for z in chain.points() {
                let r = z.norm();
                if let Some(b) = edges.windows(2).position(|e| r >= e[0] && r < e[1]) {
                    batch[b] += 1.0 / n;
                }
            }
        }
        batch.iter_mut().for_each(|v| *v /= per_batch as f64);
    }
    let bins = (0..nb)
        .map(|b| {
            let xs: Vec<f64> = batch_means.iter().map(|m| m[b]).collect();
            let mean = xs.iter().sum::<f64>() / batches as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
            HistogramBin { lo: edges[b], hi: edges[b + 1], fraction: mean, std_error: (var / batches as f64).sqrt() }
        })
        .collect();
    Ok(RadialHistogram { bins, samples: per_batch * batches, batches, acceptance_rate: chain.acceptance_rate() })
}

/// Empirical ratio `π(1)/π(0)` of a Metropolis chain on two states with
/// energies `0` and `dh`, proposing the other state at every step.
pub fn two_state_ratio(dh: f64, beta: f64, steps: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let energies = [0.0, dh];
    let mut state = 0usize;
    let mut visits = [0u64; 2];
    for _ in 0..steps {
        let other = 1 - state;
        if metropolis_accept(beta, energies[other] - energies[state], &mut rng) {
            state = other;
        }
        visits[state] += 1;
    }
    visits[1] as f64 / visits[0] as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::solve_droplet_radial;

    #[test]
    fn two_state_detailed_balance() {
        for (dh, beta) in [(0.5, 1.0), (1.0, 2.0), (0.1, 3.0)] {
            let ratio = two_state_ratio(dh, beta, 2_000_000, 5);
            let exact: f64 = (-beta * dh).exp();
            assert!((ratio / exact - 1.0).abs() < 0.02, "{ratio} vs {exact}");
        }
    }

    #[test]
    fn freezes_to_fekete_pair() {
        let pot = Potential::ginibre();
        let d = solve_droplet_radial(&pot).unwrap();
        let mc = MetropolisConfig { beta: 1e6, sweeps: 20_000, seed: 3, ..Default::default() };
        let s = metropolis_sample(&pot, 2, &d, &mc).unwrap();
        let p = &s.configuration.points;
        assert!(((p[0] - p[1]).norm() - 1.0).abs() < 0.05);
        assert!(s.acceptance_rate > 0.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        let pot = Potential::ginibre();
        let d = solve_droplet_radial(&pot).unwrap();
        assert!(GasChain::new(&pot, 4, &d, &MetropolisConfig { beta: 0.0, ..Default::default() }).is_err());
        let mut chain = GasChain::new(&pot, 4, &d, &MetropolisConfig::default()).unwrap();
        assert!(radial_histogram(&mut chain, &[0.0], 10, 2).is_err());
        assert!(radial_histogram(&mut chain, &[0.0, 1.0], 1, 2).is_err());
    }
}
