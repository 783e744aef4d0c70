use std::collections::VecDeque;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    energy_increment, energy_of, first_collision, gradient_of, sample_equilibrium, Configuration, COLLISION_DISTANCE,
};
use crate::equilibrium::{Droplet, EquilibriumMeasure};
use crate::error::{invalid, Error, Result};
use crate::potential::Potential;
use crate::Complex64;

/// Parameters of the multi-start descent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Converged when `max_j |∇_j H_n| ≤ tolerance · n`.
    pub tolerance: f64,
    pub restarts: usize,
    /// Number of curvature pairs kept; `0` gives plain steepest descent.
    pub memory: usize,
    /// Sufficient-decrease constant of the backtracking rule.
    pub armijo: f64,
    /// Step contraction factor on rejection.
    pub shrink: f64,
    pub max_backtracks: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 20_000,
            tolerance: 1e-8,
            restarts: 4,
            memory: 10,
            armijo: 1e-4,
            shrink: 0.5,
            max_backtracks: 60,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return invalid(format!("solver tolerance must be positive, got {}", self.tolerance));
        }
        if self.restarts == 0 {
            return invalid("solver needs at least one restart");
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0 && self.shrink > 0.0 && self.shrink < 1.0) {
            return invalid("backtracking constants must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Summary of a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    /// `H_n` of the returned configuration, recomputed from its points.
    pub energy: f64,
    pub iterations: usize,
    pub max_gradient: f64,
    pub converged: bool,
    pub best_restart: usize,
    pub restart_energies: Vec<f64>,
    /// Excluded from serialized reports so that they are reproducible.
    #[serde(skip)]
    pub wall_time: Duration,
}

/// One local descent.
#[derive(Debug, Clone, PartialEq)]
pub struct DescentRun {
    pub points: Vec<Complex64>,
    pub energy: f64,
    pub iterations: usize,
    pub max_gradient: f64,
    pub converged: bool,
    /// `H_n` after every accepted step, starting with the initial value.
    pub history: Vec<f64>,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

fn max_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Limited-memory quasi-Newton descent from `start` with backtracking line
/// search on the energy.
pub fn descend(pot: &Potential, start: Vec<Complex64>, sc: &SolverConfig) -> Result<DescentRun> {
    sc.validate()?;
    let n = start.len();
    if n == 0 {
        return invalid("configuration must contain at least one point");
    }
    if let Some((j, k)) = first_collision(&start) {
        return Err(Error::Collision(j, k));
    }
    let spacing = 1.0 / (n as f64).sqrt();
    let goal = sc.tolerance * n as f64;
    let mut x = start;
    let mut e = energy_of(pot, &x)?;
    let mut g = gradient_of(pot, &x)?;
    let mut history = vec![e];
    let mut pairs: VecDeque<(Vec<Complex64>, Vec<Complex64>, f64)> = VecDeque::new();
    let mut iterations = 0;
    while iterations < sc.max_iterations && max_norm(&g) > goal {
        iterations += 1;
        let mut d = direction(&g, &pairs);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            pairs.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        if pairs.is_empty() {
            // first or reset step: move the fastest point by a tenth of the spacing
            let s = 0.1 * spacing / max_norm(&d);
            d.iter_mut().for_each(|v| *v *= s);
            slope *= s;
        }
        // never move a point by more than half the typical spacing at once
        let mut alpha = (0.5 * spacing / max_norm(&d)).min(1.0);
        let mut accepted = None;
        for _ in 0..sc.max_backtracks {
            let step: Vec<Complex64> = d.iter().map(|v| v * alpha).collect();
            let trial: Vec<Complex64> = x.iter().zip(&step).map(|(a, b)| a + b).collect();
            if trial.iter().all(|&z| pot.in_domain(z)) && min_pair_distance(&trial) >= COLLISION_DISTANCE {
                let de = energy_increment(pot, &x, &step)?;
                if de.is_finite() && de < 0.0 && de <= sc.armijo * alpha * slope {
                    accepted = Some((trial, step, de));
                    break;
                }
            }
            alpha *= sc.shrink;
        }
        let Some((trial, step, de)) = accepted else {
            if pairs.is_empty() {
                // no descent even along the gradient: round-off floor reached
                break;
            }
            pairs.clear();
            continue;
        };
        let g_new = gradient_of(pot, &trial)?;
        let y: Vec<Complex64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&step, &y);
        if sc.memory > 0 && sy > 1e-300 {
            if pairs.len() == sc.memory {
                pairs.pop_front();
            }
            pairs.push_back((step, y, 1.0 / sy));
        }
        x = trial;
        g = g_new;
        e += de;
        history.push(e);
    }
    let energy = energy_of(pot, &x)?;
    let max_gradient = max_norm(&g);
    Ok(DescentRun { points: x, energy, iterations, max_gradient, converged: max_gradient <= goal, history })
}

/// Two-loop recursion for `−H·g`, with `H` the limited-memory inverse Hessian.
fn direction(g: &[Complex64], pairs: &VecDeque<(Vec<Complex64>, Vec<Complex64>, f64)>) -> Vec<Complex64> {
    let mut q: Vec<Complex64> = g.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter().map(|v| -v).collect()
}

fn min_pair_distance(points: &[Complex64]) -> f64 {
    let mut m = f64::INFINITY;
    for j in 0..points.len() {
        for k in j + 1..points.len() {
            m = m.min((points[j] - points[k]).norm_sqr());
        }
    }
    m.sqrt()
}

/// Best of `sc.restarts` local descents, each started from an independent
/// sample of the equilibrium measure on `droplet`.
///
/// Restarts run in parallel with generators derived from `sc.seed`; ties in
/// energy go to the lower restart index, so the result does not depend on
/// scheduling. Non-convergence is reported in the returned report.
pub fn solve_fekete(
    pot: &Potential,
    n: usize,
    sc: &SolverConfig,
    droplet: &Droplet,
) -> Result<(Configuration, SolverReport)> {
    sc.validate()?;
    if n == 0 {
        return invalid("n must be at least 1");
    }
    let clock = Instant::now();
    let mu = EquilibriumMeasure::new(pot, *droplet)?;
    let runs = (0..sc.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
            rng.set_stream(r as u64);
            let start = sample_equilibrium(&mu, n, &mut rng)?;
            descend(pot, start, sc)
        })
        .collect::<Result<Vec<DescentRun>>>()?;
    let restart_energies: Vec<f64> = runs.iter().map(|r| r.energy).collect();
    let mut best = 0;
    for (r, run) in runs.iter().enumerate() {
        // prefer converged runs, then lower energy
        let better = (run.converged && !runs[best].converged)
            || (run.converged == runs[best].converged && run.energy < runs[best].energy);
        if better {
            best = r;
        }
    }
    let run = runs.into_iter().nth(best).expect("at least one restart");
    if !run.converged {
        log::warn!(
            "Fekete solve for n={n} did not converge: max gradient {:.3e} after {} iterations",
            run.max_gradient,
            run.iterations
        );
    }
    let report = SolverReport {
        energy: run.energy,
        iterations: run.iterations,
        max_gradient: run.max_gradient,
        converged: run.converged,
        best_restart: best,
        restart_energies,
        wall_time: clock.elapsed(),
    };
    Ok((Configuration::for_potential(run.points, pot), report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{droplet_ellipse, solve_droplet_radial};
    use crate::fekete::{energy, separation};

    fn ginibre() -> (Potential, Droplet) {
        let pot = Potential::ginibre();
        let d = solve_droplet_radial(&pot).unwrap();
        (pot, d)
    }

    #[test]
    fn two_points() {
        let (pot, d) = ginibre();
        let (cfg, rep) = solve_fekete(&pot, 2, &SolverConfig { seed: 1, ..Default::default() }, &d).unwrap();
        assert!(rep.converged);
        assert!(((cfg.points[0] - cfg.points[1]).norm() - 1.0).abs() < 1e-5);
        assert!((rep.energy - 1.0).abs() < 1e-6);
        assert_eq!(rep.energy, energy(&pot, &cfg).unwrap().value);
    }

    #[test]
    fn one_point() {
        let (pot, d) = ginibre();
        let (cfg, rep) = solve_fekete(&pot, 1, &SolverConfig::default(), &d).unwrap();
        assert!(rep.converged && cfg.points[0].norm() < 1e-8);
    }

    #[test]
    fn hundred_points_inside_droplet_and_separated() {
        let (pot, d) = ginibre();
        let sc = SolverConfig { restarts: 2, seed: 7, ..Default::default() };
        let (cfg, rep) = solve_fekete(&pot, 100, &sc, &d).unwrap();
        assert!(rep.converged, "{rep:?}");
        assert!(cfg.points.iter().all(|z| z.norm() < 1.0 + 1e-3));
        assert!(separation(&pot, &cfg).unwrap().delta >= 0.606 - 0.01);
        assert!((rep.energy - energy(&pot, &cfg).unwrap().value).abs() <= 1e-12 * rep.energy.abs());
    }

    #[test]
    fn descent_is_monotone() {
        let pot = Potential::ellipse(0.5).unwrap();
        let mu = EquilibriumMeasure::new(&pot, droplet_ellipse(0.5).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let start = sample_equilibrium(&mu, 40, &mut rng).unwrap();
        for memory in [0, 10] {
            let sc = SolverConfig { memory, max_iterations: 400, ..Default::default() };
            let run = descend(&pot, start.clone(), &sc).unwrap();
            assert!(run.history.windows(2).all(|w| w[1] <= w[0]));
            assert!(run.history.len() > 10 && run.history.last() < run.history.first());
        }
    }

    #[test]
    fn deterministic_across_runs() {
        let (pot, d) = ginibre();
        let sc = SolverConfig { restarts: 3, seed: 11, ..Default::default() };
        let (a, ra) = solve_fekete(&pot, 30, &sc, &d).unwrap();
        let (b, rb) = solve_fekete(&pot, 30, &sc, &d).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra.restart_energies, rb.restart_energies);
    }

    #[test]
    fn rejects_bad_config() {
        let (pot, d) = ginibre();
        assert!(solve_fekete(&pot, 5, &SolverConfig { restarts: 0, ..Default::default() }, &d).is_err());
        assert!(solve_fekete(&pot, 5, &SolverConfig { tolerance: 0.0, ..Default::default() }, &d).is_err());
    }
}
