//! The acceptance matrix behind `paper-check`.
//!
//! Full mode uses the acceptance sizes. Quick mode caps `n` at 100 and
//! shrinks grids and chains; its tolerances are unchanged, so cells that
//! need large `n` may fail there.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use fekete::density::{
    bernstein_check, bl_density, concentration_spectrum, counting_inequalities, max_principle_check, strip_count_bound,
    strip_lattice, trace_defect, LagrangeBasis, MovingPointPlan, Strip,
};
use fekete::equilibrium::{droplet_ellipse, droplet_for};
use fekete::fekete::{radial_histogram, separation, solve_fekete, GasChain, MetropolisConfig};
use fekete::kernels::{berezin_mass, rescaled_one_point, WeightedPolynomial};
use fekete::limits::{
    berezin_full_mass, disk_samples, ginibre_g, plasma_f_real, ward_check, PlasmaParams, WardQuadrature,
};
use fekete::quadrature::polar_grid_centered;
use fekete::{
    Complex64, Configuration, EquilibriumMeasure, KernelModel, Potential, RescaleFrame, SolverConfig, WeightedBasis,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::output::Table;
use crate::CliError;

/// Problem sizes of one run.
#[derive(Debug, Clone, Serialize)]
pub struct Scale {
    pub quick: bool,
    pub separation_ns: Vec<usize>,
    pub density_ns: Vec<usize>,
    /// The `n` of the tight single-cell checks.
    pub top_n: usize,
    pub ellipse_ns: Vec<usize>,
    pub profile_n: usize,
    pub trace_n: usize,
    pub bernstein_n: usize,
    pub gas_sweeps: usize,
    pub gas_batches: usize,
}

impl Scale {
    pub fn new(quick: bool) -> Self {
        if quick {
            Scale {
                quick,
                separation_ns: vec![50, 100],
                density_ns: vec![50, 100],
                top_n: 100,
                ellipse_ns: vec![32, 48, 64],
                profile_n: 100,
                trace_n: 100,
                bernstein_n: 50,
                gas_sweeps: 10_000,
                gas_batches: 20,
            }
        } else {
            Scale {
                quick,
                separation_ns: vec![50, 100, 200],
                density_ns: vec![100, 200, 400],
                top_n: 400,
                ellipse_ns: vec![32, 48, 64],
                profile_n: 400,
                trace_n: 200,
                bernstein_n: 100,
                gas_sweeps: 40_000,
                gas_batches: 40,
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SubCheck {
    pub key: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Criterion {
    pub id: u32,
    pub name: String,
    pub pass: bool,
    pub checks: Vec<SubCheck>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Matrix {
    pub scale: Scale,
    pub criteria: Vec<Criterion>,
    pub all_pass: bool,
}

impl Matrix {
    pub fn table(&self) -> Table {
        let mut t = Table::new("matrix", &["id", "criterion", "check", "status", "detail"]);
        for c in &self.criteria {
            for s in &c.checks {
                let status = if s.pass { "PASS" } else { "FAIL" };
                t.push(vec![c.id.to_string(), c.name.clone(), s.key.clone(), status.into(), s.detail.clone()]);
            }
        }
        t
    }

    /// One PASS/FAIL line per criterion.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.criteria {
            out += &format!("{} {:>2} {}\n", if c.pass { "PASS" } else { "FAIL" }, c.id, c.name);
            for s in c.checks.iter().filter(|s| !s.pass) {
                out += &format!("       {}: {}\n", s.key, s.detail);
            }
        }
        out
    }
}

struct Builder {
    criteria: Vec<Criterion>,
}

impl Builder {
    fn start(&mut self, id: u32, name: &str) {
        self.criteria.push(Criterion { id, name: name.into(), pass: true, checks: Vec::new() });
    }

    fn check(&mut self, key: impl Into<String>, pass: bool, detail: String) {
        let c = self.criteria.last_mut().expect("criterion started");
        c.pass &= pass;
        c.checks.push(SubCheck { key: key.into(), pass, detail });
    }

    /// Records an error of the current criterion as a failed check.
    fn guard(&mut self, r: Result<(), CliError>) {
        if let Err(e) = r {
            self.check("error", false, e.to_string());
        }
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Runs every criterion. Numerical errors inside a criterion mark it failed.
pub fn run(scale: Scale, seed: u64) -> Result<Matrix, CliError> {
    let sc = SolverConfig { seed, ..Default::default() };
    let g = Potential::ginibre();
    let e = Potential::ellipse(0.5)?;
    let gd = droplet_for(&g)?;
    let ed = droplet_for(&e)?;
    let mut solves: BTreeMap<(&str, usize), (Configuration, bool)> = BTreeMap::new();
    let mut gn: Vec<usize> = scale.separation_ns.iter().chain(&scale.density_ns).copied().collect();
    gn.sort_unstable();
    gn.dedup();
    for n in gn {
        let (cfg, rep) = solve_fekete(&g, n, &sc, &gd)?;
        solves.insert(("ginibre", n), (cfg, rep.converged));
    }
    let mut en: Vec<usize> = scale.separation_ns.iter().chain(&scale.ellipse_ns).copied().collect();
    en.sort_unstable();
    en.dedup();
    for n in en {
        let (cfg, rep) = solve_fekete(&e, n, &sc, &ed)?;
        solves.insert(("ellipse", n), (cfg, rep.converged));
    }

    let mut b = Builder { criteria: Vec::new() };

    b.start(1, "separation");
    for (name, pot) in [("ginibre", &g), ("ellipse", &e)] {
        for &n in &scale.separation_ns {
            let (cfg, conv) = &solves[&(name, n)];
            match separation(pot, cfg) {
                Ok(s) => b.check(
                    format!("{name}-n{n}"),
                    *conv && s.delta >= 0.596,
                    format!("converged={conv} Δ={:.4} ≥ 0.596", s.delta),
                ),
                Err(err) => b.check(format!("{name}-n{n}"), false, err.to_string()),
            }
        }
    }

    let ginibre_family: Vec<Configuration> =
        scale.density_ns.iter().map(|n| solves[&("ginibre", *n)].0.clone()).collect();
    let row = |t: &[fekete::density::DensityCell]| {
        t.iter().map(|c| format!("({},{}):{:.3}", c.n, c.lambda, c.ratio)).collect::<Vec<_>>().join(" ")
    };

    b.start(2, "bulk density");
    let r = (|| -> Result<(), CliError> {
        let plan = MovingPointPlan::fixed(c(0.0, 0.0), scale.density_ns.clone());
        let est = bl_density(&g, &gd, &ginibre_family, &plan, &[4.0, 6.0, 8.0])?;
        let all = est.table.iter().all(|c| (0.85..=1.15).contains(&c.ratio));
        b.check("all-cells", all, format!("in [0.85, 1.15]: {}", row(&est.table)));
        let r = est.cell(scale.top_n, 8.0).map(|c| c.ratio).unwrap_or(f64::NAN);
        b.check(format!("n{}-L8", scale.top_n), (0.9..=1.1).contains(&r), format!("{r:.4} in [0.9, 1.1]"));
        Ok(())
    })();
    b.guard(r);

    b.start(3, "boundary density");
    let r = (|| -> Result<(), CliError> {
        let plan = MovingPointPlan::boundary_anchored(0.0, 0.0, scale.density_ns.clone());
        let est = bl_density(&g, &gd, &ginibre_family, &plan, &[4.0, 6.0, 8.0])?;
        let all = est.table.iter().all(|c| (0.35..=0.65).contains(&c.ratio));
        b.check("ginibre-cells", all, format!("in [0.35, 0.65]: {}", row(&est.table)));
        let r = est.cell(scale.top_n, 8.0).map(|c| c.ratio).unwrap_or(f64::NAN);
        b.check(format!("ginibre-n{}-L8", scale.top_n), (0.4..=0.6).contains(&r), format!("{r:.4} in [0.4, 0.6]"));
        let family: Vec<Configuration> = scale.ellipse_ns.iter().map(|n| solves[&("ellipse", *n)].0.clone()).collect();
        let plan = MovingPointPlan::boundary_anchored(0.0, 0.0, scale.ellipse_ns.clone());
        let est = bl_density(&e, &ed, &family, &plan, &[2.0, 3.0, 4.0])?;
        let all = est.table.iter().all(|c| (0.3..=0.7).contains(&c.ratio));
        b.check("ellipse", all, format!("at (a,0) in [0.3, 0.7]: {}", row(&est.table)));
        Ok(())
    })();
    b.guard(r);

    b.start(4, "strip surrogate");
    let r = (|| -> Result<(), CliError> {
        let spacing = (2.0 * PI / 3f64.sqrt()).sqrt();
        let n = 1_000_000;
        let mut worst = 0.0f64;
        for (t, shift) in [(1.0, 0.0), (1.0, 0.5), (2.0, 0.0), (2.0, 0.8)] {
            let strip = Strip { center: c(0.0, 0.0), theta: 0.3, half_width: t };
            let cfg = strip_lattice(&g, &strip, n, spacing, 110.0, shift)?;
            for lambda in [5.0, 10.0, 20.0, 50.0, 100.0] {
                worst = worst.max(strip_count_bound(&cfg, &g, &strip, n, lambda)?.constant);
            }
        }
        b.check("constant", worst <= 3.0, format!("max C = {worst:.3} ≤ 3 for Λ ≤ 100"));
        Ok(())
    })();
    b.guard(r);

    b.start(5, "kernel exactness");
    let r = (|| -> Result<(), CliError> {
        let basis = WeightedBasis::build(&g, 50)?;
        let ln_h = basis.ln_norms().unwrap_or(&[]);
        let mut worst = if ln_h.len() > 20 { 0.0f64 } else { f64::INFINITY };
        for (k, lh) in ln_h.iter().enumerate().take(21) {
            let exact: f64 = (1..=k).map(|j| (j as f64).ln()).sum::<f64>() - (k + 1) as f64 * 50f64.ln();
            worst = worst.max((lh - exact).exp_m1().abs());
        }
        b.check("h_k", worst <= 1e-10, format!("max rel err {worst:.2e} ≤ 1e-10"));
        let km = KernelModel::build(&g, scale.top_n)?;
        let e0 = (km.one_point(c(0.0, 0.0)) / scale.top_n as f64 - 1.0).abs();
        b.check("R_n(0)", e0 <= 1e-8, format!("rel err {e0:.2e} ≤ 1e-8 (n={})", scale.top_n));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let km = KernelModel::build(&g, 50)?;
        let grid = km.mass_grid(&gd)?;
        let mut worst = 0.0f64;
        for _ in 0..10 {
            let z = Complex64::from_polar(1.2 * rng.random::<f64>().sqrt(), 2.0 * PI * rng.random::<f64>());
            worst = worst.max((km.reproducing_integral(z, &grid)? / km.one_point(z) - 1.0).abs());
        }
        b.check("reproducing", worst <= 1e-6, format!("max rel err {worst:.2e} ≤ 1e-6"));
        Ok(())
    })();
    b.guard(r);

    b.start(6, "boundary profile");
    let r = (|| -> Result<(), CliError> {
        let km = KernelModel::build(&g, scale.profile_n)?;
        let frame = RescaleFrame::new(&g, &gd, c(1.0, 0.0), scale.profile_n)?;
        let worst = (0..=600)
            .map(|k| -3.0 + 0.01 * k as f64)
            .map(|x| (rescaled_one_point(&km, &frame, c(x, 0.0)) - plasma_f_real(2.0 * x)).abs())
            .fold(0.0, f64::max);
        b.check("sup", worst <= 0.05, format!("sup |R_n − F(2x)| = {worst:.4} ≤ 0.05 (n={})", scale.profile_n));
        Ok(())
    })();
    b.guard(r);

    b.start(7, "mass-one");
    let r = (|| -> Result<(), CliError> {
        let mut worst = 0.0f64;
        for z in [c(0.0, 0.0), c(0.7, -0.2), c(-3.0, 4.0)] {
            let grid = polar_grid_centered(z, 8.0, 64, 64)?;
            worst = worst.max((grid.integrate_real(|w| ginibre_g(z, w).norm_sqr())? - 1.0).abs());
        }
        b.check("ginibre", worst <= 1e-8, format!("{worst:.2e} ≤ 1e-8"));
        let mut worst = 0.0f64;
        for z in [c(0.0, 0.0), c(-1.0, 0.5), c(0.8, -2.0), c(2.0, 0.0), c(-2.5, 3.0)] {
            worst = worst.max((berezin_full_mass(PlasmaParams::boundary(), z)? - 1.0).abs());
        }
        b.check("B^0", worst <= 1e-4, format!("{worst:.2e} ≤ 1e-4 over 5 roots"));
        let km = KernelModel::build(&g, 100)?;
        let grid = km.mass_grid(&gd)?;
        let mut worst = 0.0f64;
        for p in [c(0.0, 0.0), c(1.0, 0.0)] {
            let frame = RescaleFrame::new(&g, &gd, p, 100)?;
            for z in [c(-2.0, 0.0), c(-1.0, 1.0), c(0.0, 0.0), c(0.5, -1.5), c(1.0, 0.0)] {
                worst = worst.max((berezin_mass(&km, &frame, z, &grid)? - 1.0).abs());
            }
        }
        b.check("B_n", worst <= 1e-4, format!("{worst:.2e} ≤ 1e-4 (n=100)"));
        Ok(())
    })();
    b.guard(r);

    b.start(8, "Ward residual");
    let r = (|| -> Result<(), CliError> {
        let zs = disk_samples(2.0, 4, 8);
        let quad = WardQuadrature::default();
        let gi = ward_check(PlasmaParams::ginibre(), &zs, quad, 1e-3)?;
        b.check("m=inf", gi.max_residual <= 1e-6, format!("{:.2e} ≤ 1e-6", gi.max_residual));
        let bd = ward_check(PlasmaParams::boundary(), &zs, quad, 1e-3)?;
        b.check("m=0", bd.max_residual <= 5e-2, format!("{:.2e} ≤ 5e-2", bd.max_residual));
        let ratio = bd.refinement_ratio;
        b.check("halving", (0.35..=0.65).contains(&ratio), format!("refined/default = {ratio:.3} in [0.35, 0.65]"));
        Ok(())
    })();
    b.guard(r);

    b.start(9, "concentration traces");
    let r = (|| -> Result<(), CliError> {
        let n = scale.trace_n;
        let basis = WeightedBasis::build(&g, n)?;
        let mut all = true;
        let mut spectra = BTreeMap::new();
        for (name, p) in [("bulk", c(0.0, 0.0)), ("boundary", c(1.0, 0.0))] {
            for l in [4u32, 6, 8] {
                let s = concentration_spectrum(&basis, n, 1.0, p, l as f64)?;
                all &= counting_inequalities(&s, &[0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95])?.iter().all(|c| c.holds);
                spectra.insert((name, l), s);
            }
        }
        let tb = spectra[&("bulk", 6)].trace / 36.0;
        b.check("bulk-trace", (tb - 1.0).abs() <= 0.1, format!("{tb:.4} within 0.1 of 1"));
        let tr = spectra[&("boundary", 6)].trace / 36.0;
        b.check("boundary-trace", (tr - 0.5).abs() <= 0.1, format!("{tr:.4} within 0.1 of 0.5"));
        for name in ["bulk", "boundary"] {
            let d: Vec<f64> = [4, 6, 8].iter().map(|l| trace_defect(&spectra[&(name, *l)])).collect();
            b.check(
                format!("{name}-defect"),
                d[2] < d[0] && d[2] <= 0.15,
                format!("{:.4} → {:.4} → {:.4}", d[0], d[1], d[2]),
            );
        }
        b.check("counting", all, "both inequalities on every spectrum".into());
        Ok(())
    })();
    b.guard(r);

    b.start(10, "Bernstein and maximum principle");
    let r = (|| -> Result<(), CliError> {
        let basis = WeightedBasis::build(&g, scale.bernstein_n)?;
        let rep = bernstein_check(&basis, &gd, 20, seed)?;
        b.check(
            "bernstein",
            rep.max_ratio <= 1.1,
            format!("max ratio {:.4} ≤ 1.1 (n={})", rep.max_ratio, scale.bernstein_n),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..10 {
            let f = WeightedPolynomial::random(scale.bernstein_n, &mut rng);
            let f = f.scaled(1.0 / f.sup_on_droplet(&basis, &gd)?.value);
            let mp = max_principle_check(&f, &basis, &gd)?;
            worst = worst.max(mp.outside - mp.inside);
        }
        b.check("max-principle", worst <= 1e-6, format!("max (outside − inside) = {worst:.2e} ≤ 1e-6"));
        Ok(())
    })();
    b.guard(r);

    b.start(11, "Lagrange bound");
    let r = (|| -> Result<(), CliError> {
        let (cfg, conv) = solves.get(&("ginibre", 50)).ok_or_else(|| CliError::Config("no n=50 solve".into()))?;
        let sup = LagrangeBasis::new(&g, cfg)?.sup_estimate(&gd)?;
        b.check("sup", *conv && sup.max <= 1.05, format!("max_j sup |ℓ_j| = {:.4} ≤ 1.05", sup.max));
        Ok(())
    })();
    b.guard(r);

    b.start(12, "equilibrium measure");
    let r = (|| -> Result<(), CliError> {
        let mu = EquilibriumMeasure::new(&g, gd)?;
        let gamma = mu.robin_constant()?.gamma;
        b.check("robin", (gamma - 1.0).abs() <= 1e-3, format!("γ = {gamma:.8}"));
        let iq = mu.equilibrium_energy()?;
        b.check("energy", (iq - 0.75).abs() <= 1e-3, format!("I_Q = {iq:.8}"));
        let samples: Vec<Complex64> = (0..60).map(|k| Complex64::from_polar(0.05 * k as f64, 0.9 * k as f64)).collect();
        let rep = mu.obstacle_report(gamma, &samples)?;
        b.check(
            "obstacle",
            rep.max_deviation_on_support <= 1e-3,
            format!("|Q̂ − Q| on S = {:.2e}", rep.max_deviation_on_support),
        );
        let em = EquilibriumMeasure::new(&e, droplet_ellipse(0.5)?)?;
        let res = em.equilibrium_residual()?;
        b.check("ellipse", res <= 1e-3, format!("residual {res:.2e}"));
        Ok(())
    })();
    b.guard(r);

    b.start(13, "sampler histogram");
    let r = (|| -> Result<(), CliError> {
        let n = 64;
        let mc = MetropolisConfig { beta: 1.0, sweeps: 0, proposal_scale: None, seed };
        let mut chain = GasChain::new(&g, n, &gd, &mc)?;
        chain.run(2_000);
        let edges = [0.0, 0.3, 0.5, 0.7, 0.85, 0.95, 1.05, 1.15, f64::INFINITY];
        let hist = radial_histogram(&mut chain, &edges, scale.gas_sweeps, scale.gas_batches)?;
        // expected band fractions from the kernel on annulus grids
        let km = KernelModel::build(&g, n)?;
        let mut worst = 0.0f64;
        for bin in &hist.bins {
            let hi = if bin.hi.is_finite() { bin.hi } else { 3.0 };
            let grid = fekete::quadrature::annulus_grid(c(0.0, 0.0), bin.lo, hi, 64, 16)?;
            let expect = grid.integrate_real(|z| km.one_point(z))? / n as f64;
            worst = worst.max((bin.fraction - expect).abs() / bin.std_error);
        }
        b.check("bins", worst <= 3.0, format!("max |obs − exp|/SE = {worst:.2} ≤ 3"));
        Ok(())
    })();
    b.guard(r);

    let all_pass = b.criteria.iter().all(|c| c.pass);
    Ok(Matrix { scale, criteria: b.criteria, all_pass })
}
