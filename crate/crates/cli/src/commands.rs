//! One function per subcommand. Each returns the JSON result and CSV tables.

use std::f64::consts::TAU;

use fekete::density::{bl_density, classify_regime, concentration_spectrum, counting_inequalities, trace_defect};
use fekete::density::{MovingPointPlan, BULK_THRESHOLD};
use fekete::equilibrium::droplet_for;
use fekete::fekete::{radial_histogram, separation, solve_fekete, GasChain, MetropolisConfig};
use fekete::kernels::rescaled_one_point;
use fekete::limits::{disk_samples, plasma_f_real, ward_check, PlasmaParams, WardQuadrature};
use fekete::{Configuration, EquilibriumMeasure, KernelModel, Potential, RescaleFrame, WeightedBasis};
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::output::{num, Artifact, Table};
use crate::CliError;

fn potential(cfg: &ExperimentConfig) -> Result<Potential, CliError> {
    Ok(cfg.potential.build()?)
}

fn points_table(c: &Configuration) -> Table {
    let mut t = Table::new("points", &["index", "x", "y"]);
    for (j, z) in c.points.iter().enumerate() {
        t.push(vec![j.to_string(), num(z.re), num(z.im)]);
    }
    t
}

pub fn droplet(cfg: &ExperimentConfig) -> Result<Artifact, CliError> {
    let pot = potential(cfg)?;
    let d = droplet_for(&pot)?;
    let mu = EquilibriumMeasure::new(&pot, d)?;
    let robin = mu.robin_constant()?;
    let grid = d.grid(cfg.quadrature.droplet_nr, cfg.quadrature.droplet_ntheta)?;
    let result = json!({
        "droplet": d,
        "area": d.area(),
        "total_mass": mu.total_mass()?,
        "robin_constant": robin,
        "energy": mu.equilibrium_energy_on(&grid)?,
        "equilibrium_residual": mu.equilibrium_residual()?,
    });
    let mut t = Table::new("boundary", &["s", "x", "y", "normal_x", "normal_y"]);
    let m = cfg.quadrature.boundary_samples.max(1);
    for k in 0..m {
        let b = d.boundary_point(TAU * k as f64 / m as f64);
        t.push(vec![num(b.param), num(b.point.re), num(b.point.im), num(b.normal.re), num(b.normal.im)]);
    }
    Ok(Artifact::new(result)?.with_table(t))
}

pub fn fekete_solve(cfg: &ExperimentConfig) -> Result<Artifact, CliError> {
    let pot = potential(cfg)?;
    let d = droplet_for(&pot)?;
    let (c, rep) = solve_fekete(&pot, cfg.fekete.n, &cfg.fekete.solver, &d)?;
    let sep = if c.n() >= 2 { Some(separation(&pot, &c)?) } else { None };
    let result = json!({ "n": c.n(), "report": rep, "separation": sep, "configuration": c });
    let mut a = Artifact::new(result)?.with_table(points_table(&c));
    a.passed = rep.converged;
    Ok(a)
}

pub fn gas_sample(cfg: &ExperimentConfig) -> Result<Artifact, CliError> {
    let pot = potential(cfg)?;
    let d = droplet_for(&pot)?;
    let g = &cfg.gas;
    let mc = MetropolisConfig { beta: g.beta, sweeps: g.burn_in, proposal_scale: g.proposal_scale, seed: cfg.seed };
    let mut chain = GasChain::new(&pot, g.n, &d, &mc)?;
    chain.run(g.burn_in);
    let hist = radial_histogram(&mut chain, &g.edges, g.sweeps, g.batches)?;
    let c = chain.configuration();
    let mut t = Table::new("histogram", &["lo", "hi", "fraction", "std_error"]);
    for b in &hist.bins {
        t.push(vec![num(b.lo), num(b.hi), num(b.fraction), num(b.std_error)]);
    }
    let result = json!({ "n": g.n, "beta": g.beta, "histogram": hist, "final_configuration": c });
    Ok(Artifact::new(result)?.with_table(t).with_table(points_table(&c)))
}

pub fn kernel_profile(cfg: &ExperimentConfig) -> Result<Artifact, CliError> {
    let pot = potential(cfg)?;
    let d = droplet_for(&pot)?;
    let k = &cfg.kernel;
    if k.steps == 0 || k.x_max.partial_cmp(&k.x_min) != Some(std::cmp::Ordering::Greater) {
        return Err(CliError::Config("kernel profile needs steps > 0 and x_max > x_min".into()));
    }
    let km = KernelModel::build(&pot, k.n)?;
    let frame = RescaleFrame::new(&pot, &d, k.point, k.n)?;
    let mut t = Table::new("profile", &["x", "r_n", "plasma_f"]);
    let mut sup = 0.0f64;
    for i in 0..=k.steps {
        let x = k.x_min + (k.x_max - k.x_min) * i as f64 / k.steps as f64;
        let r = rescaled_one_point(&km, &frame, fekete::Complex64::new(x, 0.0));
        let f = plasma_f_real(2.0 * x);
        sup = sup.max((r - f).abs());
        t.push(vec![num(x), num(r), num(f)]);
    }
    let result = json!({
        "n": k.n,
        "point": k.point,
        "theta": frame.theta,
        "scale": frame.scale,
        "rescaled_distance": frame.scale * d.distance_to_boundary(k.point),
        "sup_deviation_from_plasma": sup,
    });
    Ok(Artifact::new(result)?.with_table(t))
}

pub fn ward(cfg: &ExperimentConfig) -> Result<Artifact, CliError> {
    let w = &cfg.ward;
    let params = PlasmaParams::new(w.m)?;
    let zs = disk_samples(w.sample_radius, w.rings, w.per_ring);
    let quad = WardQuadrature { radius: w.radius, nr: w.nr, ntheta: w.ntheta, fd_step: w.fd_step };
    let rep = ward_check(params, &zs, quad, w.tolerance)?;
    let mut t = Table::new("ward", &["x", "y", "dbar_c_re", "dbar_c_im", "rhs", "residual"]);
    for p in &rep.points {
        t.push(vec![num(p.z.re), num(p.z.im), num(p.dbar_c.re), num(p.dbar_c.im), num(p.rhs), num(p.residual)]);
    }
    Ok(Artifact::new(&rep)?.with_table(t))
}

pub fn density_scan(cfg: &ExperimentConfig) -> Result<Artifact, CliError> {
    let pot = potential(cfg)?;
    let d = droplet_for(&pot)?;
    let ds = &cfg.density;
    let plan = MovingPointPlan { rule: ds.plan, ns: ds.ns.clone() };
    let mut family = Vec::with_capacity(ds.ns.len());
    let mut solves = Vec::with_capacity(ds.ns.len());
    for &n in &ds.ns {
        let (c, rep) = solve_fekete(&pot, n, &cfg.fekete.solver, &d)?;
        solves.push(json!({ "n": n, "converged": rep.converged, "energy": rep.energy, "iterations": rep.iterations }));
        family.push(c);
    }
    let est = bl_density(&pot, &d, &family, &plan, &ds.lambdas)?;
    let regime = classify_regime(&plan, &d, &pot, BULK_THRESHOLD)?;
    let points = ds
        .ns
        .iter()
        .map(|&n| plan.point(n, &d, &pot).map(|p| json!({ "n": n, "point": p })))
        .collect::<Result<Vec<_>, _>>()?;
    let mut t = Table::new("density", &["n", "lambda", "count", "ratio"]);
    for c in &est.table {
        t.push(vec![c.n.to_string(), num(c.lambda), c.count.to_string(), num(c.ratio)]);
    }
    let result = json!({ "regime": regime, "plan_points": points, "solves": solves, "estimate": est });
    Ok(Artifact::new(result)?.with_table(t))
}

pub fn traces(cfg: &ExperimentConfig) -> Result<Artifact, CliError> {
    let pot = potential(cfg)?;
    let tr = &cfg.traces;
    let m = (tr.n as f64 * tr.rho).round() as usize;
    let basis = WeightedBasis::build(&pot, m)?;
    let mut eig = Table::new("eigenvalues", &["lambda", "index", "eigenvalue"]);
    let mut rows = Vec::new();
    let mut all_hold = true;
    for &l in &tr.lambdas {
        let s = concentration_spectrum(&basis, tr.n, tr.rho, tr.point, l)?;
        let checks = counting_inequalities(&s, &tr.levels)?;
        all_hold &= checks.iter().all(|c| c.holds);
        for (j, v) in s.eigenvalues.iter().enumerate() {
            eig.push(vec![num(l), j.to_string(), num(*v)]);
        }
        rows.push(json!({
            "lambda": l,
            "trace": s.trace,
            "trace_sq": s.trace_sq,
            "trace_direct": s.trace_direct,
            "normalized_trace": s.trace / (l * l),
            "defect": trace_defect(&s),
            "counting": checks,
        }));
    }
    let result = json!({ "n": tr.n, "rho": tr.rho, "m": m, "point": tr.point, "spectra": rows });
    let mut a = Artifact::new(result)?.with_table(eig);
    a.passed = all_hold;
    Ok(a)
}
