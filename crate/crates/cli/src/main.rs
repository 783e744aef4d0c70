//! `fekete`: experiment driver for weighted Fekete configurations.

mod commands;
mod config;
mod output;
mod paper_check;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fekete::density::PlanRule;
use fekete::{Complex64, PotentialSpec};
use thiserror::Error;

use config::ExperimentConfig;
use output::Artifact;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Numerics(#[from] fekete::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerics(fekete::Error::InvalidArgument(_)) => 2,
            _ => 1,
        }
    }
}

/// Thread count for the rayon pool; unset means one per core.
const THREADS_ENV: &str = "FEKETE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "fekete", version, about = "Weighted Fekete points, kernels and Beurling-Landau densities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    Ginibre,
    MittagLeffler,
    Ellipse,
}

/// Options shared by all subcommands; flags override the config file.
#[derive(Debug, Clone, Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    potential: Option<Kind>,
    /// Mittag-Leffler exponent.
    #[arg(long)]
    p: Option<f64>,
    /// Ellipse parameter.
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for report.json and CSV files.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Droplet, Robin constant and equilibrium energy.
    Droplet {
        #[command(flatten)]
        common: Common,
    },
    /// Fekete configurations.
    Fekete {
        #[command(subcommand)]
        action: FeketeAction,
    },
    /// Coulomb gas sampling.
    Gas {
        #[command(subcommand)]
        action: GasAction,
    },
    /// Correlation kernels.
    Kernel {
        #[command(subcommand)]
        action: KernelAction,
    },
    /// Ward's equation for the limiting kernels.
    Ward {
        #[command(subcommand)]
        action: WardAction,
    },
    /// Beurling-Landau densities.
    Density {
        #[command(subcommand)]
        action: DensityAction,
    },
    /// Concentration operator spectra and traces.
    Traces {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        rho: Option<f64>,
        /// Center as `re,im`.
        #[arg(long, value_parser = parse_complex)]
        point: Option<Complex64>,
    },
    /// Runs the acceptance matrix; exits 0 only when every check passes.
    PaperCheck {
        #[command(flatten)]
        common: Common,
        /// Cap n at 100 and shrink grids.
        #[arg(long)]
        quick: bool,
    },
}

#[derive(Debug, Subcommand)]
enum FeketeAction {
    /// Minimizes the discrete energy.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        restarts: Option<usize>,
    },
}

#[derive(Debug, Subcommand)]
enum GasAction {
    /// Metropolis chain with a radial histogram.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        sweeps: Option<usize>,
    },
}

#[derive(Debug, Subcommand)]
enum KernelAction {
    /// Rescaled one-point function along the normal against F(2x).
    Profile {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: Option<usize>,
        /// Frame center as `re,im`.
        #[arg(long, value_parser = parse_complex)]
        point: Option<Complex64>,
    },
}

#[derive(Debug, Subcommand)]
enum WardAction {
    /// Residual at default and doubled resolution.
    Check {
        #[command(flatten)]
        common: Common,
        /// Kernel offset; `inf` for Ginibre.
        #[arg(long)]
        m: Option<f64>,
    },
}

#[derive(Debug, Subcommand)]
enum DensityAction {
    /// Solves a Fekete family and tabulates N/Λ².
    Scan {
        #[command(flatten)]
        common: Common,
        /// Comma-separated n values.
        #[arg(long, value_delimiter = ',')]
        ns: Option<Vec<usize>>,
        /// Comma-separated Λ values.
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
        /// Anchor at the boundary point with this parameter instead of a fixed point.
        #[arg(long)]
        boundary: Option<f64>,
    },
}

fn parse_complex(s: &str) -> Result<Complex64, String> {
    let (re, im) = s.split_once(',').ok_or_else(|| format!("expected `re,im`, got `{s}`"))?;
    let f = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v}: {e}"));
    Ok(Complex64::new(f(re)?, f(im)?))
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(kind) = self.potential {
            cfg.potential = match kind {
                Kind::Ginibre => PotentialSpec::Ginibre,
                Kind::MittagLeffler => PotentialSpec::MittagLeffler { p: self.p.unwrap_or(2.0) },
                Kind::Ellipse => PotentialSpec::Ellipse { t: self.t.unwrap_or(0.5) },
            };
        } else {
            match (&mut cfg.potential, self.p, self.t) {
                (PotentialSpec::MittagLeffler { p }, Some(v), _) => *p = v,
                (PotentialSpec::Ellipse { t }, _, Some(v)) => *t = v,
                (_, None, None) => {}
                _ => return Err(CliError::Config("--p/--t do not apply to the selected potential".into())),
            }
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output.dir = Some(o.clone());
        }
        Ok(cfg)
    }
}

fn set_some<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

type Runner = Box<dyn FnOnce(&ExperimentConfig) -> Result<Artifact, CliError>>;

/// Resolves the configuration and runs the command.
fn dispatch(command: Command) -> (String, Result<ExperimentConfig, CliError>, Runner) {
    match command {
        Command::Droplet { common } => ("droplet".into(), common.resolve(), Box::new(commands::droplet)),
        Command::Fekete { action: FeketeAction::Solve { common, n, restarts } } => {
            let cfg = common.resolve().map(|mut c| {
                set_some(&mut c.fekete.n, n);
                set_some(&mut c.fekete.solver.restarts, restarts);
                c
            });
            ("fekete solve".into(), cfg, Box::new(commands::fekete_solve))
        }
        Command::Gas { action: GasAction::Sample { common, n, beta, sweeps } } => {
            let cfg = common.resolve().map(|mut c| {
                set_some(&mut c.gas.n, n);
                set_some(&mut c.gas.beta, beta);
                set_some(&mut c.gas.sweeps, sweeps);
                c
            });
            ("gas sample".into(), cfg, Box::new(commands::gas_sample))
        }
        Command::Kernel { action: KernelAction::Profile { common, n, point } } => {
            let cfg = common.resolve().map(|mut c| {
                set_some(&mut c.kernel.n, n);
                set_some(&mut c.kernel.point, point);
                c
            });
            ("kernel profile".into(), cfg, Box::new(commands::kernel_profile))
        }
        Command::Ward { action: WardAction::Check { common, m } } => {
            let cfg = common.resolve().map(|mut c| {
                set_some(&mut c.ward.m, m);
                c
            });
            ("ward check".into(), cfg, Box::new(commands::ward))
        }
        Command::Density { action: DensityAction::Scan { common, ns, lambdas, boundary } } => {
            let cfg = common.resolve().map(|mut c| {
                set_some(&mut c.density.ns, ns);
                set_some(&mut c.density.lambdas, lambdas);
                if let Some(param) = boundary {
                    c.density.plan = PlanRule::BoundaryAnchored { param, tau: 0.0 };
                }
                c
            });
            ("density scan".into(), cfg, Box::new(commands::density_scan))
        }
        Command::Traces { common, n, rho, point } => {
            let cfg = common.resolve().map(|mut c| {
                set_some(&mut c.traces.n, n);
                set_some(&mut c.traces.rho, rho);
                set_some(&mut c.traces.point, point);
                c
            });
            ("traces".into(), cfg, Box::new(commands::traces))
        }
        Command::PaperCheck { common, quick } => {
            let run = move |c: &ExperimentConfig| -> Result<Artifact, CliError> {
                let m = paper_check::run(paper_check::Scale::new(quick), c.seed)?;
                eprint!("{}", m.summary());
                let table = m.table();
                let passed = m.all_pass;
                let mut a = Artifact::new(&m)?.with_table(table);
                a.passed = passed;
                Ok(a)
            };
            ("paper-check".into(), common.resolve(), Box::new(run))
        }
    }
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
    if n == 0 {
        return Err(CliError::Config(format!("{THREADS_ENV} must be positive")));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(e.exit_code());
    }
    let (name, cfg, run) = dispatch(cli.command);
    let mut cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    // one seed drives every random choice
    cfg.fekete.solver.seed = cfg.seed;
    let hash = match cfg.hash() {
        Ok(h) => h,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let outcome = run(&cfg);
    let report = output::envelope(&name, &cfg, &hash, outcome.as_ref());
    let tables = outcome.as_ref().map(|a| a.tables.as_slice()).unwrap_or(&[]);
    if let Err(e) = output::write(cfg.output.dir.as_deref(), &report, tables) {
        eprintln!("error: {e}");
        return ExitCode::from(e.exit_code());
    }
    match outcome {
        Ok(a) if a.passed => ExitCode::SUCCESS,
        Ok(_) => {
            eprintln!("{name}: a check failed; see the report");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
