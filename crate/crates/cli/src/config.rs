//! Experiment configuration files.
//!
//! Every section is optional; missing fields take the defaults below. The
//! resolved configuration, after command-line overrides, is hashed and
//! embedded in every artifact.

use std::path::{Path, PathBuf};

use fekete::density::PlanRule;
use fekete::{Complex64, PotentialSpec, SolverConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub potential: PotentialSpec,
    pub output: OutputConfig,
    pub quadrature: QuadratureConfig,
    pub fekete: FeketeConfig,
    pub gas: GasConfig,
    pub kernel: KernelConfig,
    pub ward: WardConfig,
    pub density: DensityConfig,
    pub traces: TracesConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            potential: PotentialSpec::Ginibre,
            output: OutputConfig::default(),
            quadrature: QuadratureConfig::default(),
            fekete: FeketeConfig::default(),
            gas: GasConfig::default(),
            kernel: KernelConfig::default(),
            ward: WardConfig::default(),
            density: DensityConfig::default(),
            traces: TracesConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory for `report.json` and CSV files; the report goes to
    /// stdout when unset.
    pub dir: Option<PathBuf>,
}

/// Grid resolutions shared by several commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    /// Radial and angular nodes of droplet grids.
    pub droplet_nr: usize,
    pub droplet_ntheta: usize,
    /// Boundary samples written by `droplet`.
    pub boundary_samples: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig { droplet_nr: 24, droplet_ntheta: 48, boundary_samples: 256 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeketeConfig {
    pub n: usize,
    pub solver: SolverConfig,
}

impl Default for FeketeConfig {
    fn default() -> Self {
        FeketeConfig { n: 100, solver: SolverConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GasConfig {
    pub n: usize,
    pub beta: f64,
    pub burn_in: usize,
    /// Recorded sweeps, split into `batches` for standard errors.
    pub sweeps: usize,
    pub batches: usize,
    /// Radial histogram edges; the last may be `inf`.
    pub edges: Vec<f64>,
    pub proposal_scale: Option<f64>,
}

impl Default for GasConfig {
    fn default() -> Self {
        GasConfig {
            n: 64,
            beta: 1.0,
            burn_in: 1000,
            sweeps: 10_000,
            batches: 20,
            edges: vec![0.0, 0.3, 0.5, 0.7, 0.85, 0.95, 1.05, 1.15, f64::INFINITY],
            proposal_scale: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub n: usize,
    /// Frame center `p` as `[re, im]`.
    pub point: Complex64,
    /// Rescaled abscissae along the outward normal.
    pub x_min: f64,
    pub x_max: f64,
    pub steps: usize,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig { n: 400, point: Complex64::new(1.0, 0.0), x_min: -3.0, x_max: 3.0, steps: 600 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WardConfig {
    /// Offset of the limiting kernel; `inf` selects Ginibre.
    pub m: f64,
    pub sample_radius: f64,
    pub rings: usize,
    pub per_ring: usize,
    pub radius: f64,
    pub nr: usize,
    pub ntheta: usize,
    pub fd_step: f64,
    /// Allowed change of a residual under grid doubling.
    pub tolerance: f64,
}

impl Default for WardConfig {
    fn default() -> Self {
        WardConfig {
            m: 0.0,
            sample_radius: 2.0,
            rings: 4,
            per_ring: 8,
            radius: 8.0,
            nr: 64,
            ntheta: 64,
            fd_step: 1e-3,
            tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensityConfig {
    pub plan: PlanRule,
    pub ns: Vec<usize>,
    pub lambdas: Vec<f64>,
}

impl Default for DensityConfig {
    fn default() -> Self {
        DensityConfig {
            plan: PlanRule::Fixed { point: Complex64::new(0.0, 0.0) },
            ns: vec![50, 100, 200],
            lambdas: vec![4.0, 6.0, 8.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TracesConfig {
    pub n: usize,
    pub rho: f64,
    pub point: Complex64,
    pub lambdas: Vec<f64>,
    pub levels: Vec<f64>,
}

impl Default for TracesConfig {
    fn default() -> Self {
        TracesConfig {
            n: 200,
            rho: 1.0,
            point: Complex64::new(0.0, 0.0),
            lambdas: vec![4.0, 6.0, 8.0],
            levels: vec![0.1, 0.25, 0.5, 0.75, 0.9],
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// SHA-256 of the canonical TOML form, in hex. The output section is
    /// left out so that the hash names the experiment, not its location.
    pub fn hash(&self) -> Result<String, CliError> {
        let mut c = self.clone();
        c.output = OutputConfig::default();
        let digest = Sha256::digest(c.to_toml()?.as_bytes());
        Ok(format!("{digest:x}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut c = ExperimentConfig { potential: PotentialSpec::Ellipse { t: 0.5 }, ..Default::default() };
        c.ward.m = f64::INFINITY;
        c.gas.proposal_scale = Some(0.01);
        c.density.plan = PlanRule::BoundaryAnchored { param: 0.3, tau: 1.5 };
        c.output.dir = Some("out".into());
        let back = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash().unwrap(), c.hash().unwrap());
    }

    #[test]
    fn partial_file_takes_defaults() {
        let c =
            ExperimentConfig::from_toml("seed = 7\npotential = { kind = \"ellipse\", t = 0.5 }\n[fekete]\nn = 12\n")
                .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.fekete.n, 12);
        assert_eq!(c.fekete.solver, SolverConfig::default());
        assert_eq!(c.gas, GasConfig::default());
    }

    #[test]
    fn rejects_unknown_fields() {
        assert!(ExperimentConfig::from_toml("sed = 1").is_err());
        assert!(ExperimentConfig::from_toml("[fekete]\nm = 3").is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.seed += 1;
        assert_ne!(a.hash().unwrap(), b.hash().unwrap());
        let mut c = a.clone();
        c.output.dir = Some("elsewhere".into());
        assert_eq!(a.hash().unwrap(), c.hash().unwrap());
        assert_eq!(a.hash().unwrap().len(), 64);
    }
}
