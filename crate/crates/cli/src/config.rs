//! Versioned JSON configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use weylat::models::{gap_midpoint, ModelSpec};
use weylat::response::{FrequencyQuadrature, DEFAULT_MESH};
use weylat::LatticeGeometry;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub version: u32,
    pub seed: u64,
    /// Worker threads; all available cores when absent.
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub geometry: Option<GeometryConfig>,
    #[serde(default)]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub mu: Option<MuConfig>,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default = "default_mesh")]
    pub chern_mesh: [usize; 2],
    #[serde(default)]
    pub tolerance: Tolerances,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub probe: Option<ProbeConfig>,
    /// Report path; standard output when absent.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_mesh() -> [usize; 2] {
    DEFAULT_MESH
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub sites: Vec<usize>,
    #[serde(default)]
    pub half_spacing: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub internal_dim: usize,
}

fn one() -> usize {
    1
}

impl GeometryConfig {
    pub fn build(&self) -> Result<LatticeGeometry, CliError> {
        let hs = self.half_spacing.clone().unwrap_or_else(|| {
            vec![if self.sites.len() == 1 { 1.0 } else { 0.5 }; self.sites.len()]
        });
        Ok(LatticeGeometry::new(&self.sites, &hs, self.internal_dim)?)
    }
}

/// Chemical potential: a number, or `{"gap": i}` for the midpoint of the
/// `i`-th gap (1-based) of the unperturbed model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MuConfig {
    Value(f64),
    Gap { gap: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    pub nodes: usize,
    pub scale: f64,
    /// Re-evaluate with half the nodes and report the difference.
    pub error_estimate: bool,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            nodes: 64,
            scale: 1.0,
            error_estimate: true,
        }
    }
}

impl QuadratureConfig {
    pub fn build(&self) -> Result<FrequencyQuadrature, CliError> {
        Ok(FrequencyQuadrature::tan_legendre(self.nodes, self.scale)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub axioms: f64,
    /// Largest accepted distance of the Hall invariant from an integer.
    pub quantization: f64,
    /// Largest accepted quadrature-error estimate.
    pub quadrature: f64,
    /// Largest accepted gap between symbol and operator total currents.
    pub current: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            axioms: 1e-10,
            quantization: 1e-2,
            quadrature: 1e-6,
            current: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub trials: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { trials: 100 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "parameter", content = "values", rename_all = "snake_case")]
pub enum SweepConfig {
    Mu(Vec<f64>),
    /// Hofstadter fluxes `[p, q]`; the model's own flux is replaced.
    Flux(Vec<[i64; 2]>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub eps: Vec<f64>,
    #[serde(default = "five")]
    pub trials: usize,
}

fn five() -> usize {
    5
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Config = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "schema version {} is not supported (expected {SCHEMA_VERSION})",
                cfg.version
            )));
        }
        if cfg.threads == Some(0) {
            return Err(CliError::Config("threads must be positive".into()));
        }
        Ok(cfg)
    }

    pub fn model(&self) -> Result<&ModelSpec, CliError> {
        self.model
            .as_ref()
            .ok_or_else(|| CliError::Config("this command needs a \"model\" block".into()))
    }

    /// Geometry from the `geometry` block, or else from the model.
    pub fn geometry(&self) -> Result<LatticeGeometry, CliError> {
        match (&self.geometry, &self.model) {
            (Some(g), _) => g.build(),
            (None, Some(m)) => Ok(m.geometry()?),
            (None, None) => Err(CliError::Config("a \"geometry\" or \"model\" block is required".into())),
        }
    }

    /// Resolve the chemical potential for a model.
    pub fn resolve_mu(&self, model: &ModelSpec) -> Result<f64, CliError> {
        match self.mu {
            None => Ok(0.0),
            Some(MuConfig::Value(v)) => Ok(v),
            Some(MuConfig::Gap { gap }) => {
                let h = model.clean_hamiltonian(0.0)?;
                Ok(gap_midpoint(&h, model.bands(), gap)?.0)
            }
        }
    }
}
