//! Experiment configuration: a versioned JSON schema, strict about unknown
//! keys so that a config file fully determines a run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{QvdError, Result};
use crate::qcore::{identity, random_unitary, DensityOperator, DEFAULT_TOL};
use crate::qnno::LambdaRule;
use crate::statemaps::{ChannelDescriptor, MapDescriptor};

pub const SCHEMA_VERSION: u32 = 1;
pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDescriptor {
    /// Explicit eigenvalue list; must be nonnegative and sum to 1.
    pub spectrum: Vec<f64>,
    /// When present, the spectrum is planted in a seeded random orthonormal
    /// basis; otherwise the computational basis is used.
    #[serde(default)]
    pub basis_seed: Option<u64>,
}

impl StateDescriptor {
    pub fn build(&self) -> Result<DensityOperator> {
        let d = self.spectrum.len();
        if d == 0 {
            return Err(QvdError::Config("state spectrum is empty".into()));
        }
        let basis = match self.basis_seed {
            Some(seed) => random_unitary(d, seed),
            None => identity(d),
        };
        // from_spectrum wants ascending order with matching columns.
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| self.spectrum[a].total_cmp(&self.spectrum[b]));
        let sorted: Vec<f64> = order.iter().map(|&i| self.spectrum[i]).collect();
        let mut cols = crate::qcore::zeros(d, d);
        for (slot, &i) in order.iter().enumerate() {
            cols.set_column(slot, &basis.column(i));
        }
        DensityOperator::from_spectrum(&sorted, &cols)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub master: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds { master: 0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_tol")]
    pub default: f64,
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            default: DEFAULT_TOL,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterpolationConfig {
    pub channel_a: ChannelDescriptor,
    pub channel_b: ChannelDescriptor,
    pub t_grid: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RombergConfig {
    pub n0: usize,
    pub k_levels: usize,
    pub m_columns: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsConfig {
    pub lambda_list: Vec<f64>,
    /// Multi-indices, each of length `dimension`.
    pub alpha_list: Vec<Vec<usize>>,
    pub delta_list: Vec<f64>,
    pub n_list: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub dimension: usize,
    pub map: MapDescriptor,
    pub state: StateDescriptor,
    pub n_grid: Vec<usize>,
    #[serde(default)]
    pub lambda_rule: LambdaRule,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default = "default_true")]
    pub renormalize: bool,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub moments: Option<MomentsConfig>,
    #[serde(default)]
    pub romberg: Option<RombergConfig>,
    #[serde(default)]
    pub interpolation: Option<InterpolationConfig>,
}

fn default_q() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}
fn default_gamma() -> f64 {
    1.0
}
fn default_m() -> usize {
    2
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(QvdError::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.dimension == 0 {
            return Err(QvdError::Config("dimension must be positive".into()));
        }
        if self.state.spectrum.len() != self.dimension {
            return Err(QvdError::Config(format!(
                "state spectrum has {} entries but dimension is {}",
                self.state.spectrum.len(),
                self.dimension
            )));
        }
        if self.n_grid.is_empty() {
            return Err(QvdError::Config("n_grid is empty".into()));
        }
        if !self.n_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(QvdError::Config("n_grid must be strictly increasing".into()));
        }
        if self.n_grid[0] < 1 {
            return Err(QvdError::Config("n_grid entries must be >= 1".into()));
        }
        if !(self.q > 0.0) {
            return Err(QvdError::Config(format!("q must be positive, got {}", self.q)));
        }
        if !(0.0..=1.0).contains(&self.gamma) || self.gamma == 0.0 {
            return Err(QvdError::Config(format!(
                "gamma must lie in (0, 1], got {}",
                self.gamma
            )));
        }
        if let Some(m) = &self.moments {
            if m.lambda_list.is_empty()
                || m.alpha_list.is_empty()
                || m.delta_list.is_empty()
                || m.n_list.is_empty()
            {
                return Err(QvdError::Config("moments lists must be nonempty".into()));
            }
            for alpha in &m.alpha_list {
                if alpha.len() != self.dimension {
                    return Err(QvdError::Config(format!(
                        "moment multi-index {alpha:?} does not match dimension {}",
                        self.dimension
                    )));
                }
            }
        }
        if let Some(r) = &self.romberg {
            if r.m_columns < 1 || r.k_levels < r.m_columns || r.n0 < 2 {
                return Err(QvdError::Config(
                    "romberg requires n0 >= 2 and k_levels >= m_columns >= 1".into(),
                ));
            }
        }
        if let Some(i) = &self.interpolation {
            if i.t_grid.is_empty() || i.t_grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
                return Err(QvdError::Config(
                    "interpolation t_grid must be nonempty within [0, 1]".into(),
                ));
            }
        }
        Ok(())
    }

    /// Stable hash of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        hex_digest(&hasher.finalize())
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(2 * bytes.len());
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex_digest(&hasher.finalize())
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| QvdError::Config(format!("cannot read {}: {e}", path.display())))?;
    let config: ExperimentConfig =
        serde_json::from_str(&text).map_err(|e| QvdError::Config(format!("{e}")))?;
    config.validate()?;
    Ok(config)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: u32,
    pub config_hash: String,
    /// sha256 per emitted file, keyed by file name.
    pub checksums: BTreeMap<String, String>,
    /// Seconds per stage; informational only, excluded from determinism
    /// comparisons.
    pub wall_clock_seconds: BTreeMap<String, f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> serde_json::Value {
        serde_json::json!({
            "schema_version": 1,
            "dimension": 2,
            "map": {"kind": "polynomial", "degree": 2},
            "state": {"spectrum": [0.625, 0.375]},
            "n_grid": [8, 16, 32]
        })
    }

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg: ExperimentConfig = serde_json::from_value(minimal_json()).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.q, 1.0);
        assert!(cfg.renormalize);
        assert_eq!(cfg.m, 2);
        assert_eq!(cfg.seeds.master, 0);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let mut v = minimal_json();
        v["surprise"] = serde_json::json!(true);
        assert!(serde_json::from_value::<ExperimentConfig>(v).is_err());
    }

    #[test]
    fn nonincreasing_grid_rejected() {
        let mut v = minimal_json();
        v["n_grid"] = serde_json::json!([8, 8, 16]);
        let cfg: ExperimentConfig = serde_json::from_value(v).unwrap();
        assert!(matches!(cfg.validate(), Err(QvdError::Config(_))));
    }

    #[test]
    fn wrong_schema_version_rejected() {
        let mut v = minimal_json();
        v["schema_version"] = serde_json::json!(2);
        let cfg: ExperimentConfig = serde_json::from_value(v).unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn state_descriptor_builds_requested_spectrum() {
        let desc = StateDescriptor {
            spectrum: vec![0.7, 0.3],
            basis_seed: Some(3),
        };
        let rho = desc.build().unwrap();
        let eigs = rho.eigenvalues();
        assert!((eigs[0] - 0.3).abs() < 1e-12);
        assert!((eigs[1] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn hash_is_stable_and_key_sensitive() {
        let a: ExperimentConfig = serde_json::from_value(minimal_json()).unwrap();
        let b: ExperimentConfig = serde_json::from_value(minimal_json()).unwrap();
        assert_eq!(a.hash(), b.hash());
        let mut v = minimal_json();
        v["q"] = serde_json::json!(2.0);
        let c: ExperimentConfig = serde_json::from_value(v).unwrap();
        assert_ne!(a.hash(), c.hash());
    }
}
