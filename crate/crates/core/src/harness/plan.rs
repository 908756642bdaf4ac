use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynsys::{self, TARGETS};
use crate::error::{Error, Result};
use crate::reservoir::ReservoirConfig;
use crate::transformer::TransformerConfig;

/// The six Sprott flows used for desk-scale training.
pub const DESK_POOL: [&str; 6] = ["sprott_0", "sprott_1", "sprott_2", "sprott_4", "sprott_9", "sprott_10"];

pub const DESK_DATA_LENGTH: usize = 50_000;
pub const PAPER_DATA_LENGTH: usize = 1_500_000;

/// Evaluation grid for reconstruction sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepGrid {
    pub seq_len: Vec<usize>,
    pub sparsity: Vec<f64>,
    /// Multiplicative observation noise levels.
    pub noise: Vec<f64>,
    pub add_noise: f64,
    /// Length of the ground-truth trajectory that windows are cut from.
    pub eval_length: usize,
    pub thresholds: Vec<f64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            seq_len: vec![200],
            sparsity: vec![0.5],
            noise: vec![0.0],
            add_noise: 0.0,
            eval_length: 20_000,
            thresholds: vec![crate::metrics::DEFAULT_MSE_THRESHOLD],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClimateSettings {
    pub system: String,
    pub segments: usize,
    pub segment_length: usize,
    pub sparsity: f64,
    pub noise: f64,
    pub horizon: usize,
    pub rmse_steps: usize,
    pub reservoir_size: usize,
    /// Full reservoir settings; the tuned preset for `system` when absent.
    pub reservoir: Option<ReservoirConfig>,
}

impl Default for ClimateSettings {
    fn default() -> Self {
        Self {
            system: "lorenz".into(),
            segments: 3,
            segment_length: 20_000,
            sparsity: 0.5,
            noise: 0.0,
            horizon: 10_000,
            rmse_steps: 150,
            reservoir_size: 300,
            reservoir: None,
        }
    }
}

/// Everything one run needs. Loaded from TOML; every stage seed is derived
/// from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    #[serde(default = "default_profile")]
    pub profile: String,
    #[serde(default)]
    pub seed: u64,
    /// Training systems; empty means every catalog system not held out.
    #[serde(default)]
    pub pool: Vec<String>,
    #[serde(default = "default_held_out")]
    pub held_out: Vec<String>,
    /// Points per training system; the profile default when absent.
    #[serde(default)]
    pub data_length: Option<usize>,
    #[serde(default = "default_train_noise")]
    pub train_noise: f64,
    /// Overrides the profile's epoch count.
    #[serde(default)]
    pub epochs: Option<usize>,
    /// Full model settings; replaces the profile when present.
    #[serde(default)]
    pub transformer: Option<TransformerConfig>,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    #[serde(default)]
    pub sweep: SweepGrid,
    #[serde(default)]
    pub climate: ClimateSettings,
    #[serde(default = "default_group")]
    pub rotation_group: usize,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

fn default_profile() -> String {
    "desk".into()
}
fn default_held_out() -> Vec<String> {
    TARGETS.iter().map(|s| s.to_string()).collect()
}
fn default_train_noise() -> f64 {
    0.05
}
fn default_realizations() -> usize {
    50
}
fn default_group() -> usize {
    4
}
fn default_output() -> PathBuf {
    PathBuf::from("runs/default")
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            profile: default_profile(),
            seed: 0,
            pool: DESK_POOL.iter().map(|s| s.to_string()).collect(),
            held_out: default_held_out(),
            data_length: None,
            train_noise: default_train_noise(),
            epochs: None,
            transformer: None,
            realizations: default_realizations(),
            sweep: SweepGrid::default(),
            climate: ClimateSettings::default(),
            rotation_group: default_group(),
            output_dir: default_output(),
        }
    }
}

impl ExperimentPlan {
    pub fn from_toml(text: &str) -> Result<Self> {
        let plan: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plan serializes")
    }

    /// Short SHA-256 digest of the canonical TOML form.
    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        hex::encode(&digest[..8])
    }

    /// Named reduced-scale reproductions.
    pub fn preset(name: &str) -> Result<Self> {
        let base = Self::default();
        let plan = match name {
            // MSE over the (L_s, S_r) plane
            "fig4" => Self {
                sweep: SweepGrid {
                    seq_len: vec![50, 100, 150, 200, 250],
                    sparsity: vec![0.1, 0.3, 0.5, 0.7, 0.9],
                    ..SweepGrid::default()
                },
                output_dir: "runs/fig4".into(),
                ..base
            },
            // transformer output feeding the reservoir
            "fig5" => Self {
                held_out: vec!["lorenz".into()],
                output_dir: "runs/fig5".into(),
                ..base
            },
            // noise robustness over (sigma, S_r)
            "fig9" => Self {
                sweep: SweepGrid {
                    sparsity: vec![0.2, 0.4, 0.6, 0.8],
                    noise: vec![0.0, 0.05, 0.1, 0.2],
                    ..SweepGrid::default()
                },
                output_dir: "runs/fig9".into(),
                ..base
            },
            // growing sequence length at S_r = 0.8
            "fig12" => Self {
                sweep: SweepGrid {
                    seq_len: vec![25, 50, 100, 150, 200, 256],
                    sparsity: vec![0.8],
                    ..SweepGrid::default()
                },
                output_dir: "runs/fig12".into(),
                ..base
            },
            other => return Err(Error::Config(format!("unknown preset `{other}`"))),
        };
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        TransformerConfig::profile(&self.profile)?;
        if self.realizations == 0 {
            return Err(Error::Config("realizations must be at least 1".into()));
        }
        if self.rotation_group == 0 {
            return Err(Error::Config("rotation_group must be at least 1".into()));
        }
        for name in self.pool.iter().chain(&self.held_out) {
            if dynsys::find(name).is_none() {
                return Err(Error::UnknownSystem(name.clone()));
            }
        }
        if let Some(n) = self.pool.iter().find(|p| self.held_out.contains(p)) {
            return Err(Error::Config(format!("{n} is both a training and a held-out system")));
        }
        let g = &self.sweep;
        if g.seq_len.is_empty() || g.sparsity.is_empty() || g.noise.is_empty() {
            return Err(Error::Config("sweep grids must not be empty".into()));
        }
        if g.sparsity.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(Error::Config("sweep sparsity values must lie in [0, 1]".into()));
        }
        if g.noise.iter().chain([&g.add_noise]).any(|s| !(*s >= 0.0)) {
            return Err(Error::Config("noise levels must be non-negative".into()));
        }
        if g.seq_len.iter().any(|l| *l == 0 || *l > g.eval_length) {
            return Err(Error::Config("sequence lengths must lie in 1..=eval_length".into()));
        }
        let c = &self.climate;
        if c.segments < 3 {
            return Err(Error::Config(
                "the climate pipeline needs at least three segments".into(),
            ));
        }
        if c.rmse_steps > c.horizon {
            return Err(Error::Config("rmse_steps exceeds the prediction horizon".into()));
        }
        if let Some(r) = &c.reservoir {
            r.validate()?;
        }
        if let Some(t) = &self.transformer {
            t.validate()?;
        }
        Ok(())
    }

    /// Resolved training systems.
    pub fn pool_systems(&self) -> Vec<String> {
        if !self.pool.is_empty() {
            return self.pool.clone();
        }
        dynsys::catalog()
            .iter()
            .map(|s| s.name().to_string())
            .filter(|n| !self.held_out.contains(n))
            .collect()
    }

    pub fn data_length(&self) -> usize {
        self.data_length.unwrap_or(if self.profile == "paper" {
            PAPER_DATA_LENGTH
        } else {
            DESK_DATA_LENGTH
        })
    }

    pub fn transformer_config(&self) -> Result<TransformerConfig> {
        let mut cfg = match &self.transformer {
            Some(c) => c.clone(),
            None => TransformerConfig::profile(&self.profile)?,
        };
        if let Some(e) = self.epochs {
            cfg.epochs = e;
        }
        Ok(cfg)
    }

    pub fn reservoir_config(&self) -> Result<ReservoirConfig> {
        let cfg = match &self.climate.reservoir {
            Some(r) => r.clone(),
            None => ReservoirConfig::preset(&self.climate.system, self.climate.reservoir_size)?
                .with_seed(crate::seed::derive(self.seed, "reservoir")),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
