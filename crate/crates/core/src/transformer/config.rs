use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which points contribute to the MSE part of the training loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LossPoints {
    /// Every point of the window, observed or not.
    #[default]
    All,
    /// Only points hidden by the mask.
    Unobserved,
}

/// Architecture and optimization settings of the reconstruction model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformerConfig {
    pub input_dim: usize,
    pub embed_dim: usize,
    pub heads: usize,
    pub blocks: usize,
    pub ffn_dim: usize,
    pub d_k: usize,
    pub d_v: usize,
    pub max_len: usize,
    pub dropout: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub smooth_weight: f64,
    #[serde(default)]
    pub loss_points: LossPoints,
}

impl TransformerConfig {
    /// Small model that trains on one CPU core in minutes.
    pub fn desk() -> Self {
        Self {
            input_dim: 3,
            embed_dim: 32,
            heads: 2,
            blocks: 2,
            ffn_dim: 64,
            d_k: 32,
            d_v: 32,
            max_len: 256,
            dropout: 0.0,
            lr: 1e-3,
            batch_size: 16,
            epochs: 20,
            smooth_weight: 0.1,
            loss_points: LossPoints::All,
        }
    }

    /// Full-size model.
    pub fn paper() -> Self {
        Self {
            input_dim: 3,
            embed_dim: 128,
            heads: 4,
            blocks: 4,
            ffn_dim: 512,
            d_k: 128,
            d_v: 128,
            max_len: 3000,
            dropout: 0.2,
            lr: 1e-3,
            batch_size: 16,
            epochs: 50,
            smooth_weight: 0.1,
            loss_points: LossPoints::All,
        }
    }

    pub fn profile(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "paper" => Ok(Self::paper()),
            other => Err(Error::Config(format!(
                "unknown profile {other:?} (expected desk or paper)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("input_dim", self.input_dim),
            ("embed_dim", self.embed_dim),
            ("heads", self.heads),
            ("blocks", self.blocks),
            ("ffn_dim", self.ffn_dim),
            ("d_k", self.d_k),
            ("d_v", self.d_v),
            ("max_len", self.max_len),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !self.embed_dim.is_multiple_of(2) {
            return Err(Error::Config("embed_dim must be even".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} not in [0, 1)", self.dropout)));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr {} must be positive", self.lr)));
        }
        if !(self.smooth_weight >= 0.0 && self.smooth_weight.is_finite()) {
            return Err(Error::Config("smooth_weight must be non-negative".into()));
        }
        Ok(())
    }

    pub(crate) fn to_scalars(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("input_dim", self.input_dim as f64),
            ("embed_dim", self.embed_dim as f64),
            ("heads", self.heads as f64),
            ("blocks", self.blocks as f64),
            ("ffn_dim", self.ffn_dim as f64),
            ("d_k", self.d_k as f64),
            ("d_v", self.d_v as f64),
            ("max_len", self.max_len as f64),
            ("dropout", self.dropout),
            ("lr", self.lr),
            ("batch_size", self.batch_size as f64),
            ("epochs", self.epochs as f64),
            ("smooth_weight", self.smooth_weight),
            (
                "loss_points",
                match self.loss_points {
                    LossPoints::All => 0.0,
                    LossPoints::Unobserved => 1.0,
                },
            ),
        ]
    }

    pub(crate) fn from_scalars(get: impl Fn(&str) -> Result<f64>) -> Result<Self> {
        let u = |k: &str| get(k).map(|v| v as usize);
        let cfg = Self {
            input_dim: u("input_dim")?,
            embed_dim: u("embed_dim")?,
            heads: u("heads")?,
            blocks: u("blocks")?,
            ffn_dim: u("ffn_dim")?,
            d_k: u("d_k")?,
            d_v: u("d_v")?,
            max_len: u("max_len")?,
            dropout: get("dropout")?,
            lr: get("lr")?,
            batch_size: u("batch_size")?,
            epochs: u("epochs")?,
            smooth_weight: get("smooth_weight")?,
            loss_points: if get("loss_points")? == 1.0 {
                LossPoints::Unobserved
            } else {
                LossPoints::All
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_validate() {
        TransformerConfig::desk().validate().unwrap();
        let p = TransformerConfig::paper();
        p.validate().unwrap();
        assert_eq!(
            (p.embed_dim, p.heads, p.blocks, p.ffn_dim, p.max_len),
            (128, 4, 4, 512, 3000)
        );
        assert_eq!((p.d_k, p.d_v), (p.embed_dim, p.embed_dim));
        assert!(TransformerConfig::profile("huge").is_err());
    }

    #[test]
    fn toml_roundtrip() {
        let c = TransformerConfig::desk();
        let text = toml::to_string(&c).unwrap();
        let back: TransformerConfig = toml::from_str(&text).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = TransformerConfig::desk();
        c.dropout = 1.0;
        assert!(c.validate().is_err());
        let mut c = TransformerConfig::desk();
        c.embed_dim = 31;
        assert!(c.validate().is_err());
    }
}
