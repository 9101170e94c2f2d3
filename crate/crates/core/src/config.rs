//! Run configuration: a TOML file of optional keys, overridden by
//! command-line flags. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backbones::BackboneKind;
use crate::error::{Error, Result};
use crate::trainer::{ModelKind, TrainConfig};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub m: Option<usize>,
    pub k: Option<usize>,
    pub backbone: Option<BackboneKind>,
    pub model: Option<ModelKind>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr: Option<f64>,
    pub seed: Option<u64>,
    pub patience: Option<usize>,
    pub valid_every: Option<usize>,
    pub window_candidates: Option<Vec<usize>>,
    pub threads: Option<usize>,
    pub train_series: Option<PathBuf>,
    pub train_labels: Option<PathBuf>,
    pub valid_series: Option<PathBuf>,
    pub valid_labels: Option<PathBuf>,
    pub test_series: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($field:ident),*) => {
        RunConfig { $($field: $top.$field.or($base.$field)),* }
    };
}

impl RunConfig {
    pub fn from_toml(text: &str, source: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("{source}: {}", e.message())))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, &path.display().to_string())
    }

    /// Fields set in `top` win over `self`.
    pub fn overlay(self, top: RunConfig) -> RunConfig {
        let base = self;
        overlay!(base, top; m, k, backbone, model, epochs, batch_size, lr, seed, patience,
            valid_every, window_candidates, threads, train_series, train_labels, valid_series,
            valid_labels, test_series, test_labels, output)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    pub fn require<T: Clone>(value: &Option<T>, key: &str) -> Result<T> {
        value
            .clone()
            .ok_or_else(|| Error::Config(format!("`{key}` is required (flag or config key)")))
    }

    /// Training settings, with defaults for every key that is not set.
    pub fn train_config(&self) -> Result<TrainConfig> {
        let mut cfg = TrainConfig::new(Self::require(&self.m, "m")?, Self::require(&self.k, "k")?);
        if let Some(v) = self.model {
            cfg.model = v;
        }
        if let Some(v) = self.backbone {
            cfg.backbone = v;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = self.lr {
            cfg.lr = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.patience {
            cfg.patience = v;
        }
        if let Some(v) = self.valid_every {
            cfg.valid_every = v;
        }
        if let Some(v) = &self.window_candidates {
            cfg.window_candidates = v.clone();
        }
        cfg.threads = self.threads;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects_unknown_keys() {
        let cfg = RunConfig::from_toml("m = 32\nk = 5\nbackbone = \"resnet\"\nwindow_candidates = [1, 8]\n", "t").unwrap();
        assert_eq!(cfg.m, Some(32));
        assert_eq!(cfg.backbone, Some(BackboneKind::Resnet));
        let err = RunConfig::from_toml("m = 32\nlearning_rate = 0.1\n", "t").unwrap_err();
        assert!(err.to_string().contains("learning_rate"), "{err}");
        assert!(RunConfig::from_toml("backbone = \"lstm\"\n", "t").is_err());
    }

    #[test]
    fn flags_override_file() {
        let file = RunConfig { m: Some(32), k: Some(5), epochs: Some(3), ..Default::default() };
        let flags = RunConfig { k: Some(10), seed: Some(9), ..Default::default() };
        let merged = file.overlay(flags);
        assert_eq!((merged.m, merged.k, merged.epochs, merged.seed), (Some(32), Some(10), Some(3), Some(9)));
        let t = merged.train_config().unwrap();
        assert_eq!((t.m, t.k, t.epochs, t.seed, t.batch_size), (32, 10, 3, 9, 64));
        let back = RunConfig::from_toml(&merged.to_toml(), "round").unwrap();
        assert_eq!(back, merged);
    }

    #[test]
    fn missing_required_key() {
        let err = RunConfig { k: Some(5), ..Default::default() }.train_config().unwrap_err();
        assert!(matches!(err, Error::Config(ref s) if s.contains("`m`")));
    }
}
