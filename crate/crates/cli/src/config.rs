use std::path::{Path, PathBuf};

use ecglite::dsp::PreprocessConfig;
use ecglite::eval::LeadSubset;
use ecglite::labels::LabelPolicy;
use ecglite::nn::{ModelConfig, TrainConfig};
use ecglite::synthetic::SyntheticConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const DATASET_ROOT_ENV: &str = "ECGLITE_DATASET_ROOT";

/// Network shape minus the input dimensions, which come from the lead
/// subset and the records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchConfig {
    pub conv_filters: Vec<usize>,
    pub conv_kernels: Vec<usize>,
    pub leaky_alpha: f64,
    pub dense_hidden: usize,
    pub bn_eps: f64,
}

impl Default for ArchConfig {
    fn default() -> Self {
        let m = ModelConfig::default();
        Self {
            conv_filters: m.conv_filters,
            conv_kernels: m.conv_kernels,
            leaky_alpha: m.leaky_alpha,
            dense_hidden: m.dense_hidden,
            bn_eps: m.bn_eps,
        }
    }
}

impl ArchConfig {
    pub fn model_config(&self, in_channels: usize, input_length: usize) -> ModelConfig {
        ModelConfig {
            in_channels,
            input_length,
            conv_filters: self.conv_filters.clone(),
            conv_kernels: self.conv_kernels.clone(),
            leaky_alpha: self.leaky_alpha,
            dense_hidden: self.dense_hidden,
            bn_eps: self.bn_eps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub dataset_root: Option<PathBuf>,
    /// 100 or 500 Hz records.
    pub resolution: u32,
    pub leads: LeadSubset,
    pub output_dir: PathBuf,
    /// Shared across runs that differ only in leads; defaults to `<output_dir>/cache`.
    pub cache_dir: Option<PathBuf>,
    /// Overrides `train.seed` when set.
    pub seed: Option<u64>,
    pub labels: LabelPolicy,
    pub preprocess: PreprocessConfig,
    pub model: ArchConfig,
    pub train: TrainConfig,
    pub synthetic: SyntheticConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            dataset_root: None,
            resolution: 100,
            leads: LeadSubset::All,
            output_dir: PathBuf::from("ecglite-out"),
            cache_dir: None,
            seed: None,
            labels: LabelPolicy::default(),
            preprocess: PreprocessConfig::default(),
            model: ArchConfig::default(),
            train: TrainConfig::default(),
            synthetic: SyntheticConfig::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub dataset_root: Option<PathBuf>,
    pub resolution: Option<u32>,
    pub leads: Option<LeadSubset>,
    pub output_dir: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", p.display())))?;
                Self::from_toml(&text).map_err(|e| match e {
                    CliError::Config(m) => CliError::Config(format!("{}: {m}", p.display())),
                    other => other,
                })
            }
        }
    }

    /// Applies overrides, falls back to the environment for the dataset
    /// root, and folds the seed into the training config.
    pub fn resolve(mut self, o: &Overrides, env_root: Option<PathBuf>) -> Result<Self, CliError> {
        if let Some(v) = &o.dataset_root {
            self.dataset_root = Some(v.clone());
        }
        if self.dataset_root.is_none() {
            self.dataset_root = env_root;
        }
        if let Some(v) = o.resolution {
            self.resolution = v;
        }
        if let Some(v) = &o.leads {
            self.leads = v.clone();
        }
        if let Some(v) = &o.output_dir {
            self.output_dir = v.clone();
        }
        if let Some(v) = &o.cache_dir {
            self.cache_dir = Some(v.clone());
        }
        if let Some(v) = o.seed {
            self.seed = Some(v);
        }
        if let Some(v) = o.epochs {
            self.train.epochs = v;
        }
        if let Some(v) = o.batch_size {
            self.train.batch_size = v;
        }
        if let Some(seed) = self.seed {
            self.train.seed = seed;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let mut problems = Vec::new();
        if !matches!(self.resolution, 100 | 500) {
            problems.push(format!("resolution: must be 100 or 500, got {}", self.resolution));
        }
        if self.leads.n_channels() == 0 {
            problems.push("leads: subset is empty".to_string());
        }
        if let Err(e) = self.preprocess.validate(self.resolution as f64) {
            problems.push(format!("preprocess: {e}"));
        }
        if let Err(e) = self
            .model
            .model_config(self.leads.n_channels().max(1), 10 * self.resolution as usize)
            .validate()
        {
            problems.push(format!("model: {e}"));
        }
        if let Err(e) = self.train.validate() {
            problems.push(format!("train: {e}"));
        }
        if self.labels.priority.is_empty() {
            problems.push("labels.priority: must list at least one superclass".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(problems.join("; ")))
        }
    }

    pub fn dataset_root(&self) -> Result<&Path, CliError> {
        self.dataset_root.as_deref().ok_or_else(|| {
            CliError::Config(format!(
                "dataset_root: not set (config file, --dataset-root, or {DATASET_ROOT_ENV})"
            ))
        })
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| self.output_dir.join("cache"))
    }

    pub fn sampling_rate(&self) -> f64 {
        self.resolution as f64
    }

    /// SHA-256 of the canonical JSON rendering.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex(&Sha256::digest(json))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_parse_and_defaults_fill() {
        let c = PipelineConfig::from_toml(
            r#"
            dataset_root = "/data/ptbxl"
            resolution = 500
            leads = "limb3"
            seed = 9

            [preprocess]
            rolling_enabled = false

            [train]
            epochs = 3
            "#,
        )
        .unwrap();
        assert_eq!(c.resolution, 500);
        assert_eq!(c.leads, LeadSubset::Limb3);
        assert!(!c.preprocess.rolling_enabled);
        assert_eq!(c.preprocess.lowpass_order, 15);
        assert_eq!(c.train.epochs, 3);
        assert_eq!(c.train.batch_size, 32);
        let r = c.resolve(&Overrides::default(), None).unwrap();
        assert_eq!(r.train.seed, 9);
    }

    #[test]
    fn unknown_fields_are_config_errors() {
        assert!(matches!(
            PipelineConfig::from_toml("resolutoin = 100"),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            PipelineConfig::from_toml("[train]\nepoch = 3"),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            PipelineConfig::from_toml("leads = \"V7\""),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn validation_names_fields() {
        let c = PipelineConfig {
            resolution: 250,
            ..Default::default()
        };
        let err = c.resolve(&Overrides::default(), None).unwrap_err().to_string();
        assert!(err.contains("resolution"), "{err}");
    }

    #[test]
    fn overrides_then_env() {
        let o = Overrides {
            leads: Some(LeadSubset::LeadI),
            epochs: Some(2),
            ..Default::default()
        };
        let c = PipelineConfig::default().resolve(&o, Some("/env/root".into())).unwrap();
        assert_eq!(c.leads.n_channels(), 1);
        assert_eq!(c.train.epochs, 2);
        assert_eq!(c.dataset_root.as_deref(), Some(Path::new("/env/root")));

        let o = Overrides {
            dataset_root: Some("/flag".into()),
            ..Default::default()
        };
        let c = PipelineConfig {
            dataset_root: Some("/file".into()),
            ..Default::default()
        };
        assert_eq!(
            c.clone()
                .resolve(&Overrides::default(), Some("/env".into()))
                .unwrap()
                .dataset_root
                .unwrap(),
            Path::new("/file")
        );
        assert_eq!(
            c.resolve(&o, Some("/env".into())).unwrap().dataset_root.unwrap(),
            Path::new("/flag")
        );
    }

    #[test]
    fn hash_tracks_content() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.train.epochs = 7;
        assert_ne!(a.hash(), b.hash());
    }
}
