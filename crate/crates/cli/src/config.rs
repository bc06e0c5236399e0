//! Run configuration: a JSON file mirroring the training config field
//! names, plus per-domain dataset sources (a CSV path or an inline moons
//! generator spec). Command-line flags override file values.

use std::path::Path;

use bcdm_core::tensor_net::OptimizerConfig;
use bcdm_core::trainer::{Method, TrainConfig};
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub method: String,
    pub alpha: f64,
    pub entropy_weight: f64,
    pub batch_size: usize,
    pub max_iteration: usize,
    pub base_lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub anneal_a: f64,
    pub anneal_b: f64,
    pub classifier_lr_multiplier: f64,
    pub generator_dims: Vec<usize>,
    pub classifier_dims: Vec<usize>,
    pub seed: u64,
    pub log_every: usize,
    pub source: Option<DomainSpec>,
    pub target: Option<DomainSpec>,
    pub target_labels: Option<String>,
}

impl Default for FileConfig {
    fn default() -> FileConfig {
        let t = TrainConfig::default();
        FileConfig {
            method: method_name(t.method).to_owned(),
            alpha: t.alpha,
            entropy_weight: t.entropy_weight,
            batch_size: t.batch_size,
            max_iteration: t.max_iteration,
            base_lr: t.optimizer.base_lr,
            momentum: t.optimizer.momentum,
            weight_decay: t.optimizer.weight_decay,
            anneal_a: t.optimizer.anneal_a,
            anneal_b: t.optimizer.anneal_b,
            classifier_lr_multiplier: t.classifier_lr_multiplier,
            generator_dims: t.generator_dims,
            classifier_dims: t.classifier_dims,
            seed: t.seed,
            log_every: t.log_every,
            source: None,
            target: None,
            target_labels: None,
        }
    }
}

/// Exactly one of `path` or `moons` per domain.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    #[serde(default)]
    pub path: Option<String>,
    #[serde(default)]
    pub moons: Option<MoonsSpec>,
}

impl DomainSpec {
    pub fn validate(&self, domain: &str) -> Result<()> {
        match (&self.path, &self.moons) {
            (Some(_), None) | (None, Some(_)) => Ok(()),
            _ => Err(CliError::Config(format!(
                "field `{domain}`: give exactly one of `path` or `moons`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MoonsSpec {
    pub n_per_class: usize,
    pub noise_sd: f64,
    pub rotation_degrees: f64,
}

impl Default for MoonsSpec {
    fn default() -> MoonsSpec {
        MoonsSpec {
            n_per_class: 100,
            noise_sd: default_noise_sd(),
            rotation_degrees: 0.0,
        }
    }
}

/// Toy-benchmark default noise level.
pub fn default_noise_sd() -> f64 {
    0.1
}

pub fn method_name(m: Method) -> &'static str {
    match m {
        Method::SourceOnly => "source_only",
        Method::McdL1 => "mcd_l1",
        Method::Bcdm => "bcdm",
    }
}

pub fn parse_method(name: &str) -> Result<Method> {
    match name {
        "source_only" => Ok(Method::SourceOnly),
        "mcd_l1" => Ok(Method::McdL1),
        "bcdm" => Ok(Method::Bcdm),
        other => Err(CliError::Config(format!(
            "field `method`: unknown value {other:?} (expected source_only, mcd_l1, or bcdm)"
        ))),
    }
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let cfg: FileConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let Some(s) = &cfg.source {
            s.validate("source")?;
        }
        if let Some(t) = &cfg.target {
            t.validate("target")?;
        }
        Ok(cfg)
    }

    pub fn to_train_config(&self) -> Result<TrainConfig> {
        Ok(TrainConfig {
            method: parse_method(&self.method)?,
            alpha: self.alpha,
            entropy_weight: self.entropy_weight,
            batch_size: self.batch_size,
            max_iteration: self.max_iteration,
            optimizer: OptimizerConfig {
                base_lr: self.base_lr,
                momentum: self.momentum,
                weight_decay: self.weight_decay,
                anneal_a: self.anneal_a,
                anneal_b: self.anneal_b,
            },
            classifier_lr_multiplier: self.classifier_lr_multiplier,
            generator_dims: self.generator_dims.clone(),
            classifier_dims: self.classifier_dims.clone(),
            seed: self.seed,
            log_every: self.log_every,
        })
    }
}
