//! Pipeline configuration: strict-schema JSON with CLI overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// task name -> JSONL path, iterated in name order.
    pub tasks: BTreeMap<String, PathBuf>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "default_min_freq")]
    pub vocab_min_freq: usize,
    #[serde(default)]
    pub interpolation: InterpolationSettings,
    #[serde(default)]
    pub clustering: ClusteringSettings,
    #[serde(default)]
    pub training: TrainingSettings,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterpolationSettings {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Generated samples per original sample pair (T).
    #[serde(default = "default_per_pair")]
    pub per_pair: usize,
    #[serde(default = "default_bucket_width")]
    pub bucket_width: usize,
    /// Defaults to every unordered pair of distinct declared tasks.
    #[serde(default)]
    pub task_pairs: Option<Vec<(String, String)>>,
}

impl Default for InterpolationSettings {
    fn default() -> Self {
        InterpolationSettings {
            alpha: default_alpha(),
            per_pair: default_per_pair(),
            bucket_width: default_bucket_width(),
            task_pairs: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusteringSettings {
    /// Defaults to max(2, floor(sqrt(pool / 2))).
    #[serde(default)]
    pub cluster_count: Option<usize>,
    /// Defaults to |originals| + floor(0.5 * generated).
    #[serde(default)]
    pub budget: Option<usize>,
    #[serde(default = "default_true")]
    pub selection_enabled: bool,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

impl Default for ClusteringSettings {
    fn default() -> Self {
        ClusteringSettings {
            cluster_count: None,
            budget: None,
            selection_enabled: true,
            max_iter: default_max_iter(),
            tol: default_tol(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSettings {
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_hidden")]
    pub hidden_width: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
}

impl Default for TrainingSettings {
    fn default() -> Self {
        TrainingSettings {
            dim: default_dim(),
            hidden_width: default_hidden(),
            learning_rate: default_lr(),
            epochs: default_epochs(),
            batch_size: default_batch(),
        }
    }
}

fn default_seed() -> u64 {
    42
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_min_freq() -> usize {
    1
}
fn default_alpha() -> f64 {
    8.0
}
fn default_per_pair() -> usize {
    1
}
fn default_bucket_width() -> usize {
    16
}
fn default_true() -> bool {
    true
}
fn default_max_iter() -> usize {
    100
}
fn default_tol() -> f64 {
    1e-6
}
fn default_dim() -> usize {
    64
}
fn default_hidden() -> usize {
    128
}
fn default_lr() -> f64 {
    0.05
}
fn default_epochs() -> usize {
    3
}
fn default_batch() -> usize {
    4
}

impl PipelineConfig {
    pub fn from_tasks(tasks: BTreeMap<String, PathBuf>) -> Self {
        PipelineConfig {
            tasks,
            seed: default_seed(),
            out_dir: default_out_dir(),
            vocab_min_freq: default_min_freq(),
            interpolation: InterpolationSettings::default(),
            clustering: ClusteringSettings::default(),
            training: TrainingSettings::default(),
        }
    }

    /// Every unordered pair of declared tasks, in name order, unless the
    /// config pins an explicit list.
    pub fn task_pairs(&self) -> Vec<(String, String)> {
        if let Some(pairs) = &self.interpolation.task_pairs {
            return pairs.clone();
        }
        let names: Vec<&String> = self.tasks.keys().collect();
        let mut pairs = Vec::new();
        for i in 0..names.len() {
            for j in i + 1..names.len() {
                pairs.push((names[i].clone(), names[j].clone()));
            }
        }
        pairs
    }

    /// Collects every constraint violation, not just the first.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.tasks.is_empty() {
            problems.push("tasks: at least one task must be declared".to_string());
        }
        for (name, path) in &self.tasks {
            if name.trim().is_empty() {
                problems.push("tasks: task names must be non-empty".to_string());
            }
            if !path.exists() {
                problems.push(format!("tasks.{name}: file {} does not exist", path.display()));
            }
        }
        if self.vocab_min_freq < 1 {
            problems.push("vocab_min_freq: must be >= 1".to_string());
        }
        if !(self.interpolation.alpha > 0.0) {
            problems.push(format!(
                "interpolation.alpha: must be > 0, got {}",
                self.interpolation.alpha
            ));
        }
        if self.interpolation.bucket_width == 0 {
            problems.push("interpolation.bucket_width: must be >= 1".to_string());
        }
        if let Some(pairs) = &self.interpolation.task_pairs {
            for (a, b) in pairs {
                if a == b {
                    problems.push(format!(
                        "interpolation.task_pairs: pair ({a}, {b}) must join distinct tasks"
                    ));
                }
                for t in [a, b] {
                    if !self.tasks.contains_key(t) {
                        problems.push(format!(
                            "interpolation.task_pairs: task {t} is not declared"
                        ));
                    }
                }
            }
        }
        if let Some(m) = self.clustering.cluster_count {
            if m == 0 {
                problems.push("clustering.cluster_count: must be >= 1".to_string());
            }
        }
        if let Some(b) = self.clustering.budget {
            if b == 0 {
                problems.push("clustering.budget: must be >= 1".to_string());
            }
        }
        if self.clustering.max_iter == 0 {
            problems.push("clustering.max_iter: must be >= 1".to_string());
        }
        if self.clustering.tol < 0.0 {
            problems.push("clustering.tol: must be >= 0".to_string());
        }
        if self.training.dim < 2 {
            problems.push("training.dim: must be >= 2".to_string());
        }
        if self.training.hidden_width < 1 {
            problems.push("training.hidden_width: must be >= 1".to_string());
        }
        if !(self.training.learning_rate > 0.0) {
            problems.push(format!(
                "training.learning_rate: must be > 0, got {}",
                self.training.learning_rate
            ));
        }
        if self.training.epochs < 1 {
            problems.push("training.epochs: must be >= 1".to_string());
        }
        if self.training.batch_size < 1 {
            problems.push("training.batch_size: must be >= 1".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    /// Learning rate 2e-5, batch 16, 3 epochs.
    pub fn apply_paper_preset(&mut self) {
        self.training.learning_rate = 2e-5;
        self.training.batch_size = 16;
        self.training.epochs = 3;
    }
}

pub fn validate_config(path: &Path) -> Result<PipelineConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let config: PipelineConfig = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    config.validate()?;
    Ok(config)
}
