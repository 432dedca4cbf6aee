//! Experiment manifest. Relative paths resolve against the manifest's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use mlicl_core::corpus::{LanguageCode, LanguageRegistry, TaskKind};
use mlicl_core::neuron::{LanguageGroup, LayerWindow, Selection};
use mlicl_core::prompt::{CisMode, ModeDescriptor, TranslationStrategy};

use crate::error::CliError;

fn default_k() -> usize {
    6
}

fn default_concurrency() -> usize {
    4
}

fn default_retries() -> u32 {
    2
}

fn default_retry_base_ms() -> u64 {
    1000
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_min_words() -> usize {
    10
}

fn default_max_words() -> usize {
    15
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub id: String,
    pub path: PathBuf,
    pub kind: TaskKind,
    #[serde(default)]
    pub parallel: bool,
    /// Per-dataset resource classes; the preset registry is used when absent.
    #[serde(default)]
    pub hrls: Option<Vec<LanguageCode>>,
    #[serde(default)]
    pub lrls: Option<Vec<LanguageCode>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CisConfig {
    pub path: PathBuf,
    #[serde(default = "default_min_words")]
    pub min_words: usize,
    #[serde(default = "default_max_words")]
    pub max_words: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub base_url: String,
    pub model_id: String,
    #[serde(default)]
    pub api_key_env: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DumpConfig {
    pub mode: ModeDescriptor,
    pub group: LanguageGroup,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeuronConfig {
    #[serde(default)]
    pub window: Option<LayerWindow>,
    pub selection: Selection,
    pub dumps: Vec<DumpConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default = "default_k")]
    pub k: usize,
    pub datasets: Vec<DatasetConfig>,
    #[serde(default)]
    pub templates: Option<PathBuf>,
    #[serde(default)]
    pub system_prompts: BTreeMap<TaskKind, String>,
    #[serde(default)]
    pub cis: Option<CisConfig>,
    #[serde(default)]
    pub translations: Vec<PathBuf>,
    pub modes: Vec<ModeDescriptor>,
    pub baseline: ModeDescriptor,
    #[serde(default)]
    pub model: Option<ModelConfig>,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_retry_base_ms")]
    pub retry_base_ms: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub run_id: Option<String>,
    #[serde(default)]
    pub neuron: Option<NeuronConfig>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        config.validate()?;
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for d in &mut self.datasets {
            fix(&mut d.path);
        }
        if let Some(t) = &mut self.templates {
            fix(t);
        }
        if let Some(c) = &mut self.cis {
            fix(&mut c.path);
        }
        self.translations.iter_mut().for_each(fix);
        fix(&mut self.output_dir);
        if let Some(n) = &mut self.neuron {
            for d in &mut n.dumps {
                fix(&mut d.path);
            }
        }
    }

    pub fn registry(&self) -> Result<LanguageRegistry, CliError> {
        let mut registry = LanguageRegistry::preset();
        for d in &self.datasets {
            if d.hrls.is_some() || d.lrls.is_some() {
                let hrls = d.hrls.clone().unwrap_or_default();
                let lrls = d.lrls.clone().unwrap_or_default();
                registry
                    .insert_dataset(&d.id, hrls, lrls)
                    .map_err(|e| CliError::Usage(e.to_string()))?;
            }
        }
        Ok(registry)
    }

    /// Every configured mode has the inputs it needs.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.datasets.is_empty() {
            return Err(CliError::Usage("config lists no datasets".into()));
        }
        if self.concurrency == 0 {
            return Err(CliError::Usage("concurrency must be at least 1".into()));
        }
        let mut ids: Vec<&str> = self.datasets.iter().map(|d| d.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(CliError::Usage("dataset ids must be unique".into()));
        }
        if !self.modes.contains(&self.baseline) {
            return Err(CliError::Usage(format!("baseline {} is not among the modes", self.baseline)));
        }
        let registry = self.registry()?;
        for mode in &self.modes {
            mode.validate(&registry).map_err(|e| CliError::Usage(e.to_string()))?;
            if mode.cis != CisMode::NoCis && self.cis.is_none() {
                return Err(CliError::Usage(format!("mode {mode} needs a `cis` pool")));
            }
            if mode.translation != TranslationStrategy::NoTranslation && self.translations.is_empty() {
                return Err(CliError::Usage(format!("mode {mode} needs `translations` tables")));
            }
        }
        Ok(())
    }

    pub fn dataset(&self, id: &str) -> Result<&DatasetConfig, CliError> {
        self.datasets
            .iter()
            .find(|d| d.id == id)
            .ok_or_else(|| CliError::Usage(format!("no dataset `{id}` in config")))
    }

    /// Datasets selected by `--dataset`, or all of them.
    pub fn select_datasets(&self, only: Option<&str>) -> Result<Vec<&DatasetConfig>, CliError> {
        match only {
            Some(id) => Ok(vec![self.dataset(id)?]),
            None => Ok(self.datasets.iter().collect()),
        }
    }

    /// Modes selected by `--mode`, or all configured ones.
    pub fn select_modes(&self, only: &[ModeDescriptor]) -> Result<Vec<ModeDescriptor>, CliError> {
        if only.is_empty() {
            return Ok(self.modes.clone());
        }
        for m in only {
            if !self.modes.contains(m) {
                return Err(CliError::Usage(format!("mode {m} is not configured")));
            }
        }
        Ok(only.to_vec())
    }
}
