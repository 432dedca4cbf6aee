//! The stages behind each subcommand, plus the output directory layout.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;
use tracing::info;

use mlicl_core::corpus::{filter_cis_pool, load_dataset_as, CisPool, Dataset, RawCisSet, TemplateSet};
use mlicl_core::inference::{
    read_log, run_eval, GenerationConfig, HttpChatClient, RetryPolicy, RunOptions, RunSummary,
};
use mlicl_core::neuron::{
    filter_layers, iou_table, mode_pairs, select_top_k, select_top_p, LanguageGroup, NeuronCounts,
    NeuronSet, Selection, WindowedCounts,
};
use mlicl_core::prompt::{ChatPrompt, LookupTranslator, ModeDescriptor, PromptContext, Translator};
use mlicl_core::sampling::{make_plan, CisSampling, SamplingPlan};
use mlicl_core::scoring::{accuracy, AccuracyTable, CorrectnessVector};
use mlicl_core::stats::{compare_modes, delta_table, SignificanceRow};
use mlicl_core::table::Table;

use crate::config::{DatasetConfig, ExperimentConfig};
use crate::error::CliError;

/// Mode names contain only `[a-z0-9+-]`, so they are used verbatim in file names.
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn plan(&self, dataset: &str) -> PathBuf {
        self.root.join("plans").join(format!("{dataset}.json"))
    }

    pub fn prompts(&self, dataset: &str, mode: ModeDescriptor) -> PathBuf {
        self.root.join("prompts").join(dataset).join(format!("{mode}.jsonl"))
    }

    pub fn run_log(&self, dataset: &str, mode: ModeDescriptor) -> PathBuf {
        self.root.join("runs").join(dataset).join(format!("{mode}.jsonl"))
    }

    pub fn scores(&self, dataset: &str, ext: &str) -> PathBuf {
        self.root.join("scores").join(format!("{dataset}.{ext}"))
    }

    pub fn significance(&self, dataset: &str, ext: &str) -> PathBuf {
        self.root.join("significance").join(format!("{dataset}.{ext}"))
    }

    pub fn neuron(&self, file: &str) -> PathBuf {
        self.root.join("neuron").join(file)
    }

    pub fn report(&self) -> PathBuf {
        self.root.join("report.md")
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// Accuracy tables and correctness vectors of one dataset, baseline first.
pub struct Scored {
    pub modes: Vec<(AccuracyTable, Vec<CorrectnessVector>)>,
}

pub struct Experiment {
    pub config: ExperimentConfig,
    pub layout: Layout,
    registry: mlicl_core::corpus::LanguageRegistry,
}

impl Experiment {
    pub fn new(config: ExperimentConfig, out: Option<PathBuf>) -> Result<Self, CliError> {
        let registry = config.registry()?;
        let root = out.unwrap_or_else(|| config.output_dir.clone());
        Ok(Experiment {
            config,
            layout: Layout { root },
            registry,
        })
    }

    pub fn load_dataset(&self, d: &DatasetConfig) -> Result<Dataset, CliError> {
        Ok(load_dataset_as(&d.path, &d.id, d.kind, d.parallel)?)
    }

    pub fn templates(&self) -> Result<TemplateSet, CliError> {
        let mut set = match &self.config.templates {
            Some(path) => TemplateSet::load(path)?,
            None => TemplateSet::english_defaults(),
        };
        for (&kind, text) in &self.config.system_prompts {
            set.set_system_prompt(kind, text.clone());
        }
        Ok(set)
    }

    pub fn cis_pool(&self) -> Result<Option<CisPool>, CliError> {
        let Some(cis) = &self.config.cis else {
            return Ok(None);
        };
        let raw = RawCisSet::load(&cis.path)?;
        Ok(Some(filter_cis_pool(&raw, cis.min_words, cis.max_words)?))
    }

    pub fn translator(&self) -> Result<Option<LookupTranslator>, CliError> {
        if self.config.translations.is_empty() {
            return Ok(None);
        }
        let mut t = LookupTranslator::new();
        for path in &self.config.translations {
            t.load_file(path).map_err(|e| CliError::Data(e.to_string()))?;
        }
        Ok(Some(t))
    }

    pub fn plan(&self, dataset: &Dataset, pool: Option<&CisPool>) -> Result<SamplingPlan, CliError> {
        let (hrls, _) = self.registry.partition(&dataset.dataset_id, &dataset.languages());
        let cis_langs = pool.map(CisPool::languages).unwrap_or_default();
        let cis = pool.map(|p| CisSampling {
            languages: &cis_langs,
            pool_size: p.len(),
        });
        Ok(make_plan(
            self.config.seed,
            dataset.test_size(),
            self.config.k,
            dataset.train_size(),
            &hrls,
            cis,
        )?)
    }

    /// Prompts of every requested mode, in (language, row) order.
    pub fn prompts(
        &self,
        d: &DatasetConfig,
        modes: &[ModeDescriptor],
    ) -> Result<Vec<(ModeDescriptor, Vec<ChatPrompt>)>, CliError> {
        let dataset = self.load_dataset(d)?;
        let templates = self.templates()?;
        let pool = self.cis_pool()?;
        let translator = self.translator()?;
        let plan = self.plan(&dataset, pool.as_ref())?;
        let mut ctx = PromptContext::new(&dataset, &templates, &plan);
        if let Some(p) = &pool {
            ctx = ctx.with_cis_pool(p);
        }
        modes
            .iter()
            .map(|&mode| {
                let t = translator.as_ref().map(|t| t as &dyn Translator);
                Ok((mode, ctx.build_all(mode, t)?))
            })
            .collect()
    }

    pub async fn run(
        &self,
        d: &DatasetConfig,
        modes: &[ModeDescriptor],
        resume: bool,
    ) -> Result<RunSummary, CliError> {
        let model = self
            .config
            .model
            .as_ref()
            .ok_or_else(|| CliError::Usage("config has no `model` section".into()))?;
        let client = HttpChatClient::new(&model.base_url, model.api_key_env.as_deref())?;
        let gen = GenerationConfig::for_kind(&model.model_id, d.kind);
        let options = RunOptions {
            run_id: self.config.run_id.clone().unwrap_or_else(|| "run".into()),
            max_in_flight: self.config.concurrency,
            retry: RetryPolicy {
                retries: self.config.retries,
                base_delay: Duration::from_millis(self.config.retry_base_ms),
            },
        };
        let mut total = RunSummary::default();
        for (mode, prompts) in self.prompts(d, modes)? {
            let log = self.layout.run_log(&d.id, mode);
            let existing = std::fs::metadata(&log).map(|m| m.len() > 0).unwrap_or(false);
            if existing && !resume {
                return Err(CliError::Usage(format!(
                    "{} already exists; pass --resume to continue it",
                    log.display()
                )));
            }
            let summary = run_eval(prompts, &client, &gen, &options, &log).await?;
            info!(dataset = %d.id, %mode, ?summary, "run finished");
            total.completed += summary.completed;
            total.failed += summary.failed;
            total.skipped += summary.skipped;
        }
        Ok(total)
    }

    /// Scores `modes` plus the baseline from their run logs.
    pub fn score(&self, d: &DatasetConfig, modes: &[ModeDescriptor]) -> Result<Scored, CliError> {
        let dataset = self.load_dataset(d)?;
        let mut ordered = vec![self.config.baseline];
        ordered.extend(modes.iter().copied().filter(|&m| m != self.config.baseline));
        let mut out = Vec::new();
        for mode in ordered {
            let log = self.layout.run_log(&d.id, mode);
            if !log.exists() {
                return Err(CliError::Data(format!("no run log for {}/{mode} at {}", d.id, log.display())));
            }
            let records = read_log(&log)?;
            out.push(accuracy(&records, &dataset, &self.registry, mode)?);
        }
        Ok(Scored { modes: out })
    }

    pub fn neuron_sets(&self) -> Result<BTreeMap<(ModeDescriptor, LanguageGroup), NeuronSet>, CliError> {
        let cfg = self
            .config
            .neuron
            .as_ref()
            .ok_or_else(|| CliError::Usage("config has no `neuron` section".into()))?;
        let mut sets = BTreeMap::new();
        for dump in &cfg.dumps {
            let counts = NeuronCounts::load(&dump.path)?;
            let view = match cfg.window {
                Some(w) => filter_layers(&counts, w.first_n, w.last_n)?,
                None => WindowedCounts::full(&counts),
            };
            let set = match cfg.selection {
                Selection::TopK(k) => select_top_k(&view, k)?,
                Selection::TopP(p) => select_top_p(&view, p)?,
            };
            if sets.insert((dump.mode, dump.group), set).is_some() {
                return Err(CliError::Usage(format!("two dumps for {} / {}", dump.mode, dump.group)));
            }
        }
        Ok(sets)
    }

    /// Dump modes in first-listed order.
    pub fn neuron_modes(&self) -> Vec<ModeDescriptor> {
        let mut modes = Vec::new();
        for d in self.config.neuron.iter().flat_map(|n| &n.dumps) {
            if !modes.contains(&d.mode) {
                modes.push(d.mode);
            }
        }
        modes
    }
}

impl Scored {
    fn baseline(&self) -> &(AccuracyTable, Vec<CorrectnessVector>) {
        &self.modes[0]
    }

    /// McNemar rows of every non-baseline mode against the baseline.
    pub fn significance(&self, only: &[ModeDescriptor]) -> Result<Vec<SignificanceRow>, CliError> {
        let (base_table, base_vecs) = self.baseline();
        let mut rows = Vec::new();
        for (table, vecs) in &self.modes[1..] {
            if only.is_empty() || only.contains(&table.mode) {
                rows.extend(compare_modes(base_table, base_vecs, table.mode, vecs)?);
            }
        }
        Ok(rows)
    }

    /// Accuracy per mode with its change against the baseline and significance stars.
    pub fn accuracy_table(&self) -> Result<(Table, Table), CliError> {
        let tests = self
            .significance(&[])?
            .into_iter()
            .filter_map(|r| r.result.map(|res| ((r.cmp, r.column), res)))
            .collect();
        let others: Vec<AccuracyTable> = self.modes[1..].iter().map(|(t, _)| t.clone()).collect();
        let deltas = delta_table(&self.baseline().0, &others, &tests)?;
        Ok((deltas.to_wide(), deltas.to_long()))
    }
}

pub fn iou_report(
    sets: &BTreeMap<(ModeDescriptor, LanguageGroup), NeuronSet>,
    modes: &[ModeDescriptor],
) -> Table {
    iou_table(sets, &mode_pairs(modes))
}

#[derive(Serialize)]
struct SetRecord<'a> {
    mode: String,
    group: LanguageGroup,
    #[serde(flatten)]
    set: &'a NeuronSet,
}

/// Selected neuron sets as JSON, one entry per (mode, group).
pub fn sets_json(sets: &BTreeMap<(ModeDescriptor, LanguageGroup), NeuronSet>) -> String {
    let records: Vec<SetRecord<'_>> = sets
        .iter()
        .map(|((mode, group), set)| SetRecord {
            mode: mode.to_string(),
            group: *group,
            set,
        })
        .collect();
    serde_json::to_string_pretty(&records).expect("neuron sets serialize") + "\n"
}
