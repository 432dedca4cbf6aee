//! Specialized-neuron analysis over activation-count dumps.
//!
//! A dump holds, for every MLP neuron, how often its activation was
//! positive. Neurons are ranked by count (descending, ties by layer then
//! index), optionally restricted to the first and last layers, and the top
//! of the ranking is selected either by neuron fraction (top-k) or by
//! cumulative count mass (top-p). Modes are then compared by IoU.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::prompt::ModeDescriptor;
use crate::table::Table;

#[derive(Debug, thiserror::Error)]
pub enum NeuronError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid counts dump: {0}")]
    Shape(String),
    #[error("layer window {first_n}+{last_n} exceeds {layers} layers")]
    WindowTooLarge { first_n: usize, last_n: usize, layers: usize },
    #[error("selection fraction must lie in [0, 1], got {0}")]
    InvalidFraction(f64),
    #[error("top-p selection needs a nonzero total count")]
    ZeroMass,
    #[error("IoU of two empty sets is undefined")]
    EmptyUnion,
}

/// Raw activation counts, row-major `layers x width`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeuronCounts {
    pub model_id: String,
    pub layers: usize,
    pub width: usize,
    pub inputs_seen: u64,
    pub counts: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NeuronId {
    pub layer: usize,
    pub index: usize,
}

impl NeuronId {
    pub fn new(layer: usize, index: usize) -> Self {
        NeuronId { layer, index }
    }
}

impl NeuronCounts {
    pub fn validate(&self) -> Result<(), NeuronError> {
        if self.counts.len() != self.layers {
            return Err(NeuronError::Shape(format!(
                "`layers` is {} but `counts` has {} rows",
                self.layers,
                self.counts.len()
            )));
        }
        if let Some((l, row)) = self.counts.iter().enumerate().find(|(_, r)| r.len() != self.width) {
            return Err(NeuronError::Shape(format!(
                "row {l} has {} entries, expected width {}",
                row.len(),
                self.width
            )));
        }
        Ok(())
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self, NeuronError> {
        let counts: NeuronCounts = serde_json::from_str(text).map_err(|source| NeuronError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        counts.validate()?;
        Ok(counts)
    }

    pub fn load(path: &Path) -> Result<Self, NeuronError> {
        let text = std::fs::read_to_string(path).map_err(|source| NeuronError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text, path)
    }

    /// Builds a dump from sparse entries in any order; absent neurons count zero.
    pub fn from_entries<I>(
        model_id: &str,
        layers: usize,
        width: usize,
        inputs_seen: u64,
        entries: I,
    ) -> Result<Self, NeuronError>
    where
        I: IntoIterator<Item = (NeuronId, u64)>,
    {
        let mut counts = vec![vec![0; width]; layers];
        for (id, n) in entries {
            let cell = counts
                .get_mut(id.layer)
                .and_then(|row| row.get_mut(id.index))
                .ok_or_else(|| NeuronError::Shape(format!("neuron {id} outside {layers}x{width}")))?;
            *cell = n;
        }
        Ok(NeuronCounts {
            model_id: model_id.to_string(),
            layers,
            width,
            inputs_seen,
            counts,
        })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

impl fmt::Display for NeuronId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.layer, self.index)
    }
}

/// Keep layers `[0, first_n)` and `[L - last_n, L)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerWindow {
    pub first_n: usize,
    pub last_n: usize,
}

/// A dump with some layers masked out of selection.
#[derive(Debug, Clone, Copy)]
pub struct WindowedCounts<'a> {
    pub counts: &'a NeuronCounts,
    pub window: Option<LayerWindow>,
}

impl<'a> WindowedCounts<'a> {
    pub fn full(counts: &'a NeuronCounts) -> Self {
        WindowedCounts { counts, window: None }
    }

    pub fn includes_layer(&self, layer: usize) -> bool {
        match self.window {
            None => layer < self.counts.layers,
            Some(w) => layer < w.first_n || (layer >= self.counts.layers - w.last_n && layer < self.counts.layers),
        }
    }

    pub fn retained_layers(&self) -> Vec<usize> {
        (0..self.counts.layers).filter(|&l| self.includes_layer(l)).collect()
    }

    /// Eligible neurons in selection order: count descending, then id ascending.
    pub fn ranked(&self) -> Vec<(NeuronId, u64)> {
        let mut all: Vec<(NeuronId, u64)> = self
            .retained_layers()
            .into_iter()
            .flat_map(|l| {
                self.counts.counts[l]
                    .iter()
                    .enumerate()
                    .map(move |(i, &n)| (NeuronId::new(l, i), n))
            })
            .collect();
        all.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        all
    }

    pub fn eligible(&self) -> usize {
        self.retained_layers().len() * self.counts.width
    }
}

pub fn filter_layers(
    counts: &NeuronCounts,
    first_n: usize,
    last_n: usize,
) -> Result<WindowedCounts<'_>, NeuronError> {
    if first_n + last_n > counts.layers {
        return Err(NeuronError::WindowTooLarge {
            first_n,
            last_n,
            layers: counts.layers,
        });
    }
    Ok(WindowedCounts {
        counts,
        window: Some(LayerWindow { first_n, last_n }),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method", content = "value")]
pub enum Selection {
    TopK(f64),
    TopP(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub model_id: String,
    pub selection: Selection,
    pub window: Option<LayerWindow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronSet {
    pub members: BTreeSet<NeuronId>,
    pub provenance: Provenance,
}

impl NeuronSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

const FRACTION_TOLERANCE: f64 = 1e-9;

fn check_fraction(x: f64) -> Result<(), NeuronError> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(NeuronError::InvalidFraction(x))
    }
}

/// `ceil(k * e)`, except that a product within rounding noise of an integer
/// is taken as that integer (so 0.7 * 10 selects 7, not 8).
pub fn top_k_size(k: f64, eligible: usize) -> usize {
    let x = k * eligible as f64;
    let r = x.round();
    if (x - r).abs() <= FRACTION_TOLERANCE * x.max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

fn make_set(view: &WindowedCounts<'_>, selection: Selection, members: impl IntoIterator<Item = NeuronId>) -> NeuronSet {
    NeuronSet {
        members: members.into_iter().collect(),
        provenance: Provenance {
            model_id: view.counts.model_id.clone(),
            selection,
            window: view.window,
        },
    }
}

/// The first `ceil(k * E)` neurons of the ranking, `E` being the number of
/// eligible neurons.
pub fn select_top_k(view: &WindowedCounts<'_>, k: f64) -> Result<NeuronSet, NeuronError> {
    check_fraction(k)?;
    let take = top_k_size(k, view.eligible());
    let ranked = view.ranked();
    Ok(make_set(view, Selection::TopK(k), ranked.into_iter().take(take).map(|(id, _)| id)))
}

/// The shortest prefix of the ranking whose counts sum to at least
/// `p` times the eligible total.
pub fn select_top_p(view: &WindowedCounts<'_>, p: f64) -> Result<NeuronSet, NeuronError> {
    check_fraction(p)?;
    if p == 0.0 {
        return Ok(make_set(view, Selection::TopP(p), []));
    }
    let ranked = view.ranked();
    let total: u64 = ranked.iter().map(|(_, n)| n).sum();
    if total == 0 {
        return Err(NeuronError::ZeroMass);
    }
    let target = p * total as f64 * (1.0 - FRACTION_TOLERANCE);
    let mut running = 0u64;
    let mut members = Vec::new();
    for (id, n) in ranked {
        members.push(id);
        running += n;
        if running as f64 >= target {
            break;
        }
    }
    Ok(make_set(view, Selection::TopP(p), members))
}

pub fn iou(a: &NeuronSet, b: &NeuronSet) -> Result<f64, NeuronError> {
    let inter = a.members.intersection(&b.members).count();
    let union = a.members.len() + b.members.len() - inter;
    if union == 0 {
        return Err(NeuronError::EmptyUnion);
    }
    Ok(inter as f64 / union as f64)
}

/// Which test languages the activations were recorded on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LanguageGroup {
    #[serde(rename = "all")]
    All,
    #[serde(rename = "lrl")]
    Lrl,
    #[serde(rename = "hrl")]
    Hrl,
}

impl LanguageGroup {
    pub const ALL: [LanguageGroup; 3] = [LanguageGroup::All, LanguageGroup::Lrl, LanguageGroup::Hrl];
}

impl fmt::Display for LanguageGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LanguageGroup::All => "All Langs",
            LanguageGroup::Lrl => "LRL",
            LanguageGroup::Hrl => "HRL",
        })
    }
}

/// All unordered pairs of `modes`, in listing order.
pub fn mode_pairs(modes: &[ModeDescriptor]) -> Vec<(ModeDescriptor, ModeDescriptor)> {
    let mut out = Vec::new();
    for (i, &a) in modes.iter().enumerate() {
        for &b in &modes[i + 1..] {
            out.push((a, b));
        }
    }
    out
}

/// IoU in percent per mode pair and language group; [`UNDEFINED`](crate::stats::UNDEFINED) where a set is
/// missing or both sets are empty.
pub fn iou_table(
    sets: &BTreeMap<(ModeDescriptor, LanguageGroup), NeuronSet>,
    pairs: &[(ModeDescriptor, ModeDescriptor)],
) -> Table {
    let mut headers = vec!["pair".to_string()];
    headers.extend(LanguageGroup::ALL.iter().map(ToString::to_string));
    let mut table = Table::new(headers);
    for &(a, b) in pairs {
        let mut row = vec![format!("{a} - {b}")];
        for group in LanguageGroup::ALL {
            let cell = match (sets.get(&(a, group)), sets.get(&(b, group))) {
                (Some(x), Some(y)) => iou(x, y).map(|v| format!("{:.2}", v * 100.0)).ok(),
                _ => None,
            };
            row.push(cell.unwrap_or_else(|| crate::stats::UNDEFINED.to_string()));
        }
        table.push(row);
    }
    table
}
