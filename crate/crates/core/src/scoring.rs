//! Answer extraction, exact-match judgement and accuracy aggregation.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, LanguageCode, LanguageRegistry, TaskKind};
use crate::decimal::decimal_eq;
use crate::inference::RunRecord;
use crate::prompt::ModeDescriptor;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ScoringError {
    #[error("no records for dataset `{dataset_id}`, language `{lang}`, mode `{mode}`")]
    NoRecords {
        dataset_id: String,
        lang: LanguageCode,
        mode: ModeDescriptor,
    },
    #[error("record for `{lang}` test index {index} is outside the split of size {size}")]
    IndexOutOfRange {
        lang: LanguageCode,
        index: usize,
        size: usize,
    },
    #[error("language `{0}` is not part of the dataset")]
    UnknownLanguage(LanguageCode),
    #[error("two ok records for `{lang}` test index {index}")]
    DuplicateRecord { lang: LanguageCode, index: usize },
}

fn is_alnum_at(chars: &[char], i: Option<usize>) -> bool {
    i.and_then(|i| chars.get(i)).is_some_and(|c| c.is_alphanumeric())
}

fn digits_from(chars: &[char], mut i: usize) -> usize {
    while chars.get(i).is_some_and(char::is_ascii_digit) {
        i += 1;
    }
    i
}

/// End of the numeral that starts at `start` (which must be a digit).
fn numeral_end(chars: &[char], start: usize) -> usize {
    let mut end = digits_from(chars, start);
    while chars.get(end) == Some(&',') && (1..=3).all(|d| chars.get(end + d).is_some_and(char::is_ascii_digit))
    {
        end += 4;
    }
    if chars.get(end) == Some(&'.') && chars.get(end + 1).is_some_and(char::is_ascii_digit) {
        end = digits_from(chars, end + 1);
    }
    end
}

/// Last numeral in `text`, scanning left to right for maximal tokens of the
/// form `-?[0-9]+(,[0-9]{3})*(\.[0-9]+)?`, with group commas removed. A minus
/// sign belongs to the numeral only when not preceded by a letter or digit.
pub fn last_numeral(text: &str) -> Option<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut last = None;
    let mut i = 0;
    while i < chars.len() {
        let signed = chars[i] == '-'
            && chars.get(i + 1).is_some_and(char::is_ascii_digit)
            && !is_alnum_at(&chars, i.checked_sub(1));
        let digit_start = if signed { i + 1 } else { i };
        if chars[digit_start].is_ascii_digit() {
            let end = numeral_end(&chars, digit_start);
            last = Some((i, end));
            i = end;
        } else {
            i += 1;
        }
    }
    last.map(|(s, e)| chars[s..e].iter().filter(|&&c| c != ',').collect())
}

/// First occurrence of any of `words` (ASCII, matched case-insensitively)
/// not flanked by letters or digits. Returns the index into `words`.
fn first_standalone(text: &str, words: &[&str]) -> Option<usize> {
    let chars: Vec<char> = text.chars().collect();
    let lower: Vec<char> = chars.iter().map(|c| c.to_ascii_lowercase()).collect();
    for start in 0..chars.len() {
        if is_alnum_at(&chars, start.checked_sub(1)) {
            continue;
        }
        for (w, word) in words.iter().enumerate() {
            let len = word.chars().count();
            let matches = lower.len() >= start + len
                && lower[start..start + len].iter().copied().eq(word.chars());
            if matches && !is_alnum_at(&chars, Some(start + len)) {
                return Some(w);
            }
        }
    }
    None
}

/// Pulls the predicted label out of a raw model response.
pub fn extract_answer(text: &str, kind: TaskKind) -> Option<String> {
    match kind {
        TaskKind::MathCot => last_numeral(text),
        TaskKind::CopaChoice => first_standalone(text, &["1", "2"]).map(|i| ["1", "2"][i].to_string()),
        TaskKind::WicBinary => first_standalone(text, &["yes", "no"]).map(|i| ["Yes", "No"][i].to_string()),
    }
}

pub fn is_correct(extracted: Option<&str>, gold: &str, kind: TaskKind) -> bool {
    let Some(extracted) = extracted else {
        return false;
    };
    match kind {
        TaskKind::MathCot => decimal_eq(extracted, gold),
        TaskKind::CopaChoice => extracted.trim() == gold.trim(),
        TaskKind::WicBinary => extracted.trim().eq_ignore_ascii_case(gold.trim()),
    }
}

/// Per-item correctness of one mode on one language split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectnessVector {
    pub dataset_id: String,
    pub lang: LanguageCode,
    pub mode: ModeDescriptor,
    pub bits: Vec<bool>,
}

impl CorrectnessVector {
    pub fn correct(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn accuracy(&self) -> f64 {
        if self.bits.is_empty() {
            0.0
        } else {
            self.correct() as f64 / self.bits.len() as f64
        }
    }
}

/// A column of an accuracy table: one language or an aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Column {
    Lang(LanguageCode),
    LrlAvg,
    HrlAvg,
    AllAvg,
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Column::Lang(l) => write!(f, "{l}"),
            Column::LrlAvg => f.write_str("LRL Avg"),
            Column::HrlAvg => f.write_str("HRL Avg"),
            Column::AllAvg => f.write_str("ALL Avg"),
        }
    }
}

/// Accuracies in [0, 1] per language plus unweighted means per resource class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyTable {
    pub dataset_id: String,
    pub mode: ModeDescriptor,
    pub per_lang: BTreeMap<LanguageCode, f64>,
    pub lrls: Vec<LanguageCode>,
    pub hrls: Vec<LanguageCode>,
    pub lrl_avg: Option<f64>,
    pub hrl_avg: Option<f64>,
    pub all_avg: Option<f64>,
}

fn mean_over(per_lang: &BTreeMap<LanguageCode, f64>, langs: &[LanguageCode]) -> Option<f64> {
    if langs.is_empty() {
        return None;
    }
    let sum: f64 = langs.iter().map(|l| per_lang[l]).sum();
    Some(sum / langs.len() as f64)
}

impl AccuracyTable {
    /// Builds the aggregates, splitting languages by their class in `dataset_id`.
    pub fn from_per_lang(
        dataset_id: &str,
        mode: ModeDescriptor,
        per_lang: BTreeMap<LanguageCode, f64>,
        registry: &LanguageRegistry,
    ) -> Self {
        let langs: Vec<LanguageCode> = per_lang.keys().copied().collect();
        let (hrls, lrls) = registry.partition(dataset_id, &langs);
        AccuracyTable {
            dataset_id: dataset_id.to_string(),
            mode,
            lrl_avg: mean_over(&per_lang, &lrls),
            hrl_avg: mean_over(&per_lang, &hrls),
            all_avg: mean_over(&per_lang, &langs),
            per_lang,
            lrls,
            hrls,
        }
    }

    /// Language columns (LRLs first, then HRLs) followed by the aggregates.
    pub fn columns(&self) -> Vec<Column> {
        let mut cols: Vec<Column> = self.lrls.iter().chain(&self.hrls).map(|&l| Column::Lang(l)).collect();
        cols.extend([Column::LrlAvg, Column::HrlAvg, Column::AllAvg]);
        cols
    }

    pub fn get(&self, column: Column) -> Option<f64> {
        match column {
            Column::Lang(l) => self.per_lang.get(&l).copied(),
            Column::LrlAvg => self.lrl_avg,
            Column::HrlAvg => self.hrl_avg,
            Column::AllAvg => self.all_avg,
        }
    }

    /// Languages that a column pools over.
    pub fn column_languages(&self, column: Column) -> Vec<LanguageCode> {
        match column {
            Column::Lang(l) => vec![l],
            Column::LrlAvg => self.lrls.clone(),
            Column::HrlAvg => self.hrls.clone(),
            Column::AllAvg => self.per_lang.keys().copied().collect(),
        }
    }
}

/// Scores every record of `mode` on `dataset`. Failed or missing responses
/// count as wrong; a language with no records at all is an error.
pub fn accuracy(
    records: &[RunRecord],
    dataset: &Dataset,
    registry: &LanguageRegistry,
    mode: ModeDescriptor,
) -> Result<(AccuracyTable, Vec<CorrectnessVector>), ScoringError> {
    let n = dataset.test_size();
    let mut vectors: BTreeMap<LanguageCode, (Vec<bool>, bool)> = dataset
        .languages()
        .into_iter()
        .map(|l| (l, (vec![false; n], false)))
        .collect();
    let mut ok_seen: HashMap<(LanguageCode, usize), ()> = HashMap::new();

    for record in records {
        let key = &record.key;
        if key.dataset_id != dataset.dataset_id || key.mode() != mode {
            continue;
        }
        let lang = key.test_lang;
        let (bits, seen) = vectors
            .get_mut(&lang)
            .ok_or(ScoringError::UnknownLanguage(lang))?;
        *seen = true;
        if key.test_index >= n {
            return Err(ScoringError::IndexOutOfRange {
                lang,
                index: key.test_index,
                size: n,
            });
        }
        if !record.is_ok() {
            continue;
        }
        if ok_seen.insert((lang, key.test_index), ()).is_some() {
            return Err(ScoringError::DuplicateRecord {
                lang,
                index: key.test_index,
            });
        }
        let split = dataset.split(lang).map_err(|_| ScoringError::UnknownLanguage(lang))?;
        let gold = split.test[key.test_index].gold_label();
        let extracted = extract_answer(&record.response_text, dataset.kind);
        bits[key.test_index] = is_correct(extracted.as_deref(), &gold, dataset.kind);
    }

    let mut per_lang = BTreeMap::new();
    let mut out = Vec::new();
    for (lang, (bits, seen)) in vectors {
        if !seen {
            return Err(ScoringError::NoRecords {
                dataset_id: dataset.dataset_id.clone(),
                lang,
                mode,
            });
        }
        let v = CorrectnessVector {
            dataset_id: dataset.dataset_id.clone(),
            lang,
            mode,
            bits,
        };
        per_lang.insert(lang, v.accuracy());
        out.push(v);
    }
    let table = AccuracyTable::from_per_lang(&dataset.dataset_id, mode, per_lang, registry);
    Ok((table, out))
}
