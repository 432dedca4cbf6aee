//! Multilingual task corpora: loading, validation and rendering.
//!
//! A dataset lives in a directory with one sub-directory per language,
//! each holding `train.json` and `test.json` (arrays of records):
//!
//! ```text
//! mgsm/
//!   en/train.json  en/test.json
//!   de/train.json  de/test.json
//! ```

mod cis;
mod combined;
mod language;
mod templates;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::decimal::canonical_decimal;

pub use cis::{filter_cis_pool, word_count, CisPool, RawCisSet};
pub use combined::{build_combined, CombinedCorpus};
pub use language::{
    DatasetLanguages, LanguageCode, LanguageRegistry, ResourceClass, KNOWN_CODES, PRESET_HRLS,
};
pub use templates::{mark_target_word, render_question, Template, TemplateSet};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid JSON: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: record {index}: missing field `{field}`")]
    MissingField {
        path: PathBuf,
        index: usize,
        field: &'static str,
    },
    #[error("{path}: record {index}: field `{field}`: {message}")]
    InvalidField {
        path: PathBuf,
        index: usize,
        field: &'static str,
        message: String,
    },
    #[error("{split} split of `{lang}` has {found} records, expected {expected}")]
    SizeMismatch {
        split: &'static str,
        lang: LanguageCode,
        expected: usize,
        found: usize,
    },
    #[error("{split} record {index}: `{field}` differs between `{first}` and `{other}`")]
    ParallelismViolation {
        split: &'static str,
        index: usize,
        field: &'static str,
        first: LanguageCode,
        other: LanguageCode,
    },
    #[error("invalid language code `{0}`")]
    InvalidLanguageCode(String),
    #[error("unknown language `{0}`")]
    UnknownLanguage(String),
    #[error("no template for {kind:?} in `{lang}`")]
    MissingTemplate { kind: TaskKind, lang: LanguageCode },
    #[error("template error: {0}")]
    Template(String),
    #[error("target word `{word}` does not occur in `{sentence}`")]
    TargetWordAbsent { word: String, sentence: String },
    #[error("CIS pool has no English split")]
    MissingEnglishSplit,
    #[error("dataset `{dataset}` split `{lang}` has {found} test records, need {needed}")]
    InsufficientSplit {
        dataset: String,
        lang: LanguageCode,
        needed: usize,
        found: usize,
    },
    #[error("language counts differ across combined sub-corpora: {0}")]
    UnequalLanguageCounts(String),
    #[error("{0}")]
    Invalid(String),
}

/// Task family; fixes the record schema, verbalizer and decoding budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    MathCot,
    CopaChoice,
    WicBinary,
}

impl TaskKind {
    pub const ALL: [TaskKind; 3] = [TaskKind::MathCot, TaskKind::CopaChoice, TaskKind::WicBinary];

    pub fn max_new_tokens(self) -> u32 {
        match self {
            TaskKind::MathCot => 500,
            TaskKind::CopaChoice | TaskKind::WicBinary => 10,
        }
    }

    pub fn expected_output(self) -> &'static str {
        match self {
            TaskKind::MathCot => "numeral",
            TaskKind::CopaChoice => "\"1\" / \"2\"",
            TaskKind::WicBinary => "\"Yes\" / \"No\"",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::MathCot => "math_cot",
            TaskKind::CopaChoice => "copa_choice",
            TaskKind::WicBinary => "wic_binary",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CopaRelation {
    Cause,
    Effect,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MathItem {
    pub question: String,
    /// English chain of thought; absent on test records.
    pub answer_cot: Option<String>,
    /// Canonical decimal string.
    pub answer_number: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CopaItem {
    pub premise: String,
    pub choice1: String,
    pub choice2: String,
    pub relation: CopaRelation,
    /// 1 or 2.
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WicItem {
    pub example1: String,
    pub example2: String,
    pub target_word: String,
    /// 1 = same meaning, 0 = different.
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Datapoint {
    MathCot(MathItem),
    CopaChoice(CopaItem),
    WicBinary(WicItem),
}

impl Datapoint {
    pub fn kind(&self) -> TaskKind {
        match self {
            Datapoint::MathCot(_) => TaskKind::MathCot,
            Datapoint::CopaChoice(_) => TaskKind::CopaChoice,
            Datapoint::WicBinary(_) => TaskKind::WicBinary,
        }
    }

    /// Gold label in its textual form: the canonical number, "1"/"2", or "Yes"/"No".
    pub fn gold_label(&self) -> String {
        match self {
            Datapoint::MathCot(m) => m.answer_number.clone(),
            Datapoint::CopaChoice(c) => c.label.to_string(),
            Datapoint::WicBinary(w) => if w.label == 1 { "Yes" } else { "No" }.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Split {
    pub train: Vec<Datapoint>,
    pub test: Vec<Datapoint>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub dataset_id: String,
    pub kind: TaskKind,
    pub parallel: bool,
    /// Keyed in ascending code order.
    pub splits: BTreeMap<LanguageCode, Split>,
}

impl Dataset {
    /// Builds a dataset from in-memory splits and checks every invariant.
    pub fn new(
        dataset_id: impl Into<String>,
        kind: TaskKind,
        parallel: bool,
        splits: BTreeMap<LanguageCode, Split>,
    ) -> Result<Self, CorpusError> {
        let ds = Dataset {
            dataset_id: dataset_id.into(),
            kind,
            parallel,
            splits,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn languages(&self) -> Vec<LanguageCode> {
        self.splits.keys().copied().collect()
    }

    pub fn train_size(&self) -> usize {
        self.splits.values().next().map_or(0, |s| s.train.len())
    }

    pub fn test_size(&self) -> usize {
        self.splits.values().next().map_or(0, |s| s.test.len())
    }

    pub fn split(&self, lang: LanguageCode) -> Result<&Split, CorpusError> {
        self.splits.get(&lang).ok_or_else(|| {
            CorpusError::Invalid(format!(
                "dataset `{}` has no `{lang}` split",
                self.dataset_id
            ))
        })
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let (first_lang, first) = self
            .splits
            .iter()
            .next()
            .ok_or_else(|| CorpusError::Invalid(format!("dataset `{}` is empty", self.dataset_id)))?;
        for (lang, split) in &self.splits {
            for (name, items, expected) in [
                ("train", &split.train, first.train.len()),
                ("test", &split.test, first.test.len()),
            ] {
                if items.len() != expected {
                    return Err(CorpusError::SizeMismatch {
                        split: name,
                        lang: *lang,
                        expected,
                        found: items.len(),
                    });
                }
                for dp in items {
                    if dp.kind() != self.kind {
                        return Err(CorpusError::Invalid(format!(
                            "`{lang}` {name} split holds a {:?} record in a {:?} dataset",
                            dp.kind(),
                            self.kind
                        )));
                    }
                    check_non_empty(dp)?;
                }
            }
            if self.kind == TaskKind::MathCot {
                if let Some(i) = split.train.iter().position(|dp| match dp {
                    Datapoint::MathCot(m) => m.answer_cot.is_none(),
                    _ => false,
                }) {
                    return Err(CorpusError::Invalid(format!(
                        "`{lang}` train record {i} has no chain-of-thought answer"
                    )));
                }
            }
        }
        if self.parallel {
            for (lang, split) in &self.splits {
                for (name, items, reference) in [
                    ("train", &split.train, &first.train),
                    ("test", &split.test, &first.test),
                ] {
                    for (index, (a, b)) in reference.iter().zip(items).enumerate() {
                        if let Some(field) = parallel_mismatch(a, b) {
                            return Err(CorpusError::ParallelismViolation {
                                split: name,
                                index,
                                field,
                                first: *first_lang,
                                other: *lang,
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_non_empty(dp: &Datapoint) -> Result<(), CorpusError> {
    let fields: Vec<(&str, &str)> = match dp {
        Datapoint::MathCot(m) => {
            let mut v = vec![("question", m.question.as_str())];
            if let Some(cot) = &m.answer_cot {
                v.push(("answer", cot.as_str()));
            }
            v
        }
        Datapoint::CopaChoice(c) => vec![
            ("premise", c.premise.as_str()),
            ("choice1", c.choice1.as_str()),
            ("choice2", c.choice2.as_str()),
        ],
        Datapoint::WicBinary(w) => vec![
            ("example_1", w.example1.as_str()),
            ("example_2", w.example2.as_str()),
            ("target_word", w.target_word.as_str()),
        ],
    };
    match fields.iter().find(|(_, v)| v.trim().is_empty()) {
        Some((name, _)) => Err(CorpusError::Invalid(format!("empty text field `{name}`"))),
        None => Ok(()),
    }
}

fn parallel_mismatch(a: &Datapoint, b: &Datapoint) -> Option<&'static str> {
    match (a, b) {
        (Datapoint::MathCot(x), Datapoint::MathCot(y)) if x.answer_number != y.answer_number => {
            Some("answer_number")
        }
        (Datapoint::CopaChoice(x), Datapoint::CopaChoice(y)) => {
            if x.label != y.label {
                Some("label")
            } else if x.relation != y.relation {
                Some("question")
            } else {
                None
            }
        }
        _ => None,
    }
}

// ---------------------------------------------------------------- loading

/// Loads `path/<lang>/{train,test}.json`. The dataset id is the directory name.
pub fn load_dataset(
    path: &Path,
    kind: TaskKind,
    expected_parallel: bool,
) -> Result<Dataset, CorpusError> {
    let dataset_id = path
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("dataset")
        .to_string();
    load_dataset_as(path, &dataset_id, kind, expected_parallel)
}

pub fn load_dataset_as(
    path: &Path,
    dataset_id: &str,
    kind: TaskKind,
    expected_parallel: bool,
) -> Result<Dataset, CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut splits = BTreeMap::new();
    for entry in fs::read_dir(path).map_err(io_err)? {
        let entry = entry.map_err(io_err)?;
        if !entry.file_type().map_err(io_err)?.is_dir() {
            continue;
        }
        let name = entry.file_name();
        let name = name.to_string_lossy();
        let lang = LanguageCode::new(&name)?;
        let dir = entry.path();
        let train = load_split_file(&dir.join("train.json"), kind, true)?;
        let test = load_split_file(&dir.join("test.json"), kind, false)?;
        splits.insert(lang, Split { train, test });
    }
    Dataset::new(dataset_id, kind, expected_parallel, splits)
}

/// Parses one split file (a JSON array of records of the given kind).
pub fn load_split_file(
    path: &Path,
    kind: TaskKind,
    is_train: bool,
) -> Result<Vec<Datapoint>, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let value: Value = serde_json::from_str(&text).map_err(|source| CorpusError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let records = value.as_array().ok_or_else(|| {
        CorpusError::Invalid(format!("{}: expected a JSON array", path.display()))
    })?;
    records
        .iter()
        .enumerate()
        .map(|(index, record)| {
            let obj = record.as_object().ok_or_else(|| CorpusError::InvalidField {
                path: path.to_path_buf(),
                index,
                field: "record",
                message: "expected an object".into(),
            })?;
            let ctx = RecordCtx { path, index, obj };
            parse_record(&ctx, kind, is_train)
        })
        .collect()
}

struct RecordCtx<'a> {
    path: &'a Path,
    index: usize,
    obj: &'a Map<String, Value>,
}

impl RecordCtx<'_> {
    fn invalid(&self, field: &'static str, message: impl Into<String>) -> CorpusError {
        CorpusError::InvalidField {
            path: self.path.to_path_buf(),
            index: self.index,
            field,
            message: message.into(),
        }
    }

    fn get(&self, field: &'static str) -> Result<&Value, CorpusError> {
        match self.obj.get(field) {
            Some(v) if !v.is_null() => Ok(v),
            _ => Err(CorpusError::MissingField {
                path: self.path.to_path_buf(),
                index: self.index,
                field,
            }),
        }
    }

    fn text(&self, field: &'static str) -> Result<String, CorpusError> {
        let s = self
            .get(field)?
            .as_str()
            .ok_or_else(|| self.invalid(field, "expected a string"))?;
        if s.trim().is_empty() {
            return Err(self.invalid(field, "empty text"));
        }
        Ok(s.to_string())
    }

    fn int_label(&self, field: &'static str, allowed: &[u8]) -> Result<u8, CorpusError> {
        let v = self.get(field)?;
        let n = match v {
            Value::Number(n) => n.as_u64(),
            Value::String(s) => s.trim().parse::<u64>().ok(),
            Value::Bool(b) => Some(u64::from(*b)),
            _ => None,
        };
        match n {
            Some(n) if allowed.iter().any(|&a| u64::from(a) == n) => Ok(n as u8),
            _ => Err(self.invalid(field, format!("expected one of {allowed:?}, got {v}"))),
        }
    }

    fn decimal(&self, field: &'static str) -> Result<String, CorpusError> {
        let v = self.get(field)?;
        let raw = match v {
            Value::Number(n) => n.to_string(),
            Value::String(s) => s.trim().to_string(),
            _ => return Err(self.invalid(field, "expected a number")),
        };
        canonical_decimal(&raw).ok_or_else(|| self.invalid(field, format!("not a decimal: {raw}")))
    }
}

fn parse_record(ctx: &RecordCtx<'_>, kind: TaskKind, is_train: bool) -> Result<Datapoint, CorpusError> {
    Ok(match kind {
        TaskKind::MathCot => {
            let answer_cot = if is_train {
                Some(ctx.text("answer")?)
            } else {
                match ctx.obj.get("answer") {
                    None | Some(Value::Null) => None,
                    Some(Value::String(s)) if s.trim().is_empty() => None,
                    Some(Value::String(s)) => Some(s.clone()),
                    Some(_) => return Err(ctx.invalid("answer", "expected a string or null")),
                }
            };
            Datapoint::MathCot(MathItem {
                question: ctx.text("question")?,
                answer_cot,
                answer_number: ctx.decimal("answer_number")?,
            })
        }
        TaskKind::CopaChoice => {
            let relation = match ctx.text("question")?.as_str() {
                "cause" => CopaRelation::Cause,
                "effect" => CopaRelation::Effect,
                other => {
                    return Err(ctx.invalid("question", format!("expected cause/effect, got {other}")))
                }
            };
            Datapoint::CopaChoice(CopaItem {
                premise: ctx.text("premise")?,
                choice1: ctx.text("choice1")?,
                choice2: ctx.text("choice2")?,
                relation,
                label: ctx.int_label("label", &[1, 2])?,
            })
        }
        TaskKind::WicBinary => Datapoint::WicBinary(WicItem {
            example1: ctx.text("example_1")?,
            example2: ctx.text("example_2")?,
            target_word: ctx.text("target_word")?,
            label: ctx.int_label("label", &[0, 1])?,
        }),
    })
}

// ---------------------------------------------------------------- saving

fn decimal_to_json(s: &str) -> Value {
    if let Ok(n) = s.parse::<i64>() {
        return Value::from(n);
    }
    if let Ok(x) = s.parse::<f64>() {
        if let Some(n) = serde_json::Number::from_f64(x) {
            if n.to_string() == s {
                return Value::Number(n);
            }
        }
    }
    Value::String(s.to_string())
}

pub fn datapoint_to_json(dp: &Datapoint) -> Value {
    match dp {
        Datapoint::MathCot(m) => serde_json::json!({
            "question": m.question,
            "answer": m.answer_cot,
            "answer_number": decimal_to_json(&m.answer_number),
        }),
        Datapoint::CopaChoice(c) => serde_json::json!({
            "premise": c.premise,
            "choice1": c.choice1,
            "choice2": c.choice2,
            "question": match c.relation { CopaRelation::Cause => "cause", CopaRelation::Effect => "effect" },
            "label": c.label,
        }),
        Datapoint::WicBinary(w) => serde_json::json!({
            "example_1": w.example1,
            "example_2": w.example2,
            "target_word": w.target_word,
            "label": w.label,
        }),
    }
}

/// Writes the dataset in the layout [`load_dataset`] reads.
pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<(), CorpusError> {
    let io_err = |p: &Path| {
        let p = p.to_path_buf();
        move |source| CorpusError::Io { path: p, source }
    };
    for (lang, split) in &dataset.splits {
        let dir = path.join(lang.as_str());
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        for (name, items) in [("train.json", &split.train), ("test.json", &split.test)] {
            let file = dir.join(name);
            let arr: Vec<Value> = items.iter().map(datapoint_to_json).collect();
            let text = serde_json::to_string_pretty(&arr).expect("json values serialize");
            fs::write(&file, text).map_err(io_err(&file))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn write_split(root: &Path, lang: &str, train: Value, test: Value) {
        let dir = root.join(lang);
        fs::create_dir_all(&dir).unwrap();
        fs::write(dir.join("train.json"), train.to_string()).unwrap();
        fs::write(dir.join("test.json"), test.to_string()).unwrap();
    }

    fn mgsm_record(n: i64) -> Value {
        json!({"question": "Q", "answer": format!("Step-by-step... The answer is {n}."), "answer_number": n})
    }

    #[test]
    fn parses_mgsm_record() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("mgsm");
        write_split(
            &root,
            "en",
            json!([{"question": "...", "answer": "Step-by-step... The answer is 11.", "answer_number": 11}]),
            json!([{"question": "Roger has 5 balls", "answer": null, "answer_number": 11}]),
        );
        let ds = load_dataset(&root, TaskKind::MathCot, true).unwrap();
        assert_eq!(ds.dataset_id, "mgsm");
        let en = ds.split(LanguageCode::EN).unwrap();
        match &en.train[0] {
            Datapoint::MathCot(m) => {
                assert_eq!(m.answer_number, "11");
                assert_eq!(m.answer_cot.as_deref(), Some("Step-by-step... The answer is 11."));
            }
            other => panic!("unexpected {other:?}"),
        }
        match &en.test[0] {
            Datapoint::MathCot(m) => assert!(m.answer_cot.is_none()),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn size_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("mgsm");
        let eight: Vec<Value> = (0..8).map(mgsm_record).collect();
        let seven: Vec<Value> = (0..7).map(mgsm_record).collect();
        write_split(&root, "en", json!(eight), json!([mgsm_record(1)]));
        write_split(&root, "de", json!(seven), json!([mgsm_record(1)]));
        let err = load_dataset(&root, TaskKind::MathCot, true).unwrap_err();
        assert!(matches!(err, CorpusError::SizeMismatch { split: "train", .. }), "{err}");
    }

    #[test]
    fn parallel_answer_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("mgsm");
        write_split(&root, "en", json!([mgsm_record(11)]), json!([mgsm_record(1)]));
        write_split(&root, "de", json!([mgsm_record(12)]), json!([mgsm_record(1)]));
        let err = load_dataset(&root, TaskKind::MathCot, true).unwrap_err();
        assert!(
            matches!(err, CorpusError::ParallelismViolation { field: "answer_number", index: 0, .. }),
            "{err}"
        );
        // The same files load when parallelism is not expected.
        load_dataset(&root, TaskKind::MathCot, false).unwrap();
    }

    #[test]
    fn unknown_language_directory() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("ds");
        write_split(&root, "xx", json!([mgsm_record(1)]), json!([mgsm_record(1)]));
        assert!(matches!(
            load_dataset(&root, TaskKind::MathCot, true),
            Err(CorpusError::UnknownLanguage(_))
        ));
    }

    #[test]
    fn missing_field_reports_name() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("xcopa");
        write_split(
            &root,
            "en",
            json!([{"premise": "p", "choice1": "a", "question": "cause", "label": 1}]),
            json!([]),
        );
        let err = load_dataset(&root, TaskKind::CopaChoice, true).unwrap_err();
        assert!(matches!(err, CorpusError::MissingField { field: "choice2", .. }), "{err}");
    }

    #[test]
    fn label_out_of_range() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("xlwic");
        write_split(
            &root,
            "en",
            json!([{"example_1": "a b", "example_2": "b c", "target_word": "b", "label": 2}]),
            json!([]),
        );
        let err = load_dataset(&root, TaskKind::WicBinary, false).unwrap_err();
        assert!(matches!(err, CorpusError::InvalidField { field: "label", .. }), "{err}");
    }

    #[test]
    fn max_new_tokens_per_kind() {
        assert_eq!(TaskKind::MathCot.max_new_tokens(), 500);
        assert_eq!(TaskKind::CopaChoice.max_new_tokens(), 10);
        assert_eq!(TaskKind::WicBinary.max_new_tokens(), 10);
    }
}
