//! Context-irrelevant sentence pool.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CorpusError, LanguageCode};

/// Parallel sentence sets as stored on disk:
/// `{"languages": [...], "sentences": {lang: [...]}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawCisSet {
    pub languages: Vec<LanguageCode>,
    pub sentences: BTreeMap<LanguageCode, Vec<String>>,
}

impl RawCisSet {
    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let raw: RawCisSet = serde_json::from_str(&text).map_err(|source| CorpusError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        raw.validate()?;
        Ok(raw)
    }

    fn validate(&self) -> Result<(), CorpusError> {
        let mut listed = self.languages.clone();
        listed.sort();
        listed.dedup();
        let keys: Vec<LanguageCode> = self.sentences.keys().copied().collect();
        if listed != keys {
            return Err(CorpusError::Invalid(
                "CIS `languages` does not match the `sentences` keys".into(),
            ));
        }
        let mut lens = self.sentences.values().map(Vec::len);
        if let Some(first) = lens.next() {
            if lens.any(|n| n != first) {
                return Err(CorpusError::Invalid(
                    "CIS sentence lists are not index-aligned".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Number of maximal non-whitespace runs.
pub fn word_count(sentence: &str) -> usize {
    sentence.split_whitespace().count()
}

/// Filtered, index-aligned CIS pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CisPool {
    pub sentences: BTreeMap<LanguageCode, Vec<String>>,
    /// English word count of every retained index.
    pub source_word_counts: Vec<usize>,
    /// Index of each retained sentence in the unfiltered pool.
    pub source_indices: Vec<usize>,
}

impl CisPool {
    pub fn len(&self) -> usize {
        self.source_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source_indices.is_empty()
    }

    pub fn languages(&self) -> Vec<LanguageCode> {
        self.sentences.keys().copied().collect()
    }

    pub fn sentence(&self, lang: LanguageCode, index: usize) -> Option<&str> {
        self.sentences.get(&lang)?.get(index).map(String::as_str)
    }
}

/// Keeps exactly the indices whose English sentence has between
/// `min_words` and `max_words` words, inclusive.
pub fn filter_cis_pool(
    raw: &RawCisSet,
    min_words: usize,
    max_words: usize,
) -> Result<CisPool, CorpusError> {
    raw.validate()?;
    let english = raw
        .sentences
        .get(&LanguageCode::EN)
        .ok_or(CorpusError::MissingEnglishSplit)?;
    let (source_indices, source_word_counts): (Vec<usize>, Vec<usize>) = english
        .iter()
        .enumerate()
        .map(|(i, s)| (i, word_count(s)))
        .filter(|&(_, n)| (min_words..=max_words).contains(&n))
        .unzip();
    let sentences = raw
        .sentences
        .iter()
        .map(|(lang, list)| {
            (
                *lang,
                source_indices.iter().map(|&i| list[i].clone()).collect(),
            )
        })
        .collect();
    Ok(CisPool {
        sentences,
        source_word_counts,
        source_indices,
    })
}
