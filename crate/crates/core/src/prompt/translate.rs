use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::LanguageCode;

#[derive(Debug, thiserror::Error)]
pub enum TranslateError {
    #[error("no {src}->{tgt} translation for `{text}`")]
    Miss {
        src: LanguageCode,
        tgt: LanguageCode,
        text: String,
    },
    #[error("{0}")]
    Load(String),
}

/// Text translation between two languages. `translate(t, l, l)` must be `t`.
pub trait Translator: Send + Sync {
    fn translate(
        &self,
        text: &str,
        src: LanguageCode,
        tgt: LanguageCode,
    ) -> Result<String, TranslateError>;
}

/// On-disk translation table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranslationTable {
    pub src: LanguageCode,
    pub tgt: LanguageCode,
    pub entries: BTreeMap<String, String>,
}

/// Translator backed by exact-match lookup tables.
#[derive(Debug, Clone, Default)]
pub struct LookupTranslator {
    tables: HashMap<(LanguageCode, LanguageCode), HashMap<String, String>>,
}

impl LookupTranslator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_table(&mut self, table: TranslationTable) {
        self.tables
            .entry((table.src, table.tgt))
            .or_default()
            .extend(table.entries);
    }

    pub fn insert(&mut self, src: LanguageCode, tgt: LanguageCode, from: &str, to: &str) {
        self.tables
            .entry((src, tgt))
            .or_default()
            .insert(from.to_string(), to.to_string());
    }

    pub fn load_file(&mut self, path: &Path) -> Result<(), TranslateError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TranslateError::Load(format!("{}: {e}", path.display())))?;
        let table: TranslationTable = serde_json::from_str(&text)
            .map_err(|e| TranslateError::Load(format!("{}: {e}", path.display())))?;
        self.add_table(table);
        Ok(())
    }
}

impl Translator for LookupTranslator {
    fn translate(
        &self,
        text: &str,
        src: LanguageCode,
        tgt: LanguageCode,
    ) -> Result<String, TranslateError> {
        if src == tgt {
            return Ok(text.to_string());
        }
        self.tables
            .get(&(src, tgt))
            .and_then(|t| t.get(text))
            .cloned()
            .ok_or_else(|| TranslateError::Miss {
                src,
                tgt,
                text: text.to_string(),
            })
    }
}
