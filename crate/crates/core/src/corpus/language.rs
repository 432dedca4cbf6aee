//! Language codes and the high/low-resource registry.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::CorpusError;

/// Every code the harness accepts: the 25 evaluated languages plus the
/// members of the preset high-resource list that no dataset covers.
/// Ascending code order.
pub const KNOWN_CODES: [&str; 35] = [
    "ar", "bg", "bn", "ca", "cs", "da", "de", "en", "es", "et", "fa", "fi", "fr", "hr", "ht", "id",
    "it", "ja", "ko", "nl", "no", "pl", "pt", "qu", "ru", "sr", "sv", "sw", "ta", "te", "th", "tr",
    "uk", "vi", "zh",
];

/// Union of the top-20 pretraining languages of Llama 2 and PaLM.
pub const PRESET_HRLS: [&str; 24] = [
    "ar", "ca", "cs", "da", "de", "en", "es", "fi", "fr", "id", "it", "ja", "ko", "nl", "no", "pl",
    "pt", "ru", "sr", "sv", "tr", "uk", "vi", "zh",
];

/// Two-letter ISO 639-1 code, restricted to [`KNOWN_CODES`].
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LanguageCode([u8; 2]);

impl LanguageCode {
    pub const EN: LanguageCode = LanguageCode(*b"en");

    pub fn new(code: &str) -> Result<Self, CorpusError> {
        let bytes = code.as_bytes();
        if bytes.len() != 2 || !bytes.iter().all(u8::is_ascii_lowercase) {
            return Err(CorpusError::InvalidLanguageCode(code.to_string()));
        }
        if !KNOWN_CODES.contains(&code) {
            return Err(CorpusError::UnknownLanguage(code.to_string()));
        }
        Ok(LanguageCode([bytes[0], bytes[1]]))
    }

    pub fn as_str(&self) -> &str {
        // Constructed only from ASCII lowercase bytes.
        std::str::from_utf8(&self.0).expect("ascii")
    }
}

impl fmt::Display for LanguageCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for LanguageCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_str())
    }
}

impl FromStr for LanguageCode {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LanguageCode::new(s)
    }
}

impl Serialize for LanguageCode {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for LanguageCode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        LanguageCode::new(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ResourceClass {
    Hrl,
    Lrl,
}

/// HRL/LRL split for one dataset, each list in ascending code order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetLanguages {
    pub hrls: Vec<LanguageCode>,
    pub lrls: Vec<LanguageCode>,
}

#[derive(Debug, Clone)]
pub struct LanguageRegistry {
    hrl_list: Vec<LanguageCode>,
    per_dataset: BTreeMap<String, DatasetLanguages>,
}

fn codes(list: &[&str]) -> Vec<LanguageCode> {
    let mut out: Vec<LanguageCode> = list
        .iter()
        .map(|c| LanguageCode::new(c).expect("preset code"))
        .collect();
    out.sort();
    out
}

impl LanguageRegistry {
    /// The preset HRL list and the per-dataset classification used for
    /// MGSM, XCOPA and XL-WiC.
    pub fn preset() -> Self {
        let mut registry = LanguageRegistry {
            hrl_list: codes(&PRESET_HRLS),
            per_dataset: BTreeMap::new(),
        };
        let presets: [(&str, &[&str], &[&str]); 3] = [
            (
                "mgsm",
                &["de", "en", "es", "fr", "ja", "ru", "zh"],
                &["bn", "sw", "te", "th"],
            ),
            (
                "xcopa",
                &["en", "id", "it", "tr", "zh"],
                // vi is on the preset list but is evaluated as an LRL here.
                &["et", "ht", "qu", "sw", "ta", "th", "vi"],
            ),
            (
                "xlwic",
                &["da", "de", "en", "fr", "it", "ja", "ko", "nl", "zh"],
                &["bg", "et", "fa", "hr"],
            ),
        ];
        for (id, hrls, lrls) in presets {
            registry
                .insert_dataset(id, codes(hrls), codes(lrls))
                .expect("preset lists are disjoint");
        }
        registry
    }

    pub fn hrl_list(&self) -> &[LanguageCode] {
        &self.hrl_list
    }

    pub fn insert_dataset(
        &mut self,
        dataset_id: &str,
        mut hrls: Vec<LanguageCode>,
        mut lrls: Vec<LanguageCode>,
    ) -> Result<(), CorpusError> {
        if let Some(shared) = hrls.iter().find(|c| lrls.contains(c)) {
            return Err(CorpusError::Invalid(format!(
                "{shared} listed as both HRL and LRL for {dataset_id}"
            )));
        }
        hrls.sort();
        lrls.sort();
        self.per_dataset
            .insert(dataset_id.to_string(), DatasetLanguages { hrls, lrls });
        Ok(())
    }

    pub fn dataset(&self, dataset_id: &str) -> Option<&DatasetLanguages> {
        self.per_dataset.get(dataset_id)
    }

    /// Membership in the preset HRL list.
    pub fn resource_class(&self, code: LanguageCode) -> ResourceClass {
        if self.hrl_list.contains(&code) {
            ResourceClass::Hrl
        } else {
            ResourceClass::Lrl
        }
    }

    /// Same as [`resource_class`](Self::resource_class) but parses the code first.
    pub fn classify_str(&self, code: &str) -> Result<ResourceClass, CorpusError> {
        Ok(self.resource_class(LanguageCode::new(code)?))
    }

    /// Classification within a dataset. Uses the dataset's own lists when it
    /// has a registered entry that mentions the code, else the preset list.
    pub fn classify_in(&self, dataset_id: &str, code: LanguageCode) -> ResourceClass {
        if let Some(langs) = self.per_dataset.get(dataset_id) {
            if langs.hrls.contains(&code) {
                return ResourceClass::Hrl;
            }
            if langs.lrls.contains(&code) {
                return ResourceClass::Lrl;
            }
        }
        self.resource_class(code)
    }

    /// Splits `languages` into (HRLs, LRLs), preserving input order.
    pub fn partition(
        &self,
        dataset_id: &str,
        languages: &[LanguageCode],
    ) -> (Vec<LanguageCode>, Vec<LanguageCode>) {
        languages
            .iter()
            .partition(|&&c| self.classify_in(dataset_id, c) == ResourceClass::Hrl)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_malformed_and_unknown_codes() {
        assert!(matches!(
            LanguageCode::new("EN"),
            Err(CorpusError::InvalidLanguageCode(_))
        ));
        assert!(matches!(
            LanguageCode::new("eng"),
            Err(CorpusError::InvalidLanguageCode(_))
        ));
        assert!(matches!(
            LanguageCode::new("xx"),
            Err(CorpusError::UnknownLanguage(_))
        ));
    }

    #[test]
    fn preset_hrl_list_has_24_entries() {
        let reg = LanguageRegistry::preset();
        assert_eq!(reg.hrl_list().len(), 24);
        let strs: Vec<&str> = reg.hrl_list().iter().map(|c| c.as_str()).collect();
        assert_eq!(strs, PRESET_HRLS.to_vec());
    }

    #[test]
    fn resource_class_examples() {
        let reg = LanguageRegistry::preset();
        assert_eq!(reg.classify_str("en").unwrap(), ResourceClass::Hrl);
        assert_eq!(reg.classify_str("qu").unwrap(), ResourceClass::Lrl);
        assert!(matches!(
            reg.classify_str("xx"),
            Err(CorpusError::UnknownLanguage(_))
        ));
    }

    #[test]
    fn per_dataset_lists_match_preset_tables() {
        let reg = LanguageRegistry::preset();
        let xcopa = reg.dataset("xcopa").unwrap();
        let all: Vec<LanguageCode> = xcopa.hrls.iter().chain(&xcopa.lrls).copied().collect();
        let (h, l) = reg.partition("xcopa", &all);
        assert_eq!(h, xcopa.hrls);
        assert_eq!(l, xcopa.lrls);
        let vi = LanguageCode::new("vi").unwrap();
        assert_eq!(reg.classify_in("xcopa", vi), ResourceClass::Lrl);
        assert_eq!(reg.resource_class(vi), ResourceClass::Hrl);
        assert_eq!(reg.dataset("mgsm").unwrap().hrls.len(), 7);
        assert_eq!(reg.dataset("xlwic").unwrap().lrls.len(), 4);
    }
}
