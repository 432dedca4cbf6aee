//! COMBINED corpus: balanced test subsamples of several datasets, used as
//! the input set for neuron activation counting.

use std::collections::{BTreeMap, BTreeSet};

use super::{CorpusError, Datapoint, Dataset, LanguageCode, Split};
use crate::sampling::derive_stream;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CombinedCorpus {
    pub parts: Vec<Dataset>,
    /// Retained test indices per sub-corpus, ascending.
    pub test_indices: BTreeMap<String, Vec<usize>>,
}

impl CombinedCorpus {
    pub fn language_counts(&self) -> Vec<usize> {
        self.parts.iter().map(|d| d.splits.len()).collect()
    }
}

/// Subsamples every test split to `per_split_test_size` (same indices in all
/// language splits of a dataset), drops excluded languages and strips the
/// chain of thought from math answers.
pub fn build_combined(
    datasets: &[Dataset],
    per_split_test_size: usize,
    excluded: &BTreeMap<String, BTreeSet<LanguageCode>>,
    seed: u64,
    require_equal_languages: bool,
) -> Result<CombinedCorpus, CorpusError> {
    let mut parts = Vec::with_capacity(datasets.len());
    let mut test_indices = BTreeMap::new();
    for ds in datasets {
        let drop = excluded.get(&ds.dataset_id);
        let mut splits: BTreeMap<LanguageCode, Split> = ds
            .splits
            .iter()
            .filter(|(lang, _)| drop.is_none_or(|d| !d.contains(lang)))
            .map(|(l, s)| (*l, s.clone()))
            .collect();
        for (lang, split) in &splits {
            if split.test.len() < per_split_test_size {
                return Err(CorpusError::InsufficientSplit {
                    dataset: ds.dataset_id.clone(),
                    lang: *lang,
                    needed: per_split_test_size,
                    found: split.test.len(),
                });
            }
        }
        let mut rng = derive_stream(seed, &format!("combined:{}", ds.dataset_id));
        let mut indices = rng.sample_distinct(ds.test_size(), per_split_test_size);
        indices.sort_unstable();
        for split in splits.values_mut() {
            split.test = indices.iter().map(|&i| split.test[i].clone()).collect();
            for dp in split.train.iter_mut().chain(split.test.iter_mut()) {
                if let Datapoint::MathCot(m) = dp {
                    if m.answer_cot.is_some() {
                        m.answer_cot = Some(m.answer_number.clone());
                    }
                }
            }
        }
        test_indices.insert(ds.dataset_id.clone(), indices);
        parts.push(Dataset::new(ds.dataset_id.clone(), ds.kind, ds.parallel, splits)?);
    }
    if require_equal_languages {
        let counts: Vec<String> = parts
            .iter()
            .map(|d| format!("{}={}", d.dataset_id, d.splits.len()))
            .collect();
        let mut distinct: Vec<usize> = parts.iter().map(|d| d.splits.len()).collect();
        distinct.dedup();
        if distinct.len() > 1 {
            return Err(CorpusError::UnequalLanguageCounts(counts.join(", ")));
        }
    }
    Ok(CombinedCorpus {
        parts,
        test_indices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{MathItem, TaskKind};

    fn l(c: &str) -> LanguageCode {
        LanguageCode::new(c).unwrap()
    }

    fn math_dataset(id: &str, langs: &[&str], n_test: usize) -> Dataset {
        let item = |i: usize, cot: bool| {
            Datapoint::MathCot(MathItem {
                question: format!("q{i}"),
                answer_cot: cot.then(|| format!("steps... The answer is {i}.")),
                answer_number: i.to_string(),
            })
        };
        let splits = langs
            .iter()
            .map(|c| {
                (
                    l(c),
                    Split {
                        train: (0..4).map(|i| item(i, true)).collect(),
                        test: (0..n_test).map(|i| item(i, false)).collect(),
                    },
                )
            })
            .collect();
        Dataset::new(id, TaskKind::MathCot, true, splits).unwrap()
    }

    #[test]
    fn deterministic_and_aligned() {
        let ds = [math_dataset("a", &["en", "de"], 40)];
        let none = BTreeMap::new();
        let x = build_combined(&ds, 10, &none, 3, true).unwrap();
        let y = build_combined(&ds, 10, &none, 3, true).unwrap();
        assert_eq!(x.test_indices, y.test_indices);
        let idx = &x.test_indices["a"];
        assert_eq!(idx.len(), 10);
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
        let part = &x.parts[0];
        assert_eq!(part.split(l("en")).unwrap().test, part.split(l("de")).unwrap().test);
    }

    #[test]
    fn full_size_is_identity() {
        let ds = [math_dataset("a", &["en"], 25)];
        let c = build_combined(&ds, 25, &BTreeMap::new(), 9, false).unwrap();
        assert_eq!(c.test_indices["a"], (0..25).collect::<Vec<_>>());
    }

    #[test]
    fn strips_chain_of_thought() {
        let ds = [math_dataset("a", &["en"], 5)];
        let c = build_combined(&ds, 5, &BTreeMap::new(), 1, false).unwrap();
        for dp in &c.parts[0].split(LanguageCode::EN).unwrap().train {
            let Datapoint::MathCot(m) = dp else { unreachable!() };
            assert_eq!(m.answer_cot.as_deref(), Some(m.answer_number.as_str()));
        }
    }

    #[test]
    fn exclusion_and_language_balance() {
        let ds = [
            math_dataset("a", &["en", "de", "fr"], 10),
            math_dataset("b", &["en", "ko", "nl", "de", "zh"], 10),
        ];
        let mut excluded = BTreeMap::new();
        excluded.insert("b".to_string(), [l("ko"), l("nl")].into_iter().collect());
        let c = build_combined(&ds, 5, &excluded, 1, true).unwrap();
        assert_eq!(c.language_counts(), vec![3, 3]);
        assert!(!c.parts[1].splits.contains_key(&l("ko")));

        let err = build_combined(&ds, 5, &BTreeMap::new(), 1, true).unwrap_err();
        assert!(matches!(err, CorpusError::UnequalLanguageCounts(_)));
    }

    #[test]
    fn insufficient_split() {
        let ds = [math_dataset("a", &["en"], 5)];
        assert!(matches!(
            build_combined(&ds, 6, &BTreeMap::new(), 1, false),
            Err(CorpusError::InsufficientSplit { needed: 6, found: 5, .. })
        ));
    }
}
