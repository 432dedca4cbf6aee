#![allow(dead_code)]

use std::collections::BTreeMap;

use mlicl_core::corpus::{CisPool, Datapoint, Dataset, LanguageCode, MathItem, RawCisSet, Split, TaskKind};
use mlicl_core::corpus::filter_cis_pool;

pub fn lang(code: &str) -> LanguageCode {
    code.parse().unwrap()
}

/// Question text carries the language tag and the item number so tests can
/// recover both from a rendered prompt.
pub fn toy_question(lang: LanguageCode, split: &str, i: usize) -> String {
    format!("[{lang}] {split} item #{i}: how many apples?")
}

pub fn math_item(lang: LanguageCode, split: &str, i: usize) -> Datapoint {
    Datapoint::MathCot(MathItem {
        question: toy_question(lang, split, i),
        answer_cot: (split == "train").then(|| format!("Counting gives {i}. The answer is {i}.")),
        answer_number: i.to_string(),
    })
}

/// Parallel math corpus where item `i` has gold answer `i` in every language.
pub fn toy_math_dataset(id: &str, langs: &[&str], train: usize, test: usize) -> Dataset {
    let splits: BTreeMap<LanguageCode, Split> = langs
        .iter()
        .map(|&code| {
            let l = lang(code);
            let split = Split {
                train: (0..train).map(|i| math_item(l, "train", i)).collect(),
                test: (0..test).map(|i| math_item(l, "test", i)).collect(),
            };
            (l, split)
        })
        .collect();
    Dataset::new(id, TaskKind::MathCot, true, splits).unwrap()
}

pub const CIS_MARKER: &str = "CIS-SENTENCE";

/// A pool of `n` parallel sentences, each with 12 English words.
pub fn toy_cis_pool(langs: &[&str], n: usize) -> CisPool {
    let sentences = langs
        .iter()
        .map(|&code| {
            let l = lang(code);
            let list = (0..n)
                .map(|i| format!("{CIS_MARKER} {l} {i} the weather was mild and the river ran slowly today"))
                .collect();
            (l, list)
        })
        .collect();
    let raw = RawCisSet {
        languages: langs.iter().map(|&c| lang(c)).collect(),
        sentences,
    };
    filter_cis_pool(&raw, 10, 15).unwrap()
}

/// Item number embedded by [`toy_question`].
pub fn item_number(question: &str) -> usize {
    let rest = &question[question.find('#').unwrap() + 1..];
    rest[..rest.find(':').unwrap()].parse().unwrap()
}

/// Language tag embedded by [`toy_question`], ignoring any CIS prefix.
pub fn question_lang(question: &str) -> LanguageCode {
    let start = question.rfind('[').unwrap();
    lang(&question[start + 1..start + 3])
}
