//! Seed-reproducible sampling plans shared across language splits.
//!
//! All randomness comes from SplitMix64 streams derived from one seed and a
//! tag, so any implementation of the same recipe reproduces a plan bit for bit.

use serde::{Deserialize, Serialize};

use crate::corpus::LanguageCode;
use crate::prompt::IclMode;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SamplingError {
    #[error("K = {k} exceeds the pool size {m}")]
    TooManyShots { k: usize, m: usize },
    #[error("K and N must be at least 1")]
    EmptyPlan,
    #[error("empty language list for the {0} table")]
    EmptyLanguages(&'static str),
    #[error("row {row} out of range (N = {n})")]
    RowOutOfRange { row: usize, n: usize },
    #[error("plan has no demonstration language table")]
    MissingLanguageTable,
}

pub const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
pub const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// SplitMix64 generator.
#[derive(Debug, Clone)]
pub struct Rng64 {
    state: u64,
}

impl Rng64 {
    pub fn new(seed: u64) -> Self {
        Rng64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in `[0, n)` by plain modulo reduction.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "empty range");
        (self.next_u64() % n as u64) as usize
    }

    /// First `k` entries of a partial Fisher–Yates shuffle of `0..n`.
    pub fn sample_distinct(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n);
        let mut pool: Vec<usize> = (0..n).collect();
        for j in 0..k {
            let r = j + self.below(n - j);
            pool.swap(j, r);
        }
        pool.truncate(k);
        pool
    }
}

/// Independent stream for a named table.
pub fn derive_stream(seed: u64, tag: &str) -> Rng64 {
    Rng64::new(seed ^ fnv1a64(tag.as_bytes()))
}

pub const TAG_DEMO_IDX: &str = "demo-idx";
pub const TAG_DEMO_LANG: &str = "demo-lang";
pub const TAG_CIS_IDX: &str = "cis-idx";
pub const TAG_CIS_LANG: &str = "cis-lang";

/// Demonstration indices and languages for every test row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub seed: u64,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    /// N rows of K distinct train indices (0-based).
    pub index_lists: Vec<Vec<usize>>,
    pub demo_lang_lists: Option<Vec<Vec<LanguageCode>>>,
    pub cis_index_lists: Option<Vec<Vec<usize>>>,
    pub cis_lang_lists: Option<Vec<Vec<LanguageCode>>>,
}

/// CIS pool parameters for [`make_plan`].
#[derive(Debug, Clone, Copy)]
pub struct CisSampling<'a> {
    pub languages: &'a [LanguageCode],
    pub pool_size: usize,
}

fn language_rows(rng: &mut Rng64, n: usize, k: usize, langs: &[LanguageCode]) -> Vec<Vec<LanguageCode>> {
    (0..n)
        .map(|_| (0..k).map(|_| langs[rng.below(langs.len())]).collect())
        .collect()
}

pub fn make_plan(
    seed: u64,
    n: usize,
    k: usize,
    m: usize,
    hrl_available: &[LanguageCode],
    cis: Option<CisSampling<'_>>,
) -> Result<SamplingPlan, SamplingError> {
    if k == 0 || n == 0 {
        return Err(SamplingError::EmptyPlan);
    }
    if k > m {
        return Err(SamplingError::TooManyShots { k, m });
    }
    if hrl_available.is_empty() {
        return Err(SamplingError::EmptyLanguages("demonstration"));
    }

    let mut idx_rng = derive_stream(seed, TAG_DEMO_IDX);
    let index_lists = (0..n).map(|_| idx_rng.sample_distinct(m, k)).collect();
    let mut lang_rng = derive_stream(seed, TAG_DEMO_LANG);
    let demo_lang_lists = language_rows(&mut lang_rng, n, k, hrl_available);

    let (cis_index_lists, cis_lang_lists) = match cis {
        None => (None, None),
        Some(c) => {
            if c.languages.is_empty() {
                return Err(SamplingError::EmptyLanguages("CIS"));
            }
            if k > c.pool_size {
                return Err(SamplingError::TooManyShots { k, m: c.pool_size });
            }
            let mut rng = derive_stream(seed, TAG_CIS_IDX);
            let idx = (0..n).map(|_| rng.sample_distinct(c.pool_size, k)).collect();
            let mut rng = derive_stream(seed, TAG_CIS_LANG);
            (Some(idx), Some(language_rows(&mut rng, n, k, c.languages)))
        }
    };

    Ok(SamplingPlan {
        seed,
        k,
        n,
        m,
        index_lists,
        demo_lang_lists: Some(demo_lang_lists),
        cis_index_lists,
        cis_lang_lists,
    })
}

/// One demonstration: which train record, in which language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemoSpec {
    pub train_index: usize,
    pub lang: LanguageCode,
}

impl SamplingPlan {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plans serialize")
    }

    /// Demonstrations for test row `row` under `mode`.
    pub fn assign_demos(
        &self,
        row: usize,
        mode: &IclMode,
        test_lang: LanguageCode,
    ) -> Result<Vec<DemoSpec>, SamplingError> {
        let indices = self
            .index_lists
            .get(row)
            .ok_or(SamplingError::RowOutOfRange { row, n: self.n })?;
        let langs: Vec<LanguageCode> = match mode {
            IclMode::English => vec![LanguageCode::EN; self.k],
            IclMode::Monolingual(l) => vec![*l; self.k],
            IclMode::Native => vec![test_lang; self.k],
            IclMode::Multilingual => self
                .demo_lang_lists
                .as_ref()
                .ok_or(SamplingError::MissingLanguageTable)?
                .get(row)
                .ok_or(SamplingError::RowOutOfRange { row, n: self.n })?
                .clone(),
        };
        Ok(indices
            .iter()
            .zip(langs)
            .map(|(&train_index, lang)| DemoSpec { train_index, lang })
            .collect())
    }
}
