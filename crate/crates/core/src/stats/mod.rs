//! Paired significance tests between ICL modes.
//!
//! The corrected McNemar statistic `(|b - c| - 1)^2 / (b + c)` is compared
//! against a chi-squared distribution with one degree of freedom. `b` counts
//! items the baseline gets right and the compared mode gets wrong; `c` the
//! reverse.

mod erfc;

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Add;

use serde::{Deserialize, Serialize};

use crate::corpus::LanguageCode;
use crate::prompt::ModeDescriptor;
use crate::scoring::{AccuracyTable, Column, CorrectnessVector};
use crate::table::Table;

pub use erfc::erfc;

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum StatsError {
    #[error("vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("vectors cover different scopes: {0}")]
    ScopeMismatch(String),
    #[error("no discordant pairs (b + c = 0); the test is undefined")]
    NoDiscordantPairs,
    #[error("chi-squared statistic must be a nonnegative number, got {0}")]
    InvalidStatistic(String),
    #[error("accuracy tables cover different languages")]
    LanguageSetMismatch,
    #[error("no correctness vector for `{0}`")]
    MissingVector(LanguageCode),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub both_wrong: u64,
    /// Baseline correct, compared wrong.
    pub b: u64,
    /// Baseline wrong, compared correct.
    pub c: u64,
    pub both_correct: u64,
}

impl ContingencyTable {
    pub fn total(&self) -> u64 {
        self.both_wrong + self.b + self.c + self.both_correct
    }

    /// A pair of correctness vectors realizing these counts.
    pub fn to_vectors(&self) -> (Vec<bool>, Vec<bool>) {
        let cells = [
            (self.both_wrong, false, false),
            (self.b, true, false),
            (self.c, false, true),
            (self.both_correct, true, true),
        ];
        cells
            .iter()
            .flat_map(|&(n, base, cmp)| std::iter::repeat_n((base, cmp), n as usize))
            .unzip()
    }
}

impl Add for ContingencyTable {
    type Output = ContingencyTable;

    fn add(self, o: ContingencyTable) -> ContingencyTable {
        ContingencyTable {
            both_wrong: self.both_wrong + o.both_wrong,
            b: self.b + o.b,
            c: self.c + o.c,
            both_correct: self.both_correct + o.both_correct,
        }
    }
}

pub fn contingency_bits(base: &[bool], cmp: &[bool]) -> Result<ContingencyTable, StatsError> {
    if base.len() != cmp.len() {
        return Err(StatsError::LengthMismatch(base.len(), cmp.len()));
    }
    let mut t = ContingencyTable::default();
    for (&x, &y) in base.iter().zip(cmp) {
        match (x, y) {
            (false, false) => t.both_wrong += 1,
            (true, false) => t.b += 1,
            (false, true) => t.c += 1,
            (true, true) => t.both_correct += 1,
        }
    }
    Ok(t)
}

pub fn contingency(
    base: &CorrectnessVector,
    cmp: &CorrectnessVector,
) -> Result<ContingencyTable, StatsError> {
    if base.dataset_id != cmp.dataset_id || base.lang != cmp.lang {
        return Err(StatsError::ScopeMismatch(format!(
            "{}/{} vs {}/{}",
            base.dataset_id, base.lang, cmp.dataset_id, cmp.lang
        )));
    }
    contingency_bits(&base.bits, &cmp.bits)
}

/// Sum of the per-language tables over `langs`.
pub fn pooled_contingency(
    base: &[CorrectnessVector],
    cmp: &[CorrectnessVector],
    langs: &[LanguageCode],
) -> Result<ContingencyTable, StatsError> {
    fn find(vs: &[CorrectnessVector], l: LanguageCode) -> Result<&CorrectnessVector, StatsError> {
        vs.iter().find(|v| v.lang == l).ok_or(StatsError::MissingVector(l))
    }
    let mut total = ContingencyTable::default();
    for &l in langs {
        total = total + contingency(find(base, l)?, find(cmp, l)?)?;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stars {
    Ns,
    One,
    Two,
    Three,
}

impl Stars {
    /// Strict thresholds: p = 0.05 exactly is not significant.
    pub fn from_p(p: f64) -> Stars {
        if p < 0.001 {
            Stars::Three
        } else if p < 0.01 {
            Stars::Two
        } else if p < 0.05 {
            Stars::One
        } else {
            Stars::Ns
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stars::Ns => "",
            Stars::One => "*",
            Stars::Two => "**",
            Stars::Three => "***",
        }
    }
}

impl fmt::Display for Stars {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub chi2: f64,
    pub p: f64,
    pub stars: Stars,
}

/// Survival function of the chi-squared distribution with one degree of freedom.
pub fn chi2_sf_df1(x: f64) -> Result<f64, StatsError> {
    if x.is_nan() || x < 0.0 {
        return Err(StatsError::InvalidStatistic(x.to_string()));
    }
    Ok(erfc((x / 2.0).sqrt()))
}

pub fn mcnemar_corrected(t: &ContingencyTable) -> Result<TestResult, StatsError> {
    let n = t.b + t.c;
    if n == 0 {
        return Err(StatsError::NoDiscordantPairs);
    }
    let d = t.b.abs_diff(t.c) as i128 - 1;
    let chi2 = (d * d) as f64 / n as f64;
    let p = chi2_sf_df1(chi2)?;
    Ok(TestResult {
        chi2,
        p,
        stars: Stars::from_p(p),
    })
}

/// One McNemar comparison between two modes over one column's languages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceRow {
    pub dataset_id: String,
    pub base: ModeDescriptor,
    pub cmp: ModeDescriptor,
    pub column: Column,
    pub table: ContingencyTable,
    /// `None` when the test is undefined (no discordant pairs).
    pub result: Option<TestResult>,
}

/// Tests `cmp` against `base` on every column of the baseline table,
/// pooling items over the languages each aggregate column covers.
pub fn compare_modes(
    base_table: &AccuracyTable,
    base: &[CorrectnessVector],
    cmp_mode: ModeDescriptor,
    cmp: &[CorrectnessVector],
) -> Result<Vec<SignificanceRow>, StatsError> {
    let mut rows = Vec::new();
    for column in base_table.columns() {
        let langs = base_table.column_languages(column);
        if langs.is_empty() {
            continue;
        }
        let table = pooled_contingency(base, cmp, &langs)?;
        let result = match mcnemar_corrected(&table) {
            Ok(r) => Some(r),
            Err(StatsError::NoDiscordantPairs) => None,
            Err(e) => return Err(e),
        };
        rows.push(SignificanceRow {
            dataset_id: base_table.dataset_id.clone(),
            base: base_table.mode,
            cmp: cmp_mode,
            column,
            table,
            result,
        });
    }
    Ok(rows)
}

pub const UNDEFINED: &str = "—";

/// One row per comparison and scope, with the four contingency counts.
pub fn significance_table(rows: &[SignificanceRow]) -> Table {
    let mut table = Table::new([
        "dataset",
        "comparison",
        "scope",
        "chi2",
        "p_value",
        "sig",
        "both_wrong",
        "m1_wrong_m2_correct",
        "m1_correct_m2_wrong",
        "both_correct",
    ]);
    for r in rows {
        let (chi2, p, sig) = match &r.result {
            Some(t) => (format!("{:.2}", t.chi2), format!("{:.2e}", t.p), t.stars.to_string()),
            None => (UNDEFINED.into(), UNDEFINED.into(), UNDEFINED.into()),
        };
        table.push([
            r.dataset_id.clone(),
            format!("{} vs {}", r.base, r.cmp),
            r.column.to_string(),
            chi2,
            p,
            sig,
            r.table.both_wrong.to_string(),
            r.table.c.to_string(),
            r.table.b.to_string(),
            r.table.both_correct.to_string(),
        ]);
    }
    table
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaCell {
    pub column: Column,
    pub accuracy: f64,
    /// Signed difference to the baseline, in accuracy units.
    pub delta: f64,
    pub stars: Option<Stars>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub mode: ModeDescriptor,
    pub cells: Vec<DeltaCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaTable {
    pub dataset_id: String,
    pub baseline: ModeDescriptor,
    pub columns: Vec<Column>,
    pub baseline_row: Vec<f64>,
    pub rows: Vec<DeltaRow>,
}

/// Accuracy of each mode with its change against the baseline and the
/// significance stars of the matching test, if one was run.
pub fn delta_table(
    baseline: &AccuracyTable,
    others: &[AccuracyTable],
    tests: &BTreeMap<(ModeDescriptor, Column), TestResult>,
) -> Result<DeltaTable, StatsError> {
    let columns: Vec<Column> = baseline
        .columns()
        .into_iter()
        .filter(|&c| baseline.get(c).is_some())
        .collect();
    let baseline_row: Vec<f64> = columns.iter().map(|&c| baseline.get(c).unwrap_or_default()).collect();
    let mut rows = Vec::new();
    for other in others {
        if other.per_lang.keys().ne(baseline.per_lang.keys())
            || other.lrls != baseline.lrls
            || other.hrls != baseline.hrls
        {
            return Err(StatsError::LanguageSetMismatch);
        }
        let cells = columns
            .iter()
            .zip(&baseline_row)
            .map(|(&column, &base)| {
                let accuracy = other.get(column).unwrap_or_default();
                DeltaCell {
                    column,
                    accuracy,
                    delta: accuracy - base,
                    stars: tests.get(&(other.mode, column)).map(|t| t.stars),
                }
            })
            .collect();
        rows.push(DeltaRow {
            mode: other.mode,
            cells,
        });
    }
    Ok(DeltaTable {
        dataset_id: baseline.dataset_id.clone(),
        baseline: baseline.mode,
        columns,
        baseline_row,
        rows,
    })
}

fn pct(x: f64) -> String {
    format!("{:.2}", x * 100.0)
}

impl DeltaTable {
    /// One row per mode; cells read `66.00 (+8.90***)`.
    pub fn to_wide(&self) -> Table {
        let mut headers = vec!["mode".to_string()];
        headers.extend(self.columns.iter().map(Column::to_string));
        let mut table = Table::new(headers);
        let mut base = vec![self.baseline.to_string()];
        base.extend(self.baseline_row.iter().map(|&a| pct(a)));
        table.push(base);
        for row in &self.rows {
            let mut cells = vec![row.mode.to_string()];
            cells.extend(row.cells.iter().map(|c| {
                format!(
                    "{} ({:+.2}{})",
                    pct(c.accuracy),
                    c.delta * 100.0,
                    c.stars.map(Stars::as_str).unwrap_or("")
                )
            }));
            table.push(cells);
        }
        table
    }

    /// One row per (mode, column) with separate numeric fields.
    pub fn to_long(&self) -> Table {
        let mut table = Table::new(["dataset", "mode", "column", "accuracy", "delta", "sig"]);
        for (col, &acc) in self.columns.iter().zip(&self.baseline_row) {
            table.push([
                self.dataset_id.clone(),
                self.baseline.to_string(),
                col.to_string(),
                pct(acc),
                String::new(),
                String::new(),
            ]);
        }
        for row in &self.rows {
            for c in &row.cells {
                table.push([
                    self.dataset_id.clone(),
                    row.mode.to_string(),
                    c.column.to_string(),
                    pct(c.accuracy),
                    format!("{:+.2}", c.delta * 100.0),
                    c.stars.map(|s| s.as_str().to_string()).unwrap_or_default(),
                ]);
            }
        }
        table
    }
}
