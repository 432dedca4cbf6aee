mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;

use common::lang;
use mlicl_core::corpus::LanguageRegistry;
use mlicl_core::scoring::{AccuracyTable, Column, CorrectnessVector};
use mlicl_core::stats::{
    chi2_sf_df1, compare_modes, delta_table, erfc, mcnemar_corrected, significance_table,
    ContingencyTable, Stars, UNDEFINED,
};

fn discordant(b: u64, c: u64) -> ContingencyTable {
    ContingencyTable {
        b,
        c,
        ..Default::default()
    }
}

/// 1 - 2 * integral of the standard normal density over [0, sqrt(x)], by
/// composite Simpson.
fn simpson_sf(x: f64) -> f64 {
    let upper = x.sqrt();
    let n = 20_000;
    let h = upper / n as f64;
    let phi = |t: f64| (-t * t / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut sum = phi(0.0) + phi(upper);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * phi(i as f64 * h);
    }
    1.0 - 2.0 * sum * h / 3.0
}

#[derive(serde::Deserialize)]
struct Reference {
    values: Vec<(String, String)>,
}

#[test]
fn erfc_matches_high_precision_reference() {
    // Grid over z in [0, sqrt(50)], i.e. chi-squared statistics up to 100.
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/erfc_reference.json");
    let reference: Reference = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert!(reference.values.len() > 1000);
    for (z, want) in &reference.values {
        let z: f64 = z.parse().unwrap();
        let want: f64 = want.parse().unwrap();
        let got = erfc(z);
        assert!((got - want).abs() <= 1e-12, "z={z}: {got} vs {want}");
        assert!(((got - want) / want).abs() < 1e-13, "z={z}: relative error");
    }
}

#[test]
fn survival_function_matches_numeric_integration() {
    for x in [0.01, 0.5, 1.0, 2.0, 3.841, 5.0, 6.635, 10.0, 10.828] {
        let p = chi2_sf_df1(x).unwrap();
        assert!((p - simpson_sf(x)).abs() < 1e-10, "x={x}");
    }
    assert!((chi2_sf_df1(3.841).unwrap() - 0.05).abs() < 1e-3);
    assert!((chi2_sf_df1(6.635).unwrap() - 0.01).abs() < 1e-4);
    assert!((chi2_sf_df1(10.828).unwrap() - 0.001).abs() < 1e-5);
    let p = chi2_sf_df1(33.24).unwrap();
    assert!(((p - 8.16e-9) / 8.16e-9).abs() < 0.02);
}

#[test]
fn known_statistic_rows() {
    // (b, c, chi2, p) with chi2 to two decimals.
    let rows = [
        (91, 78, 0.85, 3.56e-1),
        (121, 81, 7.53, 6.07e-3),
        (64, 174, 49.92, 1.60e-12),
        (70, 118, 11.75, 6.08e-4),
        (109, 110, 0.00, 1.0),
    ];
    for (b, c, chi2, p) in rows {
        let r = mcnemar_corrected(&discordant(b, c)).unwrap();
        assert!((r.chi2 - chi2).abs() <= 0.005 + 1e-12, "b={b} c={c}: {}", r.chi2);
        assert!(((r.p - p) / p).abs() < 0.01, "b={b} c={c}: {}", r.p);
    }
}

proptest! {
    #[test]
    fn symmetric_in_b_and_c(b in 0u64..10_000, c in 0u64..10_000) {
        prop_assume!(b + c > 0);
        let x = mcnemar_corrected(&discordant(b, c)).unwrap();
        let y = mcnemar_corrected(&discordant(c, b)).unwrap();
        prop_assert_eq!(x.chi2, y.chi2);
        prop_assert_eq!(x.p, y.p);
    }

    #[test]
    fn monotone_in_discordance(n in 2u64..2_000, d in 0u64..1_000) {
        // Same b + c, growing |b - c|.
        let d = d.min(n);
        let split = |d: u64| {
            let b = (n + d) / 2;
            (b, n - b)
        };
        let (b1, c1) = split(d.saturating_sub(2));
        let (b2, c2) = split(d);
        if b1.abs_diff(c1) >= 1 {
            let x = mcnemar_corrected(&discordant(b1, c1)).unwrap();
            let y = mcnemar_corrected(&discordant(b2, c2)).unwrap();
            prop_assert!(x.chi2 <= y.chi2);
        }
    }

    #[test]
    fn p_strictly_decreasing(x in 0.001f64..80.0, dx in 0.01f64..5.0) {
        prop_assert!(chi2_sf_df1(x + dx).unwrap() < chi2_sf_df1(x).unwrap());
    }

    #[test]
    fn stars_consistent_with_p(b in 0u64..400, c in 0u64..400) {
        prop_assume!(b + c > 0);
        let r = mcnemar_corrected(&discordant(b, c)).unwrap();
        let expected = if r.p < 0.001 { "***" } else if r.p < 0.01 { "**" } else if r.p < 0.05 { "*" } else { "" };
        prop_assert_eq!(r.stars.as_str(), expected);
        prop_assert!(r.p > 0.0 && r.p <= 1.0);
    }
}

fn table(mode: &str, cells: &[(&str, f64)]) -> AccuracyTable {
    let per_lang = cells.iter().map(|&(l, a)| (lang(l), a)).collect();
    AccuracyTable::from_per_lang("mgsm", mode.parse().unwrap(), per_lang, &LanguageRegistry::preset())
}

#[test]
fn delta_recomputation() {
    let base = table("english", &[("sw", 0.5), ("bn", 0.25), ("fr", 0.75), ("zh", 0.8)]);
    let other = table("native", &[("sw", 0.6), ("bn", 0.2), ("fr", 0.7), ("zh", 0.9)]);
    let d = delta_table(&base, &[other.clone()], &BTreeMap::new()).unwrap();
    for cell in &d.rows[0].cells {
        let want = other.get(cell.column).unwrap() - base.get(cell.column).unwrap();
        assert!((cell.delta - want).abs() < 1e-12);
        assert_eq!(cell.stars, None);
    }
    let same = delta_table(&base, &[base.clone()], &BTreeMap::new()).unwrap();
    assert!(same.rows[0].cells.iter().all(|c| c.delta == 0.0));
    let wide = same.to_wide().to_markdown();
    assert!(wide.contains("(+0.00)"), "{wide}");

    let mismatched = table("native", &[("sw", 0.6)]);
    assert!(delta_table(&base, &[mismatched], &BTreeMap::new()).is_err());
}

fn vector(l: &str, mode: &str, bits: Vec<bool>) -> CorrectnessVector {
    CorrectnessVector {
        dataset_id: "mgsm".into(),
        lang: lang(l),
        mode: mode.parse().unwrap(),
        bits,
    }
}

#[test]
fn pooled_comparison_rows() {
    // Four LRLs with 250 items each; the pooled LRL table is their sum.
    let per_lang_tables = [
        ("bn", ContingencyTable { both_wrong: 67, b: 18, c: 40, both_correct: 125 }),
        ("sw", ContingencyTable { both_wrong: 67, b: 18, c: 40, both_correct: 125 }),
        ("te", ContingencyTable { both_wrong: 67, b: 18, c: 40, both_correct: 125 }),
        ("th", ContingencyTable { both_wrong: 67, b: 18, c: 41, both_correct: 124 }),
    ];
    let mut base = Vec::new();
    let mut cmp = Vec::new();
    for (l, t) in per_lang_tables {
        let (x, y) = t.to_vectors();
        base.push(vector(l, "english", x));
        cmp.push(vector(l, "multilingual", y));
    }
    let per_lang: BTreeMap<_, _> = base.iter().map(|v| (v.lang, v.accuracy())).collect();
    let base_table = AccuracyTable::from_per_lang("mgsm", base[0].mode, per_lang, &LanguageRegistry::preset());

    let rows = compare_modes(&base_table, &base, cmp[0].mode, &cmp).unwrap();
    let lrl = rows.iter().find(|r| r.column == Column::LrlAvg).unwrap();
    assert_eq!(
        lrl.table,
        ContingencyTable { both_wrong: 268, b: 72, c: 161, both_correct: 499 }
    );
    let r = lrl.result.unwrap();
    assert!((r.chi2 - 33.24).abs() < 0.01);
    assert_eq!(r.stars, Stars::Three);
    // No HRL languages, so no HRL row.
    assert!(rows.iter().all(|r| r.column != Column::HrlAvg));

    let csv = significance_table(&rows).to_csv();
    assert!(csv.contains("english vs multilingual,LRL Avg,33.24,8.16e-9,***,268,161,72,499"), "{csv}");
}

#[test]
fn undefined_test_renders_as_dash() {
    let v = vector("sw", "english", vec![true, false]);
    let w = vector("sw", "native", vec![true, false]);
    let per_lang = BTreeMap::from([(v.lang, v.accuracy())]);
    let t = AccuracyTable::from_per_lang("mgsm", v.mode, per_lang, &LanguageRegistry::preset());
    let rows = compare_modes(&t, &[v], w.mode, &[w]).unwrap();
    assert!(rows.iter().all(|r| r.result.is_none()));
    let md = significance_table(&rows).to_markdown();
    assert!(md.contains(UNDEFINED));
}
