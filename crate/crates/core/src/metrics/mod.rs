//! Evaluation metrics, error taxonomy and the batch harness.

mod batch;

pub use batch::{case_run_dir, run_batch, run_one, BatchOptions, CaseOutput, CaseSpec, Manifest};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::llm::Prices;
use crate::reviewer::{ErrorDiagnosis, ErrorType};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("no case records")]
    EmptyRecords,
    #[error("prices must be non-negative")]
    NegativePrice,
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("I/O error at {path}: {source}")]
    Io { path: std::path::PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    NaturalLanguage,
    Multimodal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub case_id: String,
    pub modality: Modality,
    pub success: bool,
    /// Correction rounds; ignored for failed cases.
    pub k_i: u32,
    pub t_in: u64,
    pub t_think: u64,
    pub t_out: u64,
    pub diagnoses: Vec<ErrorDiagnosis>,
}

fn non_empty(records: &[CaseRecord]) -> Result<f64, MetricsError> {
    if records.is_empty() {
        Err(MetricsError::EmptyRecords)
    } else {
        Ok(records.len() as f64)
    }
}

/// Mean correction rounds, charging `k_max` to every failed case.
pub fn iterations(records: &[CaseRecord], k_max: u32) -> Result<f64, MetricsError> {
    let total = non_empty(records)?;
    let sum_k: u64 = records.iter().filter(|r| r.success).map(|r| u64::from(r.k_i)).sum();
    let m = records.iter().filter(|r| !r.success).count() as u64;
    Ok((sum_k + m * u64::from(k_max)) as f64 / total)
}

/// Mean input + thinking + output tokens per case.
pub fn token_usage(records: &[CaseRecord]) -> Result<f64, MetricsError> {
    let total = non_empty(records)?;
    let sum: u64 = records.iter().map(|r| r.t_in + r.t_think + r.t_out).sum();
    Ok(sum as f64 / total)
}

pub fn pass_rate(records: &[CaseRecord]) -> Result<f64, MetricsError> {
    let total = non_empty(records)?;
    Ok(records.iter().filter(|r| r.success).count() as f64 / total)
}

/// Mean price per case, in price units per 10 000 tokens.
pub fn cost(records: &[CaseRecord], prices: &Prices) -> Result<f64, MetricsError> {
    let total = non_empty(records)?;
    if prices.p_in < 0.0 || prices.p_think < 0.0 || prices.p_out < 0.0 {
        return Err(MetricsError::NegativePrice);
    }
    let sum: f64 = records
        .iter()
        .map(|r| r.t_in as f64 * prices.p_in + r.t_think as f64 * prices.p_think + r.t_out as f64 * prices.p_out)
        .sum();
    Ok(sum / (10000.0 * total))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ReportCategory {
    Configuration,
    Geometric,
    MissingFile,
    Grammar,
    Unknown,
}

impl ReportCategory {
    pub const ALL: [ReportCategory; 5] = [
        ReportCategory::Configuration,
        ReportCategory::Geometric,
        ReportCategory::MissingFile,
        ReportCategory::Grammar,
        ReportCategory::Unknown,
    ];
}

/// Description fragments that mark a format error as a syntax defect.
pub const GRAMMAR_TOKENS: [&str; 8] = [
    "brace",
    "semicolon",
    "parenthes",
    "foamfile",
    "punctuation",
    "bad token",
    "beyond eof",
    "ill defined primitiveentry",
];

pub fn report_category(d: &ErrorDiagnosis) -> ReportCategory {
    match d.error_type {
        ErrorType::FormatError => {
            let desc = d.description.to_lowercase();
            if GRAMMAR_TOKENS.iter().any(|t| desc.contains(t)) {
                ReportCategory::Grammar
            } else {
                ReportCategory::Configuration
            }
        }
        ErrorType::TimePrecisionError => ReportCategory::Configuration,
        ErrorType::GeometryError => ReportCategory::Geometric,
        ErrorType::MissingFile => ReportCategory::MissingFile,
        ErrorType::Unknown => ReportCategory::Unknown,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorHistogram {
    pub counts: BTreeMap<ReportCategory, u64>,
    /// Percent of the total, per category.
    pub percentages: BTreeMap<ReportCategory, f64>,
    pub total: u64,
}

impl ErrorHistogram {
    pub fn count(&self, c: ReportCategory) -> u64 {
        self.counts.get(&c).copied().unwrap_or(0)
    }

    pub fn percent(&self, c: ReportCategory) -> f64 {
        self.percentages.get(&c).copied().unwrap_or(0.0)
    }
}

pub fn error_stats<'a>(diagnoses: impl IntoIterator<Item = &'a ErrorDiagnosis>) -> ErrorHistogram {
    let mut counts: BTreeMap<ReportCategory, u64> = ReportCategory::ALL.iter().map(|&c| (c, 0)).collect();
    for d in diagnoses {
        *counts.entry(report_category(d)).or_default() += 1;
    }
    let total: u64 = counts.values().sum();
    let percentages = counts
        .iter()
        .map(|(&c, &n)| (c, if total == 0 { 0.0 } else { 100.0 * n as f64 / total as f64 }))
        .collect();
    ErrorHistogram { counts, percentages, total }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub cases: usize,
    pub iterations: f64,
    pub token_usage: f64,
    pub pass_rate: f64,
    pub cost: f64,
}

impl Aggregate {
    pub fn of(records: &[CaseRecord], k_max: u32, prices: &Prices) -> Result<Self, MetricsError> {
        Ok(Self {
            cases: records.len(),
            iterations: iterations(records, k_max)?,
            token_usage: token_usage(records)?,
            pass_rate: pass_rate(records)?,
            cost: cost(records, prices)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// 1 when images are pre-parsed, 2 when passed to the writer.
    pub method: u8,
    pub reviewer_enabled: bool,
    pub k_max: u32,
    pub iterations: f64,
    pub token_usage: f64,
    pub pass_rate: f64,
    pub cost: f64,
    pub histogram: ErrorHistogram,
    pub per_modality: BTreeMap<Modality, Aggregate>,
    pub per_case: Vec<CaseRecord>,
}

impl MetricsReport {
    pub fn build(
        records: Vec<CaseRecord>,
        k_max: u32,
        prices: &Prices,
        method: u8,
        reviewer_enabled: bool,
    ) -> Result<Self, MetricsError> {
        let all = Aggregate::of(&records, k_max, prices)?;
        let mut per_modality = BTreeMap::new();
        for m in [Modality::NaturalLanguage, Modality::Multimodal] {
            let subset: Vec<CaseRecord> = records.iter().filter(|r| r.modality == m).cloned().collect();
            if !subset.is_empty() {
                per_modality.insert(m, Aggregate::of(&subset, k_max, prices)?);
            }
        }
        Ok(Self {
            method,
            reviewer_enabled,
            k_max,
            iterations: all.iterations,
            token_usage: all.token_usage,
            pass_rate: all.pass_rate,
            cost: all.cost,
            histogram: error_stats(records.iter().flat_map(|r| &r.diagnoses)),
            per_modality,
            per_case: records,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(success: bool, k: u32, t: (u64, u64, u64)) -> CaseRecord {
        CaseRecord {
            case_id: "c".into(),
            modality: Modality::NaturalLanguage,
            success,
            k_i: k,
            t_in: t.0,
            t_think: t.1,
            t_out: t.2,
            diagnoses: vec![],
        }
    }

    fn brute_iterations(records: &[CaseRecord], k_max: u32) -> f64 {
        let mut acc = 0.0;
        for r in records {
            acc += if r.success { r.k_i as f64 } else { k_max as f64 };
        }
        acc / records.len() as f64
    }

    #[test]
    fn iteration_examples() {
        assert_eq!(iterations(&vec![rec(true, 0, (0, 0, 0)); 3], 20).unwrap(), 0.0);
        let rs = [rec(true, 2, (0, 0, 0)), rec(true, 4, (0, 0, 0)), rec(false, 7, (0, 0, 0))];
        assert!((iterations(&rs, 20).unwrap() - 26.0 / 3.0).abs() < 1e-12);
        assert_eq!(iterations(&[rec(false, 3, (0, 0, 0))], 20).unwrap(), 20.0);
        assert!(matches!(iterations(&[], 20), Err(MetricsError::EmptyRecords)));
    }

    #[test]
    fn token_and_cost_examples() {
        assert_eq!(token_usage(&[rec(true, 0, (100, 50, 25))]).unwrap(), 175.0);
        assert_eq!(token_usage(&[rec(true, 0, (100, 0, 0)), rec(true, 0, (300, 0, 0))]).unwrap(), 200.0);
        let p = Prices { p_in: 1.0, p_think: 0.0, p_out: 0.0 };
        assert_eq!(cost(&[rec(true, 0, (10000, 0, 0))], &p).unwrap(), 1.0);
        let p = Prices { p_in: 2.0, p_think: 0.0, p_out: 4.0 };
        let two = [rec(true, 0, (5000, 0, 5000)), rec(false, 0, (5000, 0, 5000))];
        assert!((cost(&two, &p).unwrap() - 3.0).abs() < 1e-12);
        assert!(cost(&two, &Prices { p_in: -1.0, p_think: 0.0, p_out: 0.0 }).is_err());
    }

    #[test]
    fn pass_rate_examples() {
        let mut rs: Vec<CaseRecord> = (0..21).map(|_| rec(true, 0, (0, 0, 0))).collect();
        rs.extend((0..4).map(|_| rec(false, 0, (0, 0, 0))));
        assert_eq!(pass_rate(&rs).unwrap(), 0.84);
        let eight: Vec<CaseRecord> = (0..10).map(|i| rec(i < 8, 0, (0, 0, 0))).collect();
        assert_eq!(pass_rate(&eight).unwrap(), 0.80);
        assert_eq!(pass_rate(&vec![rec(false, 0, (0, 0, 0)); 5]).unwrap(), 0.0);
    }

    #[test]
    fn histogram_examples() {
        let h = error_stats(std::iter::empty());
        assert_eq!(h.total, 0);
        assert!(h.percentages.values().all(|&p| p == 0.0));
        let mut ds = vec![
            ErrorDiagnosis { error_type: ErrorType::MissingFile, description: String::new(), file_path: "0/p".into() };
            3
        ];
        ds.push(ErrorDiagnosis::unknown("?"));
        let h = error_stats(&ds);
        assert_eq!((h.percent(ReportCategory::MissingFile), h.percent(ReportCategory::Unknown)), (75.0, 25.0));
    }

    #[test]
    fn grammar_split() {
        let f = |d: &str| ErrorDiagnosis { error_type: ErrorType::FormatError, description: d.into(), file_path: "system/fvSolution".into() };
        assert_eq!(report_category(&f("missing semicolon after nu")), ReportCategory::Grammar);
        assert_eq!(report_category(&f("keyword rhoFinal is undefined")), ReportCategory::Configuration);
    }

    fn record_strategy() -> impl Strategy<Value = CaseRecord> {
        (any::<bool>(), 0u32..20, 0u64..100_000, 0u64..100_000, 0u64..100_000)
            .prop_map(|(s, k, a, b, c)| rec(s, k, (a, b, c)))
    }

    proptest! {
        #[test]
        fn metric_identities(rs in proptest::collection::vec(record_strategy(), 1..40),
                             p_in in 0.0f64..10.0, p_think in 0.0f64..10.0, p_out in 0.0f64..10.0) {
            let n = rs.len() as f64;
            let pr = pass_rate(&rs).unwrap();
            prop_assert!(((pr * n).round() - pr * n).abs() < 1e-9);
            let it = iterations(&rs, 20).unwrap();
            prop_assert!(it >= 0.0);
            prop_assert!((it - brute_iterations(&rs, 20)).abs() < 1e-9);
            let prices = Prices { p_in, p_think, p_out };
            let doubled = Prices { p_in: 2.0 * p_in, p_think: 2.0 * p_think, p_out: 2.0 * p_out };
            let c = cost(&rs, &prices).unwrap();
            prop_assert!((cost(&rs, &doubled).unwrap() - 2.0 * c).abs() <= 1e-9 * c.max(1.0));
            prop_assert_eq!(token_usage(&rs).unwrap(), token_usage(&rs).unwrap());
            let zero = Prices { p_in: 0.0, p_think: 0.0, p_out: 0.0 };
            prop_assert_eq!(cost(&rs, &zero).unwrap(), 0.0);
        }

        #[test]
        fn percentages_sum_to_100(types in proptest::collection::vec(0usize..5, 1..60)) {
            let all = [ErrorType::FormatError, ErrorType::MissingFile, ErrorType::GeometryError, ErrorType::TimePrecisionError, ErrorType::Unknown];
            let ds: Vec<ErrorDiagnosis> = types.iter().map(|&i| ErrorDiagnosis { error_type: all[i], description: String::new(), file_path: String::new() }).collect();
            let h = error_stats(&ds);
            prop_assert!((h.percentages.values().sum::<f64>() - 100.0).abs() < 1e-9);
        }
    }
}
