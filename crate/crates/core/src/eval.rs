//! Train/test splitting, thresholded prediction and the five summary metrics.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bn::{posterior, Evidence};
use crate::builder::BuiltModel;
use crate::cohort::{CohortTable, PatientFeatures};
use crate::error::{Error, Result};

/// `p ≥ 0.5` classifies as present.
pub const DECISION_THRESHOLD: f64 = 0.5;

const MIN_SPLIT_ROWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl SplitSpec {
    pub fn new(seed: u64) -> Self {
        Self { train_fraction: 0.8, seed, stratified: true }
    }
}

/// Disjoint, exhaustive, seeded partition; row order within each part
/// follows the input.
pub fn split(cohort: &CohortTable, spec: &SplitSpec) -> Result<(CohortTable, CohortTable)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::Config(format!("train_fraction must be in (0, 1), got {}", spec.train_fraction)));
    }
    if cohort.len() < MIN_SPLIT_ROWS {
        return Err(Error::InsufficientData(format!(
            "{} rows; splitting needs at least {MIN_SPLIT_ROWS}",
            cohort.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let groups: Vec<Vec<&str>> = if spec.stratified {
        [0u8, 1]
            .iter()
            .map(|&l| {
                cohort
                    .rows
                    .iter()
                    .filter(|r| r.label == l)
                    .map(|r| r.patient_id.as_str())
                    .collect()
            })
            .collect()
    } else {
        vec![cohort.rows.iter().map(|r| r.patient_id.as_str()).collect()]
    };
    let mut train: HashSet<&str> = HashSet::new();
    for mut ids in groups {
        let n_train = (ids.len() as f64 * spec.train_fraction).round() as usize;
        if spec.stratified && (n_train == 0 || n_train == ids.len()) {
            return Err(Error::InsufficientData(
                "too few rows per class for a stratified split".into(),
            ));
        }
        ids.sort_unstable();
        ids.shuffle(&mut rng);
        train.extend(ids.into_iter().take(n_train));
    }
    let test: HashSet<&str> = cohort
        .rows
        .iter()
        .map(|r| r.patient_id.as_str())
        .filter(|id| !train.contains(id))
        .collect();
    Ok((cohort.subset(&train), cohort.subset(&test)))
}

/// `P(present | observed features of row)`.
pub fn predict(built: &BuiltModel, cohort: &CohortTable, row: &PatientFeatures) -> Result<f64> {
    built.p_present(&cohort.evidence(row))
}

pub fn classify(p: f64) -> bool {
    p >= DECISION_THRESHOLD
}

/// Posterior summary for one evidence set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub p_present: f64,
    pub classification: String,
    /// State distribution of every synthesis node.
    pub posteriors: BTreeMap<String, BTreeMap<String, f64>>,
}

pub fn prediction(built: &BuiltModel, evidence: &Evidence) -> Result<Prediction> {
    built.net.check_evidence(evidence)?;
    let p_present = built.p_present(evidence)?;
    let mut posteriors = BTreeMap::new();
    for node in built.synthesis_nodes() {
        let post = posterior(&built.net, evidence, node)?;
        posteriors.insert(node.to_string(), post.states.into_iter().zip(post.distribution).collect());
    }
    Ok(Prediction {
        p_present,
        classification: built.classification(p_present).to_string(),
        posteriors,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_test: usize,
    pub confusion: Confusion,
    pub accuracy: f64,
    pub recall: f64,
    /// Reported as 0 when no row is predicted positive; see `precision_defined`.
    pub precision: f64,
    pub precision_defined: bool,
    pub f1: f64,
    pub auc: f64,
}

impl MetricsReport {
    /// Threshold metrics from counts alone; `auc` is supplied separately.
    pub fn from_confusion(c: Confusion, auc: f64) -> Self {
        let n = c.total() as f64;
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let recall = ratio(c.tp, c.tp + c.fn_);
        let precision = ratio(c.tp, c.tp + c.fp);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            n_test: c.total() as usize,
            confusion: c,
            accuracy: if n > 0.0 { (c.tp + c.tn) as f64 / n } else { 0.0 },
            recall,
            precision,
            precision_defined: c.tp + c.fp > 0,
            f1,
            auc,
        }
    }
}

/// Mann-Whitney AUC with average ranks for ties.
///
/// The statistic is accumulated as the integer `2U` and divided once, so it
/// equals concordant-pair counting (ties ½) exactly.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    assert_eq!(scores.len(), labels.len());
    let n1 = labels.iter().filter(|l| **l == 1).count() as u64;
    let n0 = labels.len() as u64 - n1;
    if n1 == 0 || n0 == 0 {
        return Err(Error::AucUndefined);
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Sum over positives of twice the average 1-based rank.
    let mut twice_rank_sum: u64 = 0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let twice_rank = (i + 1 + j + 1) as u64;
        let pos = idx[i..=j].iter().filter(|&&k| labels[k] == 1).count() as u64;
        twice_rank_sum += pos * twice_rank;
        i = j + 1;
    }
    let twice_u = twice_rank_sum - n1 * (n1 + 1);
    Ok(twice_u as f64 / (2 * n1 * n0) as f64)
}

pub fn metrics(scores: &[f64], labels: &[u8]) -> Result<MetricsReport> {
    let mut c = Confusion::default();
    for (&p, &l) in scores.iter().zip(labels) {
        match (classify(p), l == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(MetricsReport::from_confusion(c, auc(scores, labels)?))
}

/// Errors if any test row was used for training.
pub fn audit_disjoint(built: &BuiltModel, test: &CohortTable) -> Result<()> {
    let train: HashSet<&str> = built.provenance.train_ids.iter().map(String::as_str).collect();
    let leaked: Vec<&str> = test
        .rows
        .iter()
        .map(|r| r.patient_id.as_str())
        .filter(|id| train.contains(id))
        .collect();
    if leaked.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(vec![format!(
            "{} test rows were used for training (first: {})",
            leaked.len(),
            leaked[0]
        )]))
    }
}

pub fn evaluate(built: &BuiltModel, test: &CohortTable) -> Result<MetricsReport> {
    if test.is_empty() {
        return Err(Error::InsufficientData("test set is empty".into()));
    }
    audit_disjoint(built, test)?;
    let scores = test
        .rows
        .iter()
        .map(|r| predict(built, test, r))
        .collect::<Result<Vec<f64>>>()?;
    let labels: Vec<u8> = test.rows.iter().map(|r| r.label).collect();
    metrics(&scores, &labels)
}

/// Fixed-width table, one model per row, metrics as percentages.
pub fn metrics_table(rows: &[(&str, &MetricsReport)]) -> String {
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max("Model".len());
    let mut out = format!(
        "{:<width$}  {:>8}  {:>8}  {:>9}  {:>8}  {:>8}\n",
        "Model", "Accuracy", "Recall", "Precision", "F1", "AUC"
    );
    for (name, m) in rows {
        out.push_str(&format!(
            "{:<width$}  {:>7.2}%  {:>7.2}%  {:>8.2}%  {:>7.2}%  {:>7.2}%\n",
            name,
            100.0 * m.accuracy,
            100.0 * m.recall,
            100.0 * m.precision,
            100.0 * m.f1,
            100.0 * m.auc
        ));
    }
    out
}
