//! Pearson chi-square test and Cramér's V for factor/target contingency tables.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::cohort::CohortTable;
use crate::error::{Error, Result};
use crate::knowledge::KnowledgeModel;

/// Significance level for [`association_report`].
pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ContingencyTable {
    pub fn new(counts: Vec<Vec<u64>>) -> Self {
        let row_labels = (0..counts.len()).map(|i| format!("r{i}")).collect();
        let col_labels = (0..counts.first().map_or(0, Vec::len))
            .map(|i| format!("c{i}"))
            .collect();
        Self { row_labels, col_labels, counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn transpose(&self) -> Self {
        let cols = self.col_labels.len();
        Self {
            row_labels: self.col_labels.clone(),
            col_labels: self.row_labels.clone(),
            counts: (0..cols)
                .map(|c| self.counts.iter().map(|r| r[c]).collect())
                .collect(),
        }
    }

    fn marginals(&self) -> Result<(Vec<f64>, Vec<f64>, f64)> {
        let r = self.counts.len();
        let c = self.col_labels.len();
        if r < 2 || c < 2 {
            return Err(Error::DegenerateTable(format!(
                "need at least 2 rows and 2 columns, got {r}x{c}"
            )));
        }
        if self.counts.iter().any(|row| row.len() != c) {
            return Err(Error::DegenerateTable("ragged table".into()));
        }
        let rows: Vec<f64> = self.counts.iter().map(|row| row.iter().sum::<u64>() as f64).collect();
        let cols: Vec<f64> = (0..c)
            .map(|j| self.counts.iter().map(|row| row[j]).sum::<u64>() as f64)
            .collect();
        if let Some(i) = rows.iter().position(|&m| m == 0.0) {
            return Err(Error::DegenerateTable(format!("row `{}` has zero total", self.row_labels[i])));
        }
        if let Some(j) = cols.iter().position(|&m| m == 0.0) {
            return Err(Error::DegenerateTable(format!("column `{}` has zero total", self.col_labels[j])));
        }
        let n = rows.iter().sum();
        Ok((rows, cols, n))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub chi2: f64,
    pub dof: u32,
    pub p_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strength {
    Weak,
    Moderate,
    Strong,
    VeryStrong,
}

impl Strength {
    /// Half-open bands: [0, .1) weak, [.1, .15) moderate, [.15, .25) strong, rest very strong.
    pub fn from_v(v: f64) -> Self {
        if v < 0.10 {
            Strength::Weak
        } else if v < 0.15 {
            Strength::Moderate
        } else if v < 0.25 {
            Strength::Strong
        } else {
            Strength::VeryStrong
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Strength::Weak => "weak",
            Strength::Moderate => "moderate",
            Strength::Strong => "strong",
            Strength::VeryStrong => "very_strong",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssociationResult {
    pub chi2: f64,
    pub dof: u32,
    pub p_value: f64,
    pub cramers_v: f64,
    pub strength: Strength,
}

/// Upper-tail probability of the chi-square distribution.
pub fn chi2_sf(x: f64, dof: u32) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let dist = ChiSquared::new(f64::from(dof)).expect("dof > 0");
    dist.sf(x).clamp(0.0, 1.0)
}

/// Pearson chi-square without continuity correction.
pub fn chi_square(table: &ContingencyTable) -> Result<ChiSquare> {
    let (rows, cols, n) = table.marginals()?;
    let mut chi2 = 0.0;
    for (i, row) in table.counts.iter().enumerate() {
        for (j, &o) in row.iter().enumerate() {
            let e = rows[i] * cols[j] / n;
            let d = o as f64 - e;
            chi2 += d * d / e;
        }
    }
    let dof = ((rows.len() - 1) * (cols.len() - 1)) as u32;
    Ok(ChiSquare { chi2, dof, p_value: chi2_sf(chi2, dof) })
}

pub fn cramers_v(table: &ContingencyTable) -> Result<AssociationResult> {
    let ChiSquare { chi2, dof, p_value } = chi_square(table)?;
    let n = table.total() as f64;
    let k = table.counts.len().min(table.col_labels.len()) as f64;
    let v = (chi2 / (n * (k - 1.0))).sqrt().clamp(0.0, 1.0);
    Ok(AssociationResult {
        chi2,
        dof,
        p_value,
        cramers_v: v,
        strength: Strength::from_v(v),
    })
}

/// Factor-state by label contingency table, missing values dropped and
/// unobserved states omitted.
pub fn factor_table(cohort: &CohortTable, model: &KnowledgeModel, factor: &str) -> Result<ContingencyTable> {
    let f = model
        .factor(factor)
        .ok_or_else(|| Error::Lookup(format!("unknown factor `{factor}`")))?;
    let col = cohort
        .column(factor)
        .ok_or_else(|| Error::Lookup(format!("cohort has no column `{factor}`")))?;
    let mut counts = vec![vec![0u64; 2]; f.states.len()];
    for row in &cohort.rows {
        if let Some(v) = &row.values[col] {
            if let Some(s) = f.states.iter().position(|x| x == v) {
                counts[s][usize::from(row.label.min(1))] += 1;
            }
        }
    }
    let (row_labels, counts): (Vec<String>, Vec<Vec<u64>>) = f
        .states
        .iter()
        .cloned()
        .zip(counts)
        .filter(|(_, c)| c.iter().sum::<u64>() > 0)
        .unzip();
    Ok(ContingencyTable {
        row_labels,
        col_labels: model.target.states.clone(),
        counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportEntry {
    pub factor: String,
    #[serde(flatten)]
    pub result: Option<AssociationResult>,
    pub significant: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Per-factor association with the label, in the model's factor order.
pub fn association_report(cohort: &CohortTable, model: &KnowledgeModel) -> Result<Vec<ReportEntry>> {
    if cohort.is_empty() {
        return Err(Error::InsufficientData("cohort is empty".into()));
    }
    model
        .factors()
        .map(|f| {
            let table = factor_table(cohort, model, &f.name)?;
            Ok(match cramers_v(&table) {
                Ok(r) => ReportEntry {
                    factor: f.name.clone(),
                    significant: r.p_value < SIGNIFICANCE_LEVEL,
                    result: Some(r),
                    warning: None,
                },
                Err(Error::DegenerateTable(why)) => ReportEntry {
                    factor: f.name.clone(),
                    result: None,
                    significant: false,
                    warning: Some(format!("skipped: {why}")),
                },
                Err(e) => return Err(e),
            })
        })
        .collect()
}

pub fn report_csv(entries: &[ReportEntry]) -> String {
    let mut out = String::from("factor,chi2,dof,p_value,cramers_v,strength,significant,warning\n");
    for e in entries {
        match &e.result {
            Some(r) => out.push_str(&format!(
                "{},{},{},{},{},{},{},\n",
                e.factor, r.chi2, r.dof, r.p_value, r.cramers_v, r.strength.as_str(), e.significant
            )),
            None => out.push_str(&format!(
                "{},,,,,,false,{}\n",
                e.factor,
                e.warning.as_deref().unwrap_or_default().replace(',', ";")
            )),
        }
    }
    out
}
