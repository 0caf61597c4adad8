//! The categorical cohort table shared by the pipeline, statistics, builders,
//! and evaluation.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bn::Evidence;
use crate::error::{Error, Result};
use crate::knowledge::KnowledgeModel;

/// One patient: a state (or missing) per factor column plus the target label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientFeatures {
    pub patient_id: String,
    pub values: Vec<Option<String>>,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CohortTable {
    pub factors: Vec<String>,
    pub rows: Vec<PatientFeatures>,
}

impl CohortTable {
    pub fn new(factors: Vec<String>) -> Self {
        Self { factors, rows: Vec::new() }
    }

    /// Empty table whose columns follow the model's factor order.
    pub fn for_model(model: &KnowledgeModel) -> Self {
        Self::new(model.factors().map(|f| f.name.clone()).collect())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, factor: &str) -> Option<usize> {
        self.factors.iter().position(|f| f == factor)
    }

    pub fn value<'a>(&'a self, row: &'a PatientFeatures, factor: &str) -> Option<&'a str> {
        self.column(factor)
            .and_then(|c| row.values[c].as_deref())
    }

    /// Non-missing values of a row as inference evidence.
    pub fn evidence(&self, row: &PatientFeatures) -> Evidence {
        self.factors
            .iter()
            .zip(&row.values)
            .filter_map(|(f, v)| v.as_ref().map(|v| (f.clone(), v.clone())))
            .collect()
    }

    pub fn count_label(&self, label: u8) -> usize {
        self.rows.iter().filter(|r| r.label == label).count()
    }

    pub fn sort_by_id(&mut self) {
        self.rows.sort_by(|a, b| a.patient_id.cmp(&b.patient_id));
    }

    pub fn subset(&self, ids: &HashSet<&str>) -> CohortTable {
        CohortTable {
            factors: self.factors.clone(),
            rows: self
                .rows
                .iter()
                .filter(|r| ids.contains(r.patient_id.as_str()))
                .cloned()
                .collect(),
        }
    }

    /// Checks ids, labels, and that every value is a state of its factor.
    pub fn validate_against(&self, model: &KnowledgeModel) -> Result<()> {
        let mut problems = Vec::new();
        for f in &self.factors {
            if model.factor(f).is_none() {
                problems.push(format!("column `{f}` is not a factor of the knowledge model"));
            }
        }
        let mut ids = HashSet::new();
        for (i, row) in self.rows.iter().enumerate() {
            if !ids.insert(row.patient_id.as_str()) {
                problems.push(format!("rows[{i}]: duplicate patient_id `{}`", row.patient_id));
            }
            if row.label > 1 {
                problems.push(format!("rows[{i}]: label must be 0 or 1"));
            }
            if row.values.len() != self.factors.len() {
                problems.push(format!("rows[{i}]: expected {} values", self.factors.len()));
                continue;
            }
            for (f, v) in self.factors.iter().zip(&row.values) {
                if let (Some(v), Some(factor)) = (v, model.factor(f)) {
                    if !factor.states.contains(v) {
                        problems.push(format!("rows[{i}].{f}: invalid state `{v}`"));
                    }
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        let mut header = vec!["patient_id".to_string()];
        header.extend(self.factors.iter().cloned());
        header.push("label".into());
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.patient_id.clone()];
            rec.extend(row.values.iter().map(|v| v.clone().unwrap_or_default()));
            rec.push(row.label.to_string());
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
        if header.len() < 2 || header[0] != "patient_id" || header[header.len() - 1] != "label" {
            return Err(Error::Parse(
                "cohort header must be `patient_id,<factors...>,label`".into(),
            ));
        }
        let factors = header[1..header.len() - 1].to_vec();
        let mut table = CohortTable::new(factors);
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let label = match &rec[rec.len() - 1] {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(Error::Parse(format!("row {}: invalid label `{other}`", i + 1)))
                }
            };
            let values = (1..rec.len() - 1)
                .map(|c| {
                    let v = &rec[c];
                    (!v.is_empty()).then(|| v.to_string())
                })
                .collect();
            table.rows.push(PatientFeatures {
                patient_id: rec[0].to_string(),
                values,
                label,
            });
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv()?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_keeps_missing_cells() {
        let mut t = CohortTable::new(vec!["a".into(), "b".into()]);
        t.rows.push(PatientFeatures {
            patient_id: "P1".into(),
            values: vec![Some("x".into()), None],
            label: 1,
        });
        let text = t.to_csv().unwrap();
        assert_eq!(text, "patient_id,a,b,label\nP1,x,,1\n");
        assert_eq!(CohortTable::from_csv(&text).unwrap(), t);
        let ev = t.evidence(&t.rows[0]);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev["a"], "x");
    }

    #[test]
    fn bad_label_is_rejected() {
        assert!(CohortTable::from_csv("patient_id,a,label\nP1,x,2\n").is_err());
        assert!(CohortTable::from_csv("id,a,label\n").is_err());
    }
}
