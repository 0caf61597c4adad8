use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::extract::{age_on, bmi_class, comorbidity_flags, demographic_features, ecg_features, height_group};
use super::{FeatureMapping, RawTables, VisitRecord, PIPELINE_SCHEMA};
use crate::cohort::{CohortTable, PatientFeatures};
use crate::error::{Error, Result};
use crate::knowledge::KnowledgeModel;

const MIN_VISIT_DATES: usize = 3;
const MIN_PRE_DIAGNOSIS_DATES: usize = 2;

/// Selected patients after class balancing.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CohortSelection {
    /// Positive patient id to cutoff (first target diagnosis date, exclusive).
    pub positives: BTreeMap<String, NaiveDate>,
    pub negatives: BTreeSet<String>,
}

impl CohortSelection {
    pub fn cutoff(&self, patient_id: &str) -> Option<NaiveDate> {
        self.positives.get(patient_id).copied()
    }
}

/// Applies the visit-history inclusion rules, then undersamples the larger
/// class uniformly (seeded) to the size of the smaller one.
pub fn select_cohort(visits: &[VisitRecord], mapping: &FeatureMapping, seed: u64) -> Result<CohortSelection> {
    let mut by_patient: BTreeMap<&str, Vec<&VisitRecord>> = BTreeMap::new();
    for v in visits {
        by_patient.entry(v.patient_id.as_str()).or_default().push(v);
    }

    let mut positives: BTreeMap<String, NaiveDate> = BTreeMap::new();
    let mut negatives: Vec<String> = Vec::new();
    for (id, vs) in by_patient {
        let dates: BTreeSet<NaiveDate> = vs.iter().map(|v| v.visit_date).collect();
        if dates.len() < MIN_VISIT_DATES {
            continue;
        }
        let first_dx = vs
            .iter()
            .filter(|v| v.icd_codes.iter().any(|c| mapping.is_target(c)))
            .map(|v| v.visit_date)
            .min();
        match first_dx {
            Some(dx) => {
                if dates.range(..dx).count() >= MIN_PRE_DIAGNOSIS_DATES {
                    positives.insert(id.to_string(), dx);
                }
            }
            None => negatives.push(id.to_string()),
        }
    }
    if positives.is_empty() {
        return Err(Error::NoEligiblePositives);
    }
    if negatives.is_empty() {
        return Err(Error::InsufficientData("no eligible negatives".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keep = positives.len().min(negatives.len());
    if negatives.len() > keep {
        negatives.shuffle(&mut rng);
        negatives.truncate(keep);
    } else if positives.len() > keep {
        let mut ids: Vec<String> = positives.keys().cloned().collect();
        ids.shuffle(&mut rng);
        let kept: BTreeSet<String> = ids.into_iter().take(keep).collect();
        positives.retain(|id, _| kept.contains(id));
    }
    Ok(CohortSelection {
        positives,
        negatives: negatives.into_iter().collect(),
    })
}

/// Runs selection and feature extraction, producing one row per selected
/// patient sorted by id, columns in the model's factor order.
pub fn build_cohort(
    raw: &RawTables,
    model: &KnowledgeModel,
    mapping: &FeatureMapping,
    seed: u64,
) -> Result<CohortTable> {
    let produced: BTreeSet<&str> = PIPELINE_SCHEMA.iter().map(|(f, _)| *f).collect();
    let missing: Vec<&str> = model
        .factors()
        .map(|f| f.name.as_str())
        .filter(|f| !produced.contains(f))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Config(format!(
            "the feature pipeline does not produce factor(s) {}",
            missing.join(", ")
        )));
    }

    let selection = select_cohort(&raw.visits, mapping, seed)?;

    let patients: HashMap<&str, _> = raw.patients.iter().map(|p| (p.patient_id.as_str(), p)).collect();
    let mut visits: HashMap<&str, Vec<VisitRecord>> = HashMap::new();
    for v in &raw.visits {
        visits.entry(v.patient_id.as_str()).or_default().push(v.clone());
    }
    let mut measurements: HashMap<&str, Vec<_>> = HashMap::new();
    for m in &raw.measurements {
        measurements.entry(m.patient_id.as_str()).or_default().push(m.clone());
    }
    let mut ecg: HashMap<&str, Vec<_>> = HashMap::new();
    for e in &raw.ecg {
        ecg.entry(e.patient_id.as_str()).or_default().push(e.clone());
    }

    let selected = selection
        .positives
        .keys()
        .map(|id| (id, 1u8))
        .chain(selection.negatives.iter().map(|id| (id, 0u8)));

    let mut table = CohortTable::for_model(model);
    for (id, label) in selected {
        let cutoff = selection.cutoff(id);
        let pv = visits.get(id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
        let pm = measurements.get(id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
        let pe = ecg.get(id.as_str()).map(Vec::as_slice).unwrap_or(&[]);

        let mut values: BTreeMap<&str, &str> = BTreeMap::new();
        values.extend(comorbidity_flags(pv, cutoff, mapping)?);
        if let Some(b) = bmi_class(pm, cutoff, mapping) {
            values.insert("bmi_class", b);
        }
        if let Some(e) = ecg_features(pe, cutoff) {
            values.insert("prolonged_pr", e.prolonged_pr);
            values.insert("pr_variation", e.pr_variation);
            values.insert("pwave_duration", e.pwave_duration);
        }
        if let Some(p) = patients.get(id.as_str()) {
            // Age at the index date: the cutoff for positives, the last visit otherwise.
            let index = cutoff
                .or_else(|| pv.iter().map(|v| v.visit_date).max())
                .expect("selected patients have visits");
            let (age, race, sex) = demographic_features(age_on(p.birth_date, index), &p.race, &p.sex)?;
            values.insert("age_group", age);
            values.insert("race", race);
            values.insert("sex", sex);
            if let Some(h) = height_group(pm, sex, cutoff, mapping)? {
                values.insert("height_group", h);
            }
        }

        table.rows.push(PatientFeatures {
            patient_id: id.clone(),
            values: table
                .factors
                .iter()
                .map(|f| values.get(f.as_str()).map(|s| s.to_string()))
                .collect(),
            label,
        });
    }
    table.sort_by_id();
    table.validate_against(model)?;
    Ok(table)
}
