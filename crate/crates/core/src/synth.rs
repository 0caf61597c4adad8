//! Synthetic cohorts with planted factor effects, and raw EHR tables that the
//! feature pipeline maps back onto them.
//!
//! Randomness comes from `ChaCha8Rng::seed_from_u64(seed)`. Cohort draws use
//! stream 0 in a fixed order (per patient: factor states in spec order, then
//! missingness in spec order, then the label); raw-table details use stream 1.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::{Datelike, Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cohort::{CohortTable, PatientFeatures};
use crate::error::{Error, Result};
use crate::features::{
    EcgRecord, FeatureMapping, MeasurementKind, MeasurementRecord, PatientRecord, RawTables, VisitRecord, COMORBIDITIES,
    PIPELINE_SCHEMA,
};
use crate::knowledge::KnowledgeModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorSpec {
    pub name: String,
    pub states: Vec<String>,
    pub probs: Vec<f64>,
    /// Log-odds contribution of each state to the label.
    pub effects: Vec<f64>,
    #[serde(default)]
    pub missing_rate: f64,
    /// Factors sharing a group go missing together.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub missing_group: Option<String>,
}

/// Pre-index visit counts, drawn uniformly from `min..=max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisitSpec {
    pub min: u32,
    pub max: u32,
}

impl Default for VisitSpec {
    fn default() -> Self {
        Self { min: 2, max: 6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub n_patients: usize,
    pub seed: u64,
    pub intercept: f64,
    pub factors: Vec<FactorSpec>,
    #[serde(default)]
    pub visits: VisitSpec,
}

impl GeneratorSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        spec.check()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// The shipped atrial fibrillation generator.
    pub fn default_af() -> Self {
        Self::from_json(include_str!("../data/af_generator.json")).expect("shipped generator is valid")
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_size(mut self, n: usize) -> Self {
        self.n_patients = n;
        self
    }

    pub fn factor(&self, name: &str) -> Option<&FactorSpec> {
        self.factors.iter().find(|f| f.name == name)
    }

    pub fn check(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.n_patients == 0 {
            problems.push("n_patients must be ≥ 1".to_string());
        }
        if self.visits.min > self.visits.max {
            problems.push("visits.min must not exceed visits.max".to_string());
        }
        let mut names = BTreeSet::new();
        let mut group_rates: BTreeMap<&str, f64> = BTreeMap::new();
        for (i, f) in self.factors.iter().enumerate() {
            let at = format!("factors[{i}] ({})", f.name);
            if !names.insert(f.name.as_str()) {
                problems.push(format!("{at}: duplicate factor"));
            }
            if f.states.len() < 2 {
                problems.push(format!("{at}: needs at least 2 states"));
            }
            if f.probs.len() != f.states.len() || f.effects.len() != f.states.len() {
                problems.push(format!("{at}: probs and effects need one entry per state"));
            }
            let s: f64 = f.probs.iter().sum();
            if (s - 1.0).abs() > 1e-9 || f.probs.iter().any(|p| *p < 0.0) {
                problems.push(format!("{at}: probs sum {s} ≠ 1"));
            }
            if !(0.0..=1.0).contains(&f.missing_rate) {
                problems.push(format!("{at}: missing_rate outside [0, 1]"));
            }
            if let Some(g) = &f.missing_group {
                if let Some(rate) = group_rates.insert(g, f.missing_rate) {
                    if rate != f.missing_rate {
                        problems.push(format!("{at}: missing group `{g}` has differing rates"));
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

    /// Errors unless every factor column is a factor of `model` with the same states.
    pub fn check_against(&self, model: &KnowledgeModel) -> Result<()> {
        let problems: Vec<String> = self
            .factors
            .iter()
            .filter_map(|f| match model.factor(&f.name) {
                None => Some(format!("`{}` is not a factor of the knowledge model", f.name)),
                Some(k) if k.states != f.states => Some(format!("`{}` states differ from the knowledge model", f.name)),
                _ => None,
            })
            .collect();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }
}

fn categorical(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Patient id for the `i`-th generated row.
pub fn patient_id(i: usize) -> String {
    format!("P{:06}", i + 1)
}

pub fn generate_cohort(spec: &GeneratorSpec) -> Result<CohortTable> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut table = CohortTable::new(spec.factors.iter().map(|f| f.name.clone()).collect());
    for i in 0..spec.n_patients {
        let states: Vec<usize> = spec.factors.iter().map(|f| categorical(&mut rng, &f.probs)).collect();
        let mut group_missing: BTreeMap<&str, bool> = BTreeMap::new();
        let mut missing = Vec::with_capacity(spec.factors.len());
        for f in &spec.factors {
            let m = match &f.missing_group {
                Some(g) => match group_missing.get(g.as_str()) {
                    Some(&m) => m,
                    None => {
                        let m = rng.gen::<f64>() < f.missing_rate;
                        group_missing.insert(g, m);
                        m
                    }
                },
                None => rng.gen::<f64>() < f.missing_rate,
            };
            missing.push(m);
        }
        let logit = spec.intercept
            + spec
                .factors
                .iter()
                .zip(&states)
                .map(|(f, &s)| f.effects[s])
                .sum::<f64>();
        let label = u8::from(rng.gen::<f64>() < sigmoid(logit));
        table.rows.push(PatientFeatures {
            patient_id: patient_id(i),
            values: spec
                .factors
                .iter()
                .zip(states.iter().zip(&missing))
                .map(|(f, (&s, &m))| (!m).then(|| f.states[s].clone()))
                .collect(),
            label,
        });
    }
    Ok(table)
}

/// Raw tables plus the cohort they encode and the planted edge cases.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFixture {
    pub raw: RawTables,
    /// What the pipeline should recover for every planted patient it selects.
    pub cohort: CohortTable,
    /// Patients whose height is missing because of a planted > 2 cm conflict.
    pub height_conflicts: Vec<String>,
    /// Patients with exactly one pre-index ECG.
    pub single_ecg: Vec<String>,
    /// Positives carrying records dated on or after their cutoff.
    pub poisoned: Vec<String>,
    /// Patients that must fail the visit-history rules.
    pub distractors: Vec<String>,
}

const ALWAYS_OBSERVED: [&str; 11] = [
    "cardiovascular_disease",
    "diabetes_mellitus",
    "hypertension",
    "kidney_disease",
    "copd",
    "sleep_apnoea",
    "smoking_status",
    "alcohol_misuse",
    "age_group",
    "race",
    "sex",
];

fn bmi_value(class: &str) -> f64 {
    match class {
        "underweight" => 17.0,
        "normal" => 22.0,
        "overweight" => 27.5,
        "obese_1" => 32.5,
        "obese_2" => 37.5,
        _ => 43.0,
    }
}

fn height_value(sex: &str, band: &str) -> f64 {
    let i = band.trim_start_matches("band_").parse::<usize>().unwrap_or(1) - 1;
    if sex == "female" {
        [152.0, 157.0, 159.0, 161.5, 166.0][i]
    } else {
        [165.0, 170.0, 173.5, 176.5, 182.0][i]
    }
}

fn pwave_value(bin: &str) -> f64 {
    match bin {
        "very_short" => 85.0,
        "short" => 95.0,
        "normal" => 103.0,
        "intermediate_1" => 109.0,
        "intermediate_2" => 116.0,
        "long" => 125.0,
        _ => 135.0,
    }
}

fn age_value(group: &str) -> u32 {
    match group {
        "<60" => 50,
        "60-64" => 62,
        "65-74" => 70,
        _ => 80,
    }
}

fn race_value(race: &str, rng: &mut ChaCha8Rng) -> &'static str {
    let pick = |rng: &mut ChaCha8Rng, opts: &[&'static str]| opts[rng.gen_range(0..opts.len())];
    match race {
        "asian" => pick(rng, &["ASIAN", "ASIAN - CHINESE", "ASIAN - SOUTH EAST ASIAN"]),
        "black" => pick(rng, &["BLACK/AFRICAN AMERICAN", "BLACK/CAPE VERDEAN"]),
        "hispanic" => pick(rng, &["HISPANIC/LATINO - PUERTO RICAN", "HISPANIC OR LATINO", "SOUTH AMERICAN"]),
        "white" => pick(rng, &["WHITE", "WHITE - OTHER EUROPEAN", "WHITE - RUSSIAN"]),
        _ => pick(rng, &["OTHER", "UNKNOWN", "AMERICAN INDIAN/ALASKA NATIVE"]),
    }
}

fn plus_days(d: NaiveDate, n: u64) -> NaiveDate {
    d.checked_add_days(Days::new(n)).expect("date in range")
}

fn birth_date(index: NaiveDate, age: u32) -> NaiveDate {
    let anchor = NaiveDate::from_ymd_opt(index.year() - age as i32, index.month(), index.day().min(28)).expect("valid date");
    anchor.checked_sub_days(Days::new(100)).expect("date in range")
}

/// Raw visits, measurements and ECGs whose pipeline output reproduces the
/// generated cohort for every patient the pipeline selects.
pub fn generate_raw(spec: &GeneratorSpec, mapping: &FeatureMapping) -> Result<RawFixture> {
    let pipeline: BTreeMap<&str, &[&str]> = PIPELINE_SCHEMA.iter().copied().collect();
    let mut problems = Vec::new();
    for (name, states) in &pipeline {
        match spec.factor(name) {
            None => problems.push(format!("raw generation needs factor `{name}`")),
            Some(f) if f.states.iter().map(String::as_str).ne(states.iter().copied()) => {
                problems.push(format!("`{name}` states differ from the pipeline's"))
            }
            _ => {}
        }
    }
    for name in ALWAYS_OBSERVED {
        if spec.factor(name).is_some_and(|f| f.missing_rate > 0.0) {
            problems.push(format!("`{name}` is always observed by the pipeline; missing_rate must be 0"));
        }
    }
    if spec.visits.min < 2 {
        problems.push("visits.min must be ≥ 2 for raw generation".into());
    }
    if spec.factors.len() != pipeline.len() {
        problems.push("raw generation supports exactly the pipeline factors".into());
    }
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    mapping.check()?;

    let cohort = generate_cohort(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1);
    let epoch = NaiveDate::from_ymd_opt(2012, 1, 1).expect("valid date");

    let mut fx = RawFixture {
        raw: RawTables::default(),
        cohort: CohortTable::new(cohort.factors.clone()),
        height_conflicts: Vec::new(),
        single_ecg: Vec::new(),
        poisoned: Vec::new(),
        distractors: Vec::new(),
    };

    for row in &cohort.rows {
        let id = row.patient_id.clone();
        let get = |f: &str| cohort.value(row, f);
        let n_pre = rng.gen_range(spec.visits.min..=spec.visits.max) as u64;
        let start = plus_days(epoch, rng.gen_range(0..2000));
        let gap = rng.gen_range(20..90u64);
        let index = plus_days(start, gap * n_pre);
        let positive = row.label == 1;

        // Pre-index visits, plus the index visit (diagnosis for positives).
        let mut visits: Vec<VisitRecord> = (0..n_pre)
            .map(|k| VisitRecord { patient_id: id.clone(), visit_date: plus_days(start, gap * k), icd_codes: Vec::new() })
            .collect();
        let mut coded = Vec::new();
        for name in COMORBIDITIES {
            if get(name) == Some("present") {
                coded.push(&mapping.comorbidities[name]);
            }
        }
        if get("smoking_status") == Some("smoker") {
            coded.push(&mapping.smoking);
        }
        if get("alcohol_misuse") == Some("present") {
            coded.push(&mapping.alcohol_misuse);
        }
        for prefixes in coded {
            let code = prefixes[rng.gen_range(0..prefixes.len())].clone();
            let k = rng.gen_range(0..n_pre as usize);
            visits[k].icd_codes.push(code);
        }
        let mut index_visit = VisitRecord { patient_id: id.clone(), visit_date: index, icd_codes: Vec::new() };
        if positive {
            let t = &mapping.target_codes;
            index_visit.icd_codes.push(t[rng.gen_range(0..t.len())].clone());
        }
        visits.push(index_visit);

        let sex = get("sex").expect("always observed");
        let age = age_value(get("age_group").expect("always observed"));
        fx.raw.patients.push(PatientRecord {
            patient_id: id.clone(),
            birth_date: birth_date(index, age),
            race: race_value(get("race").expect("always observed"), &mut rng).to_string(),
            sex: if sex == "female" { "F" } else { "M" }.to_string(),
        });

        // Measurements and ECGs for positives must predate the index visit.
        let last_pre = plus_days(start, gap * (n_pre - 1));
        let date_in_history = |rng: &mut ChaCha8Rng| {
            let k = rng.gen_range(0..n_pre);
            plus_days(start, gap * k)
        };
        let measure = |kind, date, value| MeasurementRecord { patient_id: id.clone(), date, kind, value };

        if let Some(class) = get("bmi_class") {
            let v = bmi_value(class);
            let values = if rng.gen::<f64>() < 0.15 && n_pre >= 3 {
                // Unstable series: rank weights give v − 1/6, same class.
                vec![v - 6.0, v + 1.0, v + 1.0]
            } else {
                (0..rng.gen_range(1..=3)).map(|_| v + rng.gen_range(-0.4..0.4)).collect()
            };
            for (k, value) in values.into_iter().enumerate() {
                fx.raw.measurements.push(measure(MeasurementKind::Bmi, plus_days(start, gap * (k as u64 % n_pre)), value));
            }
        }

        match get("height_group") {
            Some(band) => {
                let h = height_value(sex, band);
                for _ in 0..rng.gen_range(1..=3) {
                    let date = date_in_history(&mut rng);
                    fx.raw.measurements.push(measure(MeasurementKind::HeightCm, date, h + rng.gen_range(-0.4..0.4)));
                }
            }
            None => {
                if rng.gen::<bool>() {
                    let h = height_value(sex, "band_3");
                    fx.raw.measurements.push(measure(MeasurementKind::HeightCm, start, h));
                    fx.raw.measurements.push(measure(MeasurementKind::HeightCm, last_pre, h + 3.0));
                    fx.height_conflicts.push(id.clone());
                }
            }
        }

        if let (Some(pr), Some(var), Some(pw)) = (get("prolonged_pr"), get("pr_variation"), get("pwave_duration")) {
            let base = if pr == "present" { 215.0 } else { 170.0 };
            let pwave = pwave_value(pw);
            let prs: Vec<f64> = if var == "present" {
                vec![base - 15.0, base + 15.0]
            } else if rng.gen::<f64>() < 0.5 {
                fx.single_ecg.push(id.clone());
                vec![base]
            } else {
                vec![base - 2.0, base + 2.0]
            };
            for (k, p) in prs.into_iter().enumerate() {
                fx.raw.ecg.push(EcgRecord {
                    patient_id: id.clone(),
                    date: plus_days(start, gap * k as u64),
                    pr_ms: p,
                    pwave_ms: pwave + if k == 0 { -0.5 } else { 0.5 },
                });
            }
        }

        if positive && rng.gen::<f64>() < 0.5 {
            // Records on or after the cutoff that would flip every feature.
            let after = plus_days(index, 15);
            let all_codes: Vec<String> = COMORBIDITIES
                .iter()
                .map(|c| mapping.comorbidities[*c][0].clone())
                .chain([mapping.smoking[0].clone(), mapping.alcohol_misuse[0].clone()])
                .collect();
            visits.last_mut().expect("index visit").icd_codes.extend(all_codes.iter().cloned());
            visits.push(VisitRecord { patient_id: id.clone(), visit_date: after, icd_codes: all_codes });
            fx.raw.measurements.push(measure(MeasurementKind::Bmi, index, 55.0));
            fx.raw.measurements.push(measure(MeasurementKind::HeightCm, after, height_value(sex, "band_1") - 20.0));
            fx.raw.ecg.push(EcgRecord { patient_id: id.clone(), date: index, pr_ms: 320.0, pwave_ms: 150.0 });
            fx.raw.ecg.push(EcgRecord { patient_id: id.clone(), date: after, pr_ms: 100.0, pwave_ms: 60.0 });
            fx.poisoned.push(id.clone());
        }

        fx.raw.visits.extend(visits);
        fx.cohort.rows.push(row.clone());
    }

    // Patients the visit-history rules must reject.
    for k in 0..(spec.n_patients / 20).max(2) {
        let id = format!("X{:06}", k + 1);
        let start = plus_days(epoch, rng.gen_range(0..2000));
        let dates: Vec<NaiveDate> = if k % 2 == 0 {
            // diagnosed at the first visit
            (0..4).map(|j| plus_days(start, 30 * j)).collect()
        } else {
            // too few distinct visit dates
            vec![start, start, plus_days(start, 30)]
        };
        for (j, d) in dates.iter().enumerate() {
            let codes = if k % 2 == 0 && j == 0 { vec![mapping.target_codes[0].clone()] } else { Vec::new() };
            fx.raw.visits.push(VisitRecord { patient_id: id.clone(), visit_date: *d, icd_codes: codes });
        }
        fx.raw.patients.push(PatientRecord {
            patient_id: id.clone(),
            birth_date: birth_date(start, 70),
            race: "WHITE".into(),
            sex: "F".into(),
        });
        fx.distractors.push(id);
    }
    Ok(fx)
}
