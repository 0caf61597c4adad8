//! EHR-style raw tables to the categorical cohort table: patient selection,
//! leakage-free feature extraction, and class balancing.
//!
//! Raw inputs are four CSV files (see [`RawTables`]); the ICD prefix mapping
//! and the configurable cutpoints live in a JSON [`FeatureMapping`].

mod extract;
mod select;

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use extract::{
    age_group, bmi_class, comorbidity_flags, demographic_features, ecg_features, height_group,
    map_race, map_sex, median, population_std, EcgFeatures,
};
pub use select::{build_cohort, select_cohort, CohortSelection};

/// Factors produced by the pipeline, with every state each can emit.
pub const PIPELINE_SCHEMA: &[(&str, &[&str])] = &[
    ("bmi_class", &["underweight", "normal", "overweight", "obese_1", "obese_2", "obese_3"]),
    ("height_group", &["band_1", "band_2", "band_3", "band_4", "band_5"]),
    ("cardiovascular_disease", &["absent", "present"]),
    ("diabetes_mellitus", &["absent", "present"]),
    ("hypertension", &["absent", "present"]),
    ("kidney_disease", &["absent", "present"]),
    ("copd", &["absent", "present"]),
    ("sleep_apnoea", &["absent", "present"]),
    ("age_group", &["<60", "60-64", "65-74", ">74"]),
    ("race", &["asian", "black", "hispanic", "white", "other"]),
    ("sex", &["female", "male"]),
    ("prolonged_pr", &["absent", "present"]),
    ("pr_variation", &["absent", "present"]),
    (
        "pwave_duration",
        &["very_short", "short", "normal", "intermediate_1", "intermediate_2", "long", "very_long"],
    ),
    ("smoking_status", &["nonsmoker", "smoker"]),
    ("alcohol_misuse", &["absent", "present"]),
];

pub const COMORBIDITIES: [&str; 6] = [
    "cardiovascular_disease",
    "diabetes_mellitus",
    "hypertension",
    "kidney_disease",
    "copd",
    "sleep_apnoea",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub patient_id: String,
    pub birth_date: NaiveDate,
    pub race: String,
    pub sex: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitRecord {
    pub patient_id: String,
    pub visit_date: NaiveDate,
    #[serde(with = "semicolon_list")]
    pub icd_codes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementKind {
    Bmi,
    HeightCm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub patient_id: String,
    pub date: NaiveDate,
    pub kind: MeasurementKind,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcgRecord {
    pub patient_id: String,
    pub date: NaiveDate,
    pub pr_ms: f64,
    pub pwave_ms: f64,
}

/// The four raw input tables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawTables {
    pub patients: Vec<PatientRecord>,
    pub visits: Vec<VisitRecord>,
    pub measurements: Vec<MeasurementRecord>,
    pub ecg: Vec<EcgRecord>,
}

pub const PATIENTS_CSV: &str = "patients.csv";
pub const VISITS_CSV: &str = "visits.csv";
pub const MEASUREMENTS_CSV: &str = "measurements.csv";
pub const ECG_CSV: &str = "ecg.csv";

impl RawTables {
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        Ok(Self {
            patients: read_csv(&std::fs::read_to_string(dir.join(PATIENTS_CSV))?)?,
            visits: read_csv(&std::fs::read_to_string(dir.join(VISITS_CSV))?)?,
            measurements: read_csv(&std::fs::read_to_string(dir.join(MEASUREMENTS_CSV))?)?,
            ecg: read_csv(&std::fs::read_to_string(dir.join(ECG_CSV))?)?,
        })
    }

    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        for (name, text) in self.to_csv_files()? {
            std::fs::write(dir.join(name), text)?;
        }
        Ok(())
    }

    /// `(file name, CSV text)` for each table.
    pub fn to_csv_files(&self) -> Result<Vec<(&'static str, String)>> {
        Ok(vec![
            (PATIENTS_CSV, write_csv(&self.patients)?),
            (VISITS_CSV, write_csv(&self.visits)?),
            (MEASUREMENTS_CSV, write_csv(&self.measurements)?),
            (ECG_CSV, write_csv(&self.ecg)?),
        ])
    }
}

pub fn read_csv<T: serde::de::DeserializeOwned>(text: &str) -> Result<Vec<T>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    r.deserialize().map(|rec| rec.map_err(Error::from)).collect()
}

pub fn write_csv<T: Serialize>(records: &[T]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(Vec::new());
    for rec in records {
        w.serialize(rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

mod semicolon_list {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(codes: &[String], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&codes.join(";"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<String>, D::Error> {
        let text = String::deserialize(d)?;
        Ok(text
            .split(';')
            .map(str::trim)
            .filter(|c| !c.is_empty())
            .map(String::from)
            .collect())
    }
}

/// ICD prefix table plus the configurable cutpoints used by the extractors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureMapping {
    pub target_codes: Vec<String>,
    pub comorbidities: BTreeMap<String, Vec<String>>,
    pub smoking: Vec<String>,
    pub alcohol_misuse: Vec<String>,
    /// BMI class boundaries; below the first is underweight and each later
    /// interval is closed on the left.
    #[serde(default = "default_bmi_cutoffs")]
    pub bmi_cutoffs: [f64; 5],
    #[serde(default = "default_height_bands")]
    pub height_bands: BTreeMap<String, [f64; 4]>,
}

fn default_bmi_cutoffs() -> [f64; 5] {
    [18.5, 25.0, 30.0, 35.0, 40.0]
}

fn default_height_bands() -> BTreeMap<String, [f64; 4]> {
    BTreeMap::from([
        ("female".to_string(), [155.0, 158.0, 160.0, 163.0]),
        ("male".to_string(), [168.0, 172.0, 175.0, 178.0]),
    ])
}

impl FeatureMapping {
    pub fn from_json(text: &str) -> Result<Self> {
        let m: FeatureMapping = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        m.check()?;
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// The shipped ICD-9/ICD-10 prefix table.
    pub fn default_af() -> Self {
        Self::from_json(include_str!("../../data/icd_mapping.json")).expect("shipped mapping is valid")
    }

    pub fn check(&self) -> Result<()> {
        let mut missing: Vec<String> = COMORBIDITIES
            .iter()
            .filter(|c| self.comorbidities.get(**c).is_none_or(|v| v.is_empty()))
            .map(|c| format!("comorbidities.{c}"))
            .collect();
        if self.target_codes.is_empty() {
            missing.push("target_codes".into());
        }
        if self.smoking.is_empty() {
            missing.push("smoking".into());
        }
        if self.alcohol_misuse.is_empty() {
            missing.push("alcohol_misuse".into());
        }
        for sex in ["female", "male"] {
            if !self.height_bands.contains_key(sex) {
                missing.push(format!("height_bands.{sex}"));
            }
        }
        if !missing.is_empty() {
            return Err(Error::Config(format!("mapping is missing {}", missing.join(", "))));
        }
        if !self.bmi_cutoffs.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("bmi_cutoffs must be strictly increasing".into()));
        }
        for (sex, bands) in &self.height_bands {
            if !bands.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::Config(format!("height_bands.{sex} must be strictly increasing")));
            }
        }
        Ok(())
    }

    pub fn is_target(&self, code: &str) -> bool {
        matches_any(code, &self.target_codes)
    }
}

/// Codes compare case-insensitively with dots removed.
pub fn normalize_code(code: &str) -> String {
    code.chars()
        .filter(|c| *c != '.')
        .map(|c| c.to_ascii_uppercase())
        .collect()
}

pub(crate) fn matches_any(code: &str, prefixes: &[String]) -> bool {
    let code = normalize_code(code);
    prefixes.iter().any(|p| code.starts_with(&normalize_code(p)))
}
