//! Per-patient feature extractors. Every extractor takes the patient's raw
//! records plus the cutoff date and ignores anything dated on or after it.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};

use super::{matches_any, EcgRecord, FeatureMapping, MeasurementKind, MeasurementRecord, VisitRecord, COMORBIDITIES};
use crate::error::{Error, Result};

const BMI_CLASSES: [&str; 6] = ["underweight", "normal", "overweight", "obese_1", "obese_2", "obese_3"];
const HEIGHT_BANDS: [&str; 5] = ["band_1", "band_2", "band_3", "band_4", "band_5"];
/// Population standard deviation at or below which BMI readings count as stable.
const BMI_STABLE_STD: f64 = 1.0;
/// Height readings spanning more than this are discarded.
const HEIGHT_MAX_SPREAD_CM: f64 = 2.0;
const PROLONGED_PR_MS: f64 = 200.0;
const PR_VARIATION_STD_MS: f64 = 12.0;

fn before(date: NaiveDate, cutoff: Option<NaiveDate>) -> bool {
    cutoff.is_none_or(|c| date < c)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Standard deviation with divisor n.
pub fn population_std(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64).sqrt()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Chronologically ordered values of one measurement kind before the cutoff.
fn series(measurements: &[MeasurementRecord], kind: MeasurementKind, cutoff: Option<NaiveDate>) -> Vec<f64> {
    let mut picked: Vec<&MeasurementRecord> = measurements
        .iter()
        .filter(|m| m.kind == kind && before(m.date, cutoff))
        .collect();
    picked.sort_by_key(|m| m.date);
    picked.into_iter().map(|m| m.value).collect()
}

/// Aggregate BMI: plain mean when stable, otherwise a mean weighted by
/// chronological rank (1..n), so later readings count more.
pub fn aggregate_bmi(chronological: &[f64]) -> Option<f64> {
    if chronological.is_empty() {
        return None;
    }
    if population_std(chronological) <= BMI_STABLE_STD {
        return Some(mean(chronological));
    }
    let (num, den) = chronological
        .iter()
        .enumerate()
        .fold((0.0, 0.0), |(n, d), (i, v)| (n + (i + 1) as f64 * v, d + (i + 1) as f64));
    Some(num / den)
}

pub fn classify_bmi(bmi: f64, cutoffs: &[f64; 5]) -> &'static str {
    let idx = cutoffs.iter().take_while(|&&c| bmi >= c).count();
    BMI_CLASSES[idx]
}

pub fn bmi_class(
    measurements: &[MeasurementRecord],
    cutoff: Option<NaiveDate>,
    mapping: &FeatureMapping,
) -> Option<&'static str> {
    let values = series(measurements, MeasurementKind::Bmi, cutoff);
    aggregate_bmi(&values).map(|b| classify_bmi(b, &mapping.bmi_cutoffs))
}

/// Sex-specific height band from the median reading; `None` when there are no
/// readings or they spread by more than 2 cm.
pub fn height_group(
    measurements: &[MeasurementRecord],
    sex: &str,
    cutoff: Option<NaiveDate>,
    mapping: &FeatureMapping,
) -> Result<Option<&'static str>> {
    let bands = mapping
        .height_bands
        .get(sex)
        .ok_or_else(|| Error::Classification(format!("no height bands for sex `{sex}`")))?;
    let values = series(measurements, MeasurementKind::HeightCm, cutoff);
    if values.is_empty() {
        return Ok(None);
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi - lo > HEIGHT_MAX_SPREAD_CM {
        return Ok(None);
    }
    let h = median(&values);
    let idx = bands.iter().take_while(|&&upper| h > upper).count();
    Ok(Some(HEIGHT_BANDS[idx]))
}

pub fn age_group(age_years: u32) -> Result<&'static str> {
    Ok(match age_years {
        0..=17 => {
            return Err(Error::Classification(format!("age {age_years} is below 18")));
        }
        18..=59 => "<60",
        60..=64 => "60-64",
        65..=74 => "65-74",
        _ => ">74",
    })
}

/// Maps free-text race records onto five categories; anything unrecognised
/// (unknown, declined, multiple) becomes `other`.
pub fn map_race(raw: &str) -> &'static str {
    let r = raw.trim().to_ascii_uppercase();
    if r.contains("HISPANIC") || r.contains("LATINO") || r.starts_with("SOUTH AMERICAN") {
        "hispanic"
    } else if r.starts_with("WHITE") {
        "white"
    } else if r.starts_with("BLACK") {
        "black"
    } else if r.starts_with("ASIAN") {
        "asian"
    } else {
        "other"
    }
}

pub fn map_sex(raw: &str) -> Result<&'static str> {
    match raw.trim().to_ascii_uppercase().as_str() {
        "F" | "FEMALE" => Ok("female"),
        "M" | "MALE" => Ok("male"),
        other => Err(Error::Classification(format!("unmappable sex `{other}`"))),
    }
}

pub fn demographic_features(age_years: u32, race_raw: &str, sex_raw: &str) -> Result<(&'static str, &'static str, &'static str)> {
    Ok((age_group(age_years)?, map_race(race_raw), map_sex(sex_raw)?))
}

/// Completed years between `birth` and `on`.
pub fn age_on(birth: NaiveDate, on: NaiveDate) -> u32 {
    let mut years = on.year() - birth.year();
    if (on.month(), on.day()) < (birth.month(), birth.day()) {
        years -= 1;
    }
    years.max(0) as u32
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EcgFeatures {
    pub prolonged_pr: &'static str,
    pub pr_variation: &'static str,
    pub pwave_duration: &'static str,
}

pub fn classify_pwave(ms: f64) -> &'static str {
    match ms {
        x if x < 90.0 => "very_short",
        x if x < 100.0 => "short",
        x if x < 106.0 => "normal",
        x if x < 112.0 => "intermediate_1",
        x if x < 120.0 => "intermediate_2",
        x if x < 130.0 => "long",
        _ => "very_long",
    }
}

/// ECG features from readings before the cutoff; `None` without any reading.
/// PR variation needs at least two readings and is `absent` otherwise.
pub fn ecg_features(records: &[EcgRecord], cutoff: Option<NaiveDate>) -> Option<EcgFeatures> {
    let kept: Vec<&EcgRecord> = records.iter().filter(|r| before(r.date, cutoff)).collect();
    if kept.is_empty() {
        return None;
    }
    let pr: Vec<f64> = kept.iter().map(|r| r.pr_ms).collect();
    let pwave: Vec<f64> = kept.iter().map(|r| r.pwave_ms).collect();
    let flag = |b: bool| if b { "present" } else { "absent" };
    Some(EcgFeatures {
        prolonged_pr: flag(median(&pr) > PROLONGED_PR_MS),
        pr_variation: flag(pr.len() >= 2 && population_std(&pr) > PR_VARIATION_STD_MS),
        pwave_duration: classify_pwave(median(&pwave)),
    })
}

/// The six comorbidity flags plus smoking status and alcohol misuse, from
/// diagnosis codes on visits before the cutoff.
pub fn comorbidity_flags(
    visits: &[VisitRecord],
    cutoff: Option<NaiveDate>,
    mapping: &FeatureMapping,
) -> Result<BTreeMap<&'static str, &'static str>> {
    mapping.check()?;
    let codes: Vec<&str> = visits
        .iter()
        .filter(|v| before(v.visit_date, cutoff))
        .flat_map(|v| v.icd_codes.iter().map(String::as_str))
        .collect();
    let any = |prefixes: &[String]| codes.iter().any(|c| matches_any(c, prefixes));
    let mut out = BTreeMap::new();
    for name in COMORBIDITIES {
        let present = any(&mapping.comorbidities[name]);
        out.insert(name, if present { "present" } else { "absent" });
    }
    out.insert("smoking_status", if any(&mapping.smoking) { "smoker" } else { "nonsmoker" });
    out.insert("alcohol_misuse", if any(&mapping.alcohol_misuse) { "present" } else { "absent" });
    Ok(out)
}
