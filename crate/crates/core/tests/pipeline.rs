use std::collections::{BTreeSet, HashSet};

use afrisk::cohort::CohortTable;
use afrisk::features::{build_cohort, select_cohort, EcgRecord, FeatureMapping, MeasurementKind, MeasurementRecord, RawTables, VisitRecord};
use afrisk::knowledge::KnowledgeModel;
use afrisk::synth::{generate_raw, GeneratorSpec, RawFixture};
use chrono::{Days, NaiveDate};

const SEED: u64 = 7;

fn fixture(seed: u64, n: usize) -> RawFixture {
    generate_raw(&GeneratorSpec::default_af().with_seed(seed).with_size(n), &FeatureMapping::default_af()).unwrap()
}

fn run(raw: &RawTables) -> CohortTable {
    build_cohort(raw, &KnowledgeModel::atrial_fibrillation(), &FeatureMapping::default_af(), SEED).unwrap()
}

fn selected(cohort: &CohortTable) -> BTreeSet<String> {
    cohort.rows.iter().map(|r| r.patient_id.clone()).collect()
}

#[test]
fn rebuilt_cohort_equals_planted_rows() {
    for (seed, n) in [(1, 300), (2, 600), (3, 1000)] {
        let fx = fixture(seed, n);
        let cohort = run(&fx.raw);
        let ids: HashSet<&str> = cohort.rows.iter().map(|r| r.patient_id.as_str()).collect();
        let mut expected = fx.cohort.subset(&ids);
        expected.sort_by_id();
        assert_eq!(cohort, expected, "seed {seed}");
        assert_eq!(cohort.count_label(0), cohort.count_label(1), "seed {seed}");
        assert!(cohort.len() > n / 4);
        for d in &fx.distractors {
            assert!(!ids.contains(d.as_str()), "distractor {d} selected");
        }
    }
}

fn cutoffs(raw: &RawTables) -> std::collections::BTreeMap<String, NaiveDate> {
    select_cohort(&raw.visits, &FeatureMapping::default_af(), SEED).unwrap().positives
}

#[test]
fn post_cutoff_records_change_nothing() {
    let fx = fixture(4, 800);
    let mapping = FeatureMapping::default_af();
    let cut = cutoffs(&fx.raw);
    let poisoned: HashSet<&str> = fx.poisoned.iter().map(String::as_str).collect();
    assert!(poisoned.iter().any(|p| cut.contains_key(*p)), "no poisoned patient was selected");
    let on_or_after = |id: &str, d: NaiveDate| cut.get(id).is_some_and(|c| d >= *c);

    // Clean twin: everything dated at or after a positive's cutoff is dropped,
    // except the target code that defines the cutoff.
    let mut clean = fx.raw.clone();
    clean.measurements.retain(|m| !on_or_after(&m.patient_id, m.date));
    clean.ecg.retain(|e| !on_or_after(&e.patient_id, e.date));
    clean.visits = clean
        .visits
        .into_iter()
        .filter_map(|mut v| match cut.get(&v.patient_id) {
            Some(c) if v.visit_date > *c => None,
            Some(c) if v.visit_date == *c => {
                v.icd_codes.retain(|code| mapping.is_target(code));
                Some(v)
            }
            _ => Some(v),
        })
        .collect();
    assert_ne!(clean, fx.raw);
    assert_eq!(run(&clean), run(&fx.raw));

    // Heavier poison on every positive.
    let every_code: Vec<String> = mapping
        .comorbidities
        .values()
        .flatten()
        .chain(&mapping.smoking)
        .chain(&mapping.alcohol_misuse)
        .cloned()
        .collect();
    let mut dirty = fx.raw.clone();
    for (id, c) in &cut {
        let after = c.checked_add_days(Days::new(3)).unwrap();
        dirty.visits.push(VisitRecord {
            patient_id: id.clone(),
            visit_date: after,
            icd_codes: every_code.clone(),
        });
        dirty.measurements.push(MeasurementRecord { patient_id: id.clone(), date: *c, kind: MeasurementKind::Bmi, value: 60.0 });
        dirty.measurements.push(MeasurementRecord { patient_id: id.clone(), date: after, kind: MeasurementKind::HeightCm, value: 120.0 });
        dirty.ecg.push(EcgRecord { patient_id: id.clone(), date: *c, pr_ms: 400.0, pwave_ms: 200.0 });
    }
    assert_eq!(run(&dirty), run(&fx.raw));
}

#[test]
fn height_conflict_rule_fires_only_on_planted_cases() {
    let fx = fixture(5, 1000);
    let cohort = run(&fx.raw);
    let cut = cutoffs(&fx.raw);
    let col = cohort.column("height_group").unwrap();
    let planted: BTreeSet<&str> = fx.height_conflicts.iter().map(String::as_str).collect();

    // Independent check: pre-cutoff heights spanning more than 2 cm.
    let mut fired = BTreeSet::new();
    for row in &cohort.rows {
        let hs: Vec<f64> = fx
            .raw
            .measurements
            .iter()
            .filter(|m| m.patient_id == row.patient_id && m.kind == MeasurementKind::HeightCm)
            .filter(|m| cut.get(&row.patient_id).is_none_or(|c| m.date < *c))
            .map(|m| m.value)
            .collect();
        let spread = hs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - hs.iter().cloned().fold(f64::INFINITY, f64::min);
        if !hs.is_empty() && spread > 2.0 {
            assert_eq!(row.values[col], None, "{}", row.patient_id);
            fired.insert(row.patient_id.as_str());
        } else if !hs.is_empty() {
            assert!(row.values[col].is_some(), "{}", row.patient_id);
        }
    }
    let ids = selected(&cohort);
    let expected: BTreeSet<&str> = planted.iter().copied().filter(|p| ids.contains(*p)).collect();
    assert!(!expected.is_empty());
    assert_eq!(fired, expected);
}

#[test]
fn single_ecg_rule_fires_only_on_planted_cases() {
    let fx = fixture(6, 1000);
    let cohort = run(&fx.raw);
    let cut = cutoffs(&fx.raw);
    let col = cohort.column("pr_variation").unwrap();
    let planted: BTreeSet<&str> = fx.single_ecg.iter().map(String::as_str).collect();

    let mut single = BTreeSet::new();
    for row in &cohort.rows {
        let n = fx
            .raw
            .ecg
            .iter()
            .filter(|e| e.patient_id == row.patient_id && cut.get(&row.patient_id).is_none_or(|c| e.date < *c))
            .count();
        if n == 1 {
            assert_eq!(row.values[col].as_deref(), Some("absent"), "{}", row.patient_id);
            single.insert(row.patient_id.as_str());
        }
    }
    let ids = selected(&cohort);
    let expected: BTreeSet<&str> = planted.iter().copied().filter(|p| ids.contains(*p)).collect();
    assert!(!expected.is_empty());
    assert_eq!(single, expected);
}

#[test]
fn raw_tables_round_trip_through_csv() {
    let fx = fixture(8, 200);
    let dir = tempfile::tempdir().unwrap();
    fx.raw.save_dir(dir.path()).unwrap();
    let back = RawTables::load_dir(dir.path()).unwrap();
    assert_eq!(run(&back), run(&fx.raw));
}
