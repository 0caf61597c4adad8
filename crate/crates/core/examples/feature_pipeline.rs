// Patient selection and feature extraction from raw visit, measurement and
// ECG tables, checked against the generator's planted features.
//
// `cargo run --example feature_pipeline`

use std::collections::HashSet;

use afrisk::features::{build_cohort, select_cohort, FeatureMapping};
use afrisk::knowledge::KnowledgeModel;
use afrisk::synth::{generate_raw, GeneratorSpec};

pub fn run_example() -> afrisk::Result<()> {
    let model = KnowledgeModel::atrial_fibrillation();
    let mapping = FeatureMapping::default_af();
    let fixture = generate_raw(&GeneratorSpec::default_af().with_size(400), &mapping)?;

    let selection = select_cohort(&fixture.raw.visits, &mapping, 1)?;
    println!("{} eligible positives, {} sampled negatives", selection.positives.len(), selection.negatives.len());

    let cohort = build_cohort(&fixture.raw, &model, &mapping, 1)?;
    let ids: HashSet<&str> = cohort.rows.iter().map(|r| r.patient_id.as_str()).collect();
    let mut expected = fixture.cohort.subset(&ids);
    expected.sort_by_id();
    println!("{} rows built; identical to planted features: {}", cohort.len(), cohort == expected);
    assert_eq!(cohort, expected);
    assert_eq!(cohort.count_label(0), cohort.count_label(1));
    Ok(())
}

#[allow(dead_code)]
fn main() -> afrisk::Result<()> {
    run_example()
}
