// Seeded synthetic cohorts with planted effects, plus the raw EHR tables
// that reproduce them through the feature pipeline.
//
// `cargo run --example synthetic_cohort`

use afrisk::features::FeatureMapping;
use afrisk::synth::{generate_cohort, generate_raw, GeneratorSpec};

pub fn run_example() -> afrisk::Result<()> {
    let spec = GeneratorSpec::default_af().with_size(500).with_seed(7);
    let cohort = generate_cohort(&spec)?;
    println!("{} rows, {} positive", cohort.len(), cohort.count_label(1));
    let first = &cohort.rows[0];
    for (factor, value) in cohort.factors.iter().zip(&first.values).take(5) {
        println!("  {} {factor} = {}", first.patient_id, value.as_deref().unwrap_or("(missing)"));
    }
    assert_eq!(cohort, generate_cohort(&spec)?);

    let fixture = generate_raw(&spec, &FeatureMapping::default_af())?;
    println!(
        "raw: {} patients, {} visits, {} measurements, {} ECGs",
        fixture.raw.patients.len(),
        fixture.raw.visits.len(),
        fixture.raw.measurements.len(),
        fixture.raw.ecg.len()
    );
    println!(
        "planted: {} height conflicts, {} single-ECG patients, {} poisoned positives, {} distractors",
        fixture.height_conflicts.len(),
        fixture.single_ecg.len(),
        fixture.poisoned.len(),
        fixture.distractors.len()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> afrisk::Result<()> {
    run_example()
}
