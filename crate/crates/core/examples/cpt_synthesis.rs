// Deterministic CPT for a synthesis node: weighted risk, then low/medium/high bands.
//
// `cargo run --example cpt_synthesis`

use afrisk::builder::{combinations, synthesize_cpt, SynthesisSpec, SYNTHESIS_STATES};
use afrisk::knowledge::SynthesisThresholds;

pub fn run_example() -> afrisk::Result<()> {
    let spec = SynthesisSpec {
        node: "lifestyle".into(),
        parents: vec!["smoking_status".into(), "alcohol_misuse".into()],
        weights: vec![0.8, 0.2],
        risks: vec![vec![0.431, 0.569], vec![0.333, 0.667]],
        thresholds: SynthesisThresholds::new(0.45, 0.55)?,
    };
    assert!(spec.violations().is_empty());
    let cpt = synthesize_cpt(&spec);
    let smoking = ["nonsmoker", "smoker"];
    let alcohol = ["absent", "present"];
    for (states, row) in combinations(&[2, 2]).zip(&cpt.rows) {
        let band = row.iter().position(|p| *p == 1.0).expect("one-hot row");
        println!(
            "{:>9} {:>7}  R = {:.4}  -> {}",
            smoking[states[0]],
            alcohol[states[1]],
            spec.total_risk(&states),
            SYNTHESIS_STATES[band]
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> afrisk::Result<()> {
    run_example()
}
