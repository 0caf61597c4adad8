// Hill-climbing structure search scored by BIC over cohort columns plus the label.
//
// `cargo run --example structure_learning`

use afrisk::builder::{encode, hill_climb, HillClimbConfig};
use afrisk::knowledge::KnowledgeModel;
use afrisk::synth::{generate_cohort, GeneratorSpec};

pub fn run_example() -> afrisk::Result<()> {
    let model = KnowledgeModel::atrial_fibrillation();
    let cohort = generate_cohort(&GeneratorSpec::default_af())?;
    let (variables, rows) = encode(&model, &cohort)?;
    let complete: Vec<Vec<usize>> = rows.iter().filter_map(|r| r.iter().copied().collect()).collect();
    let cards: Vec<usize> = variables.iter().map(|v| v.cardinality()).collect();
    let names: Vec<String> = variables.iter().map(|v| v.name.clone()).collect();

    let result = hill_climb(&complete, &cards, &names, 1.0, 42, &HillClimbConfig::default())?;
    println!("{} complete rows; BIC {:.1} -> {:.1} in {} steps", complete.len(), result.initial_score, result.score, result.trace.len() - 1);
    for (p, c) in result.edges() {
        println!("  {} -> {}", names[p], names[c]);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> afrisk::Result<()> {
    run_example()
}
