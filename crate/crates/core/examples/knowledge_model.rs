// Load the bundled AF knowledge model, list its factors and follow one
// risk relationship to its publications.
//
// `cargo run --example knowledge_model`

use afrisk::knowledge::{normalized_risks, KnowledgeModel};

pub fn run_example() -> afrisk::Result<()> {
    let model = KnowledgeModel::atrial_fibrillation();
    println!("target `{}`, {} factors, {} publications", model.target.name, model.factors().count(), model.publications.len());
    print!("{}", model.summary_csv());

    let age = model.factor("age_group").expect("age_group is bundled");
    println!("age_group scaling {:?} -> risks {:?}", age.scaling_factors(), normalized_risks(age));
    for item in model.evidence_for("hypertension", "present")? {
        println!("hypertension=present: {} [{} {}]", item.summary, item.publication.identifier, item.publication.year);
    }

    // a document whose category weights do not sum to one is rejected
    let mut broken = model.clone();
    broken.categories[0].weight += 0.5;
    let problems = broken.violations();
    println!("edited document: {}", problems.join("; "));
    assert!(!problems.is_empty());

    let round = KnowledgeModel::from_json(&model.to_json()?)?;
    assert_eq!(round, model);
    Ok(())
}

#[allow(dead_code)]
fn main() -> afrisk::Result<()> {
    run_example()
}
