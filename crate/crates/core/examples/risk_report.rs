// Risk report for one patient profile: posterior, classification and
// leave-one-out contributions with their citations.
//
// `cargo run --example risk_report`

use afrisk::bn::Evidence;
use afrisk::builder::shipped_model;
use afrisk::explain::report_for_evidence;
use afrisk::knowledge::KnowledgeModel;

pub fn run_example() -> afrisk::Result<()> {
    let built = shipped_model()?;
    let knowledge = KnowledgeModel::atrial_fibrillation();
    let evidence: Evidence = [
        ("sex", "female"),
        ("age_group", ">74"),
        ("hypertension", "present"),
        ("alcohol_misuse", "present"),
        ("bmi_class", "normal"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();

    let report = report_for_evidence(&built, &knowledge, Some("example"), &evidence)?;
    println!(
        "P(af present) = {:.4} -> {} (prior {:.4})",
        report.p_present,
        report.classification,
        built.p_present(&Evidence::new())?
    );
    for c in &report.contributions {
        let cited: Vec<&str> = c.citations.iter().map(|x| x.identifier.as_str()).collect();
        println!(
            "  {:+.4}  {}={}  {}",
            c.delta,
            c.factor,
            c.state,
            if cited.is_empty() { c.note.clone().unwrap_or_default() } else { cited.join(", ") }
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> afrisk::Result<()> {
    run_example()
}
