// Chi-square and Cramér's V, first on a hand table, then for every factor
// of a synthetic cohort.
//
// `cargo run --example association_stats`

use afrisk::knowledge::KnowledgeModel;
use afrisk::stats::{association_report, chi_square, cramers_v, ContingencyTable};
use afrisk::synth::{generate_cohort, GeneratorSpec};

pub fn run_example() -> afrisk::Result<()> {
    let table = ContingencyTable::new(vec![vec![30, 10], vec![10, 30]]);
    let x = chi_square(&table)?;
    let v = cramers_v(&table)?;
    println!("chi2 = {} (dof {}, p = {:.2e}), V = {} ({})", x.chi2, x.dof, x.p_value, v.cramers_v, v.strength.as_str());

    let model = KnowledgeModel::atrial_fibrillation();
    let cohort = generate_cohort(&GeneratorSpec::default_af())?;
    for entry in association_report(&cohort, &model)? {
        match entry.result {
            Some(r) => println!(
                "{:<24} V = {:.3}  p = {:.2e}  {}{}",
                entry.factor,
                r.cramers_v,
                r.p_value,
                r.strength.as_str(),
                if entry.significant { "" } else { "  (n.s.)" }
            ),
            None => println!("{:<24} {}", entry.factor, entry.warning.unwrap_or_default()),
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> afrisk::Result<()> {
    run_example()
}
