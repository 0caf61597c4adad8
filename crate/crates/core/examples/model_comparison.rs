// Build knowledge-driven, data-driven and hybrid networks on one seeded
// 80:20 split and compare them on the held-out rows.
//
// `cargo run --release --example model_comparison`

use afrisk::builder::{build, BuildConfig, BuildMode};
use afrisk::eval::{evaluate, metrics_table, split, MetricsReport, SplitSpec};
use afrisk::knowledge::KnowledgeModel;
use afrisk::synth::{generate_cohort, GeneratorSpec};

pub fn run_example() -> afrisk::Result<()> {
    let model = KnowledgeModel::atrial_fibrillation();
    let cohort = generate_cohort(&GeneratorSpec::default_af())?;
    let (train, test) = split(&cohort, &SplitSpec::new(42))?;
    println!("train {} rows, test {} rows", train.len(), test.len());

    let mut rows: Vec<(String, MetricsReport)> = Vec::new();
    for mode in BuildMode::ALL {
        let built = build(&model, &train, &BuildConfig::new(mode))?;
        println!("{mode}: {} nodes, {} edges", built.net.variables.len(), built.net.edges.len());
        rows.push((mode.to_string(), evaluate(&built, &test)?));
    }
    let view: Vec<(&str, &MetricsReport)> = rows.iter().map(|(n, m)| (n.as_str(), m)).collect();
    print!("{}", metrics_table(&view));
    Ok(())
}

#[allow(dead_code)]
fn main() -> afrisk::Result<()> {
    run_example()
}
