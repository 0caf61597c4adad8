macro_rules! example {
    ($module:ident, $file:literal) => {
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }
    };
}

example!(inference, "inference.rs");
example!(knowledge_model, "knowledge_model.rs");
example!(cpt_synthesis, "cpt_synthesis.rs");
example!(association_stats, "association_stats.rs");
example!(synthetic_cohort, "synthetic_cohort.rs");
example!(feature_pipeline, "feature_pipeline.rs");
example!(structure_learning, "structure_learning.rs");
example!(model_comparison, "model_comparison.rs");
example!(risk_report, "risk_report.rs");
example!(http_api, "http_api.rs");
example!(command_line, "command_line.rs");

#[test]
fn inference_example_runs() {
    inference::run_example().expect("inference example");
}

#[test]
fn knowledge_model_example_runs() {
    knowledge_model::run_example().expect("knowledge model example");
}

#[test]
fn cpt_synthesis_example_runs() {
    cpt_synthesis::run_example().expect("cpt synthesis example");
}

#[test]
fn association_stats_example_runs() {
    association_stats::run_example().expect("association stats example");
}

#[test]
fn synthetic_cohort_example_runs() {
    synthetic_cohort::run_example().expect("synthetic cohort example");
}

#[test]
fn feature_pipeline_example_runs() {
    feature_pipeline::run_example().expect("feature pipeline example");
}

#[test]
fn structure_learning_example_runs() {
    structure_learning::run_example().expect("structure learning example");
}

#[test]
fn model_comparison_example_runs() {
    model_comparison::run_example().expect("model comparison example");
}

#[test]
fn risk_report_example_runs() {
    risk_report::run_example().expect("risk report example");
}

#[test]
fn http_api_example_runs() {
    http_api::run_example().expect("http api example");
}

#[test]
fn command_line_example_runs() {
    command_line::run_example().expect("command line example");
}
