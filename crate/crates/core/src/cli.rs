//! `afrisk` command line: synth, cohort, stats, build, eval, predict, explain, serve.
//!
//! Exit codes: 0 success, 1 validation or runtime error, 2 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bn::Evidence;
use crate::builder::{build, shipped_model, BuildConfig, BuildMode, BuiltModel};
use crate::cohort::CohortTable;
use crate::error::{Error, Result};
use crate::eval::{audit_disjoint, evaluate, metrics_table, prediction, split, MetricsReport, SplitSpec};
use crate::explain::{report, report_for_evidence};
use crate::features::{build_cohort, FeatureMapping, RawTables};
use crate::knowledge::{KnowledgeModel, SynthesisThresholds};
use crate::service::{serve, ServeConfig};
use crate::stats::{association_report, report_csv};
use crate::synth::{generate_cohort, generate_raw, GeneratorSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const COHORT_CSV: &str = "cohort.csv";
pub const RAW_DIR: &str = "raw";

#[derive(Debug, Parser)]
#[command(name = "afrisk", version, about = "Risk-factor Bayesian networks from a knowledge model and EHR tables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic cohort and matching raw EHR tables.
    Synth(SynthArgs),
    /// Run patient selection and feature extraction over raw tables.
    Cohort(CohortArgs),
    /// Chi-square and Cramér's V of every factor against the label.
    Stats(StatsArgs),
    /// Build a network on the training part of a seeded split.
    Build(BuildArgs),
    /// Evaluate built models on the held-out part of their recorded split.
    Eval(EvalArgs),
    /// Posterior for one evidence set.
    Predict(PredictArgs),
    /// Risk report with leave-one-out contributions and citations.
    Explain(ExplainArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct KnowledgeArg {
    /// Knowledge-model JSON; defaults to the bundled AF model.
    #[arg(long)]
    knowledge: Option<PathBuf>,
}

impl KnowledgeArg {
    fn load(&self) -> Result<KnowledgeModel> {
        match &self.knowledge {
            Some(p) => KnowledgeModel::load(p),
            None => Ok(KnowledgeModel::atrial_fibrillation()),
        }
    }
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Generator spec JSON; defaults to the bundled AF spec.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n: Option<usize>,
    /// Output directory for cohort.csv and raw/.
    #[arg(long)]
    out: PathBuf,
    /// Skip the raw tables.
    #[arg(long)]
    no_raw: bool,
    #[arg(long)]
    mapping: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CohortArgs {
    /// Directory holding patients.csv, visits.csv, measurements.csv, ecg.csv.
    #[arg(long)]
    raw: PathBuf,
    #[arg(long)]
    mapping: Option<PathBuf>,
    #[command(flatten)]
    knowledge: KnowledgeArg,
    /// Seed for undersampling the majority class.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StatsFormat {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long)]
    cohort: PathBuf,
    #[command(flatten)]
    knowledge: KnowledgeArg,
    #[arg(long, value_enum, default_value_t = StatsFormat::Json)]
    format: StatsFormat,
}

#[derive(Debug, Args)]
struct BuildArgs {
    #[arg(long)]
    cohort: PathBuf,
    #[arg(long, value_parser = parse_mode)]
    mode: BuildMode,
    #[command(flatten)]
    knowledge: KnowledgeArg,
    /// Seeds the split and the structure search.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Global synthesis thresholds as `t1,t2`.
    #[arg(long, value_parser = parse_thresholds)]
    thresholds: Option<SynthesisThresholds>,
    /// Model JSON; provenance is written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EvalFormat {
    Table,
    Json,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// One or more models built from `--cohort`.
    #[arg(long = "model", required = true)]
    models: Vec<PathBuf>,
    #[arg(long)]
    cohort: PathBuf,
    #[arg(long, value_enum, default_value_t = EvalFormat::Table)]
    format: EvalFormat,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Built model; defaults to the shipped model.
    #[arg(long)]
    model: Option<PathBuf>,
    /// `factor=state` pairs separated by commas.
    #[arg(long, value_parser = parse_evidence, default_value = "")]
    evidence: Evidence,
}

#[derive(Debug, Args)]
struct ExplainArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[command(flatten)]
    knowledge: KnowledgeArg,
    #[arg(long, value_parser = parse_evidence, conflicts_with = "patient")]
    evidence: Option<Evidence>,
    /// Explain one row of `--cohort`.
    #[arg(long, requires = "cohort")]
    patient: Option<String>,
    #[arg(long)]
    cohort: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    port: Option<u16>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    knowledge: Option<PathBuf>,
    #[arg(long)]
    static_dir: Option<PathBuf>,
}

fn parse_mode(s: &str) -> std::result::Result<BuildMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_thresholds(s: &str) -> std::result::Result<SynthesisThresholds, String> {
    let (a, b) = s.split_once(',').ok_or("expected `t1,t2`")?;
    let parse = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}"));
    SynthesisThresholds::new(parse(a)?, parse(b)?).map_err(|e| e.to_string())
}

/// Parses `a=x,b=y`; empty input is empty evidence.
pub fn parse_evidence(s: &str) -> std::result::Result<Evidence, String> {
    let mut evidence = Evidence::new();
    for item in s.split(',').map(str::trim).filter(|i| !i.is_empty()) {
        let (k, v) = item.split_once('=').ok_or_else(|| format!("`{item}` is not factor=state"))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(format!("`{item}` is not factor=state"));
        }
        if evidence.insert(k.to_string(), v.to_string()).is_some() {
            return Err(format!("factor `{k}` given twice"));
        }
    }
    Ok(evidence)
}

fn load_mapping(path: &Option<PathBuf>) -> Result<FeatureMapping> {
    match path {
        Some(p) => FeatureMapping::load(p),
        None => Ok(FeatureMapping::default_af()),
    }
}

fn load_model(path: &Option<PathBuf>) -> Result<BuiltModel> {
    match path {
        Some(p) => BuiltModel::load(p),
        None => shipped_model(),
    }
}

fn json_line(out: &mut dyn Write, value: &impl serde::Serialize) -> Result<()> {
    writeln!(out, "{}", serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn synth(args: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    let mut spec = match &args.spec {
        Some(p) => GeneratorSpec::load(p)?,
        None => GeneratorSpec::default_af(),
    };
    if let Some(seed) = args.seed {
        spec = spec.with_seed(seed);
    }
    if let Some(n) = args.n {
        spec = spec.with_size(n);
    }
    spec.check()?;
    std::fs::create_dir_all(&args.out)?;
    let cohort = generate_cohort(&spec)?;
    cohort.save(args.out.join(COHORT_CSV))?;
    writeln!(out, "wrote {} rows to {}", cohort.len(), args.out.join(COHORT_CSV).display())?;
    if !args.no_raw {
        let fixture = generate_raw(&spec, &load_mapping(&args.mapping)?)?;
        fixture.raw.save_dir(args.out.join(RAW_DIR))?;
        writeln!(out, "wrote raw tables for {} patients to {}", fixture.raw.patients.len(), args.out.join(RAW_DIR).display())?;
    }
    Ok(())
}

fn cohort(args: &CohortArgs, out: &mut dyn Write) -> Result<()> {
    let raw = RawTables::load_dir(&args.raw)?;
    let table = build_cohort(&raw, &args.knowledge.load()?, &load_mapping(&args.mapping)?, args.seed)?;
    table.save(&args.out)?;
    writeln!(
        out,
        "wrote {} rows ({} positive) to {}",
        table.len(),
        table.count_label(1),
        args.out.display()
    )?;
    Ok(())
}

fn stats(args: &StatsArgs, out: &mut dyn Write) -> Result<()> {
    let model = args.knowledge.load()?;
    let cohort = CohortTable::load(&args.cohort)?;
    cohort.validate_against(&model)?;
    let entries = association_report(&cohort, &model)?;
    match args.format {
        StatsFormat::Json => json_line(out, &entries),
        StatsFormat::Csv => Ok(write!(out, "{}", report_csv(&entries))?),
    }
}

fn build_cmd(args: &BuildArgs, out: &mut dyn Write) -> Result<()> {
    let model = args.knowledge.load()?;
    let cohort = CohortTable::load(&args.cohort)?;
    cohort.validate_against(&model)?;
    let (train, _) = split(&cohort, &SplitSpec::new(args.seed))?;
    let mut config = BuildConfig::new(args.mode).with_seed(args.seed);
    config.laplace_alpha = args.alpha;
    config.thresholds = args.thresholds;
    let built = build(&model, &train, &config)?;
    built.save(&args.out)?;
    writeln!(out, "built {} model on {} rows: {}", args.mode, train.len(), args.out.display())?;
    for w in &built.provenance.warnings {
        writeln!(out, "warning: {w}")?;
    }
    Ok(())
}

/// Held-out part of the split recorded in `built`, audited for leakage.
pub fn held_out(built: &BuiltModel, cohort: &CohortTable) -> Result<CohortTable> {
    let (_, test) = split(cohort, &SplitSpec::new(built.provenance.seed))?;
    audit_disjoint(built, &test)?;
    Ok(test)
}

fn eval(args: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let cohort = CohortTable::load(&args.cohort)?;
    let mut rows: Vec<(String, MetricsReport)> = Vec::new();
    for path in &args.models {
        let built = BuiltModel::load(path)?;
        let test = held_out(&built, &cohort)?;
        rows.push((built.provenance.mode.to_string(), evaluate(&built, &test)?));
    }
    match args.format {
        EvalFormat::Table => {
            let view: Vec<(&str, &MetricsReport)> = rows.iter().map(|(n, m)| (n.as_str(), m)).collect();
            Ok(write!(out, "{}", metrics_table(&view))?)
        }
        EvalFormat::Json => {
            let map: Vec<serde_json::Value> = rows
                .iter()
                .map(|(n, m)| serde_json::json!({ "model": n, "metrics": m }))
                .collect();
            json_line(out, &map)
        }
    }
}

fn predict(args: &PredictArgs, out: &mut dyn Write) -> Result<()> {
    let built = load_model(&args.model)?;
    json_line(out, &prediction(&built, &args.evidence)?)
}

fn explain(args: &ExplainArgs, out: &mut dyn Write) -> Result<()> {
    let built = load_model(&args.model)?;
    let knowledge = args.knowledge.load()?;
    let r = match (&args.patient, &args.cohort) {
        (Some(id), Some(path)) => {
            let cohort = CohortTable::load(path)?;
            let row = cohort
                .rows
                .iter()
                .find(|r| &r.patient_id == id)
                .ok_or_else(|| Error::Lookup(format!("patient `{id}` is not in {}", path.display())))?;
            report(&built, &knowledge, &cohort, row)?
        }
        _ => report_for_evidence(&built, &knowledge, None, &args.evidence.clone().unwrap_or_default())?,
    };
    json_line(out, &r)
}

fn serve_cmd(args: &ServeArgs) -> Result<()> {
    let mut config = ServeConfig::from_env()?;
    if let Some(p) = args.port {
        config.port = p;
    }
    let pick = |flag: &Option<PathBuf>, env: Option<PathBuf>| flag.clone().or(env);
    config.model_path = pick(&args.model, config.model_path);
    config.knowledge_path = pick(&args.knowledge, config.knowledge_path);
    config.static_dir = pick(&args.static_dir, config.static_dir);
    let _ = tracing_subscriber::fmt().with_writer(std::io::stderr).try_init();
    tokio::runtime::Runtime::new()?.block_on(serve(config))
}

fn dispatch(command: &Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Synth(a) => synth(a, out),
        Command::Cohort(a) => cohort(a, out),
        Command::Stats(a) => stats(a, out),
        Command::Build(a) => build_cmd(a, out),
        Command::Eval(a) => eval(a, out),
        Command::Predict(a) => predict(a, out),
        Command::Explain(a) => explain(a, out),
        Command::Serve(a) => serve_cmd(a),
    }
}

/// Runs one command line, writing results to `out` and diagnostics to `err`.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                EXIT_OK
            } else {
                let _ = write!(err, "{}", e.render());
                EXIT_USAGE
            };
        }
    };
    match dispatch(&cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_FAILURE
        }
    }
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(argv, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evidence_syntax() {
        let e = parse_evidence("sex=female, age_group=>74").unwrap();
        assert_eq!(e["age_group"], ">74");
        assert!(parse_evidence("").unwrap().is_empty());
        assert!(parse_evidence("sex").is_err());
        assert!(parse_evidence("sex=male,sex=female").is_err());
    }

    #[test]
    fn usage_errors_exit_2() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(run_with(["afrisk", "frobnicate"], &mut out, &mut err), EXIT_USAGE);
        assert_eq!(run_with(["afrisk", "predict", "--evidence", "oops"], &mut out, &mut err), EXIT_USAGE);
        assert_eq!(run_with(["afrisk", "--help"], &mut out, &mut err), EXIT_OK);
    }

    #[test]
    fn invalid_state_exits_1() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run_with(["afrisk", "predict", "--evidence", "age_group=200"], &mut out, &mut err);
        assert_eq!(code, EXIT_FAILURE);
        assert!(String::from_utf8(err).unwrap().contains("<60"));
    }
}
