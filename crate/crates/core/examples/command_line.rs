// The `afrisk` pipeline end to end in a scratch directory:
// synth -> cohort -> stats -> build -> eval -> predict.
//
// `cargo run --release --example command_line`

use afrisk::cli::run_with;

fn step(args: &[&str]) -> afrisk::Result<String> {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("afrisk").chain(args.iter().copied());
    let code = run_with(argv, &mut out, &mut err);
    if code != 0 {
        return Err(afrisk::Error::Config(format!(
            "`afrisk {}` exited {code}: {}",
            args.join(" "),
            String::from_utf8_lossy(&err)
        )));
    }
    Ok(String::from_utf8_lossy(&out).into_owned())
}

pub fn run_example() -> afrisk::Result<()> {
    let dir = tempfile::tempdir()?;
    let d = |name: &str| dir.path().join(name).to_string_lossy().into_owned();

    print!("{}", step(&["synth", "--n", "1200", "--out", &d("synth")])?);
    print!("{}", step(&["cohort", "--raw", &d("synth/raw"), "--out", &d("pipeline.csv")])?);
    let stats = step(&["stats", "--cohort", &d("synth/cohort.csv"), "--format", "csv"])?;
    print!("{}", stats.lines().take(4).collect::<Vec<_>>().join("\n") + "\n");
    for mode in ["knowledge", "hybrid"] {
        print!("{}", step(&["build", "--cohort", &d("synth/cohort.csv"), "--mode", mode, "--out", &d(&format!("{mode}.json"))])?);
    }
    print!(
        "{}",
        step(&["eval", "--model", &d("knowledge.json"), "--model", &d("hybrid.json"), "--cohort", &d("synth/cohort.csv")])?
    );
    print!("{}", step(&["predict", "--model", &d("hybrid.json"), "--evidence", "age_group=>74,cardiovascular_disease=present"])?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> afrisk::Result<()> {
    run_example()
}
