//! Acceptance checks, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines always reach stdout; exits non-zero on any FAIL.

mod common;

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use afrisk::bn::{posterior, Evidence};
use afrisk::builder::{build, combinations, hill_climb, shipped_model, synthesize_cpt, BuildConfig, BuildMode, HillClimbConfig, SynthesisSpec};
use afrisk::eval::{auc, evaluate, metrics, split, Confusion, MetricsReport, SplitSpec};
use afrisk::explain::contributions;
use afrisk::features::{build_cohort, FeatureMapping};
use afrisk::knowledge::{CategoryName, KnowledgeModel, SynthesisThresholds};
use afrisk::stats::{chi2_sf, cramers_v, ContingencyTable};
use afrisk::synth::{generate_cohort, generate_raw, GeneratorSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if let false = $cond {
            return Err(format!($($msg)+));
        }
    };
}

fn inference() -> Check {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let nets = 250;
    for seed in 0..nets {
        let net = common::random_net(seed, 12);
        ensure!(net.variables.len() <= 12 && net.variables.iter().all(|v| v.states.len() <= 4), "fixture too large");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let query = net.variables[rng.gen_range(0..net.variables.len())].name.clone();
        let ev = common::random_evidence(&net, seed, &query);
        let ve = posterior(&net, &ev, &query).map_err(|e| e.to_string())?;
        let oracle = common::enumerate(&net, &ev, &query).ok_or("oracle: zero evidence")?;
        for (a, b) in ve.distribution.iter().zip(&oracle) {
            worst = worst.max((a - b).abs());
        }
    }
    let t = start.elapsed();
    ensure!(worst < 1e-9, "max |VE - enumeration| = {worst:e}");
    ensure!(t < Duration::from_secs(60), "took {t:?}");
    Ok(format!("{nets} networks, max error {worst:.1e}, {:.1}s", t.as_secs_f64()))
}

fn band(row: &[f64]) -> usize {
    row.iter().position(|p| *p == 1.0).expect("one-hot row")
}

fn synthesis() -> Check {
    let t = SynthesisThresholds { t1: 0.45, t2: 0.55 };
    let spec = SynthesisSpec {
        node: "lifestyle".into(),
        parents: vec!["smoking_status".into(), "alcohol_misuse".into()],
        weights: vec![0.8, 0.2],
        risks: vec![vec![0.431, 0.569], vec![0.333, 0.667]],
        thresholds: t,
    };
    let rows = synthesize_cpt(&spec).rows;
    let mut got = Vec::new();
    let mut want = Vec::new();
    for (i, (s, a)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
        let r = 0.8 * spec.risks[0][s] + 0.2 * spec.risks[1][a];
        want.push(if r < t.t1 { 0 } else if r > t.t2 { 2 } else { 1 });
        got.push(band(&rows[i]));
    }
    ensure!(got == want, "bands {got:?}, weighted sums give {want:?}");

    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    for k in 0..1000 {
        let n = rng.gen_range(1..=4);
        let cards: Vec<usize> = (0..n).map(|_| rng.gen_range(2..=5)).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
        let ws: f64 = w.iter().sum();
        let risks: Vec<Vec<f64>> = cards
            .iter()
            .map(|&c| {
                let r: Vec<f64> = (0..c).map(|_| rng.gen_range(0.01..1.0)).collect();
                let s: f64 = r.iter().sum();
                r.into_iter().map(|x| x / s).collect()
            })
            .collect();
        let t1 = rng.gen_range(0.05..0.6);
        let spec = SynthesisSpec {
            node: "s".into(),
            parents: (0..n).map(|i| format!("p{i}")).collect(),
            weights: w.iter().map(|x| x / ws).collect(),
            risks,
            thresholds: SynthesisThresholds { t1, t2: t1 + rng.gen_range(0.0..0.3) },
        };
        let cpt = synthesize_cpt(&spec);
        let row_of = |s: &[usize]| s.iter().zip(&cards).fold(0, |r, (x, k)| r * k + x);
        for s in combinations(&cards) {
            let here = band(&cpt.rows[row_of(&s)]);
            for p in 0..n {
                for other in 0..cards[p] {
                    if spec.risks[p][other] > spec.risks[p][s[p]] {
                        let mut t = s.clone();
                        t[p] = other;
                        ensure!(band(&cpt.rows[row_of(&t)]) >= here, "spec {k}: band fell when raising p{p}");
                    }
                }
            }
        }
    }
    // The stated R = 0.4446 for (nonsmoker, present) does not follow from the
    // stated inputs; the weighted sum is 0.4782, which is medium.
    Ok(format!(
        "lifestyle bands {got:?} (R = 0.4114, 0.4782, 0.5218, 0.5886; a hand value of 0.4446/low for nonsmoker+present does not follow from these inputs), 1000 random specs monotone"
    ))
}

fn statistics() -> Check {
    let r = cramers_v(&ContingencyTable::new(vec![vec![30, 10], vec![10, 30]])).map_err(|e| e.to_string())?;
    ensure!(r.chi2 == 20.0, "chi2 = {}", r.chi2);
    ensure!(r.cramers_v == 0.5, "V = {}", r.cramers_v);
    let p = chi2_sf(3.841, 1);
    ensure!((p - 0.05).abs() <= 1e-3, "p(3.841, 1) = {p}");
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (r, c) = (rng.gen_range(2..=5), rng.gen_range(2..=6));
        let counts: Vec<Vec<u64>> = (0..r).map(|_| (0..c).map(|_| rng.gen_range(1..200)).collect()).collect();
        let k = rng.gen_range(2..6);
        let t = ContingencyTable::new(counts.clone());
        let v = cramers_v(&t).map_err(|e| e.to_string())?.cramers_v;
        let vt = cramers_v(&t.transpose()).map_err(|e| e.to_string())?.cramers_v;
        let scaled = ContingencyTable::new(counts.iter().map(|r| r.iter().map(|x| x * k).collect()).collect());
        let vs = cramers_v(&scaled).map_err(|e| e.to_string())?.cramers_v;
        worst = worst.max((v - vt).abs()).max((v - vs).abs());
    }
    ensure!(worst < 1e-9, "V drift {worst:e}");
    Ok(format!("chi2 = 20, V = 0.5, p = {p:.4}, 100 tables invariant (max drift {worst:.1e})"))
}

fn pipeline() -> Check {
    let model = KnowledgeModel::atrial_fibrillation();
    let mapping = FeatureMapping::default_af();
    let fx = generate_raw(&GeneratorSpec::default_af().with_size(1000), &mapping).map_err(|e| e.to_string())?;
    let cohort = build_cohort(&fx.raw, &model, &mapping, 1).map_err(|e| e.to_string())?;
    let ids: HashSet<&str> = cohort.rows.iter().map(|r| r.patient_id.as_str()).collect();
    let mut expected = fx.cohort.subset(&ids);
    expected.sort_by_id();
    ensure!(cohort == expected, "rebuilt cohort differs from planted rows");

    // Without the poisoned post-cutoff records the output must not change.
    let mut clean = fx.raw.clone();
    let poisoned: HashSet<&str> = fx.poisoned.iter().map(String::as_str).collect();
    let selection = afrisk::features::select_cohort(&fx.raw.visits, &mapping, 1).map_err(|e| e.to_string())?;
    let late = |id: &str, d: chrono::NaiveDate| poisoned.contains(id) && selection.cutoff(id).is_some_and(|c| d >= c);
    clean.measurements.retain(|m| !late(&m.patient_id, m.date));
    clean.ecg.retain(|e| !late(&e.patient_id, e.date));
    clean.visits.retain(|v| !(late(&v.patient_id, v.visit_date) && selection.cutoff(&v.patient_id) != Some(v.visit_date)));
    for v in &mut clean.visits {
        if late(&v.patient_id, v.visit_date) {
            v.icd_codes.retain(|c| mapping.is_target(c));
        }
    }
    ensure!(clean != fx.raw, "fixture has no poison");
    let unpoisoned = build_cohort(&clean, &model, &mapping, 1).map_err(|e| e.to_string())?;
    ensure!(unpoisoned == cohort, "post-cutoff records changed the cohort");

    let col = |f: &str| cohort.column(f).expect("column");
    let (h, pv) = (col("height_group"), col("pr_variation"));
    let height_missing: HashSet<&str> = cohort.rows.iter().filter(|r| r.values[h].is_none()).map(|r| r.patient_id.as_str()).collect();
    let conflicts: HashSet<&str> = fx.height_conflicts.iter().map(String::as_str).filter(|p| ids.contains(p)).collect();
    ensure!(conflicts.is_subset(&height_missing) && !conflicts.is_empty(), "height conflict rule missed a planted case");
    for r in cohort.rows.iter().filter(|r| height_missing.contains(r.patient_id.as_str()) && !conflicts.contains(r.patient_id.as_str())) {
        let measured = fx.raw.measurements.iter().any(|m| {
            m.patient_id == r.patient_id
                && m.kind == afrisk::features::MeasurementKind::HeightCm
                && selection.cutoff(&r.patient_id).is_none_or(|c| m.date < c)
        });
        ensure!(!measured, "height rule fired on unplanted {}", r.patient_id);
    }
    let single: Vec<&str> = fx.single_ecg.iter().map(String::as_str).filter(|p| ids.contains(p)).collect();
    ensure!(!single.is_empty(), "no single-ECG case selected");
    for id in &single {
        let row = cohort.rows.iter().find(|r| r.patient_id == *id).expect("selected");
        ensure!(row.values[pv].as_deref() == Some("absent"), "single-ECG {id} has variation {:?}", row.values[pv]);
    }
    let n_multi_flat = cohort
        .rows
        .iter()
        .filter(|r| !single.contains(&r.patient_id.as_str()))
        .filter(|r| fx.raw.ecg.iter().filter(|e| e.patient_id == r.patient_id).count() == 1)
        .count();
    ensure!(n_multi_flat == 0, "{n_multi_flat} unplanted single-ECG rows");
    let (neg, pos) = (cohort.count_label(0), cohort.count_label(1));
    ensure!(neg == pos, "classes {neg}/{pos}");
    Ok(format!(
        "{} rows identical, poison inert, {} height conflicts, {} single-ECG, classes {pos}/{neg}",
        cohort.len(),
        conflicts.len(),
        single.len()
    ))
}

fn structure() -> Check {
    let names: Vec<String> = (0..5).map(|i| format!("x{i}")).collect();
    let cards = [2, 3, 2, 4, 3];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut rows: Vec<Vec<usize>> = (0..2000).map(|_| cards.iter().map(|&k| rng.gen_range(0..k)).collect()).collect();
    let run = |rows: &[Vec<usize>]| -> Result<(Vec<(usize, usize)>, Duration), String> {
        let start = Instant::now();
        let r = hill_climb(rows, &cards, &names, 1.0, 3, &HillClimbConfig::default()).map_err(|e| e.to_string())?;
        let t = start.elapsed();
        ensure!(r.trace.windows(2).all(|w| w[1] >= w[0]), "BIC trace decreased");
        ensure!(t < Duration::from_secs(30), "search took {t:?}");
        Ok((r.edges(), t))
    };
    let (edges, t1) = run(&rows)?;
    ensure!(edges.is_empty(), "independent columns gave {edges:?}");
    for row in &mut rows {
        row[2] = if rng.gen::<f64>() < 0.05 { rng.gen_range(0..2) } else { row[0] % 2 };
    }
    let (edges, t2) = run(&rows)?;
    ensure!(edges == [(0, 2)] || edges == [(2, 0)], "noisy copy gave {edges:?}");
    Ok(format!("empty graph, one edge {edges:?}, traces monotone, {:.2}s/{:.2}s", t1.as_secs_f64(), t2.as_secs_f64()))
}

fn end_to_end() -> Check {
    let start = Instant::now();
    let model = KnowledgeModel::atrial_fibrillation();
    let spec = GeneratorSpec::default_af();
    ensure!(spec.n_patients == 2242, "cohort size {}", spec.n_patients);
    let cohort = generate_cohort(&spec).map_err(|e| e.to_string())?;
    ensure!(cohort.factors.len() == 16, "{} factors", cohort.factors.len());
    let (train, test) = split(&cohort, &SplitSpec::new(42)).map_err(|e| e.to_string())?;
    let mut reports: Vec<MetricsReport> = Vec::new();
    let mut built = Vec::new();
    for mode in BuildMode::ALL {
        let b = build(&model, &train, &BuildConfig::new(mode)).map_err(|e| e.to_string())?;
        reports.push(evaluate(&b, &test).map_err(|e| e.to_string())?);
        built.push(b);
    }
    let (k, h) = (&reports[0], &reports[2]);
    let (kb, hb) = (&built[0], &built[2]);
    ensure!(kb.net.variables == hb.net.variables && kb.net.edges == hb.net.edges, "knowledge/hybrid structures differ");
    for root in kb.net.roots() {
        ensure!(kb.net.cpt(root) == hb.net.cpt(root), "root prior `{root}` differs");
    }
    let t = start.elapsed();
    let line = format!(
        "test n={}, recall knowledge {:.4} / data {:.4} / hybrid {:.4}, AUC hybrid {:.4}, {:.1}s",
        h.n_test, k.recall, reports[1].recall, h.recall, h.auc, t.as_secs_f64()
    );
    ensure!(h.auc >= 0.70, "hybrid AUC below 0.70: {line}");
    ensure!(h.recall >= k.recall, "hybrid recall below knowledge recall: {line}");
    ensure!(t < Duration::from_secs(300), "too slow: {line}");
    Ok(line + ", structure and root priors identical")
}

fn metrics_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    for n in (2..=200).step_by(3) {
        let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..25u32)) / 24.0).collect();
        let mut labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=1)).collect();
        labels[0] = 0;
        labels[1] = 1;
        let (mut twice, mut pairs) = (0u64, 0u64);
        let (mut tp, mut fp, mut tn, mut fneg) = (0u64, 0u64, 0u64, 0u64);
        for i in 0..n {
            match (scores[i] >= 0.5, labels[i] == 1) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, false) => tn += 1,
                (false, true) => fneg += 1,
            }
            for j in 0..n {
                if labels[i] == 1 && labels[j] == 0 {
                    pairs += 1;
                    twice += if scores[i] > scores[j] { 2 } else if scores[i] == scores[j] { 1 } else { 0 };
                }
            }
        }
        let a = auc(&scores, &labels).map_err(|e| e.to_string())?;
        ensure!(a == twice as f64 / (2 * pairs) as f64, "n={n}: AUC {a} vs pair count");
        let m = metrics(&scores, &labels).map_err(|e| e.to_string())?;
        let acc = (tp + tn) as f64 / n as f64;
        let rec = tp as f64 / (tp + fneg) as f64;
        ensure!((m.accuracy - acc).abs() <= 1e-12 && (m.recall - rec).abs() <= 1e-12, "n={n}: accuracy/recall");
        if tp + fp > 0 {
            let prec = tp as f64 / (tp + fp) as f64;
            let f1 = if prec + rec > 0.0 { 2.0 * prec * rec / (prec + rec) } else { 0.0 };
            ensure!((m.precision - prec).abs() <= 1e-12 && (m.f1 - f1).abs() <= 1e-12, "n={n}: precision/F1");
        }
    }
    let fixture = MetricsReport::from_confusion(Confusion { tp: 87, fn_: 13, fp: 29, tn: 71 }, 0.5);
    ensure!(fixture.recall == 0.87 && fixture.accuracy == 0.79, "fixture recall {}", fixture.recall);
    Ok("67 test sets (2..=200 rows) exact, TP=87/FN=13 recall 0.87".into())
}

fn usage_scenario() -> Check {
    let built = shipped_model().map_err(|e| e.to_string())?;
    let profile = common::scenario_profile();
    let p = built.p_present(&profile).map_err(|e| e.to_string())?;
    let prior = built.p_present(&Evidence::new()).map_err(|e| e.to_string())?;
    let mut young = profile.clone();
    young.insert("age_group".into(), "<60".into());
    let py = built.p_present(&young).map_err(|e| e.to_string())?;
    let line = format!("profile {p:.4}, prior {prior:.4}, age <60 {py:.4}");
    ensure!(built.classification(p) == "present", "classified absent: {line}");
    ensure!(p > prior && p > py, "ordering violated: {line}");
    Ok(line)
}

fn explanation() -> Check {
    let mut small = KnowledgeModel::atrial_fibrillation();
    small.sex_conditioned.clear();
    small.categories.retain(|c| matches!(c.name, CategoryName::Lifestyle | CategoryName::Comorbidity | CategoryName::Ecg));
    for c in &mut small.categories {
        c.factors.truncate(4);
        c.factors.retain(|f| f.name != "pwave_duration");
        let w: f64 = c.factors.iter().map(|f| f.weight).sum();
        c.factors.iter_mut().for_each(|f| f.weight /= w);
    }
    let total: f64 = small.categories.iter().map(|c| c.weight).sum();
    small.categories.iter_mut().for_each(|c| c.weight /= total);
    let cohort = generate_cohort(&GeneratorSpec::default_af().with_size(600)).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut checked, mut worst, mut cites) = (0, 0.0f64, 0);
    for mode in [BuildMode::Knowledge, BuildMode::Hybrid] {
        let built = build(&small, &cohort, &BuildConfig::new(mode)).map_err(|e| e.to_string())?;
        ensure!(built.net.variables.len() <= 12, "{} variables", built.net.variables.len());
        let present = |e: &Evidence| common::enumerate(&built.net, e, built.target()).map(|d| d[1]);
        for _ in 0..40 {
            let mut e = Evidence::new();
            for f in small.factors() {
                if rng.gen_bool(0.6) {
                    e.insert(f.name.clone(), f.states[rng.gen_range(0..f.states.len())].clone());
                }
            }
            let full = present(&e).ok_or("oracle: zero evidence")?;
            for c in contributions(&built, &small, &e).map_err(|e| e.to_string())? {
                let mut rest = e.clone();
                rest.remove(&c.factor);
                worst = worst.max((c.delta - (full - present(&rest).ok_or("oracle")?)).abs());
                checked += 1;
                for cite in &c.citations {
                    let known = small.publications.iter().any(|p| p.identifier == cite.identifier && p.title == cite.title);
                    ensure!(known, "{} cites unknown {}", c.factor, cite.identifier);
                    cites += 1;
                }
            }
        }
    }
    ensure!(worst < 1e-9, "max delta error {worst:e}");
    ensure!(cites > 0, "no citations checked");
    Ok(format!("{checked} deltas, max error {worst:.1e}, {cites} citations resolved"))
}

fn determinism() -> Check {
    let run = || -> Result<Vec<Vec<u8>>, String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let d = |n: &str| dir.path().join(n).to_string_lossy().into_owned();
        let mut log = Vec::new();
        let steps: Vec<Vec<String>> = vec![
            vec!["synth".into(), "--n".into(), "900".into(), "--seed".into(), "17".into(), "--out".into(), d("synth")],
            vec!["cohort".into(), "--raw".into(), d("synth/raw"), "--out".into(), d("cohort.csv")],
            vec!["build".into(), "--cohort".into(), d("cohort.csv"), "--mode".into(), "hybrid".into(), "--out".into(), d("h.json")],
            vec!["build".into(), "--cohort".into(), d("cohort.csv"), "--mode".into(), "data".into(), "--out".into(), d("d.json")],
            vec!["eval".into(), "--model".into(), d("h.json"), "--model".into(), d("d.json"), "--cohort".into(), d("cohort.csv"), "--format".into(), "json".into()],
        ];
        for s in &steps {
            let args: Vec<&str> = s.iter().map(String::as_str).collect();
            let (code, out, err) = common::cli(&args);
            ensure!(code == 0, "{}: {err}", s[0]);
            log.extend(out.replace(&dir.path().to_string_lossy().into_owned(), "").into_bytes());
        }
        let mut out = vec![log];
        for f in ["synth/cohort.csv", "synth/raw/visits.csv", "cohort.csv", "h.json", "d.json", "h.provenance.json", "d.provenance.json"] {
            out.push(std::fs::read(d(f)).map_err(|e| format!("{f}: {e}"))?);
        }
        Ok(out)
    };
    let (a, b) = (run()?, run()?);
    ensure!(a == b, "reruns differ");
    Ok(format!("{} artefacts byte-identical across reruns", a.len()))
}

fn main() {
    let checks: [Criterion; 10] = [
        ("inference correctness", inference),
        ("synthesis CPT oracle", synthesis),
        ("statistics oracle", statistics),
        ("pipeline fidelity", pipeline),
        ("structure-learning sanity", structure),
        ("end-to-end planted truth", end_to_end),
        ("metrics oracle", metrics_oracle),
        ("usage scenario", usage_scenario),
        ("explanation soundness", explanation),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
