//! Shared fixtures and brute-force oracles for the integration tests.
#![allow(dead_code)]

use afrisk::bn::{Cpt, DiscreteBayesNet, Evidence, Variable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const JOINT_CAP: usize = 1 << 18;

/// Random DAG over `2..=max_vars` variables with 2 to 4 states, at most
/// three parents each and strictly positive CPT entries. The joint state
/// space is kept under `2^18` so the oracle stays fast.
pub fn random_net(seed: u64, max_vars: usize) -> DiscreteBayesNet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=max_vars);
    let mut cards: Vec<usize> = Vec::with_capacity(n);
    let mut size = 1usize;
    for i in 0..n {
        let room = (JOINT_CAP / size) >> (n - i - 1);
        let k = rng.gen_range(2..=4).min(room.max(2));
        size *= k;
        cards.push(k);
    }
    let mut net = DiscreteBayesNet::new();
    for (i, &k) in cards.iter().enumerate() {
        net.add_variable(Variable::new(format!("v{i}"), (0..k).map(|s| format!("s{s}"))));
    }
    for child in 0..n {
        let mut parents: Vec<usize> = (0..child).filter(|_| rng.gen_bool(0.35)).collect();
        while parents.len() > 3 {
            parents.remove(rng.gen_range(0..parents.len()));
        }
        for &p in &parents {
            net.add_edge(format!("v{p}"), format!("v{child}"));
        }
        let q: usize = parents.iter().map(|&p| cards[p]).product();
        let rows = (0..q)
            .map(|_| {
                let raw: Vec<f64> = (0..cards[child]).map(|_| rng.gen_range(0.05..1.0)).collect();
                let s: f64 = raw.iter().sum();
                raw.into_iter().map(|x| x / s).collect()
            })
            .collect();
        net.set_cpt(Cpt {
            child: format!("v{child}"),
            parents: parents.iter().map(|p| format!("v{p}")).collect(),
            rows,
        });
    }
    net
}

/// Random evidence on a random subset of variables other than `skip`.
pub fn random_evidence(net: &DiscreteBayesNet, seed: u64, skip: &str) -> Evidence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut out = Evidence::new();
    for v in net.variables.iter().filter(|v| v.name != skip) {
        if rng.gen_bool(0.4) {
            out.insert(v.name.clone(), v.states[rng.gen_range(0..v.states.len())].clone());
        }
    }
    out
}

/// `P(query | evidence)` by summing the full joint. Independent of the
/// library's factor algebra: it only reads states and CPT rows.
pub fn enumerate(net: &DiscreteBayesNet, evidence: &Evidence, query: &str) -> Option<Vec<f64>> {
    let names: Vec<&str> = net.variables.iter().map(|v| v.name.as_str()).collect();
    let cards: Vec<usize> = net.variables.iter().map(|v| v.states.len()).collect();
    let idx = |name: &str| names.iter().position(|n| *n == name).expect("known variable");
    let fixed: Vec<Option<usize>> = net
        .variables
        .iter()
        .map(|v| evidence.get(&v.name).map(|s| v.states.iter().position(|x| x == s).expect("valid state")))
        .collect();
    let q = idx(query);
    let mut out = vec![0.0; cards[q]];
    let mut assignment = vec![0usize; names.len()];
    let total: usize = cards.iter().product();
    for mut code in 0..total {
        for i in (0..names.len()).rev() {
            assignment[i] = code % cards[i];
            code /= cards[i];
        }
        if fixed.iter().zip(&assignment).any(|(f, a)| f.is_some_and(|f| f != *a)) {
            continue;
        }
        let mut p = 1.0;
        for cpt in &net.cpts {
            let row = cpt.parents.iter().fold(0, |r, par| r * cards[idx(par)] + assignment[idx(par)]);
            p *= cpt.rows[row][assignment[idx(&cpt.child)]];
        }
        out[assignment[q]] += p;
    }
    let z: f64 = out.iter().sum();
    (z > 0.0).then(|| out.into_iter().map(|x| x / z).collect())
}

pub fn evidence(pairs: &[(&str, &str)]) -> Evidence {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

/// The usage-scenario profile.
pub fn scenario_profile() -> Evidence {
    evidence(&[
        ("sex", "female"),
        ("age_group", ">74"),
        ("hypertension", "present"),
        ("alcohol_misuse", "present"),
        ("bmi_class", "normal"),
    ])
}

/// Every factor at its lowest-scaling state.
pub fn lowest_risk_profile(model: &afrisk::knowledge::KnowledgeModel) -> Evidence {
    model
        .factors()
        .map(|f| {
            let s = f.scaling_factors();
            let i = (0..s.len()).min_by(|&a, &b| s[a].total_cmp(&s[b])).expect("states");
            (f.name.clone(), f.states[i].clone())
        })
        .collect()
}

/// Runs the CLI in-process, returning exit code, stdout and stderr.
pub fn cli(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("afrisk").chain(args.iter().copied());
    let code = afrisk::cli::run_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}
