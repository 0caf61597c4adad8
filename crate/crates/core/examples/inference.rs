// Exact posteriors by variable elimination on a three-node network,
// cross-checked against brute-force enumeration.
//
// `cargo run --example inference`

use afrisk::bn::{joint_enumerate, posterior, Cpt, DiscreteBayesNet, Evidence, Variable};

pub fn run_example() -> afrisk::Result<()> {
    let mut net = DiscreteBayesNet::new();
    net.add_variable(Variable::new("smoker", ["no", "yes"]))
        .add_variable(Variable::new("hypertension", ["absent", "present"]))
        .add_variable(Variable::new("af", ["absent", "present"]))
        .add_edge("smoker", "af")
        .add_edge("hypertension", "af")
        .set_cpt(Cpt::root("smoker", vec![0.8, 0.2]))
        .set_cpt(Cpt::root("hypertension", vec![0.7, 0.3]))
        .set_cpt(Cpt {
            child: "af".into(),
            parents: vec!["smoker".into(), "hypertension".into()],
            // rows in mixed-radix order, last parent fastest
            rows: vec![vec![0.95, 0.05], vec![0.85, 0.15], vec![0.9, 0.1], vec![0.7, 0.3]],
        });
    assert!(net.is_valid());

    let mut evidence = Evidence::new();
    println!("P(af) = {:.4}", posterior(&net, &evidence, "af")?.p("present").unwrap());
    evidence.insert("hypertension".into(), "present".into());
    let ve = posterior(&net, &evidence, "af")?;
    let brute = joint_enumerate(&net, &evidence, "af")?;
    println!("P(af | hypertension) = {:.4} (enumeration {:.4})", ve.p("present").unwrap(), brute.p("present").unwrap());
    let back = posterior(&net, &[("af".to_string(), "present".to_string())].into(), "smoker")?;
    println!("P(smoker | af) = {:.4}", back.p("yes").unwrap());
    assert!((ve.distribution[1] - brute.distribution[1]).abs() < 1e-12);
    Ok(())
}

#[allow(dead_code)]
fn main() -> afrisk::Result<()> {
    run_example()
}
