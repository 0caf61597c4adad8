mod common;

use afrisk::bn::{elimination_order, joint_enumerate, posterior, posterior_with_order, Cpt, DiscreteBayesNet, Evidence, Variable};
use afrisk::Error;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn elimination_matches_enumeration(seed in any::<u64>()) {
        let net = common::random_net(seed, 12);
        let query = net.variables[seed as usize % net.variables.len()].name.clone();
        let ev = common::random_evidence(&net, seed, &query);
        let ve = posterior(&net, &ev, &query).unwrap();
        let oracle = common::enumerate(&net, &ev, &query).unwrap();
        for (a, b) in ve.distribution.iter().zip(&oracle) {
            prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        let lib = joint_enumerate(&net, &ev, &query).unwrap();
        for (a, b) in lib.distribution.iter().zip(&oracle) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn order_does_not_change_the_answer(seed in any::<u64>(), rotate in 0usize..12) {
        let net = common::random_net(seed, 8);
        let query = net.variables[0].name.clone();
        let ev = common::random_evidence(&net, seed, &query);
        let mut order = elimination_order(&net, &query, &ev).unwrap();
        let a = posterior_with_order(&net, &ev, &query, &order).unwrap();
        if !order.is_empty() {
            let k = rotate % order.len();
            order.rotate_left(k);
            order.reverse();
        }
        let b = posterior_with_order(&net, &ev, &query, &order).unwrap();
        for (x, y) in a.distribution.iter().zip(&b.distribution) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}

fn deterministic_chain() -> DiscreteBayesNet {
    let mut net = DiscreteBayesNet::new();
    net.add_variable(Variable::new("a", ["f", "t"]))
        .add_variable(Variable::new("b", ["f", "t"]))
        .add_edge("a", "b")
        .set_cpt(Cpt::root("a", vec![0.5, 0.5]))
        .set_cpt(Cpt { child: "b".into(), parents: vec!["a".into()], rows: vec![vec![1.0, 0.0], vec![0.0, 1.0]] });
    net
}

#[test]
fn impossible_evidence_is_reported() {
    let net = deterministic_chain();
    let ev = common::evidence(&[("a", "f"), ("b", "t")]);
    assert!(matches!(posterior(&net, &ev, "a"), Err(Error::ZeroProbabilityEvidence)));
    assert!(common::enumerate(&net, &ev, "a").is_none());
}

#[test]
fn bad_evidence_names_valid_states() {
    let net = deterministic_chain();
    let err = posterior(&net, &common::evidence(&[("a", "maybe")]), "b").unwrap_err();
    match err {
        Error::InvalidState { valid, .. } => assert_eq!(valid, vec!["f", "t"]),
        other => panic!("unexpected {other}"),
    }
    assert!(matches!(posterior(&net, &Evidence::new(), "zzz"), Err(Error::UnknownVariable(_))));
}

#[test]
fn network_json_round_trips() {
    for seed in 0..20 {
        let net = common::random_net(seed, 10);
        let back = DiscreteBayesNet::from_json(&net.to_json().unwrap()).unwrap();
        assert_eq!(back, net);
    }
}
