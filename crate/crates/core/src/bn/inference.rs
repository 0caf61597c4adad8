//! Exact inference: variable elimination plus a brute-force joint oracle.

use std::collections::{BTreeSet, HashSet};

use super::{DiscreteBayesNet, Evidence, Factor, Posterior};
use crate::error::{Error, Result};

/// Default cap on the joint state space for [`joint_enumerate`].
pub const DEFAULT_ORACLE_CAP: u128 = 1 << 20;

/// Exact `P(query | evidence)` by variable elimination with a min-degree order.
pub fn posterior(net: &DiscreteBayesNet, evidence: &Evidence, query: &str) -> Result<Posterior> {
    let order = elimination_order(net, query, evidence)?;
    posterior_with_order(net, evidence, query, &order)
}

/// Variable elimination with a caller-supplied order.
///
/// `order` must contain exactly the variables that are neither the query nor
/// observed.
pub fn posterior_with_order(
    net: &DiscreteBayesNet,
    evidence: &Evidence,
    query: &str,
    order: &[String],
) -> Result<Posterior> {
    net.ensure_valid()?;
    net.check_evidence(evidence)?;
    let q = net
        .variable_index(query)
        .ok_or_else(|| Error::UnknownVariable(query.to_string()))?;
    let query_var = &net.variables[q];

    let hidden: BTreeSet<&str> = net
        .variables
        .iter()
        .map(|v| v.name.as_str())
        .filter(|n| *n != query && !evidence.contains_key(*n))
        .collect();
    let given: BTreeSet<&str> = order.iter().map(String::as_str).collect();
    if given != hidden || given.len() != order.len() {
        return Err(Error::Config(format!(
            "elimination order must be a permutation of the hidden variables {:?}",
            hidden
        )));
    }

    // Observing the query itself: infer from the remaining evidence, then
    // check the observation is possible.
    if let Some(observed) = evidence.get(query) {
        let mut rest = evidence.clone();
        rest.remove(query);
        let marginal = posterior_with_order(net, &rest, query, order)?;
        let idx = query_var.state_index(observed).expect("checked above");
        if marginal.distribution[idx] <= 0.0 {
            return Err(Error::ZeroProbabilityEvidence);
        }
        let mut distribution = vec![0.0; query_var.cardinality()];
        distribution[idx] = 1.0;
        return Ok(Posterior {
            variable: query.to_string(),
            states: query_var.states.clone(),
            distribution,
        });
    }

    let mut factors = initial_factors(net, evidence);

    for name in order {
        let var = net.variable_index(name).expect("order validated");
        let (touching, rest): (Vec<Factor>, Vec<Factor>) =
            factors.into_iter().partition(|f| f.contains(var));
        factors = rest;
        let Some(mut joined) = touching.into_iter().reduce(|a, b| a.product(&b)) else {
            continue;
        };
        joined = joined.marginalize(var);
        if joined.normalize() <= 0.0 {
            return Err(Error::ZeroProbabilityEvidence);
        }
        factors.push(joined);
    }

    let mut result = factors
        .into_iter()
        .reduce(|a, b| a.product(&b))
        .unwrap_or_else(|| Factor::scalar(1.0));
    for &v in result.scope().to_vec().iter() {
        if v != q {
            result = result.marginalize(v);
        }
    }
    let total = result.normalize();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::ZeroProbabilityEvidence);
    }
    let distribution = if result.scope() == [q] {
        result.values().to_vec()
    } else {
        // The query's own CPT always carries it; reaching here means an empty scope.
        vec![1.0 / query_var.cardinality() as f64; query_var.cardinality()]
    };
    Ok(Posterior {
        variable: query.to_string(),
        states: query_var.states.clone(),
        distribution,
    })
}

fn initial_factors(net: &DiscreteBayesNet, evidence: &Evidence) -> Vec<Factor> {
    net.cpts
        .iter()
        .map(|cpt| {
            let mut scope: Vec<usize> = cpt
                .parents
                .iter()
                .map(|p| net.variable_index(p).expect("validated"))
                .collect();
            let child = net.variable_index(&cpt.child).expect("validated");
            scope.push(child);
            let cards = scope.iter().map(|&i| net.variables[i].cardinality()).collect();
            let values = cpt.rows.iter().flatten().copied().collect();
            let mut f = Factor::new(scope, cards, values);
            for (name, state) in evidence {
                let idx = net.variable_index(name).expect("checked");
                if f.contains(idx) {
                    let s = net.variables[idx].state_index(state).expect("checked");
                    f = f.reduce(idx, s);
                }
            }
            f
        })
        .collect()
}

/// Greedy min-degree elimination order on the moralized graph, restricted to
/// variables that are neither queried nor observed. Ties break by name.
pub fn elimination_order(
    net: &DiscreteBayesNet,
    query: &str,
    evidence: &Evidence,
) -> Result<Vec<String>> {
    if net.variable(query).is_none() {
        return Err(Error::UnknownVariable(query.to_string()));
    }
    let n = net.variables.len();
    let mut adj: Vec<HashSet<usize>> = vec![HashSet::new(); n];
    let connect = |a: usize, b: usize, adj: &mut Vec<HashSet<usize>>| {
        if a != b {
            adj[a].insert(b);
            adj[b].insert(a);
        }
    };
    for v in &net.variables {
        let child = net.variable_index(&v.name).expect("own variable");
        let parents: Vec<usize> = net
            .parents(&v.name)
            .iter()
            .filter_map(|p| net.variable_index(p))
            .collect();
        for (i, &p) in parents.iter().enumerate() {
            connect(p, child, &mut adj);
            for &o in &parents[i + 1..] {
                connect(p, o, &mut adj);
            }
        }
    }
    // Observed variables are reduced away before elimination.
    let observed: HashSet<usize> = evidence
        .keys()
        .filter_map(|k| net.variable_index(k))
        .collect();
    for &o in &observed {
        for nb in std::mem::take(&mut adj[o]) {
            adj[nb].remove(&o);
        }
    }

    let mut remaining: BTreeSet<(String, usize)> = net
        .variables
        .iter()
        .enumerate()
        .filter(|(i, v)| v.name != query && !observed.contains(i))
        .map(|(i, v)| (v.name.clone(), i))
        .collect();
    let mut order = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let (name, idx) = remaining
            .iter()
            .min_by_key(|(name, i)| (adj[*i].len(), name.clone()))
            .cloned()
            .expect("non-empty");
        let neighbours: Vec<usize> = adj[idx].iter().copied().collect();
        for (k, &a) in neighbours.iter().enumerate() {
            for &b in &neighbours[k + 1..] {
                adj[a].insert(b);
                adj[b].insert(a);
            }
            adj[a].remove(&idx);
        }
        adj[idx].clear();
        remaining.remove(&(name.clone(), idx));
        order.push(name);
    }
    Ok(order)
}

type Family<'a> = (usize, Vec<usize>, &'a Vec<Vec<f64>>);

/// Brute-force `P(query | evidence)` by summing the full factorized joint.
pub fn joint_enumerate(net: &DiscreteBayesNet, evidence: &Evidence, query: &str) -> Result<Posterior> {
    joint_enumerate_capped(net, evidence, query, DEFAULT_ORACLE_CAP)
}

pub fn joint_enumerate_capped(
    net: &DiscreteBayesNet,
    evidence: &Evidence,
    query: &str,
    cap: u128,
) -> Result<Posterior> {
    net.ensure_valid()?;
    net.check_evidence(evidence)?;
    let q = net
        .variable_index(query)
        .ok_or_else(|| Error::UnknownVariable(query.to_string()))?;
    let cards: Vec<usize> = net.variables.iter().map(|v| v.cardinality()).collect();
    let size = cards.iter().fold(1u128, |acc, &c| acc.saturating_mul(c as u128));
    if size > cap {
        return Err(Error::OracleTooLarge { size, cap });
    }

    let fixed: Vec<Option<usize>> = net
        .variables
        .iter()
        .map(|v| evidence.get(&v.name).and_then(|s| v.state_index(s)))
        .collect();
    // (child index, parent indices, rows) per CPT
    let families: Vec<Family> = net
        .cpts
        .iter()
        .map(|cpt| {
            (
                net.variable_index(&cpt.child).expect("validated"),
                cpt.parents
                    .iter()
                    .map(|p| net.variable_index(p).expect("validated"))
                    .collect(),
                &cpt.rows,
            )
        })
        .collect();

    let mut dist = vec![0.0; cards[q]];
    let mut assignment = vec![0usize; cards.len()];
    'outer: loop {
        let consistent = fixed
            .iter()
            .zip(&assignment)
            .all(|(f, a)| f.is_none_or(|s| s == *a));
        if consistent {
            let mut p = 1.0;
            for (child, parents, rows) in &families {
                let row = parents
                    .iter()
                    .fold(0usize, |acc, &pi| acc * cards[pi] + assignment[pi]);
                p *= rows[row][assignment[*child]];
            }
            dist[assignment[q]] += p;
        }
        for d in (0..cards.len()).rev() {
            assignment[d] += 1;
            if assignment[d] < cards[d] {
                continue 'outer;
            }
            assignment[d] = 0;
        }
        break;
    }
    let total: f64 = dist.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroProbabilityEvidence);
    }
    for p in &mut dist {
        *p /= total;
    }
    Ok(Posterior {
        variable: query.to_string(),
        states: net.variables[q].states.clone(),
        distribution: dist,
    })
}
