use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bn::{Cpt, DiscreteBayesNet};
use crate::cohort::CohortTable;
use crate::error::{Error, Result};
use crate::knowledge::{normalize, KnowledgeModel};
use crate::stats::{cramers_v, factor_table};

/// Smoothed root marginals `(count + α) / (n_observed + α·k)`; a factor with
/// no observations gets a uniform prior and a warning.
pub fn learn_priors(cohort: &CohortTable, skeleton: &DiscreteBayesNet, alpha: f64) -> Result<(Vec<Cpt>, Vec<String>)> {
    if cohort.is_empty() {
        return Err(Error::InsufficientData("cohort is empty".into()));
    }
    let mut cpts = Vec::new();
    let mut warnings = Vec::new();
    for root in skeleton.roots() {
        let var = skeleton.variable(root).expect("root is a variable");
        let k = var.cardinality();
        let Some(col) = cohort.column(root) else {
            continue;
        };
        let mut counts = vec![0.0; k];
        for row in &cohort.rows {
            if let Some(s) = row.values[col].as_deref().and_then(|v| var.state_index(v)) {
                counts[s] += 1.0;
            }
        }
        let n: f64 = counts.iter().sum();
        let prior = if n + alpha * k as f64 > 0.0 {
            counts.iter().map(|c| (c + alpha) / (n + alpha * k as f64)).collect()
        } else {
            vec![1.0 / k as f64; k]
        };
        if n == 0.0 {
            warnings.push(format!("factor `{root}` never observed; using a uniform prior"));
        }
        cpts.push(Cpt::root(root, prior));
    }
    Ok((cpts, warnings))
}

/// Data-derived hybrid inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataDerived {
    /// Normalised prevalence per factor state.
    pub risks: BTreeMap<String, Vec<f64>>,
    /// Per conditioned node: one normalised prevalence vector per conditioning state.
    pub conditioned_risks: BTreeMap<String, Vec<Vec<f64>>>,
    pub cramers_v: BTreeMap<String, f64>,
    /// Within-category weights, aligned with each category's factor order.
    pub factor_weights: BTreeMap<String, Vec<f64>>,
    /// Aligned with the model's category order.
    pub category_weights: Vec<f64>,
    pub warnings: Vec<String>,
}

fn prevalence(pos: f64, n: f64, alpha: f64) -> f64 {
    if n + 2.0 * alpha > 0.0 {
        (pos + alpha) / (n + 2.0 * alpha)
    } else {
        0.5
    }
}

fn normalized_or_uniform(values: &[f64]) -> Vec<f64> {
    let total: f64 = values.iter().sum();
    if total > 0.0 && total.is_finite() {
        normalize(values)
    } else {
        vec![1.0 / values.len() as f64; values.len()]
    }
}

/// Weights proportional to `v`, uniform when every entry is zero.
pub fn proportional_weights(v: &[f64]) -> Vec<f64> {
    normalized_or_uniform(v)
}

/// Label prevalence per state (smoothed), normalised across states; weights
/// from Cramér's V within each category and from mean V across categories.
pub fn data_risks_and_weights(cohort: &CohortTable, model: &KnowledgeModel, alpha: f64) -> Result<DataDerived> {
    if cohort.count_label(0) == 0 || cohort.count_label(1) == 0 {
        return Err(Error::InsufficientData("training cohort needs both labels".into()));
    }
    let mut out = DataDerived {
        risks: BTreeMap::new(),
        conditioned_risks: BTreeMap::new(),
        cramers_v: BTreeMap::new(),
        factor_weights: BTreeMap::new(),
        category_weights: Vec::new(),
        warnings: Vec::new(),
    };

    for f in model.factors() {
        let col = cohort
            .column(&f.name)
            .ok_or_else(|| Error::Lookup(format!("cohort has no column `{}`", f.name)))?;
        let mut pos = vec![0.0; f.states.len()];
        let mut n = vec![0.0; f.states.len()];
        for row in &cohort.rows {
            if let Some(s) = row.values[col].as_deref().and_then(|v| f.states.iter().position(|x| x == v)) {
                n[s] += 1.0;
                pos[s] += f64::from(row.label);
            }
        }
        let observed = n.iter().filter(|c| **c > 0.0).count();
        let table = factor_table(cohort, model, &f.name)?;
        let v = match cramers_v(&table) {
            Ok(r) => r.cramers_v,
            Err(Error::DegenerateTable(why)) => {
                out.warnings.push(format!("factor `{}`: {why}; V set to 0", f.name));
                0.0
            }
            Err(e) => return Err(e),
        };
        let risks = if observed < 2 {
            out.warnings.push(format!("factor `{}` has fewer than two observed states; uniform risk", f.name));
            vec![1.0 / f.states.len() as f64; f.states.len()]
        } else {
            let prev: Vec<f64> = pos.iter().zip(&n).map(|(p, n)| prevalence(*p, *n, alpha)).collect();
            normalized_or_uniform(&prev)
        };
        out.risks.insert(f.name.clone(), risks);
        out.cramers_v.insert(f.name.clone(), v);
    }

    for node in &model.sex_conditioned {
        let cond = model.factor(&node.conditioning_factor).expect("validated model");
        let base = model.factor(&node.base_factor).expect("validated model");
        let (cc, bc) = match (cohort.column(&cond.name), cohort.column(&base.name)) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::Lookup(format!("cohort lacks columns for `{}`", node.name))),
        };
        let mut rows = Vec::new();
        for c in &cond.states {
            let mut pos = vec![0.0; base.states.len()];
            let mut n = vec![0.0; base.states.len()];
            for row in &cohort.rows {
                if row.values[cc].as_deref() != Some(c.as_str()) {
                    continue;
                }
                if let Some(s) = row.values[bc].as_deref().and_then(|v| base.states.iter().position(|x| x == v)) {
                    n[s] += 1.0;
                    pos[s] += f64::from(row.label);
                }
            }
            if n.iter().filter(|x| **x > 0.0).count() < 2 {
                out.warnings.push(format!("`{}` given {c}: fewer than two observed states; uniform risk", node.name));
                rows.push(vec![1.0 / base.states.len() as f64; base.states.len()]);
            } else {
                let prev: Vec<f64> = pos.iter().zip(&n).map(|(p, n)| prevalence(*p, *n, alpha)).collect();
                rows.push(normalized_or_uniform(&prev));
            }
        }
        out.conditioned_risks.insert(node.name.clone(), rows);
    }

    let mut category_v = Vec::new();
    for c in &model.categories {
        let vs: Vec<f64> = c.factors.iter().map(|f| out.cramers_v[&f.name]).collect();
        category_v.push(vs.iter().sum::<f64>() / vs.len() as f64);
        out.factor_weights.insert(c.name.as_str().to_string(), proportional_weights(&vs));
    }
    out.category_weights = proportional_weights(&category_v);
    Ok(out)
}

/// Smoothed MLE CPT for `child` given `parents`, counting rows where the
/// whole family is observed.
pub fn fit_cpt(
    data: &[Vec<Option<usize>>],
    cards: &[usize],
    child: usize,
    parents: &[usize],
    alpha: f64,
) -> Vec<Vec<f64>> {
    let r = cards[child];
    let pcards: Vec<usize> = parents.iter().map(|&p| cards[p]).collect();
    let q: usize = pcards.iter().product();
    let mut counts = vec![vec![0.0; r]; q];
    'rows: for row in data {
        let Some(s) = row[child] else { continue };
        let mut j = 0;
        for (&p, &k) in parents.iter().zip(&pcards) {
            let Some(v) = row[p] else { continue 'rows };
            j = j * k + v;
        }
        counts[j][s] += 1.0;
    }
    counts
        .into_iter()
        .map(|c| {
            let n: f64 = c.iter().sum();
            if n + alpha * r as f64 > 0.0 {
                c.iter().map(|x| (x + alpha) / (n + alpha * r as f64)).collect()
            } else {
                vec![1.0 / r as f64; r]
            }
        })
        .collect()
}
