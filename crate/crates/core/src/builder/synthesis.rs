use serde::{Deserialize, Serialize};

use crate::bn::{Cpt, DiscreteBayesNet, Variable};
use crate::error::{Error, Result};
use crate::knowledge::{KnowledgeModel, SynthesisThresholds, TargetScores};

/// States of every synthesis node, lowest risk first.
pub const SYNTHESIS_STATES: [&str; 3] = ["low", "medium", "high"];

/// Inputs of a weighted-sum synthesis node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisSpec {
    pub node: String,
    pub parents: Vec<String>,
    pub weights: Vec<f64>,
    /// Per-parent normalised risk over that parent's states.
    pub risks: Vec<Vec<f64>>,
    pub thresholds: SynthesisThresholds,
}

impl SynthesisSpec {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let n = &self.node;
        if self.parents.is_empty() {
            out.push(format!("{n}: no parents"));
        }
        if self.weights.len() != self.parents.len() || self.risks.len() != self.parents.len() {
            out.push(format!("{n}: parents, weights and risks differ in length"));
        }
        let ws: f64 = self.weights.iter().sum();
        if (ws - 1.0).abs() > 1e-6 || self.weights.iter().any(|w| *w < 0.0) {
            out.push(format!("{n}: weights sum {ws} ≠ 1"));
        }
        for (p, r) in self.parents.iter().zip(&self.risks) {
            let s: f64 = r.iter().sum();
            if (s - 1.0).abs() > 1e-9 || r.iter().any(|x| *x < 0.0) {
                out.push(format!("{n}: risk vector of `{p}` sums to {s}"));
            }
        }
        if !self.thresholds.is_valid() {
            out.push(format!("{n}: invalid thresholds"));
        }
        out
    }

    /// `R = Σ w_i · r_i(s_i)` for one parent-state combination.
    pub fn total_risk(&self, states: &[usize]) -> f64 {
        self.weights
            .iter()
            .zip(&self.risks)
            .zip(states)
            .map(|((w, r), &s)| w * r[s])
            .sum()
    }

}

/// Inputs of a node whose risk over `base` states depends on the
/// `conditioning` parent (a separate normalised vector per conditioning state).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionedSpec {
    pub node: String,
    pub conditioning: String,
    pub base: String,
    pub risks: Vec<Vec<f64>>,
    pub thresholds: SynthesisThresholds,
}

/// `Σ w_i Σ_s p_i(s) r_i(s)`: the total risk expected when each parent
/// follows `dists[i]`.
pub fn expected_risk(weights: &[f64], risks: &[Vec<f64>], dists: &[Vec<f64>]) -> f64 {
    weights
        .iter()
        .zip(risks.iter().zip(dists))
        .map(|(w, (r, p))| w * r.iter().zip(p).map(|(x, q)| x * q).sum::<f64>())
        .sum()
}

/// Distribution of `R` when parents are independent with `dists`.
pub fn risk_distribution(weights: &[f64], risks: &[Vec<f64>], dists: &[Vec<f64>]) -> Vec<(f64, f64)> {
    let cards: Vec<usize> = risks.iter().map(Vec::len).collect();
    combinations(&cards)
        .map(|s| {
            let r: f64 = weights.iter().zip(risks).zip(&s).map(|((w, r), &i)| w * r[i]).sum();
            let p: f64 = dists.iter().zip(&s).map(|(d, &i)| d[i]).product();
            (r, p)
        })
        .collect()
}

/// Thresholds 10% either side of `m`.
pub fn centred_thresholds(m: f64) -> SynthesisThresholds {
    SynthesisThresholds { t1: 0.9 * m, t2: 1.1 * m }
}

/// low iff `R < t1`, medium iff `t1 ≤ R ≤ t2`, high iff `R > t2`.
pub fn band(r: f64, t: &SynthesisThresholds) -> usize {
    if r < t.t1 {
        0
    } else if r <= t.t2 {
        1
    } else {
        2
    }
}

fn one_hot(i: usize) -> Vec<f64> {
    let mut row = vec![0.0; 3];
    row[i] = 1.0;
    row
}

/// Mixed-radix enumeration of parent-state combinations, last parent fastest.
pub fn combinations(cards: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    let total: usize = cards.iter().product();
    (0..total).map(move |mut k| {
        let mut states = vec![0; cards.len()];
        for i in (0..cards.len()).rev() {
            states[i] = k % cards[i];
            k /= cards[i];
        }
        states
    })
}

pub fn synthesize_cpt(spec: &SynthesisSpec) -> Cpt {
    let cards: Vec<usize> = spec.risks.iter().map(Vec::len).collect();
    let rows = combinations(&cards)
        .map(|s| one_hot(band(spec.total_risk(&s), &spec.thresholds)))
        .collect();
    Cpt {
        child: spec.node.clone(),
        parents: spec.parents.clone(),
        rows,
    }
}

pub fn synthesize_conditioned_cpt(spec: &ConditionedSpec) -> Cpt {
    let rows = spec
        .risks
        .iter()
        .flat_map(|r| r.iter().map(|&x| one_hot(band(x, &spec.thresholds))))
        .collect();
    Cpt {
        child: spec.node.clone(),
        parents: vec![spec.conditioning.clone(), spec.base.clone()],
        rows,
    }
}

/// `P(present | c_1..c_k) = Σ w_c · score(c)`, clamped to [0.01, 0.99].
pub fn target_cpt(model: &KnowledgeModel, parents: &[String], weights: &[f64]) -> Result<Cpt> {
    let ws: f64 = weights.iter().sum();
    if weights.len() != parents.len() || (ws - 1.0).abs() > 1e-6 {
        return Err(Error::Validation(vec![format!(
            "target weights must match {} parents and sum to 1 (sum {ws})",
            parents.len()
        )]));
    }
    let scores = model.target_scores.as_array();
    if !(scores[0] < scores[1] && scores[1] < scores[2]) {
        return Err(Error::Validation(vec!["target_scores must be strictly increasing".into()]));
    }
    let cards = vec![3; parents.len()];
    let rows = combinations(&cards)
        .map(|s| {
            let p: f64 = weights.iter().zip(&s).map(|(w, &i)| w * scores[i]).sum();
            let p = p.clamp(0.01, 0.99);
            vec![1.0 - p, p]
        })
        .collect();
    Ok(Cpt {
        child: model.target.name.clone(),
        parents: parents.to_vec(),
        rows,
    })
}

/// Risk vector a synthesis node presents to its own synthesis child.
pub fn score_risks(scores: &TargetScores) -> Vec<f64> {
    crate::knowledge::normalize(&scores.as_array())
}

/// Parents of a category node: its factors, with any sex-conditioned base
/// factor replaced by the conditioned node.
pub fn category_parents(model: &KnowledgeModel, category: &crate::knowledge::FactorCategory) -> Vec<String> {
    category
        .factors
        .iter()
        .map(|f| match model.sex_conditioned_for(&f.name) {
            Some(node) => node.name.clone(),
            None => f.name.clone(),
        })
        .collect()
}

/// Variables and edges of the knowledge-driven network; CPTs are left unset.
pub fn knowledge_structure(model: &KnowledgeModel) -> DiscreteBayesNet {
    let mut net = DiscreteBayesNet::new();
    for f in model.factors() {
        net.add_variable(Variable::new(f.name.clone(), f.states.iter().cloned()));
    }
    for node in &model.sex_conditioned {
        net.add_variable(Variable::new(node.name.clone(), SYNTHESIS_STATES));
        net.add_edge(node.conditioning_factor.clone(), node.name.clone());
        net.add_edge(node.base_factor.clone(), node.name.clone());
    }
    for c in &model.categories {
        net.add_variable(Variable::new(c.name.as_str(), SYNTHESIS_STATES));
        for p in category_parents(model, c) {
            net.add_edge(p, c.name.as_str());
        }
    }
    net.add_variable(Variable::new(model.target.name.clone(), model.target.states.iter().cloned()));
    for c in &model.categories {
        net.add_edge(c.name.as_str(), model.target.name.clone());
    }
    net
}
