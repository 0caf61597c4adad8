//! Declarative knowledge model: the risk-factor hierarchy, per-state risk
//! relationships (scaling factors and weights), and the publications that
//! back them.
//!
//! The on-disk form is a versioned UTF-8 JSON document; see
//! `docs/knowledge-model.md` for the schema. [`KnowledgeModel::from_json`]
//! collects every violated invariant with its field path rather than stopping
//! at the first.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const KNOWLEDGE_FORMAT_VERSION: u32 = 1;
const WEIGHT_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Publication {
    /// Registry key that evidence items refer to.
    pub key: String,
    pub title: String,
    pub identifier: String,
    pub year: i32,
    #[serde(default)]
    pub authors: Vec<String>,
}

/// Evidence as stored in the document: a summary plus a publication key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvidenceRef {
    pub summary: String,
    pub publication: String,
}

/// Evidence with its publication record resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceItem {
    pub summary: String,
    pub publication: Publication,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskRelationship {
    pub state: String,
    pub scaling_factor: f64,
    /// Value chosen without a directly citable figure.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub provisional: bool,
    #[serde(default)]
    pub evidence: Vec<EvidenceRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskFactor {
    pub name: String,
    pub states: Vec<String>,
    pub weight: f64,
    pub relationships: Vec<RiskRelationship>,
}

impl RiskFactor {
    pub fn relationship(&self, state: &str) -> Option<&RiskRelationship> {
        self.relationships.iter().find(|r| r.state == state)
    }

    /// Scaling factors in state order.
    pub fn scaling_factors(&self) -> Vec<f64> {
        self.states
            .iter()
            .map(|s| self.relationship(s).map_or(f64::NAN, |r| r.scaling_factor))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoryName {
    Anthropometric,
    Comorbidity,
    Demographic,
    Ecg,
    Lifestyle,
}

impl CategoryName {
    pub const ALL: [CategoryName; 5] = [
        CategoryName::Anthropometric,
        CategoryName::Comorbidity,
        CategoryName::Demographic,
        CategoryName::Ecg,
        CategoryName::Lifestyle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CategoryName::Anthropometric => "anthropometric",
            CategoryName::Comorbidity => "comorbidity",
            CategoryName::Demographic => "demographic",
            CategoryName::Ecg => "ecg",
            CategoryName::Lifestyle => "lifestyle",
        }
    }
}

impl fmt::Display for CategoryName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisThresholds {
    pub t1: f64,
    pub t2: f64,
}

impl SynthesisThresholds {
    pub fn new(t1: f64, t2: f64) -> Result<Self> {
        let t = Self { t1, t2 };
        if t.is_valid() {
            Ok(t)
        } else {
            Err(Error::Validation(vec![format!(
                "thresholds must satisfy 0 < t1 < t2 < 1 (got t1={t1}, t2={t2})"
            )]))
        }
    }

    pub fn is_valid(&self) -> bool {
        0.0 < self.t1 && self.t1 < self.t2 && self.t2 < 1.0
    }
}

impl Default for SynthesisThresholds {
    fn default() -> Self {
        Self { t1: 0.45, t2: 0.55 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorCategory {
    pub name: CategoryName,
    pub weight: f64,
    /// When absent, the build uses 0.9m / 1.1m, where m is the weighted risk
    /// expected under the learned root priors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<SynthesisThresholds>,
    pub factors: Vec<RiskFactor>,
}

/// A synthesis node whose per-state risk depends on a second factor, e.g.
/// BMI risk conditioned on sex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SexConditionedNode {
    pub name: String,
    pub conditioning_factor: String,
    pub base_factor: String,
    /// conditioning state -> base state -> scaling factor
    pub table: BTreeMap<String, BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<SynthesisThresholds>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub name: String,
    pub condition: String,
    /// `[absent, present]`; index 1 is the positive state.
    pub states: Vec<String>,
}

impl TargetSpec {
    pub fn present(&self) -> &str {
        &self.states[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetScores {
    pub low: f64,
    pub medium: f64,
    pub high: f64,
}

impl TargetScores {
    pub fn as_array(&self) -> [f64; 3] {
        [self.low, self.medium, self.high]
    }
}

impl Default for TargetScores {
    fn default() -> Self {
        Self { low: 0.1, medium: 0.5, high: 0.9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnowledgeModel {
    pub version: u32,
    pub target: TargetSpec,
    #[serde(default)]
    pub target_scores: TargetScores,
    #[serde(default)]
    pub publications: Vec<Publication>,
    pub categories: Vec<FactorCategory>,
    #[serde(default)]
    pub sex_conditioned: Vec<SexConditionedNode>,
}

/// One row of [`KnowledgeModel::summary`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub category: CategoryName,
    pub factor: String,
    pub weight: f64,
    pub state_count: usize,
    pub evidence_count: usize,
}

impl KnowledgeModel {
    /// Parses and validates a knowledge-model document.
    pub fn from_json(document: &str) -> Result<Self> {
        let model: KnowledgeModel =
            serde_json::from_str(document).map_err(|e| Error::Parse(e.to_string()))?;
        let problems = model.violations();
        if problems.is_empty() {
            Ok(model)
        } else {
            Err(Error::Validation(problems))
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    /// The shipped atrial fibrillation model.
    pub fn atrial_fibrillation() -> Self {
        Self::from_json(include_str!("../data/af_knowledge_model.json"))
            .expect("shipped AF knowledge model is valid")
    }

    /// Every violated invariant, each prefixed by its field path.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.version != KNOWLEDGE_FORMAT_VERSION {
            out.push(format!(
                "version: unsupported version {} (expected {KNOWLEDGE_FORMAT_VERSION})",
                self.version
            ));
        }
        if self.target.name.trim().is_empty() {
            out.push("target.name: must be non-empty".into());
        }
        if self.target.states.len() != 2 || self.target.states[0] == self.target.states[1] {
            out.push("target.states: must be two distinct states [absent, present]".into());
        }
        let s = self.target_scores;
        if !(0.0 < s.low && s.low < s.medium && s.medium < s.high && s.high < 1.0) {
            out.push(format!(
                "target_scores: must be strictly increasing within (0,1) (got {}, {}, {})",
                s.low, s.medium, s.high
            ));
        }

        let mut keys = HashSet::new();
        for (i, p) in self.publications.iter().enumerate() {
            if !keys.insert(p.key.as_str()) {
                out.push(format!("publications[{i}].key: duplicate key `{}`", p.key));
            }
            if p.title.trim().is_empty() {
                out.push(format!("publications[{i}].title: must be non-empty"));
            }
            if p.identifier.trim().is_empty() {
                out.push(format!("publications[{i}].identifier: must be non-empty"));
            }
        }

        if self.categories.is_empty() {
            out.push("categories: at least one category is required".into());
        }
        let mut names: HashSet<&str> = HashSet::new();
        names.insert(self.target.name.as_str());
        let mut seen_categories = HashSet::new();
        let mut weight_sum = 0.0;
        for (ci, cat) in self.categories.iter().enumerate() {
            let path = format!("categories[{ci}]");
            if !seen_categories.insert(cat.name) {
                out.push(format!("{path}.name: duplicate category `{}`", cat.name));
            }
            if !names.insert(cat.name.as_str()) {
                out.push(format!("{path}.name: `{}` clashes with another node name", cat.name));
            }
            if !(0.0..=1.0).contains(&cat.weight) {
                out.push(format!("{path}.weight: must lie in [0,1]"));
            }
            weight_sum += cat.weight;
            if let Some(t) = cat.thresholds {
                if !t.is_valid() {
                    out.push(format!("{path}.thresholds: must satisfy 0 < t1 < t2 < 1"));
                }
            }
            if cat.factors.is_empty() {
                out.push(format!("{path}.factors: at least one factor is required"));
            }
            let mut factor_sum = 0.0;
            for (fi, factor) in cat.factors.iter().enumerate() {
                let fpath = format!("{path}.factors[{fi}]");
                if !names.insert(factor.name.as_str()) {
                    out.push(format!("{fpath}.name: duplicate node name `{}`", factor.name));
                }
                if !(0.0..=1.0).contains(&factor.weight) {
                    out.push(format!("{fpath}.weight: must lie in [0,1]"));
                }
                factor_sum += factor.weight;
                if factor.states.len() < 2 {
                    out.push(format!("{fpath}.states: at least two states are required"));
                }
                let mut states = HashSet::new();
                for st in &factor.states {
                    if !states.insert(st.as_str()) {
                        out.push(format!("{fpath}.states: duplicate state `{st}`"));
                    }
                }
                let mut covered = HashSet::new();
                for (ri, rel) in factor.relationships.iter().enumerate() {
                    let rpath = format!("{fpath}.relationships[{ri}]");
                    if !states.contains(rel.state.as_str()) {
                        out.push(format!("{rpath}.state: unknown state `{}`", rel.state));
                    }
                    if !covered.insert(rel.state.as_str()) {
                        out.push(format!("{rpath}.state: second relationship for `{}`", rel.state));
                    }
                    if !(rel.scaling_factor > 0.0 && rel.scaling_factor.is_finite()) {
                        out.push(format!("{rpath}.scaling_factor: must be > 0"));
                    }
                    for (ei, ev) in rel.evidence.iter().enumerate() {
                        if ev.summary.trim().is_empty() {
                            out.push(format!("{rpath}.evidence[{ei}].summary: must be non-empty"));
                        }
                        if !keys.contains(ev.publication.as_str()) {
                            out.push(format!(
                                "{rpath}.evidence[{ei}].publication: unknown publication `{}`",
                                ev.publication
                            ));
                        }
                    }
                }
                for st in &factor.states {
                    if !covered.contains(st.as_str()) {
                        out.push(format!("{fpath}.relationships: no relationship for state `{st}`"));
                    }
                }
            }
            if !cat.factors.is_empty() && (factor_sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
                out.push(format!("{path}.factors: factor weights sum {} ≠ 1", round6(factor_sum)));
            }
        }
        if !self.categories.is_empty() && (weight_sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            out.push(format!("categories: category weights sum {} ≠ 1", round6(weight_sum)));
        }

        let mut bases = HashSet::new();
        for (ni, node) in self.sex_conditioned.iter().enumerate() {
            let path = format!("sex_conditioned[{ni}]");
            if !names.insert(node.name.as_str()) {
                out.push(format!("{path}.name: duplicate node name `{}`", node.name));
            }
            if !bases.insert(node.base_factor.as_str()) {
                out.push(format!("{path}.base_factor: `{}` already conditioned", node.base_factor));
            }
            if let Some(t) = node.thresholds {
                if !t.is_valid() {
                    out.push(format!("{path}.thresholds: must satisfy 0 < t1 < t2 < 1"));
                }
            }
            let cond = self.factor(&node.conditioning_factor);
            let base = self.factor(&node.base_factor);
            if cond.is_none() {
                out.push(format!("{path}.conditioning_factor: unknown factor `{}`", node.conditioning_factor));
            }
            if base.is_none() {
                out.push(format!("{path}.base_factor: unknown factor `{}`", node.base_factor));
            }
            let (Some(cond), Some(base)) = (cond, base) else { continue };
            if node.table.len() != cond.states.len() {
                out.push(format!("{path}.table: must cover exactly the states of `{}`", cond.name));
            }
            for cs in &cond.states {
                let Some(row) = node.table.get(cs) else {
                    out.push(format!("{path}.table: missing conditioning state `{cs}`"));
                    continue;
                };
                if row.len() != base.states.len() {
                    out.push(format!("{path}.table.{cs}: must cover exactly the states of `{}`", base.name));
                }
                for bs in &base.states {
                    match row.get(bs) {
                        None => out.push(format!("{path}.table.{cs}: missing state `{bs}`")),
                        Some(v) if !(*v > 0.0 && v.is_finite()) => {
                            out.push(format!("{path}.table.{cs}.{bs}: scaling factor must be > 0"))
                        }
                        _ => {}
                    }
                }
            }
        }
        out
    }

    /// Factors in document order.
    pub fn factors(&self) -> impl Iterator<Item = &RiskFactor> {
        self.categories.iter().flat_map(|c| c.factors.iter())
    }

    pub fn factor(&self, name: &str) -> Option<&RiskFactor> {
        self.factors().find(|f| f.name == name)
    }

    pub fn category_of(&self, factor: &str) -> Option<&FactorCategory> {
        self.categories
            .iter()
            .find(|c| c.factors.iter().any(|f| f.name == factor))
    }

    pub fn category(&self, name: CategoryName) -> Option<&FactorCategory> {
        self.categories.iter().find(|c| c.name == name)
    }

    pub fn sex_conditioned_for(&self, base_factor: &str) -> Option<&SexConditionedNode> {
        self.sex_conditioned.iter().find(|n| n.base_factor == base_factor)
    }

    pub fn publication(&self, key: &str) -> Option<&Publication> {
        self.publications.iter().find(|p| p.key == key)
    }

    /// Evidence attached to the relationship for `factor = state`.
    pub fn evidence_for(&self, factor: &str, state: &str) -> Result<Vec<EvidenceItem>> {
        let f = self
            .factor(factor)
            .ok_or_else(|| Error::Lookup(format!("unknown factor `{factor}`")))?;
        let rel = f
            .relationship(state)
            .ok_or_else(|| Error::Lookup(format!("unknown state `{state}` for factor `{factor}`")))?;
        rel.evidence
            .iter()
            .map(|e| {
                let publication = self.publication(&e.publication).cloned().ok_or_else(|| {
                    Error::Lookup(format!("unknown publication `{}`", e.publication))
                })?;
                Ok(EvidenceItem { summary: e.summary.clone(), publication })
            })
            .collect()
    }

    /// One row per factor, ordered by category name then factor name.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut rows: Vec<SummaryRow> = self
            .categories
            .iter()
            .flat_map(|c| {
                c.factors.iter().map(move |f| SummaryRow {
                    category: c.name,
                    factor: f.name.clone(),
                    weight: f.weight,
                    state_count: f.states.len(),
                    evidence_count: f.relationships.iter().map(|r| r.evidence.len()).sum(),
                })
            })
            .collect();
        rows.sort_by(|a, b| {
            a.category
                .as_str()
                .cmp(b.category.as_str())
                .then_with(|| a.factor.cmp(&b.factor))
        });
        rows
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("category,factor,weight,state_count,evidence_count\n");
        for r in self.summary() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.category, r.factor, r.weight, r.state_count, r.evidence_count
            ));
        }
        out
    }
}

/// Scaling factors normalised to a probability vector over the factor's states.
pub fn normalized_risks(factor: &RiskFactor) -> Vec<f64> {
    normalize(&factor.scaling_factors())
}

pub(crate) fn normalize(values: &[f64]) -> Vec<f64> {
    let total: f64 = values.iter().sum();
    values.iter().map(|v| v / total).collect()
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}
