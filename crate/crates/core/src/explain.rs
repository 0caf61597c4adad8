//! Per-prediction factor contributions with literature citations.
//!
//! A contribution is the leave-one-out shift
//! `P(present | E) − P(present | E without e)` for each observed item `e`.

use serde::{Deserialize, Serialize};

use crate::bn::Evidence;
use crate::builder::{BuildMode, BuiltModel};
use crate::cohort::{CohortTable, PatientFeatures};
use crate::error::Result;
use crate::knowledge::KnowledgeModel;

pub const NO_RECORDED_EVIDENCE: &str = "no recorded evidence";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Citation {
    pub title: String,
    pub identifier: String,
    pub year: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub factor: String,
    pub state: String,
    pub delta: f64,
    pub citations: Vec<Citation>,
    /// Set to [`NO_RECORDED_EVIDENCE`] when `citations` is empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRef {
    /// Knowledge-model version the network was built from.
    pub version: u32,
    pub mode: BuildMode,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub patient: Option<String>,
    pub p_present: f64,
    pub classification: String,
    pub contributions: Vec<Contribution>,
    pub model: ModelRef,
}

impl RiskReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Citations for `factor = state`; empty when the knowledge model has no
/// relationship for the pair.
pub fn citations(knowledge: &KnowledgeModel, factor: &str, state: &str) -> Vec<Citation> {
    knowledge
        .evidence_for(factor, state)
        .unwrap_or_default()
        .into_iter()
        .map(|e| Citation {
            title: e.publication.title,
            identifier: e.publication.identifier,
            year: e.publication.year,
        })
        .collect()
}

/// Leave-one-out contributions, sorted by `|delta|` descending then factor name.
pub fn contributions(built: &BuiltModel, knowledge: &KnowledgeModel, evidence: &Evidence) -> Result<Vec<Contribution>> {
    built.net.check_evidence(evidence)?;
    if evidence.is_empty() {
        return Ok(Vec::new());
    }
    let full = built.p_present(evidence)?;
    let mut out = Vec::with_capacity(evidence.len());
    for (factor, state) in evidence {
        let mut rest = evidence.clone();
        rest.remove(factor);
        let delta = full - built.p_present(&rest)?;
        let citations = citations(knowledge, factor, state);
        let note = citations.is_empty().then(|| NO_RECORDED_EVIDENCE.to_string());
        out.push(Contribution {
            factor: factor.clone(),
            state: state.clone(),
            delta,
            citations,
            note,
        });
    }
    out.sort_by(|a, b| b.delta.abs().total_cmp(&a.delta.abs()).then_with(|| a.factor.cmp(&b.factor)));
    Ok(out)
}

pub fn report_for_evidence(
    built: &BuiltModel,
    knowledge: &KnowledgeModel,
    patient: Option<&str>,
    evidence: &Evidence,
) -> Result<RiskReport> {
    let contributions = contributions(built, knowledge, evidence)?;
    let p_present = built.p_present(evidence)?;
    Ok(RiskReport {
        patient: patient.map(str::to_string),
        p_present,
        classification: built.classification(p_present).to_string(),
        contributions,
        model: ModelRef {
            version: built.provenance.knowledge_version,
            mode: built.provenance.mode,
            seed: built.provenance.seed,
        },
    })
}

/// Report for one cohort row; missing features are left out of the evidence.
pub fn report(built: &BuiltModel, knowledge: &KnowledgeModel, cohort: &CohortTable, row: &PatientFeatures) -> Result<RiskReport> {
    report_for_evidence(built, knowledge, Some(&row.patient_id), &cohort.evidence(row))
}
