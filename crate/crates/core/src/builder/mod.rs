//! Knowledge-driven, data-driven and hybrid network construction.

mod hill_climb;
mod params;
mod synthesis;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bn::{posterior, Cpt, DiscreteBayesNet, Evidence, Variable};
use crate::cohort::CohortTable;
use crate::error::{Error, Result};
use crate::knowledge::{normalize, normalized_risks, KnowledgeModel, SynthesisThresholds};

pub use hill_climb::{hill_climb, local_bic, BicScorer, HillClimbConfig, SearchResult, MIN_COMPLETE_ROWS};
pub use params::{data_risks_and_weights, fit_cpt, learn_priors, proportional_weights, DataDerived};
pub use synthesis::{
    band, category_parents, centred_thresholds, combinations, expected_risk, risk_distribution, knowledge_structure, score_risks, synthesize_conditioned_cpt,
    synthesize_cpt, target_cpt, ConditionedSpec, SynthesisSpec, SYNTHESIS_STATES,
};

pub const PROVENANCE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuildMode {
    Knowledge,
    Data,
    Hybrid,
}

impl BuildMode {
    pub const ALL: [BuildMode; 3] = [BuildMode::Knowledge, BuildMode::Data, BuildMode::Hybrid];

    pub fn as_str(self) -> &'static str {
        match self {
            BuildMode::Knowledge => "knowledge",
            BuildMode::Data => "data",
            BuildMode::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for BuildMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BuildMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown build mode `{s}` (expected knowledge, data or hybrid)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildConfig {
    pub mode: BuildMode,
    pub laplace_alpha: f64,
    pub seed: u64,
    pub hill_climb: HillClimbConfig,
    /// Applies to every synthesis node unless a per-node override exists.
    pub thresholds: Option<SynthesisThresholds>,
    pub node_thresholds: BTreeMap<String, SynthesisThresholds>,
}

impl BuildConfig {
    pub fn new(mode: BuildMode) -> Self {
        Self {
            mode,
            laplace_alpha: 1.0,
            seed: 42,
            hill_climb: HillClimbConfig::default(),
            thresholds: None,
            node_thresholds: BTreeMap::new(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn check(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.laplace_alpha >= 0.0 && self.laplace_alpha.is_finite()) {
            problems.push(format!("laplace_alpha must be ≥ 0 (got {})", self.laplace_alpha));
        }
        for (node, t) in self.thresholds.iter().map(|t| ("*", t)).chain(
            self.node_thresholds.iter().map(|(n, t)| (n.as_str(), t)),
        ) {
            if !t.is_valid() {
                problems.push(format!("thresholds for `{node}` must satisfy 0 < t1 < t2 < 1"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    /// Per-node override, then global override, then the document value, then
    /// a band 10% either side of the prior-expected risk.
    fn thresholds_for(&self, node: &str, document: Option<SynthesisThresholds>, points: &[(f64, f64)]) -> SynthesisThresholds {
        self.node_thresholds
            .get(node)
            .copied()
            .or(self.thresholds)
            .or(document)
            .unwrap_or_else(|| centred_thresholds(mean_risk(points)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CptOrigin {
    Knowledge,
    Learned,
    Synthesized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeProvenance {
    pub node: String,
    pub origin: CptOrigin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthesis: Option<SynthesisSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditioned: Option<ConditionedSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_weights: Option<Vec<f64>>,
}

impl NodeProvenance {
    fn plain(node: impl Into<String>, origin: CptOrigin) -> Self {
        Self {
            node: node.into(),
            origin,
            synthesis: None,
            conditioned: None,
            target_weights: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSummary {
    pub initial_score: f64,
    pub score: f64,
    pub trace: Vec<f64>,
}

/// Sidecar describing how a network was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: u32,
    pub mode: BuildMode,
    pub seed: u64,
    pub laplace_alpha: f64,
    pub knowledge_version: u32,
    pub target: String,
    pub target_present: String,
    pub n_train: usize,
    pub train_ids: Vec<String>,
    pub nodes: Vec<NodeProvenance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl Provenance {
    pub fn node(&self, name: &str) -> Option<&NodeProvenance> {
        self.nodes.iter().find(|n| n.node == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuiltModel {
    pub net: DiscreteBayesNet,
    pub provenance: Provenance,
}

/// `model.json` → `model.provenance.json`.
pub fn provenance_path(model_path: &Path) -> PathBuf {
    let stem = model_path.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    model_path.with_file_name(format!("{stem}.provenance.json"))
}

impl BuiltModel {
    pub fn target(&self) -> &str {
        &self.provenance.target
    }

    /// `P(target = present | evidence)`.
    pub fn p_present(&self, evidence: &Evidence) -> Result<f64> {
        let post = posterior(&self.net, evidence, &self.provenance.target)?;
        Ok(post.p(&self.provenance.target_present).expect("target has a present state"))
    }

    /// Target state reported for `p`: present when `p ≥ 0.5`.
    pub fn classification(&self, p: f64) -> &str {
        if crate::eval::classify(p) {
            return &self.provenance.target_present;
        }
        self.net
            .variable(&self.provenance.target)
            .and_then(|v| v.states.iter().find(|s| **s != self.provenance.target_present))
            .map_or("absent", String::as_str)
    }

    /// Category and sex-conditioned nodes, in build order.
    pub fn synthesis_nodes(&self) -> Vec<&str> {
        self.provenance
            .nodes
            .iter()
            .filter(|n| n.synthesis.is_some() || n.conditioned.is_some())
            .map(|n| n.node.as_str())
            .collect()
    }

    pub fn provenance_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.provenance)?)
    }

    /// Writes the network to `path` and the provenance next to it.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.net.save(path)?;
        std::fs::write(provenance_path(path), self.provenance_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let net = DiscreteBayesNet::load(path)?;
        let text = std::fs::read_to_string(provenance_path(path))?;
        let provenance: Provenance = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
        let model = Self { net, provenance };
        model.check()?;
        Ok(model)
    }

    /// Network validity plus one provenance entry per CPT.
    pub fn check(&self) -> Result<()> {
        let mut problems: Vec<String> = self.net.validate().iter().map(ToString::to_string).collect();
        for cpt in &self.net.cpts {
            let n = self.provenance.nodes.iter().filter(|p| p.node == cpt.child).count();
            if n != 1 {
                problems.push(format!("CPT `{}` has {n} provenance entries", cpt.child));
            }
        }
        if self.net.variable(&self.provenance.target).is_none() {
            problems.push(format!("target `{}` is not in the network", self.provenance.target));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }
}

/// Synthesis inputs for every non-root node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpecs {
    pub conditioned: Vec<ConditionedSpec>,
    pub categories: Vec<SynthesisSpec>,
    pub target_weights: Vec<f64>,
}

/// Root marginals by variable name, used to place automatic thresholds.
pub type Priors = BTreeMap<String, Vec<f64>>;

/// Knowledge-driven specs: risks from scaling factors, weights from the document.
pub fn knowledge_specs(model: &KnowledgeModel, priors: &Priors, config: &BuildConfig) -> NodeSpecs {
    let conditioned: Vec<ConditionedSpec> = model
        .sex_conditioned
        .iter()
        .map(|node| {
            let cond = model.factor(&node.conditioning_factor).expect("validated model");
            let base = model.factor(&node.base_factor).expect("validated model");
            let risks = cond
                .states
                .iter()
                .map(|c| normalize(&base.states.iter().map(|b| node.table[c][b]).collect::<Vec<_>>()))
                .collect();
            conditioned_spec(node.name.clone(), cond.name.clone(), base.name.clone(), risks, node.thresholds, priors, config)
        })
        .collect();
    let categories = model
        .categories
        .iter()
        .map(|c| {
            let risks = c
                .factors
                .iter()
                .map(|f| match model.sex_conditioned_for(&f.name) {
                    Some(_) => score_risks(&model.target_scores),
                    None => normalized_risks(f),
                })
                .collect();
            let weights = c.factors.iter().map(|f| f.weight).collect();
            category_spec(model, c, weights, risks, &conditioned, priors, config)
        })
        .collect();
    let target_weights = model.categories.iter().map(|c| c.weight).collect();
    NodeSpecs { conditioned, categories, target_weights }
}

/// Same structure as [`knowledge_specs`] with risks and weights from data.
pub fn hybrid_specs(model: &KnowledgeModel, data: &DataDerived, priors: &Priors, config: &BuildConfig) -> NodeSpecs {
    let conditioned: Vec<ConditionedSpec> = model
        .sex_conditioned
        .iter()
        .map(|node| {
            conditioned_spec(
                node.name.clone(),
                node.conditioning_factor.clone(),
                node.base_factor.clone(),
                data.conditioned_risks[&node.name].clone(),
                node.thresholds,
                priors,
                config,
            )
        })
        .collect();
    let categories = model
        .categories
        .iter()
        .map(|c| {
            let risks = c
                .factors
                .iter()
                .map(|f| match model.sex_conditioned_for(&f.name) {
                    Some(_) => score_risks(&model.target_scores),
                    None => data.risks[&f.name].clone(),
                })
                .collect();
            let weights = data.factor_weights[c.name.as_str()].clone();
            category_spec(model, c, weights, risks, &conditioned, priors, config)
        })
        .collect();
    NodeSpecs {
        conditioned,
        categories,
        target_weights: data.category_weights.clone(),
    }
}

fn prior_or_uniform(priors: &Priors, name: &str, k: usize) -> Vec<f64> {
    priors.get(name).filter(|p| p.len() == k).cloned().unwrap_or_else(|| vec![1.0 / k as f64; k])
}

fn conditioned_spec(
    node: String,
    conditioning: String,
    base: String,
    risks: Vec<Vec<f64>>,
    document: Option<SynthesisThresholds>,
    priors: &Priors,
    config: &BuildConfig,
) -> ConditionedSpec {
    let pc = prior_or_uniform(priors, &conditioning, risks.len());
    let pb = prior_or_uniform(priors, &base, risks.first().map_or(1, Vec::len));
    let points: Vec<(f64, f64)> = pc
        .iter()
        .zip(&risks)
        .flat_map(|(c, r)| r.iter().zip(&pb).map(move |(x, b)| (*x, c * b)))
        .collect();
    let thresholds = config.thresholds_for(&node, document, &points);
    ConditionedSpec { node, conditioning, base, risks, thresholds }
}

/// Distribution over (low, medium, high) of a conditioned node under the priors.
pub fn conditioned_marginal(spec: &ConditionedSpec, priors: &Priors) -> Vec<f64> {
    let pc = prior_or_uniform(priors, &spec.conditioning, spec.risks.len());
    let pb = prior_or_uniform(priors, &spec.base, spec.risks.first().map_or(1, Vec::len));
    let mut out = vec![0.0; 3];
    for (c, r) in pc.iter().zip(&spec.risks) {
        for (b, x) in pb.iter().zip(r) {
            out[band(*x, &spec.thresholds)] += c * b;
        }
    }
    out
}

fn mean_risk(points: &[(f64, f64)]) -> f64 {
    points.iter().map(|(r, p)| r * p).sum::<f64>() / points.iter().map(|x| x.1).sum::<f64>()
}

fn category_spec(
    model: &KnowledgeModel,
    category: &crate::knowledge::FactorCategory,
    weights: Vec<f64>,
    risks: Vec<Vec<f64>>,
    conditioned: &[ConditionedSpec],
    priors: &Priors,
    config: &BuildConfig,
) -> SynthesisSpec {
    let node = category.name.as_str().to_string();
    let parents = category_parents(model, category);
    let dists: Vec<Vec<f64>> = parents
        .iter()
        .zip(&risks)
        .map(|(p, r)| match conditioned.iter().find(|c| &c.node == p) {
            Some(c) => conditioned_marginal(c, priors),
            None => prior_or_uniform(priors, p, r.len()),
        })
        .collect();
    let points = risk_distribution(&weights, &risks, &dists);
    let thresholds = config.thresholds_for(&node, category.thresholds, &points);
    SynthesisSpec { node, parents, weights, risks, thresholds }
}

fn train_ids(cohort: &CohortTable) -> Vec<String> {
    let mut ids: Vec<String> = cohort.rows.iter().map(|r| r.patient_id.clone()).collect();
    ids.sort();
    ids
}

/// Builds a network from a knowledge model and training rows.
pub fn build(model: &KnowledgeModel, train: &CohortTable, config: &BuildConfig) -> Result<BuiltModel> {
    config.check()?;
    if train.is_empty() {
        return Err(Error::InsufficientData("training cohort is empty".into()));
    }
    let mut provenance = Provenance {
        version: PROVENANCE_FORMAT_VERSION,
        mode: config.mode,
        seed: config.seed,
        laplace_alpha: config.laplace_alpha,
        knowledge_version: model.version,
        target: model.target.name.clone(),
        target_present: model.target.present().to_string(),
        n_train: train.len(),
        train_ids: train_ids(train),
        nodes: Vec::new(),
        search: None,
        warnings: Vec::new(),
    };

    let net = match config.mode {
        BuildMode::Knowledge | BuildMode::Hybrid => {
            let mut net = knowledge_structure(model);
            let (root_cpts, warnings) = learn_priors(train, &net, config.laplace_alpha)?;
            provenance.warnings.extend(warnings);
            let priors: Priors = root_cpts.iter().map(|c| (c.child.clone(), c.rows[0].clone())).collect();
            for cpt in root_cpts {
                provenance.nodes.push(NodeProvenance::plain(&cpt.child, CptOrigin::Learned));
                net.set_cpt(cpt);
            }
            let NodeSpecs { conditioned, categories, target_weights } = if config.mode == BuildMode::Knowledge {
                knowledge_specs(model, &priors, config)
            } else {
                let data = data_risks_and_weights(train, model, config.laplace_alpha)?;
                provenance.warnings.extend(data.warnings.iter().cloned());
                hybrid_specs(model, &data, &priors, config)
            };
            for spec in conditioned {
                net.set_cpt(synthesize_conditioned_cpt(&spec));
                provenance.nodes.push(NodeProvenance {
                    conditioned: Some(spec.clone()),
                    ..NodeProvenance::plain(&spec.node, CptOrigin::Synthesized)
                });
            }
            for spec in categories {
                let problems = spec.violations();
                if !problems.is_empty() {
                    return Err(Error::Validation(problems));
                }
                net.set_cpt(synthesize_cpt(&spec));
                provenance.nodes.push(NodeProvenance {
                    synthesis: Some(spec.clone()),
                    ..NodeProvenance::plain(&spec.node, CptOrigin::Synthesized)
                });
            }
            let parents: Vec<String> = model.categories.iter().map(|c| c.name.as_str().to_string()).collect();
            net.set_cpt(target_cpt(model, &parents, &target_weights)?);
            let origin = if config.mode == BuildMode::Knowledge {
                CptOrigin::Knowledge
            } else {
                CptOrigin::Synthesized
            };
            provenance.nodes.push(NodeProvenance {
                target_weights: Some(target_weights),
                ..NodeProvenance::plain(&model.target.name, origin)
            });
            net
        }
        BuildMode::Data => {
            let (net, search) = data_network(model, train, config)?;
            for cpt in &net.cpts {
                provenance.nodes.push(NodeProvenance::plain(&cpt.child, CptOrigin::Learned));
            }
            provenance.search = Some(search);
            net
        }
    };

    let built = BuiltModel { net, provenance };
    built.check()?;
    Ok(built)
}

/// Knowledge-mode AF network with priors from the default synthetic cohort.
pub fn shipped_model() -> Result<BuiltModel> {
    let cohort = crate::synth::generate_cohort(&crate::synth::GeneratorSpec::default_af())?;
    build(&KnowledgeModel::atrial_fibrillation(), &cohort, &BuildConfig::new(BuildMode::Knowledge))
}

/// Variables plus one row of state codes per patient, `None` where missing.
pub type Encoded = (Vec<Variable>, Vec<Vec<Option<usize>>>);

/// Factor columns plus the label as integer codes, `None` where missing.
pub fn encode(model: &KnowledgeModel, cohort: &CohortTable) -> Result<Encoded> {
    let mut variables: Vec<Variable> = model
        .factors()
        .map(|f| Variable::new(f.name.clone(), f.states.iter().cloned()))
        .collect();
    let cols: Vec<usize> = variables
        .iter()
        .map(|v| {
            cohort
                .column(&v.name)
                .ok_or_else(|| Error::Lookup(format!("cohort has no column `{}`", v.name)))
        })
        .collect::<Result<_>>()?;
    let rows = cohort
        .rows
        .iter()
        .map(|row| {
            let mut codes: Vec<Option<usize>> = variables
                .iter()
                .zip(&cols)
                .map(|(v, &c)| row.values[c].as_deref().and_then(|s| v.state_index(s)))
                .collect();
            codes.push(Some(usize::from(row.label.min(1))));
            codes
        })
        .collect();
    variables.push(Variable::new(model.target.name.clone(), model.target.states.iter().cloned()));
    Ok((variables, rows))
}

fn data_network(model: &KnowledgeModel, train: &CohortTable, config: &BuildConfig) -> Result<(DiscreteBayesNet, SearchSummary)> {
    let (variables, rows) = encode(model, train)?;
    let cards: Vec<usize> = variables.iter().map(Variable::cardinality).collect();
    let names: Vec<String> = variables.iter().map(|v| v.name.clone()).collect();
    let complete: Vec<Vec<usize>> = rows
        .iter()
        .filter_map(|r| r.iter().copied().collect::<Option<Vec<usize>>>())
        .collect();
    let result = hill_climb(&complete, &cards, &names, config.laplace_alpha, config.seed, &config.hill_climb)?;

    let mut net = DiscreteBayesNet::new();
    for v in &variables {
        net.add_variable(v.clone());
    }
    for (p, c) in result.edges() {
        net.add_edge(names[p].clone(), names[c].clone());
    }
    for (child, parents) in result.parents.iter().enumerate() {
        net.set_cpt(Cpt {
            child: names[child].clone(),
            parents: parents.iter().map(|&p| names[p].clone()).collect(),
            rows: fit_cpt(&rows, &cards, child, parents, config.laplace_alpha),
        });
    }
    Ok((
        net,
        SearchSummary {
            initial_score: result.initial_score,
            score: result.score,
            trace: result.trace,
        },
    ))
}
