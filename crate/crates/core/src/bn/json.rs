//! Versioned JSON document for networks.
//!
//! ```json
//! {"version":1,
//!  "variables":[{"name":"A","states":["t","f"]}],
//!  "edges":[["A","B"]],
//!  "cpts":[{"child":"B","parents":["A"],"rows":[{"given":{"A":"t"},"p":[0.9,0.1]}]}]}
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Cpt, DiscreteBayesNet, Variable};
use crate::error::{Error, Result};

pub const NETWORK_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDocument {
    pub version: u32,
    pub variables: Vec<Variable>,
    pub edges: Vec<(String, String)>,
    pub cpts: Vec<CptDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CptDocument {
    pub child: String,
    pub parents: Vec<String>,
    pub rows: Vec<RowDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowDocument {
    pub given: BTreeMap<String, String>,
    pub p: Vec<f64>,
}

impl NetworkDocument {
    pub fn from_net(net: &DiscreteBayesNet) -> Result<Self> {
        let cpts = net
            .cpts
            .iter()
            .map(|cpt| {
                let parents: Vec<&Variable> = cpt
                    .parents
                    .iter()
                    .map(|p| net.variable(p).ok_or_else(|| Error::UnknownVariable(p.clone())))
                    .collect::<Result<_>>()?;
                let rows = cpt
                    .rows
                    .iter()
                    .enumerate()
                    .map(|(i, p)| RowDocument {
                        given: decode_row(i, &parents),
                        p: p.clone(),
                    })
                    .collect();
                Ok(CptDocument {
                    child: cpt.child.clone(),
                    parents: cpt.parents.clone(),
                    rows,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            version: NETWORK_FORMAT_VERSION,
            variables: net.variables.clone(),
            edges: net.edges.clone(),
            cpts,
        })
    }

    /// Converts to a network, placing each row by its `given` assignment.
    /// Structural problems (missing or duplicate rows) are errors here; the
    /// remaining checks are left to [`DiscreteBayesNet::validate`].
    pub fn into_net(self) -> Result<DiscreteBayesNet> {
        if self.version != NETWORK_FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported network format version {} (expected {NETWORK_FORMAT_VERSION})",
                self.version
            )));
        }
        let mut net = DiscreteBayesNet {
            variables: self.variables,
            edges: self.edges,
            cpts: Vec::new(),
        };
        let mut problems = Vec::new();
        for (ci, doc) in self.cpts.into_iter().enumerate() {
            let parents: Vec<&Variable> = match doc
                .parents
                .iter()
                .map(|p| net.variable(p).ok_or_else(|| p.clone()))
                .collect::<std::result::Result<_, _>>()
            {
                Ok(p) => p,
                Err(missing) => {
                    problems.push(format!("cpts[{ci}].parents: unknown variable `{missing}`"));
                    continue;
                }
            };
            let n_rows: usize = parents.iter().map(|v| v.cardinality()).product();
            let mut rows: Vec<Option<Vec<f64>>> = vec![None; n_rows];
            for (ri, row) in doc.rows.into_iter().enumerate() {
                match encode_row(&row.given, &parents) {
                    Ok(idx) if rows[idx].is_none() => rows[idx] = Some(row.p),
                    Ok(_) => problems.push(format!("cpts[{ci}].rows[{ri}]: duplicate parent combination")),
                    Err(e) => problems.push(format!("cpts[{ci}].rows[{ri}]: {e}")),
                }
            }
            if let Some(missing) = rows.iter().position(Option::is_none) {
                problems.push(format!(
                    "cpts[{ci}] ({}): missing row for {:?}",
                    doc.child,
                    decode_row(missing, &parents)
                ));
                continue;
            }
            let cpt = Cpt {
                child: doc.child,
                parents: doc.parents,
                rows: rows.into_iter().map(Option::unwrap).collect(),
            };
            net.cpts.push(cpt);
        }
        if problems.is_empty() {
            Ok(net)
        } else {
            Err(Error::Validation(problems))
        }
    }
}

fn decode_row(mut index: usize, parents: &[&Variable]) -> BTreeMap<String, String> {
    let mut given = BTreeMap::new();
    for var in parents.iter().rev() {
        let card = var.cardinality();
        given.insert(var.name.clone(), var.states[index % card].clone());
        index /= card;
    }
    given
}

fn encode_row(given: &BTreeMap<String, String>, parents: &[&Variable]) -> std::result::Result<usize, String> {
    if given.len() != parents.len() {
        return Err(format!("expected {} parent assignments, found {}", parents.len(), given.len()));
    }
    let mut idx = 0;
    for var in parents {
        let state = given
            .get(&var.name)
            .ok_or_else(|| format!("missing assignment for parent `{}`", var.name))?;
        let s = var
            .state_index(state)
            .ok_or_else(|| format!("invalid state `{state}` for `{}`", var.name))?;
        idx = idx * var.cardinality() + s;
    }
    Ok(idx)
}

impl DiscreteBayesNet {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&NetworkDocument::from_net(self)?)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: NetworkDocument =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        doc.into_net()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
