//! Discrete Bayesian networks: representation, validation, and exact inference.
//!
//! A [`DiscreteBayesNet`] is plain data so that malformed networks can be
//! loaded and inspected; [`DiscreteBayesNet::validate`] reports every
//! violation. Inference entry points validate first and refuse invalid nets.

mod factor;
mod inference;
mod json;

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use factor::Factor;
pub use inference::{
    elimination_order, joint_enumerate, joint_enumerate_capped, posterior, posterior_with_order,
    DEFAULT_ORACLE_CAP,
};
pub use json::{NetworkDocument, NETWORK_FORMAT_VERSION};

/// Row sums must be within this distance of 1.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub states: Vec<String>,
}

impl Variable {
    pub fn new<S: Into<String>>(name: impl Into<String>, states: impl IntoIterator<Item = S>) -> Self {
        Self {
            name: name.into(),
            states: states.into_iter().map(Into::into).collect(),
        }
    }

    pub fn cardinality(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, state: &str) -> Option<usize> {
        self.states.iter().position(|s| s == state)
    }
}

/// Conditional probability table.
///
/// `rows` is dense: one probability vector per parent-state combination, in
/// mixed-radix order over `parents` with the last parent varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    pub child: String,
    pub parents: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Cpt {
    pub fn root(child: impl Into<String>, prior: Vec<f64>) -> Self {
        Self {
            child: child.into(),
            parents: Vec::new(),
            rows: vec![prior],
        }
    }
}

/// Observed hard assignments, variable name to state label.
pub type Evidence = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub variable: String,
    pub states: Vec<String>,
    pub distribution: Vec<f64>,
}

impl Posterior {
    pub fn p(&self, state: &str) -> Option<f64> {
        self.states
            .iter()
            .position(|s| s == state)
            .map(|i| self.distribution[i])
    }
}

/// One reason a network fails validation.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Cycle { path: Vec<String> },
    DuplicateEdge { parent: String, child: String },
    DuplicateVariable { name: String },
    TooFewStates { variable: String },
    DuplicateState { variable: String, state: String },
    UnknownVariable { name: String },
    MissingCpt { variable: String },
    DuplicateCpt { variable: String },
    ParentMismatch { child: String, graph: Vec<String>, cpt: Vec<String> },
    RowCount { child: String, expected: usize, found: usize },
    RowLength { child: String, row: usize, expected: usize, found: usize },
    NegativeProbability { child: String, row: usize },
    RowSum { child: String, row: usize, sum: f64 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Cycle { path } => write!(f, "cycle: {}", path.join(" -> ")),
            Violation::DuplicateEdge { parent, child } => {
                write!(f, "duplicate edge {parent} -> {child}")
            }
            Violation::DuplicateVariable { name } => write!(f, "duplicate variable `{name}`"),
            Violation::TooFewStates { variable } => {
                write!(f, "variable `{variable}` has fewer than 2 states")
            }
            Violation::DuplicateState { variable, state } => {
                write!(f, "variable `{variable}` repeats state `{state}`")
            }
            Violation::UnknownVariable { name } => write!(f, "unknown variable `{name}`"),
            Violation::MissingCpt { variable } => write!(f, "no CPT for `{variable}`"),
            Violation::DuplicateCpt { variable } => write!(f, "more than one CPT for `{variable}`"),
            Violation::ParentMismatch { child, graph, cpt } => write!(
                f,
                "CPT parents of `{child}` [{}] do not match graph parents [{}]",
                cpt.join(", "),
                graph.join(", ")
            ),
            Violation::RowCount { child, expected, found } => {
                write!(f, "CPT `{child}` has {found} rows, expected {expected}")
            }
            Violation::RowLength { child, row, expected, found } => write!(
                f,
                "CPT `{child}` row {row} has {found} entries, expected {expected}"
            ),
            Violation::NegativeProbability { child, row } => {
                write!(f, "CPT `{child}` row {row} has a negative or non-finite entry")
            }
            Violation::RowSum { child, row, sum } => {
                write!(f, "CPT `{child}` row {row}: row sum {sum} ≠ 1")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiscreteBayesNet {
    pub variables: Vec<Variable>,
    pub edges: Vec<(String, String)>,
    pub cpts: Vec<Cpt>,
}

impl DiscreteBayesNet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(&mut self, variable: Variable) -> &mut Self {
        self.variables.push(variable);
        self
    }

    pub fn add_edge(&mut self, parent: impl Into<String>, child: impl Into<String>) -> &mut Self {
        self.edges.push((parent.into(), child.into()));
        self
    }

    /// Inserts or replaces the CPT for `cpt.child`.
    pub fn set_cpt(&mut self, cpt: Cpt) -> &mut Self {
        match self.cpts.iter_mut().find(|c| c.child == cpt.child) {
            Some(slot) => *slot = cpt,
            None => self.cpts.push(cpt),
        }
        self
    }

    pub fn variable(&self, name: &str) -> Option<&Variable> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn cpt(&self, child: &str) -> Option<&Cpt> {
        self.cpts.iter().find(|c| c.child == child)
    }

    /// Graph parents of `child`, in edge insertion order.
    pub fn parents(&self, child: &str) -> Vec<&str> {
        self.edges
            .iter()
            .filter(|(_, c)| c == child)
            .map(|(p, _)| p.as_str())
            .collect()
    }

    /// Variables without parents.
    pub fn roots(&self) -> Vec<&str> {
        self.variables
            .iter()
            .filter(|v| !self.edges.iter().any(|(_, c)| c == &v.name))
            .map(|v| v.name.as_str())
            .collect()
    }

    /// Returns every violation; an empty list means the network is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut names = HashSet::new();
        for v in &self.variables {
            if !names.insert(v.name.as_str()) {
                out.push(Violation::DuplicateVariable { name: v.name.clone() });
            }
            if v.states.len() < 2 {
                out.push(Violation::TooFewStates { variable: v.name.clone() });
            }
            let mut seen = HashSet::new();
            for s in &v.states {
                if !seen.insert(s) {
                    out.push(Violation::DuplicateState {
                        variable: v.name.clone(),
                        state: s.clone(),
                    });
                }
            }
        }

        let mut edge_set = HashSet::new();
        for (p, c) in &self.edges {
            for n in [p, c] {
                if !names.contains(n.as_str()) {
                    out.push(Violation::UnknownVariable { name: n.clone() });
                }
            }
            if !edge_set.insert((p.as_str(), c.as_str())) {
                out.push(Violation::DuplicateEdge {
                    parent: p.clone(),
                    child: c.clone(),
                });
            }
        }

        if let Some(path) = self.find_cycle() {
            out.push(Violation::Cycle { path });
        }

        let mut cpt_count: HashMap<&str, usize> = HashMap::new();
        for cpt in &self.cpts {
            *cpt_count.entry(cpt.child.as_str()).or_default() += 1;
            if !names.contains(cpt.child.as_str()) {
                out.push(Violation::UnknownVariable { name: cpt.child.clone() });
            }
        }
        for v in &self.variables {
            match cpt_count.get(v.name.as_str()) {
                None => out.push(Violation::MissingCpt { variable: v.name.clone() }),
                Some(n) if *n > 1 => out.push(Violation::DuplicateCpt { variable: v.name.clone() }),
                _ => {}
            }
        }

        for cpt in &self.cpts {
            let Some(child) = self.variable(&cpt.child) else { continue };
            let mut graph_parents: Vec<String> =
                self.parents(&cpt.child).into_iter().map(String::from).collect();
            let mut cpt_parents = cpt.parents.clone();
            graph_parents.sort();
            graph_parents.dedup();
            cpt_parents.sort();
            if graph_parents != cpt_parents || cpt.parents.len() != cpt_parents.iter().collect::<HashSet<_>>().len() {
                out.push(Violation::ParentMismatch {
                    child: cpt.child.clone(),
                    graph: graph_parents,
                    cpt: cpt.parents.clone(),
                });
                continue;
            }
            let expected_rows: usize = cpt
                .parents
                .iter()
                .map(|p| self.variable(p).map_or(1, Variable::cardinality))
                .product();
            if cpt.rows.len() != expected_rows {
                out.push(Violation::RowCount {
                    child: cpt.child.clone(),
                    expected: expected_rows,
                    found: cpt.rows.len(),
                });
            }
            for (i, row) in cpt.rows.iter().enumerate() {
                if row.len() != child.cardinality() {
                    out.push(Violation::RowLength {
                        child: cpt.child.clone(),
                        row: i,
                        expected: child.cardinality(),
                        found: row.len(),
                    });
                    continue;
                }
                if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    out.push(Violation::NegativeProbability { child: cpt.child.clone(), row: i });
                    continue;
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                    out.push(Violation::RowSum { child: cpt.child.clone(), row: i, sum });
                }
            }
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    pub(crate) fn ensure_valid(&self) -> Result<()> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidNetwork(violations.iter().map(ToString::to_string).collect()))
        }
    }

    /// Checks evidence against the network's variables and states.
    pub fn check_evidence(&self, evidence: &Evidence) -> Result<()> {
        for (name, state) in evidence {
            let var = self
                .variable(name)
                .ok_or_else(|| Error::UnknownVariable(name.clone()))?;
            if var.state_index(state).is_none() {
                return Err(Error::InvalidState {
                    variable: name.clone(),
                    state: state.clone(),
                    valid: var.states.clone(),
                });
            }
        }
        Ok(())
    }

    /// Variable names in a topological order, or `None` if the graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<String>> {
        let mut indegree: BTreeMap<&str, usize> =
            self.variables.iter().map(|v| (v.name.as_str(), 0)).collect();
        for (_, c) in &self.edges {
            if let Some(d) = indegree.get_mut(c.as_str()) {
                *d += 1;
            }
        }
        let mut ready: Vec<&str> = self
            .variables
            .iter()
            .map(|v| v.name.as_str())
            .filter(|n| indegree[n] == 0)
            .collect();
        ready.reverse();
        let mut order = Vec::with_capacity(self.variables.len());
        while let Some(n) = ready.pop() {
            order.push(n.to_string());
            for (p, c) in &self.edges {
                if p == n {
                    if let Some(d) = indegree.get_mut(c.as_str()) {
                        *d -= 1;
                        if *d == 0 {
                            ready.push(c.as_str());
                        }
                    }
                }
            }
        }
        (order.len() == self.variables.len()).then_some(order)
    }

    fn find_cycle(&self) -> Option<Vec<String>> {
        // Colour-marking DFS; returns the first cycle found as a closed path.
        let mut adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (p, c) in &self.edges {
            adj.entry(p.as_str()).or_default().push(c.as_str());
        }
        let mut colour: HashMap<&str, u8> = HashMap::new();
        let mut stack: Vec<&str> = Vec::new();

        fn visit<'a>(
            node: &'a str,
            adj: &BTreeMap<&'a str, Vec<&'a str>>,
            colour: &mut HashMap<&'a str, u8>,
            stack: &mut Vec<&'a str>,
        ) -> Option<Vec<String>> {
            colour.insert(node, 1);
            stack.push(node);
            for &next in adj.get(node).map(Vec::as_slice).unwrap_or(&[]) {
                match colour.get(next).copied().unwrap_or(0) {
                    1 => {
                        let start = stack.iter().position(|n| *n == next).unwrap_or(0);
                        let mut path: Vec<String> =
                            stack[start..].iter().map(|s| s.to_string()).collect();
                        path.push(next.to_string());
                        return Some(path);
                    }
                    0 => {
                        if let Some(p) = visit(next, adj, colour, stack) {
                            return Some(p);
                        }
                    }
                    _ => {}
                }
            }
            stack.pop();
            colour.insert(node, 2);
            None
        }

        let nodes: Vec<&str> = adj.keys().copied().collect();
        for n in nodes {
            if colour.get(n).copied().unwrap_or(0) == 0 {
                if let Some(p) = visit(n, &adj, &mut colour, &mut stack) {
                    return Some(p);
                }
            }
        }
        None
    }
}
