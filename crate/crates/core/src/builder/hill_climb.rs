//! Greedy hill climbing over DAGs scored by BIC.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Complete-case rows needed before a structure search is attempted.
pub const MIN_COMPLETE_ROWS: usize = 50;

const MIN_GAIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HillClimbConfig {
    pub max_iter: usize,
    /// Random restarts from perturbed copies of the best graph.
    pub restarts: usize,
    pub perturbation_moves: usize,
    pub max_parents: usize,
}

impl Default for HillClimbConfig {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            restarts: 2,
            perturbation_moves: 4,
            max_parents: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    /// Parent indices per variable, ascending.
    pub parents: Vec<Vec<usize>>,
    pub score: f64,
    pub initial_score: f64,
    /// Best score after every accepted improvement, starting from the empty graph.
    pub trace: Vec<f64>,
}

impl SearchResult {
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self
            .parents
            .iter()
            .enumerate()
            .flat_map(|(c, ps)| ps.iter().map(move |&p| (p, c)))
            .collect();
        out.sort();
        out
    }
}

/// BIC scorer over complete rows of categorical codes.
pub struct BicScorer<'a> {
    rows: &'a [Vec<usize>],
    cards: &'a [usize],
    alpha: f64,
    cache: HashMap<(usize, Vec<usize>), f64>,
}

impl<'a> BicScorer<'a> {
    pub fn new(rows: &'a [Vec<usize>], cards: &'a [usize], alpha: f64) -> Self {
        Self { rows, cards, alpha, cache: HashMap::new() }
    }

    /// Smoothed log-likelihood of `child` given `parents` minus `½·ln N·q(r−1)`.
    pub fn local(&mut self, child: usize, parents: &[usize]) -> f64 {
        let mut key = parents.to_vec();
        key.sort_unstable();
        if let Some(s) = self.cache.get(&(child, key.clone())) {
            return *s;
        }
        let s = local_bic(self.rows, self.cards, child, &key, self.alpha);
        self.cache.insert((child, key), s);
        s
    }

    pub fn total(&mut self, parents: &[Vec<usize>]) -> f64 {
        (0..parents.len()).map(|c| self.local(c, &parents[c])).sum()
    }
}

pub fn local_bic(rows: &[Vec<usize>], cards: &[usize], child: usize, parents: &[usize], alpha: f64) -> f64 {
    let r = cards[child];
    let q: usize = parents.iter().map(|&p| cards[p]).product();
    let mut counts = vec![0.0f64; q * r];
    for row in rows {
        let j = parents.iter().fold(0, |j, &p| j * cards[p] + row[p]);
        counts[j * r + row[child]] += 1.0;
    }
    let mut ll = 0.0;
    for j in 0..q {
        let cell = &counts[j * r..(j + 1) * r];
        let nj: f64 = cell.iter().sum();
        for &njk in cell {
            if njk > 0.0 {
                ll += njk * ((njk + alpha) / (nj + alpha * r as f64)).ln();
            }
        }
    }
    let n = rows.len() as f64;
    ll - 0.5 * n.ln() * (q * (r - 1)) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Move {
    Add(usize, usize),
    Remove(usize, usize),
    Reverse(usize, usize),
}

fn reaches(parents: &[Vec<usize>], from: usize, to: usize, skip: Option<(usize, usize)>) -> bool {
    // Walk parent links backwards from `to` looking for `from`.
    let mut stack = vec![to];
    let mut seen = vec![false; parents.len()];
    while let Some(v) = stack.pop() {
        if v == from {
            return true;
        }
        if std::mem::replace(&mut seen[v], true) {
            continue;
        }
        for &p in &parents[v] {
            if skip != Some((p, v)) {
                stack.push(p);
            }
        }
    }
    false
}

fn legal(parents: &[Vec<usize>], m: Move, max_parents: usize) -> bool {
    match m {
        Move::Add(a, b) => {
            !parents[b].contains(&a) && !parents[a].contains(&b) && parents[b].len() < max_parents && !reaches(parents, b, a, None)
        }
        Move::Remove(a, b) => parents[b].contains(&a),
        Move::Reverse(a, b) => {
            parents[b].contains(&a) && parents[a].len() < max_parents && !reaches(parents, a, b, Some((a, b)))
        }
    }
}

fn apply(parents: &mut [Vec<usize>], m: Move) {
    match m {
        Move::Add(a, b) => {
            parents[b].push(a);
            parents[b].sort_unstable();
        }
        Move::Remove(a, b) => parents[b].retain(|&p| p != a),
        Move::Reverse(a, b) => {
            parents[b].retain(|&p| p != a);
            parents[a].push(b);
            parents[a].sort_unstable();
        }
    }
}

fn delta(scorer: &mut BicScorer, parents: &[Vec<usize>], m: Move) -> f64 {
    let mut next = parents.to_vec();
    apply(&mut next, m);
    match m {
        Move::Add(_, b) | Move::Remove(_, b) => scorer.local(b, &next[b]) - scorer.local(b, &parents[b]),
        Move::Reverse(a, b) => {
            scorer.local(a, &next[a]) + scorer.local(b, &next[b]) - scorer.local(a, &parents[a]) - scorer.local(b, &parents[b])
        }
    }
}

/// Candidate moves in a fixed order: pairs by variable name, then add,
/// remove, reverse.
fn candidates(names: &[String]) -> Vec<Move> {
    let mut idx: Vec<usize> = (0..names.len()).collect();
    idx.sort_by(|&a, &b| names[a].cmp(&names[b]));
    let mut out = Vec::new();
    for &a in &idx {
        for &b in &idx {
            if a != b {
                out.extend([Move::Add(a, b), Move::Remove(a, b), Move::Reverse(a, b)]);
            }
        }
    }
    out
}

fn climb(
    scorer: &mut BicScorer,
    moves: &[Move],
    parents: &mut [Vec<usize>],
    config: &HillClimbConfig,
    mut on_accept: impl FnMut(f64),
) -> f64 {
    let mut score = scorer.total(parents);
    for _ in 0..config.max_iter {
        let mut best: Option<(f64, Move)> = None;
        for &m in moves {
            if !legal(parents, m, config.max_parents) {
                continue;
            }
            let d = delta(scorer, parents, m);
            if d > MIN_GAIN && best.is_none_or(|(bd, _)| d > bd) {
                best = Some((d, m));
            }
        }
        let Some((_, m)) = best else { break };
        apply(parents, m);
        score = scorer.total(parents);
        on_accept(score);
    }
    score
}

/// Hill climbing from the empty graph over complete rows of codes.
pub fn hill_climb(
    rows: &[Vec<usize>],
    cards: &[usize],
    names: &[String],
    alpha: f64,
    seed: u64,
    config: &HillClimbConfig,
) -> Result<SearchResult> {
    if rows.len() < MIN_COMPLETE_ROWS {
        return Err(Error::InsufficientData(format!(
            "{} complete rows, structure search needs at least {MIN_COMPLETE_ROWS}",
            rows.len()
        )));
    }
    let n = cards.len();
    let mut scorer = BicScorer::new(rows, cards, alpha);
    let moves = candidates(names);

    let mut best = vec![Vec::new(); n];
    let initial_score = scorer.total(&best);
    let mut trace = vec![initial_score];
    let mut best_score = climb(&mut scorer, &moves, &mut best, config, |s| trace.push(s));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..config.restarts {
        let mut start = best.clone();
        for _ in 0..config.perturbation_moves {
            let legal_moves: Vec<Move> = moves
                .iter()
                .copied()
                .filter(|&m| legal(&start, m, config.max_parents))
                .collect();
            if let Some(&m) = legal_moves.choose(&mut rng) {
                apply(&mut start, m);
            }
        }
        let score = climb(&mut scorer, &moves, &mut start, config, |_| {});
        if score > best_score + MIN_GAIN {
            best = start;
            best_score = score;
            trace.push(score);
        }
    }
    Ok(SearchResult {
        parents: best,
        score: best_score,
        initial_score,
        trace,
    })
}
