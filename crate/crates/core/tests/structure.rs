use std::time::{Duration, Instant};

use afrisk::builder::{hill_climb, local_bic, HillClimbConfig, SearchResult};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BUDGET: Duration = Duration::from_secs(30);

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("x{i}")).collect()
}

fn search(rows: &[Vec<usize>], cards: &[usize]) -> SearchResult {
    let start = Instant::now();
    let r = hill_climb(rows, cards, &names(cards.len()), 1.0, 3, &HillClimbConfig::default()).unwrap();
    assert!(start.elapsed() < BUDGET, "search took {:?}", start.elapsed());
    assert!(r.trace.windows(2).all(|w| w[1] >= w[0]), "trace decreased");
    assert_eq!(r.trace.first().copied(), Some(r.initial_score));
    assert!(r.score >= r.initial_score);
    r
}

fn independent(n: usize, cards: &[usize], rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    (0..n).map(|_| cards.iter().map(|&k| rng.gen_range(0..k)).collect()).collect()
}

#[test]
fn independent_columns_give_empty_graph() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cards = [2, 3, 2, 4, 3];
    let rows = independent(2000, &cards, &mut rng);
    let r = search(&rows, &cards);
    assert!(r.edges().is_empty(), "{:?}", r.edges());
}

#[test]
fn noisy_copy_gives_one_edge() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let cards = [3, 2, 3, 2, 4];
    let mut rows = independent(2000, &cards, &mut rng);
    for row in &mut rows {
        // Column 2 copies column 0, resampled uniformly 5% of the time.
        row[2] = if rng.gen::<f64>() < 0.05 { rng.gen_range(0..3) } else { row[0] };
    }
    let r = search(&rows, &cards);
    let edges = r.edges();
    assert_eq!(edges.len(), 1, "{edges:?}");
    let (a, b) = edges[0];
    assert!((a, b) == (0, 2) || (a, b) == (2, 0));
}

#[test]
fn score_is_sum_of_local_terms() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let cards = [2, 3, 2, 3];
    let mut rows = independent(500, &cards, &mut rng);
    for row in &mut rows {
        row[1] = (row[0] + row[3]) % 3;
    }
    let r = search(&rows, &cards);
    let total: f64 = (0..cards.len()).map(|c| local_bic(&rows, &cards, c, &r.parents[c], 1.0)).sum();
    assert!((total - r.score).abs() < 1e-6 * total.abs());
    assert!(!r.edges().is_empty());
}

#[test]
fn too_few_rows_is_an_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let rows = independent(10, &[2, 2], &mut rng);
    assert!(hill_climb(&rows, &[2, 2], &names(2), 1.0, 0, &HillClimbConfig::default()).is_err());
}
