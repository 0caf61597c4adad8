/// A table-valued function over a set of discrete variables.
///
/// Variables are identified by index into the owning network. Values are
/// stored row-major with the last scope variable varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    scope: Vec<usize>,
    cards: Vec<usize>,
    values: Vec<f64>,
}

impl Factor {
    pub fn new(scope: Vec<usize>, cards: Vec<usize>, values: Vec<f64>) -> Self {
        debug_assert_eq!(scope.len(), cards.len());
        debug_assert_eq!(values.len(), cards.iter().product::<usize>());
        Self { scope, cards, values }
    }

    pub fn scalar(value: f64) -> Self {
        Self::new(Vec::new(), Vec::new(), vec![value])
    }

    pub fn scope(&self) -> &[usize] {
        &self.scope
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn contains(&self, var: usize) -> bool {
        self.scope.contains(&var)
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.scope.len()];
        for i in (0..self.scope.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.cards[i + 1];
        }
        strides
    }

    /// Fixes `var` to `state` and drops it from the scope.
    pub fn reduce(&self, var: usize, state: usize) -> Factor {
        let Some(pos) = self.scope.iter().position(|&v| v == var) else {
            return self.clone();
        };
        let strides = self.strides();
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        scope.remove(pos);
        cards.remove(pos);
        let outer = self.values.len() / (self.cards[pos] * strides[pos]);
        let inner = strides[pos];
        let mut values = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            let base = o * self.cards[pos] * inner + state * inner;
            values.extend_from_slice(&self.values[base..base + inner]);
        }
        Factor::new(scope, cards, values)
    }

    /// Pointwise product; the result scope is `self.scope` followed by new
    /// variables of `other` in their order.
    pub fn product(&self, other: &Factor) -> Factor {
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        for (v, c) in other.scope.iter().zip(&other.cards) {
            if !scope.contains(v) {
                scope.push(*v);
                cards.push(*c);
            }
        }
        let size: usize = cards.iter().product();
        let self_strides = self.strides();
        let other_strides = other.strides();
        // Stride of each result variable inside each operand (0 if absent).
        let a_map: Vec<usize> = scope
            .iter()
            .map(|v| self.scope.iter().position(|x| x == v).map_or(0, |i| self_strides[i]))
            .collect();
        let b_map: Vec<usize> = scope
            .iter()
            .map(|v| other.scope.iter().position(|x| x == v).map_or(0, |i| other_strides[i]))
            .collect();

        let mut values = Vec::with_capacity(size);
        let mut assignment = vec![0usize; scope.len()];
        let (mut ai, mut bi) = (0usize, 0usize);
        for _ in 0..size {
            values.push(self.values[ai] * other.values[bi]);
            for d in (0..scope.len()).rev() {
                assignment[d] += 1;
                ai += a_map[d];
                bi += b_map[d];
                if assignment[d] < cards[d] {
                    break;
                }
                ai -= a_map[d] * cards[d];
                bi -= b_map[d] * cards[d];
                assignment[d] = 0;
            }
        }
        Factor::new(scope, cards, values)
    }

    /// Sums `var` out of the factor.
    pub fn marginalize(&self, var: usize) -> Factor {
        let Some(pos) = self.scope.iter().position(|&v| v == var) else {
            return self.clone();
        };
        let strides = self.strides();
        let inner = strides[pos];
        let card = self.cards[pos];
        let outer = self.values.len() / (card * inner);
        let mut values = vec![0.0; outer * inner];
        for o in 0..outer {
            for k in 0..card {
                let base = o * card * inner + k * inner;
                for i in 0..inner {
                    values[o * inner + i] += self.values[base + i];
                }
            }
        }
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        scope.remove(pos);
        cards.remove(pos);
        Factor::new(scope, cards, values)
    }

    /// Scales values to sum to one. Returns the previous total; a zero total
    /// leaves the factor untouched.
    pub fn normalize(&mut self) -> f64 {
        let total = self.total();
        if total > 0.0 && total.is_finite() {
            for v in &mut self.values {
                *v /= total;
            }
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_then_marginalize_matches_hand_values() {
        // f(a) = [0.2, 0.8]; g(a, b) = [[0.1, 0.9], [0.6, 0.4]]
        let f = Factor::new(vec![0], vec![2], vec![0.2, 0.8]);
        let g = Factor::new(vec![0, 1], vec![2, 2], vec![0.1, 0.9, 0.6, 0.4]);
        let fg = f.product(&g);
        assert_eq!(fg.scope(), &[0, 1]);
        let b = fg.marginalize(0);
        assert!((b.values()[0] - (0.02 + 0.48)).abs() < 1e-15);
        assert!((b.values()[1] - (0.18 + 0.32)).abs() < 1e-15);
    }

    #[test]
    fn product_aligns_reordered_scopes() {
        let g = Factor::new(vec![0, 1], vec![2, 3], (0..6).map(f64::from).collect());
        let h = Factor::new(vec![1, 0], vec![3, 2], vec![1.0; 6]);
        let gh = g.product(&h);
        assert_eq!(gh.values(), g.values());
        let hg = h.product(&g);
        // scope (1, 0): hg[b][a] = g[a][b]
        assert_eq!(hg.values(), &[0.0, 3.0, 1.0, 4.0, 2.0, 5.0]);
    }

    #[test]
    fn reduce_picks_slice() {
        let g = Factor::new(vec![0, 1], vec![2, 3], (0..6).map(f64::from).collect());
        assert_eq!(g.reduce(0, 1).values(), &[3.0, 4.0, 5.0]);
        assert_eq!(g.reduce(1, 2).values(), &[2.0, 5.0]);
    }
}
