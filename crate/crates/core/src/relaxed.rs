//! Weighted symmetric adjacency with entries in `[0, 1]`, used when the
//! attacks evaluate objectives on relaxed or partially flipped graphs.

use std::collections::HashMap;

use crate::graph::Graph;

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedAdjacency {
    rows: Vec<Vec<(usize, f64)>>,
}

impl RelaxedAdjacency {
    pub fn from_graph(graph: &Graph) -> Self {
        RelaxedAdjacency {
            rows: (0..graph.n())
                .map(|i| graph.neighbors(i).iter().map(|&j| (j, 1.0)).collect())
                .collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    /// Nonzero off-diagonal entries of row `i`, sorted by column.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.rows[i].iter().map(|&(_, v)| v).sum()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self.rows[i].binary_search_by_key(&j, |&(c, _)| c) {
            Ok(k) => self.rows[i][k].1,
            Err(_) => 0.0,
        }
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut d = vec![vec![0.0; n]; n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                d[i][j] = v;
            }
        }
        d
    }
}

/// Rebuilds relaxed adjacencies where a fixed set of pairs takes free values
/// and every other pair keeps its value in the base graph.
#[derive(Debug, Clone)]
pub struct PairOverlay {
    fixed: Vec<Vec<usize>>,
    pairs: Vec<(usize, usize)>,
}

impl PairOverlay {
    pub fn new(base: &Graph, pairs: &[(usize, usize)]) -> Self {
        let index: HashMap<(usize, usize), usize> =
            pairs.iter().enumerate().map(|(k, &p)| (p, k)).collect();
        let fixed = (0..base.n())
            .map(|i| {
                base.neighbors(i)
                    .iter()
                    .copied()
                    .filter(|&j| !index.contains_key(&(i.min(j), i.max(j))))
                    .collect()
            })
            .collect();
        PairOverlay {
            fixed,
            pairs: pairs.to_vec(),
        }
    }

    pub fn build(&self, values: &[f64]) -> RelaxedAdjacency {
        debug_assert_eq!(values.len(), self.pairs.len());
        let mut rows: Vec<Vec<(usize, f64)>> = self
            .fixed
            .iter()
            .map(|r| r.iter().map(|&j| (j, 1.0)).collect())
            .collect();
        for (&(i, j), &v) in self.pairs.iter().zip(values) {
            if v != 0.0 {
                rows[i].push((j, v));
                rows[j].push((i, v));
            }
        }
        for row in &mut rows {
            row.sort_unstable_by_key(|&(c, _)| c);
        }
        RelaxedAdjacency { rows }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlay_with_base_values_reproduces_graph() {
        let g = Graph::from_edges(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        let pairs = vec![(0, 1), (0, 2), (1, 3)];
        let overlay = PairOverlay::new(&g, &pairs);
        let a = overlay.build(&[1.0, 0.0, 0.0]);
        assert_eq!(a, RelaxedAdjacency::from_graph(&g));
        let b = overlay.build(&[0.25, 0.5, 0.0]);
        assert_eq!(b.get(1, 0), 0.25);
        assert_eq!(b.get(2, 0), 0.5);
        assert_eq!(b.degree(0), 0.75);
    }
}
