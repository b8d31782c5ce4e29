use rand::seq::index::sample;
use rand::Rng as _;

use super::Graph;
use crate::error::{Error, Result};
use crate::rng;

/// Barabási–Albert preferential attachment.
///
/// Starts from `m` nodes without edges; node `m` attaches to all of them and
/// every later node attaches to `m` distinct existing nodes chosen with
/// probability proportional to degree. The result has `(n - m) * m` edges.
pub fn generate_ba(n: usize, m: usize, seed: u64) -> Result<Graph> {
    if m < 1 || n <= m {
        return Err(Error::InvalidArgument(format!(
            "preferential attachment needs n > m >= 1, got n={n}, m={m}"
        )));
    }
    let mut rng = rng::seeded(seed);
    let mut edges = Vec::with_capacity((n - m) * m);
    // each node appears once per incident edge endpoint
    let mut repeated: Vec<usize> = Vec::with_capacity(2 * (n - m) * m);
    let mut targets: Vec<usize> = (0..m).collect();
    for source in m..n {
        for &t in &targets {
            edges.push((source, t));
        }
        repeated.extend_from_slice(&targets);
        repeated.extend(std::iter::repeat_n(source, m));
        targets.clear();
        while targets.len() < m {
            let t = repeated[rng.gen_range(0..repeated.len())];
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
    }
    Graph::from_edges(n, edges)
}

/// G(n, p) random graph, used for test fixtures.
pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("edge probability {p}")));
    }
    let mut rng = rng::seeded(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p) {
                edges.push((i, j));
            }
        }
    }
    Graph::from_edges(n, edges)
}

/// Picks `num_cliques * clique_size` distinct nodes and makes each group of
/// `clique_size` fully connected. Returns the new graph and 0/1 labels
/// marking the clique members.
pub fn inject_cliques(
    graph: &Graph,
    num_cliques: usize,
    clique_size: usize,
    seed: u64,
) -> Result<(Graph, Vec<u8>)> {
    let groups = clique_groups(graph.n(), num_cliques, clique_size, seed)?;
    let mut y = vec![0u8; graph.n()];
    let mut edges: Vec<(usize, usize)> = graph.edges().collect();
    for group in &groups {
        for (a, &u) in group.iter().enumerate() {
            y[u] = 1;
            for &v in &group[a + 1..] {
                edges.push((u, v));
            }
        }
    }
    Ok((Graph::with_labels(graph.labels().to_vec(), edges)?, y))
}

/// The node groups `inject_cliques` connects for the same arguments.
pub fn clique_groups(
    n: usize,
    num_cliques: usize,
    clique_size: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    let total = num_cliques * clique_size;
    if clique_size < 2 || total > n {
        return Err(Error::InvalidArgument(format!(
            "cannot place {num_cliques} cliques of size {clique_size} in {n} nodes"
        )));
    }
    let mut rng = rng::seeded(seed);
    let chosen = sample(&mut rng, n, total).into_vec();
    Ok(chosen.chunks(clique_size).map(|c| c.to_vec()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ba_edge_count_matches_table() {
        let g = generate_ba(1000, 5, 3).unwrap();
        assert_eq!(g.num_edges(), 4975);
        assert_eq!(g.components().len(), 1);
    }

    #[test]
    fn ba_first_arrival_takes_the_seed_set() {
        let g = generate_ba(6, 5, 11).unwrap();
        assert_eq!(g.num_edges(), 5);
        assert_eq!(g.neighbors(5), &[0, 1, 2, 3, 4]);
    }

    #[test]
    fn ba_is_deterministic() {
        let a = generate_ba(50, 3, 7).unwrap();
        let b = generate_ba(50, 3, 7).unwrap();
        assert_eq!(a, b);
        assert!(generate_ba(5, 5, 0).is_err());
        assert!(generate_ba(5, 0, 0).is_err());
    }

    #[test]
    fn clique_on_empty_graph() {
        let g = Graph::from_edges(10, []).unwrap();
        let (h, y) = inject_cliques(&g, 1, 4, 1).unwrap();
        assert_eq!(h.num_edges(), 6);
        assert_eq!(y.iter().filter(|&&v| v == 1).count(), 4);
    }

    #[test]
    fn clique_counts_preexisting_edges_once() {
        let g = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        let (h, y) = inject_cliques(&g, 1, 4, 0).unwrap();
        assert_eq!(y, vec![1, 1, 1, 1]);
        assert_eq!(h.num_edges() - g.num_edges(), 6 - 2);
    }

    #[test]
    fn cora_scale_anomaly_budget() {
        let g = generate_ba(2708, 2, 1).unwrap();
        let (h, y) = inject_cliques(&g, 15, 10, 1).unwrap();
        assert_eq!(y.iter().filter(|&&v| v == 1).count(), 150);
        assert!(h.num_edges() - g.num_edges() <= 15 * 45);
        assert!(inject_cliques(&g, 300, 10, 1).is_err());
    }
}
