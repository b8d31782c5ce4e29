//! Egonet power-law detector.
//!
//! For every node the detector reads the degree `N_i` and the number of edges
//! `E_i` in its egonet (the node, its neighbours and all edges among them),
//! fits `ln E = b0 + b1 ln N` by least squares over all nodes and scores each
//! node by its distance to the fitted line:
//!
//! ```text
//! S_i = max(E_i, yhat_i) / min(E_i, yhat_i) * ln(|E_i - yhat_i| + 1),  yhat_i = e^b0 N_i^b1
//! ```

use std::fmt::Write as _;

use rand::seq::index::sample;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::relaxed::RelaxedAdjacency;
use crate::rng;

/// Per-node degree `n` and egonet edge count `e`.
#[derive(Debug, Clone, PartialEq)]
pub struct EgonetFeatures {
    pub n: Vec<f64>,
    pub e: Vec<f64>,
}

impl EgonetFeatures {
    pub fn len(&self) -> usize {
        self.n.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n.is_empty()
    }

    pub fn log_n(&self) -> Vec<f64> {
        self.n.iter().map(|v| v.max(1.0).ln()).collect()
    }

    pub fn log_e(&self) -> Vec<f64> {
        self.e.iter().map(|v| v.max(1.0).ln()).collect()
    }
}

/// Fitted line in log-log space.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PowerLawFit {
    pub beta0: f64,
    pub beta1: f64,
}

impl PowerLawFit {
    pub fn predict(&self, n: f64) -> f64 {
        (self.beta0 + self.beta1 * n.max(1.0).ln()).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyReport {
    pub scores: Vec<f64>,
    /// Node indices by descending score, ties by ascending index.
    pub ranking: Vec<usize>,
}

impl AnomalyReport {
    pub fn from_scores(scores: Vec<f64>) -> Self {
        let mut ranking: Vec<usize> = (0..scores.len()).collect();
        ranking.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        AnomalyReport { scores, ranking }
    }

    /// `rank[i]` is the 0-based position of node `i` in the ranking.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![0; self.ranking.len()];
        for (pos, &i) in self.ranking.iter().enumerate() {
            r[i] = pos;
        }
        r
    }

    /// "label score rank" rows in rank order, limited to `top` rows if given.
    pub fn write(&self, graph: &Graph, top: Option<usize>) -> String {
        let mut out = String::from("# node score rank\n");
        let k = top.unwrap_or(self.ranking.len()).min(self.ranking.len());
        for (pos, &i) in self.ranking.iter().take(k).enumerate() {
            let _ = writeln!(out, "{} {} {}", graph.label(i), self.scores[i], pos + 1);
        }
        out
    }
}

/// Target nodes with per-node weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSet {
    pub nodes: Vec<usize>,
    pub weights: Vec<f64>,
}

impl TargetSet {
    pub fn new(nodes: Vec<usize>) -> Result<Self> {
        let weights = vec![1.0; nodes.len()];
        Self::weighted(nodes, weights)
    }

    pub fn weighted(nodes: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidArgument("target set is empty".into()));
        }
        if nodes.len() != weights.len() || weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidArgument(
                "target weights must be positive, one per target".into(),
            ));
        }
        let mut sorted = nodes.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != nodes.len() {
            return Err(Error::InvalidArgument("duplicate target node".into()));
        }
        Ok(TargetSet { nodes, weights })
    }

    pub fn validate(&self, graph: &Graph) -> Result<()> {
        match self.nodes.iter().find(|&&t| t >= graph.n()) {
            Some(t) => Err(Error::InvalidArgument(format!("target {t} not in graph"))),
            None => Ok(()),
        }
    }

    pub fn contains(&self, i: usize) -> bool {
        self.nodes.contains(&i)
    }
}

/// Degrees and egonet edge counts by sparse triangle counting.
pub fn egonet_features(graph: &Graph) -> Result<EgonetFeatures> {
    if let Some(&i) = graph.isolated_nodes().first() {
        return Err(Error::IsolatedNode(i));
    }
    let n = graph.n();
    let mut mark = vec![false; n];
    let mut deg = Vec::with_capacity(n);
    let mut edges = Vec::with_capacity(n);
    for i in 0..n {
        let nb = graph.neighbors(i);
        for &j in nb {
            mark[j] = true;
        }
        let mut tri = 0usize;
        for &j in nb {
            tri += graph
                .neighbors(j)
                .iter()
                .filter(|&&k| k > j && mark[k])
                .count();
        }
        for &j in nb {
            mark[j] = false;
        }
        deg.push(nb.len() as f64);
        edges.push((nb.len() + tri) as f64);
    }
    Ok(EgonetFeatures { n: deg, e: edges })
}

/// `(N_i, T_i)` on a relaxed adjacency, where `T_i = (A^3)_ii / 2` so that
/// `E_i = N_i + T_i`.
pub(crate) fn relaxed_counts(a: &RelaxedAdjacency) -> (Vec<f64>, Vec<f64>) {
    let n = a.n();
    let mut scratch = vec![0.0; n];
    let mut deg = vec![0.0; n];
    let mut tri = vec![0.0; n];
    for i in 0..n {
        let row = a.row(i);
        for &(j, v) in row {
            scratch[j] = v;
        }
        let mut t = 0.0;
        for &(j, aij) in row {
            for &(k, ajk) in a.row(j) {
                if k > j {
                    t += aij * ajk * scratch[k];
                }
            }
        }
        for &(j, _) in row {
            scratch[j] = 0.0;
        }
        deg[i] = a.degree(i);
        tri[i] = t;
    }
    (deg, tri)
}

pub fn relaxed_features(a: &RelaxedAdjacency) -> EgonetFeatures {
    let (n, t) = relaxed_counts(a);
    let e = n.iter().zip(&t).map(|(a, b)| a + b).collect();
    EgonetFeatures { n, e }
}

/// Weighted least-squares line `y = b0 + b1 x`; weights default to 1.
pub(crate) fn fit_line(x: &[f64], y: &[f64], w: Option<&[f64]>) -> Result<(f64, f64)> {
    if x.len() < 2 || x.len() != y.len() {
        return Err(Error::SingularDesign(format!(
            "need at least two points, got {}",
            x.len()
        )));
    }
    let weight = |i: usize| w.map_or(1.0, |w| w[i]);
    let sw: f64 = (0..x.len()).map(weight).sum();
    if !(sw > 0.0) {
        return Err(Error::SingularDesign("all weights are zero".into()));
    }
    let mx = (0..x.len()).map(|i| weight(i) * x[i]).sum::<f64>() / sw;
    let my = (0..x.len()).map(|i| weight(i) * y[i]).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..x.len() {
        let dx = x[i] - mx;
        sxx += weight(i) * dx * dx;
        sxy += weight(i) * dx * (y[i] - my);
    }
    let spread = x
        .iter()
        .enumerate()
        .filter(|&(i, _)| weight(i) > 0.0)
        .map(|(_, &v)| (v - mx).abs())
        .fold(0.0, f64::max);
    if spread == 0.0 || !(sxx > 0.0) {
        return Err(Error::SingularDesign(
            "all regressors are equal; the log-log design has rank 1".into(),
        ));
    }
    let b1 = sxy / sxx;
    Ok((my - b1 * mx, b1))
}

/// Ordinary least squares of `ln E` on `[1, ln N]`.
pub fn fit_power_law_ols(features: &EgonetFeatures) -> Result<PowerLawFit> {
    let (beta0, beta1) = fit_line(&features.log_n(), &features.log_e(), None)?;
    Ok(PowerLawFit { beta0, beta1 })
}

pub fn ascore(e: f64, yhat: f64) -> f64 {
    let (hi, lo) = if e >= yhat { (e, yhat) } else { (yhat, e) };
    hi / lo * ((e - yhat).abs() + 1.0).ln()
}

pub fn anomaly_scores(features: &EgonetFeatures, fit: &PowerLawFit) -> AnomalyReport {
    let scores = features
        .n
        .iter()
        .zip(&features.e)
        .map(|(&n, &e)| ascore(e, fit.predict(n)))
        .collect();
    AnomalyReport::from_scores(scores)
}

/// Features, OLS fit and scores in one pass.
pub fn detect(graph: &Graph) -> Result<(EgonetFeatures, PowerLawFit, AnomalyReport)> {
    let features = egonet_features(graph)?;
    let fit = fit_power_law_ols(&features)?;
    let report = anomaly_scores(&features, &fit);
    Ok((features, fit, report))
}

/// Weighted sum of target anomaly scores after refitting on `graph`.
pub fn target_score_sum(graph: &Graph, targets: &TargetSet) -> Result<f64> {
    let (_, _, report) = detect(graph)?;
    Ok(targets
        .nodes
        .iter()
        .zip(&targets.weights)
        .map(|(&t, &w)| w * report.scores[t])
        .sum())
}

/// Sum over targets of `w_i (E_i - yhat_i)^2` with the fit recomputed from the same features.
pub fn surrogate_from_features(features: &EgonetFeatures, targets: &TargetSet) -> Result<f64> {
    let fit = fit_power_law_ols(features)?;
    Ok(targets
        .nodes
        .iter()
        .zip(&targets.weights)
        .map(|(&t, &w)| {
            let r = features.e[t] - fit.predict(features.n[t]);
            w * r * r
        })
        .sum())
}

pub fn surrogate_objective(graph: &Graph, targets: &TargetSet) -> Result<f64> {
    targets.validate(graph)?;
    surrogate_from_features(&egonet_features(graph)?, targets)
}

/// Uniform sample of `count` nodes among the `pool_size` highest ranked.
pub fn pick_targets(
    report: &AnomalyReport,
    pool_size: usize,
    count: usize,
    seed: u64,
) -> Result<TargetSet> {
    if pool_size > report.ranking.len() || count > pool_size || count == 0 {
        return Err(Error::InvalidArgument(format!(
            "cannot pick {count} targets from a pool of {pool_size} among {} nodes",
            report.ranking.len()
        )));
    }
    let mut rng = rng::seeded(seed);
    let mut picks = sample(&mut rng, pool_size, count).into_vec();
    picks.sort_unstable();
    TargetSet::new(picks.into_iter().map(|k| report.ranking[k]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{erdos_renyi, generate_ba};

    fn brute_force_egonet_edges(g: &Graph, i: usize) -> usize {
        let mut nodes = vec![i];
        nodes.extend_from_slice(g.neighbors(i));
        let mut count = 0;
        for (a, &u) in nodes.iter().enumerate() {
            for &v in &nodes[a + 1..] {
                if g.has_edge(u, v) {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn triangle_features() {
        let g = Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        let f = egonet_features(&g).unwrap();
        assert_eq!(f.n, vec![2.0; 3]);
        assert_eq!(f.e, vec![3.0; 3]);
    }

    #[test]
    fn star_features() {
        let g = Graph::from_edges(5, (1..5).map(|i| (0, i))).unwrap();
        let f = egonet_features(&g).unwrap();
        assert_eq!((f.n[0], f.e[0]), (4.0, 4.0));
        assert_eq!((f.n[3], f.e[3]), (1.0, 1.0));
    }

    #[test]
    fn features_match_brute_force_on_random_graph() {
        let g = erdos_renyi(20, 0.2, 5).unwrap();
        let g = g.largest_connected_component().unwrap();
        let f = egonet_features(&g).unwrap();
        for i in 0..g.n() {
            assert_eq!(f.e[i] as usize, brute_force_egonet_edges(&g, i), "node {i}");
        }
        let relaxed = relaxed_features(&RelaxedAdjacency::from_graph(&g));
        assert_eq!(relaxed, f);
    }

    #[test]
    fn isolated_node_is_rejected() {
        let g = Graph::from_edges(3, [(0, 1)]).unwrap();
        assert!(matches!(egonet_features(&g), Err(Error::IsolatedNode(2))));
    }

    #[test]
    fn exact_power_law_is_recovered() {
        let f = EgonetFeatures {
            n: vec![2.0, 4.0, 8.0],
            e: vec![4.0, 16.0, 64.0],
        };
        let fit = fit_power_law_ols(&f).unwrap();
        assert!(fit.beta0.abs() < 1e-12);
        assert!((fit.beta1 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn constant_degree_is_singular() {
        let f = EgonetFeatures {
            n: vec![3.0; 3],
            e: vec![5.0, 6.0, 7.0],
        };
        assert!(matches!(fit_power_law_ols(&f), Err(Error::SingularDesign(_))));
    }

    #[test]
    fn ols_matches_direct_normal_equation_solve() {
        let g = generate_ba(200, 3, 9).unwrap();
        let f = egonet_features(&g).unwrap();
        let fit = fit_power_law_ols(&f).unwrap();
        // [n, sx; sx, sxx] [b0; b1] = [sy; sxy] by Cramer's rule
        let (x, y) = (f.log_n(), f.log_e());
        let n = x.len() as f64;
        let sx: f64 = x.iter().sum();
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        let sy: f64 = y.iter().sum();
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let det = n * sxx - sx * sx;
        let b0 = (sy * sxx - sx * sxy) / det;
        let b1 = (n * sxy - sx * sy) / det;
        assert!((fit.beta0 - b0).abs() < 1e-9);
        assert!((fit.beta1 - b1).abs() < 1e-9);
    }

    #[test]
    fn score_examples() {
        assert_eq!(ascore(3.5, 3.5), 0.0);
        assert!((ascore(2.0, 1.0) - 2.0 * 2f64.ln()).abs() < 1e-12);
        assert!((ascore(1.0, 2.0) - 2.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn surrogate_examples() {
        // every node sits on ln E = 2 ln N
        let f = EgonetFeatures {
            n: vec![2.0, 4.0, 8.0],
            e: vec![4.0, 16.0, 64.0],
        };
        let t = TargetSet::new(vec![0, 2]).unwrap();
        assert!(surrogate_from_features(&f, &t).unwrap() < 1e-18);

        // yhat = 3 at every N: fit through (ln 2, ln 3) twice and (ln 4, ln 3)
        let f = EgonetFeatures {
            n: vec![2.0, 2.0, 4.0, 4.0],
            e: vec![5.0, 1.8, 3.0, 3.0],
        };
        let fit = fit_power_law_ols(&f).unwrap();
        assert!(fit.beta1.abs() < 1e-12 && (fit.beta0 - 3f64.ln()).abs() < 1e-12);
        let t = TargetSet::new(vec![0]).unwrap();
        assert!((surrogate_from_features(&f, &t).unwrap() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn target_picking() {
        let g = generate_ba(300, 3, 2).unwrap();
        let (_, _, report) = detect(&g).unwrap();
        let ranks = report.ranks();
        let t = pick_targets(&report, 50, 10, 4).unwrap();
        assert_eq!(t.nodes.len(), 10);
        assert!(t.nodes.iter().all(|&i| ranks[i] < 50));
        assert_eq!(t, pick_targets(&report, 50, 10, 4).unwrap());
        let all = pick_targets(&report, 20, 20, 1).unwrap();
        let mut expect = report.ranking[..20].to_vec();
        let mut got = all.nodes.clone();
        expect.sort_unstable();
        got.sort_unstable();
        assert_eq!(got, expect);
    }

    #[test]
    fn ranking_breaks_ties_by_index() {
        let r = AnomalyReport::from_scores(vec![1.0, 2.0, 1.0, 2.0]);
        assert_eq!(r.ranking, vec![1, 3, 0, 2]);
        assert_eq!(r.ranks(), vec![2, 0, 3, 1]);
    }
}
