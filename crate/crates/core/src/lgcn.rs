//! Linearized two-layer GCN trained in closed form.
//!
//! The propagation operator is `Ã = D^{-1/2} (A + I) D^{-1/2}` with `D` the
//! degree matrix of `A` itself. With linear activations the two layers
//! collapse to `sigmoid(Ã² X W)` and the weights come from a ridge-regularized
//! class-weighted least-squares fit on the training rows:
//!
//! ```text
//! W* = (MᵀDM + ξI)⁻¹ MᵀDY,   M = Ã²X restricted to training rows,
//! D = diag(ω^{y_i})
//! ```

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::relaxed::RelaxedAdjacency;

pub const DEFAULT_XI: f64 = 0.1;
pub const DEFAULT_H: f64 = 0.5;
const PROB_EPS: f64 = 1e-12;

/// Sparse symmetric `Ã`, rows include the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationOperator {
    rows: Vec<Vec<(usize, f64)>>,
    /// `d_i^{-1/2}` per node.
    pub(crate) inv_sqrt_deg: Vec<f64>,
    /// Whether `d_i` was raised to 1 (only possible for relaxed inputs).
    pub(crate) clamped: Vec<bool>,
}

impl PropagationOperator {
    fn build(n: usize, row: impl Fn(usize) -> Vec<(usize, f64)>, deg: &[f64]) -> Self {
        let clamped: Vec<bool> = deg.iter().map(|&d| d < 1.0).collect();
        let s: Vec<f64> = deg.iter().map(|&d| d.max(1.0).powf(-0.5)).collect();
        let rows = (0..n)
            .map(|i| {
                let mut r: Vec<(usize, f64)> = row(i)
                    .into_iter()
                    .map(|(j, v)| (j, v * s[i] * s[j]))
                    .collect();
                let pos = r.partition_point(|&(j, _)| j < i);
                r.insert(pos, (i, s[i] * s[i]));
                r
            })
            .collect();
        PropagationOperator {
            rows,
            inv_sqrt_deg: s,
            clamped,
        }
    }

    /// Degrees below 1 are raised to 1; a no-op on graphs without isolated nodes.
    pub fn from_relaxed(a: &RelaxedAdjacency) -> Self {
        let deg: Vec<f64> = (0..a.n()).map(|i| a.degree(i)).collect();
        Self::build(a.n(), |i| a.row(i).to_vec(), &deg)
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// `Ã X`.
    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(x.nrows(), x.ncols());
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                for c in 0..x.ncols() {
                    out[(i, c)] += v * x[(j, c)];
                }
            }
        }
        out
    }

    /// `Ã² X`.
    pub fn propagate(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.apply(&self.apply(x))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut d = DMatrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                d[(i, j)] = v;
            }
        }
        d
    }
}

pub fn normalized_adjacency(graph: &Graph) -> Result<PropagationOperator> {
    if let Some(&i) = graph.isolated_nodes().first() {
        return Err(Error::IsolatedNode(i));
    }
    let deg: Vec<f64> = (0..graph.n()).map(|i| graph.degree(i) as f64).collect();
    Ok(PropagationOperator::build(
        graph.n(),
        |i| graph.neighbors(i).iter().map(|&j| (j, 1.0)).collect(),
        &deg,
    ))
}

/// How the positive-class weight ω is derived from training labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OmegaConvention {
    /// `n_neg / n_pos`: the anomalous minority gets the larger weight.
    #[default]
    Minority,
    /// `n_pos / n_neg`.
    PosOverNeg,
}

pub fn class_weight(y: &[u8], train: &[usize], convention: OmegaConvention) -> Result<f64> {
    let pos = train.iter().filter(|&&i| y[i] == 1).count();
    let neg = train.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidArgument(
            "training labels must contain both classes".into(),
        ));
    }
    Ok(match convention {
        OmegaConvention::Minority => neg as f64 / pos as f64,
        OmegaConvention::PosOverNeg => pos as f64 / neg as f64,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LgcnFit {
    pub w: DVector<f64>,
    pub xi: f64,
    pub omega: f64,
    /// `ω^{y_i}` for each training row, in `train` order.
    pub sample_weights: Vec<f64>,
}

pub(crate) struct FitParts {
    pub fit: LgcnFit,
    /// Cholesky factor of `MᵀDM + ξI`, kept for adjoint solves.
    pub chol: nalgebra::linalg::Cholesky<f64, nalgebra::Dyn>,
    pub m_full: DMatrix<f64>,
}

fn check_inputs(x: &DMatrix<f64>, y: &[u8], train: &[usize], xi: f64, n: usize) -> Result<()> {
    if !(xi > 0.0) {
        return Err(Error::InvalidArgument(format!("ridge strength must be positive, got {xi}")));
    }
    if x.nrows() != n || y.len() != n {
        return Err(Error::InvalidArgument(format!(
            "attribute rows {} / labels {} do not match {n} nodes",
            x.nrows(),
            y.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite attribute value".into()));
    }
    if train.is_empty() || train.iter().any(|&i| i >= n) {
        return Err(Error::InvalidArgument("invalid training index set".into()));
    }
    Ok(())
}

pub(crate) fn fit_parts(
    op: &PropagationOperator,
    x: &DMatrix<f64>,
    y: &[u8],
    train: &[usize],
    omega: f64,
    xi: f64,
) -> Result<FitParts> {
    check_inputs(x, y, train, xi, op.n())?;
    if !(omega > 0.0) {
        return Err(Error::InvalidArgument(format!("class weight must be positive, got {omega}")));
    }
    let m_full = op.propagate(x);
    let p = x.ncols();
    let sample_weights: Vec<f64> = train
        .iter()
        .map(|&i| if y[i] == 1 { omega } else { 1.0 })
        .collect();
    let mut k = DMatrix::<f64>::identity(p, p) * xi;
    let mut rhs = DVector::<f64>::zeros(p);
    for (&i, &d) in train.iter().zip(&sample_weights) {
        let row = m_full.row(i);
        for a in 0..p {
            let da = d * row[a];
            rhs[a] += da * f64::from(y[i]);
            for b in 0..p {
                k[(a, b)] += da * row[b];
            }
        }
    }
    let chol = k
        .cholesky()
        .ok_or_else(|| Error::Numerical("normal matrix is not positive definite".into()))?;
    let w = chol.solve(&rhs);
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite weights".into()));
    }
    Ok(FitParts {
        fit: LgcnFit {
            w,
            xi,
            omega,
            sample_weights,
        },
        chol,
        m_full,
    })
}

pub fn rwls_fit(
    op: &PropagationOperator,
    x: &DMatrix<f64>,
    y: &[u8],
    train: &[usize],
    omega: f64,
    xi: f64,
) -> Result<LgcnFit> {
    Ok(fit_parts(op, x, y, train, omega, xi)?.fit)
}

/// Unweighted ridge regression; identical to `rwls_fit` with `ω = 1`.
pub fn ridge_fit(
    op: &PropagationOperator,
    x: &DMatrix<f64>,
    y: &[u8],
    train: &[usize],
    xi: f64,
) -> Result<LgcnFit> {
    rwls_fit(op, x, y, train, 1.0, xi)
}

/// Relative residual of the regularized weighted normal equations.
pub fn normal_equation_residual(
    op: &PropagationOperator,
    x: &DMatrix<f64>,
    y: &[u8],
    train: &[usize],
    fit: &LgcnFit,
) -> f64 {
    let m = op.propagate(x);
    let p = x.ncols();
    let mut lhs = &fit.w * fit.xi;
    let mut rhs = DVector::<f64>::zeros(p);
    for (&i, &d) in train.iter().zip(&fit.sample_weights) {
        let row = m.row(i).transpose();
        let mw = row.dot(&fit.w);
        lhs += &row * (d * mw);
        rhs += &row * (d * f64::from(y[i]));
    }
    (lhs - &rhs).norm() / rhs.norm().max(f64::MIN_POSITIVE)
}

pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

pub fn logits(fit: &LgcnFit, op: &PropagationOperator, x: &DMatrix<f64>) -> DVector<f64> {
    op.propagate(x) * &fit.w
}

/// Scores `sigmoid(Ã²XW*)` for every node.
pub fn predict(fit: &LgcnFit, op: &PropagationOperator, x: &DMatrix<f64>) -> Vec<f64> {
    logits(fit, op, x).iter().map(|&u| sigmoid(u)).collect()
}

pub fn hard_labels(scores: &[f64]) -> Vec<u8> {
    scores.iter().map(|&z| u8::from(z >= 0.5)).collect()
}

/// Class-reweighted binary cross-entropy, summed.
pub fn rbce_loss(scores: &[f64], y: &[u8], omega: f64) -> f64 {
    scores
        .iter()
        .zip(y)
        .map(|(&z, &t)| {
            let z = z.clamp(PROB_EPS, 1.0 - PROB_EPS);
            let t = f64::from(t);
            -(omega * t * z.ln() + (1.0 - t) * (1.0 - z).ln())
        })
        .sum()
}

/// `d rbce / d u` for one node, where `z = sigmoid(u)`.
pub(crate) fn rbce_logit_grad(u: f64, t: u8, omega: f64) -> f64 {
    let z = sigmoid(u);
    if !(PROB_EPS..=1.0 - PROB_EPS).contains(&z) {
        return 0.0;
    }
    let t = f64::from(t);
    (1.0 - t) * z - omega * t * (1.0 - z)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitLoss {
    pub h: f64,
    pub train_term: f64,
    pub test_term: f64,
}

impl SplitLoss {
    pub fn total(&self) -> f64 {
        self.h * self.train_term + (1.0 - self.h) * self.test_term
    }
}

/// Everything the attack loss needs besides the graph.
#[derive(Debug, Clone)]
pub struct LgcnProblem {
    pub x: DMatrix<f64>,
    pub y: Vec<u8>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// Predicted labels for `test` from the model fitted on the clean graph.
    pub yhat_test: Vec<u8>,
    pub omega: f64,
    pub xi: f64,
    pub h: f64,
}

impl LgcnProblem {
    /// Pre-trains on `graph` to obtain pseudo-labels for the test nodes.
    #[allow(clippy::too_many_arguments)]
    pub fn pretrain(
        graph: &Graph,
        x: DMatrix<f64>,
        y: Vec<u8>,
        train: Vec<usize>,
        test: Vec<usize>,
        omega: f64,
        xi: f64,
        h: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&h) {
            return Err(Error::InvalidArgument(format!("mixing weight h={h} outside [0, 1]")));
        }
        let op = normalized_adjacency(graph)?;
        let fit = rwls_fit(&op, &x, &y, &train, omega, xi)?;
        let scores = predict(&fit, &op, &x);
        let yhat_test = test.iter().map(|&i| u8::from(scores[i] >= 0.5)).collect();
        Ok(LgcnProblem {
            x,
            y,
            train,
            test,
            yhat_test,
            omega,
            xi,
            h,
        })
    }

    pub fn loss_with(&self, op: &PropagationOperator) -> Result<SplitLoss> {
        let fit = rwls_fit(op, &self.x, &self.y, &self.train, self.omega, self.xi)?;
        let scores = predict(&fit, op, &self.x);
        let pick = |idx: &[usize]| idx.iter().map(|&i| scores[i]).collect::<Vec<_>>();
        let y_train: Vec<u8> = self.train.iter().map(|&i| self.y[i]).collect();
        Ok(SplitLoss {
            h: self.h,
            train_term: rbce_loss(&pick(&self.train), &y_train, self.omega),
            test_term: rbce_loss(&pick(&self.test), &self.yhat_test, self.omega),
        })
    }

    pub fn loss(&self, graph: &Graph) -> Result<SplitLoss> {
        self.loss_with(&normalized_adjacency(graph)?)
    }

    /// Per-node coefficient and target of the split loss.
    pub(crate) fn node_terms(&self) -> Vec<Option<(f64, u8)>> {
        let mut terms = vec![None; self.x.nrows()];
        for &i in &self.train {
            terms[i] = Some((self.h, self.y[i]));
        }
        for (&i, &t) in self.test.iter().zip(&self.yhat_test) {
            terms[i] = Some((1.0 - self.h, t));
        }
        terms
    }
}

/// Split R-BCE of the model refitted on `graph`.
#[allow(clippy::too_many_arguments)]
pub fn attack_loss(
    graph: &Graph,
    x: &DMatrix<f64>,
    y: &[u8],
    train: &[usize],
    test: &[usize],
    yhat_test: &[u8],
    omega: f64,
    xi: f64,
    h: f64,
) -> Result<SplitLoss> {
    LgcnProblem {
        x: x.clone(),
        y: y.to_vec(),
        train: train.to_vec(),
        test: test.to_vec(),
        yhat_test: yhat_test.to_vec(),
        omega,
        xi,
        h,
    }
    .loss(graph)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generate_ba;
    use rand::Rng;

    fn random_matrix(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = crate::rng::seeded(seed);
        DMatrix::from_fn(n, p, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn single_edge_operator() {
        let g = Graph::from_edges(2, [(0, 1)]).unwrap();
        let op = normalized_adjacency(&g).unwrap();
        assert_eq!(op.to_dense(), DMatrix::from_element(2, 2, 1.0));
    }

    #[test]
    fn triangle_operator() {
        let g = Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        let op = normalized_adjacency(&g).unwrap();
        assert!(op.to_dense().iter().all(|&v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn operator_matches_dense_formula() {
        let g = generate_ba(100, 3, 5).unwrap();
        let op = normalized_adjacency(&g).unwrap().to_dense();
        let n = g.n();
        let mut a = DMatrix::<f64>::identity(n, n);
        for (i, j) in g.edges() {
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
        let dinv = DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| {
            (g.degree(i) as f64).powf(-0.5)
        }));
        let expect = &dinv * a * &dinv;
        assert!((op.clone() - op.transpose()).amax() == 0.0);
        assert!((op - expect).amax() <= 1e-12);
    }

    #[test]
    fn isolated_node_rejected() {
        let g = Graph::from_edges(3, [(0, 1)]).unwrap();
        assert!(matches!(normalized_adjacency(&g), Err(Error::IsolatedNode(2))));
    }

    #[test]
    fn rbce_examples() {
        assert!((rbce_loss(&[0.5], &[1], 2.0) - 2.0 * 2f64.ln()).abs() < 1e-12);
        assert!(rbce_loss(&[1.0 - 1e-15, 1e-15], &[1, 0], 3.0) < 1e-9);
        // plain BCE oracle at omega = 1
        let mut rng = crate::rng::seeded(8);
        let z: Vec<f64> = (0..50).map(|_| rng.gen_range(0.01..0.99)).collect();
        let y: Vec<u8> = (0..50).map(|_| rng.gen_range(0..2)).collect();
        let bce: f64 = z
            .iter()
            .zip(&y)
            .map(|(&z, &t)| if t == 1 { -z.ln() } else { -(1.0 - z).ln() })
            .sum();
        assert!((rbce_loss(&z, &y, 1.0) - bce).abs() < 1e-10);
    }

    #[test]
    fn prediction_basics() {
        assert_eq!(sigmoid(0.0), 0.5);
        let g = generate_ba(30, 2, 1).unwrap();
        let op = normalized_adjacency(&g).unwrap();
        let x = random_matrix(30, 4, 2);
        let zero = LgcnFit {
            w: DVector::zeros(4),
            xi: 1.0,
            omega: 1.0,
            sample_weights: vec![],
        };
        assert!(predict(&zero, &op, &x).iter().all(|&z| z == 0.5));
        let y: Vec<u8> = (0..30).map(|i| u8::from(i % 5 == 0)).collect();
        let train: Vec<usize> = (0..30).collect();
        let fit = rwls_fit(&op, &x, &y, &train, 2.0, 0.1).unwrap();
        let scaled = LgcnFit {
            w: &fit.w * 3.0,
            ..fit.clone()
        };
        for (a, b) in predict(&fit, &op, &x).iter().zip(predict(&scaled, &op, &x)) {
            assert!((a - 0.5).abs() <= (b - 0.5).abs());
            assert!((a - 0.5) * (b - 0.5) >= 0.0);
        }
    }

    #[test]
    fn identity_design_recovers_labels() {
        // choose X = (Ã²)⁻¹ on a 3-path so that M = I
        let g = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let op = normalized_adjacency(&g).unwrap();
        let a2 = op.to_dense() * op.to_dense();
        let x = a2.try_inverse().unwrap();
        let fit = rwls_fit(&op, &x, &[1, 0, 0], &[0, 1, 2], 1.0, 1e-10).unwrap();
        assert!((&fit.w - DVector::from_column_slice(&[1.0, 0.0, 0.0])).amax() < 1e-6);
    }

    #[test]
    fn ridge_dominated_limit() {
        let g = generate_ba(40, 3, 3).unwrap();
        let op = normalized_adjacency(&g).unwrap();
        let x = random_matrix(40, 5, 4);
        let y: Vec<u8> = (0..40).map(|i| u8::from(i % 4 == 0)).collect();
        let train: Vec<usize> = (0..36).collect();
        let m = op.propagate(&x);
        let mtm = m.transpose() * &m;
        let xi = 1e6 * mtm.norm();
        let fit = ridge_fit(&op, &x, &y, &train, xi).unwrap();
        let mut mty = DVector::zeros(5);
        for &i in &train {
            mty += m.row(i).transpose() * f64::from(y[i]);
        }
        assert!(((fit.w.norm() - mty.norm() / xi) / (mty.norm() / xi)).abs() < 1e-3);
    }

    #[test]
    fn rwls_matches_generic_solver() {
        let g = generate_ba(40, 3, 7).unwrap();
        let op = normalized_adjacency(&g).unwrap();
        let x = random_matrix(40, 7, 9);
        let y: Vec<u8> = (0..40).map(|i| u8::from(i % 6 == 0)).collect();
        let train: Vec<usize> = (0..36).collect();
        let omega = class_weight(&y, &train, OmegaConvention::Minority).unwrap();
        let fit = rwls_fit(&op, &x, &y, &train, omega, 0.1).unwrap();

        // dense oracle through LU on the explicitly assembled system
        let m = op.to_dense() * op.to_dense() * &x;
        let mut d = DMatrix::zeros(40, 40);
        let mut yy = DVector::zeros(40);
        for &i in &train {
            d[(i, i)] = if y[i] == 1 { omega } else { 1.0 };
            yy[i] = f64::from(y[i]);
        }
        let k = m.transpose() * &d * &m + DMatrix::identity(7, 7) * 0.1;
        let w = k.lu().solve(&(m.transpose() * &d * yy)).unwrap();
        assert!((&fit.w - &w).amax() <= 1e-8 * w.amax());
        assert!(normal_equation_residual(&op, &x, &y, &train, &fit) <= 1e-8);

        let ridge = ridge_fit(&op, &x, &y, &train, 0.1).unwrap();
        assert_eq!(ridge, rwls_fit(&op, &x, &y, &train, 1.0, 0.1).unwrap());
    }

    #[test]
    fn omega_conventions() {
        let y = [1, 0, 0, 0, 1, 0];
        let train = [0, 1, 2, 3, 4, 5];
        assert_eq!(class_weight(&y, &train, OmegaConvention::Minority).unwrap(), 2.0);
        assert_eq!(class_weight(&y, &train, OmegaConvention::PosOverNeg).unwrap(), 0.5);
        assert!(class_weight(&[0, 0], &[0, 1], OmegaConvention::Minority).is_err());
    }

    #[test]
    fn split_loss_mixing() {
        let g = generate_ba(30, 3, 2).unwrap();
        let x = random_matrix(30, 4, 3);
        let y: Vec<u8> = (0..30).map(|i| u8::from(i % 5 == 0)).collect();
        let train: Vec<usize> = (0..27).collect();
        let test: Vec<usize> = (27..30).collect();
        let p = LgcnProblem::pretrain(&g, x.clone(), y.clone(), train.clone(), test.clone(), 4.0, 0.1, 1.0)
            .unwrap();
        let l = p.loss(&g).unwrap();
        assert_eq!(l.total(), l.train_term);
        let half = SplitLoss { h: 0.5, ..l };
        assert!((half.total() - 0.5 * (l.train_term + l.test_term)).abs() < 1e-12);
        let direct = attack_loss(&g, &x, &y, &train, &test, &p.yhat_test, 4.0, 0.1, 1.0).unwrap();
        assert_eq!(direct, l);
    }
}
