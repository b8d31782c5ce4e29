//! Scalar attack objectives and their analytic gradients with respect to the
//! symmetric adjacency entries of candidate pairs.
//!
//! Both objectives are minimized by the attacker.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::lgcn::{self, LgcnProblem, PropagationOperator};
use crate::oddball::{fit_line, relaxed_counts, TargetSet};
use crate::relaxed::RelaxedAdjacency;

pub trait Objective: Sync {
    fn name(&self) -> &'static str;

    fn value(&self, a: &RelaxedAdjacency) -> Result<f64>;

    /// Objective value and `d f / d A_ij` for each pair, where the pair
    /// variable sets both `A_ij` and `A_ji`.
    fn value_and_grad(&self, a: &RelaxedAdjacency, pairs: &[(usize, usize)])
        -> Result<(f64, Vec<f64>)>;

    fn value_on(&self, graph: &Graph) -> Result<f64> {
        self.value(&RelaxedAdjacency::from_graph(graph))
    }
}

/// Groups pair indices by their first endpoint.
fn rows_of(pairs: &[(usize, usize)], n: usize) -> Vec<(usize, Vec<(usize, usize)>)> {
    let mut by_row: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (k, &(i, j)) in pairs.iter().enumerate() {
        by_row[i].push((j, k));
    }
    by_row
        .into_iter()
        .enumerate()
        .filter(|(_, r)| !r.is_empty())
        .collect()
}

/// Squared distance of target egonet edge counts to the OLS power-law line,
/// with the line refitted on the evaluated graph.
#[derive(Debug, Clone)]
pub struct OddballObjective {
    pub targets: TargetSet,
}

struct OddballPass {
    value: f64,
    /// `d f / d E_i`
    g_e: Vec<f64>,
    /// `d f / d N_i` holding `E` fixed
    g_n: Vec<f64>,
}

impl OddballObjective {
    pub fn new(targets: TargetSet) -> Self {
        OddballObjective { targets }
    }

    fn forward(&self, deg: &[f64], tri: &[f64], with_grad: bool) -> Result<OddballPass> {
        let n = deg.len();
        let e: Vec<f64> = deg.iter().zip(tri).map(|(a, b)| a + b).collect();
        let x: Vec<f64> = deg.iter().map(|v| v.max(1.0).ln()).collect();
        let y: Vec<f64> = e.iter().map(|v| v.max(1.0).ln()).collect();
        let (b0, b1) = fit_line(&x, &y, None)?;

        let mut value = 0.0;
        let mut g_e = vec![0.0; n];
        let mut g_x = vec![0.0; n];
        let mut g_beta = [0.0; 2];
        for (&t, &w) in self.targets.nodes.iter().zip(&self.targets.weights) {
            let yhat = (b0 + b1 * x[t]).exp();
            let r = e[t] - yhat;
            value += w * r * r;
            if with_grad {
                let g_yhat = -2.0 * w * r;
                g_e[t] += 2.0 * w * r;
                g_x[t] += g_yhat * yhat * b1;
                g_beta[0] += g_yhat * yhat;
                g_beta[1] += g_yhat * yhat * x[t];
            }
        }
        if !value.is_finite() {
            return Err(Error::Numerical("non-finite surrogate objective".into()));
        }
        if !with_grad {
            return Ok(OddballPass {
                value,
                g_e,
                g_n: Vec::new(),
            });
        }

        // adjoint of beta = (XᵀX)⁻¹ Xᵀ y with X = [1, x]
        let sx: f64 = x.iter().sum();
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        let det = n as f64 * sxx - sx * sx;
        let v0 = (sxx * g_beta[0] - sx * g_beta[1]) / det;
        let v1 = (n as f64 * g_beta[1] - sx * g_beta[0]) / det;

        let mut g_n = vec![0.0; n];
        for i in 0..n {
            let xv = v0 + v1 * x[i];
            let resid = y[i] - b0 - b1 * x[i];
            g_x[i] += resid * v1 - xv * b1;
            if e[i] >= 1.0 {
                g_e[i] += xv / e[i];
            }
            if deg[i] >= 1.0 {
                g_n[i] = g_x[i] / deg[i];
            }
        }
        Ok(OddballPass { value, g_e, g_n })
    }
}

impl Objective for OddballObjective {
    fn name(&self) -> &'static str {
        "oddball"
    }

    fn value(&self, a: &RelaxedAdjacency) -> Result<f64> {
        let (deg, tri) = relaxed_counts(a);
        Ok(self.forward(&deg, &tri, false)?.value)
    }

    fn value_and_grad(
        &self,
        a: &RelaxedAdjacency,
        pairs: &[(usize, usize)],
    ) -> Result<(f64, Vec<f64>)> {
        let n = a.n();
        let (deg, tri) = relaxed_counts(a);
        let pass = self.forward(&deg, &tri, true)?;
        let g_e = &pass.g_e;
        // E = N + T, so N moves E as well
        let g_deg: Vec<f64> = pass.g_n.iter().zip(g_e).map(|(a, b)| a + b).collect();

        // Toggling pair (i, j) changes N_i, N_j by 1, T_i and T_j by (A²)_ij
        // and T_k by A_ik A_kj for every common neighbour k.
        let rows = rows_of(pairs, n);
        let parts: Vec<Vec<(usize, f64)>> = rows
            .par_iter()
            .map_init(
                || (vec![0.0; n], vec![0.0; n], Vec::new()),
                |(sq, sg, touched): &mut (Vec<f64>, Vec<f64>, Vec<usize>), (i, cols)| {
                    let i = *i;
                    for &(k, aik) in a.row(i) {
                        for &(j, akj) in a.row(k) {
                            if sq[j] == 0.0 && sg[j] == 0.0 {
                                touched.push(j);
                            }
                            sq[j] += aik * akj;
                            sg[j] += aik * akj * g_e[k];
                        }
                    }
                    let out = cols
                        .iter()
                        .map(|&(j, idx)| {
                            let g = g_deg[i] + g_deg[j] + (g_e[i] + g_e[j]) * sq[j] + sg[j];
                            (idx, g)
                        })
                        .collect();
                    for &j in touched.iter() {
                        sq[j] = 0.0;
                        sg[j] = 0.0;
                    }
                    touched.clear();
                    out
                },
            )
            .collect();
        let mut grad = vec![0.0; pairs.len()];
        for part in parts {
            for (idx, g) in part {
                grad[idx] = g;
            }
        }
        Ok((pass.value, grad))
    }
}

/// Negated split R-BCE of the linearized GCN refitted on the evaluated graph.
#[derive(Debug, Clone)]
pub struct LgcnObjective {
    pub problem: LgcnProblem,
}

impl LgcnObjective {
    pub fn new(problem: LgcnProblem) -> Self {
        LgcnObjective { problem }
    }
}

impl Objective for LgcnObjective {
    fn name(&self) -> &'static str {
        "lgcn"
    }

    fn value(&self, a: &RelaxedAdjacency) -> Result<f64> {
        let op = PropagationOperator::from_relaxed(a);
        Ok(-self.problem.loss_with(&op)?.total())
    }

    fn value_and_grad(
        &self,
        a: &RelaxedAdjacency,
        pairs: &[(usize, usize)],
    ) -> Result<(f64, Vec<f64>)> {
        let pb = &self.problem;
        let n = a.n();
        let p = pb.x.ncols();
        let op = PropagationOperator::from_relaxed(a);
        let parts = lgcn::fit_parts(&op, &pb.x, &pb.y, &pb.train, pb.omega, pb.xi)?;
        let w = &parts.fit.w;
        let m = &parts.m_full;
        let u: DVector<f64> = m * w;

        // loss and d loss / d u
        let mut loss = 0.0;
        let mut g_u = DVector::<f64>::zeros(n);
        for (i, term) in pb.node_terms().into_iter().enumerate() {
            if let Some((c, t)) = term {
                let z = lgcn::sigmoid(u[i]);
                loss += c * lgcn::rbce_loss(&[z], &[t], pb.omega);
                g_u[i] = c * lgcn::rbce_logit_grad(u[i], t, pb.omega);
            }
        }

        // d loss / d M through u = M W and through W = K⁻¹ MᵀDY
        let v = parts.chol.solve(&(m.transpose() * &g_u));
        let mut g_m: DMatrix<f64> = &g_u * w.transpose();
        for (&i, &d) in pb.train.iter().zip(&parts.fit.sample_weights) {
            let row = m.row(i);
            let r = d * (f64::from(pb.y[i]) - row.dot(&w.transpose()));
            let q = d * row.dot(&v.transpose());
            for c in 0..p {
                g_m[(i, c)] += r * v[c] - q * w[c];
            }
        }

        // M = Ã²X gives d loss / d Ã = G (ÃX)ᵀ + (ÃG) Xᵀ; only its symmetric part
        // on the needed entries is formed.
        let px = op.apply(&pb.x);
        let qg = op.apply(&g_m);
        let x = &pb.x;
        let hsym = |i: usize, j: usize| -> f64 {
            let mut s = 0.0;
            for c in 0..p {
                s += g_m[(i, c)] * px[(j, c)]
                    + qg[(i, c)] * x[(j, c)]
                    + g_m[(j, c)] * px[(i, c)]
                    + qg[(j, c)] * x[(i, c)];
            }
            s
        };
        let s = &op.inv_sqrt_deg;
        let g_deg: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                if op.clamped[i] {
                    return 0.0;
                }
                // d loss / d s_i = sum_j (H_ij + H_ji)(A_ij + δ_ij) s_j
                let mut g_s = hsym(i, i) * s[i];
                for &(j, aij) in a.row(i) {
                    g_s += hsym(i, j) * aij * s[j];
                }
                -0.5 * s[i].powi(3) * g_s
            })
            .collect();
        let grad: Vec<f64> = pairs
            .par_iter()
            .map(|&(i, j)| -(hsym(i, j) * s[i] * s[j] + g_deg[i] + g_deg[j]))
            .collect();
        Ok((-loss, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::erdos_renyi;
    use crate::relaxed::PairOverlay;
    use crate::rng;
    use rand::Rng;

    fn min_degree_two(n: usize, p: f64, seed: u64) -> Graph {
        let g = erdos_renyi(n, p, seed).unwrap();
        let mut edges: Vec<(usize, usize)> = g.edges().collect();
        for i in 0..n {
            edges.push((i, (i + 1) % n));
            edges.push((i, (i + 2) % n));
        }
        Graph::from_edges(n, edges).unwrap()
    }

    fn all_pairs(n: usize) -> Vec<(usize, usize)> {
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
    }

    /// Largest of `|g - fd| / max(|g|, |fd|, floor)` over all pairs.
    fn fd_error(obj: &dyn Objective, g: &Graph, values: Option<Vec<f64>>) -> f64 {
        let pairs = all_pairs(g.n());
        let overlay = PairOverlay::new(g, &pairs);
        let base: Vec<f64> = values.unwrap_or_else(|| {
            pairs
                .iter()
                .map(|&(i, j)| if g.has_edge(i, j) { 1.0 } else { 0.0 })
                .collect()
        });
        let (_, grad) = obj.value_and_grad(&overlay.build(&base), &pairs).unwrap();
        let h = 1e-5;
        let fd: Vec<f64> = (0..pairs.len())
            .map(|k| {
                let mut v = base.clone();
                v[k] = base[k] + h;
                let up = obj.value(&overlay.build(&v)).unwrap();
                v[k] = base[k] - h;
                let down = obj.value(&overlay.build(&v)).unwrap();
                (up - down) / (2.0 * h)
            })
            .collect();
        let scale = fd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let floor = 1e-6 * scale.max(1.0);
        grad.iter()
            .zip(&fd)
            .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(floor))
            .fold(0.0, f64::max)
    }

    fn lgcn_problem(g: &Graph, seed: u64) -> LgcnProblem {
        let n = g.n();
        let mut r = rng::seeded(seed);
        let x = DMatrix::from_fn(n, 5, |_, _| r.gen_range(-1.0..1.0));
        let y: Vec<u8> = (0..n).map(|i| u8::from(i % 6 == 0)).collect();
        let test: Vec<usize> = (0..n).filter(|i| i % 5 == 2 || *i == 6).collect();
        let train: Vec<usize> = (0..n).filter(|i| !test.contains(i)).collect();
        LgcnProblem::pretrain(g, x, y, train, test, 5.0, 0.1, 0.5).unwrap()
    }

    #[test]
    fn oddball_gradient_matches_finite_differences() {
        for seed in 0..3 {
            let g = min_degree_two(30, 0.1, seed);
            let obj = OddballObjective::new(TargetSet::new(vec![0, 7, 13, 21]).unwrap());
            let err = fd_error(&obj, &g, None);
            assert!(err <= 1e-4, "seed {seed}: {err}");
        }
    }

    #[test]
    fn oddball_gradient_at_fractional_point() {
        let g = min_degree_two(25, 0.15, 4);
        let pairs = all_pairs(25);
        let mut r = rng::seeded(8);
        let values = pairs
            .iter()
            .map(|&(i, j)| {
                if g.has_edge(i, j) {
                    r.gen_range(0.6..1.0)
                } else {
                    r.gen_range(0.0..0.3)
                }
            })
            .collect();
        let obj = OddballObjective::new(TargetSet::new(vec![1, 2, 3]).unwrap());
        let err = fd_error(&obj, &g, Some(values));
        assert!(err <= 1e-4, "{err}");
    }

    #[test]
    fn lgcn_gradient_matches_finite_differences() {
        for seed in 0..3 {
            let g = min_degree_two(30, 0.1, 10 + seed);
            let obj = LgcnObjective::new(lgcn_problem(&g, seed));
            let err = fd_error(&obj, &g, None);
            assert!(err <= 1e-4, "seed {seed}: {err}");
        }
    }

    #[test]
    fn lgcn_gradient_at_fractional_point() {
        let g = min_degree_two(20, 0.2, 3);
        let pairs = all_pairs(20);
        let mut r = rng::seeded(1);
        let values = pairs
            .iter()
            .map(|&(i, j)| {
                if g.has_edge(i, j) {
                    r.gen_range(0.5..1.0)
                } else {
                    r.gen_range(0.0..0.5)
                }
            })
            .collect();
        let obj = LgcnObjective::new(lgcn_problem(&g, 3));
        let err = fd_error(&obj, &g, Some(values));
        assert!(err <= 1e-4, "{err}");
    }

    #[test]
    fn lgcn_value_is_negated_loss() {
        let g = min_degree_two(20, 0.2, 5);
        let pb = lgcn_problem(&g, 5);
        let obj = LgcnObjective::new(pb.clone());
        let pairs = all_pairs(20);
        let (v, _) = obj
            .value_and_grad(&RelaxedAdjacency::from_graph(&g), &pairs)
            .unwrap();
        let loss = pb.loss(&g).unwrap().total();
        assert!((v + loss).abs() <= 1e-10 * loss.abs().max(1.0));
        assert!((obj.value_on(&g).unwrap() - v).abs() <= 1e-10 * v.abs().max(1.0));
    }

    #[test]
    fn oddball_value_matches_surrogate() {
        let g = min_degree_two(30, 0.1, 6);
        let t = TargetSet::new(vec![3, 4, 5]).unwrap();
        let obj = OddballObjective::new(t.clone());
        let direct = crate::oddball::surrogate_objective(&g, &t).unwrap();
        assert!((obj.value_on(&g).unwrap() - direct).abs() <= 1e-9 * direct.max(1.0));
    }

    #[test]
    fn gradient_is_permutation_equivariant() {
        let g = min_degree_two(15, 0.2, 2);
        let n = g.n();
        let perm: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % n).collect();
        let h = g.permute(&perm).unwrap();
        let pairs = all_pairs(n);
        let t = vec![1, 4];
        let obj_g = OddballObjective::new(TargetSet::new(t.clone()).unwrap());
        let obj_h = OddballObjective::new(TargetSet::new(t.iter().map(|&v| perm[v]).collect()).unwrap());
        let (_, gg) = obj_g.value_and_grad(&RelaxedAdjacency::from_graph(&g), &pairs).unwrap();
        let (_, gh) = obj_h.value_and_grad(&RelaxedAdjacency::from_graph(&h), &pairs).unwrap();
        for (k, &(i, j)) in pairs.iter().enumerate() {
            let (a, b) = (perm[i].min(perm[j]), perm[i].max(perm[j]));
            let kh = pairs.iter().position(|&p| p == (a, b)).unwrap();
            assert!((gg[k] - gh[kh]).abs() <= 1e-9 * gg[k].abs().max(1.0));
        }
    }
}
