use serde::Serialize;

use super::{prefix_results, AttackConfig, AttackOutcome, CandidateSet, Method};
use crate::attack::Objective;
use crate::error::{Error, Result};
use crate::graph::{EdgeOp, Graph, OpKind};
use crate::relaxed::RelaxedAdjacency;

/// One greedy step: the chosen pair and the gradient that picked it.
#[derive(Debug, Clone, Serialize)]
pub struct GradStep {
    pub step: usize,
    pub i: usize,
    pub j: usize,
    pub kind: OpKind,
    pub gradient: f64,
    /// Objective before the flip.
    pub objective: f64,
}

/// Greedy search. At each step the objective and its gradient are recomputed
/// on the current graph and the unvisited pair with the largest sign-valid
/// gradient magnitude is flipped.
pub fn gradmax_search(
    objective: &dyn Objective,
    graph: &Graph,
    config: &AttackConfig,
    candidates: &CandidateSet,
) -> Result<AttackOutcome> {
    let (outcome, _) = gradmax_with_log(objective, graph, config, candidates)?;
    Ok(outcome)
}

pub fn gradmax_with_log(
    objective: &dyn Objective,
    graph: &Graph,
    config: &AttackConfig,
    candidates: &CandidateSet,
) -> Result<(AttackOutcome, Vec<GradStep>)> {
    config.validate()?;
    let clean = objective.value_on(graph)?;
    let pairs = &candidates.pairs;
    let mut visited = vec![false; pairs.len()];
    let mut current = graph.clone();
    let mut ops = Vec::new();
    let mut log = Vec::new();
    let mut warnings = Vec::new();

    for step in 0..config.budget {
        let a = RelaxedAdjacency::from_graph(&current);
        let (f, grad) = objective.value_and_grad(&a, pairs)?;
        if !f.is_finite() {
            return Err(Error::Numerical(format!("objective not finite at step {step}")));
        }
        let mut best: Option<(usize, f64)> = None;
        for (k, &(i, j)) in pairs.iter().enumerate() {
            if visited[k] {
                continue;
            }
            let g = grad[k];
            let valid = if current.has_edge(i, j) {
                g > 0.0 && current.degree(i) > 1 && current.degree(j) > 1
            } else {
                g < 0.0
            };
            if valid && best.is_none_or(|(_, m)| g.abs() > m) {
                best = Some((k, g.abs()));
            }
        }
        let Some((k, _)) = best else {
            warnings.push(format!("no sign-valid flip left after {step} steps"));
            break;
        };
        let (i, j) = pairs[k];
        let op = EdgeOp::flip(&current, i, j);
        log.push(GradStep {
            step,
            i,
            j,
            kind: op.kind,
            gradient: grad[k],
            objective: f,
        });
        current = current.toggled(i, j);
        visited[k] = true;
        ops.push(op);
    }

    let results = prefix_results(objective, graph, config, &ops)?;
    Ok((
        AttackOutcome {
            method: Method::GradMax,
            clean_objective: clean,
            results,
            warnings,
        },
        log,
    ))
}
