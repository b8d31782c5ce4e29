use super::{
    iterate_scale, step_scale, prefix_results, AttackConfig, AttackOutcome, CandidateSet, DegreeGuard,
    Method,
};
use crate::attack::Objective;
use crate::error::{Error, Result};
use crate::graph::{EdgeOp, Graph};
use crate::relaxed::PairOverlay;

const CONVERGENCE_TOL: f64 = 1e-6;

/// Projected gradient descent on relaxed pair values in `[0, 1]`, then pairs
/// ranked by how far they moved from the clean value.
pub fn continuous_attack(
    objective: &dyn Objective,
    graph: &Graph,
    config: &AttackConfig,
    candidates: &CandidateSet,
) -> Result<AttackOutcome> {
    config.validate()?;
    let clean = objective.value_on(graph)?;
    let scale = step_scale(config, objective, graph, &candidates.pairs, clean)?;
    let pairs = &candidates.pairs;
    let overlay = PairOverlay::new(graph, pairs);
    let a0: Vec<f64> = pairs
        .iter()
        .map(|&(i, j)| if graph.has_edge(i, j) { 1.0 } else { 0.0 })
        .collect();

    let mut values = a0.clone();
    let mut warnings = Vec::new();
    let mut converged = false;
    for t in 0..config.iterations {
        let a = overlay.build(&values);
        let (f, grad) = objective.value_and_grad(&a, pairs)?;
        if !f.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numerical(format!(
                "relaxed objective not finite at iteration {t}"
            )));
        }
        let scale = iterate_scale(config, scale, &grad);
        let mut delta: f64 = 0.0;
        for (v, g) in values.iter_mut().zip(&grad) {
            let next = (*v - config.learning_rate * g / scale).clamp(0.0, 1.0);
            delta = delta.max((next - *v).abs());
            *v = next;
        }
        if delta < CONVERGENCE_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        warnings.push(format!(
            "relaxation stopped after {} iterations without converging",
            config.iterations
        ));
    }

    let mut order: Vec<usize> = (0..pairs.len())
        .filter(|&k| (values[k] - a0[k]).abs() > 0.0)
        .collect();
    order.sort_by(|&p, &q| {
        let dp = (values[p] - a0[p]).abs();
        let dq = (values[q] - a0[q]).abs();
        dq.total_cmp(&dp).then(p.cmp(&q))
    });
    let mut guard = DegreeGuard::new(graph);
    let mut ops = Vec::new();
    for k in order {
        if ops.len() == config.budget {
            break;
        }
        let (i, j) = pairs[k];
        let op = EdgeOp::flip(graph, i, j);
        if guard.admit(&op) {
            ops.push(op);
        }
    }
    if ops.len() < config.budget {
        warnings.push(format!(
            "relaxed solution yields {} flips for budget {}",
            ops.len(),
            config.budget
        ));
    }

    let results = prefix_results(objective, graph, config, &ops)?;
    Ok(AttackOutcome {
        method: Method::Continuous,
        clean_objective: clean,
        results,
        warnings,
    })
}
