use rayon::prelude::*;
use serde::Serialize;

use super::{
    dummy_decision, flip_value, iterate_scale, step_scale, AttackConfig, AttackOutcome, BudgetResult,
    CandidateSet, DegreeGuard, Method,
};
use crate::attack::Objective;
use crate::error::{Error, Result};
use crate::graph::{EdgeOp, Graph, OpKind, PerturbationPlan};
use crate::relaxed::PairOverlay;

/// Forward pass record. Only flipped pairs are kept, with their soft values.
#[derive(Debug, Clone, Serialize)]
pub struct HistoryEntry {
    pub lambda: f64,
    pub iteration: usize,
    pub objective: f64,
    pub flip_count: usize,
    /// No node left without edges.
    pub feasible: bool,
    /// `(candidate index, Ż)` for every pair with `Z = -1`.
    pub flips: Vec<(u32, f64)>,
}

/// Final soft and discrete decisions of one λ run.
#[derive(Debug, Clone)]
pub struct AttackState {
    pub lambda: f64,
    pub z_soft: Vec<f64>,
    pub z_dummy: Vec<f64>,
}

pub fn binarized_attack(
    objective: &dyn Objective,
    graph: &Graph,
    config: &AttackConfig,
    candidates: &CandidateSet,
) -> Result<AttackOutcome> {
    binarized_attack_full(objective, graph, config, candidates).map(|(o, _, _)| o)
}

/// Runs the attack and also returns the pooled history and final states.
pub fn binarized_attack_full(
    objective: &dyn Objective,
    graph: &Graph,
    config: &AttackConfig,
    candidates: &CandidateSet,
) -> Result<(AttackOutcome, Vec<HistoryEntry>, Vec<AttackState>)> {
    config.validate()?;
    let clean = objective.value_on(graph)?;
    let scale = step_scale(config, objective, graph, &candidates.pairs, clean)?;
    let pairs = &candidates.pairs;
    let overlay = PairOverlay::new(graph, pairs);
    let a0: Vec<f64> = pairs
        .iter()
        .map(|&(i, j)| if graph.has_edge(i, j) { 1.0 } else { 0.0 })
        .collect();

    let runs: Vec<(Vec<HistoryEntry>, AttackState)> = config
        .lambdas
        .par_iter()
        .map(|&lambda| run_lambda(objective, &overlay, pairs, &a0, lambda, scale, config))
        .collect::<Result<_>>()?;
    let mut history = Vec::new();
    let mut states = Vec::new();
    for (h, s) in runs {
        history.extend(h);
        states.push(s);
    }

    let results = select_plans(objective, graph, config, candidates, &history)?;
    let outcome = AttackOutcome {
        method: Method::Binarized,
        clean_objective: clean,
        results,
        warnings: Vec::new(),
    };
    Ok((outcome, history, states))
}

fn run_lambda(
    objective: &dyn Objective,
    overlay: &PairOverlay,
    pairs: &[(usize, usize)],
    a0: &[f64],
    lambda: f64,
    scale: f64,
    config: &AttackConfig,
) -> Result<(Vec<HistoryEntry>, AttackState)> {
    let mut z_soft = vec![0.0; pairs.len()];
    let mut z_dummy = vec![1.0; pairs.len()];
    let mut history = Vec::with_capacity(config.iterations + 1);
    for t in 0..=config.iterations {
        for (z, &s) in z_dummy.iter_mut().zip(&z_soft) {
            *z = dummy_decision(s);
        }
        let values: Vec<f64> = a0.iter().zip(&z_dummy).map(|(&a, &z)| flip_value(a, z)).collect();
        let a = overlay.build(&values);
        let (f, grad) = objective.value_and_grad(&a, pairs)?;
        if !f.is_finite() {
            return Err(Error::Numerical(format!(
                "objective not finite at iteration {t} (lambda {lambda})"
            )));
        }
        let flips: Vec<(u32, f64)> = z_dummy
            .iter()
            .enumerate()
            .filter(|(_, &z)| z < 0.0)
            .map(|(k, _)| (k as u32, z_soft[k]))
            .collect();
        history.push(HistoryEntry {
            lambda,
            iteration: t,
            objective: f,
            flip_count: flips.len(),
            feasible: (0..a.n()).all(|i| a.degree(i) > 0.0),
            flips,
        });
        if t == config.iterations {
            break;
        }
        // straight through the quantizer: d A / d Ż = -2 (a0 - 0.5)
        let scale = iterate_scale(config, scale, &grad);
        for k in 0..z_soft.len() {
            let g = grad[k] / scale * (1.0 - 2.0 * a0[k]) + lambda;
            z_soft[k] = (z_soft[k] - config.learning_rate * g).clamp(0.0, 1.0);
        }
    }
    Ok((
        history,
        AttackState {
            lambda,
            z_soft,
            z_dummy,
        },
    ))
}

/// Ops for a set of flips: ranked by soft value, isolating deletes skipped,
/// at most `limit` kept; adds are emitted before deletes.
fn plan_from_flips(
    graph: &Graph,
    candidates: &CandidateSet,
    flips: &[(u32, f64)],
    limit: usize,
) -> Result<PerturbationPlan> {
    let mut ranked = flips.to_vec();
    ranked.sort_by(|p, q| q.1.total_cmp(&p.1).then(p.0.cmp(&q.0)));
    let mut guard = DegreeGuard::new(graph);
    let mut adds = Vec::new();
    let mut dels = Vec::new();
    for (k, _) in ranked {
        if adds.len() + dels.len() == limit {
            break;
        }
        let (i, j) = candidates.pairs[k as usize];
        let op = EdgeOp::flip(graph, i, j);
        if guard.admit(&op) {
            match op.kind {
                OpKind::Add => adds.push(op),
                OpKind::Delete => dels.push(op),
            }
        }
    }
    adds.extend(dels);
    PerturbationPlan::from_ops(adds, limit)
}

fn select_plans(
    objective: &dyn Objective,
    graph: &Graph,
    config: &AttackConfig,
    candidates: &CandidateSet,
    history: &[HistoryEntry],
) -> Result<Vec<BudgetResult>> {
    let best_overall = history
        .iter()
        .filter(|h| h.feasible)
        .min_by(|p, q| p.objective.total_cmp(&q.objective));
    config
        .report_budgets()
        .into_iter()
        .map(|b| {
            let within = history
                .iter()
                .filter(|h| h.feasible && h.flip_count <= b)
                .min_by(|p, q| p.objective.total_cmp(&q.objective));
            let mut chosen = match within {
                Some(h) => {
                    let plan = plan_from_flips(graph, candidates, &h.flips, h.flip_count)?;
                    let plan = PerturbationPlan::from_ops(plan.ops, b)?;
                    Some(BudgetResult {
                        budget: b,
                        plan,
                        objective: h.objective,
                        fallback: false,
                    })
                }
                None => None,
            };
            if config.truncate_best {
                if let Some(best) = best_overall.filter(|h| h.flip_count > b) {
                    let plan = plan_from_flips(graph, candidates, &best.flips, b)?;
                    let value = objective.value_on(&graph.apply(&plan)?)?;
                    if chosen.as_ref().is_none_or(|c| value < c.objective) {
                        chosen = Some(BudgetResult {
                            budget: b,
                            plan,
                            objective: value,
                            fallback: true,
                        });
                    }
                }
            }
            chosen.ok_or_else(|| {
                Error::Numerical(format!("no feasible perturbation found for budget {b}"))
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::{build_candidates, CandidateMode, OddballObjective};
    use crate::graph::generate_ba;
    use crate::oddball::{detect, pick_targets, surrogate_objective, TargetSet};

    fn entry(objective: f64, flips: Vec<(u32, f64)>) -> HistoryEntry {
        HistoryEntry {
            lambda: 0.1,
            iteration: 0,
            objective,
            flip_count: flips.len(),
            feasible: true,
            flips,
        }
    }

    #[test]
    fn selection_takes_lowest_objective_within_budget() {
        let g = generate_ba(20, 2, 0).unwrap();
        let c = build_candidates(&g, &CandidateMode::Full).unwrap();
        let obj = OddballObjective::new(TargetSet::new(vec![0]).unwrap());
        let mut config = AttackConfig::with_budget(2);
        config.truncate_best = false;
        let history = vec![
            entry(9.0, vec![]),
            entry(5.0, vec![(3, 0.6)]),
            entry(3.0, vec![(3, 0.7), (8, 0.55)]),
        ];
        let r = select_plans(&obj, &g, &config, &c, &history).unwrap();
        assert_eq!(r[0].objective, 9.0);
        assert_eq!(r[1].objective, 5.0);
        assert_eq!(r[2].objective, 3.0);
        assert_eq!(r[2].plan.len(), 2);
        assert!(r.iter().all(|x| !x.fallback));
    }

    #[test]
    fn truncation_fallback_when_nothing_fits() {
        let g = generate_ba(20, 2, 0).unwrap();
        let c = build_candidates(&g, &CandidateMode::Full).unwrap();
        let obj = OddballObjective::new(TargetSet::new(vec![0]).unwrap());
        let mut config = AttackConfig::with_budget(1);
        config.eval_budgets = Some(vec![1]);
        let history = vec![entry(1.0, vec![(3, 0.6), (8, 0.9), (12, 0.7)])];
        let r = select_plans(&obj, &g, &config, &c, &history).unwrap();
        assert!(r[0].fallback);
        let (i, j) = c.pairs[8];
        assert_eq!((r[0].plan.ops[0].i, r[0].plan.ops[0].j), (i, j));
        assert_eq!(r[0].objective, obj.value_on(&g.apply(&r[0].plan).unwrap()).unwrap());
    }

    #[test]
    fn zero_budget_is_clean() {
        let g = generate_ba(50, 3, 1).unwrap();
        let c = build_candidates(&g, &CandidateMode::Full).unwrap();
        let obj = OddballObjective::new(TargetSet::new(vec![0, 1]).unwrap());
        let mut config = AttackConfig::with_budget(0);
        config.iterations = 5;
        let out = binarized_attack(&obj, &g, &config, &c).unwrap();
        assert!(out.results[0].plan.is_empty());
        assert_eq!(out.results[0].objective, out.clean_objective);
    }

    #[test]
    fn ba_100_attack_lowers_surrogate() {
        let g = generate_ba(100, 5, 42).unwrap();
        let (_, _, report) = detect(&g).unwrap();
        let targets = pick_targets(&report, 50, 5, 42).unwrap();
        let c = build_candidates(&g, &CandidateMode::Full).unwrap();
        let mut config = AttackConfig::with_budget(10);
        config.seed = 42;
        let obj = OddballObjective::new(targets.clone());
        let (out, history, states) = binarized_attack_full(&obj, &g, &config, &c).unwrap();
        assert_eq!(history.len(), config.lambdas.len() * (config.iterations + 1));
        assert_eq!(states.len(), config.lambdas.len());
        let r = out.at(10).unwrap();
        assert!(r.plan.len() <= 10);
        let p = g.apply(&r.plan).unwrap();
        assert!(p.isolated_nodes().is_empty());
        let replayed = surrogate_objective(&p, &targets).unwrap();
        assert!((replayed - r.objective).abs() <= 1e-9 * replayed.abs().max(1.0));
        assert!(replayed <= out.clean_objective);
        for s in &states {
            assert!(s.z_soft.iter().all(|v| (0.0..=1.0).contains(v)));
            assert!(s.z_dummy.iter().all(|&z| z == 1.0 || z == -1.0));
        }
    }
}
