//! Edge-flip poisoning attacks over a pluggable differentiable objective.
//!
//! Three methods share one contract: given the clean graph, an objective to
//! minimize, a candidate pair set and a budget `B`, produce for each budget
//! `b <= B` a perturbation plan of at most `b` edge flips.
//!
//! * [`gradmax_search`]: greedy, one flip per step along the largest
//!   sign-valid gradient.
//! * [`continuous_attack`]: projected gradient descent on relaxed entries,
//!   then the top-`b` entries by distance from the clean value.
//! * [`binarized_attack`]: soft decisions `Ż ∈ [0,1]` drive discrete
//!   decisions `Z = -binarized(2Ż - 1)`; the objective is evaluated on the
//!   flipped graph and gradients flow back to `Ż` straight through the
//!   quantizer, with an L1 penalty on `Ż` standing in for the budget.

mod binarized;
mod continuous;
mod gradmax;
pub mod objective;

use serde::{Deserialize, Serialize};

pub use binarized::{binarized_attack, binarized_attack_full, AttackState, HistoryEntry};
pub use continuous::continuous_attack;
pub use gradmax::{gradmax_search, gradmax_with_log, GradStep};
pub use objective::{LgcnObjective, Objective, OddballObjective};

use crate::error::{Error, Result};
use crate::graph::{EdgeOp, Graph, OpKind, PerturbationPlan};
use crate::relaxed::RelaxedAdjacency;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum CandidateMode {
    /// Every unordered pair.
    Full,
    /// Pairs with at least one endpoint among the given targets.
    Direct(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    /// Pairs `(i, j)` with `i < j`, ascending.
    pub pairs: Vec<(usize, usize)>,
    pub mode: CandidateMode,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

pub fn build_candidates(graph: &Graph, mode: &CandidateMode) -> Result<CandidateSet> {
    let n = graph.n();
    let pairs = match mode {
        CandidateMode::Full => (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect(),
        CandidateMode::Direct(targets) => {
            if targets.is_empty() {
                return Err(Error::InvalidArgument(
                    "direct candidate mode needs at least one target".into(),
                ));
            }
            let mut is_target = vec![false; n];
            for &t in targets {
                if t >= n {
                    return Err(Error::InvalidArgument(format!("target {t} not in graph")));
                }
                is_target[t] = true;
            }
            (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .filter(|&(i, j)| is_target[i] || is_target[j])
                .collect()
        }
    };
    Ok(CandidateSet {
        pairs,
        mode: mode.clone(),
    })
}

/// `+1` for `x >= 0`, `-1` otherwise.
pub fn binarized(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Discrete decision for a soft decision: `-1` means flip.
pub fn dummy_decision(z_soft: f64) -> f64 {
    -binarized(2.0 * z_soft - 1.0)
}

/// `(a0 - 0.5) * z + 0.5`: keeps the entry for `z = +1`, toggles it for `z = -1`.
pub fn flip_value(a0: f64, z: f64) -> f64 {
    (a0 - 0.5) * z + 0.5
}

/// Applies discrete decisions over the candidate pairs of `a0`.
pub fn flip_map(a0: &Graph, candidates: &CandidateSet, z: &[f64]) -> Result<Graph> {
    if z.len() != candidates.len() {
        return Err(Error::InvalidArgument("one decision per candidate pair".into()));
    }
    let mut edges: std::collections::BTreeSet<(usize, usize)> = a0.edges().collect();
    for (&(i, j), &zk) in candidates.pairs.iter().zip(z) {
        let v = flip_value(if a0.has_edge(i, j) { 1.0 } else { 0.0 }, zk);
        if v == 1.0 {
            edges.insert((i, j));
        } else {
            edges.remove(&(i, j));
        }
    }
    Graph::with_labels(a0.labels().to_vec(), edges)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Binarized,
    GradMax,
    Continuous,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Binarized => "binarized",
            Method::GradMax => "gradmax",
            Method::Continuous => "continuous",
        }
    }
}

/// Divisor applied to gradients before a step, fixed on the clean graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scaling {
    None,
    /// `|f(A0)|`
    Objective,
    /// Largest candidate gradient magnitude at `A0`.
    Gradient,
    /// Largest candidate gradient magnitude at the current iterate.
    Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    /// Maximum number of edge flips.
    pub budget: usize,
    /// L1 penalty weights swept by the binarized attack.
    pub lambdas: Vec<f64>,
    pub learning_rate: f64,
    pub iterations: usize,
    pub seed: u64,
    /// How gradients are scaled before a step.
    pub scaling: Scaling,
    /// Budgets to report; `None` reports every `b` in `0..=budget`.
    pub eval_budgets: Option<Vec<usize>>,
    /// Binarized attack only: also try the best solution found, cut down to
    /// `b` flips by descending soft value, when it exceeds `b`.
    pub truncate_best: bool,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            budget: 0,
            lambdas: vec![1e-4, 1e-3, 1e-2, 1e-1],
            learning_rate: 0.1,
            iterations: 200,
            seed: 0,
            scaling: Scaling::Adaptive,
            eval_budgets: None,
            truncate_best: true,
        }
    }
}

impl AttackConfig {
    pub fn with_budget(budget: usize) -> Self {
        AttackConfig {
            budget,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidArgument("need at least one iteration".into()));
        }
        if self.lambdas.is_empty() || self.lambdas.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::InvalidArgument(
                "lambda grid must be nonempty and positive".into(),
            ));
        }
        if let Some(bs) = &self.eval_budgets {
            if bs.iter().any(|&b| b > self.budget) {
                return Err(Error::InvalidArgument("report budget exceeds budget".into()));
            }
        }
        Ok(())
    }

    pub fn report_budgets(&self) -> Vec<usize> {
        match &self.eval_budgets {
            Some(bs) => {
                let mut bs = bs.clone();
                bs.sort_unstable();
                bs.dedup();
                bs
            }
            None => (0..=self.budget).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetResult {
    pub budget: usize,
    pub plan: PerturbationPlan,
    /// Objective on the clean graph with `plan` applied.
    pub objective: f64,
    /// Set when the plan was cut down from a larger solution.
    pub fallback: bool,
}

#[derive(Debug, Clone)]
pub struct AttackOutcome {
    pub method: Method,
    pub clean_objective: f64,
    pub results: Vec<BudgetResult>,
    pub warnings: Vec<String>,
}

impl AttackOutcome {
    pub fn at(&self, budget: usize) -> Option<&BudgetResult> {
        self.results.iter().find(|r| r.budget == budget)
    }

    pub fn max_budget(&self) -> Option<&BudgetResult> {
        self.results.last()
    }
}

pub fn run_attack(
    method: Method,
    objective: &dyn Objective,
    graph: &Graph,
    config: &AttackConfig,
    candidates: &CandidateSet,
) -> Result<AttackOutcome> {
    match method {
        Method::Binarized => binarized_attack(objective, graph, config, candidates),
        Method::GradMax => gradmax_search(objective, graph, config, candidates),
        Method::Continuous => continuous_attack(objective, graph, config, candidates),
    }
}

/// Tracks degrees while ops are accepted so that no node loses its last edge.
pub(crate) struct DegreeGuard {
    deg: Vec<usize>,
}

impl DegreeGuard {
    pub fn new(graph: &Graph) -> Self {
        DegreeGuard {
            deg: (0..graph.n()).map(|i| graph.degree(i)).collect(),
        }
    }

    /// Accepts `op` unless it deletes the last edge of an endpoint.
    pub fn admit(&mut self, op: &EdgeOp) -> bool {
        match op.kind {
            OpKind::Add => {
                self.deg[op.i] += 1;
                self.deg[op.j] += 1;
                true
            }
            OpKind::Delete => {
                if self.deg[op.i] <= 1 || self.deg[op.j] <= 1 {
                    return false;
                }
                self.deg[op.i] -= 1;
                self.deg[op.j] -= 1;
                true
            }
        }
    }
}

/// Per-budget results for methods whose plans are prefixes of one sequence.
pub(crate) fn prefix_results(
    objective: &dyn Objective,
    graph: &Graph,
    config: &AttackConfig,
    ops: &[EdgeOp],
) -> Result<Vec<BudgetResult>> {
    config
        .report_budgets()
        .into_iter()
        .map(|b| {
            let plan = PerturbationPlan::from_ops(ops.iter().take(b).copied().collect(), b)?;
            let objective = objective.value_on(&graph.apply(&plan)?)?;
            Ok(BudgetResult {
                budget: b,
                plan,
                objective,
                fallback: false,
            })
        })
        .collect()
}

/// Divisor for one step: the fixed scale, or the current largest gradient
/// magnitude under [`Scaling::Adaptive`].
pub(crate) fn iterate_scale(config: &AttackConfig, fixed: f64, grad: &[f64]) -> f64 {
    if config.scaling != Scaling::Adaptive {
        return fixed;
    }
    let m = grad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m > 0.0 && m.is_finite() {
        m
    } else {
        1.0
    }
}

pub(crate) fn step_scale(
    config: &AttackConfig,
    objective: &dyn Objective,
    graph: &Graph,
    pairs: &[(usize, usize)],
    clean: f64,
) -> Result<f64> {
    let s = match config.scaling {
        Scaling::None | Scaling::Adaptive => 1.0,
        Scaling::Objective => clean.abs(),
        Scaling::Gradient => {
            let (_, g) = objective.value_and_grad(&RelaxedAdjacency::from_graph(graph), pairs)?;
            g.iter().fold(0.0f64, |m, v| m.max(v.abs()))
        }
    };
    Ok(if s > 0.0 && s.is_finite() { s } else { 1.0 })
}
