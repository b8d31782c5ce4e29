//! Attack metrics: decrease of target anomaly scores, ROC AUC, and a Monte
//! Carlo permutation test for shifts in the egonet feature distributions.

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::lgcn::{normalized_adjacency, predict, rwls_fit};
use crate::oddball::EgonetFeatures;
use crate::rng;

pub const DEFAULT_PERMUTATIONS: usize = 100_000;

/// Relative decrease `(s0 - sb) / s0`.
pub fn tau_as(s0: f64, sb: f64) -> Result<f64> {
    if !(s0 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "clean score sum {s0} must be positive"
        )));
    }
    Ok((s0 - sb) / s0)
}

/// Rank AUC with midranks for ties.
pub fn auc_score(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidArgument("scores and labels differ in length".into()));
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidArgument("AUC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // ranks start..end (1-based start+1..=end) share their mean
        let mid = (start + 1 + end) as f64 / 2.0;
        let pos = order[start..end].iter().filter(|&&i| labels[i] == 1).count();
        rank_sum += mid * pos as f64;
        start = end;
    }
    let np = n_pos as f64;
    Ok((rank_sum - np * (np + 1.0) / 2.0) / (np * n_neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermTestResult {
    pub t0: f64,
    pub p_value: f64,
    pub m: usize,
    pub seed: u64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Two-sample permutation test on `|mean(x) - mean(y)|`. Each trial draws a
/// fresh assignment of the pooled values to groups of the original sizes.
pub fn permutation_test(x: &[f64], y: &[f64], m: usize, seed: u64) -> Result<PermTestResult> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::InvalidArgument("both samples must be nonempty".into()));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("need at least one resample".into()));
    }
    let t0 = (mean(x) - mean(y)).abs();
    let pool: Vec<f64> = x.iter().chain(y).copied().collect();
    let total: f64 = pool.iter().sum();
    let (nx, ny) = (x.len(), y.len());
    let hits = (0..m as u64)
        .into_par_iter()
        .filter(|&j| {
            let mut r = rng::stream(seed, j);
            let sx: f64 = sample(&mut r, pool.len(), nx).iter().map(|i| pool[i]).sum();
            let t = (sx / nx as f64 - (total - sx) / ny as f64).abs();
            t >= t0
        })
        .count();
    Ok(PermTestResult {
        t0,
        p_value: hits as f64 / m as f64,
        m,
        seed,
    })
}

/// Permutation tests on the `N` and `E` vectors of two feature sets.
pub fn feature_shift_report(
    clean: &EgonetFeatures,
    poisoned: &EgonetFeatures,
    m: usize,
    seed: u64,
) -> Result<(PermTestResult, PermTestResult)> {
    if clean.len() != poisoned.len() {
        return Err(Error::InvalidArgument("feature sets differ in length".into()));
    }
    let pn = permutation_test(&clean.n, &poisoned.n, m, seed)?;
    let pe = permutation_test(&clean.e, &poisoned.e, m, seed ^ 0x5eed_e000)?;
    Ok((pn, pe))
}

/// Train and test AUC of the linearized GCN fitted on `graph`.
pub fn lgcn_auc(
    graph: &Graph,
    x: &DMatrix<f64>,
    y: &[u8],
    train: &[usize],
    test: &[usize],
    omega: f64,
    xi: f64,
) -> Result<(f64, f64)> {
    let op = normalized_adjacency(graph)?;
    let fit = rwls_fit(&op, x, y, train, omega, xi)?;
    let scores = predict(&fit, &op, x);
    let part = |idx: &[usize]| {
        let s: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
        let l: Vec<u8> = idx.iter().map(|&i| y[i]).collect();
        auc_score(&s, &l)
    };
    Ok((part(train)?, part(test)?))
}
