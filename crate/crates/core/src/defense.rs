//! Robust re-estimation of the egonet power law: Huber regression by
//! iteratively reweighted least squares, and RANSAC.

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::oddball::{
    anomaly_scores, egonet_features, fit_line, fit_power_law_ols, AnomalyReport, EgonetFeatures,
    PowerLawFit,
};
use crate::rng;

const IRLS_TOL: f64 = 1e-8;
const IRLS_MAX_ITER: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustFitConfig {
    /// Huber threshold, in log-space residual units.
    pub k: f64,
    pub ransac_iters: usize,
    pub inlier_tol: f64,
    pub seed: u64,
}

impl Default for RobustFitConfig {
    fn default() -> Self {
        RobustFitConfig {
            k: 1.0,
            ransac_iters: 1000,
            inlier_tol: 1.0,
            seed: 0,
        }
    }
}

impl RobustFitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0) || !(self.inlier_tol > 0.0) || self.ransac_iters == 0 {
            return Err(Error::InvalidArgument(
                "robust fit needs k > 0, inlier_tol > 0 and at least one iteration".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RobustMethod {
    Huber,
    Ransac,
}

impl RobustMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            RobustMethod::Huber => "huber",
            RobustMethod::Ransac => "ransac",
        }
    }
}

pub fn huber_loss(t: f64, k: f64) -> f64 {
    if t.abs() <= k {
        0.5 * t * t
    } else {
        k * t.abs() - 0.5 * k * k
    }
}

fn huber_total(x: &[f64], y: &[f64], b0: f64, b1: f64, k: f64) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&xi, &yi)| huber_loss(yi - b0 - b1 * xi, k))
        .sum()
}

/// IRLS iterates with the Huber objective after each update.
#[derive(Debug, Clone)]
pub struct HuberTrace {
    pub fit: PowerLawFit,
    pub objective: Vec<f64>,
    pub iterations: usize,
}

pub fn huber_fit(features: &EgonetFeatures, k: f64) -> Result<PowerLawFit> {
    huber_fit_trace(features, k).map(|t| t.fit)
}

pub fn huber_fit_trace(features: &EgonetFeatures, k: f64) -> Result<HuberTrace> {
    if !(k > 0.0) {
        return Err(Error::InvalidArgument(format!("huber threshold {k} must be positive")));
    }
    let x = features.log_n();
    let y = features.log_e();
    let (mut b0, mut b1) = fit_line(&x, &y, None)?;
    let mut objective = vec![huber_total(&x, &y, b0, b1, k)];
    let mut w = vec![1.0; x.len()];
    let mut iterations = 0;
    for _ in 0..IRLS_MAX_ITER {
        iterations += 1;
        for i in 0..x.len() {
            let r = (y[i] - b0 - b1 * x[i]).abs();
            w[i] = if r <= k { 1.0 } else { k / r };
        }
        let (n0, n1) = fit_line(&x, &y, Some(&w))?;
        let change = (n0 - b0).abs().max((n1 - b1).abs());
        b0 = n0;
        b1 = n1;
        objective.push(huber_total(&x, &y, b0, b1, k));
        if change < IRLS_TOL {
            break;
        }
    }
    Ok(HuberTrace {
        fit: PowerLawFit {
            beta0: b0,
            beta1: b1,
        },
        objective,
        iterations,
    })
}

#[derive(Debug, Clone)]
pub struct RansacResult {
    pub fit: PowerLawFit,
    /// Largest consensus set, ascending indices.
    pub inliers: Vec<usize>,
    /// The two points whose line produced the consensus set.
    pub sample: (usize, usize),
    /// Best consensus size after each iteration.
    pub best_sizes: Vec<usize>,
}

pub fn ransac_fit(features: &EgonetFeatures, config: &RobustFitConfig) -> Result<PowerLawFit> {
    ransac_detailed(features, config).map(|r| r.fit)
}

pub fn ransac_detailed(features: &EgonetFeatures, config: &RobustFitConfig) -> Result<RansacResult> {
    config.validate()?;
    let x = features.log_n();
    let y = features.log_e();
    let n = x.len();
    if n < 2 {
        return Err(Error::SingularDesign(format!("need at least two points, got {n}")));
    }
    // (consensus size, sample) per iteration; size 0 for degenerate samples
    let trials: Vec<(usize, (usize, usize))> = (0..config.ransac_iters as u64)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::stream(config.seed, t);
            let idx = sample(&mut r, n, 2);
            let (p, q) = (idx.index(0), idx.index(1));
            let (p, q) = (p.min(q), p.max(q));
            if x[p] == x[q] {
                return (0, (p, q));
            }
            let b1 = (y[q] - y[p]) / (x[q] - x[p]);
            let b0 = y[p] - b1 * x[p];
            let count = (0..n)
                .filter(|&i| (y[i] - b0 - b1 * x[i]).abs() <= config.inlier_tol)
                .count();
            (count, (p, q))
        })
        .collect();

    let mut best: Option<(usize, (usize, usize))> = None;
    let mut best_sizes = Vec::with_capacity(trials.len());
    for &(count, s) in &trials {
        if count > 0 && best.is_none_or(|(c, _)| count > c) {
            best = Some((count, s));
        }
        best_sizes.push(best.map_or(0, |(c, _)| c));
    }
    let Some((_, (p, q))) = best else {
        return Err(Error::SingularDesign(
            "every sampled pair had equal regressors".into(),
        ));
    };
    let b1 = (y[q] - y[p]) / (x[q] - x[p]);
    let b0 = y[p] - b1 * x[p];
    let inliers: Vec<usize> = (0..n)
        .filter(|&i| (y[i] - b0 - b1 * x[i]).abs() <= config.inlier_tol)
        .collect();
    let xs: Vec<f64> = inliers.iter().map(|&i| x[i]).collect();
    let ys: Vec<f64> = inliers.iter().map(|&i| y[i]).collect();
    let (beta0, beta1) = fit_line(&xs, &ys, None)?;
    Ok(RansacResult {
        fit: PowerLawFit { beta0, beta1 },
        inliers,
        sample: (p, q),
        best_sizes,
    })
}

pub fn robust_fit(
    features: &EgonetFeatures,
    method: RobustMethod,
    config: &RobustFitConfig,
) -> Result<PowerLawFit> {
    match method {
        RobustMethod::Huber => huber_fit(features, config.k),
        RobustMethod::Ransac => ransac_fit(features, config),
    }
}

pub fn robust_anomaly_scores(
    graph: &Graph,
    method: RobustMethod,
    config: &RobustFitConfig,
) -> Result<AnomalyReport> {
    let features = egonet_features(graph)?;
    let fit = robust_fit(&features, method, config)?;
    Ok(anomaly_scores(&features, &fit))
}

/// Plain OLS and robust fit on the same features, for side by side reports.
pub fn compare_fits(
    features: &EgonetFeatures,
    method: RobustMethod,
    config: &RobustFitConfig,
) -> Result<(PowerLawFit, PowerLawFit)> {
    Ok((
        fit_power_law_ols(features)?,
        robust_fit(features, method, config)?,
    ))
}
