//! Run outputs: JSON reports, metric CSV rows and run manifests.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::write_atomic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub b: usize,
    pub objective_before: f64,
    pub objective_after: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_as: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auc: Option<f64>,
    pub flips: usize,
    pub fallback: bool,
    pub plan_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub method: String,
    pub objective: String,
    pub seed: u64,
    pub targets: Vec<u64>,
    pub budgets: Vec<BudgetReport>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetDefense {
    pub node: u64,
    pub score_ols: f64,
    pub score_robust: f64,
    pub rank_ols: usize,
    pub rank_robust: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefenseReport {
    pub defense_method: String,
    pub k: f64,
    pub inlier_tol: f64,
    pub ransac_iters: usize,
    pub seed: u64,
    pub beta_ols: [f64; 2],
    pub beta_robust: [f64; 2],
    pub flips: usize,
    pub targets: Vec<TargetDefense>,
    pub median_rank_ols: f64,
    pub median_rank_robust: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub omega: f64,
    pub xi: f64,
    pub train_auc: f64,
    pub test_auc: f64,
    pub split_seed: u64,
}

/// One line of the metric table. Missing values are left empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub method: String,
    pub budget: usize,
    pub tau_as: Option<f64>,
    pub auc: Option<f64>,
    pub p_n: Option<f64>,
    pub p_e: Option<f64>,
}

pub fn metrics_csv(rows: &[MetricRow]) -> String {
    let cell = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    let mut out = String::from("method,budget,tau_as,auc,p_N,p_E\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.method,
            r.budget,
            cell(r.tau_as),
            cell(r.auc),
            cell(r.p_n),
            cell(r.p_e)
        );
    }
    out
}

pub fn parse_metrics_csv(text: &str) -> Result<Vec<MetricRow>> {
    let cell = |s: &str, line: usize| -> Result<Option<f64>> {
        if s.is_empty() {
            return Ok(None);
        }
        s.parse().map(Some).map_err(|_| Error::Parse {
            line,
            msg: format!("invalid number {s:?}"),
        })
    };
    text.lines()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 6 {
                return Err(Error::Parse {
                    line: k + 1,
                    msg: "expected 6 columns".into(),
                });
            }
            Ok(MetricRow {
                method: f[0].to_string(),
                budget: f[1].parse().map_err(|_| Error::Parse {
                    line: k + 1,
                    msg: "invalid budget".into(),
                })?,
                tau_as: cell(f[2], k + 1)?,
                auc: cell(f[3], k + 1)?,
                p_n: cell(f[4], k + 1)?,
                p_e: cell(f[5], k + 1)?,
            })
        })
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidArgument(format!("cannot serialize report: {e}")))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        msg: e.to_string(),
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    /// Arguments after the program name, `--out` included.
    pub argv: Vec<String>,
    pub params: BTreeMap<String, String>,
    pub seed: Option<u64>,
    /// Input path to sha256.
    pub inputs: BTreeMap<String, String>,
    /// Output file name (relative to the output directory) to sha256.
    pub outputs: BTreeMap<String, String>,
    pub wall_time_secs: f64,
}

impl RunManifest {
    pub const FILE: &'static str = "manifest.json";

    pub fn new(command: &str, argv: Vec<String>) -> Self {
        RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            argv,
            params: BTreeMap::new(),
            seed: None,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            wall_time_secs: 0.0,
        }
    }

    pub fn param(&mut self, key: &str, value: impl ToString) {
        self.params.insert(key.to_string(), value.to_string());
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let digest = file_digest(path)?;
        self.inputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    /// Records digests of every regular file under `dir` except the manifest.
    pub fn collect_outputs(&mut self, dir: &Path) -> Result<()> {
        self.outputs.clear();
        let mut stack = vec![dir.to_path_buf()];
        while let Some(d) = stack.pop() {
            for entry in fs::read_dir(&d).map_err(|e| Error::io(&d, e))? {
                let path = entry.map_err(|e| Error::io(&d, e))?.path();
                if path.is_dir() {
                    stack.push(path);
                    continue;
                }
                let rel = path
                    .strip_prefix(dir)
                    .map_err(|_| Error::InvalidArgument("output outside run directory".into()))?
                    .to_string_lossy()
                    .replace('\\', "/");
                if rel == Self::FILE || rel.ends_with(".tmp") {
                    continue;
                }
                self.outputs.insert(rel, file_digest(&path)?);
            }
        }
        Ok(())
    }

    /// Input paths whose current contents no longer match the recorded digest.
    pub fn changed_inputs(&self) -> Result<Vec<String>> {
        let mut changed = Vec::new();
        for (path, digest) in &self.inputs {
            if &file_digest(Path::new(path))? != digest {
                changed.push(path.clone());
            }
        }
        Ok(changed)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join(Self::FILE), self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }
}
