//! Attributed graphs for the GCN detector: attribute files, stratified
//! train/test splits and a synthetic generator.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{clique_groups, generate_ba, inject_cliques, write_atomic, Graph};
use crate::rng;

#[derive(Debug, Clone)]
pub struct AttributedDataset {
    pub graph: Graph,
    /// One row per node, in node index order.
    pub x: DMatrix<f64>,
    pub y: Vec<u8>,
}

/// Comma separated numeric rows, one per node in ascending label order.
pub fn parse_attributes(text: &str, n: usize) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| {
                let t = t.trim();
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        line: k + 1,
                        msg: format!("invalid attribute value {t:?}"),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    line: k + 1,
                    msg: format!("expected {} columns, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.len() != n {
        return Err(Error::InvalidArgument(format!(
            "attribute file has {} rows for {n} nodes",
            rows.len()
        )));
    }
    let p = rows.first().map_or(0, |r| r.len());
    Ok(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
}

pub fn load_attributes(path: impl AsRef<Path>, n: usize) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_attributes(&text, n)
}

pub fn write_attributes(x: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", x[(i, j)]);
        }
        out.push('\n');
    }
    out
}

pub fn save_attributes(path: impl AsRef<Path>, x: &DMatrix<f64>) -> Result<()> {
    write_atomic(path.as_ref(), write_attributes(x).as_bytes())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Per-class shuffle; `ceil(test_frac * class size)` of each class, at least
/// one, goes to the test side.
pub fn stratified_split(y: &[u8], test_frac: f64, seed: u64) -> Result<Split> {
    if !(test_frac > 0.0 && test_frac < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction {test_frac} outside (0, 1)"
        )));
    }
    let mut r = rng::seeded(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [0u8, 1] {
        let mut members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        if members.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "class {class} needs at least two nodes to split"
            )));
        }
        members.shuffle(&mut r);
        let k = ((test_frac * members.len() as f64).ceil() as usize).clamp(1, members.len() - 1);
        test.extend_from_slice(&members[..k]);
        train.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

/// `count` independent splits drawn from per-split streams of `seed`.
pub fn resplits(y: &[u8], test_frac: f64, count: usize, seed: u64) -> Result<Vec<Split>> {
    (0..count as u64)
        .map(|s| stratified_split(y, test_frac, split_seed(seed, s)))
        .collect()
}

pub fn split_seed(seed: u64, index: u64) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(index)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub num_cliques: usize,
    pub clique_size: usize,
    /// Added to the boosted attributes of clique members.
    pub boost: f64,
    /// Attributes boosted per clique.
    pub boosted_attrs: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n: 300,
            m: 3,
            p: 32,
            num_cliques: 3,
            clique_size: 10,
            boost: 1.0,
            boosted_attrs: 8,
            seed: 0,
        }
    }
}

/// Uniform `[0, 1)` attributes; every member of a group gets `boost` added on
/// `boosted_attrs` columns drawn once per group.
pub fn boosted_attributes(
    n: usize,
    p: usize,
    groups: &[Vec<usize>],
    boost: f64,
    boosted_attrs: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    if boosted_attrs > p {
        return Err(Error::InvalidArgument(format!(
            "cannot boost {boosted_attrs} of {p} attributes"
        )));
    }
    let mut r = rng::stream(seed, 2);
    let mut x = DMatrix::from_element(n, p, 0.0);
    for i in 0..n {
        for j in 0..p {
            x[(i, j)] = r.gen::<f64>();
        }
    }
    for group in groups {
        let cols = rand::seq::index::sample(&mut r, p, boosted_attrs);
        for &u in group {
            if u >= n {
                return Err(Error::InvalidArgument(format!("group member {u} out of range")));
            }
            for c in cols.iter() {
                x[(u, c)] += boost;
            }
        }
    }
    Ok(x)
}

/// Preferential attachment graph with injected cliques; attributes are
/// uniform on `[0, 1)` and clique members get `boost` added on a random
/// subset of columns shared within each clique.
pub fn synthetic_attributed(cfg: &SyntheticConfig) -> Result<AttributedDataset> {
    let base = generate_ba(cfg.n, cfg.m, cfg.seed)?;
    let clique_seed = cfg.seed.wrapping_add(1);
    let (graph, y) = inject_cliques(&base, cfg.num_cliques, cfg.clique_size, clique_seed)?;
    let groups = clique_groups(cfg.n, cfg.num_cliques, cfg.clique_size, clique_seed)?;
    let x = boosted_attributes(cfg.n, cfg.p, &groups, cfg.boost, cfg.boosted_attrs, cfg.seed)?;
    Ok(AttributedDataset { graph, x, y })
}
