//! Plain-text formats: edge lists, node labels and perturbation plans.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{EdgeOp, Graph, OpKind, PerturbationPlan};
use crate::error::{Error, Result};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_label(tok: Option<&str>, line: usize) -> Result<u64> {
    let tok = tok.ok_or_else(|| Error::Parse {
        line,
        msg: "expected two node labels".into(),
    })?;
    tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("invalid node label {tok:?}"),
    })
}

/// Parses "u v" lines into an undirected simple graph.
///
/// Self-loops are dropped. Repeated and reversed pairs are merged when
/// `collapse_directed` is set and rejected otherwise.
pub fn parse_edge_list(text: &str, collapse_directed: bool) -> Result<Graph> {
    let mut raw = Vec::new();
    let mut seen = HashSet::new();
    for (line, l) in content_lines(text) {
        let mut toks = l.split_whitespace();
        let u = parse_label(toks.next(), line)?;
        let v = parse_label(toks.next(), line)?;
        if toks.next().is_some() {
            return Err(Error::Parse {
                line,
                msg: "trailing tokens after node pair".into(),
            });
        }
        if u == v {
            continue;
        }
        let key = (u.min(v), u.max(v));
        if !seen.insert(key) && !collapse_directed {
            return Err(Error::Parse {
                line,
                msg: format!("duplicate pair ({u}, {v})"),
            });
        }
        raw.push(key);
    }
    if seen.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let labels: Vec<u64> = raw
        .iter()
        .flat_map(|&(u, v)| [u, v])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let idx = |l: u64| labels.binary_search(&l).expect("label collected above");
    let edges: Vec<_> = seen.iter().map(|&(u, v)| (idx(u), idx(v))).collect();
    Graph::with_labels(labels.clone(), edges)
}

pub fn load_edge_list(path: impl AsRef<Path>, collapse_directed: bool) -> Result<Graph> {
    parse_edge_list(&read(path.as_ref())?, collapse_directed)
}

/// Canonical form: one "u v" line per edge in original labels, ascending.
pub fn write_edge_list(graph: &Graph) -> String {
    let mut out = String::new();
    for (i, j) in graph.edges() {
        let _ = writeln!(out, "{} {}", graph.label(i), graph.label(j));
    }
    out
}

pub fn save_edge_list(path: impl AsRef<Path>, graph: &Graph) -> Result<()> {
    write_atomic(path.as_ref(), write_edge_list(graph).as_bytes())
}

/// Reads "u y" lines; nodes not listed get label 0.
pub fn load_labels(path: impl AsRef<Path>, graph: &Graph) -> Result<Vec<u8>> {
    let text = read(path.as_ref())?;
    let mut y = vec![0u8; graph.n()];
    for (line, l) in content_lines(&text) {
        let mut toks = l.split_whitespace();
        let u = parse_label(toks.next(), line)?;
        let v = parse_label(toks.next(), line)?;
        if v > 1 {
            return Err(Error::Parse {
                line,
                msg: format!("label must be 0 or 1, got {v}"),
            });
        }
        // nodes dropped by component extraction are skipped
        if let Some(i) = graph.index_of(u) {
            y[i] = v as u8;
        }
    }
    Ok(y)
}

pub fn save_labels(path: impl AsRef<Path>, graph: &Graph, y: &[u8]) -> Result<()> {
    let mut out = String::new();
    for (i, &v) in y.iter().enumerate() {
        let _ = writeln!(out, "{} {}", graph.label(i), v);
    }
    write_atomic(path.as_ref(), out.as_bytes())
}

/// "+ u v" / "- u v" lines in original labels, in application order.
pub fn write_plan(graph: &Graph, plan: &PerturbationPlan) -> String {
    let mut out = String::new();
    for op in &plan.ops {
        let sign = match op.kind {
            OpKind::Add => '+',
            OpKind::Delete => '-',
        };
        let _ = writeln!(out, "{sign} {} {}", graph.label(op.i), graph.label(op.j));
    }
    out
}

pub fn save_plan(path: impl AsRef<Path>, graph: &Graph, plan: &PerturbationPlan) -> Result<()> {
    write_atomic(path.as_ref(), write_plan(graph, plan).as_bytes())
}

pub fn parse_plan(text: &str, graph: &Graph) -> Result<PerturbationPlan> {
    let mut ops = Vec::new();
    for (line, l) in content_lines(text) {
        let mut toks = l.split_whitespace();
        let kind = match toks.next() {
            Some("+") => OpKind::Add,
            Some("-") => OpKind::Delete,
            other => {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected '+' or '-', got {other:?}"),
                })
            }
        };
        let u = parse_label(toks.next(), line)?;
        let v = parse_label(toks.next(), line)?;
        let lookup = |l: u64| {
            graph.index_of(l).ok_or_else(|| Error::Parse {
                line,
                msg: format!("unknown node label {l}"),
            })
        };
        ops.push(EdgeOp::new(lookup(u)?, lookup(v)?, kind));
    }
    let budget = ops.len();
    PerturbationPlan::from_ops(ops, budget)
}

pub fn load_plan(path: impl AsRef<Path>, graph: &Graph) -> Result<PerturbationPlan> {
    parse_plan(&read(path.as_ref())?, graph)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_simple_path() {
        let g = parse_edge_list("0 1\n1 2", true).unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn collapses_duplicates_and_drops_loops() {
        let g = parse_edge_list("0 1\n1 0\n1 1", true).unwrap();
        assert_eq!(g.n(), 2);
        assert_eq!(g.num_edges(), 1);
        assert!(parse_edge_list("0 1\n1 0", false).is_err());
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_edge_list("# header\n0 1\n2 x\n", true).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert!(matches!(parse_edge_list("# nothing\n", true), Err(Error::EmptyGraph)));
        assert!(matches!(parse_edge_list("3 3\n", true), Err(Error::EmptyGraph)));
    }

    #[test]
    fn sparse_labels_round_trip() {
        let text = "# comment\n100 7\n7 42\n42 100\n5 100\n";
        let g = parse_edge_list(text, true).unwrap();
        assert_eq!(g.labels(), &[5, 7, 42, 100]);
        let canon = write_edge_list(&g);
        assert_eq!(canon, "5 100\n7 42\n7 100\n42 100\n");
        let again = parse_edge_list(&canon, false).unwrap();
        assert_eq!(write_edge_list(&again), canon);
    }

    #[test]
    fn plan_text_round_trip() {
        let g = parse_edge_list("10 20\n20 30\n", true).unwrap();
        let plan = PerturbationPlan::from_ops(
            vec![EdgeOp::new(0, 2, OpKind::Add), EdgeOp::new(0, 1, OpKind::Delete)],
            2,
        )
        .unwrap();
        let text = write_plan(&g, &plan);
        assert_eq!(text, "+ 10 30\n- 10 20\n");
        assert_eq!(parse_plan(&text, &g).unwrap(), plan);
    }
}
