//! C ABI over `gad_attack`.
//!
//! Graphs and plans cross the boundary as opaque handles that the caller
//! releases with the matching `*_free` function. Every fallible call returns
//! a [`GadStatus`]; on failure the message is available from
//! [`gad_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gad_attack::attack::{build_candidates, run_attack, AttackConfig, CandidateMode, Method, OddballObjective};
use gad_attack::graph::load_edge_list;
use gad_attack::oddball::{detect, TargetSet};
use gad_attack::{eval, Error, Graph, OpKind, PerturbationPlan};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GadStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Graph = 5,
    Numerical = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GadMethod {
    Binarized = 0,
    GradMax = 1,
    Continuous = 2,
}

/// Opaque graph handle.
pub struct GadGraph(Graph);

/// Opaque perturbation plan handle.
pub struct GadPlan(PerturbationPlan);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> GadStatus {
    match e {
        Error::Io { .. } => GadStatus::Io,
        Error::Parse { .. } => GadStatus::Parse,
        Error::InvalidArgument(_) | Error::Mismatch(_) => GadStatus::InvalidArgument,
        Error::SingularDesign(_) | Error::Numerical(_) => GadStatus::Numerical,
        _ => GadStatus::Graph,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (GadStatus, String)>) -> GadStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GadStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside library call".into());
            GadStatus::Panic
        }
    }
}

fn lift(e: Error) -> (GadStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (GadStatus, String) {
    (GadStatus::NullPointer, format!("{what} is null"))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], (GadStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Message of the last failed call on this thread, or null if none.
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn gad_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Load a whitespace-separated edge list.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gad_graph_load(
    path: *const c_char,
    collapse_directed: bool,
    out: *mut *mut GadGraph,
) -> GadStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| (GadStatus::InvalidArgument, "path is not UTF-8".to_string()))?;
        let g = load_edge_list(path, collapse_directed).map_err(lift)?;
        *out = Box::into_raw(Box::new(GadGraph(g)));
        Ok(())
    })
}

/// Build a graph on nodes `0..n` from `m` edges given as parallel arrays.
///
/// # Safety
/// `src` and `dst` must each point to `m` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gad_graph_from_edges(
    n: usize,
    src: *const usize,
    dst: *const usize,
    m: usize,
    out: *mut *mut GadGraph,
) -> GadStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let s = slice(src, m, "src")?;
        let d = slice(dst, m, "dst")?;
        let g = Graph::from_edges(n, s.iter().copied().zip(d.iter().copied())).map_err(lift)?;
        *out = Box::into_raw(Box::new(GadGraph(g)));
        Ok(())
    })
}

/// # Safety
/// `graph` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gad_graph_free(graph: *mut GadGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// # Safety
/// `graph` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gad_graph_num_nodes(graph: *const GadGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.n())
}

/// # Safety
/// `graph` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gad_graph_num_edges(graph: *const GadGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.num_edges())
}

/// Write one anomaly score per node into `scores` (length `len` = node count).
///
/// # Safety
/// `graph` must be live and `scores` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gad_detect_scores(
    graph: *const GadGraph,
    scores: *mut f64,
    len: usize,
) -> GadStatus {
    guard(|| {
        let g = &graph.as_ref().ok_or_else(|| null("graph"))?.0;
        if scores.is_null() {
            return Err(null("scores"));
        }
        if len != g.n() {
            return Err((
                GadStatus::InvalidArgument,
                format!("score buffer has {len} slots for {} nodes", g.n()),
            ));
        }
        let (_, _, report) = detect(g).map_err(lift)?;
        std::slice::from_raw_parts_mut(scores, len).copy_from_slice(&report.scores);
        Ok(())
    })
}

/// Run an attack against the egonet detector on `targets` (node indices)
/// with at most `budget` flips. With `direct` only pairs touching a target
/// are candidates.
///
/// # Safety
/// `graph` must be live, `targets` must hold `num_targets` indices and
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gad_oddball_attack(
    graph: *const GadGraph,
    method: GadMethod,
    targets: *const usize,
    num_targets: usize,
    budget: usize,
    direct: bool,
    seed: u64,
    out: *mut *mut GadPlan,
) -> GadStatus {
    guard(|| {
        let g = &graph.as_ref().ok_or_else(|| null("graph"))?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let t = slice(targets, num_targets, "targets")?.to_vec();
        let target_set = TargetSet::new(t.clone()).map_err(lift)?;
        target_set.validate(g).map_err(lift)?;
        let mode = if direct {
            CandidateMode::Direct(t)
        } else {
            CandidateMode::Full
        };
        let candidates = build_candidates(g, &mode).map_err(lift)?;
        let mut config = AttackConfig::with_budget(budget);
        config.seed = seed;
        config.eval_budgets = Some(vec![budget]);
        let method = match method {
            GadMethod::Binarized => Method::Binarized,
            GadMethod::GradMax => Method::GradMax,
            GadMethod::Continuous => Method::Continuous,
        };
        let objective = OddballObjective::new(target_set);
        let outcome = run_attack(method, &objective, g, &config, &candidates).map_err(lift)?;
        let plan = outcome
            .at(budget)
            .map(|r| r.plan.clone())
            .unwrap_or_else(|| PerturbationPlan::new(budget));
        *out = Box::into_raw(Box::new(GadPlan(plan)));
        Ok(())
    })
}

/// # Safety
/// `plan` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gad_plan_len(plan: *const GadPlan) -> usize {
    plan.as_ref().map_or(0, |p| p.0.len())
}

/// Read op `index`: endpoints `i < j` and whether it adds the edge.
///
/// # Safety
/// `plan` must be live; the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn gad_plan_get(
    plan: *const GadPlan,
    index: usize,
    i: *mut usize,
    j: *mut usize,
    is_add: *mut bool,
) -> GadStatus {
    guard(|| {
        let p = &plan.as_ref().ok_or_else(|| null("plan"))?.0;
        if i.is_null() || j.is_null() || is_add.is_null() {
            return Err(null("output"));
        }
        let op = p.ops.get(index).ok_or_else(|| {
            (
                GadStatus::InvalidArgument,
                format!("op index {index} out of range for plan of {}", p.len()),
            )
        })?;
        *i = op.i;
        *j = op.j;
        *is_add = op.kind == OpKind::Add;
        Ok(())
    })
}

/// # Safety
/// `plan` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gad_plan_free(plan: *mut GadPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

/// Apply `plan` to `graph`, producing a new graph handle.
///
/// # Safety
/// Both handles must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn gad_graph_apply(
    graph: *const GadGraph,
    plan: *const GadPlan,
    out: *mut *mut GadGraph,
) -> GadStatus {
    guard(|| {
        let g = &graph.as_ref().ok_or_else(|| null("graph"))?.0;
        let p = &plan.as_ref().ok_or_else(|| null("plan"))?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let next = g.apply(p).map_err(lift)?;
        *out = Box::into_raw(Box::new(GadGraph(next)));
        Ok(())
    })
}

/// Relative drop of a target score sum, `(s0 - sb) / s0`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gad_tau_as(s0: f64, sb: f64, out: *mut f64) -> GadStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = eval::tau_as(s0, sb).map_err(lift)?;
        Ok(())
    })
}

/// ROC AUC of `scores` against 0/1 `labels`, ties at half credit.
///
/// # Safety
/// `scores` and `labels` must hold `len` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gad_auc(
    scores: *const f64,
    labels: *const u8,
    len: usize,
    out: *mut f64,
) -> GadStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let s = slice(scores, len, "scores")?;
        let l = slice(labels, len, "labels")?;
        *out = eval::auc_score(s, l).map_err(lift)?;
        Ok(())
    })
}
