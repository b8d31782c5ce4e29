use std::ffi::{CStr, CString};
use std::ptr;

use gad_attack::graph::generate_ba;
use gad_attack::oddball::detect;
use gad_attack_ffi::*;

fn handle(g: &gad_attack::Graph) -> *mut GadGraph {
    let (src, dst): (Vec<usize>, Vec<usize>) = g.edges().unzip();
    let mut out = ptr::null_mut();
    let st = unsafe { gad_graph_from_edges(g.n(), src.as_ptr(), dst.as_ptr(), src.len(), &mut out) };
    assert_eq!(st, GadStatus::Ok);
    out
}

fn last_error() -> String {
    let p = gad_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn graph_counts_and_scores_match_library() {
    let g = generate_ba(80, 3, 1).unwrap();
    let h = handle(&g);
    unsafe {
        assert_eq!(gad_graph_num_nodes(h), 80);
        assert_eq!(gad_graph_num_edges(h), g.num_edges());
        let mut scores = vec![0.0; 80];
        assert_eq!(gad_detect_scores(h, scores.as_mut_ptr(), 80), GadStatus::Ok);
        let (_, _, report) = detect(&g).unwrap();
        assert_eq!(scores, report.scores);
        assert_eq!(gad_detect_scores(h, scores.as_mut_ptr(), 79), GadStatus::InvalidArgument);
        gad_graph_free(h);
    }
}

#[test]
fn attack_plan_round_trip() {
    let g = generate_ba(60, 3, 7).unwrap();
    let (_, _, report) = detect(&g).unwrap();
    let targets: Vec<usize> = report.ranking[..3].to_vec();
    let h = handle(&g);
    unsafe {
        let mut plan = ptr::null_mut();
        let st = gad_oddball_attack(h, GadMethod::GradMax, targets.as_ptr(), 3, 4, true, 0, &mut plan);
        assert_eq!(st, GadStatus::Ok);
        let len = gad_plan_len(plan);
        assert!(len <= 4);
        for k in 0..len {
            let (mut i, mut j, mut add) = (0usize, 0usize, false);
            assert_eq!(gad_plan_get(plan, k, &mut i, &mut j, &mut add), GadStatus::Ok);
            assert!(i < j);
            assert!(targets.contains(&i) || targets.contains(&j));
            assert_eq!(add, !g.has_edge(i, j));
        }
        let (mut i, mut j, mut add) = (0usize, 0usize, false);
        assert_eq!(gad_plan_get(plan, len, &mut i, &mut j, &mut add), GadStatus::InvalidArgument);

        let mut next = ptr::null_mut();
        assert_eq!(gad_graph_apply(h, plan, &mut next), GadStatus::Ok);
        let m = gad_graph_num_edges(next) as i64 - g.num_edges() as i64;
        assert!(m.unsigned_abs() as usize <= len);
        gad_graph_free(next);
        gad_plan_free(plan);
        gad_graph_free(h);
    }
}

#[test]
fn null_and_invalid_inputs_report_errors() {
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(gad_graph_load(ptr::null(), false, &mut out), GadStatus::NullPointer);
        assert!(last_error().contains("path"));

        let missing = CString::new("/nonexistent/graph.txt").unwrap();
        assert_eq!(gad_graph_load(missing.as_ptr(), false, &mut out), GadStatus::Io);
        assert!(out.is_null());

        let src = [0usize];
        let dst = [5usize];
        assert_ne!(gad_graph_from_edges(3, src.as_ptr(), dst.as_ptr(), 1, &mut out), GadStatus::Ok);

        let mut v = 0.0;
        assert_eq!(gad_tau_as(0.0, 1.0, &mut v), GadStatus::InvalidArgument);
        assert_eq!(gad_detect_scores(ptr::null(), &mut v, 1), GadStatus::NullPointer);
        assert_eq!(gad_graph_num_nodes(ptr::null()), 0);
        assert_eq!(gad_plan_len(ptr::null()), 0);
        gad_graph_free(ptr::null_mut());
        gad_plan_free(ptr::null_mut());
    }
}

#[test]
fn load_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.txt");
    std::fs::write(&path, "1 2\n2 3\n3 1\n3 4\n").unwrap();
    let c = CString::new(path.to_str().unwrap()).unwrap();
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(gad_graph_load(c.as_ptr(), false, &mut out), GadStatus::Ok);
        assert_eq!(gad_graph_num_nodes(out), 4);
        assert_eq!(gad_graph_num_edges(out), 4);
        gad_graph_free(out);
    }
}

#[test]
fn metrics() {
    let mut v = 0.0;
    unsafe {
        assert_eq!(gad_tau_as(10.0, 4.0, &mut v), GadStatus::Ok);
        assert!((v - 0.6).abs() < 1e-15);
        let scores = [0.1, 0.4, 0.35, 0.8];
        let labels = [0u8, 0, 1, 1];
        assert_eq!(gad_auc(scores.as_ptr(), labels.as_ptr(), 4, &mut v), GadStatus::Ok);
        assert!((v - 0.75).abs() < 1e-15);
    }
}

#[test]
fn header_declares_entry_points() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/gad_attack.h")).unwrap();
    for name in [
        "gad_last_error",
        "gad_graph_load",
        "gad_graph_from_edges",
        "gad_graph_free",
        "gad_detect_scores",
        "gad_oddball_attack",
        "gad_plan_get",
        "gad_plan_free",
        "gad_tau_as",
        "gad_auc",
        "GAD_STATUS_OK",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"gad_attack.h\"\nint main(void) { GadGraph *g = 0; return (int)gad_graph_num_nodes(g); }\n",
    )
    .unwrap();
    let status = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&src)
        .status();
    match status {
        Ok(s) => assert!(s.success()),
        Err(_) => eprintln!("no C compiler found, skipping"),
    }
}
