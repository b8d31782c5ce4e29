use proptest::prelude::*;
use rand::Rng;

use gad_attack::attack::{
    build_candidates, dummy_decision, flip_map, run_attack, AttackConfig, CandidateMode, Method,
    OddballObjective,
};
use gad_attack::eval::{auc_score, permutation_test, tau_as};
use gad_attack::graph::{
    erdos_renyi, generate_ba, inject_cliques, parse_edge_list, write_edge_list,
};
use gad_attack::oddball::{anomaly_scores, egonet_features, fit_power_law_ols, TargetSet};
use gad_attack::{rng, EdgeOp, Graph, PerturbationPlan};

fn small_graph() -> impl Strategy<Value = Graph> {
    (5usize..40, 0.05f64..0.5, any::<u64>())
        .prop_map(|(n, p, seed)| erdos_renyi(n, p, seed).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn plan_edit_distance_equals_op_count(g in small_graph(), picks in prop::collection::vec((0usize..40, 0usize..40), 0..30)) {
        let n = g.n();
        let mut plan = PerturbationPlan::new(picks.len());
        let mut seen = std::collections::HashSet::new();
        let mut deg: Vec<usize> = (0..n).map(|i| g.degree(i)).collect();
        for (a, b) in picks {
            let (a, b) = (a % n, b % n);
            if a == b || seen.contains(&(a.min(b), a.max(b))) {
                continue;
            }
            let op = EdgeOp::flip(&g, a, b);
            if g.has_edge(a, b) {
                if deg[a] == 1 || deg[b] == 1 {
                    continue;
                }
                deg[a] -= 1;
                deg[b] -= 1;
            } else {
                deg[a] += 1;
                deg[b] += 1;
            }
            seen.insert((a.min(b), a.max(b)));
            plan.push(op).unwrap();
        }
        let p = g.apply(&plan).unwrap();
        prop_assert_eq!(g.edit_distance(&p), plan.len());
    }

    #[test]
    fn edge_list_round_trip(g in small_graph()) {
        prop_assume!(g.num_edges() > 0);
        let text = write_edge_list(&g);
        let back = parse_edge_list(&text, false).unwrap();
        prop_assert_eq!(write_edge_list(&back), text);
        let ours: Vec<(u64, u64)> = g.edges().map(|(i, j)| (g.label(i), g.label(j))).collect();
        let theirs: Vec<(u64, u64)> = back.edges().map(|(i, j)| (back.label(i), back.label(j))).collect();
        prop_assert_eq!(ours, theirs);
    }

    #[test]
    fn flip_map_is_binary_and_symmetric(g in small_graph(), seed in any::<u64>()) {
        let c = build_candidates(&g, &CandidateMode::Full).unwrap();
        let mut r = rng::seeded(seed);
        let z: Vec<f64> = (0..c.pairs.len()).map(|_| dummy_decision(r.gen_range(0.0..=1.0))).collect();
        let a = flip_map(&g, &c, &z).unwrap();
        let flips = z.iter().filter(|&&v| v < 0.0).count();
        prop_assert_eq!(g.edit_distance(&a), flips);
        for i in 0..a.n() {
            prop_assert!(!a.has_edge(i, i));
            for &j in a.neighbors(i) {
                prop_assert!(a.has_edge(j, i));
            }
        }
    }

    #[test]
    fn auc_flip_symmetry(pairs in prop::collection::vec((-5i32..5, any::<bool>()), 2..60)) {
        let scores: Vec<f64> = pairs.iter().map(|p| f64::from(p.0)).collect();
        let labels: Vec<u8> = pairs.iter().map(|p| u8::from(p.1)).collect();
        prop_assume!(labels.contains(&0) && labels.contains(&1));
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        let a = auc_score(&scores, &labels).unwrap();
        let b = auc_score(&neg, &labels).unwrap();
        prop_assert!((a + b - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn tau_is_scale_invariant(s0 in 0.1f64..1e3, sb in 0.0f64..1e3, c in 0.01f64..100.0) {
        let a = tau_as(s0, sb).unwrap();
        let b = tau_as(c * s0, c * sb).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn ba_edge_count_and_connected(n in 10usize..120, m in 1usize..5, seed in any::<u64>()) {
        prop_assume!(n > m);
        let g = generate_ba(n, m, seed).unwrap();
        prop_assert_eq!(g.num_edges(), (n - m) * m);
        prop_assert_eq!(g.components().len(), 1);
    }

    #[test]
    fn cliques_only_add(n in 30usize..80, seed in any::<u64>()) {
        let g = generate_ba(n, 2, seed).unwrap();
        let (h, y) = inject_cliques(&g, 2, 5, seed).unwrap();
        prop_assert_eq!(y.iter().filter(|&&v| v == 1).count(), 10);
        for (i, j) in g.edges() {
            prop_assert!(h.has_edge(i, j));
        }
        for (i, j) in h.edges() {
            prop_assert!(g.has_edge(i, j) || (y[i] == 1 && y[j] == 1));
        }
    }

    #[test]
    fn detector_is_permutation_equivariant(n in 12usize..60, seed in any::<u64>()) {
        let g = generate_ba(n, 2, seed).unwrap();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut r = rng::seeded(seed);
        for k in (1..n).rev() {
            perm.swap(k, r.gen_range(0..=k));
        }
        let h = g.permute(&perm).unwrap();
        let fg = egonet_features(&g).unwrap();
        let fh = egonet_features(&h).unwrap();
        let sg = anomaly_scores(&fg, &fit_power_law_ols(&fg).unwrap()).scores;
        let sh = anomaly_scores(&fh, &fit_power_law_ols(&fh).unwrap()).scores;
        for i in 0..n {
            prop_assert_eq!(fg.n[i], fh.n[perm[i]]);
            prop_assert_eq!(fg.e[i], fh.e[perm[i]]);
            prop_assert!((sg[i] - sh[perm[i]]).abs() <= 1e-9 * sg[i].abs().max(1.0));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn plans_respect_budget_and_are_deterministic(seed in 0u64..1000, budget in 0usize..6, method in 0usize..3) {
        let g = generate_ba(40, 2, seed).unwrap();
        let method = [Method::Binarized, Method::GradMax, Method::Continuous][method];
        let targets = vec![(seed % 40) as usize, ((seed + 7) % 40) as usize];
        let targets = if targets[0] == targets[1] { vec![targets[0]] } else { targets };
        let c = build_candidates(&g, &CandidateMode::Direct(targets.clone())).unwrap();
        let obj = OddballObjective::new(TargetSet::new(targets).unwrap());
        let mut config = AttackConfig::with_budget(budget);
        config.iterations = 20;
        config.seed = seed;
        let a = run_attack(method, &obj, &g, &config, &c).unwrap();
        let b = run_attack(method, &obj, &g, &config, &c).unwrap();
        prop_assert_eq!(a.results.len(), budget + 1);
        for (x, y) in a.results.iter().zip(&b.results) {
            prop_assert_eq!(&x.plan, &y.plan);
            prop_assert_eq!(x.objective.to_bits(), y.objective.to_bits());
            prop_assert!(x.plan.len() <= x.budget);
            let p = g.apply(&x.plan).unwrap();
            prop_assert_eq!(g.edit_distance(&p), x.plan.len());
        }
    }
}

#[test]
fn permutation_p_values_are_near_uniform_under_the_null() {
    let mut r = rng::seeded(2024);
    let mut small = 0;
    for trial in 0..200u64 {
        let x: Vec<f64> = (0..40).map(|_| r.gen_range(0.0..1.0)).collect();
        let y: Vec<f64> = (0..40).map(|_| r.gen_range(0.0..1.0)).collect();
        let p = permutation_test(&x, &y, 2000, trial).unwrap().p_value;
        if p <= 0.05 {
            small += 1;
        }
    }
    let frac = small as f64 / 200.0;
    assert!((0.01..=0.12).contains(&frac), "fraction {frac}");
}
