use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;

use gad_attack::attack::{
    build_candidates, run_attack, AttackConfig, CandidateMode, LgcnObjective, Method, Objective,
    OddballObjective, Scaling,
};
use gad_attack::dataset::{
    boosted_attributes, load_attributes, save_attributes, stratified_split, Split,
};
use gad_attack::defense::{robust_fit, RobustFitConfig, RobustMethod};
use gad_attack::eval::{
    auc_score, feature_shift_report, lgcn_auc, tau_as, DEFAULT_PERMUTATIONS,
};
use gad_attack::graph::{
    clique_groups, erdos_renyi, generate_ba, inject_cliques, load_edge_list, load_labels,
    load_plan, save_edge_list, save_labels, save_plan, write_atomic,
};
use gad_attack::lgcn::{class_weight, LgcnProblem, OmegaConvention, DEFAULT_H, DEFAULT_XI};
use gad_attack::oddball::{
    anomaly_scores, detect, egonet_features, fit_power_law_ols, pick_targets, target_score_sum,
    AnomalyReport, TargetSet,
};
use gad_attack::report::{
    metrics_csv, write_json, AttackReport, BudgetReport, DefenseReport, FitSummary, MetricRow,
    RunManifest, TargetDefense,
};
use gad_attack::{Error, Graph, PerturbationPlan, Result};

#[derive(Parser, Debug)]
#[command(
    name = "gad-attack",
    version,
    about = "Structural poisoning attacks on graph anomaly detectors"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic graph, optionally with injected cliques and attributes
    Generate(GenerateArgs),
    /// Inject anomalous cliques into an existing graph
    Inject(InjectArgs),
    /// Score nodes with the egonet power-law detector
    Detect(DetectArgs),
    /// Poison a graph against a detector
    Attack(AttackArgs),
    /// Recompute metrics for a perturbation plan
    Eval(EvalArgs),
    /// Compare plain and robust power-law fits on a (poisoned) graph
    Defend(DefendArgs),
    /// Re-run the command recorded in a manifest and compare outputs
    Replay(ReplayArgs),
}

#[derive(Args, Debug)]
pub struct GraphInput {
    /// Edge list, one "u v" pair per line
    #[arg(long)]
    graph: PathBuf,
    /// Merge repeated and reversed pairs instead of rejecting them
    #[arg(long)]
    collapse_directed: bool,
    /// Keep only the largest connected component
    #[arg(long)]
    lcc: bool,
}

struct LoadedGraph {
    graph: Graph,
    /// Labels of the file before component extraction, for attribute rows.
    file_labels: Vec<u64>,
}

impl GraphInput {
    fn load(&self, manifest: &mut RunManifest) -> Result<LoadedGraph> {
        manifest.add_input(&self.graph)?;
        let full = load_edge_list(&self.graph, self.collapse_directed)?;
        let file_labels = full.labels().to_vec();
        let graph = if self.lcc {
            full.largest_connected_component()?
        } else {
            full
        };
        Ok(LoadedGraph { graph, file_labels })
    }
}

#[derive(Args, Debug)]
pub struct AttributeOpts {
    /// Number of uniform random attributes to write alongside the graph
    #[arg(long)]
    attributes: Option<usize>,
    /// Added to boosted attributes of clique members
    #[arg(long, default_value_t = 1.0)]
    boost: f64,
    /// Attributes boosted per clique
    #[arg(long, default_value_t = 8)]
    boosted_attrs: usize,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// Preferential attachment graph with N nodes and M edges per arrival
    #[arg(long, num_args = 2, value_names = ["N", "M"], conflicts_with = "er")]
    ba: Option<Vec<usize>>,
    /// Erdos-Renyi graph with N nodes and edge probability P
    #[arg(long, num_args = 2, value_names = ["N", "P"])]
    er: Option<Vec<String>>,
    /// Inject CLIQUES cliques of SIZE nodes each
    #[arg(long, num_args = 2, value_names = ["CLIQUES", "SIZE"])]
    inject: Option<Vec<usize>>,
    #[command(flatten)]
    attrs: AttributeOpts,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct InjectArgs {
    #[command(flatten)]
    input: GraphInput,
    #[arg(long)]
    cliques: usize,
    #[arg(long, default_value_t = 10)]
    size: usize,
    #[command(flatten)]
    attrs: AttributeOpts,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum RobustChoice {
    None,
    Huber,
    Ransac,
}

#[derive(Args, Debug)]
pub struct RobustOpts {
    /// Huber threshold
    #[arg(long, default_value_t = 1.0)]
    k: f64,
    #[arg(long, default_value_t = 1000)]
    ransac_iters: usize,
    /// RANSAC inlier bound on log-space residuals
    #[arg(long, default_value_t = 1.0)]
    inlier_tol: f64,
}

impl RobustOpts {
    fn config(&self, seed: u64) -> RobustFitConfig {
        RobustFitConfig {
            k: self.k,
            ransac_iters: self.ransac_iters,
            inlier_tol: self.inlier_tol,
            seed,
        }
    }
}

#[derive(Args, Debug)]
pub struct DetectArgs {
    #[command(flatten)]
    input: GraphInput,
    /// Only write the K highest scoring nodes
    #[arg(long)]
    top: Option<usize>,
    #[arg(long, value_enum, default_value = "none")]
    robust: RobustChoice,
    #[command(flatten)]
    robust_opts: RobustOpts,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Model {
    Oddball,
    Lgcn,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum MethodArg {
    Binarized,
    Gradmax,
    Continuous,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Binarized => Method::Binarized,
            MethodArg::Gradmax => Method::GradMax,
            MethodArg::Continuous => Method::Continuous,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalingArg {
    None,
    Objective,
    Gradient,
    Adaptive,
}

impl From<ScalingArg> for Scaling {
    fn from(s: ScalingArg) -> Self {
        match s {
            ScalingArg::None => Scaling::None,
            ScalingArg::Objective => Scaling::Objective,
            ScalingArg::Gradient => Scaling::Gradient,
            ScalingArg::Adaptive => Scaling::Adaptive,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum OmegaArg {
    Minority,
    PosOverNeg,
}

impl From<OmegaArg> for OmegaConvention {
    fn from(o: OmegaArg) -> Self {
        match o {
            OmegaArg::Minority => OmegaConvention::Minority,
            OmegaArg::PosOverNeg => OmegaConvention::PosOverNeg,
        }
    }
}

#[derive(Args, Debug)]
pub struct LgcnOpts {
    /// Comma separated attribute rows, one per node in ascending label order
    #[arg(long)]
    attributes: Option<PathBuf>,
    /// "u y" node labels; with the oddball model they only feed the AUC column
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    #[arg(long, default_value_t = 0.1)]
    test_frac: f64,
    /// Weight of the training term in the split loss
    #[arg(long, default_value_t = DEFAULT_H)]
    h: f64,
    /// Ridge strength
    #[arg(long, default_value_t = DEFAULT_XI)]
    xi: f64,
    #[arg(long, value_enum, default_value = "minority")]
    omega: OmegaArg,
}

#[derive(Args, Debug)]
pub struct AttackArgs {
    #[command(flatten)]
    input: GraphInput,
    #[arg(long, value_enum, default_value = "oddball")]
    model: Model,
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Maximum number of edge flips
    #[arg(long)]
    budget: usize,
    /// Target file (one node label per line) or auto:POOL,COUNT
    #[arg(long, default_value = "auto:50,10")]
    targets: String,
    /// Only flip pairs touching a target (test nodes for the lgcn model)
    #[arg(long)]
    direct: bool,
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 200)]
    iterations: usize,
    #[arg(long, value_enum, default_value = "adaptive")]
    scaling: ScalingArg,
    /// Budgets to write plans for; defaults to every budget up to --budget
    #[arg(long, value_delimiter = ',')]
    report_budgets: Option<Vec<usize>>,
    /// Permutation test resamples for the p-value columns; 0 skips the test
    #[arg(long, default_value_t = 0)]
    permtest: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    lgcn: LgcnOpts,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    input: GraphInput,
    /// Perturbation plan, "+ u v" / "- u v" lines
    #[arg(long)]
    plan: PathBuf,
    #[arg(long, value_enum, default_value = "oddball")]
    model: Model,
    /// Target file or auto:POOL,COUNT (oddball model)
    #[arg(long)]
    targets: Option<String>,
    #[arg(long, default_value_t = DEFAULT_PERMUTATIONS)]
    permtest: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Value of the method column
    #[arg(long, default_value = "plan")]
    method_name: String,
    /// Value of the budget column; defaults to the plan length
    #[arg(long)]
    budget: Option<usize>,
    #[command(flatten)]
    lgcn: LgcnOpts,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct DefendArgs {
    #[command(flatten)]
    input: GraphInput,
    /// Plan applied before fitting
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Target file or auto:POOL,COUNT chosen on the clean graph
    #[arg(long, default_value = "auto:50,10")]
    targets: String,
    #[arg(long, value_enum, default_value = "ransac")]
    method: RobustArg,
    #[command(flatten)]
    robust_opts: RobustOpts,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum RobustArg {
    Huber,
    Ransac,
}

impl From<RobustArg> for RobustMethod {
    fn from(r: RobustArg) -> Self {
        match r {
            RobustArg::Huber => RobustMethod::Huber,
            RobustArg::Ransac => RobustMethod::Ransac,
        }
    }
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

pub fn run(cli: Cli, argv: Vec<String>) -> Result<()> {
    let start = Instant::now();
    let (name, out) = match &cli.command {
        Command::Generate(a) => ("generate", a.out.clone()),
        Command::Inject(a) => ("inject", a.out.clone()),
        Command::Detect(a) => ("detect", a.out.clone()),
        Command::Attack(a) => ("attack", a.out.clone()),
        Command::Eval(a) => ("eval", a.out.clone()),
        Command::Defend(a) => ("defend", a.out.clone()),
        Command::Replay(a) => return replay(a),
    };
    fs::create_dir_all(&out).map_err(|e| io_error(&out, e))?;
    let mut manifest = RunManifest::new(name, argv);
    match cli.command {
        Command::Generate(a) => generate(&a, &mut manifest)?,
        Command::Inject(a) => inject(&a, &mut manifest)?,
        Command::Detect(a) => cmd_detect(&a, &mut manifest)?,
        Command::Attack(a) => cmd_attack(&a, &mut manifest)?,
        Command::Eval(a) => cmd_eval(&a, &mut manifest)?,
        Command::Defend(a) => cmd_defend(&a, &mut manifest)?,
        Command::Replay(_) => unreachable!(),
    }
    manifest.collect_outputs(&out)?;
    manifest.wall_time_secs = start.elapsed().as_secs_f64();
    manifest.save(&out)
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())
}

fn write_attributes_for(
    graph: &Graph,
    groups: &[Vec<usize>],
    attrs: &AttributeOpts,
    seed: u64,
    out: &Path,
    manifest: &mut RunManifest,
) -> Result<()> {
    if let Some(p) = attrs.attributes {
        let x = boosted_attributes(graph.n(), p, groups, attrs.boost, attrs.boosted_attrs, seed)?;
        save_attributes(out.join("attributes.csv"), &x)?;
        manifest.param("attributes", p);
        manifest.param("boost", attrs.boost);
        manifest.param("boosted_attrs", attrs.boosted_attrs);
    }
    Ok(())
}

fn inject_and_save(
    graph: &Graph,
    cliques: usize,
    size: usize,
    attrs: &AttributeOpts,
    seed: u64,
    out: &Path,
    manifest: &mut RunManifest,
) -> Result<()> {
    // same seeding as the synthetic dataset generator
    let clique_seed = seed.wrapping_add(1);
    let (g, y) = inject_cliques(graph, cliques, size, clique_seed)?;
    let groups = clique_groups(graph.n(), cliques, size, clique_seed)?;
    save_edge_list(out.join("graph.txt"), &g)?;
    save_labels(out.join("labels.txt"), &g, &y)?;
    write_attributes_for(&g, &groups, attrs, seed, out, manifest)?;
    manifest.param("cliques", cliques);
    manifest.param("clique_size", size);
    eprintln!(
        "{} nodes, {} edges, {} anomalies",
        g.n(),
        g.num_edges(),
        y.iter().filter(|&&v| v == 1).count()
    );
    Ok(())
}

fn generate(a: &GenerateArgs, manifest: &mut RunManifest) -> Result<()> {
    manifest.seed = Some(a.seed);
    let graph = match (&a.ba, &a.er) {
        (Some(ba), None) => {
            manifest.param("ba", format!("{} {}", ba[0], ba[1]));
            generate_ba(ba[0], ba[1], a.seed)?
        }
        (None, Some(er)) => {
            let n: usize = er[0]
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("invalid node count {:?}", er[0])))?;
            let p: f64 = er[1]
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("invalid probability {:?}", er[1])))?;
            manifest.param("er", format!("{n} {p}"));
            erdos_renyi(n, p, a.seed)?
        }
        _ => {
            return Err(Error::InvalidArgument(
                "give exactly one of --ba N M or --er N P".into(),
            ))
        }
    };
    match &a.inject {
        Some(inj) => inject_and_save(&graph, inj[0], inj[1], &a.attrs, a.seed, &a.out, manifest),
        None => {
            save_edge_list(a.out.join("graph.txt"), &graph)?;
            write_attributes_for(&graph, &[], &a.attrs, a.seed, &a.out, manifest)?;
            eprintln!("{} nodes, {} edges", graph.n(), graph.num_edges());
            Ok(())
        }
    }
}

fn inject(a: &InjectArgs, manifest: &mut RunManifest) -> Result<()> {
    manifest.seed = Some(a.seed);
    let g = a.input.load(manifest)?.graph;
    inject_and_save(&g, a.cliques, a.size, &a.attrs, a.seed, &a.out, manifest)
}

fn fit_json(path: &Path, method: &str, beta0: f64, beta1: f64) -> Result<()> {
    write_json(
        path,
        &serde_json::json!({ "method": method, "beta0": beta0, "beta1": beta1 }),
    )
}

fn cmd_detect(a: &DetectArgs, manifest: &mut RunManifest) -> Result<()> {
    manifest.seed = Some(a.seed);
    let g = a.input.load(manifest)?.graph;
    let features = egonet_features(&g)?;
    let (name, fit) = match a.robust {
        RobustChoice::None => ("ols", fit_power_law_ols(&features)?),
        RobustChoice::Huber => (
            "huber",
            robust_fit(&features, RobustMethod::Huber, &a.robust_opts.config(a.seed))?,
        ),
        RobustChoice::Ransac => (
            "ransac",
            robust_fit(&features, RobustMethod::Ransac, &a.robust_opts.config(a.seed))?,
        ),
    };
    manifest.param("robust", name);
    if let Some(k) = a.top {
        manifest.param("top", k);
    }
    let report = anomaly_scores(&features, &fit);
    write_text(&a.out.join("scores.txt"), &report.write(&g, a.top))?;
    fit_json(&a.out.join("fit.json"), name, fit.beta0, fit.beta1)
}

/// `auto:POOL,COUNT` or a file of node labels.
fn resolve_targets(
    spec: &str,
    graph: &Graph,
    clean: &AnomalyReport,
    seed: u64,
    manifest: &mut RunManifest,
) -> Result<TargetSet> {
    if let Some(rest) = spec.strip_prefix("auto:") {
        let parts: Vec<&str> = rest.split(',').collect();
        let parse = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidArgument(format!("invalid target spec {spec:?}")))
        };
        if parts.len() != 2 {
            return Err(Error::InvalidArgument(format!(
                "target spec {spec:?} should look like auto:50,10"
            )));
        }
        return pick_targets(clean, parse(parts[0])?, parse(parts[1])?, seed);
    }
    let path = Path::new(spec);
    manifest.add_input(path)?;
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut toks = line.split_whitespace();
        let bad = |msg: String| Error::Parse { line: k + 1, msg };
        let label: u64 = toks
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad("expected a node label".into()))?;
        let w: f64 = match toks.next() {
            Some(t) => t.parse().map_err(|_| bad(format!("invalid weight {t:?}")))?,
            None => 1.0,
        };
        let i = graph
            .index_of(label)
            .ok_or_else(|| bad(format!("target {label} is not in the graph")))?;
        nodes.push(i);
        weights.push(w);
    }
    TargetSet::weighted(nodes, weights)
}

fn write_targets(path: &Path, graph: &Graph, targets: &TargetSet) -> Result<()> {
    let mut out = String::new();
    for (&t, &w) in targets.nodes.iter().zip(&targets.weights) {
        if w == 1.0 {
            let _ = writeln!(out, "{}", graph.label(t));
        } else {
            let _ = writeln!(out, "{} {}", graph.label(t), w);
        }
    }
    write_text(path, &out)
}

struct LgcnData {
    x: DMatrix<f64>,
    y: Vec<u8>,
    split: Split,
    omega: f64,
}

fn load_lgcn(
    opts: &LgcnOpts,
    loaded: &LoadedGraph,
    manifest: &mut RunManifest,
) -> Result<LgcnData> {
    let (Some(attr_path), Some(label_path)) = (&opts.attributes, &opts.labels) else {
        return Err(Error::InvalidArgument(
            "the lgcn model needs --attributes and --labels".into(),
        ));
    };
    manifest.add_input(attr_path)?;
    manifest.add_input(label_path)?;
    let full = load_attributes(attr_path, loaded.file_labels.len())?;
    let g = &loaded.graph;
    let rows: Vec<usize> = g
        .labels()
        .iter()
        .map(|l| loaded.file_labels.binary_search(l).expect("component of the file graph"))
        .collect();
    let x = full.select_rows(rows.iter());
    let y = load_labels(label_path, g)?;
    let split = stratified_split(&y, opts.test_frac, opts.split_seed)?;
    let omega = class_weight(&y, &split.train, opts.omega.into())?;
    manifest.param("split_seed", opts.split_seed);
    manifest.param("xi", opts.xi);
    manifest.param("h", opts.h);
    manifest.param("omega", omega);
    Ok(LgcnData { x, y, split, omega })
}

fn plan_file_name(b: usize) -> String {
    format!("plans/plan_b{b:04}.txt")
}

/// Oddball metrics of one plan, recomputed from the graphs alone.
fn oddball_metrics(
    clean: &Graph,
    poisoned: &Graph,
    targets: &TargetSet,
    labels: Option<&[u8]>,
    permtest: usize,
    seed: u64,
) -> Result<(f64, Option<f64>, Option<(f64, f64)>)> {
    let s0 = target_score_sum(clean, targets)?;
    let sb = target_score_sum(poisoned, targets)?;
    let tau = tau_as(s0, sb)?;
    let auc = match labels {
        Some(y) => {
            let (_, _, report) = detect(poisoned)?;
            Some(auc_score(&report.scores, y)?)
        }
        None => None,
    };
    let p = if permtest > 0 {
        let (pn, pe) = feature_shift_report(
            &egonet_features(clean)?,
            &egonet_features(poisoned)?,
            permtest,
            seed,
        )?;
        Some((pn.p_value, pe.p_value))
    } else {
        None
    };
    Ok((tau, auc, p))
}

fn feature_p_values(
    clean: &Graph,
    poisoned: &Graph,
    permtest: usize,
    seed: u64,
) -> Result<Option<(f64, f64)>> {
    if permtest == 0 {
        return Ok(None);
    }
    let (pn, pe) = feature_shift_report(
        &egonet_features(clean)?,
        &egonet_features(poisoned)?,
        permtest,
        seed,
    )?;
    Ok(Some((pn.p_value, pe.p_value)))
}

fn cmd_attack(a: &AttackArgs, manifest: &mut RunManifest) -> Result<()> {
    manifest.seed = Some(a.seed);
    let loaded = a.input.load(manifest)?;
    let g = &loaded.graph;
    let method: Method = a.method.into();
    let mut config = AttackConfig {
        budget: a.budget,
        learning_rate: a.lr,
        iterations: a.iterations,
        seed: a.seed,
        scaling: a.scaling.into(),
        eval_budgets: a.report_budgets.clone(),
        ..Default::default()
    };
    if let Some(l) = &a.lambdas {
        config.lambdas = l.clone();
    }
    config.validate()?;
    manifest.param("model", format!("{:?}", a.model).to_lowercase());
    manifest.param("method", method.as_str());
    manifest.param("budget", a.budget);
    manifest.param("direct", a.direct);
    manifest.param("lr", a.lr);
    manifest.param("iterations", a.iterations);
    manifest.param(
        "lambdas",
        config.lambdas.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(","),
    );
    manifest.param("permtest", a.permtest);

    fs::create_dir_all(a.out.join("plans")).map_err(|e| io_error(&a.out, e))?;
    let mut rows = Vec::new();
    let mut budgets = Vec::new();
    let (objective_name, target_labels, outcome) = match a.model {
        Model::Oddball => {
            let (_, _, clean_report) = detect(g)?;
            let targets = resolve_targets(&a.targets, g, &clean_report, a.seed, manifest)?;
            write_targets(&a.out.join("targets.txt"), g, &targets)?;
            let labels = match &a.lgcn.labels {
                Some(p) => {
                    manifest.add_input(p)?;
                    Some(load_labels(p, g)?)
                }
                None => None,
            };
            let mode = if a.direct {
                CandidateMode::Direct(targets.nodes.clone())
            } else {
                CandidateMode::Full
            };
            let candidates = build_candidates(g, &mode)?;
            let objective = OddballObjective::new(targets.clone());
            let outcome = run_attack(method, &objective, g, &config, &candidates)?;
            for r in &outcome.results {
                let poisoned = g.apply(&r.plan)?;
                let (tau, auc, p) =
                    oddball_metrics(g, &poisoned, &targets, labels.as_deref(), a.permtest, a.seed)?;
                rows.push(MetricRow {
                    method: method.as_str().into(),
                    budget: r.budget,
                    tau_as: Some(tau),
                    auc,
                    p_n: p.map(|v| v.0),
                    p_e: p.map(|v| v.1),
                });
                budgets.push((Some(tau), auc));
            }
            let labels: Vec<u64> = targets.nodes.iter().map(|&t| g.label(t)).collect();
            (objective.name(), labels, outcome)
        }
        Model::Lgcn => {
            let data = load_lgcn(&a.lgcn, &loaded, manifest)?;
            let problem = LgcnProblem::pretrain(
                g,
                data.x.clone(),
                data.y.clone(),
                data.split.train.clone(),
                data.split.test.clone(),
                data.omega,
                a.lgcn.xi,
                a.lgcn.h,
            )?;
            let (train_auc, test_auc) = lgcn_auc(
                g,
                &data.x,
                &data.y,
                &data.split.train,
                &data.split.test,
                data.omega,
                a.lgcn.xi,
            )?;
            write_json(
                &a.out.join("fit_summary.json"),
                &FitSummary {
                    omega: data.omega,
                    xi: a.lgcn.xi,
                    train_auc,
                    test_auc,
                    split_seed: a.lgcn.split_seed,
                },
            )?;
            let mode = if a.direct {
                CandidateMode::Direct(data.split.test.clone())
            } else {
                CandidateMode::Full
            };
            let candidates = build_candidates(g, &mode)?;
            let objective = LgcnObjective::new(problem);
            let outcome = run_attack(method, &objective, g, &config, &candidates)?;
            for r in &outcome.results {
                let poisoned = g.apply(&r.plan)?;
                let (_, auc) = lgcn_auc(
                    &poisoned,
                    &data.x,
                    &data.y,
                    &data.split.train,
                    &data.split.test,
                    data.omega,
                    a.lgcn.xi,
                )?;
                let p = feature_p_values(g, &poisoned, a.permtest, a.seed)?;
                rows.push(MetricRow {
                    method: method.as_str().into(),
                    budget: r.budget,
                    tau_as: None,
                    auc: Some(auc),
                    p_n: p.map(|v| v.0),
                    p_e: p.map(|v| v.1),
                });
                budgets.push((None, Some(auc)));
            }
            (objective.name(), Vec::new(), outcome)
        }
    };

    let mut budget_reports = Vec::new();
    for (r, (tau, auc)) in outcome.results.iter().zip(budgets) {
        let file = plan_file_name(r.budget);
        save_plan(a.out.join(&file), g, &r.plan)?;
        budget_reports.push(BudgetReport {
            b: r.budget,
            objective_before: outcome.clean_objective,
            objective_after: r.objective,
            tau_as: tau,
            auc,
            flips: r.plan.len(),
            fallback: r.fallback,
            plan_file: file,
        });
    }
    for w in &outcome.warnings {
        log::warn!("{w}");
    }
    write_json(
        &a.out.join("attack_report.json"),
        &AttackReport {
            method: method.as_str().into(),
            objective: objective_name.into(),
            seed: a.seed,
            targets: target_labels,
            budgets: budget_reports,
            warnings: outcome.warnings.clone(),
        },
    )?;
    write_text(&a.out.join("metrics.csv"), &metrics_csv(&rows))?;
    if let Some(last) = rows.last() {
        eprintln!(
            "budget {}: tau_as {} auc {}",
            last.budget,
            last.tau_as.map_or("-".into(), |v| format!("{v:.4}")),
            last.auc.map_or("-".into(), |v| format!("{v:.4}"))
        );
    }
    Ok(())
}

fn cmd_eval(a: &EvalArgs, manifest: &mut RunManifest) -> Result<()> {
    manifest.seed = Some(a.seed);
    let loaded = a.input.load(manifest)?;
    let g = &loaded.graph;
    manifest.add_input(&a.plan)?;
    let plan: PerturbationPlan = load_plan(&a.plan, g)?;
    let poisoned = g.apply(&plan)?;
    manifest.param("permtest", a.permtest);
    let budget = a.budget.unwrap_or(plan.len());
    let row = match a.model {
        Model::Oddball => {
            let (tau, labels) = match &a.targets {
                Some(spec) => {
                    let (_, _, clean_report) = detect(g)?;
                    let targets = resolve_targets(spec, g, &clean_report, a.seed, manifest)?;
                    let labels = match &a.lgcn.labels {
                        Some(p) => {
                            manifest.add_input(p)?;
                            Some(load_labels(p, g)?)
                        }
                        None => None,
                    };
                    let (tau, auc, _) =
                        oddball_metrics(g, &poisoned, &targets, labels.as_deref(), 0, a.seed)?;
                    (Some(tau), auc)
                }
                None => (None, None),
            };
            let p = feature_p_values(g, &poisoned, a.permtest, a.seed)?;
            MetricRow {
                method: a.method_name.clone(),
                budget,
                tau_as: tau,
                auc: labels,
                p_n: p.map(|v| v.0),
                p_e: p.map(|v| v.1),
            }
        }
        Model::Lgcn => {
            let data = load_lgcn(&a.lgcn, &loaded, manifest)?;
            let (_, auc) = lgcn_auc(
                &poisoned,
                &data.x,
                &data.y,
                &data.split.train,
                &data.split.test,
                data.omega,
                a.lgcn.xi,
            )?;
            let p = feature_p_values(g, &poisoned, a.permtest, a.seed)?;
            MetricRow {
                method: a.method_name.clone(),
                budget,
                tau_as: None,
                auc: Some(auc),
                p_n: p.map(|v| v.0),
                p_e: p.map(|v| v.1),
            }
        }
    };
    write_text(&a.out.join("metrics.csv"), &metrics_csv(std::slice::from_ref(&row)))?;
    eprintln!(
        "tau_as {} auc {} p_N {} p_E {}",
        row.tau_as.map_or("-".into(), |v| format!("{v:.4}")),
        row.auc.map_or("-".into(), |v| format!("{v:.4}")),
        row.p_n.map_or("-".into(), |v| format!("{v}")),
        row.p_e.map_or("-".into(), |v| format!("{v}"))
    );
    Ok(())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn cmd_defend(a: &DefendArgs, manifest: &mut RunManifest) -> Result<()> {
    manifest.seed = Some(a.seed);
    let g = a.input.load(manifest)?.graph;
    let (_, _, clean_report) = detect(&g)?;
    let targets = resolve_targets(&a.targets, &g, &clean_report, a.seed, manifest)?;
    let (poisoned, flips) = match &a.plan {
        Some(p) => {
            manifest.add_input(p)?;
            let plan = load_plan(p, &g)?;
            (g.apply(&plan)?, plan.len())
        }
        None => (g.clone(), 0),
    };
    let method: RobustMethod = a.method.into();
    let config = a.robust_opts.config(a.seed);
    config.validate()?;
    let features = egonet_features(&poisoned)?;
    let ols = fit_power_law_ols(&features)?;
    let robust = robust_fit(&features, method, &config)?;
    let r_ols = anomaly_scores(&features, &ols);
    let r_rob = anomaly_scores(&features, &robust);
    let (rank_ols, rank_rob) = (r_ols.ranks(), r_rob.ranks());
    let targets_out: Vec<TargetDefense> = targets
        .nodes
        .iter()
        .map(|&t| TargetDefense {
            node: poisoned.label(t),
            score_ols: r_ols.scores[t],
            score_robust: r_rob.scores[t],
            rank_ols: rank_ols[t] + 1,
            rank_robust: rank_rob[t] + 1,
        })
        .collect();
    let report = DefenseReport {
        defense_method: method.as_str().into(),
        k: config.k,
        inlier_tol: config.inlier_tol,
        ransac_iters: config.ransac_iters,
        seed: a.seed,
        beta_ols: [ols.beta0, ols.beta1],
        beta_robust: [robust.beta0, robust.beta1],
        flips,
        median_rank_ols: median(targets_out.iter().map(|t| t.rank_ols as f64).collect()),
        median_rank_robust: median(targets_out.iter().map(|t| t.rank_robust as f64).collect()),
        targets: targets_out,
    };
    manifest.param("method", method.as_str());
    write_json(&a.out.join("defense_report.json"), &report)?;
    write_text(&a.out.join("scores_robust.txt"), &r_rob.write(&poisoned, None))?;
    eprintln!(
        "median target rank: ols {} robust {}",
        report.median_rank_ols, report.median_rank_robust
    );
    Ok(())
}

fn replay(a: &ReplayArgs) -> Result<()> {
    let old = RunManifest::load(&a.manifest)?;
    let changed = old.changed_inputs()?;
    if !changed.is_empty() {
        return Err(Error::Mismatch(format!(
            "inputs changed since the recorded run: {}",
            changed.join(", ")
        )));
    }
    let mut argv = Vec::with_capacity(old.argv.len());
    let mut it = old.argv.iter();
    let out = a.out.display().to_string();
    while let Some(arg) = it.next() {
        if arg == "--out" {
            it.next();
            argv.push(arg.clone());
            argv.push(out.clone());
        } else if arg.starts_with("--out=") {
            argv.push(format!("--out={out}"));
        } else {
            argv.push(arg.clone());
        }
    }
    let cli = Cli::try_parse_from(std::iter::once("gad-attack".to_string()).chain(argv.clone()))
        .map_err(|e| Error::InvalidArgument(format!("manifest arguments: {e}")))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(Error::InvalidArgument("cannot replay a replay".into()));
    }
    run(cli, argv)?;
    let new = RunManifest::load(&a.out.join(RunManifest::FILE))?;
    let mut diffs = Vec::new();
    for (name, digest) in &old.outputs {
        match new.outputs.get(name) {
            Some(d) if d == digest => {}
            Some(_) => diffs.push(format!("{name} differs")),
            None => diffs.push(format!("{name} missing")),
        }
    }
    for name in new.outputs.keys() {
        if !old.outputs.contains_key(name) {
            diffs.push(format!("{name} is new"));
        }
    }
    if !diffs.is_empty() {
        return Err(Error::Mismatch(diffs.join(", ")));
    }
    eprintln!("replayed {}: {} outputs identical", old.command, old.outputs.len());
    Ok(())
}
