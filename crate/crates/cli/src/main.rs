use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bans::datagen::GenConfig;
use bans::inference::{fdr_select, threshold_select, EdgeProbabilities, Selection};
use bans::io::{self, num, LayerMap};
use bans::metrics::{aggregate, evaluate, mcc_curve, roc};
use bans::pipeline::{self, PipelineConfig, Recorder};
use bans::sampler::{PriorConfig, RunConfig, SamplerMode, Symmetrize};
use bans::{Dataset, Edge, Execution};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

const AFTER_HELP: &str = "\
Files:
  layer map   TSV  vertex_name, layer_index   (integer indices, ordered numerically)
  graph       TSV  src, dst, kind             (kind is dir or undir)
  data        CSV  one named column per variable, one row per sample
  scores      TSV  src, dst, kind, g
Every output directory holds a manifest.json; every output file starts with
`# manifest <id>`. Outputs go to --out, or to $BANS_OUTPUT_ROOT/<command>/<id>
(default root: ./bans-out).

Example: two genes g1, g2 regulate two proteins p3, p4 (g1 -> p3, g2 -> p4),
and the proteins stay dependent after removing those effects (p3 - p4).

  printf 'vertex_name\\tlayer_index\\ng1\\t1\\ng2\\t1\\np3\\t2\\np4\\t2\\n' > toy_layers.tsv
  printf 'src\\tdst\\tkind\\ng1\\tp3\\tdir\\ng2\\tp4\\tdir\\np3\\tp4\\tundir\\n' > toy_graph.tsv
  bans simulate --layers toy_layers.tsv --graph toy_graph.tsv --n 200 --seed 1 --out toy/sim
  bans fit --data toy/sim/data.csv --layers toy/sim/layers.tsv \\
      --iters 3000 --burnin 1000 --out toy/fit
  bans select --ppi toy/fit/ppi.tsv --layers toy/sim/layers.tsv --alpha 0.1 --out toy/select
  bans signs --data toy/sim/data.csv --layers toy/sim/layers.tsv \\
      --selected toy/select/selected.tsv --iters 3000 --burnin 1000 --out toy/signs
  bans evaluate --layers toy/sim/layers.tsv --truth toy/sim/truth.tsv \\
      --scores toy/fit/ppi.tsv --selected toy/select/selected.tsv --out toy/eval

  # or all at once, on random chain graphs:
  bans pipeline --p 20 --q 6 --edge-prob 0.3 --replicates 5 --xi 0.5 --analyze --out batch
";

/// Bayesian node-wise selection for multi-layered Gaussian graphical models.
#[derive(Parser)]
#[command(name = "bans", version, after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a chain graph, its parameters and a data set.
    Simulate(SimulateArgs),
    /// Run the MCMC sampler and write posterior inclusion probabilities.
    Fit(FitArgs),
    /// Select edges at a Bayesian FDR level (or a fixed threshold).
    Select(SelectArgs),
    /// Posterior signs of selected edges from a run on the selected structure.
    Signs(SignsArgs),
    /// Compare selections and scores with true graphs.
    Evaluate(EvaluateArgs),
    /// Connectivity scores, intersections and weighted degrees across runs.
    Analyze(AnalyzeArgs),
    /// simulate, fit, select, signs, evaluate and analyze over replicates.
    Pipeline(PipelineArgs),
}

#[derive(Args, Serialize)]
struct GenArgs {
    /// Number of variables.
    #[arg(long, default_value_t = 20)]
    p: usize,
    /// Number of samples.
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Number of layers.
    #[arg(long, default_value_t = 6)]
    q: usize,
    /// Within-layer edge probability; directed edges between consecutive layers use half of it.
    #[arg(long = "edge-prob", default_value_t = 0.3)]
    edge_prob: f64,
    /// Root seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl GenArgs {
    fn config(&self) -> GenConfig {
        GenConfig { seed: self.seed, ..GenConfig::scenario(self.p, self.n, self.q, self.edge_prob) }
    }
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    #[command(flatten)]
    gen: GenArgs,
    /// Replicate index (selects the random streams).
    #[arg(long, default_value_t = 0)]
    replicate: u32,
    /// Layer map; with --graph, simulate on that structure instead of a random one.
    #[arg(long, requires = "graph")]
    #[serde(skip)]
    layers: Option<PathBuf>,
    /// Fixed graph over the layer map's vertices.
    #[arg(long, requires = "layers")]
    #[serde(skip)]
    graph: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Mode {
    Bans,
    BansParallel,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Sym {
    And,
    Or,
}

fn sampler_mode(mode: Mode, sym: Sym) -> SamplerMode {
    let sym = match sym {
        Sym::And => Symmetrize::And,
        Sym::Or => Symmetrize::Or,
    };
    match mode {
        Mode::Bans => SamplerMode::Bans,
        Mode::BansParallel => SamplerMode::BansParallel(sym),
    }
}

#[derive(Args, Serialize)]
struct SamplerArgs {
    /// Total MCMC sweeps, burn-in included.
    #[arg(long, default_value_t = 30_000)]
    iters: usize,
    /// Sweeps discarded before recording.
    #[arg(long, default_value_t = 10_000)]
    burnin: usize,
    /// Keep every thin-th sweep after burn-in.
    #[arg(long, default_value_t = 1)]
    thin: usize,
    /// Sampler seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Precision prior rate and slab precision scale.
    #[arg(long, default_value_t = 2.0)]
    lambda: f64,
    /// Precision prior degrees of freedom.
    #[arg(long, default_value_t = 2.0)]
    delta: f64,
    /// Prior inclusion probability of directed edges.
    #[arg(long = "p-dir", default_value_t = 0.1)]
    p_dir: f64,
    /// Prior inclusion probability of undirected edges.
    #[arg(long = "q-undir", default_value_t = 0.1)]
    q_undir: f64,
    #[arg(long, value_enum, default_value_t = Mode::Bans)]
    mode: Mode,
    /// How bans-parallel combines the two indicators of an undirected edge.
    #[arg(long, value_enum, default_value_t = Sym::And)]
    symmetrize: Sym,
    /// TSV (src, dst, kind, prob) of edge-specific prior inclusion probabilities.
    #[arg(long = "prior-edges")]
    #[serde(skip)]
    prior_edges: Option<PathBuf>,
    /// Scale columns to unit variance.
    #[arg(long)]
    standardize: bool,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    #[serde(skip)]
    jobs: Option<usize>,
}

impl SamplerArgs {
    fn mode(&self) -> SamplerMode {
        sampler_mode(self.mode, self.symmetrize)
    }

    fn execution(&self) -> Execution {
        match self.jobs {
            Some(1) => Execution::Sequential,
            Some(n) => Execution::Jobs(n),
            None => Execution::Parallel,
        }
    }

    fn run_config(&self) -> RunConfig {
        RunConfig {
            n_iter: self.iters,
            burn_in: self.burnin,
            thin: self.thin,
            seed: self.seed,
            execution: self.execution(),
            standardize: self.standardize,
            ..RunConfig::default()
        }
    }

    fn prior(&self, map: &LayerMap) -> Result<PriorConfig> {
        let edge_prob = match &self.prior_edges {
            Some(path) => io::read_scores(path, map)?,
            None => Vec::new(),
        };
        let prior = PriorConfig {
            lambda: self.lambda,
            delta: self.delta,
            p_dir: self.p_dir,
            q_undir: self.q_undir,
            edge_prob,
            ..PriorConfig::default()
        };
        prior.validate()?;
        Ok(prior)
    }

    fn inputs(&self) -> Vec<&Path> {
        self.prior_edges.iter().map(PathBuf::as_path).collect()
    }
}

#[derive(Args, Serialize)]
struct FitArgs {
    /// Data CSV with a header of variable names.
    #[arg(long)]
    #[serde(skip)]
    data: PathBuf,
    /// Layer map TSV.
    #[arg(long)]
    #[serde(skip)]
    layers: PathBuf,
    #[command(flatten)]
    sampler: SamplerArgs,
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SelectArgs {
    /// Scores TSV from `fit`.
    #[arg(long)]
    #[serde(skip)]
    ppi: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    layers: PathBuf,
    /// Target Bayesian FDR.
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Keep edges with g above this value instead (0.5 gives the median probability model).
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SignsArgs {
    #[arg(long)]
    #[serde(skip)]
    data: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    layers: PathBuf,
    /// Selected-edge TSV from `select`.
    #[arg(long)]
    #[serde(skip)]
    selected: PathBuf,
    /// An edge is called positive when P(coefficient > 0) exceeds this.
    #[arg(long, default_value_t = 0.5)]
    xi: f64,
    #[command(flatten)]
    sampler: SamplerArgs,
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct EvaluateArgs {
    #[arg(long)]
    #[serde(skip)]
    layers: PathBuf,
    /// True graph TSV; repeat once per run.
    #[arg(long, required = true)]
    #[serde(skip)]
    truth: Vec<PathBuf>,
    /// Edge scores (PPI, or any external method's scores); one per --truth.
    #[arg(long, required = true)]
    #[serde(skip)]
    scores: Vec<PathBuf>,
    /// Selected edges; one per --truth. Without it the scores are FDR-selected at --alpha.
    #[arg(long)]
    #[serde(skip)]
    selected: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct AnalyzeArgs {
    #[arg(long)]
    #[serde(skip)]
    layers: PathBuf,
    /// Selected-edge TSV; repeat once per run (at most 20).
    #[arg(long, required = true)]
    #[serde(skip)]
    selected: Vec<PathBuf>,
    /// Run labels, in the order of --selected (default: run1, run2, …).
    #[arg(long)]
    label: Vec<String>,
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct PipelineArgs {
    #[command(flatten)]
    gen: GenArgs,
    #[arg(long, default_value_t = 1)]
    replicates: u32,
    /// Total MCMC sweeps, burn-in included.
    #[arg(long, default_value_t = 30_000)]
    iters: usize,
    #[arg(long, default_value_t = 10_000)]
    burnin: usize,
    #[arg(long, default_value_t = 1)]
    thin: usize,
    #[arg(long, default_value_t = 2.0)]
    lambda: f64,
    #[arg(long, default_value_t = 2.0)]
    delta: f64,
    #[arg(long = "p-dir", default_value_t = 0.1)]
    p_dir: f64,
    #[arg(long = "q-undir", default_value_t = 0.1)]
    q_undir: f64,
    #[arg(long, value_enum, default_value_t = Mode::Bans)]
    mode: Mode,
    #[arg(long, value_enum, default_value_t = Sym::And)]
    symmetrize: Sym,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Run the sign stage with this cutoff.
    #[arg(long)]
    xi: Option<f64>,
    /// Write connectivity, intersection and degree tables across replicates.
    #[arg(long)]
    analyze: bool,
    /// Replicates run concurrently up to this many.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn selection_from_file(path: &Path, map: &LayerMap) -> Result<Selection> {
    Ok(selection_of(io::read_scores(path, map)?))
}

/// A selection of the given edges, with no FDR target.
fn selection_of(rows: Vec<(Edge, f64)>) -> Selection {
    let g: Vec<f64> = rows.iter().map(|&(_, g)| g).collect();
    Selection {
        alpha: f64::NAN,
        phi: g.iter().copied().fold(1.0, f64::min),
        expected_fdr: if g.is_empty() { 0.0 } else { g.iter().map(|x| 1.0 - x).sum::<f64>() / g.len() as f64 },
        edges: rows.into_iter().map(|(e, _)| e).collect(),
        g,
    }
}

fn probabilities(map: &LayerMap, scores: Vec<(Edge, f64)>) -> Result<EdgeProbabilities> {
    let (edges, g) = scores.into_iter().unzip();
    Ok(EdgeProbabilities::new(map.names.len(), edges, g)?)
}

fn finish(rec: Recorder) -> Result<()> {
    let dir = rec.dir().to_path_buf();
    let manifest = rec.finish()?;
    println!("{} {}", manifest.id, dir.display());
    Ok(())
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let gen = args.gen.config();
    let sim = match (&args.layers, &args.graph) {
        (Some(layers), Some(graph)) => {
            let map = io::read_layer_map(layers)?;
            let graph = io::read_graph(graph, &map)?;
            let mut sim = pipeline::simulate_on(graph, &gen, args.replicate)?;
            sim.data = Dataset::new(map.names.clone(), map.layering.clone(), sim.data.values().clone())?;
            sim
        }
        _ => pipeline::simulate(&gen, args.replicate)?,
    };
    let inputs: Vec<&Path> = args.layers.iter().chain(&args.graph).map(PathBuf::as_path).collect();
    let mut rec = Recorder::new(args.out.as_deref(), "simulate", args, Some(gen.seed), &inputs)?;
    pipeline::write_simulated(&mut rec, &sim)?;
    finish(rec)
}

fn fit(args: &FitArgs) -> Result<()> {
    let data = io::ingest(&args.data, &args.layers)?;
    let map = LayerMap::from_dataset(&data);
    let prior = args.sampler.prior(&map)?;
    let cfg = args.sampler.run_config();
    cfg.validate()?;
    let mut inputs = vec![args.data.as_path(), args.layers.as_path()];
    inputs.extend(args.sampler.inputs());
    let mut rec = Recorder::new(args.out.as_deref(), "fit", args, Some(cfg.seed), &inputs)?;
    let fitted = pipeline::fit(&data, &prior, &cfg, args.sampler.mode())?;
    pipeline::write_fit(&mut rec, &map.names, &fitted)?;
    finish(rec)
}

fn select(args: &SelectArgs) -> Result<()> {
    let map = io::read_layer_map(&args.layers)?;
    let probs = probabilities(&map, io::read_scores(&args.ppi, &map)?)?;
    let selection = match args.threshold {
        Some(phi) => {
            let edges = threshold_select(&probs, phi);
            selection_of(edges.into_iter().filter_map(|e| Some((e, probs.get(e)?))).collect())
        }
        None => fdr_select(&probs, args.alpha)?,
    };
    let mut rec = Recorder::new(args.out.as_deref(), "select", args, None, &[&args.ppi, &args.layers])?;
    let tag = rec.id().to_string();
    pipeline::write_selection(&rec.output("selected.tsv")?, &map.names, &selection, None, Some(&tag))?;
    io::write_json(&rec.output("selection.json")?, &serde_json::json!({
        "alpha": if selection.alpha.is_nan() { None } else { Some(selection.alpha) },
        "phi": selection.phi,
        "discoveries": selection.len(),
        "expected_fdr": selection.expected_fdr,
    }))?;
    finish(rec)
}

fn signs(args: &SignsArgs) -> Result<()> {
    let data = io::ingest(&args.data, &args.layers)?;
    let map = LayerMap::from_dataset(&data);
    let prior = args.sampler.prior(&map)?;
    let cfg = args.sampler.run_config();
    cfg.validate()?;
    let selection = selection_from_file(&args.selected, &map)?;
    let mut inputs = vec![args.data.as_path(), args.layers.as_path(), args.selected.as_path()];
    inputs.extend(args.sampler.inputs());
    let mut rec = Recorder::new(args.out.as_deref(), "signs", args, Some(cfg.seed), &inputs)?;
    let signed = pipeline::signs(&data, &selection, &prior, &cfg, args.xi)?;
    let tag = rec.id().to_string();
    pipeline::write_selection(&rec.output("signed.tsv")?, &map.names, &selection, Some(&signed), Some(&tag))?;
    finish(rec)
}

fn evaluate_cmd(args: &EvaluateArgs) -> Result<()> {
    if args.truth.len() != args.scores.len() {
        bail!("{} --truth files but {} --scores files", args.truth.len(), args.scores.len());
    }
    if !args.selected.is_empty() && args.selected.len() != args.truth.len() {
        bail!("--selected must be given once per --truth or not at all");
    }
    let map = io::read_layer_map(&args.layers)?;
    let mut runs = Vec::new();
    for (i, (truth, scores)) in args.truth.iter().zip(&args.scores).enumerate() {
        let truth: Vec<Edge> = io::read_graph(truth, &map)?.edges().iter().copied().collect();
        let scores = io::read_scores(scores, &map)?;
        let selected = match args.selected.get(i) {
            Some(path) => io::read_scores(path, &map)?.into_iter().map(|(e, _)| e).collect(),
            None => fdr_select(&probabilities(&map, scores.clone())?, args.alpha)?.edges,
        };
        runs.push((truth, scores, selected));
    }
    let mut inputs: Vec<&Path> = vec![&args.layers];
    inputs.extend(args.truth.iter().chain(&args.scores).chain(&args.selected).map(PathBuf::as_path));
    let mut rec = Recorder::new(args.out.as_deref(), "evaluate", args, None, &inputs)?;
    let tag = rec.id().to_string();
    let mut rows = Vec::new();
    for (i, (truth, scores, selected)) in runs.iter().enumerate() {
        let label = format!("run{}", i + 1);
        rows.push((label.clone(), evaluate(selected, scores, truth, &map.layering)?));
        let curve = roc(scores, truth, &map.layering)?;
        let pts: Vec<Vec<String>> = curve.points.iter().map(|&(x, y)| vec![num(x), num(y)]).collect();
        io::write_table(&rec.output(&format!("roc-{label}.tsv"))?, &["fpr", "tpr"], &pts, Some(&tag))?;
        let pts: Vec<Vec<String>> =
            mcc_curve(scores, truth, &map.layering)?.iter().map(|&(d, m)| vec![d.to_string(), num(m)]).collect();
        io::write_table(&rec.output(&format!("mcc-{label}.tsv"))?, &["discoveries", "mcc"], &pts, Some(&tag))?;
    }
    pipeline::write_evaluations(&rec.output("evaluation.tsv")?, &rows, Some(&tag))?;
    let evals: Vec<_> = rows.into_iter().map(|(_, e)| e).collect();
    pipeline::write_aggregate(&rec.output("summary.tsv")?, &aggregate(&evals), Some(&tag))?;
    finish(rec)
}

fn analyze(args: &AnalyzeArgs) -> Result<()> {
    if !args.label.is_empty() && args.label.len() != args.selected.len() {
        bail!("--label must be given once per --selected or not at all");
    }
    let map = io::read_layer_map(&args.layers)?;
    let runs = args.selected.iter().map(|p| io::read_scores(p, &map)).collect::<bans::Result<Vec<_>>>()?;
    let labels: Vec<String> = if args.label.is_empty() {
        (1..=runs.len()).map(|i| format!("run{i}")).collect()
    } else {
        args.label.clone()
    };
    let analysis = pipeline::analyze(&map.layering, &runs)?;
    let mut inputs: Vec<&Path> = vec![&args.layers];
    inputs.extend(args.selected.iter().map(PathBuf::as_path));
    let mut rec = Recorder::new(args.out.as_deref(), "analyze", args, None, &inputs)?;
    pipeline::write_analysis(&mut rec, &map, &labels, &analysis)?;
    finish(rec)
}

fn pipeline_cmd(args: &PipelineArgs) -> Result<()> {
    let cfg = PipelineConfig {
        gen: args.gen.config(),
        replicates: args.replicates,
        prior: PriorConfig {
            lambda: args.lambda,
            delta: args.delta,
            p_dir: args.p_dir,
            q_undir: args.q_undir,
            ..PriorConfig::default()
        },
        run: RunConfig {
            n_iter: args.iters,
            burn_in: args.burnin,
            thin: args.thin,
            seed: args.gen.seed,
            ..RunConfig::default()
        },
        mode: sampler_mode(args.mode, args.symmetrize),
        alpha: args.alpha,
        xi: args.xi,
        analyze: args.analyze,
        jobs: args.jobs,
    };
    cfg.validate()?;
    let id = pipeline::manifest_id("pipeline", &serde_json::to_value(&cfg)?, &[]);
    let dir = args.out.clone().unwrap_or_else(|| pipeline::output_root().join("pipeline").join(id));
    let report = pipeline::run_pipeline(&cfg, &dir)?;
    for a in &report.summary {
        println!("{:<12} mean {:>10.4}  se {:>8.4}", a.column, a.mean, a.se);
    }
    println!("{} {}", report.manifest.id, dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (stage, result) = match &cli.command {
        Command::Simulate(a) => ("simulate", simulate(a)),
        Command::Fit(a) => ("fit", fit(a)),
        Command::Select(a) => ("select", select(a)),
        Command::Signs(a) => ("signs", signs(a)),
        Command::Evaluate(a) => ("evaluate", evaluate_cmd(a)),
        Command::Analyze(a) => ("analyze", analyze(a)),
        Command::Pipeline(a) => ("pipeline", pipeline_cmd(a)),
    };
    match result.with_context(|| format!("{stage} failed")) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
