//! Stages, manifests and end-to-end runs.
//!
//! Each command writes its files into one output directory together with a
//! `manifest.json`. The manifest id is a digest of the command, its
//! configuration and the contents of its inputs, so rerunning the same
//! manifest reproduces every output file byte for byte. Replicate batches
//! write one directory and manifest per replicate under the batch
//! directory.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::Dataset;
use crate::datagen::{random_chain_graph, sample_data, sample_parameters, GenConfig, MlggmParameters};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::graph::{ChainGraph, Edge, Layering};
use crate::inference::{
    call_signs, connectivity_across_runs, fdr_select, intersection_counts, ppi_with, weighted_degree, EdgeProbabilities,
    NetworkBlock, Selection, SignedEdge,
};
use crate::io::{self, num, LayerMap};
use crate::metrics::{aggregate, evaluate, Aggregate, Evaluation};
use crate::rng::{stream, Purpose, StreamKey};
use crate::sampler::{run, structured_sign_run, ChainTrace, PriorConfig, RunConfig, SamplerMode};

pub const SCHEMA_VERSION: u32 = 1;
/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "BANS_OUTPUT_ROOT";
pub const MANIFEST_FILE: &str = "manifest.json";

/// `$BANS_OUTPUT_ROOT`, or `bans-out` in the working directory.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("bans-out"))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        Ok(Self { path: path.display().to_string(), sha256: sha256_file(path)? })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub id: String,
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub wall_clock_seconds: f64,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

/// First 16 hex digits of the digest of command, config and input contents.
pub fn manifest_id(command: &str, config: &serde_json::Value, inputs: &[FileDigest]) -> String {
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update([0]);
    h.update(config.to_string().as_bytes());
    for d in inputs {
        h.update([0]);
        h.update(d.sha256.as_bytes());
    }
    hex(&h.finalize())[..16].to_string()
}

/// Collects the outputs of one invocation and writes its manifest.
pub struct Recorder {
    dir: PathBuf,
    command: String,
    seed: Option<u64>,
    config: serde_json::Value,
    inputs: Vec<FileDigest>,
    id: String,
    outputs: Vec<PathBuf>,
    start: Instant,
}

impl Recorder {
    /// Hashes the inputs and fixes the id. Nothing is written yet. Without
    /// a directory, outputs go to `<output root>/<command>/<id>`.
    pub fn new<C: Serialize>(
        dir: Option<&Path>,
        command: &str,
        config: &C,
        seed: Option<u64>,
        inputs: &[&Path],
    ) -> Result<Self> {
        let config = serde_json::to_value(config).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        let inputs = inputs.iter().map(|p| FileDigest::of(p)).collect::<Result<Vec<_>>>()?;
        let id = manifest_id(command, &config, &inputs);
        Ok(Self {
            dir: dir.map(Path::to_path_buf).unwrap_or_else(|| output_root().join(command).join(&id)),
            command: command.to_string(),
            seed,
            config,
            inputs,
            id,
            outputs: Vec::new(),
            start: Instant::now(),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Path of an output file, which is recorded in the manifest.
    pub fn output(&mut self, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let path = self.dir.join(name);
        self.outputs.push(path.clone());
        Ok(path)
    }

    pub fn finish(self) -> Result<RunManifest> {
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let manifest = RunManifest {
            schema_version: SCHEMA_VERSION,
            id: self.id,
            command: self.command,
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.seed,
            config: self.config,
            inputs: self.inputs,
            outputs: self.outputs.iter().map(|p| FileDigest::of(p)).collect::<Result<_>>()?,
            wall_clock_seconds: self.start.elapsed().as_secs_f64(),
        };
        io::write_json(&self.dir.join(MANIFEST_FILE), &manifest)?;
        Ok(manifest)
    }
}

#[derive(Clone, Debug)]
pub struct Simulated {
    pub graph: ChainGraph,
    pub params: MlggmParameters,
    pub data: Dataset,
}

/// Graph, parameters and data for one replicate, each from its own stream.
pub fn simulate(gen: &GenConfig, replicate: u32) -> Result<Simulated> {
    gen.validate()?;
    let key = StreamKey::new(Purpose::Graph).replicate(replicate);
    let graph = random_chain_graph(gen, &mut stream(gen.seed, key))?;
    simulate_on(graph, gen, replicate)
}

/// Parameters and data on a given graph; `gen.p` and `gen.q` are ignored.
pub fn simulate_on(graph: ChainGraph, gen: &GenConfig, replicate: u32) -> Result<Simulated> {
    let key = |p| StreamKey::new(p).replicate(replicate);
    let params = sample_parameters(&graph, gen, &mut stream(gen.seed, key(Purpose::Parameters)))?;
    let data = sample_data(&params, gen.n, &mut stream(gen.seed, key(Purpose::Data)))?;
    Ok(Simulated { graph, params, data })
}

pub fn write_simulated(rec: &mut Recorder, sim: &Simulated) -> Result<()> {
    let tag = rec.id().to_string();
    let map = LayerMap::from_dataset(&sim.data);
    let edges: Vec<Edge> = sim.graph.edges().iter().copied().collect();
    io::write_dataset(&rec.output("data.csv")?, &sim.data, Some(&tag))?;
    io::write_layer_map(&rec.output("layers.tsv")?, &map, Some(&tag))?;
    io::write_graph(&rec.output("truth.tsv")?, &map.names, &edges, Some(&tag))?;
    io::write_params(&rec.output("params.tsv")?, &map.names, &sim.params, Some(&tag))
}

#[derive(Clone, Debug)]
pub struct Fit {
    pub trace: ChainTrace,
    pub probabilities: EdgeProbabilities,
}

pub fn fit(data: &Dataset, prior: &PriorConfig, cfg: &RunConfig, mode: SamplerMode) -> Result<Fit> {
    let trace = run(data, prior, cfg, mode)?;
    let probabilities = ppi_with(&trace, mode.symmetrize())?;
    Ok(Fit { trace, probabilities })
}

pub fn write_fit(rec: &mut Recorder, names: &[String], fit: &Fit) -> Result<()> {
    let tag = rec.id().to_string();
    let scores: Vec<(Edge, f64)> = fit.probabilities.iter().collect();
    io::write_scores(&rec.output("ppi.tsv")?, names, &scores, Some(&tag))?;
    io::write_json(&rec.output("trace.json")?, &fit.trace.summary())
}

/// Sign calls for the selected edges from a run on the selected structure.
pub fn signs(
    data: &Dataset,
    selection: &Selection,
    prior: &PriorConfig,
    cfg: &RunConfig,
    xi: f64,
) -> Result<Vec<SignedEdge>> {
    let posterior = structured_sign_run(data, &selection.edges, prior, cfg)?;
    call_signs(selection, &posterior, xi)
}

/// `src dst kind g sign sign_prob`; sign columns are `NA` without sign calls.
pub fn write_selection(
    path: &Path,
    names: &[String],
    selection: &Selection,
    signed: Option<&[SignedEdge]>,
    tag: Option<&str>,
) -> Result<()> {
    let rows: Vec<Vec<String>> = selection
        .edges
        .iter()
        .zip(&selection.g)
        .enumerate()
        .map(|(i, (&e, &g))| {
            let (a, b) = e.endpoints();
            let (sign, prob) = match signed {
                Some(s) => (s[i].sign.as_str().to_string(), num(s[i].prob_positive)),
                None => ("NA".to_string(), "NA".to_string()),
            };
            vec![names[a].clone(), names[b].clone(), e.kind().as_str().to_string(), num(g), sign, prob]
        })
        .collect();
    io::write_table(path, &["src", "dst", "kind", "g", "sign", "sign_prob"], &rows, tag)
}

pub fn write_evaluations(path: &Path, rows: &[(String, Evaluation)], tag: Option<&str>) -> Result<()> {
    let mut header = vec!["run"];
    header.extend(Evaluation::COLUMNS);
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|(label, e)| std::iter::once(label.clone()).chain(e.values().iter().map(|&x| num(x))).collect())
        .collect();
    io::write_table(path, &header, &body, tag)
}

pub fn write_aggregate(path: &Path, agg: &[Aggregate], tag: Option<&str>) -> Result<()> {
    let rows: Vec<Vec<String>> =
        agg.iter().map(|a| vec![a.column.clone(), num(a.mean), num(a.sd), num(a.se)]).collect();
    io::write_table(path, &["column", "mean", "sd", "se"], &rows, tag)
}

fn block_label(block: NetworkBlock) -> String {
    match block {
        NetworkBlock::Within(k) => format!("L{}", k + 1),
        NetworkBlock::Between(a, b) => format!("L{}-L{}", a + 1, b + 1),
    }
}

/// Summaries over several selected-edge sets sharing one layer map.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub connectivity: Vec<crate::inference::ConnectivitySummary>,
    pub intersections: Vec<crate::inference::IntersectionRow>,
    pub degrees: Vec<Vec<f64>>,
    pub union_size: usize,
}

pub fn analyze(layering: &Layering, runs: &[Vec<(Edge, f64)>]) -> Result<Analysis> {
    let edge_sets: Vec<Vec<Edge>> = runs.iter().map(|r| r.iter().map(|&(e, _)| e).collect()).collect();
    let sets: Vec<BTreeSet<Edge>> = edge_sets.iter().map(|r| r.iter().copied().collect()).collect();
    Ok(Analysis {
        connectivity: connectivity_across_runs(layering, &edge_sets),
        intersections: intersection_counts(&sets)?,
        degrees: runs.iter().map(|r| weighted_degree(layering.p(), r.iter().copied())).collect(),
        union_size: sets.iter().flatten().collect::<BTreeSet<_>>().len(),
    })
}

pub fn write_analysis(rec: &mut Recorder, map: &LayerMap, labels: &[String], analysis: &Analysis) -> Result<()> {
    let tag = rec.id().to_string();
    let tag = Some(tag.as_str());

    let mut header = vec!["block".to_string(), "possible".to_string()];
    header.extend(labels.iter().cloned());
    header.extend(["mean".to_string(), "sd".to_string()]);
    let rows: Vec<Vec<String>> = analysis
        .connectivity
        .iter()
        .map(|c| {
            let mut row = vec![block_label(c.block), c.block.possible(&map.layering).to_string()];
            row.extend(c.scores.iter().map(|&s| num(s)));
            row.extend([num(c.mean), num(c.sd)]);
            row
        })
        .collect();
    io::write_table(&rec.output("cs.tsv")?, &header, &rows, tag)?;

    let rows: Vec<Vec<String>> = analysis
        .intersections
        .iter()
        .map(|r| {
            let runs: Vec<&str> = r.runs.iter().map(|&i| labels[i].as_str()).collect();
            vec![runs.join("&"), r.runs.len().to_string(), r.count.to_string()]
        })
        .collect();
    io::write_table(&rec.output("intersections.tsv")?, &["runs", "size", "count"], &rows, tag)?;

    let mut header = vec!["vertex".to_string(), "layer".to_string()];
    header.extend(labels.iter().cloned());
    let rows: Vec<Vec<String>> = (0..map.names.len())
        .map(|v| {
            let mut row = vec![map.names[v].clone(), (map.layering.layer_of(v) + 1).to_string()];
            row.extend(analysis.degrees.iter().map(|d| num(d[v])));
            row
        })
        .collect();
    io::write_table(&rec.output("degree.tsv")?, &header, &rows, tag)
}

/// Configuration of a simulate → fit → select → (signs) → evaluate batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub gen: GenConfig,
    pub replicates: u32,
    pub prior: PriorConfig,
    pub run: RunConfig,
    pub mode: SamplerMode,
    /// Target Bayesian FDR.
    pub alpha: f64,
    /// Sign cutoff; `None` skips the sign stage.
    pub xi: Option<f64>,
    /// Also write connectivity and intersection tables across replicates.
    pub analyze: bool,
    /// Replicates run concurrently up to this many.
    pub jobs: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            gen: GenConfig::default(),
            replicates: 1,
            prior: PriorConfig::default(),
            run: RunConfig::default(),
            mode: SamplerMode::Bans,
            alpha: 0.1,
            xi: None,
            analyze: false,
            jobs: 1,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.gen.validate()?;
        self.prior.validate()?;
        self.run.validate()?;
        if self.replicates == 0 {
            return Err(Error::ConfigInvalid("at least one replicate".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::ConfigInvalid(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if self.xi.is_some_and(|x| !(x > 0.0 && x < 1.0)) {
            return Err(Error::ConfigInvalid("xi outside (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ReplicateOutcome {
    pub replicate: u32,
    pub simulated: Simulated,
    pub fit: Fit,
    pub selection: Selection,
    pub signed: Option<Vec<SignedEdge>>,
    pub evaluation: Evaluation,
    pub manifest: RunManifest,
}

#[derive(Clone, Debug)]
pub struct PipelineReport {
    pub replicates: Vec<ReplicateOutcome>,
    pub summary: Vec<Aggregate>,
    pub analysis: Option<Analysis>,
    pub manifest: RunManifest,
}

fn replicate(cfg: &PipelineConfig, r: u32, dir: &Path) -> Result<ReplicateOutcome> {
    let mut rec = Recorder::new(Some(dir), "pipeline-replicate", &(cfg, r), Some(cfg.gen.seed), &[])?;
    let tag = rec.id().to_string();
    let run_cfg = RunConfig { replicate: r, ..cfg.run.clone() };

    let sim = simulate(&cfg.gen, r).map_err(|e| e.in_stage("simulate"))?;
    write_simulated(&mut rec, &sim).map_err(|e| e.in_stage("simulate"))?;
    let names = sim.data.names().to_vec();

    let fitted = fit(&sim.data, &cfg.prior, &run_cfg, cfg.mode).map_err(|e| e.in_stage("fit"))?;
    write_fit(&mut rec, &names, &fitted).map_err(|e| e.in_stage("fit"))?;

    let selection = fdr_select(&fitted.probabilities, cfg.alpha).map_err(|e| e.in_stage("select"))?;
    let signed = match cfg.xi {
        Some(xi) => Some(signs(&sim.data, &selection, &cfg.prior, &run_cfg, xi).map_err(|e| e.in_stage("signs"))?),
        None => None,
    };
    write_selection(&rec.output("selected.tsv")?, &names, &selection, signed.as_deref(), Some(&tag))
        .map_err(|e| e.in_stage("select"))?;

    let truth: Vec<Edge> = sim.graph.edges().iter().copied().collect();
    let scores: Vec<(Edge, f64)> = fitted.probabilities.iter().collect();
    let evaluation =
        evaluate(&selection.edges, &scores, &truth, sim.data.layering()).map_err(|e| e.in_stage("evaluate"))?;
    write_evaluations(&rec.output("evaluation.tsv")?, &[(format!("{r}"), evaluation.clone())], Some(&tag))
        .map_err(|e| e.in_stage("evaluate"))?;

    let manifest = rec.finish()?;
    Ok(ReplicateOutcome { replicate: r, simulated: sim, fit: fitted, selection, signed, evaluation, manifest })
}

/// Runs every replicate under `dir/rep-NNN` and writes batch summaries.
pub fn run_pipeline(cfg: &PipelineConfig, dir: &Path) -> Result<PipelineReport> {
    cfg.validate()?;
    let mut rec = Recorder::new(Some(dir), "pipeline", cfg, Some(cfg.gen.seed), &[])?;
    let mut cfg = cfg.clone();
    // Replicates are the unit of concurrency; chains inside run sequentially.
    let exec = if cfg.jobs > 1 { Execution::Jobs(cfg.jobs) } else { Execution::Sequential };
    if cfg.jobs > 1 {
        cfg.run.execution = Execution::Sequential;
    }
    let outcomes = exec.install(|| {
        exec.map(cfg.replicates as usize, |r| replicate(&cfg, r as u32, &dir.join(format!("rep-{r:03}"))))
    });
    let replicates = outcomes.into_iter().collect::<Result<Vec<_>>>()?;

    let tag = rec.id().to_string();
    let rows: Vec<(String, Evaluation)> =
        replicates.iter().map(|o| (o.replicate.to_string(), o.evaluation.clone())).collect();
    write_evaluations(&rec.output("evaluation.tsv")?, &rows, Some(&tag))?;
    let evaluations: Vec<Evaluation> = rows.into_iter().map(|(_, e)| e).collect();
    let summary = aggregate(&evaluations);
    write_aggregate(&rec.output("summary.tsv")?, &summary, Some(&tag))?;

    let analysis = if cfg.analyze {
        let first = &replicates[0].simulated.data;
        let map = LayerMap::from_dataset(first);
        let runs: Vec<Vec<(Edge, f64)>> = replicates
            .iter()
            .map(|o| o.selection.edges.iter().copied().zip(o.selection.g.iter().copied()).collect())
            .collect();
        let labels: Vec<String> = replicates.iter().map(|o| format!("rep-{:03}", o.replicate)).collect();
        let analysis = analyze(&map.layering, &runs).map_err(|e| e.in_stage("analyze"))?;
        write_analysis(&mut rec, &map, &labels, &analysis).map_err(|e| e.in_stage("analyze"))?;
        Some(analysis)
    } else {
        None
    };
    let manifest = rec.finish()?;
    Ok(PipelineReport { replicates, summary, analysis, manifest })
}
