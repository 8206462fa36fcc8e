//! The `rotsync` command line: `generate`, `filter`, `solve`, `eval`, `bench`.
//!
//! Settings resolve in three layers: built-in defaults, then a flat
//! `key = value` config file, then command-line flags. Exit codes are 0 on
//! success, 1 for runtime or data errors and 2 for usage errors.

use std::collections::HashSet;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dmf::{parse_kv, OptimizerKind};
use crate::error::Error;
use crate::eval::{error_summary, error_summary_partial, ErrorSummary};
use crate::filter::{run_edge_filter, EdgeOrdering, FilterConfig};
use crate::graph::{GroundTruth, ViewGraph};
use crate::io::{
    format_dataset, load_bundler_orientations, load_dataset, load_orientations, save_dataset, save_orientations,
    GraphFormat,
};
use crate::pipeline::{run_pipeline, Ablation, Method, PipelineConfig};
use crate::report::{write_loss_traces, write_report, ReportFormat, SolveReport};
use crate::so3::Rotation;
use crate::synth::{synthesize, SynthParams, SyntheticScene};

#[derive(Debug, Parser)]
#[command(name = "rotsync", version, about = "Robust multiple rotation averaging")]
pub struct Cli {
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a synthetic view graph with ground truth and outlier labels.
    Generate(GenerateArgs),
    /// Run spanning-tree edge filtering on a graph.
    Filter(FilterArgs),
    /// Estimate absolute orientations.
    Solve(SolveArgs),
    /// Compare estimated orientations with ground truth.
    Eval(EvalArgs),
    /// Sweep synthetic settings and ablations, one CSV row per cell.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Dmf,
    Spectral,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Dmf => Method::Dmf,
            MethodArg::Spectral => Method::Spectral,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OrderingArg {
    SupportThenError,
    ErrorOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrientationFormat {
    Plain,
    G2o,
    /// Bundler `bundle.out` camera rotations; cameras without a pose are skipped.
    Bundler,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    #[arg(long, default_value_t = 0.5)]
    pub density: f64,
    #[arg(long = "noise-deg", default_value_t = 5.0)]
    pub noise_deg: f64,
    #[arg(long, default_value_t = 0.0)]
    pub outliers: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for the three files.
    #[arg(long, default_value = ".")]
    pub dir: PathBuf,
    #[arg(long, default_value = "graph.txt")]
    pub graph: PathBuf,
    #[arg(long, default_value = "gt.txt")]
    pub gt: PathBuf,
    /// Per-edge `i,j,outlier,tree` flags.
    #[arg(long, default_value = "labels.csv")]
    pub labels: PathBuf,
    #[arg(long, default_value = "plain")]
    pub format: GraphFormat,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    /// Graph format; guessed from the extension when omitted.
    #[arg(long)]
    pub format: Option<GraphFormat>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, value_enum)]
    pub ordering: Option<OrderingArg>,
    /// Filtered graph, written in plain format unless the input is g2o.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// CSV of removed edges.
    #[arg(long)]
    pub removed: Option<PathBuf>,
    /// JSON filter statistics.
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

/// Solver settings that override the config file.
#[derive(Debug, Args, Default, Clone)]
pub struct SolverFlags {
    /// Flat `key = value` file with solver and filter settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long = "learning-rate", alias = "lr")]
    pub learning_rate: Option<f64>,
    #[arg(long = "init-scale")]
    pub init_scale: Option<f64>,
    #[arg(long = "reweight-period")]
    pub reweight_period: Option<usize>,
    #[arg(long)]
    pub warmup: Option<usize>,
    /// Comma-separated even depths, e.g. `2,4,6,8`.
    #[arg(long, value_delimiter = ',')]
    pub depths: Option<Vec<usize>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub optimizer: Option<OptimizerKind>,
    #[arg(long = "hidden-width")]
    pub hidden_width: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Ablations: no-filter, no-support-count, no-explicit-constraint, no-reweight.
    #[arg(long, value_delimiter = ',')]
    pub ablate: Vec<Ablation>,
    /// Same as `--ablate no-filter`.
    #[arg(long = "no-filter")]
    pub no_filter: bool,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long)]
    pub format: Option<GraphFormat>,
    /// Ground-truth orientations; enables the error summary.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[arg(long = "gt-format", value_enum)]
    pub gt_format: Option<OrientationFormat>,
    /// Solve on the largest connected component only (vertices are renumbered).
    #[arg(long = "largest-component")]
    pub largest_component: bool,
    #[command(flatten)]
    pub solver: SolverFlags,
    /// Report path; `.csv` selects CSV, anything else JSON.
    #[arg(long, short)]
    pub report: Option<PathBuf>,
    /// Estimated orientations as `VERTEX_GT` records.
    #[arg(long)]
    pub orientations: Option<PathBuf>,
    /// Writes `<prefix>_depth<d>.csv` loss traces.
    #[arg(long = "loss-trace")]
    pub loss_trace: Option<PathBuf>,
    /// Include wall-clock timings in the report (breaks byte-identical reruns).
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long = "pred-format", value_enum, default_value = "plain")]
    pub pred_format: OrientationFormat,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long = "gt-format", value_enum)]
    pub gt_format: Option<OrientationFormat>,
    /// JSON error summary.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 30)]
    pub n: usize,
    #[arg(long, default_value_t = 0.5)]
    pub density: f64,
    /// Noise levels in degrees.
    #[arg(long = "noise-deg", value_delimiter = ',', default_value = "5")]
    pub noise_deg: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.2")]
    pub outliers: Vec<f64>,
    /// One cell per depth; omit to let every cell select among the configured candidates.
    #[arg(long = "cell-depths", value_delimiter = ',')]
    pub cell_depths: Vec<usize>,
    /// Ablation variants, one cell each: `none`, an ablation name, or names joined by `+`.
    #[arg(long, value_delimiter = ',', default_value = "none")]
    pub variants: Vec<String>,
    /// Number of synthetic graphs per setting, seeded `graph-seed`, `graph-seed + 1`, ...
    #[arg(long, default_value_t = 1)]
    pub replicates: u64,
    #[arg(long = "graph-seed", default_value_t = 0)]
    pub graph_seed: u64,
    #[command(flatten)]
    pub solver: SolverFlags,
    /// CSV output; stdout when omitted.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Cells solved concurrently.
    #[arg(long, env = "ROTSYNC_JOBS", default_value_t = 1)]
    pub jobs: usize,
}

/// Error of a command, split by exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParam(msg) => CliError::Usage(msg),
            Error::InvalidDepth(d) => CliError::Usage(Error::InvalidDepth(d).to_string()),
            other => CliError::Runtime(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Runtime(e) => write!(f, "error: {e}"),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    init_logging(cli.verbose);
    let mut stdout = std::io::stdout().lock();
    match execute(&cli.command, &mut stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

pub fn execute(command: &Command, out: &mut dyn std::io::Write) -> CliResult<()> {
    match command {
        Command::Generate(a) => cmd_generate(a, out),
        Command::Filter(a) => cmd_filter(a, out),
        Command::Solve(a) => cmd_solve(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Bench(a) => cmd_bench(a, out),
    }
}

fn print(out: &mut dyn std::io::Write, line: &str) -> CliResult<()> {
    writeln!(out, "{line}").map_err(|e| CliError::Runtime(Error::io("<stdout>", e)))
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::Runtime(Error::io(path, e)))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(Error::from)? + "\n";
    write_file(path, &text)
}

fn graph_format(path: &Path, explicit: Option<GraphFormat>) -> GraphFormat {
    explicit.unwrap_or_else(|| GraphFormat::from_path(path))
}

fn labels_csv(scene: &SyntheticScene) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Runtime(Error::InvalidParam(e.to_string()));
    w.write_record(["i", "j", "outlier", "tree"]).map_err(csv_err)?;
    for ((e, &o), &t) in scene.graph.edges().iter().zip(&scene.outlier_labels).zip(&scene.tree_labels) {
        w.write_record([e.i.to_string(), e.j.to_string(), u8::from(o).to_string(), u8::from(t).to_string()])
            .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Runtime(Error::InvalidParam(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn cmd_generate(a: &GenerateArgs, out: &mut dyn std::io::Write) -> CliResult<()> {
    let params = SynthParams {
        n: a.n,
        density: a.density,
        noise_sigma_deg: a.noise_deg,
        outlier_ratio: a.outliers,
    };
    params.validate()?;
    if a.format == GraphFormat::OneDsfm {
        return Err(CliError::Usage("the 1dsfm format is read-only".into()));
    }
    let scene = synthesize(&params, &mut ChaCha8Rng::seed_from_u64(a.seed))?;
    fs::create_dir_all(&a.dir).map_err(|e| CliError::Runtime(Error::io(&a.dir, e)))?;
    let graph_path = a.dir.join(&a.graph);
    let gt_path = a.dir.join(&a.gt);
    let labels_path = a.dir.join(&a.labels);
    save_dataset(&scene.graph, None, &graph_path, a.format)?;
    save_orientations(&scene.ground_truth, &gt_path, a.format)?;
    write_file(&labels_path, &labels_csv(&scene)?)?;
    let outliers = scene.outlier_labels.iter().filter(|&&o| o).count();
    print(
        out,
        &format!(
            "generated {} vertices, {} edges ({} outliers): {}, {}, {}",
            scene.graph.n(),
            scene.graph.num_edges(),
            outliers,
            graph_path.display(),
            gt_path.display(),
            labels_path.display()
        ),
    )
}

fn cmd_filter(a: &FilterArgs, out: &mut dyn std::io::Write) -> CliResult<()> {
    let format = graph_format(&a.input, a.format);
    let graph = load_dataset(&a.input, format)?.graph;
    let mut cfg = FilterConfig::default();
    if let Some(s) = a.sigma {
        cfg.sigma = s;
    }
    if let Some(o) = a.ordering {
        cfg.ordering = match o {
            OrderingArg::SupportThenError => EdgeOrdering::SupportThenError,
            OrderingArg::ErrorOnly => EdgeOrdering::ErrorOnly,
        };
    }
    let outcome = run_edge_filter(&graph, &cfg)?;
    if let Some(path) = &a.output {
        let fmt = if format == GraphFormat::G2o { GraphFormat::G2o } else { GraphFormat::Plain };
        save_dataset(&outcome.graph, None, path, fmt)?;
    }
    if let Some(path) = &a.removed {
        let mut text = String::from("i,j\n");
        for (i, j) in &outcome.stats.removed {
            text.push_str(&format!("{i},{j}\n"));
        }
        write_file(path, &text)?;
    }
    if let Some(path) = &a.stats {
        write_json(path, &outcome.stats)?;
    }
    let s = &outcome.stats;
    print(
        out,
        &format!(
            "kept {} of {} edges (removed {}, {} triangles{})",
            s.kept_edges,
            s.input_edges,
            s.removed_edges,
            s.triplets,
            if s.skipped { ", no triangles: filter skipped" } else { "" }
        ),
    )
}

/// Fully resolved settings of one `solve` or `bench` run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub pipeline: PipelineConfig,
}

impl RunConfig {
    /// Defaults, then the config file, then the flags.
    pub fn resolve(flags: &SolverFlags) -> CliResult<RunConfig> {
        let mut p = PipelineConfig::default();
        if let Some(path) = &flags.config {
            let text = fs::read_to_string(path).map_err(|e| CliError::Runtime(Error::io(path, e)))?;
            for (key, value) in parse_kv(&text)? {
                match key.as_str() {
                    "sigma" => p.filter.sigma = parse_value(&key, &value)?,
                    "ordering" => {
                        p.filter.ordering = match value.as_str() {
                            "support-then-error" => EdgeOrdering::SupportThenError,
                            "error-only" => EdgeOrdering::ErrorOnly,
                            v => return Err(CliError::Usage(format!("unknown ordering '{v}'"))),
                        }
                    }
                    "method" => p.method = value.parse()?,
                    "ablate" => {
                        for name in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                            p = p.with(name.parse()?);
                        }
                    }
                    _ => p.solver.set(&key, &value)?,
                }
            }
        }
        let s = &mut p.solver;
        if let Some(v) = flags.iterations {
            s.iterations = v;
        }
        if let Some(v) = flags.learning_rate {
            s.learning_rate = v;
        }
        if let Some(v) = flags.init_scale {
            s.init_scale = v;
        }
        if let Some(v) = flags.reweight_period {
            s.reweight_period = v;
        }
        if let Some(v) = flags.warmup {
            s.warmup = v;
        }
        if let Some(v) = &flags.depths {
            s.depth_candidates = v.clone();
        }
        if let Some(v) = flags.seed {
            s.seed = v;
        }
        if let Some(v) = flags.optimizer {
            s.optimizer = v;
        }
        if let Some(v) = flags.hidden_width {
            s.hidden_width = Some(v);
        }
        if let Some(v) = flags.sigma {
            p.filter.sigma = v;
        }
        if let Some(m) = flags.method {
            p.method = m.into();
        }
        for &a in &flags.ablate {
            p = p.with(a);
        }
        if flags.no_filter {
            p = p.with(Ablation::NoFilter);
        }
        // ablations can make settings irrelevant (no warm-up without reweighting)
        p.effective_solver().validate()?;
        for &d in &p.solver.depth_candidates {
            crate::dmf::validate_depth(d)?;
        }
        if !(p.filter.sigma > 0.0) {
            return Err(CliError::Usage(format!("sigma must be positive, got {}", p.filter.sigma)));
        }
        Ok(RunConfig { pipeline: p })
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> CliResult<T> {
    value
        .parse()
        .map_err(|_| CliError::Usage(format!("bad value '{value}' for {key}")))
}

/// Reference orientations, possibly partial.
fn load_reference(path: &Path, format: Option<OrientationFormat>) -> CliResult<Vec<Option<Rotation>>> {
    let format = format.unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
        Some("out") => OrientationFormat::Bundler,
        Some("g2o") => OrientationFormat::G2o,
        _ => OrientationFormat::Plain,
    });
    Ok(match format {
        OrientationFormat::Bundler => load_bundler_orientations(path)?,
        OrientationFormat::Plain => load_orientations(path, GraphFormat::Plain)?.orientations.into_iter().map(Some).collect(),
        OrientationFormat::G2o => load_orientations(path, GraphFormat::G2o)?.orientations.into_iter().map(Some).collect(),
    })
}

fn summarize(pred: &[Rotation], reference: &[Option<Rotation>]) -> CliResult<ErrorSummary> {
    if reference.len() != pred.len() {
        return Err(CliError::Runtime(Error::InvalidParam(format!(
            "ground truth has {} orientations but the graph has {} vertices",
            reference.len(),
            pred.len()
        ))));
    }
    error_summary_partial(pred, reference)
        .ok_or_else(|| CliError::Runtime(Error::InvalidParam("ground truth holds no orientation".into())))
}

fn largest_component(graph: &ViewGraph) -> Vec<usize> {
    let mut comps = graph.components();
    // ties resolved towards the component holding the smallest vertex id
    comps.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    comps.into_iter().next().unwrap_or_default()
}

fn cmd_solve(a: &SolveArgs, out: &mut dyn std::io::Write) -> CliResult<()> {
    let run = RunConfig::resolve(&a.solver)?;
    let format = graph_format(&a.input, a.format);
    let mut graph = load_dataset(&a.input, format)?.graph;
    let mut reference = match &a.gt {
        Some(path) => Some(load_reference(path, a.gt_format)?),
        None => None,
    };
    if a.largest_component {
        let keep = largest_component(&graph);
        if keep.len() < graph.n() {
            log::info!("keeping the largest component: {} of {} vertices", keep.len(), graph.n());
        }
        graph = graph.induced_subgraph(&keep);
        if let Some(r) = reference.as_mut() {
            *r = keep.iter().map(|&v| r.get(v).copied().flatten()).collect();
        }
    }
    let output = run_pipeline(&graph, &run.pipeline)?;
    let metrics = match &reference {
        Some(r) => Some(summarize(&output.orientations, r)?),
        None => None,
    };
    let report = SolveReport::new(graph.n(), graph.num_edges(), &run.pipeline, &output, metrics, a.timings);
    if let Some(path) = &a.report {
        write_report(&report, path, ReportFormat::from_path(path))?;
    }
    if let Some(path) = &a.orientations {
        save_orientations(&GroundTruth::new(output.orientations.clone()), path, GraphFormat::Plain)?;
    }
    if let (Some(prefix), Some(r)) = (&a.loss_trace, &output.dmf) {
        write_loss_traces(&r.loss_traces, prefix)?;
    }

    let mut line = format!("method {}", run.pipeline.method);
    if let Some(d) = report.selected_depth {
        line.push_str(&format!(", depth {d}"));
    }
    if let Some(f) = &report.filter {
        line.push_str(&format!(", kept {} of {} edges", f.kept_edges, f.input_edges));
    }
    print(out, &line)?;
    if let Some(s) = report.summary_line() {
        print(out, &s)?;
    }
    Ok(())
}

fn cmd_eval(a: &EvalArgs, out: &mut dyn std::io::Write) -> CliResult<()> {
    let pred: Vec<Rotation> = match a.pred_format {
        OrientationFormat::Plain => load_orientations(&a.pred, GraphFormat::Plain)?.orientations,
        OrientationFormat::G2o => load_orientations(&a.pred, GraphFormat::G2o)?.orientations,
        OrientationFormat::Bundler => load_bundler_orientations(&a.pred)?
            .into_iter()
            .map(|r| r.ok_or_else(|| CliError::Usage("predictions must cover every camera".into())))
            .collect::<CliResult<_>>()?,
    };
    let reference = load_reference(&a.gt, a.gt_format)?;
    let summary = summarize(&pred, &reference)?;
    if let Some(path) = &a.output {
        write_json(path, &summary)?;
    }
    print(
        out,
        &format!("mean {:.2} / median {:.2} (deg)", summary.mean_deg, summary.median_deg),
    )
}

/// One bench cell: its grid coordinates and result.
#[derive(Clone, Debug, Serialize)]
struct BenchRow {
    noise_deg: f64,
    outliers: f64,
    depth: String,
    variant: String,
    graph_seed: u64,
    mean_deg: Option<f64>,
    median_deg: Option<f64>,
    selected_depth: Option<usize>,
    kept_edges: Option<usize>,
    removed_outliers: Option<usize>,
    removed_inliers: Option<usize>,
    error: Option<String>,
}

fn parse_variant(v: &str) -> CliResult<Vec<Ablation>> {
    if v == "none" || v == "full" {
        return Ok(Vec::new());
    }
    v.split('+').map(|s| s.parse::<Ablation>().map_err(CliError::from)).collect()
}

struct Cell {
    noise: f64,
    outliers: f64,
    depth: Option<usize>,
    variant: String,
    ablations: Vec<Ablation>,
    graph_seed: u64,
}

fn run_cell(cell: &Cell, n: usize, density: f64, base: &PipelineConfig) -> BenchRow {
    let mut row = BenchRow {
        noise_deg: cell.noise,
        outliers: cell.outliers,
        depth: cell.depth.map_or_else(|| "auto".to_string(), |d| d.to_string()),
        variant: cell.variant.clone(),
        graph_seed: cell.graph_seed,
        mean_deg: None,
        median_deg: None,
        selected_depth: None,
        kept_edges: None,
        removed_outliers: None,
        removed_inliers: None,
        error: None,
    };
    let params = SynthParams {
        n,
        density,
        noise_sigma_deg: cell.noise,
        outlier_ratio: cell.outliers,
    };
    let scene = match synthesize(&params, &mut ChaCha8Rng::seed_from_u64(cell.graph_seed)) {
        Ok(s) => s,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    let mut cfg = base.clone();
    for &a in &cell.ablations {
        cfg = cfg.with(a);
    }
    if let Some(d) = cell.depth {
        cfg.solver.depth_candidates = vec![d];
    }
    match run_pipeline(&scene.graph, &cfg) {
        Ok(out) => {
            let s = error_summary(&out.orientations, &scene.ground_truth.orientations);
            row.mean_deg = Some(s.mean_deg);
            row.median_deg = Some(s.median_deg);
            row.selected_depth = out.selected_depth();
            if let Some(f) = &out.filter {
                let removed: HashSet<(usize, usize)> = f.stats.removed.iter().copied().collect();
                let (mut ro, mut ri) = (0, 0);
                for (e, &o) in scene.graph.edges().iter().zip(&scene.outlier_labels) {
                    if removed.contains(&(e.i, e.j)) {
                        if o {
                            ro += 1;
                        } else {
                            ri += 1;
                        }
                    }
                }
                row.kept_edges = Some(f.stats.kept_edges);
                row.removed_outliers = Some(ro);
                row.removed_inliers = Some(ri);
            }
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

fn cmd_bench(a: &BenchArgs, out: &mut dyn std::io::Write) -> CliResult<()> {
    let run = RunConfig::resolve(&a.solver)?;
    if a.jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    for &d in &a.cell_depths {
        crate::dmf::validate_depth(d)?;
    }
    let depths: Vec<Option<usize>> = if a.cell_depths.is_empty() {
        vec![None]
    } else {
        a.cell_depths.iter().copied().map(Some).collect()
    };
    let mut cells = Vec::new();
    for &noise in &a.noise_deg {
        for &outliers in &a.outliers {
            for &depth in &depths {
                for variant in &a.variants {
                    for r in 0..a.replicates {
                        cells.push(Cell {
                            noise,
                            outliers,
                            depth,
                            variant: variant.clone(),
                            ablations: parse_variant(variant)?,
                            graph_seed: a.graph_seed.wrapping_add(r),
                        });
                    }
                }
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs)
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    // rows are collected in grid order whatever the scheduling
    let rows: Vec<BenchRow> = pool.install(|| {
        use rayon::prelude::*;
        cells
            .par_iter()
            .map(|c| run_cell(c, a.n, a.density, &run.pipeline))
            .collect()
    });

    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &rows {
        w.serialize(row).map_err(|e| CliError::Runtime(Error::InvalidParam(e.to_string())))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Runtime(Error::InvalidParam(e.to_string())))?;
    let text = String::from_utf8(bytes).expect("csv output is UTF-8");
    match &a.output {
        Some(path) => {
            write_file(path, &text)?;
            print(out, &format!("{} cells written to {}", rows.len(), path.display()))
        }
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Runtime(Error::io("<stdout>", e))),
    }
}

/// Text of a graph file, used by `generate` and handy in tests.
pub fn render_graph(graph: &ViewGraph, format: GraphFormat) -> CliResult<String> {
    Ok(format_dataset(graph, None, format)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("rotsync").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        fs::write(&cfg, "# solver\niterations = 300\nseed = 4\nsigma = 0.5\nablate = no-reweight\n").unwrap();
        let cli = parse(&["solve", "-i", "g.txt", "--config", cfg.to_str().unwrap(), "--seed", "9"]);
        let Command::Solve(a) = cli.command else { panic!() };
        let run = RunConfig::resolve(&a.solver).unwrap();
        assert_eq!(run.pipeline.solver.iterations, 300);
        assert_eq!(run.pipeline.solver.seed, 9);
        assert_eq!(run.pipeline.filter.sigma, 0.5);
        assert_eq!(run.pipeline.ablations, vec![Ablation::NoReweight]);
        assert_eq!(run.pipeline.solver.warmup, 1000);
    }

    #[test]
    fn bad_values_are_usage_errors() {
        let cli = parse(&["solve", "-i", "g.txt", "--depths", "3"]);
        let Command::Solve(a) = cli.command else { panic!() };
        assert_eq!(RunConfig::resolve(&a.solver).unwrap_err().exit_code(), 2);
        assert!(Cli::try_parse_from(["rotsync", "solve", "-i", "g", "--ablate", "no-magic"]).is_err());
        assert_eq!(parse_variant("no-filter+no-reweight").unwrap().len(), 2);
        assert!(parse_variant("full").unwrap().is_empty());
    }

    #[test]
    fn largest_component_prefers_size_then_low_ids() {
        let g = ViewGraph::from_edges(
            6,
            [
                (0, 1, Rotation::identity()),
                (2, 3, Rotation::identity()),
                (3, 4, Rotation::identity()),
            ],
        )
        .unwrap();
        assert_eq!(largest_component(&g), vec![2, 3, 4]);
    }
}
