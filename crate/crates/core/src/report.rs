//! Machine-readable run reports and loss-trace exports.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dmf::{CandidateSummary, SolverConfig};
use crate::error::{Error, Result};
use crate::eval::ErrorSummary;
use crate::filter::{FilterConfig, FilterStats};
use crate::pipeline::{Ablation, Method, PipelineConfig, PipelineOutput};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl ReportFormat {
    /// `.csv` selects CSV, anything else JSON.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => ReportFormat::Csv,
            _ => ReportFormat::Json,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub solver: SolverConfig,
    pub filter: FilterConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportTimings {
    pub filter_s: f64,
    pub solve_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub schema_version: u32,
    pub method: Method,
    pub ablations: Vec<Ablation>,
    pub vertices: usize,
    pub input_edges: usize,
    pub selected_depth: Option<usize>,
    pub candidates: Vec<CandidateSummary>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub filter: Option<FilterStats>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub top_eigenvalues: Option<[f64; 4]>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub metrics: Option<ErrorSummary>,
    pub config: ReportConfig,
    /// Wall-clock numbers are opt-in so that repeated runs stay byte-identical.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timings: Option<ReportTimings>,
}

impl SolveReport {
    pub fn new(
        vertices: usize,
        input_edges: usize,
        config: &PipelineConfig,
        output: &PipelineOutput,
        metrics: Option<ErrorSummary>,
        with_timings: bool,
    ) -> Self {
        SolveReport {
            schema_version: SCHEMA_VERSION,
            method: config.method,
            ablations: config.ablations.clone(),
            vertices,
            input_edges,
            selected_depth: output.selected_depth(),
            candidates: output.dmf.as_ref().map(|r| r.candidates.clone()).unwrap_or_default(),
            filter: output.filter.as_ref().map(|f| f.stats.clone()),
            top_eigenvalues: output.spectral.as_ref().map(|s| s.top_eigenvalues),
            metrics,
            config: ReportConfig {
                solver: config.effective_solver(),
                filter: config.effective_filter(),
            },
            timings: with_timings.then_some(ReportTimings {
                filter_s: output.timings.filter.as_secs_f64(),
                solve_s: output.timings.solve.as_secs_f64(),
            }),
        }
    }

    /// One `mean/median` line in degrees, e.g. `mean 2.91 / median 1.40 (deg)`.
    pub fn summary_line(&self) -> Option<String> {
        self.metrics
            .as_ref()
            .map(|m| format!("mean {:.2} / median {:.2} (deg)", m.mean_deg, m.median_deg))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Flat `key,value` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("key,value\n");
        let mut row = |k: &str, v: String| {
            let _ = writeln!(out, "{k},{v}");
        };
        row("schema_version", self.schema_version.to_string());
        row("method", self.method.to_string());
        let ablations: Vec<&str> = self.ablations.iter().map(|a| a.name()).collect();
        row("ablations", ablations.join(";"));
        row("vertices", self.vertices.to_string());
        row("input_edges", self.input_edges.to_string());
        row("selected_depth", opt(self.selected_depth));
        for c in &self.candidates {
            row(&format!("depth_{}_discriminator", c.depth), opt(c.discriminator));
            row(&format!("depth_{}_final_loss", c.depth), opt(c.final_loss));
            if let Some(e) = &c.error {
                row(&format!("depth_{}_error", c.depth), format!("\"{}\"", e.replace('"', "'")));
            }
        }
        if let Some(f) = &self.filter {
            row("filter_kept_edges", f.kept_edges.to_string());
            row("filter_removed_edges", f.removed_edges.to_string());
            row("filter_triplets", f.triplets.to_string());
            row("filter_epsilon", opt(f.epsilon));
            row("filter_sigma", f.sigma.to_string());
            row("filter_skipped", f.skipped.to_string());
        }
        if let Some(l) = &self.top_eigenvalues {
            for (k, v) in l.iter().enumerate() {
                row(&format!("lambda_{}", k + 1), v.to_string());
            }
        }
        if let Some(m) = &self.metrics {
            row("mean_deg", m.mean_deg.to_string());
            row("median_deg", m.median_deg.to_string());
        }
        for line in self.config.solver.to_kv().lines() {
            if let Some((k, v)) = line.split_once('=') {
                row(&format!("config_{}", k.trim()), v.trim().to_string());
            }
        }
        if let Some(t) = &self.timings {
            row("filter_s", t.filter_s.to_string());
            row("solve_s", t.solve_s.to_string());
        }
        out
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_report(report: &SolveReport, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    let path = path.as_ref();
    let text = match format {
        ReportFormat::Json => report.to_json()?,
        ReportFormat::Csv => report.to_csv(),
    };
    write_text(path, &text)
}

pub fn read_report(path: impl AsRef<Path>) -> Result<SolveReport> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// `iteration,loss` rows, one per optimization step.
pub fn loss_trace_csv(trace: &[f64]) -> String {
    let mut out = String::from("iteration,loss\n");
    for (t, l) in trace.iter().enumerate() {
        let _ = writeln!(out, "{t},{l}");
    }
    out
}

/// Writes `<prefix>_depth<d>.csv` for every trace and returns the paths.
pub fn write_loss_traces(traces: &[(usize, Vec<f64>)], prefix: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let prefix = prefix.as_ref();
    let stem = prefix.file_name().and_then(|s| s.to_str()).unwrap_or("loss");
    traces
        .iter()
        .map(|(depth, trace)| {
            let path = prefix.with_file_name(format!("{stem}_depth{depth}.csv"));
            write_text(&path, &loss_trace_csv(trace))?;
            Ok(path)
        })
        .collect()
}
