//! Filter, factorize, reweight, select, project: the whole method in one call.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::dmf::{solve, ModelKind, SolveResult, SolverConfig};
use crate::error::{Error, Result};
use crate::filter::{run_edge_filter, EdgeOrdering, FilterConfig, FilterOutcome};
use crate::graph::ViewGraph;
use crate::so3::Rotation;
use crate::spectral::{spectral_solve, SpectralResult};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    Dmf,
    Spectral,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dmf" => Ok(Method::Dmf),
            "spectral" => Ok(Method::Spectral),
            other => Err(Error::InvalidParam(format!("unknown method {other:?}"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Dmf => "dmf",
            Method::Spectral => "spectral",
        })
    }
}

/// Components that can be switched off to measure their contribution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    /// Solve on the raw graph.
    NoFilter,
    /// Rank edges by mean loop error only when building the tree.
    NoSupportCount,
    /// Replace `H Hᵀ` by an unconstrained product of square factors.
    NoExplicitConstraint,
    /// Keep every block weight at 1.
    NoReweight,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [
        Ablation::NoFilter,
        Ablation::NoSupportCount,
        Ablation::NoExplicitConstraint,
        Ablation::NoReweight,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::NoFilter => "no-filter",
            Ablation::NoSupportCount => "no-support-count",
            Ablation::NoExplicitConstraint => "no-explicit-constraint",
            Ablation::NoReweight => "no-reweight",
        }
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidParam(format!("unknown ablation {s:?}")))
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PipelineConfig {
    pub method: Method,
    pub solver: SolverConfig,
    pub filter: FilterConfig,
    pub ablations: Vec<Ablation>,
}

impl PipelineConfig {
    pub fn has(&self, a: Ablation) -> bool {
        self.ablations.contains(&a)
    }

    /// Adds an ablation, keeping the list sorted and free of duplicates.
    pub fn with(mut self, a: Ablation) -> Self {
        if !self.has(a) {
            self.ablations.push(a);
            self.ablations.sort();
        }
        self
    }

    /// Solver settings after the ablations have been applied.
    pub fn effective_solver(&self) -> SolverConfig {
        let mut cfg = self.solver.clone();
        if self.has(Ablation::NoExplicitConstraint) {
            cfg.model = ModelKind::Vanilla;
        }
        if self.has(Ablation::NoReweight) {
            cfg.reweight = false;
        }
        cfg
    }

    pub fn effective_filter(&self) -> FilterConfig {
        let mut cfg = self.filter;
        if self.has(Ablation::NoSupportCount) {
            cfg.ordering = EdgeOrdering::ErrorOnly;
        }
        cfg
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Timings {
    pub filter: Duration,
    pub solve: Duration,
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub orientations: Vec<Rotation>,
    /// Absent when filtering was ablated.
    pub filter: Option<FilterOutcome>,
    pub dmf: Option<SolveResult>,
    pub spectral: Option<SpectralResult>,
    pub timings: Timings,
}

impl PipelineOutput {
    pub fn selected_depth(&self) -> Option<usize> {
        self.dmf.as_ref().map(|r| r.selected.depth)
    }
}

pub fn run_pipeline(graph: &ViewGraph, config: &PipelineConfig) -> Result<PipelineOutput> {
    let start = Instant::now();
    let filter = if config.has(Ablation::NoFilter) {
        None
    } else {
        let outcome = run_edge_filter(graph, &config.effective_filter())?;
        log::info!(
            "filter kept {} of {} edges",
            outcome.stats.kept_edges,
            outcome.stats.input_edges
        );
        Some(outcome)
    };
    let filter_time = start.elapsed();
    let input = filter.as_ref().map_or(graph, |f| &f.graph);

    let start = Instant::now();
    let (orientations, dmf, spectral) = match config.method {
        Method::Dmf => {
            let r = solve(input, &config.effective_solver())?;
            (r.selected.orientations.clone(), Some(r), None)
        }
        Method::Spectral => {
            let r = spectral_solve(input)?;
            (r.orientations.clone(), None, Some(r))
        }
    };
    Ok(PipelineOutput {
        orientations,
        filter,
        dmf,
        spectral,
        timings: Timings {
            filter: filter_time,
            solve: start.elapsed(),
        },
    })
}
