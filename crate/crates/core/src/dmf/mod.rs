//! Rank-3 symmetric deep matrix factorization solver.
//!
//! The stacked orientations are modelled as `H = W_1 ⋯ W_{d/2}` whose last
//! factor has three columns, and `Ĝ = H Hᵀ` is fitted to the observed blocks of
//! `G̃` under a weighted entry-wise ℓ1 loss. Weights of badly fitting blocks are
//! shrunk periodically after a warm-up. One model is trained per candidate depth
//! and the one whose orientations best explain the measured edges wins.

mod config;
mod factors;
mod objective;
mod optim;
mod vanilla;

pub use config::{parse_kv, validate_depth, ModelKind, OptimizerKind, SolverConfig};
pub use factors::{forward, init_factors, FactorStack};
pub use objective::{gradient, loss, reweight};
pub use vanilla::{dense_orientations, init_vanilla, VanillaStack};

use nalgebra::{DMatrix, Matrix3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{build_observation_matrix, fix_handedness, is_connected, ObservationMatrix, ViewGraph};
use crate::so3::{geodesic_distance, project_to_so3, Rotation};
use objective::{grad_h, loss_of, reweight_in_place, Gram};
use optim::Optimizer;
use vanilla::Symmetrized;

/// Outcome of training one depth candidate.
#[derive(Clone, Debug)]
pub struct CandidateResult {
    pub depth: usize,
    pub orientations: Vec<Rotation>,
    /// `Σ_edges d_geo(R̃_ij, R_i R_jᵀ)` over the observed edges.
    pub discriminator: f64,
    pub final_loss: f64,
    /// Loss before each optimization step.
    pub loss_trace: Vec<f64>,
}

/// Per-depth line of a solve, including failed candidates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub depth: usize,
    pub discriminator: Option<f64>,
    pub final_loss: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub selected: CandidateResult,
    pub candidates: Vec<CandidateSummary>,
    /// Loss traces of every successful candidate, by depth.
    pub loss_traces: Vec<(usize, Vec<f64>)>,
}

/// Model state handed to an optimization monitor.
pub enum Estimate<'a> {
    Constrained(&'a FactorStack),
    Vanilla(&'a VanillaStack),
}

/// What a monitor sees after each step.
pub struct Snapshot<'a> {
    /// Number of completed optimization steps.
    pub iteration: usize,
    pub estimate: Estimate<'a>,
    pub weights: &'a DMatrix<f64>,
}

impl Snapshot<'_> {
    /// Orientations the model would report if training stopped here.
    pub fn orientations(&self) -> Result<Vec<Rotation>> {
        match &self.estimate {
            Estimate::Constrained(stack) => extract_orientations(&stack.product()),
            Estimate::Vanilla(stack) => dense_orientations(&stack.product()),
        }
    }

    /// Dense `Ĝ`.
    pub fn g_hat(&self) -> DMatrix<f64> {
        match &self.estimate {
            Estimate::Constrained(stack) => forward(stack).1,
            Estimate::Vanilla(stack) => stack.product(),
        }
    }
}

/// Projects every 3×3 block of `h` onto SO(3), after undoing a global reflection.
pub fn extract_orientations(h: &DMatrix<f64>) -> Result<Vec<Rotation>> {
    let mut h = h.clone();
    fix_handedness(&mut h);
    (0..h.nrows() / 3)
        .map(|i| {
            let block: Matrix3<f64> = h.fixed_view::<3, 3>(3 * i, 0).into_owned();
            project_to_so3(&block).map_err(|_| Error::SingularBlock(i))
        })
        .collect()
}

/// `Σ_{(i,j) observed} d_geo(R̃_ij, R_i R_jᵀ)`, the model-selection score.
pub fn discriminator(obs: &ObservationMatrix, orientations: &[Rotation]) -> f64 {
    obs.pairs()
        .iter()
        .map(|&(i, j)| {
            let measured = Rotation::from_matrix_unchecked(obs.block(i, j));
            geodesic_distance(&measured, &(orientations[i] * orientations[j].transpose()))
        })
        .sum()
}

/// Same score computed from a graph's edges.
pub fn graph_discriminator(graph: &ViewGraph, orientations: &[Rotation]) -> f64 {
    graph
        .edges()
        .iter()
        .map(|e| geodesic_distance(&e.rot, &(orientations[e.i] * orientations[e.j].transpose())))
        .sum()
}

/// Seed of the depth-`depth` candidate.
pub fn candidate_seed(config: &SolverConfig, depth: usize) -> u64 {
    config.seed.wrapping_add(depth as u64)
}

/// Trains one candidate of the given depth.
pub fn optimize(obs: &ObservationMatrix, config: &SolverConfig, depth: usize) -> Result<CandidateResult> {
    optimize_with_monitor(obs, config, depth, &mut |_| {})
}

/// [`optimize`] with a callback invoked before the first step and after every step.
pub fn optimize_with_monitor(
    obs: &ObservationMatrix,
    config: &SolverConfig,
    depth: usize,
    monitor: &mut dyn FnMut(&Snapshot<'_>),
) -> Result<CandidateResult> {
    config.validate()?;
    validate_depth(depth)?;
    if obs.n() == 0 {
        return Err(Error::InvalidParam("empty graph".into()));
    }
    let mut obs = obs.clone();
    obs.reset_weights();
    let mut rng = ChaCha8Rng::seed_from_u64(candidate_seed(config, depth));
    match config.model {
        ModelKind::Constrained => optimize_constrained(obs, config, depth, &mut rng, monitor),
        ModelKind::Vanilla => optimize_vanilla(obs, config, depth, &mut rng, monitor),
    }
}

fn optimize_constrained(
    mut obs: ObservationMatrix,
    config: &SolverConfig,
    depth: usize,
    rng: &mut ChaCha8Rng,
    monitor: &mut dyn FnMut(&Snapshot<'_>),
) -> Result<CandidateResult> {
    let mut stack = init_factors(obs.n(), depth, config.init_scale, config.hidden_width, rng)?;
    let mut opt = Optimizer::new(config.optimizer, config.learning_rate, &stack.factors);
    let mut trace = Vec::with_capacity(config.iterations);
    monitor(&Snapshot {
        iteration: 0,
        estimate: Estimate::Constrained(&stack),
        weights: obs.weights(),
    });
    for t in 0..config.iterations {
        let suffix = stack.suffix_products();
        let h = &suffix[0];
        if config.reweights_at(t) {
            reweight_in_place(&mut obs, &Gram(h));
        }
        trace.push(loss_of(&Gram(h), &obs));
        let d_h = grad_h(h, &obs);
        let grads = stack.backprop(&suffix, &d_h);
        opt.step(&mut stack.factors, &grads);
        monitor(&Snapshot {
            iteration: t + 1,
            estimate: Estimate::Constrained(&stack),
            weights: obs.weights(),
        });
    }
    let h = stack.product();
    let final_loss = loss_of(&Gram(&h), &obs);
    let orientations = extract_orientations(&h).map_err(degenerate)?;
    Ok(CandidateResult {
        depth,
        discriminator: discriminator(&obs, &orientations),
        orientations,
        final_loss,
        loss_trace: trace,
    })
}

fn optimize_vanilla(
    mut obs: ObservationMatrix,
    config: &SolverConfig,
    depth: usize,
    rng: &mut ChaCha8Rng,
    monitor: &mut dyn FnMut(&Snapshot<'_>),
) -> Result<CandidateResult> {
    let mut stack = init_vanilla(obs.n(), depth, config.init_scale, rng)?;
    let mut opt = Optimizer::new(config.optimizer, config.learning_rate, &stack.factors);
    let mut trace = Vec::with_capacity(config.iterations);
    monitor(&Snapshot {
        iteration: 0,
        estimate: Estimate::Vanilla(&stack),
        weights: obs.weights(),
    });
    for t in 0..config.iterations {
        if config.reweights_at(t) {
            let g_hat = stack.product();
            reweight_in_place(&mut obs, &Symmetrized(&g_hat));
        }
        let (value, _, grads) = stack.loss_and_gradient(&obs);
        trace.push(value);
        opt.step(&mut stack.factors, &grads);
        monitor(&Snapshot {
            iteration: t + 1,
            estimate: Estimate::Vanilla(&stack),
            weights: obs.weights(),
        });
    }
    let (final_loss, g_hat, _) = stack.loss_and_gradient(&obs);
    let orientations = dense_orientations(&g_hat).map_err(degenerate)?;
    Ok(CandidateResult {
        depth,
        discriminator: discriminator(&obs, &orientations),
        orientations,
        final_loss,
        loss_trace: trace,
    })
}

fn degenerate(e: Error) -> Error {
    match e {
        Error::SingularBlock(i) => Error::DegenerateSolution(format!("block {i} of H is rank-deficient")),
        other => other,
    }
}

/// Trains every depth candidate on `graph` and keeps the one with the smallest
/// discriminator; ties go to the shallower model. Failed candidates are
/// reported and skipped.
pub fn solve(graph: &ViewGraph, config: &SolverConfig) -> Result<SolveResult> {
    config.validate()?;
    if graph.n() == 0 {
        return Err(Error::InvalidParam("empty graph".into()));
    }
    if !is_connected(graph) {
        return Err(Error::Disconnected);
    }
    let obs = build_observation_matrix(graph);
    let mut depths = config.depth_candidates.clone();
    depths.sort_unstable();
    depths.dedup();

    let mut best: Option<CandidateResult> = None;
    let mut candidates = Vec::with_capacity(depths.len());
    let mut loss_traces = Vec::new();
    let mut failures = Vec::new();
    for depth in depths {
        match optimize(&obs, config, depth) {
            Ok(c) => {
                log::info!("depth {depth}: discriminator {:.6}, loss {:.6}", c.discriminator, c.final_loss);
                candidates.push(CandidateSummary {
                    depth,
                    discriminator: Some(c.discriminator),
                    final_loss: Some(c.final_loss),
                    error: None,
                });
                loss_traces.push((depth, c.loss_trace.clone()));
                if best.as_ref().is_none_or(|b| c.discriminator < b.discriminator) {
                    best = Some(c);
                }
            }
            Err(e) => {
                log::warn!("depth {depth} failed: {e}");
                failures.push(format!("depth {depth}: {e}"));
                candidates.push(CandidateSummary {
                    depth,
                    discriminator: None,
                    final_loss: None,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    let selected = best.ok_or_else(|| Error::AllCandidatesFailed(failures.join("; ")))?;
    Ok(SolveResult {
        selected,
        candidates,
        loss_traces,
    })
}
