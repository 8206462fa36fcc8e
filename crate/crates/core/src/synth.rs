//! Synthetic view graphs with planted noise and outliers.

use std::collections::HashSet;

use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{GroundTruth, ViewGraph};
use crate::so3::{random_perturbation, random_rotation, Rotation};

/// A generated problem together with its answer key.
#[derive(Clone, Debug)]
pub struct SyntheticScene {
    pub graph: ViewGraph,
    pub ground_truth: GroundTruth,
    /// One flag per edge of `graph`, true for planted outliers.
    pub outlier_labels: Vec<bool>,
    /// One flag per edge of `graph`, true for edges of the planted spanning tree.
    pub tree_labels: Vec<bool>,
}

/// Parameters of [`synthesize`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthParams {
    pub n: usize,
    pub density: f64,
    pub noise_sigma_deg: f64,
    pub outlier_ratio: f64,
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::InvalidParam(format!("n must be at least 3, got {}", self.n)));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "density must lie in (0, 1], got {}",
                self.density
            )));
        }
        if !(self.noise_sigma_deg >= 0.0 && self.noise_sigma_deg.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "noise sigma must be finite and non-negative, got {}",
                self.noise_sigma_deg
            )));
        }
        if !(self.outlier_ratio >= 0.0 && self.outlier_ratio < 1.0) {
            return Err(Error::InvalidParam(format!(
                "outlier ratio must lie in [0, 1), got {}",
                self.outlier_ratio
            )));
        }
        Ok(())
    }
}

/// Samples Haar-random ground truth, a random spanning tree plus each other pair
/// with probability `density`, and noisy relative rotations. A fraction
/// `outlier_ratio` of the non-tree edges is replaced by uniformly random rotations.
///
/// Random draws happen in a fixed order (orientations, tree, extra edges, noise,
/// outliers), so the same seed with `outlier_ratio = 0` yields the clean version
/// of the same graph.
pub fn synthesize<R: Rng + ?Sized>(params: &SynthParams, rng: &mut R) -> Result<SyntheticScene> {
    params.validate()?;
    let n = params.n;
    let truth: Vec<Rotation> = (0..n).map(|_| random_rotation(rng)).collect();

    // random recursive tree over a shuffled vertex order
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut tree = HashSet::new();
    for k in 1..n {
        let parent = order[rng.random_range(0..k)];
        let child = order[k];
        tree.insert((parent.min(child), parent.max(child)));
    }

    let mut pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let in_tree = tree.contains(&(i, j));
            let keep = in_tree || rng.random::<f64>() < params.density;
            if keep {
                pairs.push((i, j, in_tree));
            }
        }
    }

    let mut rots: Vec<Rotation> = pairs
        .iter()
        .map(|&(i, j, _)| {
            let clean = truth[i] * truth[j].transpose();
            clean * random_perturbation(params.noise_sigma_deg, rng)
        })
        .collect();

    let candidates: Vec<usize> = (0..pairs.len()).filter(|&k| !pairs[k].2).collect();
    let count = (params.outlier_ratio * candidates.len() as f64).floor() as usize;
    let mut outlier_labels = vec![false; pairs.len()];
    if count > 0 {
        for pick in index::sample(rng, candidates.len(), count) {
            let k = candidates[pick];
            outlier_labels[k] = true;
            rots[k] = random_rotation(rng);
        }
    }

    let mut graph = ViewGraph::new(n);
    for (&(i, j, _), rot) in pairs.iter().zip(&rots) {
        graph.add_edge(i, j, *rot)?;
    }
    Ok(SyntheticScene {
        graph,
        ground_truth: GroundTruth::new(truth),
        outlier_labels,
        tree_labels: pairs.iter().map(|p| p.2).collect(),
    })
}
