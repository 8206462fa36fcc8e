//! Spanning-tree based outlier rejection.
//!
//! Every edge is scored by the triplet loops it closes: the chordal loop error
//! `δ_ij,k = ‖R̃_ij − R̃_ik R̃_kj‖_F`, the number of loops below the graph-wide
//! median (support) and the mean loop error. A Kruskal spanning tree is grown
//! over the edges in priority order (support descending, mean error ascending,
//! then `(i, j)`), and every non-tree edge that disagrees with the rotation
//! predicted along the tree by more than `sigma` is dropped.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{is_connected, Edge, ViewGraph};
use crate::so3::{chordal_distance, Rotation};
use crate::stats::median;

/// Default non-conformity threshold in chordal units (about 41°).
pub const DEFAULT_SIGMA: f64 = 1.0;

/// Loop errors per edge (`Θ_ij`, indexed like `graph.edges()`) and all of them pooled (`Φ`).
#[derive(Clone, Debug, Default)]
pub struct TripletData {
    pub per_edge: Vec<Vec<f64>>,
    pub phi: Vec<f64>,
}

/// Per-edge support counts and mean loop errors.
#[derive(Clone, Debug)]
pub struct EdgeAttributes {
    pub support: Vec<usize>,
    /// `+∞` for edges that close no triangle.
    pub mean_error: Vec<f64>,
    pub triplet_errors: Vec<Vec<f64>>,
    /// Median of all loop errors.
    pub epsilon: f64,
}

/// How edges are ranked before tree construction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeOrdering {
    /// Support count first, mean error as tie-break.
    #[default]
    SupportThenError,
    /// Mean error only (the "no support count" ablation).
    ErrorOnly,
    /// Plain `(i, j)` order, used when the graph has no triangles.
    Lexicographic,
}

/// Spanning tree rooted at vertex 0.
#[derive(Clone, Debug)]
pub struct SpanningTree {
    pub root: usize,
    /// `(parent, R̃_parent,child)` for every non-root vertex.
    pub parent: Vec<Option<(usize, Rotation)>>,
    /// One flag per edge of the source graph.
    pub tree_edges: Vec<bool>,
    /// Vertices in breadth-first order from the root.
    order: Vec<usize>,
}

impl SpanningTree {
    pub fn num_tree_edges(&self) -> usize {
        self.tree_edges.iter().filter(|&&t| t).count()
    }
}

/// Enumerates triplet loops. Each edge intersects the adjacency of its
/// lower-degree endpoint with the other endpoint's edge set.
pub fn triplet_errors(graph: &ViewGraph) -> TripletData {
    let adj = graph.adjacency();
    let mut per_edge = Vec::with_capacity(graph.num_edges());
    let mut phi = Vec::new();
    for e in graph.edges() {
        let (small, other) = if adj[e.i].len() <= adj[e.j].len() {
            (e.i, e.j)
        } else {
            (e.j, e.i)
        };
        let mut theta = Vec::new();
        for &k in &adj[small] {
            if k == other || !graph.has_edge(k, other) {
                continue;
            }
            let r_ik = graph.relative(e.i, k).expect("edge exists");
            let r_kj = graph.relative(k, e.j).expect("edge exists");
            let delta = chordal_distance(&e.rot, &(r_ik * r_kj));
            theta.push(delta);
            phi.push(delta);
        }
        per_edge.push(theta);
    }
    TripletData { per_edge, phi }
}

/// Support counts against `ε = median(Φ)` (strict `δ < ε`) and mean loop errors.
pub fn edge_attributes(data: &TripletData) -> Result<EdgeAttributes> {
    let epsilon = median(&data.phi).ok_or(Error::EmptyGraph)?;
    let support = data
        .per_edge
        .iter()
        .map(|theta| theta.iter().filter(|&&d| d < epsilon).count())
        .collect();
    let mean_error = data
        .per_edge
        .iter()
        .map(|theta| {
            if theta.is_empty() {
                f64::INFINITY
            } else {
                theta.iter().sum::<f64>() / theta.len() as f64
            }
        })
        .collect();
    Ok(EdgeAttributes {
        support,
        mean_error,
        triplet_errors: data.per_edge.clone(),
        epsilon,
    })
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Edge indices sorted by priority, highest first.
pub fn edge_priority(graph: &ViewGraph, attrs: Option<&EdgeAttributes>, ordering: EdgeOrdering) -> Vec<usize> {
    let edges = graph.edges();
    let mut idx: Vec<usize> = (0..edges.len()).collect();
    let key = |k: usize| (edges[k].i, edges[k].j);
    match (ordering, attrs) {
        (EdgeOrdering::Lexicographic, _) | (_, None) => idx.sort_by_key(|&k| key(k)),
        (EdgeOrdering::SupportThenError, Some(a)) => idx.sort_by(|&x, &y| {
            a.support[y]
                .cmp(&a.support[x])
                .then(a.mean_error[x].total_cmp(&a.mean_error[y]))
                .then(key(x).cmp(&key(y)))
        }),
        (EdgeOrdering::ErrorOnly, Some(a)) => idx.sort_by(|&x, &y| {
            a.mean_error[x]
                .total_cmp(&a.mean_error[y])
                .then(key(x).cmp(&key(y)))
        }),
    }
    idx
}

/// Kruskal's algorithm over the priority-sorted edges.
pub fn build_spanning_tree(
    graph: &ViewGraph,
    attrs: Option<&EdgeAttributes>,
    ordering: EdgeOrdering,
) -> Result<SpanningTree> {
    let n = graph.n();
    if n == 0 || !is_connected(graph) {
        return Err(Error::Disconnected);
    }
    let edges = graph.edges();
    let mut uf: Vec<usize> = (0..n).collect();
    let mut tree_edges = vec![false; edges.len()];
    let mut taken = 0;
    for k in edge_priority(graph, attrs, ordering) {
        if taken + 1 == n {
            break;
        }
        let (a, b) = (find(&mut uf, edges[k].i), find(&mut uf, edges[k].j));
        if a != b {
            uf[a] = b;
            tree_edges[k] = true;
            taken += 1;
        }
    }

    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, e) in edges.iter().enumerate() {
        if tree_edges[k] {
            adj[e.i].push(e.j);
            adj[e.j].push(e.i);
        }
    }
    let root = 0;
    let mut parent = vec![None; n];
    let mut seen = vec![false; n];
    seen[root] = true;
    let mut order = vec![root];
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                parent[w] = Some((v, graph.relative(v, w).expect("tree edge exists")));
                order.push(w);
                queue.push_back(w);
            }
        }
    }
    Ok(SpanningTree {
        root,
        parent,
        tree_edges,
        order,
    })
}

/// Absolute orientations induced by the tree: `R_root = I` and
/// `R_child = R̃_parent,childᵀ · R_parent`, so `R_i R_jᵀ` composes the measured
/// rotations along the tree path from i to j.
pub fn tree_orientations(tree: &SpanningTree) -> Vec<Rotation> {
    let mut out = vec![Rotation::identity(); tree.parent.len()];
    for &v in &tree.order {
        if let Some((p, r)) = tree.parent[v] {
            out[v] = r.transpose() * out[p];
        }
    }
    out
}

/// Drops every non-tree edge whose measurement is farther than `sigma`
/// (chordal) from the tree prediction `R_i^tree · R_j^treeᵀ`.
pub fn filter_edges(graph: &ViewGraph, tree: &SpanningTree, sigma: f64) -> (ViewGraph, Vec<Edge>) {
    let orient = tree_orientations(tree);
    let mut removed = Vec::new();
    let kept = graph.retain_edges(|k, e| {
        if tree.tree_edges[k] {
            return true;
        }
        let predicted = orient[e.i] * orient[e.j].transpose();
        let keep = chordal_distance(&e.rot, &predicted) <= sigma;
        if !keep {
            removed.push(*e);
        }
        keep
    });
    (kept, removed)
}

/// Settings for [`run_edge_filter`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub sigma: f64,
    pub ordering: EdgeOrdering,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            sigma: DEFAULT_SIGMA,
            ordering: EdgeOrdering::SupportThenError,
        }
    }
}

/// Counts reported alongside a filtering run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterStats {
    pub input_edges: usize,
    pub kept_edges: usize,
    pub removed_edges: usize,
    pub triplets: usize,
    /// Median loop error; `None` when the graph has no triangles.
    pub epsilon: Option<f64>,
    pub sigma: f64,
    pub ordering: EdgeOrdering,
    /// True when no triangles existed and the graph passed through unchanged.
    pub skipped: bool,
    pub removed: Vec<(usize, usize)>,
}

#[derive(Clone, Debug)]
pub struct FilterOutcome {
    pub graph: ViewGraph,
    pub removed: Vec<Edge>,
    pub tree: SpanningTree,
    pub stats: FilterStats,
}

/// Full filtering pass. Graphs without any triangle are returned unchanged.
pub fn run_edge_filter(graph: &ViewGraph, config: &FilterConfig) -> Result<FilterOutcome> {
    if !(config.sigma > 0.0) {
        return Err(Error::InvalidParam(format!("sigma must be positive, got {}", config.sigma)));
    }
    let data = triplet_errors(graph);
    let (graph_out, removed, tree, epsilon, skipped) = match edge_attributes(&data) {
        Ok(attrs) => {
            let tree = build_spanning_tree(graph, Some(&attrs), config.ordering)?;
            let (kept, removed) = filter_edges(graph, &tree, config.sigma);
            (kept, removed, tree, Some(attrs.epsilon), false)
        }
        Err(Error::EmptyGraph) => {
            let tree = build_spanning_tree(graph, None, EdgeOrdering::Lexicographic)?;
            (graph.clone(), Vec::new(), tree, None, true)
        }
        Err(e) => return Err(e),
    };
    let stats = FilterStats {
        input_edges: graph.num_edges(),
        kept_edges: graph_out.num_edges(),
        removed_edges: removed.len(),
        triplets: data.phi.len() / 3,
        epsilon,
        sigma: config.sigma,
        ordering: config.ordering,
        skipped,
        removed: removed.iter().map(|e| (e.i, e.j)).collect(),
    };
    Ok(FilterOutcome {
        graph: graph_out,
        removed,
        tree,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GroundTruth;
    use crate::so3::{chordal_from_angle, exp_map, random_rotation, rot_x, rot_z, AxisAngle};
    use crate::synth::{synthesize, SynthParams};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn consistent_graph(n: usize, pairs: &[(usize, usize)], seed: u64) -> (ViewGraph, GroundTruth) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gt = GroundTruth::new((0..n).map(|_| random_rotation(&mut rng)).collect());
        let g = ViewGraph::from_edges(n, pairs.iter().map(|&(i, j)| (i, j, gt.relative(i, j)))).unwrap();
        (g, gt)
    }

    #[test]
    fn consistent_triangle_has_zero_loop_errors() {
        let (g, _) = consistent_graph(3, &[(0, 1), (1, 2), (0, 2)], 1);
        let data = triplet_errors(&g);
        assert_eq!(data.phi.len(), 3);
        for theta in &data.per_edge {
            assert_eq!(theta.len(), 1);
            assert!(theta[0] < 1e-14);
        }
    }

    #[test]
    fn perturbed_edge_loop_error() {
        let (g, gt) = consistent_graph(3, &[(0, 1), (1, 2)], 2);
        let theta = 0.6;
        let bad = gt.relative(0, 2) * exp_map(&AxisAngle::new(0.0, 0.0, theta));
        let mut g2 = g.clone();
        g2.add_edge(0, 2, bad).unwrap();
        let data = triplet_errors(&g2);
        let k = g2.edge_index(0, 2).unwrap();
        assert_abs_diff_eq!(data.per_edge[k][0], chordal_from_angle(theta), epsilon = 1e-12);
    }

    #[test]
    fn edge_in_no_triangle() {
        let (g, _) = consistent_graph(4, &[(0, 1), (1, 2), (0, 2), (2, 3)], 3);
        let data = triplet_errors(&g);
        assert!(data.per_edge[g.edge_index(2, 3).unwrap()].is_empty());
        let attrs = edge_attributes(&data).unwrap();
        assert_eq!(attrs.support[g.edge_index(2, 3).unwrap()], 0);
        assert!(attrs.mean_error[g.edge_index(2, 3).unwrap()].is_infinite());
    }

    #[test]
    fn attributes_from_hand_values() {
        let data = TripletData {
            per_edge: vec![vec![0.1, 0.5], vec![0.3, 0.9]],
            phi: vec![0.1, 0.5, 0.3, 0.9],
        };
        let a = edge_attributes(&data).unwrap();
        assert_abs_diff_eq!(a.epsilon, 0.4, epsilon = 1e-15);
        assert_eq!(a.support, vec![1, 1]);
        assert_abs_diff_eq!(a.mean_error[0], 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(a.mean_error[1], 0.6, epsilon = 1e-15);
    }

    #[test]
    fn all_zero_errors_give_zero_support() {
        let data = TripletData {
            per_edge: vec![vec![0.0], vec![0.0], vec![0.0]],
            phi: vec![0.0; 3],
        };
        let a = edge_attributes(&data).unwrap();
        assert_eq!(a.support, vec![0, 0, 0]);
        assert!(edge_attributes(&TripletData::default()).is_err());
    }

    #[test]
    fn tree_of_a_tree_is_itself() {
        let (g, _) = consistent_graph(5, &[(0, 1), (1, 2), (1, 3), (3, 4)], 4);
        let t = build_spanning_tree(&g, None, EdgeOrdering::Lexicographic).unwrap();
        assert!(t.tree_edges.iter().all(|&x| x));
    }

    #[test]
    fn tree_prefers_supported_then_low_error_edges() {
        let (g, _) = consistent_graph(3, &[(0, 1), (1, 2), (0, 2)], 5);
        let k02 = g.edge_index(0, 2).unwrap();
        let mut attrs = EdgeAttributes {
            support: vec![1, 1, 1],
            mean_error: vec![0.0; 3],
            triplet_errors: vec![vec![]; 3],
            epsilon: 0.0,
        };
        attrs.support[k02] = 0;
        let t = build_spanning_tree(&g, Some(&attrs), EdgeOrdering::SupportThenError).unwrap();
        assert!(!t.tree_edges[k02]);

        attrs.support = vec![2, 2, 2];
        attrs.mean_error = vec![0.1, 0.2, 0.3];
        let t = build_spanning_tree(&g, Some(&attrs), EdgeOrdering::SupportThenError).unwrap();
        assert_eq!(t.tree_edges, vec![true, true, false]);
    }

    #[test]
    fn disconnected_graph_has_no_tree() {
        let (g, _) = consistent_graph(4, &[(0, 1), (2, 3)], 6);
        assert!(matches!(
            build_spanning_tree(&g, None, EdgeOrdering::Lexicographic),
            Err(Error::Disconnected)
        ));
    }

    #[test]
    fn chain_orientations() {
        let g = ViewGraph::from_edges(3, [(0, 1, Rotation::identity()), (1, 2, Rotation::identity())]).unwrap();
        let t = build_spanning_tree(&g, None, EdgeOrdering::Lexicographic).unwrap();
        for r in tree_orientations(&t) {
            assert_eq!(r, Rotation::identity());
        }

        let q = rot_z(PI / 2.0);
        let g = ViewGraph::from_edges(3, [(0, 1, q), (1, 2, q)]).unwrap();
        let t = build_spanning_tree(&g, None, EdgeOrdering::Lexicographic).unwrap();
        let o = tree_orientations(&t);
        let r02 = o[0] * o[2].transpose();
        assert!(chordal_distance(&r02, &rot_z(PI)) < 1e-12);
    }

    #[test]
    fn tree_reproduces_its_own_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut g = ViewGraph::new(8);
        for (i, j) in [(0, 3), (3, 1), (1, 7), (3, 5), (5, 2), (2, 6), (6, 4)] {
            g.add_edge(i, j, random_rotation(&mut rng)).unwrap();
        }
        let t = build_spanning_tree(&g, None, EdgeOrdering::Lexicographic).unwrap();
        let o = tree_orientations(&t);
        for e in g.edges() {
            assert!(chordal_distance(&(o[e.i] * o[e.j].transpose()), &e.rot) < 1e-12);
        }
    }

    #[test]
    fn filter_examples() {
        let pairs: Vec<(usize, usize)> = (0..6).flat_map(|i| ((i + 1)..6).map(move |j| (i, j))).collect();
        let (g, gt) = consistent_graph(6, &pairs, 8);
        let out = run_edge_filter(&g, &FilterConfig::default()).unwrap();
        assert!(out.removed.is_empty());
        let out = run_edge_filter(&g, &FilterConfig { sigma: f64::INFINITY, ..Default::default() }).unwrap();
        assert!(out.removed.is_empty());

        // plant a half-turn outlier on (2, 4)
        let bad = gt.relative(2, 4) * rot_x(PI);
        let g2 = ViewGraph::from_edges(
            6,
            g.edges().iter().map(|e| (e.i, e.j, if (e.i, e.j) == (2, 4) { bad } else { e.rot })),
        )
        .unwrap();
        let out = run_edge_filter(&g2, &FilterConfig::default()).unwrap();
        assert_eq!(out.stats.removed, vec![(2, 4)]);
        assert_eq!(out.graph.num_edges(), g2.num_edges() - 1);
    }

    #[test]
    fn triangle_free_graph_passes_through() {
        let (g, _) = consistent_graph(4, &[(0, 1), (1, 2), (2, 3), (0, 3)], 9);
        let out = run_edge_filter(&g, &FilterConfig::default()).unwrap();
        assert!(out.stats.skipped);
        assert_eq!(out.graph, g);
    }

    #[test]
    fn filter_is_monotone_in_sigma_and_keeps_connectivity() {
        let p = SynthParams {
            n: 30,
            density: 0.4,
            noise_sigma_deg: 5.0,
            outlier_ratio: 0.3,
        };
        let s = synthesize(&p, &mut ChaCha8Rng::seed_from_u64(10)).unwrap();
        let attrs = edge_attributes(&triplet_errors(&s.graph)).unwrap();
        let tree = build_spanning_tree(&s.graph, Some(&attrs), EdgeOrdering::SupportThenError).unwrap();
        let mut prev: Option<Vec<(usize, usize)>> = None;
        for sigma in [0.1, 0.3, 0.6, 1.0, 1.5, 2.5] {
            let (kept, removed) = filter_edges(&s.graph, &tree, sigma);
            assert!(is_connected(&kept));
            let removed: Vec<_> = removed.iter().map(|e| (e.i, e.j)).collect();
            if let Some(p) = &prev {
                assert!(removed.iter().all(|r| p.contains(r)));
            }
            prev = Some(removed);
        }
    }
}
