//! View-graph data model and the block observation matrix built from it.

use std::collections::{HashMap, VecDeque};

use nalgebra::{DMatrix, Matrix3};

use crate::error::{Error, Result};
use crate::so3::Rotation;

/// Undirected edge carrying the measured relative rotation `R̃_ij` with `i < j`.
/// The reverse direction is implied: `R̃_ji = R̃_ijᵀ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub rot: Rotation,
}

/// Vertices `0..n` plus undirected edges with relative rotation measurements.
#[derive(Clone, Debug, Default)]
pub struct ViewGraph {
    n: usize,
    edges: Vec<Edge>,
    index: HashMap<(usize, usize), usize>,
}

impl PartialEq for ViewGraph {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.edges == other.edges
    }
}

impl ViewGraph {
    pub fn new(n: usize) -> Self {
        ViewGraph {
            n,
            edges: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// Builds a graph from `(i, j, R̃_ij)` triples. Pairs given with `i > j` are
    /// flipped and their rotation transposed.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, Rotation)>) -> Result<Self> {
        let mut g = ViewGraph::new(n);
        for (i, j, rot) in edges {
            g.add_edge(i, j, rot)?;
        }
        Ok(g)
    }

    /// Adds the measurement `R̃_ij`. Self-loops, out-of-range ids and repeated
    /// pairs are rejected.
    pub fn add_edge(&mut self, i: usize, j: usize, rot: Rotation) -> Result<()> {
        for id in [i, j] {
            if id >= self.n {
                return Err(Error::BadVertexId { id, n: self.n });
            }
        }
        if i == j {
            return Err(Error::InvalidParam(format!("self-loop on vertex {i}")));
        }
        let (a, b, rot) = if i < j { (i, j, rot) } else { (j, i, rot.transpose()) };
        if self.index.contains_key(&(a, b)) {
            return Err(Error::DuplicateEdge(a, b));
        }
        self.index.insert((a, b), self.edges.len());
        self.edges.push(Edge { i: a, j: b, rot });
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Position of the undirected pair `{i, j}` in [`edges`](Self::edges).
    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        let key = if i < j { (i, j) } else { (j, i) };
        self.index.get(&key).copied()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edge_index(i, j).is_some()
    }

    /// Directed measurement `R̃_ij`, transposing the stored edge when `i > j`.
    pub fn relative(&self, i: usize, j: usize) -> Option<Rotation> {
        let e = &self.edges[self.edge_index(i, j)?];
        Some(if e.i == i { e.rot } else { e.rot.transpose() })
    }

    /// Sorted neighbour lists.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for e in &self.edges {
            adj[e.i].push(e.j);
            adj[e.j].push(e.i);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Copy of the graph keeping only the edges whose index passes `keep`.
    pub fn retain_edges(&self, mut keep: impl FnMut(usize, &Edge) -> bool) -> ViewGraph {
        let mut g = ViewGraph::new(self.n);
        for (k, e) in self.edges.iter().enumerate() {
            if keep(k, e) {
                g.add_edge(e.i, e.j, e.rot).expect("edges of a valid graph stay valid");
            }
        }
        g
    }

    /// Subgraph induced by `vertices`, relabelled `0..vertices.len()` in the given order.
    pub fn induced_subgraph(&self, vertices: &[usize]) -> ViewGraph {
        let mut remap = vec![usize::MAX; self.n];
        for (new, &old) in vertices.iter().enumerate() {
            remap[old] = new;
        }
        let mut g = ViewGraph::new(vertices.len());
        for e in &self.edges {
            let (a, b) = (remap[e.i], remap[e.j]);
            if a != usize::MAX && b != usize::MAX {
                g.add_edge(a, b, e.rot).expect("relabelled edges are unique");
            }
        }
        g
    }

    /// Connected components, each sorted, ordered by smallest vertex.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let adj = self.adjacency();
        let mut seen = vec![false; self.n];
        let mut out = Vec::new();
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = vec![start];
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for &w in &adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        comp.push(w);
                        queue.push_back(w);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }
}

/// True iff a single connected component covers every vertex.
pub fn is_connected(graph: &ViewGraph) -> bool {
    if graph.n() <= 1 {
        return true;
    }
    let adj = graph.adjacency();
    let mut seen = vec![false; graph.n()];
    seen[0] = true;
    let mut count = 1;
    let mut queue = VecDeque::from([0usize]);
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                queue.push_back(w);
            }
        }
    }
    count == graph.n()
}

/// Ground-truth absolute orientations `R_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub orientations: Vec<Rotation>,
}

impl GroundTruth {
    pub fn new(orientations: Vec<Rotation>) -> Self {
        GroundTruth { orientations }
    }

    pub fn len(&self) -> usize {
        self.orientations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orientations.is_empty()
    }

    /// `R_i · R_jᵀ`, the noise-free relative rotation.
    pub fn relative(&self, i: usize, j: usize) -> Rotation {
        self.orientations[i] * self.orientations[j].transpose()
    }

    /// Stacks the orientations into the 3n×3 matrix `X`.
    pub fn stacked(&self) -> DMatrix<f64> {
        stack_rotations(&self.orientations)
    }
}

/// Stacks rotations vertically into a 3n×3 matrix.
pub fn stack_rotations(rots: &[Rotation]) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(3 * rots.len(), 3);
    for (i, r) in rots.iter().enumerate() {
        x.fixed_view_mut::<3, 3>(3 * i, 0).copy_from(r.matrix());
    }
    x
}

/// A stacked estimate `X·Q` is only known up to a 3×3 orthogonal `Q`, and when
/// `det Q = -1` every block is a reflection. Negates the last column in that
/// case, judged by the sign of the summed block determinants.
pub fn fix_handedness(x: &mut DMatrix<f64>) {
    let total: f64 = (0..x.nrows() / 3)
        .map(|i| x.fixed_view::<3, 3>(3 * i, 0).determinant())
        .sum();
    if total < 0.0 {
        x.column_mut(2).neg_mut();
    }
}

/// Block observation matrix `G̃` with its block mask and per-block weights.
#[derive(Clone, Debug)]
pub struct ObservationMatrix {
    n: usize,
    g: DMatrix<f64>,
    mask: DMatrix<bool>,
    weights: DMatrix<f64>,
    pairs: Vec<(usize, usize)>,
}

impl ObservationMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    /// The full 3n×3n matrix `G̃`; unobserved blocks are zero.
    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    /// n×n block mask `Ω`.
    pub fn mask(&self) -> &DMatrix<bool> {
        &self.mask
    }

    /// n×n block weights `w`.
    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    /// Observed off-diagonal block pairs `(i, j)` with `i < j`, in edge order.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn block(&self, i: usize, j: usize) -> Matrix3<f64> {
        self.g.fixed_view::<3, 3>(3 * i, 3 * j).into_owned()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    /// Sets `w_ij = w_ji = w`. Diagonal weights stay at 1.
    pub fn set_weight(&mut self, i: usize, j: usize, w: f64) {
        if i != j {
            self.weights[(i, j)] = w;
            self.weights[(j, i)] = w;
        }
    }

    /// Resets every weight to 1.
    pub fn reset_weights(&mut self) {
        self.weights.fill(1.0);
    }

    /// Mutable access to `G̃` for tests that probe mask semantics.
    #[doc(hidden)]
    pub fn g_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.g
    }
}

/// Assembles `G̃`: identity diagonal blocks, `R̃_ij` at (i, j), `R̃_ijᵀ` at (j, i),
/// zeros elsewhere, all weights 1.
pub fn build_observation_matrix(graph: &ViewGraph) -> ObservationMatrix {
    let n = graph.n();
    let mut g = DMatrix::zeros(3 * n, 3 * n);
    let mut mask = DMatrix::from_element(n, n, false);
    for i in 0..n {
        g.fixed_view_mut::<3, 3>(3 * i, 3 * i).copy_from(&Matrix3::identity());
        mask[(i, i)] = true;
    }
    let mut pairs = Vec::with_capacity(graph.num_edges());
    for e in graph.edges() {
        g.fixed_view_mut::<3, 3>(3 * e.i, 3 * e.j).copy_from(e.rot.matrix());
        g.fixed_view_mut::<3, 3>(3 * e.j, 3 * e.i)
            .copy_from(&e.rot.matrix().transpose());
        mask[(e.i, e.j)] = true;
        mask[(e.j, e.i)] = true;
        pairs.push((e.i, e.j));
    }
    ObservationMatrix {
        n,
        g,
        mask,
        weights: DMatrix::from_element(n, n, 1.0),
        pairs,
    }
}
