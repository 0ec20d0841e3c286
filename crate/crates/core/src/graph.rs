//! Three-colorable graphs, witness colorings and the six color permutations.
//!
//! Generation follows the No-Choice construction with a connectivity gate:
//! color every vertex uniformly at random, join each bichromatic pair with
//! probability `p`, and restart from scratch until the result is connected.

use std::collections::VecDeque;
use std::fmt;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Graph file format version written by [`ColoredGraph::to_json`].
pub const GRAPH_FILE_VERSION: u32 = 1;

/// Connectivity restarts allowed before [`GraphError::GenerationFailed`].
pub const DEFAULT_RESTART_BUDGET: usize = 10_000;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no connected graph after {attempts} attempts")]
    GenerationFailed { attempts: usize },
    #[error("invalid coloring: {0}")]
    InvalidColoring(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("graph file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("graph file: {0}")]
    Io(#[from] std::io::Error),
}

/// One of the three colors, `0`, `1` or `2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Color(u8);

impl Color {
    pub const ALL: [Color; 3] = [Color(0), Color(1), Color(2)];

    pub fn new(value: u8) -> Option<Color> {
        (value < 3).then_some(Color(value))
    }

    pub fn value(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for Color {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Color::new(value).ok_or_else(|| format!("color {value} outside {{0,1,2}}"))
    }
}

impl From<Color> for u8 {
    fn from(c: Color) -> u8 {
        c.0
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A bijection on `{0, 1, 2}`, stored as its image table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ColorPermutation([u8; 3]);

impl ColorPermutation {
    pub const IDENTITY: ColorPermutation = ColorPermutation([0, 1, 2]);

    /// The full set, in lexicographic order of image tables.
    pub const ALL: [ColorPermutation; 6] = [
        ColorPermutation([0, 1, 2]),
        ColorPermutation([0, 2, 1]),
        ColorPermutation([1, 0, 2]),
        ColorPermutation([1, 2, 0]),
        ColorPermutation([2, 0, 1]),
        ColorPermutation([2, 1, 0]),
    ];

    pub fn from_images(images: [u8; 3]) -> Option<Self> {
        let mut seen = [false; 3];
        for &i in &images {
            if i > 2 || seen[i as usize] {
                return None;
            }
            seen[i as usize] = true;
        }
        Some(ColorPermutation(images))
    }

    pub fn apply(&self, c: Color) -> Color {
        Color(self.0[c.0 as usize])
    }

    pub fn index(&self) -> usize {
        Self::ALL.iter().position(|p| p == self).expect("permutation is valid")
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        *Self::ALL.choose(rng).expect("non-empty")
    }
}

/// A vertex coloring, one color per vertex.
pub type Coloring = Vec<Color>;

/// Relabel every vertex through `pi`.
pub fn apply_permutation(coloring: &[Color], pi: ColorPermutation) -> Coloring {
    coloring.iter().map(|&c| pi.apply(c)).collect()
}

/// An undirected edge with `0 <= u < v`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[u32; 2]", into = "[u32; 2]")]
pub struct Edge {
    u: u32,
    v: u32,
}

impl Edge {
    /// Normalizes endpoint order. Panics on a self-loop.
    pub fn new(a: u32, b: u32) -> Edge {
        assert_ne!(a, b, "self-loop {a}-{a}");
        Edge {
            u: a.min(b),
            v: a.max(b),
        }
    }

    pub fn endpoints(&self) -> (u32, u32) {
        (self.u, self.v)
    }
}

impl From<[u32; 2]> for Edge {
    fn from([a, b]: [u32; 2]) -> Edge {
        // self-loops are caught by Graph::new; keep the raw pair here
        Edge {
            u: a.min(b),
            v: a.max(b),
        }
    }
}

impl From<Edge> for [u32; 2] {
    fn from(e: Edge) -> [u32; 2] {
        [e.u, e.v]
    }
}

/// The public graph: what verifiers and the simulator see.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    num_vertices: usize,
    edges: Vec<Edge>,
}

impl Graph {
    /// Deduplicates and sorts `edges`; rejects self-loops and out-of-range endpoints.
    pub fn new(num_vertices: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self, GraphError> {
        let mut edges: Vec<Edge> = edges.into_iter().collect();
        for e in &edges {
            if e.u == e.v {
                return Err(GraphError::InvalidGraph(format!("self-loop at vertex {}", e.u)));
            }
            if e.v as usize >= num_vertices {
                return Err(GraphError::InvalidGraph(format!(
                    "edge {}-{} out of range for {num_vertices} vertices",
                    e.u, e.v
                )));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        Ok(Graph { num_vertices, edges })
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn contains_edge(&self, e: Edge) -> bool {
        self.edges.binary_search(&e).is_ok()
    }

    fn adjacency(&self) -> Vec<Vec<u32>> {
        let mut adj = vec![Vec::new(); self.num_vertices];
        for e in &self.edges {
            adj[e.u as usize].push(e.v);
            adj[e.v as usize].push(e.u);
        }
        adj
    }

    /// BFS from vertex 0 reaches every vertex. The empty graph counts as connected.
    pub fn is_connected(&self) -> bool {
        if self.num_vertices == 0 {
            return true;
        }
        let adj = self.adjacency();
        let mut seen = vec![false; self.num_vertices];
        let mut queue = VecDeque::from([0u32]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(u) = queue.pop_front() {
            for &w in &adj[u as usize] {
                if !seen[w as usize] {
                    seen[w as usize] = true;
                    reached += 1;
                    queue.push_back(w);
                }
            }
        }
        reached == self.num_vertices
    }

    /// True iff no edge is monochromatic under `coloring`.
    pub fn is_proper(&self, coloring: &[Color]) -> Result<bool, GraphError> {
        if coloring.len() != self.num_vertices {
            return Err(GraphError::InvalidColoring(format!(
                "{} colors for {} vertices",
                coloring.len(),
                self.num_vertices
            )));
        }
        Ok(self.monochromatic_edges(coloring).next().is_none())
    }

    /// Edges whose endpoints share a color. `coloring` must cover every vertex.
    pub fn monochromatic_edges<'a>(&'a self, coloring: &'a [Color]) -> impl Iterator<Item = Edge> + 'a {
        self.edges
            .iter()
            .copied()
            .filter(move |e| coloring[e.u as usize] == coloring[e.v as usize])
    }
}

/// A graph plus, on the prover side, a proper 3-coloring.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColoredGraph {
    graph: Graph,
    witness: Option<Coloring>,
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    version: u32,
    num_vertices: usize,
    edges: Vec<Edge>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    witness: Option<Vec<Color>>,
}

impl ColoredGraph {
    /// Attach a witness. It must be a proper coloring of `graph`.
    pub fn with_witness(graph: Graph, witness: Coloring) -> Result<Self, GraphError> {
        if !graph.is_proper(&witness)? {
            return Err(GraphError::InvalidColoring("witness has a monochromatic edge".into()));
        }
        Ok(ColoredGraph {
            graph,
            witness: Some(witness),
        })
    }

    pub fn public(graph: Graph) -> Self {
        ColoredGraph { graph, witness: None }
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn witness(&self) -> Option<&[Color]> {
        self.witness.as_deref()
    }

    /// Drop the witness, keeping the public graph.
    pub fn strip_witness(&self) -> ColoredGraph {
        ColoredGraph::public(self.graph.clone())
    }

    pub fn to_json(&self) -> String {
        let file = GraphFile {
            version: GRAPH_FILE_VERSION,
            num_vertices: self.graph.num_vertices,
            edges: self.graph.edges.clone(),
            witness: self.witness.clone(),
        };
        serde_json::to_string(&file).expect("graph serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, GraphError> {
        let file: GraphFile = serde_json::from_str(s)?;
        if file.version != GRAPH_FILE_VERSION {
            return Err(GraphError::InvalidGraph(format!("unsupported version {}", file.version)));
        }
        let graph = Graph::new(file.num_vertices, file.edges)?;
        match file.witness {
            Some(w) => ColoredGraph::with_witness(graph, w),
            None => Ok(ColoredGraph::public(graph)),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GraphError> {
        ColoredGraph::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), GraphError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

/// `E[|E|] = p * (2/3) * C(n, 2)` for the generator.
pub fn expected_edges(num_vertices: usize, edge_prob: f64) -> f64 {
    let n = num_vertices as f64;
    edge_prob * (2.0 / 3.0) * n * (n - 1.0) / 2.0
}

/// The edge probability whose expected edge count is `target_edges`.
pub fn edge_prob_for_target(num_vertices: usize, target_edges: usize) -> f64 {
    target_edges as f64 / expected_edges(num_vertices, 1.0)
}

/// Generate a connected 3-colorable graph with its witness.
pub fn generate<R: Rng + ?Sized>(num_vertices: usize, edge_prob: f64, rng: &mut R) -> Result<ColoredGraph, GraphError> {
    generate_with_budget(num_vertices, edge_prob, DEFAULT_RESTART_BUDGET, rng)
}

pub fn generate_with_budget<R: Rng + ?Sized>(
    num_vertices: usize,
    edge_prob: f64,
    restart_budget: usize,
    rng: &mut R,
) -> Result<ColoredGraph, GraphError> {
    if !(edge_prob > 0.0 && edge_prob < 1.0) {
        return Err(GraphError::InvalidParameter(format!("edge probability {edge_prob} not in (0, 1)")));
    }
    if num_vertices < 3 {
        return Err(GraphError::InvalidParameter(format!("need at least 3 vertices, got {num_vertices}")));
    }
    if num_vertices > u32::MAX as usize {
        return Err(GraphError::InvalidParameter("too many vertices".into()));
    }
    for _ in 0..restart_budget {
        let coloring: Coloring = (0..num_vertices)
            .map(|_| Color(rng.random_range(0..3u8)))
            .collect();
        let mut edges = Vec::new();
        for u in 0..num_vertices {
            for v in (u + 1)..num_vertices {
                if coloring[u] != coloring[v] && rng.random_bool(edge_prob) {
                    edges.push(Edge::new(u as u32, v as u32));
                }
            }
        }
        let graph = Graph::new(num_vertices, edges)?;
        if graph.is_connected() {
            return ColoredGraph::with_witness(graph, coloring);
        }
    }
    Err(GraphError::GenerationFailed {
        attempts: restart_budget,
    })
}

/// Repeat [`generate`] until the edge count is exactly `num_edges`, using the
/// calibrated edge probability. Gives up after `max_draws` graphs.
pub fn generate_with_edge_count<R: Rng + ?Sized>(
    num_vertices: usize,
    num_edges: usize,
    max_draws: usize,
    rng: &mut R,
) -> Result<ColoredGraph, GraphError> {
    let p = edge_prob_for_target(num_vertices, num_edges);
    for _ in 0..max_draws {
        let g = generate(num_vertices, p, rng)?;
        if g.graph().num_edges() == num_edges {
            return Ok(g);
        }
    }
    Err(GraphError::GenerationFailed { attempts: max_draws })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn triangle_pair() -> Graph {
        let e = |a, b| Edge::new(a, b);
        Graph::new(6, [e(0, 1), e(1, 2), e(0, 2), e(3, 4), e(4, 5), e(3, 5)]).unwrap()
    }

    fn path(n: u32) -> Graph {
        Graph::new(n as usize, (0..n - 1).map(|i| Edge::new(i, i + 1))).unwrap()
    }

    fn colors(v: &[u8]) -> Coloring {
        v.iter().map(|&c| Color::new(c).unwrap()).collect()
    }

    #[test]
    fn connectivity() {
        assert!(!triangle_pair().is_connected());
        assert!(path(10).is_connected());
        assert!(!Graph::new(2, []).unwrap().is_connected());
    }

    #[test]
    fn properness() {
        let g = path(4);
        assert!(g.is_proper(&colors(&[0, 1, 0, 1])).unwrap());
        assert!(!g.is_proper(&colors(&[0, 0, 0, 0])).unwrap());
        assert!(matches!(g.is_proper(&colors(&[0, 1])), Err(GraphError::InvalidColoring(_))));
    }

    /// Ten vertices, hand colored; 1-6 and 8-10 (1-indexed) are adjacent.
    #[test]
    fn ten_vertex_hand_colored_graph() {
        let edges = [
            (0, 1), (0, 5), (1, 2), (1, 6), (2, 3), (2, 7), (3, 4), (3, 8),
            (4, 8), (5, 7), (5, 8), (6, 7), (6, 9), (7, 9), (0, 4), (7, 8),
        ];
        let g = Graph::new(10, edges.iter().map(|&(a, b)| Edge::new(a, b))).unwrap();
        // blue = 0, pink = 1, green = 2
        let y = colors(&[0, 1, 0, 1, 2, 2, 0, 1, 0, 2]);
        assert!(g.is_proper(&y).unwrap(), "{:?}", g.monochromatic_edges(&y).collect::<Vec<_>>());
        assert!(g.is_connected());
    }

    #[test]
    fn graph_rejects_bad_edges() {
        assert!(Graph::new(3, [Edge::from([1, 1])]).is_err());
        assert!(Graph::new(3, [Edge::new(0, 3)]).is_err());
        let g = Graph::new(3, [Edge::new(0, 1), Edge::new(1, 0)]).unwrap();
        assert_eq!(g.num_edges(), 1);
    }

    #[test]
    fn permutations() {
        assert_eq!(ColorPermutation::ALL.len(), 6);
        for (i, p) in ColorPermutation::ALL.iter().enumerate() {
            assert_eq!(p.index(), i);
            assert!(ColorPermutation::from_images(p.0).is_some());
        }
        assert!(ColorPermutation::from_images([0, 0, 1]).is_none());
        let y = colors(&[0, 1, 2, 0]);
        assert_eq!(apply_permutation(&y, ColorPermutation::IDENTITY), y);
    }

    #[test]
    fn all_permutations_give_distinct_proper_colorings() {
        let mut rng = SeededRng::from_seed(5);
        let g = generate(30, 0.3, &mut rng).unwrap();
        let w = g.witness().unwrap();
        assert!(Color::ALL.iter().all(|c| w.contains(c)));
        let images: std::collections::HashSet<Coloring> = ColorPermutation::ALL
            .iter()
            .map(|&p| apply_permutation(w, p))
            .collect();
        assert_eq!(images.len(), 6);
        for y in &images {
            assert!(g.graph().is_proper(y).unwrap());
        }
    }

    #[test]
    fn generate_rejects_bad_parameters() {
        let mut rng = SeededRng::from_seed(1);
        for p in [0.0, 1.0, -0.2, 1.5, f64::NAN] {
            assert!(matches!(generate(10, p, &mut rng), Err(GraphError::InvalidParameter(_))));
        }
        assert!(matches!(generate(2, 0.5, &mut rng), Err(GraphError::InvalidParameter(_))));
    }

    #[test]
    fn restart_budget_is_reported() {
        let mut rng = SeededRng::from_seed(1);
        let err = generate_with_budget(200, 1e-6, 5, &mut rng).unwrap_err();
        assert!(matches!(err, GraphError::GenerationFailed { attempts: 5 }));
    }

    #[test]
    fn json_round_trip_and_public_form() {
        let mut rng = SeededRng::from_seed(9);
        let g = generate(20, 0.4, &mut rng).unwrap();
        let back = ColoredGraph::from_json(&g.to_json()).unwrap();
        assert_eq!(back, g);
        let public = g.strip_witness().to_json();
        assert!(!public.contains("witness"));
        let back = ColoredGraph::from_json(&public).unwrap();
        assert!(back.witness().is_none());
        assert_eq!(back.graph(), g.graph());
    }

    #[test]
    fn json_rejects_improper_witness() {
        let s = r#"{"version":1,"num_vertices":3,"edges":[[0,1]],"witness":[1,1,0]}"#;
        assert!(matches!(ColoredGraph::from_json(s), Err(GraphError::InvalidColoring(_))));
        let s = r#"{"version":1,"num_vertices":3,"edges":[[0,1]],"witness":[1,3,0]}"#;
        assert!(ColoredGraph::from_json(s).is_err());
        let s = r#"{"version":2,"num_vertices":3,"edges":[]}"#;
        assert!(ColoredGraph::from_json(s).is_err());
    }

    #[test]
    fn edge_prob_calibration() {
        let p = edge_prob_for_target(100, 1114);
        assert!((p - 0.33758).abs() < 1e-4, "{p}");
        assert!((expected_edges(100, p) - 1114.0).abs() < 1e-9);
    }
}
