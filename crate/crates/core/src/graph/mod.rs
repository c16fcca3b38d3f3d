//! Labeled graphs, datasets and dataset-level statistics.

mod tudataset;

pub use tudataset::{parse_tudataset, parse_tudataset_with, write_tudataset, ParseOptions};

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};

/// Dense row-major node feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    dim: usize,
    values: Vec<f32>,
}

impl Features {
    pub fn new(node_count: usize, dim: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != node_count * dim {
            return Err(Error::Shape(format!(
                "feature matrix has {} values, expected {node_count} x {dim}",
                values.len()
            )));
        }
        Ok(Features { dim, values })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, node: usize) -> &[f32] {
        &self.values[node * self.dim..(node + 1) * self.dim]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }
}

/// Undirected simple graph with integer node labels.
///
/// Edges are stored once as `(u, v)` with `u < v`; self-loops are rejected because
/// the self contribution is added by the model's aggregation, never by the graph.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledGraph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    node_labels: Vec<usize>,
    features: Option<Features>,
}

impl LabeledGraph {
    /// Builds a graph from an edge list. Both orientations of an edge collapse to one.
    pub fn new(
        node_count: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        node_labels: Vec<usize>,
    ) -> Result<Self> {
        if node_labels.len() != node_count {
            return Err(Error::Graph(format!(
                "{} labels for {node_count} nodes",
                node_labels.len()
            )));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= node_count || b >= node_count {
                return Err(Error::Graph(format!(
                    "edge ({a}, {b}) has an endpoint >= {node_count}"
                )));
            }
            if a == b {
                return Err(Error::Graph(format!("self-loop on node {a}")));
            }
            set.insert((a.min(b), a.max(b)));
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut adjacency = vec![Vec::new(); node_count];
        for &(u, v) in &edges {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(LabeledGraph {
            node_count,
            edges,
            adjacency,
            node_labels,
            features: None,
        })
    }

    pub fn with_features(mut self, features: Features) -> Result<Self> {
        if features.values.len() != self.node_count * features.dim {
            return Err(Error::Shape("feature rows do not match node count".into()));
        }
        self.features = Some(features);
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn label(&self, v: usize) -> usize {
        self.node_labels[v]
    }

    pub fn labels(&self) -> &[usize] {
        &self.node_labels
    }

    pub fn features(&self) -> Option<&Features> {
        self.features.as_ref()
    }

    /// Homophily ratio `H_G`: share of edges whose endpoints carry equal labels.
    /// Edgeless graphs yield 0.
    pub fn homophily(&self) -> f64 {
        if self.edges.is_empty() {
            return 0.0;
        }
        let same = self
            .edges
            .iter()
            .filter(|&&(u, v)| self.node_labels[u] == self.node_labels[v])
            .count();
        same as f64 / self.edges.len() as f64
    }

    /// `|E| / C(|V|, 2)`; graphs with fewer than two nodes contribute 0.
    pub fn edge_density(&self) -> f64 {
        let n = self.node_count as f64;
        if self.node_count < 2 {
            return 0.0;
        }
        self.edges.len() as f64 / (n * (n - 1.0) / 2.0)
    }

    /// Returns the graph with nodes renamed by `perm` (old index -> new index).
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.node_count {
            return Err(Error::Graph("permutation length differs from node count".into()));
        }
        let mut labels = vec![0; self.node_count];
        for (old, &new) in perm.iter().enumerate() {
            labels[new] = self.node_labels[old];
        }
        let edges = self.edges.iter().map(|&(u, v)| (perm[u], perm[v]));
        let mut g = LabeledGraph::new(self.node_count, edges, labels)?;
        if let Some(f) = &self.features {
            let mut values = vec![0.0; f.values.len()];
            for (old, &new) in perm.iter().enumerate() {
                values[new * f.dim..(new + 1) * f.dim].copy_from_slice(f.row(old));
            }
            g.features = Some(Features { dim: f.dim, values });
        }
        Ok(g)
    }
}

/// Where node labels came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelSource {
    /// `<DS>_node_labels.txt`.
    File,
    /// Node degree used as a surrogate label for datasets shipped without labels.
    Degree,
}

impl fmt::Display for LabelSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelSource::File => "file",
            LabelSource::Degree => "degree",
        })
    }
}

#[derive(Debug, Clone)]
pub struct GraphDataset {
    pub name: String,
    pub graphs: Vec<LabeledGraph>,
    /// Size `g` of the dense node label alphabet.
    pub label_alphabet_size: usize,
    pub class_labels: Option<Vec<i64>>,
    pub label_source: LabelSource,
}

impl GraphDataset {
    /// Assembles a dataset, checking that labels are dense in `[0, g)`.
    pub fn new(name: impl Into<String>, graphs: Vec<LabeledGraph>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for g in &graphs {
            seen.extend(g.labels().iter().copied());
        }
        let alphabet = seen.len();
        if let Some(&max) = seen.iter().next_back() {
            if max >= alphabet {
                return Err(Error::Encoding(format!(
                    "labels are not dense: max label {max} with {alphabet} distinct values"
                )));
            }
        }
        Ok(GraphDataset {
            name: name.into(),
            graphs,
            label_alphabet_size: alphabet,
            class_labels: None,
            label_source: LabelSource::File,
        })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn total_nodes(&self) -> usize {
        self.graphs.iter().map(LabeledGraph::node_count).sum()
    }

    /// Feature width shared by every graph, if features are attached.
    pub fn feature_dim(&self) -> Option<usize> {
        self.graphs.first()?.features().map(Features::dim)
    }

    /// The subset of graphs at the given indices, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        GraphDataset {
            name: self.name.clone(),
            graphs: indices.iter().map(|&i| self.graphs[i].clone()).collect(),
            label_alphabet_size: self.label_alphabet_size,
            class_labels: self
                .class_labels
                .as_ref()
                .map(|c| indices.iter().map(|&i| c[i]).collect()),
            label_source: self.label_source,
        }
    }
}

/// A node addressed by `(graph index, node index)` within a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeRef {
    pub graph: usize,
    pub node: usize,
}

impl NodeRef {
    pub fn new(graph: usize, node: usize) -> Self {
        NodeRef { graph, node }
    }
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "G{}:v{}", self.graph, self.node)
    }
}

/// Replaces every graph's features with one-hot encodings of its node labels.
pub fn one_hot_encode(dataset: &GraphDataset) -> Result<GraphDataset> {
    let g = dataset.label_alphabet_size;
    let mut out = dataset.clone();
    for graph in &mut out.graphs {
        let n = graph.node_count();
        let mut values = vec![0.0f32; n * g];
        for v in 0..n {
            let l = graph.label(v);
            if l >= g {
                return Err(Error::Encoding(format!(
                    "label {l} is outside the alphabet of size {g}"
                )));
            }
            values[v * g + l] = 1.0;
        }
        graph.features = Some(Features { dim: g, values });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    pub graph_count: usize,
    pub avg_nodes: f64,
    /// Average number of undirected edges.
    pub avg_edges: f64,
    /// Mean per-graph homophily ratio `H_D`.
    pub homophily: f64,
    /// `P_D = Σ_G |E(G)| / C(|V(G)|, 2)`.
    pub connect_prob: f64,
    pub max_degree: usize,
    pub label_alphabet_size: usize,
}

pub fn dataset_stats(dataset: &GraphDataset) -> DatasetStats {
    let n = dataset.len();
    let denom = n.max(1) as f64;
    DatasetStats {
        graph_count: n,
        avg_nodes: dataset.graphs.iter().map(|g| g.node_count() as f64).sum::<f64>() / denom,
        avg_edges: dataset.graphs.iter().map(|g| g.edge_count() as f64).sum::<f64>() / denom,
        homophily: dataset.graphs.iter().map(LabeledGraph::homophily).sum::<f64>() / denom,
        connect_prob: dataset.graphs.iter().map(LabeledGraph::edge_density).sum(),
        max_degree: dataset.graphs.iter().map(LabeledGraph::max_degree).max().unwrap_or(0),
        label_alphabet_size: dataset.label_alphabet_size,
    }
}

/// Small named graphs used throughout tests and examples.
pub mod library {
    use super::LabeledGraph;

    fn uniform(n: usize, edges: &[(usize, usize)]) -> LabeledGraph {
        LabeledGraph::new(n, edges.iter().copied(), vec![0; n]).expect("valid library graph")
    }

    /// Star with three leaves (`K_{1,3}`), center is node 0.
    pub fn star3() -> LabeledGraph {
        uniform(4, &[(0, 1), (0, 2), (0, 3)])
    }

    pub fn path(n: usize) -> LabeledGraph {
        let edges: Vec<_> = (1..n).map(|v| (v - 1, v)).collect();
        uniform(n, &edges)
    }

    pub fn cycle(n: usize) -> LabeledGraph {
        let edges: Vec<_> = (0..n).map(|v| (v, (v + 1) % n)).collect();
        uniform(n, &edges)
    }

    /// Two disjoint triangles.
    pub fn two_triangles() -> LabeledGraph {
        uniform(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])
    }
}
