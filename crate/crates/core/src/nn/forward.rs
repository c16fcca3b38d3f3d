use std::cmp::Ordering;

use rayon::prelude::*;

use super::{Aggregation, GnnModel, LayerId, Matrix32};
use crate::error::{Error, Result};
use crate::graph::{GraphDataset, LabeledGraph, NodeRef};

/// Activations of one message-passing layer for every node of a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrace {
    /// `Z^(j)`: aggregated inputs of the MLP, one row per node.
    pub aggregate: Matrix32,
    /// Output of each MLP stage; the last one is `H^(j)`.
    pub stages: Vec<Matrix32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    /// `H^(0) = X`.
    pub input: Matrix32,
    pub layers: Vec<LayerTrace>,
    /// Canonical-order sum of the rows of `H^(k)`.
    pub graph_embedding: Vec<f32>,
}

impl ForwardTrace {
    /// `H^(j)`; `j = 0` is the input features.
    pub fn output(&self, j: usize) -> &Matrix32 {
        if j == 0 {
            &self.input
        } else {
            self.layers[j - 1].stages.last().expect("MLP has stages")
        }
    }

    pub fn aggregate(&self, j: usize) -> &Matrix32 {
        &self.layers[j - 1].aggregate
    }

    /// Rows entering `W^(j,i)`.
    pub fn stage_input(&self, layer: LayerId) -> &Matrix32 {
        let l = &self.layers[layer.mp - 1];
        if layer.stage == 1 {
            &l.aggregate
        } else {
            &l.stages[layer.stage - 2]
        }
    }

    pub fn stage_output(&self, layer: LayerId) -> &Matrix32 {
        &self.layers[layer.mp - 1].stages[layer.stage - 1]
    }
}

/// Lexicographic order on the bit patterns of the coordinates.
pub(crate) fn cmp_bits(a: &[f32], b: &[f32]) -> Ordering {
    a.iter()
        .map(|x| x.to_bits())
        .cmp(b.iter().map(|x| x.to_bits()))
}

/// Sums rows after sorting them by [`cmp_bits`], so equal multisets give identical sums.
pub(crate) fn canonical_sum(rows: &mut [&[f32]], out: &mut [f32]) {
    rows.sort_unstable_by(|a, b| cmp_bits(a, b));
    out.fill(0.0);
    for row in rows.iter() {
        for (o, x) in out.iter_mut().zip(row.iter()) {
            *o += x;
        }
    }
}

fn gcn_coefficient(deg_v: usize, deg_u: usize) -> f32 {
    1.0 / (((deg_v + 1) * (deg_u + 1)) as f32).sqrt()
}

/// `Z` rows: the self term and every neighbor term of the closed
/// neighborhood, summed in canonical order.
fn aggregate(aggregation: Aggregation, graph: &LabeledGraph, h: &Matrix32) -> Matrix32 {
    let n = graph.node_count();
    let mut out = Matrix32::zeros(n, h.cols());
    let mut terms: Vec<Vec<f32>> = Vec::new();
    for v in 0..n {
        terms.clear();
        match aggregation {
            Aggregation::Sum { self_weight } => {
                terms.push(h.row(v).iter().map(|x| x * self_weight).collect());
                terms.extend(graph.neighbors(v).iter().map(|&u| h.row(u).to_vec()));
            }
            Aggregation::GcnNorm => {
                let c = gcn_coefficient(graph.degree(v), graph.degree(v));
                terms.push(h.row(v).iter().map(|x| x * c).collect());
                for &u in graph.neighbors(v) {
                    let c = gcn_coefficient(graph.degree(v), graph.degree(u));
                    terms.push(h.row(u).iter().map(|x| x * c).collect());
                }
            }
        }
        let mut rows: Vec<&[f32]> = terms.iter().map(Vec::as_slice).collect();
        canonical_sum(&mut rows, out.row_mut(v));
    }
    out
}

impl GnnModel {
    pub fn forward(&self, graph: &LabeledGraph) -> Result<ForwardTrace> {
        let features = graph
            .features()
            .ok_or_else(|| Error::Shape("graph has no node features; one-hot encode first".into()))?;
        if features.dim() != self.spec.input_dim {
            return Err(Error::Shape(format!(
                "feature width {} differs from model input width {}",
                features.dim(),
                self.spec.input_dim
            )));
        }
        let n = graph.node_count();
        let input = Matrix32::from_vec(n, features.dim(), features.values().to_vec())?;
        let mut layers = Vec::with_capacity(self.layers.len());
        let mut h = input.clone();
        for layer in &self.layers {
            let z = aggregate(layer.aggregation, graph, &h);
            let mut stages = Vec::with_capacity(layer.mlp.len());
            let mut x = &z;
            for stage in &layer.mlp {
                let mut out = Matrix32::zeros(n, stage.weights.rows());
                for v in 0..n {
                    stage.apply_into(x.row(v), out.row_mut(v));
                }
                stages.push(out);
                x = stages.last().expect("just pushed");
            }
            h = stages.last().expect("MLP has stages").clone();
            layers.push(LayerTrace {
                aggregate: z,
                stages,
            });
        }
        let mut graph_embedding = vec![0.0f32; h.cols()];
        let mut rows: Vec<&[f32]> = h.iter_rows().collect();
        canonical_sum(&mut rows, &mut graph_embedding);
        Ok(ForwardTrace {
            input,
            layers,
            graph_embedding,
        })
    }
}

/// Forward traces for every graph, in dataset order.
pub fn trace_dataset(model: &GnnModel, dataset: &GraphDataset) -> Result<Vec<ForwardTrace>> {
    dataset
        .graphs
        .par_iter()
        .map(|g| model.forward(g))
        .collect()
}

/// `Z^(j)` over a dataset with `(graph, node)` provenance per row.
#[derive(Debug, Clone)]
pub struct LayerInputs {
    pub rows: Matrix32,
    pub provenance: Vec<NodeRef>,
}

pub fn layer_inputs(model: &GnnModel, dataset: &GraphDataset, j: usize) -> Result<LayerInputs> {
    if j == 0 || j > model.depth() {
        return Err(Error::LayerOutOfRange(format!("MP layer {j}")));
    }
    let traces = trace_dataset(model, dataset)?;
    Ok(collect_rows(&traces, |t| t.aggregate(j)))
}

pub(crate) fn collect_rows<'a>(
    traces: &'a [ForwardTrace],
    select: impl Fn(&'a ForwardTrace) -> &'a Matrix32,
) -> LayerInputs {
    let width = traces.first().map_or(0, |t| select(t).cols());
    let mut values = Vec::new();
    let mut provenance = Vec::new();
    for (g, t) in traces.iter().enumerate() {
        let m = select(t);
        values.extend_from_slice(m.values());
        provenance.extend((0..m.rows()).map(|v| NodeRef::new(g, v)));
    }
    LayerInputs {
        rows: Matrix32::from_vec(provenance.len(), width, values).expect("rows share a width"),
        provenance,
    }
}
