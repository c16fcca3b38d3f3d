//! δ-distinctness and the expressivity metrics `Exp`, `S_GNN` and `M`.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::GraphDataset;
use crate::nn::{forward::collect_rows, trace_dataset, ForwardTrace, GnnModel};
use crate::wl::{multiset_symmetric_difference, wl_refine, Color, WlStats};

/// Machine epsilon of binary32 as used for every "distinguishable" decision.
pub const EPS_MACH: f64 = 1.19e-7;

/// True when every coordinate is bit-identical or within `eps` in absolute value.
///
/// A NaN coordinate is close only to the identical NaN bit pattern.
pub fn close(a: &[f32], b: &[f32], eps: f64) -> bool {
    a.iter().zip(b).all(|(&x, &y)| {
        x.to_bits() == y.to_bits() || (x as f64 - y as f64).abs() <= eps
    })
}

/// Equivalence classes of vectors under greedy first-fit ε-closeness.
#[derive(Debug, Clone, PartialEq)]
pub struct DistinctnessIndex {
    pub tolerance: f64,
    pub representatives: Vec<Vec<f32>>,
    /// Class id of each input vector, in input order.
    pub assignment: Vec<usize>,
}

impl DistinctnessIndex {
    /// `|·|_δ`.
    pub fn class_count(&self) -> usize {
        self.representatives.len()
    }
}

/// Greedy single-pass classing: each vector joins the first class whose
/// representative is [`close`], otherwise it founds a new class.
pub fn delta_distinct<'a, I>(vectors: I, eps: f64) -> Result<DistinctnessIndex>
where
    I: IntoIterator<Item = &'a [f32]>,
{
    let mut representatives: Vec<Vec<f32>> = Vec::new();
    let mut assignment = Vec::new();
    // Exact repeats always land in the class their first copy joined, because
    // classes are only ever appended. Caching them skips the linear scan.
    let mut seen: HashMap<Vec<u32>, usize> = HashMap::new();
    let mut width = None;
    for v in vectors {
        match width {
            None => width = Some(v.len()),
            Some(w) if w != v.len() => {
                return Err(Error::Shape(format!(
                    "vector of width {} among vectors of width {w}",
                    v.len()
                )))
            }
            _ => {}
        }
        let key: Vec<u32> = v.iter().map(|x| x.to_bits()).collect();
        let class = match seen.get(&key) {
            Some(&c) => c,
            None => {
                let c = representatives
                    .iter()
                    .position(|r| close(r, v, eps))
                    .unwrap_or_else(|| {
                        representatives.push(v.to_vec());
                        representatives.len() - 1
                    });
                seen.insert(key, c);
                c
            }
        };
        assignment.push(class);
    }
    Ok(DistinctnessIndex {
        tolerance: eps,
        representatives,
        assignment,
    })
}

fn class_count<'a>(rows: impl IntoIterator<Item = &'a [f32]>, eps: f64) -> usize {
    delta_distinct(rows, eps)
        .expect("rows of one matrix share a width")
        .class_count()
}

/// Outcome of the `Exp` metric with its pair accounting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expressivity {
    pub value: f64,
    /// Unordered pairs with `Δ_WL(G, H, k) > 0`.
    pub certified_pairs: usize,
    pub distinguished_pairs: usize,
}

impl Expressivity {
    /// No WL-distinguishable pair exists; `value` is reported as 1.
    pub fn is_vacuous(&self) -> bool {
        self.certified_pairs == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub exp: Expressivity,
    /// `S_GNN^(j)` for `j = 1..=k`.
    pub s_gnn: Vec<f64>,
    pub s_gnn_cumulative: f64,
    /// `M^(j)` for `j = 1..=k`.
    pub m: Vec<f64>,
    pub m_cumulative: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricDeltas {
    pub exp: f64,
    pub m_cumulative: f64,
    pub s_gnn_cumulative: f64,
}

/// `clean − attacked`; positive values mean degradation.
pub fn metric_deltas(clean: &MetricReport, attacked: &MetricReport) -> Result<MetricDeltas> {
    if clean.m.len() != attacked.m.len()
        || clean.s_gnn.len() != attacked.s_gnn.len()
        || clean.exp.certified_pairs != attacked.exp.certified_pairs
    {
        return Err(Error::Metric(
            "reports come from different datasets or depths".into(),
        ));
    }
    Ok(MetricDeltas {
        exp: clean.exp.value - attacked.exp.value,
        m_cumulative: clean.m_cumulative - attacked.m_cumulative,
        s_gnn_cumulative: clean.s_gnn_cumulative - attacked.s_gnn_cumulative,
    })
}

/// Dataset-side state shared by every model evaluated on the same data:
/// the joint WL coloring and the WL-certified pairs.
#[derive(Debug, Clone)]
pub struct MetricContext<'a> {
    pub dataset: &'a GraphDataset,
    pub k: usize,
    pub eps: f64,
    pub certified_pairs: Vec<(usize, usize)>,
    pub wl: WlStats,
}

impl<'a> MetricContext<'a> {
    pub fn new(dataset: &'a GraphDataset, k: usize, eps: f64) -> Self {
        let coloring = wl_refine(&dataset.graphs, k);
        let multisets: Vec<Vec<Color>> = (0..dataset.len()).map(|g| coloring.multiset(k, g)).collect();
        let certified_pairs = certified_pairs(&multisets);
        MetricContext {
            dataset,
            k,
            eps,
            certified_pairs,
            wl: WlStats::from_coloring(&coloring),
        }
    }

    pub fn evaluate(&self, model: &GnnModel) -> Result<MetricReport> {
        if model.depth() != self.k {
            return Err(Error::Metric(format!(
                "model depth {} differs from WL iterations {}",
                model.depth(),
                self.k
            )));
        }
        let traces = trace_dataset(model, self.dataset)?;
        self.evaluate_traces(&traces)
    }

    pub fn evaluate_traces(&self, traces: &[ForwardTrace]) -> Result<MetricReport> {
        let exp = expressivity_from(traces, &self.certified_pairs, self.eps);
        let s_gnn = gnn_subdivision_from(traces, self.k, self.eps);
        let m: Vec<f64> = (1..=self.k)
            .map(|j| unique_mapping_from(traces, j, self.eps))
            .collect();
        Ok(MetricReport {
            exp,
            s_gnn_cumulative: s_gnn.iter().product(),
            s_gnn,
            m_cumulative: m.iter().product(),
            m,
        })
    }
}

fn certified_pairs(multisets: &[Vec<Color>]) -> Vec<(usize, usize)> {
    let n = multisets.len();
    (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .filter(|&(a, b)| multiset_symmetric_difference(&multisets[a], &multisets[b]) > 0)
        .collect()
}

fn expressivity_from(traces: &[ForwardTrace], pairs: &[(usize, usize)], eps: f64) -> Expressivity {
    let distinguished = pairs
        .par_iter()
        .filter(|&&(a, b)| !close(&traces[a].graph_embedding, &traces[b].graph_embedding, eps))
        .count();
    let value = if pairs.is_empty() {
        1.0
    } else {
        distinguished as f64 / pairs.len() as f64
    };
    Expressivity {
        value,
        certified_pairs: pairs.len(),
        distinguished_pairs: distinguished,
    }
}

fn gnn_subdivision_from(traces: &[ForwardTrace], k: usize, eps: f64) -> Vec<f64> {
    let per_graph: Vec<Vec<f64>> = traces
        .par_iter()
        .map(|t| {
            let counts: Vec<usize> = (0..=k)
                .map(|j| class_count(t.output(j).iter_rows(), eps))
                .collect();
            counts
                .windows(2)
                .map(|w| if w[0] == 0 { 1.0 } else { w[1] as f64 / w[0] as f64 })
                .collect()
        })
        .collect();
    let n = per_graph.len().max(1) as f64;
    (0..k)
        .map(|j| per_graph.iter().map(|r| r[j]).sum::<f64>() / n)
        .collect()
}

fn unique_mapping_from(traces: &[ForwardTrace], j: usize, eps: f64) -> f64 {
    let z = collect_rows(traces, |t| t.aggregate(j));
    let h = collect_rows(traces, |t| t.output(j));
    let (hz, hh) = rayon::join(
        || class_count(z.rows.iter_rows(), eps),
        || class_count(h.rows.iter_rows(), eps),
    );
    if hz == 0 {
        1.0
    } else {
        hh as f64 / hz as f64
    }
}

/// `Exp` over unordered pairs certified non-isomorphic by `Δ_WL(·,·,k) > 0`.
pub fn expressivity(model: &GnnModel, dataset: &GraphDataset, k: usize) -> Result<Expressivity> {
    let ctx = MetricContext::new(dataset, k, EPS_MACH);
    let traces = trace_dataset(model, dataset)?;
    Ok(expressivity_from(&traces, &ctx.certified_pairs, EPS_MACH))
}

/// Per-layer `S_GNN^(j)` for `j = 1..=k` and their product.
pub fn gnn_subdivision(model: &GnnModel, dataset: &GraphDataset, k: usize) -> Result<(Vec<f64>, f64)> {
    if k > model.depth() {
        return Err(Error::LayerOutOfRange(format!("MP layer {k}")));
    }
    let traces = trace_dataset(model, dataset)?;
    let per_layer = gnn_subdivision_from(&traces, k, EPS_MACH);
    let product = per_layer.iter().product();
    Ok((per_layer, product))
}

/// `M^(j) = |H^(j)|_δ / |Z^(j)|_δ` over the whole dataset.
pub fn unique_mapping_ratio(model: &GnnModel, dataset: &GraphDataset, j: usize) -> Result<f64> {
    if j == 0 || j > model.depth() {
        return Err(Error::LayerOutOfRange(format!("MP layer {j}")));
    }
    let traces = trace_dataset(model, dataset)?;
    Ok(unique_mapping_from(&traces, j, EPS_MACH))
}
