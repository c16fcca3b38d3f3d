//! Closed-form bit-flip bounds evaluated on the observed aggregate domain.

use std::collections::HashSet;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{DatasetStats, GraphDataset, NodeRef};
use crate::metrics::{close, EPS_MACH};
use crate::nn::{forward::collect_rows, trace_dataset, GnnModel, LayerId};
use crate::wl::{multiset_symmetric_difference, wl_refine};

/// Number of coordinates in which `a` and `b` are not ε-close.
pub fn l0_diff(a: &[f32], b: &[f32], eps: f64) -> usize {
    a.iter()
        .zip(b)
        .filter(|(x, y)| !close(&[**x], &[**y], eps))
        .count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct L0Witness {
    /// `d_{j,i}`.
    pub d: usize,
    pub pair: Option<(NodeRef, NodeRef)>,
}

/// Maximum ℓ0 difference between any two observed inputs of stage `(j, i)`.
///
/// Exact duplicate rows are dropped first; ties keep the first maximum in
/// `(first row, second row)` scan order.
pub fn max_l0_diff(model: &GnnModel, dataset: &GraphDataset, layer: LayerId) -> Result<L0Witness> {
    model.stage(layer)?;
    let traces = trace_dataset(model, dataset)?;
    let inputs = collect_rows(&traces, |t| t.stage_input(layer));
    let mut seen = HashSet::new();
    let unique: Vec<usize> = (0..inputs.rows.rows())
        .filter(|&r| seen.insert(inputs.rows.row(r).iter().map(|x| x.to_bits()).collect::<Vec<_>>()))
        .collect();
    let best = (0..unique.len())
        .into_par_iter()
        .map(|a| {
            let ra = inputs.rows.row(unique[a]);
            let mut best = (0usize, usize::MAX, usize::MAX);
            for (b, &rb) in unique.iter().enumerate().skip(a + 1) {
                let d = l0_diff(ra, inputs.rows.row(rb), EPS_MACH);
                if d > best.0 {
                    best = (d, a, b);
                }
            }
            best
        })
        .reduce(
            || (0, usize::MAX, usize::MAX),
            |x, y| if y.0 > x.0 || (y.0 == x.0 && (y.1, y.2) < (x.1, x.2)) { y } else { x },
        );
    Ok(match best {
        (0, ..) => L0Witness { d: 0, pair: None },
        (d, a, b) => L0Witness {
            d,
            pair: Some((inputs.provenance[unique[a]], inputs.provenance[unique[b]])),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WlMaxPair {
    pub g: usize,
    pub h: usize,
    /// `e_j = Δ_WL(G_e, H_e, j)`.
    pub e: usize,
}

/// Equal-order pair with the largest WL difference at iteration `j`.
///
/// Pairs are scanned in ascending `(g, h)` order and only a strictly larger
/// difference replaces the current best.
pub fn wl_max_pair(dataset: &GraphDataset, j: usize) -> Result<WlMaxPair> {
    let coloring = wl_refine(&dataset.graphs, j);
    let multisets: Vec<_> = (0..dataset.len()).map(|g| coloring.multiset(j, g)).collect();
    let mut best: Option<WlMaxPair> = None;
    for g in 0..dataset.len() {
        for h in g + 1..dataset.len() {
            if dataset.graphs[g].node_count() != dataset.graphs[h].node_count() {
                continue;
            }
            let e = multiset_symmetric_difference(&multisets[g], &multisets[h]);
            if best.is_none_or(|b| e > b.e) {
                best = Some(WlMaxPair { g, h, e });
            }
        }
    }
    best.ok_or_else(|| Error::Planner("dataset has no pair of graphs with equal order".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundInputs {
    pub d: usize,
    pub e: usize,
    pub m: usize,
    pub n: usize,
    pub b: u32,
    pub relu: bool,
}

impl BoundInputs {
    pub fn new(d: usize, m: usize, n: usize) -> Self {
        BoundInputs {
            d,
            e: 0,
            m,
            n,
            b: 32,
            relu: false,
        }
    }

    pub fn with_e(mut self, e: usize) -> Self {
        self.e = e;
        self
    }

    pub fn with_relu(mut self, relu: bool) -> Self {
        self.relu = relu;
        self
    }

    pub fn with_bits(mut self, b: u32) -> Self {
        self.b = b;
        self
    }
}

/// `d·m·b`, or `d·m` for ReLU.
pub fn node_bound(i: &BoundInputs) -> u64 {
    let base = i.d as u64 * i.m as u64;
    if i.relu {
        base
    } else {
        base * i.b as u64
    }
}

/// `e·d·m·b`, or `e·d·m` for ReLU.
pub fn graph_bound(i: &BoundInputs) -> u64 {
    i.e as u64 * node_bound(i)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FirstLayerBound {
    pub nz: usize,
    pub bound: u64,
}

/// `m·b·min(2d, g)` for one-hot inputs.
pub fn first_layer_bound(g: usize, max_degree: usize, m: usize, b: u32) -> FirstLayerBound {
    let nz = (2 * max_degree).min(g);
    FirstLayerBound {
        nz,
        bound: m as u64 * b as u64 * nz as u64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomophilyBound {
    pub nz_raw: f64,
    pub nz: usize,
    pub bound_raw: f64,
    pub bound: u64,
}

/// `m·b·nz_H` with `nz_H = min(2d(1−H)(1−P), g)`.
pub fn homophily_bound(stats: &DatasetStats, g: usize, m: usize, b: u32) -> HomophilyBound {
    let raw = (2.0 * stats.max_degree as f64 * (1.0 - stats.homophily) * (1.0 - stats.connect_prob))
        .min(g as f64)
        .max(0.0);
    let nz = raw.ceil() as usize;
    HomophilyBound {
        nz_raw: raw,
        nz,
        bound_raw: m as f64 * b as f64 * raw,
        bound: m as u64 * b as u64 * nz as u64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Node,
    Graph,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlipProbabilityBound {
    pub beta: f64,
    /// `−β·ln(n·m)`.
    pub log_bound: f64,
    /// `exp(log_bound)` when it is a normal `f64`.
    pub linear: Option<f64>,
    /// `n·m ≤ 1`: the bound carries no information.
    pub degenerate: bool,
}

/// `P ≤ (n·m)^{−β}` with `β = d·m·2^b`, times `e` at graph level.
pub fn random_flip_probability(i: &BoundInputs, level: Level) -> FlipProbabilityBound {
    let mut beta = i.d as f64 * i.m as f64 * 2f64.powi(i.b as i32);
    if level == Level::Graph {
        beta *= i.e as f64;
    }
    let nm = i.n as f64 * i.m as f64;
    let degenerate = nm <= 1.0;
    let log_bound = if degenerate || beta == 0.0 { 0.0 } else { -beta * nm.ln() };
    let linear = Some(log_bound.exp()).filter(|v| v.is_normal());
    FlipProbabilityBound {
        beta,
        log_bound,
        linear,
        degenerate,
    }
}
