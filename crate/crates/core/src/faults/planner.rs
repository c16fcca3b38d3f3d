//! Constructive attacks that make chosen nodes or graphs indistinguishable.
//!
//! Planners never mutate the model; they return a [`FlipRecord`] to be applied
//! with [`FlipRecord::apply`].

use std::collections::{BTreeSet, HashMap};

use super::{zero_weight_flips, BitAddress, BitFlip, FlipRecord, SIGN_BIT};
use crate::bounds::wl_max_pair;
use crate::error::{Error, Result};
use crate::graph::{GraphDataset, NodeRef};
use crate::nn::{dot, Activation, GnnModel, LayerId, Matrix32};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanOutcome {
    Planned,
    /// The stage inputs of the two nodes are already bit-identical.
    AlreadyIndistinguishable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackPlan {
    pub layer: LayerId,
    pub outcome: PlanOutcome,
    /// Input coordinates in which the two targets differ.
    pub columns: Vec<usize>,
    pub record: FlipRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphAttackPlan {
    pub layer: LayerId,
    /// Dataset indices of `G_e` and `H_e`.
    pub graphs: (usize, usize),
    pub e: usize,
    pub columns: Vec<usize>,
    pub record: FlipRecord,
}

fn stage_inputs(model: &GnnModel, dataset: &GraphDataset, layer: LayerId, graph: usize) -> Result<Matrix32> {
    model.stage(layer)?;
    let g = dataset
        .graphs
        .get(graph)
        .ok_or_else(|| Error::Planner(format!("no graph {graph} in dataset")))?;
    Ok(model.forward(g)?.stage_input(layer).clone())
}

fn node_input(model: &GnnModel, dataset: &GraphDataset, layer: LayerId, node: NodeRef) -> Result<Vec<f32>> {
    let rows = stage_inputs(model, dataset, layer, node.graph)?;
    if node.node >= rows.rows() {
        return Err(Error::Planner(format!("no node {} in graph {}", node.node, node.graph)));
    }
    Ok(rows.row(node.node).to_vec())
}

fn differing_columns(a: &[f32], b: &[f32]) -> Vec<usize> {
    (0..a.len()).filter(|&c| a[c].to_bits() != b[c].to_bits()).collect()
}

fn zero_columns(model: &GnnModel, layer: LayerId, columns: &[usize]) -> Result<Vec<BitFlip>> {
    let rows = model.weights(layer)?.rows();
    let mut flips = Vec::new();
    for row in 0..rows {
        for &col in columns {
            flips.extend(zero_weight_flips(model, layer, row, col)?);
        }
    }
    Ok(flips)
}

fn inputs_for_pair(
    model: &GnnModel,
    dataset: &GraphDataset,
    layer: LayerId,
    u: NodeRef,
    v: NodeRef,
) -> Result<(Vec<f32>, Vec<f32>)> {
    if u == v {
        return Err(Error::Planner("target nodes must differ".into()));
    }
    Ok((
        node_input(model, dataset, layer, u)?,
        node_input(model, dataset, layer, v)?,
    ))
}

/// Zeroes every weight of `W^(j,i)` in the columns where the inputs of `u` and
/// `v` differ, so both nodes reach identical stage outputs.
pub fn plan_targeted_node_attack(
    model: &GnnModel,
    dataset: &GraphDataset,
    layer: LayerId,
    u: NodeRef,
    v: NodeRef,
) -> Result<AttackPlan> {
    let (xu, xv) = inputs_for_pair(model, dataset, layer, u, v)?;
    let columns = differing_columns(&xu, &xv);
    if columns.is_empty() {
        return Ok(AttackPlan {
            layer,
            outcome: PlanOutcome::AlreadyIndistinguishable,
            columns,
            record: FlipRecord::default(),
        });
    }
    let flips = zero_columns(model, layer, &columns)?;
    Ok(AttackPlan {
        layer,
        outcome: PlanOutcome::Planned,
        columns,
        record: FlipRecord::from_flips(flips),
    })
}

/// Sign-bit attack on a ReLU stage.
///
/// For each row whose outputs separate `u` and `v`, the positive weights in
/// the differing columns get their sign flipped. If the row still separates
/// the nodes, positive weights on shared columns are flipped as well, largest
/// contribution first, until both pre-activations are non-positive.
pub fn plan_relu_sign_attack(
    model: &GnnModel,
    dataset: &GraphDataset,
    layer: LayerId,
    u: NodeRef,
    v: NodeRef,
) -> Result<AttackPlan> {
    let stage = model.stage(layer)?;
    if stage.activation != Activation::Relu {
        return Err(Error::Planner(format!(
            "sign attack needs a ReLU stage, {layer} uses {}",
            stage.activation
        )));
    }
    let (xu, xv) = inputs_for_pair(model, dataset, layer, u, v)?;
    let columns = differing_columns(&xu, &xv);
    if columns.is_empty() {
        return Ok(AttackPlan {
            layer,
            outcome: PlanOutcome::AlreadyIndistinguishable,
            columns,
            record: FlipRecord::default(),
        });
    }
    let relu = |x: f32| Activation::Relu.apply(x).to_bits();
    let w = &stage.weights;
    let mut flips = Vec::new();
    for row in 0..w.rows() {
        let mut r = w.row(row).to_vec();
        if relu(dot(&r, &xu)) == relu(dot(&r, &xv)) {
            continue;
        }
        let mut flip = |r: &mut Vec<f32>, col: usize| {
            r[col] = -r[col];
            flips.push(BitFlip {
                address: BitAddress {
                    layer,
                    row,
                    col,
                    bit: SIGN_BIT,
                },
                before: 0,
                after: 1,
            });
        };
        for &c in &columns {
            if r[c].is_sign_positive() && r[c] != 0.0 {
                flip(&mut r, c);
            }
        }
        if relu(dot(&r, &xu)) == relu(dot(&r, &xv)) {
            continue;
        }
        let mut shared: Vec<usize> = (0..r.len())
            .filter(|c| columns.binary_search(c).is_err() && r[*c] > 0.0 && xu[*c] > 0.0)
            .collect();
        shared.sort_by(|&a, &b| (r[b] * xu[b]).total_cmp(&(r[a] * xu[a])).then(a.cmp(&b)));
        for c in shared {
            flip(&mut r, c);
            if dot(&r, &xu) <= 0.0 && dot(&r, &xv) <= 0.0 {
                break;
            }
        }
        if relu(dot(&r, &xu)) != relu(dot(&r, &xv)) {
            return Err(Error::Planner(format!(
                "sign flips cannot equalize row {row} of {layer}; inputs are not non-negative"
            )));
        }
    }
    Ok(AttackPlan {
        layer,
        outcome: PlanOutcome::Planned,
        columns,
        record: FlipRecord::from_flips(flips),
    })
}

fn row_key(row: &[f32], masked: &BTreeSet<usize>) -> Vec<u32> {
    row.iter()
        .enumerate()
        .map(|(c, x)| if masked.contains(&c) { 0 } else { x.to_bits() })
        .collect()
}

/// Rows of `a` and `b` left over after matching equal masked rows, by index.
fn unmatched(a: &Matrix32, b: &Matrix32, masked: &BTreeSet<usize>) -> (Vec<usize>, Vec<usize>) {
    let mut pool: HashMap<Vec<u32>, Vec<usize>> = HashMap::new();
    for r in (0..b.rows()).rev() {
        pool.entry(row_key(b.row(r), masked)).or_default().push(r);
    }
    let mut left_a = Vec::new();
    for r in 0..a.rows() {
        match pool.get_mut(&row_key(a.row(r), masked)).and_then(Vec::pop) {
            Some(_) => {}
            None => left_a.push(r),
        }
    }
    let mut left_b: Vec<usize> = pool.into_values().flatten().collect();
    left_b.sort_unstable();
    (left_a, left_b)
}

/// Makes the stage-`(j, i)` input multisets of the equal-order pair with the
/// largest WL difference coincide after zeroing a set of weight columns.
///
/// Unmatched rows are paired greedily by fewest remaining differing
/// coordinates; the differing coordinates join the zeroed column set until the
/// masked multisets agree.
pub fn plan_targeted_graph_attack(
    model: &GnnModel,
    dataset: &GraphDataset,
    layer: LayerId,
) -> Result<GraphAttackPlan> {
    model.stage(layer)?;
    let pair = wl_max_pair(dataset, layer.mp)?;
    if pair.e == 0 {
        return Err(Error::Planner(format!(
            "no equal-order pair is WL-distinguishable at iteration {}",
            layer.mp
        )));
    }
    let a = stage_inputs(model, dataset, layer, pair.g)?;
    let b = stage_inputs(model, dataset, layer, pair.h)?;
    let mut masked = BTreeSet::new();
    loop {
        let (left_a, mut left_b) = unmatched(&a, &b, &masked);
        if left_a.is_empty() {
            break;
        }
        for ra in left_a {
            let key_a = row_key(a.row(ra), &masked);
            let (pos, _) = left_b
                .iter()
                .enumerate()
                .map(|(p, &rb)| {
                    let key_b = row_key(b.row(rb), &masked);
                    (p, key_a.iter().zip(&key_b).filter(|(x, y)| x != y).count())
                })
                .min_by_key(|&(p, d)| (d, p))
                .expect("equal row counts leave equally many unmatched rows");
            let rb = left_b.remove(pos);
            masked.extend(differing_columns(a.row(ra), b.row(rb)));
        }
    }
    let columns: Vec<usize> = masked.into_iter().collect();
    let flips = zero_columns(model, layer, &columns)?;
    Ok(GraphAttackPlan {
        layer,
        graphs: (pair.g, pair.h),
        e: pair.e,
        columns,
        record: FlipRecord::from_flips(flips),
    })
}
