//! 1-WL color refinement.
//!
//! Colors at iteration 0 are the node labels. Each later iteration maps the pair
//! `(previous color, sorted multiset of neighbor colors)` to a fresh integer,
//! handed out consecutively on first occurrence. The dictionary is shared by all
//! graphs refined in one call, so colors are comparable across those graphs.

use std::borrow::Borrow;
use std::collections::HashMap;

use crate::graph::{GraphDataset, LabeledGraph};

pub type Color = u32;

#[derive(Debug, Clone)]
pub struct WlColoring {
    /// `per_iteration[t][graph][node]`.
    per_iteration: Vec<Vec<Vec<Color>>>,
    dictionary: HashMap<(Color, Vec<Color>), Color>,
}

impl WlColoring {
    /// Number of refinement iterations performed (colors exist for `0..=iterations`).
    pub fn iterations(&self) -> usize {
        self.per_iteration.len() - 1
    }

    pub fn graph_count(&self) -> usize {
        self.per_iteration[0].len()
    }

    pub fn colors(&self, t: usize, graph: usize) -> &[Color] {
        &self.per_iteration[t][graph]
    }

    pub fn dictionary_len(&self) -> usize {
        self.dictionary.len()
    }

    /// Sorted color multiset `C^(t)(G)`.
    pub fn multiset(&self, t: usize, graph: usize) -> Vec<Color> {
        let mut m = self.per_iteration[t][graph].clone();
        m.sort_unstable();
        m
    }

    /// Number of distinct colors in a graph at iteration `t`.
    pub fn distinct_count(&self, t: usize, graph: usize) -> usize {
        let mut m = self.multiset(t, graph);
        m.dedup();
        m.len()
    }

    /// Multiset symmetric difference between two graphs of this coloring.
    pub fn difference(&self, t: usize, a: usize, b: usize) -> usize {
        multiset_symmetric_difference(&self.multiset(t, a), &self.multiset(t, b))
    }
}

/// Refines all `graphs` jointly for exactly `iterations` rounds, even past stabilization.
pub fn wl_refine<G: Borrow<LabeledGraph>>(graphs: &[G], iterations: usize) -> WlColoring {
    let initial: Vec<Vec<Color>> = graphs
        .iter()
        .map(|g| g.borrow().labels().iter().map(|&l| l as Color).collect())
        .collect();
    // Fresh colors never reuse a label value.
    let mut next: Color = initial
        .iter()
        .flatten()
        .max()
        .map_or(0, |&m| m + 1);
    let mut dictionary = HashMap::new();
    let mut per_iteration = vec![initial];
    for _ in 0..iterations {
        let prev = per_iteration.last().expect("iteration 0 exists");
        let mut current = Vec::with_capacity(graphs.len());
        for (gi, g) in graphs.iter().enumerate() {
            let g = g.borrow();
            let prev_g = &prev[gi];
            let mut colors = Vec::with_capacity(g.node_count());
            for v in 0..g.node_count() {
                let mut neigh: Vec<Color> = g.neighbors(v).iter().map(|&u| prev_g[u]).collect();
                neigh.sort_unstable();
                let color = *dictionary.entry((prev_g[v], neigh)).or_insert_with(|| {
                    next += 1;
                    next - 1
                });
                colors.push(color);
            }
            current.push(colors);
        }
        per_iteration.push(current);
    }
    WlColoring {
        per_iteration,
        dictionary,
    }
}

/// `Σ_c |m_a(c) − m_b(c)|` for sorted multisets, i.e. `|(A ∪ B) \ (A ∩ B)|` with
/// max-multiplicity union and min-multiplicity intersection.
pub fn multiset_symmetric_difference(a: &[Color], b: &[Color]) -> usize {
    let (mut i, mut j, mut diff) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                diff += 1;
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                diff += 1;
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    diff + (a.len() - i) + (b.len() - j)
}

/// WL difference `Δ_WL(G, H, t)` from a joint refinement of exactly `{G, H}`.
pub fn wl_difference(g: &LabeledGraph, h: &LabeledGraph, t: usize) -> usize {
    wl_refine(&[g, h], t).difference(t, 0, 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WlStats {
    /// `distinct_counts[graph][t]` for `t = 0..=k`.
    pub distinct_counts: Vec<Vec<usize>>,
    /// `S_WL^(t)` for `t = 1..=k` (index 0 holds `t = 1`).
    pub subdivision_ratios: Vec<f64>,
    /// `S_WL^{Π_1^k}`.
    pub cumulative: f64,
}

impl WlStats {
    pub fn from_coloring(coloring: &WlColoring) -> Self {
        let k = coloring.iterations();
        let graphs = coloring.graph_count();
        let distinct_counts: Vec<Vec<usize>> = (0..graphs)
            .map(|g| (0..=k).map(|t| coloring.distinct_count(t, g)).collect())
            .collect();
        let subdivision_ratios: Vec<f64> = (1..=k)
            .map(|t| {
                let sum: f64 = distinct_counts
                    .iter()
                    .map(|c| ratio(c[t], c[t - 1]))
                    .sum();
                sum / graphs.max(1) as f64
            })
            .collect();
        let cumulative = subdivision_ratios.iter().product();
        WlStats {
            distinct_counts,
            subdivision_ratios,
            cumulative,
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        // only empty graphs have no colors; they do not refine
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// Average WL subdivision ratios over a jointly refined dataset.
pub fn wl_subdivision(dataset: &GraphDataset, k: usize) -> WlStats {
    WlStats::from_coloring(&wl_refine(&dataset.graphs, k))
}

/// Canonical string of the height-`t` unfolding tree rooted at `v`.
///
/// `enc(v, 0)` is the label; `enc(v, t)` is the label followed by the sorted
/// child encodings in parentheses. Nodes without neighbors encode as their label.
/// Exponential in `t`; intended as a test oracle for small graphs.
pub fn unfolding_tree_encoding(g: &LabeledGraph, v: usize, t: usize) -> String {
    let label = g.label(v).to_string();
    if t == 0 || g.degree(v) == 0 {
        return label;
    }
    let mut children: Vec<String> = g
        .neighbors(v)
        .iter()
        .map(|&u| unfolding_tree_encoding(g, u, t - 1))
        .collect();
    children.sort_unstable();
    format!("{label}({})", children.join(","))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::library::*;

    #[test]
    fn iteration_zero_is_labels() {
        let g = LabeledGraph::new(3, [(0, 1)], vec![2, 0, 1]).unwrap();
        let c = wl_refine(&[&g], 0);
        assert_eq!(c.colors(0, 0), &[2, 0, 1]);
        assert_eq!(c.iterations(), 0);
    }

    #[test]
    fn star_splits_into_center_and_leaves() {
        let c = wl_refine(&[star3()], 1);
        assert_eq!(c.distinct_count(1, 0), 2);
    }

    #[test]
    fn regular_graphs_stay_uniform() {
        let c = wl_refine(&[cycle(6), two_triangles()], 5);
        for t in 0..=5 {
            assert_eq!(c.multiset(t, 0), c.multiset(t, 1));
            assert_eq!(c.distinct_count(t, 0), 1);
        }
        assert_eq!(wl_difference(&cycle(6), &two_triangles(), 4), 0);
    }

    #[test]
    fn star_versus_path_difference() {
        // S3 {a x3, c x1} against P4 {a x2, b x2}
        assert_eq!(wl_difference(&star3(), &path(4), 1), 4);
        assert_eq!(wl_difference(&path(4), &star3(), 1), 4);
        assert_eq!(wl_difference(&star3(), &star3(), 3), 0);
        assert_eq!(wl_difference(&star3(), &path(4), 0), 0);
    }

    #[test]
    fn colors_are_consecutive_and_fresh() {
        let c = wl_refine(&[star3(), path(4)], 2);
        // label 0, then fresh colors start at 1
        let c = &c;
        let mut seen: Vec<Color> = (1..=2)
            .flat_map(|t| (0..2).flat_map(move |g| c.colors(t, g).to_vec()))
            .collect();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen, (1..=seen.len() as Color).collect::<Vec<_>>());
        assert_eq!(c.dictionary_len(), seen.len());
    }

    #[test]
    fn subdivision_examples() {
        let cycles = GraphDataset::new("c", vec![cycle(4), cycle(5), cycle(7)]).unwrap();
        let s = wl_subdivision(&cycles, 3);
        assert!(s.subdivision_ratios.iter().all(|&r| r == 1.0));
        assert_eq!(s.cumulative, 1.0);

        let star = GraphDataset::new("s", vec![star3()]).unwrap();
        assert_eq!(wl_subdivision(&star, 1).subdivision_ratios, vec![2.0]);

        let mixed = GraphDataset::new("m", vec![star3(), cycle(4)]).unwrap();
        assert_eq!(wl_subdivision(&mixed, 1).subdivision_ratios, vec![1.5]);
    }

    #[test]
    fn cumulative_is_product() {
        let ds = GraphDataset::new("p", vec![path(5), star3(), path(7)]).unwrap();
        let s = wl_subdivision(&ds, 3);
        let prod: f64 = s.subdivision_ratios.iter().product();
        assert_eq!(s.cumulative, prod);
        assert!(s.subdivision_ratios.iter().all(|&r| r >= 1.0));
    }

    #[test]
    fn unfolding_tree_examples() {
        let iso = LabeledGraph::new(1, [], vec![3]).unwrap();
        assert_eq!(unfolding_tree_encoding(&iso, 0, 4), "3");
        let s = star3();
        assert_eq!(
            unfolding_tree_encoding(&s, 1, 2),
            unfolding_tree_encoding(&s, 3, 2)
        );
        assert_ne!(
            unfolding_tree_encoding(&s, 0, 1),
            unfolding_tree_encoding(&path(4), 1, 1)
        );
    }

    #[test]
    fn symmetric_difference_counts_multiplicities() {
        assert_eq!(multiset_symmetric_difference(&[1, 1, 2], &[1, 2, 2]), 2);
        assert_eq!(multiset_symmetric_difference(&[], &[4, 4]), 2);
        assert_eq!(multiset_symmetric_difference(&[5], &[5]), 0);
    }
}
