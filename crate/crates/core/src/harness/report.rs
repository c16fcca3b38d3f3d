use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::Path;

use crate::bounds::{
    first_layer_bound, graph_bound, homophily_bound, max_l0_diff, node_bound, random_flip_probability,
    wl_max_pair, BoundInputs, FirstLayerBound, FlipProbabilityBound, HomophilyBound, L0Witness, Level,
    WlMaxPair,
};
use crate::error::{Error, Result};
use crate::faults::WEIGHT_BITS;
use crate::graph::{dataset_stats, GraphDataset};
use crate::nn::{Activation, GnnModel, LayerId};

use super::RunResult;

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

type SeriesKey = (String, String, String, String, String);

struct Cell {
    fraction: f64,
    attacked: Vec<f64>,
    delta: Vec<f64>,
    delta_m: Vec<f64>,
    clean: Vec<f64>,
    errors: usize,
}

fn series(results: &[RunResult]) -> BTreeMap<SeriesKey, Vec<Cell>> {
    let mut out: BTreeMap<SeriesKey, Vec<Cell>> = BTreeMap::new();
    for r in results {
        let key = (
            r.dataset.clone(),
            r.architecture.to_string(),
            r.activation.to_string(),
            r.layer.clone(),
            r.field.to_string(),
        );
        let cells = out.entry(key).or_default();
        let idx = match cells.iter().position(|c| c.fraction == r.fraction) {
            Some(i) => i,
            None => {
                cells.push(Cell {
                    fraction: r.fraction,
                    attacked: vec![],
                    delta: vec![],
                    delta_m: vec![],
                    clean: vec![],
                    errors: 0,
                });
                cells.len() - 1
            }
        };
        let c = &mut cells[idx];
        match (r.attacked_exp, r.delta_exp, r.delta_m, r.clean_exp) {
            (Some(a), Some(d), Some(m), Some(e)) if r.is_ok() => {
                c.attacked.push(a);
                c.delta.push(d);
                c.delta_m.push(m);
                c.clean.push(e);
            }
            _ => c.errors += 1,
        }
    }
    for cells in out.values_mut() {
        cells.sort_by(|a, b| a.fraction.total_cmp(&b.fraction));
    }
    out
}

fn pm(v: &[f64]) -> String {
    if v.is_empty() {
        return "-".into();
    }
    let (m, s) = mean_sd(v);
    format!("{m:.4} ± {s:.4}")
}

/// Mean ± sd of `Exp` per flip fraction, one table per
/// `(dataset, architecture, activation, layer, field)` series.
pub fn render_text(results: &[RunResult]) -> String {
    let mut s = String::new();
    if results.is_empty() {
        s.push_str("no results\n");
        return s;
    }
    for ((ds, arch, act, layer, field), cells) in series(results) {
        let _ = writeln!(s, "## {ds}  {arch}/{act}  layer {layer}  {field} bits");
        let _ = writeln!(
            s,
            "{:>8} {:>4} {:>18} {:>18} {:>18} {:>18} {:>6}",
            "fraction", "n", "clean Exp", "attacked Exp", "delta Exp", "delta M", "errors"
        );
        for c in cells {
            let _ = writeln!(
                s,
                "{:>8} {:>4} {:>18} {:>18} {:>18} {:>18} {:>6}",
                format!("{}%", c.fraction * 100.0),
                c.attacked.len(),
                pm(&c.clean),
                pm(&c.attacked),
                pm(&c.delta),
                pm(&c.delta_m),
                c.errors
            );
        }
        s.push('\n');
    }
    s
}

const PALETTE: [&str; 8] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#9c755f",
];

/// Static bar chart of mean attacked `Exp` per fraction with ±sd whiskers.
pub fn render_svg(results: &[RunResult]) -> String {
    let series = series(results);
    let mut fractions: Vec<f64> = results.iter().map(|r| r.fraction).collect();
    fractions.sort_by(f64::total_cmp);
    fractions.dedup();
    let (w, h, left, top, bottom) = (860.0, 420.0, 60.0, 30.0, 60.0);
    let plot_h = h - top - bottom;
    let group_w = (w - left - 20.0) / fractions.len().max(1) as f64;
    let bar_w = group_w * 0.8 / series.len().max(1) as f64;
    let y = |v: f64| top + plot_h * (1.0 - v.clamp(0.0, 1.0));
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{}" font-family="sans-serif" font-size="11">"#,
        h + 20.0 * series.len() as f64
    );
    let _ = writeln!(s, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{}" stroke="black"/>"#, top + plot_h);
    let _ = writeln!(s, r#"<line x1="{left}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"#, top + plot_h, w - 20.0);
    for t in 0..=4 {
        let v = t as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{v:.2}</text>"#, left - 6.0, y(v) + 4.0);
    }
    let _ = writeln!(s, r#"<text x="14" y="{:.1}" transform="rotate(-90 14 {:.1})">Exp</text>"#, top + plot_h / 2.0, top + plot_h / 2.0);
    for (fi, f) in fractions.iter().enumerate() {
        let gx = left + group_w * fi as f64 + group_w * 0.1;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}%</text>"#,
            gx + group_w * 0.4,
            top + plot_h + 16.0,
            f * 100.0
        );
        for (si, cells) in series.values().enumerate() {
            let Some(c) = cells.iter().find(|c| c.fraction == *f) else { continue };
            if c.attacked.is_empty() {
                continue;
            }
            let (m, sd) = mean_sd(&c.attacked);
            let x = gx + bar_w * si as f64;
            let _ = writeln!(
                s,
                r#"<rect x="{x:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{}"/>"#,
                y(m),
                bar_w * 0.9,
                top + plot_h - y(m),
                PALETTE[si % PALETTE.len()]
            );
            let cx = x + bar_w * 0.45;
            let _ = writeln!(
                s,
                r#"<line x1="{cx:.1}" y1="{:.1}" x2="{cx:.1}" y2="{:.1}" stroke="black"/>"#,
                y(m - sd),
                y(m + sd)
            );
        }
    }
    for (si, (ds, arch, act, layer, field)) in series.keys().enumerate() {
        let ly = h + 20.0 * si as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{left}" y="{:.1}" width="12" height="12" fill="{}"/><text x="{}" y="{:.1}">{ds} {arch}/{act} layer {layer} {field}</text>"#,
            ly - 10.0,
            PALETTE[si % PALETTE.len()],
            left + 18.0,
            ly
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes the text report to `path` and, if requested, an SVG next to it.
pub fn emit_report(
    results: &[RunResult],
    bounds: Option<&BoundsReport>,
    path: impl AsRef<Path>,
    svg: bool,
) -> Result<()> {
    let path = path.as_ref();
    let mut text = render_text(results);
    if let Some(b) = bounds {
        text.push_str(&b.to_string());
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    if svg {
        let svg_path = path.with_extension("svg");
        std::fs::write(&svg_path, render_svg(results)).map_err(|e| Error::io(&svg_path, e))?;
    }
    Ok(())
}

/// Every bound evaluated on one model and dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    pub dataset: String,
    pub layer: LayerId,
    pub m: usize,
    pub n: usize,
    pub l0: L0Witness,
    pub wl_pair: Option<WlMaxPair>,
    pub node: u64,
    pub node_relu: Option<u64>,
    pub graph: Option<u64>,
    pub first_layer: FirstLayerBound,
    pub homophily: HomophilyBound,
    pub last_layer: LayerId,
    pub last_l0: L0Witness,
    pub p_node: FlipProbabilityBound,
    pub p_graph: Option<FlipProbabilityBound>,
}

pub fn bounds_report(model: &GnnModel, dataset: &GraphDataset, layer: LayerId) -> Result<BoundsReport> {
    let (m, n) = {
        let w = model.weights(layer)?;
        (w.rows(), w.cols())
    };
    let relu = model.stage(layer)?.activation == Activation::Relu;
    let l0 = max_l0_diff(model, dataset, layer)?;
    let wl_pair = wl_max_pair(dataset, layer.mp).ok();
    let inputs = BoundInputs::new(l0.d, m, n).with_e(wl_pair.map_or(0, |p| p.e));
    let stats = dataset_stats(dataset);
    let g = dataset.feature_dim().unwrap_or(stats.label_alphabet_size);
    let m11 = model.weights(LayerId::new(1, 1))?.rows();

    let k = model.depth();
    let last_layer = *model.stages_of(k)?.last().expect("MLP has stages");
    let last_l0 = max_l0_diff(model, dataset, last_layer)?;
    let (lm, ln) = {
        let w = model.weights(last_layer)?;
        (w.rows(), w.cols())
    };
    let last_pair = wl_max_pair(dataset, k).ok();
    let last_inputs = BoundInputs::new(last_l0.d, lm, ln).with_e(last_pair.map_or(0, |p| p.e));
    Ok(BoundsReport {
        dataset: dataset.name.clone(),
        layer,
        m,
        n,
        l0,
        wl_pair,
        node: node_bound(&inputs),
        node_relu: relu.then(|| node_bound(&inputs.with_relu(true))),
        graph: wl_pair.map(|_| graph_bound(&inputs)),
        first_layer: first_layer_bound(g, stats.max_degree, m11, WEIGHT_BITS),
        homophily: homophily_bound(&stats, g, m11, WEIGHT_BITS),
        last_layer,
        last_l0,
        p_node: random_flip_probability(&last_inputs, Level::Node),
        p_graph: last_pair.map(|_| random_flip_probability(&last_inputs, Level::Graph)),
    })
}

fn witness(w: &L0Witness) -> String {
    match w.pair {
        Some((a, b)) => format!("graph {} node {} vs graph {} node {}", a.graph, a.node, b.graph, b.node),
        None => "none".into(),
    }
}

fn prob(p: &FlipProbabilityBound) -> String {
    let linear = p.linear.map_or("underflows".to_string(), |v| format!("{v:.6e}"));
    let flag = if p.degenerate { " (degenerate: n·m ≤ 1)" } else { "" };
    format!("beta = {:.6e}, ln P ≤ {:.6e}, P ≤ {linear}{flag}", p.beta, p.log_bound)
}

impl fmt::Display for BoundsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "## bounds for {} at stage {}", self.dataset, self.layer)?;
        writeln!(f, "m = {}, n = {}, b = {WEIGHT_BITS}, tolerance = {:e}", self.m, self.n, crate::metrics::EPS_MACH)?;
        writeln!(f, "d = {} (witness: {})", self.l0.d, witness(&self.l0))?;
        match self.wl_pair {
            Some(p) => writeln!(f, "e = {} (graphs {} and {})", p.e, p.g, p.h)?,
            None => writeln!(f, "e = undefined (no equal-order pair)")?,
        }
        writeln!(f, "node bound d·m·b = {}", self.node)?;
        if let Some(r) = self.node_relu {
            writeln!(f, "node bound, ReLU sign flips d·m = {r}")?;
        }
        match self.graph {
            Some(g) => writeln!(f, "graph bound e·d·m·b = {g}")?,
            None => writeln!(f, "graph bound undefined")?,
        }
        writeln!(f, "first layer bound m·b·nz = {} (nz = {})", self.first_layer.bound, self.first_layer.nz)?;
        writeln!(
            f,
            "homophily bound m·b·nz_H = {} (nz_H = {:.6}, ceil {}; raw bound {:.3})",
            self.homophily.bound, self.homophily.nz_raw, self.homophily.nz, self.homophily.bound_raw
        )?;
        writeln!(f, "random flips at stage {} (d = {}):", self.last_layer, self.last_l0.d)?;
        writeln!(f, "  node:  {}", prob(&self.p_node))?;
        match &self.p_graph {
            Some(p) => writeln!(f, "  graph: {}", prob(p))?,
            None => writeln!(f, "  graph: undefined")?,
        }
        writeln!(f, "note: the random-flip exponent uses 2^b while the attack bounds use b.")
    }
}
