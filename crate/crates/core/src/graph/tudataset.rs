//! Reader and writer for the TUDataset text format.
//!
//! A dataset `DS` lives in one directory as `DS_A.txt` (directed 1-based edge
//! entries `i, j`), `DS_graph_indicator.txt` (1-based graph id per node),
//! `DS_node_labels.txt` and optionally `DS_graph_labels.txt`. Node attributes
//! and edge labels are ignored.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{GraphDataset, LabelSource, LabeledGraph};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Use node degrees as labels, for datasets that ship without node labels.
    pub degree_labels: bool,
}

pub fn parse_tudataset(dir: impl AsRef<Path>, name: &str) -> Result<GraphDataset> {
    parse_tudataset_with(dir, name, ParseOptions::default())
}

pub fn parse_tudataset_with(
    dir: impl AsRef<Path>,
    name: &str,
    options: ParseOptions,
) -> Result<GraphDataset> {
    let dir = dir.as_ref();
    let file = |suffix: &str| dir.join(format!("{name}_{suffix}.txt"));

    let indicator_path = file("graph_indicator");
    let indicator = read_required(&indicator_path)?;
    let edges_path = file("A");
    let edges_text = read_required(&edges_path)?;
    let labels_path = file("node_labels");

    // node -> graph (both 0-based)
    let mut node_graph = Vec::new();
    let mut graph_offsets = Vec::new();
    for (line_no, fields) in records(&indicator) {
        let id = single_int(&fields, &indicator_path, line_no)?;
        let expected_next = graph_offsets.len() as i64 + 1;
        if id == expected_next {
            graph_offsets.push(node_graph.len());
        } else if id != expected_next - 1 || graph_offsets.is_empty() {
            return Err(Error::format(
                display(&indicator_path),
                line_no,
                format!("graph id {id} breaks the ascending 1-based sequence"),
            ));
        }
        node_graph.push(graph_offsets.len() - 1);
    }
    let total_nodes = node_graph.len();
    let graph_count = graph_offsets.len();
    let node_count = |g: usize| {
        graph_offsets.get(g + 1).copied().unwrap_or(total_nodes) - graph_offsets[g]
    };

    let mut graph_edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); graph_count];
    for (line_no, fields) in records(&edges_text) {
        if fields.len() != 2 {
            return Err(Error::format(
                display(&edges_path),
                line_no,
                format!("expected 2 node ids, found {}", fields.len()),
            ));
        }
        let mut ends = [0usize; 2];
        for (k, f) in fields.iter().enumerate() {
            let id = parse_int(f, &edges_path, line_no)?;
            if id < 1 || id as usize > total_nodes {
                return Err(Error::format(
                    display(&edges_path),
                    line_no,
                    format!("node id {id} outside 1..={total_nodes}"),
                ));
            }
            ends[k] = id as usize - 1;
        }
        let (a, b) = (ends[0], ends[1]);
        let g = node_graph[a];
        if node_graph[b] != g {
            return Err(Error::format(
                display(&edges_path),
                line_no,
                format!("edge ({}, {}) crosses graph boundaries", a + 1, b + 1),
            ));
        }
        if a == b {
            continue;
        }
        let off = graph_offsets[g];
        graph_edges[g].push((a - off, b - off));
    }

    let (labels, source) = if options.degree_labels {
        let mut degree = vec![0usize; total_nodes];
        for (g, edges) in graph_edges.iter().enumerate() {
            let mut unique: Vec<(usize, usize)> =
                edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
            unique.sort_unstable();
            unique.dedup();
            for (a, b) in unique {
                degree[graph_offsets[g] + a] += 1;
                degree[graph_offsets[g] + b] += 1;
            }
        }
        (degree.into_iter().map(|d| d as i64).collect(), LabelSource::Degree)
    } else {
        let text = read_required(&labels_path)?;
        let mut raw = Vec::with_capacity(total_nodes);
        for (line_no, fields) in records(&text) {
            // Multi-column label files keep the first column.
            let value = fields
                .first()
                .ok_or_else(|| Error::format(display(&labels_path), line_no, "empty record"))?;
            raw.push(parse_int(value, &labels_path, line_no)?);
        }
        if raw.len() != total_nodes {
            return Err(Error::format(
                display(&labels_path),
                raw.len(),
                format!("{} labels for {total_nodes} nodes", raw.len()),
            ));
        }
        (raw, LabelSource::File)
    };

    let dense: BTreeMap<i64, usize> = {
        let mut distinct: Vec<i64> = labels.clone();
        distinct.sort_unstable();
        distinct.dedup();
        distinct.into_iter().enumerate().map(|(i, l)| (l, i)).collect()
    };

    let mut graphs = Vec::with_capacity(graph_count);
    for (g, edges) in graph_edges.into_iter().enumerate() {
        let off = graph_offsets[g];
        let n = node_count(g);
        let node_labels = labels[off..off + n].iter().map(|l| dense[l]).collect();
        graphs.push(LabeledGraph::new(n, edges, node_labels)?);
    }

    let class_path = file("graph_labels");
    let class_labels = if class_path.exists() {
        let text = read_required(&class_path)?;
        let mut out = Vec::with_capacity(graph_count);
        for (line_no, fields) in records(&text) {
            out.push(single_int(&fields, &class_path, line_no)?);
        }
        if out.len() != graph_count {
            return Err(Error::format(
                display(&class_path),
                out.len(),
                format!("{} graph labels for {graph_count} graphs", out.len()),
            ));
        }
        Some(out)
    } else {
        None
    };

    let mut dataset = GraphDataset::new(name, graphs)?;
    dataset.class_labels = class_labels;
    dataset.label_source = source;
    Ok(dataset)
}

/// Writes `dataset` in TUDataset layout under `dir`, emitting both orientations of every edge.
pub fn write_tudataset(dataset: &GraphDataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = &dataset.name;
    let mut a = String::new();
    let mut indicator = String::new();
    let mut labels = String::new();
    let mut offset = 0;
    for (g, graph) in dataset.graphs.iter().enumerate() {
        let mut entries: Vec<(usize, usize)> = graph
            .edges()
            .iter()
            .flat_map(|&(u, v)| [(u, v), (v, u)])
            .collect();
        entries.sort_unstable();
        for (u, v) in entries {
            a.push_str(&format!("{}, {}\n", u + offset + 1, v + offset + 1));
        }
        for v in 0..graph.node_count() {
            indicator.push_str(&format!("{}\n", g + 1));
            labels.push_str(&format!("{}\n", graph.label(v)));
        }
        offset += graph.node_count();
    }
    write_file(&dir.join(format!("{name}_A.txt")), &a)?;
    write_file(&dir.join(format!("{name}_graph_indicator.txt")), &indicator)?;
    write_file(&dir.join(format!("{name}_node_labels.txt")), &labels)?;
    if let Some(classes) = &dataset.class_labels {
        let text: String = classes.iter().map(|c| format!("{c}\n")).collect();
        write_file(&dir.join(format!("{name}_graph_labels.txt")), &text)?;
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

fn read_required(path: &PathBuf) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingFile(path.clone()));
    }
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Non-empty lines split on commas and whitespace, with 1-based line numbers.
fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        (!fields.is_empty()).then_some((i + 1, fields))
    })
}

fn parse_int(field: &str, path: &Path, line: usize) -> Result<i64> {
    field
        .parse::<i64>()
        .or_else(|_| {
            // some label files store integral floats such as "1.0"
            field
                .parse::<f64>()
                .ok()
                .filter(|x| x.fract() == 0.0)
                .map(|x| x as i64)
                .ok_or(())
        })
        .map_err(|_| Error::format(display(path), line, format!("'{field}' is not an integer")))
}

fn single_int(fields: &[&str], path: &Path, line: usize) -> Result<i64> {
    match fields {
        [one] => parse_int(one, path, line),
        _ => Err(Error::format(
            display(path),
            line,
            format!("expected one value, found {}", fields.len()),
        )),
    }
}

fn display(path: &Path) -> String {
    path.display().to_string()
}
