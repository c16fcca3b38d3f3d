use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::faults::{BitField, FlipPopulation};
use crate::graph::{DatasetStats, GraphDataset};
use crate::metrics::{MetricDeltas, MetricReport};
use crate::nn::{Activation, Architecture, GnnModel};

use super::ExperimentConfig;

pub const CSV_SCHEMA: u32 = 1;

/// Column order of schema version 1.
pub const CSV_HEADER: [&str; 35] = [
    "schema",
    "dataset",
    "label_source",
    "architecture",
    "activation",
    "depth",
    "hidden",
    "mlp_depth",
    "gin_eps",
    "layer",
    "field",
    "population",
    "fraction",
    "seed_index",
    "repeat",
    "base_seed",
    "model_seed",
    "run_seed",
    "tolerance",
    "homophily",
    "feature_dim",
    "s_wl",
    "certified_pairs",
    "eligible",
    "applied",
    "clean_exp",
    "attacked_exp",
    "clean_m",
    "attacked_m",
    "clean_s_gnn",
    "attacked_s_gnn",
    "delta_exp",
    "delta_m",
    "delta_s_gnn",
    "error",
];

/// One attack run. Metric columns are `None` on error rows.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub dataset: String,
    pub label_source: String,
    pub architecture: Architecture,
    pub activation: Activation,
    pub depth: usize,
    pub hidden: usize,
    pub mlp_depth: usize,
    pub gin_eps: f32,
    pub layer: String,
    pub field: BitField,
    pub population: FlipPopulation,
    pub fraction: f64,
    pub seed_index: usize,
    pub repeat: usize,
    pub base_seed: u64,
    pub model_seed: u64,
    pub run_seed: u64,
    pub tolerance: f64,
    pub homophily: f64,
    pub feature_dim: usize,
    pub s_wl: f64,
    pub certified_pairs: usize,
    pub eligible: Option<usize>,
    pub applied: Option<usize>,
    pub clean_exp: Option<f64>,
    pub attacked_exp: Option<f64>,
    pub clean_m: Option<f64>,
    pub attacked_m: Option<f64>,
    pub clean_s_gnn: Option<f64>,
    pub attacked_s_gnn: Option<f64>,
    pub delta_exp: Option<f64>,
    pub delta_m: Option<f64>,
    pub delta_s_gnn: Option<f64>,
    pub error: Option<String>,
}

impl RunResult {
    pub(crate) fn new(
        config: &ExperimentConfig,
        dataset: &GraphDataset,
        stats: &DatasetStats,
        s_wl: f64,
        model: &GnnModel,
    ) -> Self {
        RunResult {
            dataset: dataset.name.clone(),
            label_source: dataset.label_source.to_string(),
            architecture: model.spec.architecture,
            activation: model.spec.activation,
            depth: config.depth,
            hidden: config.hidden,
            mlp_depth: model.spec.stages_per_layer(),
            gin_eps: config.gin_eps,
            layer: String::new(),
            field: BitField::Sign,
            population: config.population,
            fraction: 0.0,
            seed_index: 0,
            repeat: 0,
            base_seed: config.base_seed,
            model_seed: model.seed,
            run_seed: 0,
            tolerance: config.tolerance,
            homophily: stats.homophily,
            feature_dim: dataset.feature_dim().unwrap_or(0),
            s_wl,
            certified_pairs: 0,
            eligible: None,
            applied: None,
            clean_exp: None,
            attacked_exp: None,
            clean_m: None,
            attacked_m: None,
            clean_s_gnn: None,
            attacked_s_gnn: None,
            delta_exp: None,
            delta_m: None,
            delta_s_gnn: None,
            error: None,
        }
    }

    pub(crate) fn set_metrics(&mut self, clean: &MetricReport, attacked: &MetricReport, d: &MetricDeltas) {
        self.certified_pairs = clean.exp.certified_pairs;
        self.clean_exp = Some(clean.exp.value);
        self.attacked_exp = Some(attacked.exp.value);
        self.clean_m = Some(clean.m_cumulative);
        self.attacked_m = Some(attacked.m_cumulative);
        self.clean_s_gnn = Some(clean.s_gnn_cumulative);
        self.attacked_s_gnn = Some(attacked.s_gnn_cumulative);
        self.delta_exp = Some(d.exp);
        self.delta_m = Some(d.m_cumulative);
        self.delta_s_gnn = Some(d.s_gnn_cumulative);
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    pub(crate) fn sort_key(&self) -> (u8, u8, usize, String, u8, u64, usize) {
        (
            self.architecture.code(),
            self.activation.code(),
            self.seed_index,
            self.layer.clone(),
            self.field.code(),
            self.fraction.to_bits(),
            self.repeat,
        )
    }

    fn to_record(&self) -> Vec<String> {
        fn opt<T: ToString>(v: &Option<T>) -> String {
            v.as_ref().map(T::to_string).unwrap_or_default()
        }
        vec![
            CSV_SCHEMA.to_string(),
            self.dataset.clone(),
            self.label_source.clone(),
            self.architecture.to_string(),
            self.activation.to_string(),
            self.depth.to_string(),
            self.hidden.to_string(),
            self.mlp_depth.to_string(),
            self.gin_eps.to_string(),
            self.layer.clone(),
            self.field.to_string(),
            self.population.to_string(),
            self.fraction.to_string(),
            self.seed_index.to_string(),
            self.repeat.to_string(),
            self.base_seed.to_string(),
            self.model_seed.to_string(),
            self.run_seed.to_string(),
            self.tolerance.to_string(),
            self.homophily.to_string(),
            self.feature_dim.to_string(),
            self.s_wl.to_string(),
            self.certified_pairs.to_string(),
            opt(&self.eligible),
            opt(&self.applied),
            opt(&self.clean_exp),
            opt(&self.attacked_exp),
            opt(&self.clean_m),
            opt(&self.attacked_m),
            opt(&self.clean_s_gnn),
            opt(&self.attacked_s_gnn),
            opt(&self.delta_exp),
            opt(&self.delta_m),
            opt(&self.delta_s_gnn),
            self.error.clone().unwrap_or_default(),
        ]
    }

    fn from_record(r: &csv::StringRecord, line: usize) -> Result<Self> {
        let err = |m: String| Error::format("results csv", line, m);
        let get = |i: usize| r.get(i).unwrap_or("");
        fn req<T: std::str::FromStr>(v: &str, col: &str, line: usize) -> Result<T> {
            v.parse()
                .map_err(|_| Error::format("results csv", line, format!("bad {col} '{v}'")))
        }
        fn opt<T: std::str::FromStr>(v: &str, col: &str, line: usize) -> Result<Option<T>> {
            if v.is_empty() {
                Ok(None)
            } else {
                req(v, col, line).map(Some)
            }
        }
        if r.len() != CSV_HEADER.len() {
            return Err(err(format!("expected {} columns, found {}", CSV_HEADER.len(), r.len())));
        }
        let schema: u32 = req(get(0), "schema", line)?;
        if schema != CSV_SCHEMA {
            return Err(err(format!("unsupported schema {schema}")));
        }
        let c = |i: usize| (get(i), CSV_HEADER[i]);
        macro_rules! req {
            ($i:expr) => {{
                let (v, n) = c($i);
                req(v, n, line)?
            }};
        }
        macro_rules! opt {
            ($i:expr) => {{
                let (v, n) = c($i);
                opt(v, n, line)?
            }};
        }
        Ok(RunResult {
            dataset: get(1).to_string(),
            label_source: get(2).to_string(),
            architecture: req!(3),
            activation: req!(4),
            depth: req!(5),
            hidden: req!(6),
            mlp_depth: req!(7),
            gin_eps: req!(8),
            layer: get(9).to_string(),
            field: req!(10),
            population: req!(11),
            fraction: req!(12),
            seed_index: req!(13),
            repeat: req!(14),
            base_seed: req!(15),
            model_seed: req!(16),
            run_seed: req!(17),
            tolerance: req!(18),
            homophily: req!(19),
            feature_dim: req!(20),
            s_wl: req!(21),
            certified_pairs: req!(22),
            eligible: opt!(23),
            applied: opt!(24),
            clean_exp: opt!(25),
            attacked_exp: opt!(26),
            clean_m: opt!(27),
            attacked_m: opt!(28),
            clean_s_gnn: opt!(29),
            attacked_s_gnn: opt!(30),
            delta_exp: opt!(31),
            delta_m: opt!(32),
            delta_s_gnn: opt!(33),
            error: Some(get(34).to_string()).filter(|s| !s.is_empty()),
        })
    }
}

/// Writes the header and one line per result.
pub fn write_csv<W: Write>(results: &[RunResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io {
        path: "<csv>".into(),
        source: e.into(),
    };
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in results {
        w.write_record(r.to_record()).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn emit_csv(results: &[RunResult], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(results, std::io::BufWriter::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<RunResult>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rd
        .headers()
        .map_err(|e| Error::format("results csv", 1, e.to_string()))?
        .clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::format("results csv", 1, "unexpected header"));
    }
    rd.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec.map_err(|e| Error::format("results csv", i + 2, e.to_string()))?;
            RunResult::from_record(&rec, i + 2)
        })
        .collect()
}
