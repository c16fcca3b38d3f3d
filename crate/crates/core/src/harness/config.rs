use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::faults::{BitField, FlipPopulation, FlipTarget};
use crate::metrics::EPS_MACH;
use crate::nn::{Activation, Architecture};

pub const DEFAULT_FRACTIONS: [f64; 12] = [
    0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95,
];

/// Sweep configuration, read from flat `key = value` text.
///
/// List-valued keys take comma-separated values. Lines starting with `#` are
/// comments. Relative `dataset_path` and `output_dir` values resolve against
/// the directory of the config file.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset_path: PathBuf,
    pub dataset_name: String,
    pub architectures: Vec<Architecture>,
    pub activations: Vec<Activation>,
    pub depth: usize,
    pub hidden: usize,
    pub mlp_depth: usize,
    pub gin_eps: f32,
    pub target_layers: Vec<FlipTarget>,
    pub bit_fields: Vec<BitField>,
    pub fractions: Vec<f64>,
    pub seeds: usize,
    pub repeats: usize,
    pub base_seed: u64,
    pub tolerance: f64,
    pub output_dir: PathBuf,
    pub population: FlipPopulation,
    pub degree_labels: bool,
    pub svg: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset_path: PathBuf::from("."),
            dataset_name: String::new(),
            architectures: vec![Architecture::Gin],
            activations: vec![Activation::Relu],
            depth: 3,
            hidden: 64,
            mlp_depth: 2,
            gin_eps: 0.0,
            target_layers: vec![FlipTarget::Mlp(1)],
            bit_fields: vec![BitField::Sign],
            fractions: DEFAULT_FRACTIONS.to_vec(),
            seeds: 5,
            repeats: 5,
            base_seed: 0,
            tolerance: EPS_MACH,
            output_dir: PathBuf::from("out"),
            population: FlipPopulation::Eligible,
            degree_labels: false,
            svg: false,
        }
    }
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    let items = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| Error::Config(format!("invalid value '{s}' for {key}")))
        })
        .collect::<Result<Vec<T>>>()?;
    if items.is_empty() {
        return Err(Error::Config(format!("{key} needs at least one value")));
    }
    Ok(items)
}

fn one<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for {key}")))
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean '{value}' for {key}"))),
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut c = ExperimentConfig::default();
        c.output_dir = base_dir.join(&c.output_dir);
        let mut have_path = false;
        let mut have_name = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value'", i + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "dataset_path" => {
                    c.dataset_path = base_dir.join(value);
                    have_path = true;
                }
                "dataset_name" => {
                    c.dataset_name = value.to_string();
                    have_name = true;
                }
                "architecture" | "architectures" => c.architectures = list(key, value)?,
                "activation" | "activations" => c.activations = list(key, value)?,
                "depth" => c.depth = one(key, value)?,
                "hidden" => c.hidden = one(key, value)?,
                "mlp_depth" => c.mlp_depth = one(key, value)?,
                "gin_eps" => c.gin_eps = one(key, value)?,
                "target_layers" | "target_layer" => c.target_layers = list(key, value)?,
                "bit_fields" | "bit_field" => c.bit_fields = list(key, value)?,
                "fractions" => c.fractions = list(key, value)?,
                "seeds" => c.seeds = one(key, value)?,
                "repeats" => c.repeats = one(key, value)?,
                "base_seed" => c.base_seed = one(key, value)?,
                "tolerance" => c.tolerance = one(key, value)?,
                "output_dir" => c.output_dir = base_dir.join(value),
                "population" => c.population = one(key, value)?,
                "degree_labels" => c.degree_labels = flag(key, value)?,
                "svg" => c.svg = flag(key, value)?,
                other => {
                    return Err(Error::Config(format!("line {}: unknown key '{other}'", i + 1)))
                }
            }
        }
        if !have_path || !have_name {
            return Err(Error::Config("dataset_path and dataset_name are required".into()));
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if let Some(f) = self.fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
            return bad(format!("fraction {f} outside (0, 1]"));
        }
        if self.seeds == 0 || self.repeats == 0 {
            return bad("seeds and repeats must be at least 1".into());
        }
        if self.depth == 0 || self.hidden == 0 || self.mlp_depth == 0 {
            return bad("depth, hidden and mlp_depth must be positive".into());
        }
        if self.tolerance.is_nan() || self.tolerance < 0.0 {
            return bad(format!("tolerance {} must be non-negative", self.tolerance));
        }
        if self.architectures.is_empty()
            || self.activations.is_empty()
            || self.target_layers.is_empty()
            || self.bit_fields.is_empty()
            || self.fractions.is_empty()
        {
            return bad("list-valued keys need at least one value".into());
        }
        Ok(())
    }

    /// Canonical text form; parsing it back yields the same config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("dataset_path", self.dataset_path.display().to_string());
        kv("dataset_name", self.dataset_name.clone());
        kv("architecture", join(&self.architectures));
        kv("activation", join(&self.activations));
        kv("depth", self.depth.to_string());
        kv("hidden", self.hidden.to_string());
        kv("mlp_depth", self.mlp_depth.to_string());
        kv("gin_eps", self.gin_eps.to_string());
        kv("target_layers", join(&self.target_layers));
        kv("bit_fields", join(&self.bit_fields));
        kv("fractions", join(&self.fractions));
        kv("seeds", self.seeds.to_string());
        kv("repeats", self.repeats.to_string());
        kv("base_seed", self.base_seed.to_string());
        kv("tolerance", self.tolerance.to_string());
        kv("output_dir", self.output_dir.display().to_string());
        kv("population", self.population.to_string());
        kv("degree_labels", self.degree_labels.to_string());
        kv("svg", self.svg.to_string());
        s
    }
}
