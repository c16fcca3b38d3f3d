//! Seeded fault-injection sweeps, CSV output, reports and correlation analysis.

mod config;
mod correlate;
mod report;
mod results;

pub use config::{ExperimentConfig, DEFAULT_FRACTIONS};
pub use correlate::{correlate_results, CorrelationRow, CorrelationTable};
pub use report::{bounds_report, emit_report, render_svg, render_text, BoundsReport};
pub use results::{emit_csv, read_csv, write_csv, RunResult, CSV_HEADER, CSV_SCHEMA};

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::faults::{inject_random, FlipPlan};
use crate::graph::{dataset_stats, one_hot_encode, parse_tudataset_with, GraphDataset, ParseOptions};
use crate::metrics::{metric_deltas, MetricContext, MetricReport};
use crate::nn::{GnnModel, ModelSpec};

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn seed_hash(parts: &[u64]) -> u64 {
    parts.iter().fold(0, |h, &p| mix(h ^ p))
}

/// Seed of the `seed_index`-th model; shared by every architecture and activation.
pub fn model_seed(base_seed: u64, seed_index: usize) -> u64 {
    seed_hash(&[base_seed, seed_index as u64])
}

/// Parses a TUDataset directory and one-hot encodes its labels.
pub fn load_dataset(dir: impl AsRef<Path>, name: &str, degree_labels: bool) -> Result<GraphDataset> {
    let raw = parse_tudataset_with(dir, name, ParseOptions { degree_labels })?;
    one_hot_encode(&raw)
}

struct Job<'a> {
    model: &'a GnnModel,
    clean: &'a Result<MetricReport>,
    seed_index: usize,
    target: crate::faults::FlipTarget,
    field: crate::faults::BitField,
    fraction: f64,
    repeat: usize,
}

/// Runs the sweep on an already loaded, one-hot encoded dataset.
pub fn run_on_dataset(config: &ExperimentConfig, dataset: &GraphDataset) -> Result<Vec<RunResult>> {
    config.validate()?;
    let g = dataset
        .feature_dim()
        .ok_or_else(|| Error::Encoding("dataset has no node features".into()))?;
    let ctx = MetricContext::new(dataset, config.depth, config.tolerance);
    let stats = dataset_stats(dataset);

    let mut specs = Vec::new();
    for &arch in &config.architectures {
        for &act in &config.activations {
            for seed_index in 0..config.seeds {
                specs.push((arch, act, seed_index));
            }
        }
    }
    let models: Vec<(GnnModel, Result<MetricReport>)> = specs
        .par_iter()
        .map(|&(arch, act, seed_index)| {
            let model = ModelSpec::new(arch, g, config.hidden, config.depth, act)
                .with_mlp_depth(config.mlp_depth)
                .with_gin_eps(config.gin_eps)
                .init(model_seed(config.base_seed, seed_index))?;
            let clean = ctx.evaluate(&model);
            Ok((model, clean))
        })
        .collect::<Result<_>>()?;

    let mut jobs = Vec::new();
    for ((model, clean), &(_, _, seed_index)) in models.iter().zip(&specs) {
        for &target in &config.target_layers {
            for &field in &config.bit_fields {
                for &fraction in &config.fractions {
                    for repeat in 0..config.repeats {
                        jobs.push(Job {
                            model,
                            clean,
                            seed_index,
                            target,
                            field,
                            fraction,
                            repeat,
                        });
                    }
                }
            }
        }
    }

    let mut results: Vec<RunResult> = jobs
        .par_iter()
        .map(|job| {
            let run_seed = seed_hash(&[
                config.base_seed,
                job.seed_index as u64,
                job.fraction.to_bits(),
                job.repeat as u64,
                target_code(job.target),
                job.field.code() as u64,
            ]);
            let mut row = RunResult::new(config, dataset, &stats, ctx.wl.cumulative, job.model);
            row.layer = job.target.to_string();
            row.field = job.field;
            row.fraction = job.fraction;
            row.seed_index = job.seed_index;
            row.repeat = job.repeat;
            row.run_seed = run_seed;
            let outcome = (|| -> Result<()> {
                let clean = job.clean.as_ref().map_err(|e| Error::Metric(e.to_string()))?;
                let mut attacked = job.model.clone();
                let mut plan = FlipPlan::new(job.target, job.field, job.fraction, run_seed);
                plan.population = config.population;
                let record = inject_random(&mut attacked, &plan)?;
                row.eligible = Some(record.eligible_count);
                row.applied = Some(record.applied_count);
                let after = ctx.evaluate(&attacked)?;
                let deltas = metric_deltas(clean, &after)?;
                row.set_metrics(clean, &after, &deltas);
                Ok(())
            })();
            if let Err(e) = outcome {
                row.error = Some(e.to_string());
            }
            row
        })
        .collect();
    results.sort_by_key(RunResult::sort_key);
    Ok(results)
}

fn target_code(t: crate::faults::FlipTarget) -> u64 {
    match t {
        crate::faults::FlipTarget::Mlp(j) => (j as u64) << 16,
        crate::faults::FlipTarget::Stage(id) => ((id.mp as u64) << 16) | id.stage as u64,
    }
}

/// Loads the configured dataset and runs the sweep.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunResult>> {
    let dataset = load_dataset(&config.dataset_path, &config.dataset_name, config.degree_labels)?;
    run_on_dataset(config, &dataset)
}
