//! `flipwl` command-line tool.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, ErrorKind, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use flipwl::faults::FlipTarget;
use flipwl::graph::dataset_stats;
use flipwl::harness::{
    bounds_report, correlate_results, emit_csv, emit_report, load_dataset, model_seed, read_csv,
    render_svg, render_text, run_experiment, ExperimentConfig, RunResult,
};
use flipwl::nn::{Activation, Architecture, ModelSpec};
use flipwl::wl::wl_subdivision;
use flipwl::{Error, LayerId};

#[derive(Parser)]
#[command(name = "flipwl", version, about = "Bit-flip attacks on the WL expressivity of untrained GNNs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dataset statistics of a TUDataset directory.
    Stats {
        dir: PathBuf,
        name: String,
        /// Use node degrees as labels.
        #[arg(long)]
        degree_labels: bool,
    },
    /// WL distinct-color counts and subdivision ratios.
    Wl {
        dir: PathBuf,
        name: String,
        #[arg(long, default_value_t = 3)]
        iters: usize,
        #[arg(long)]
        degree_labels: bool,
    },
    /// Evaluate the bit-flip bounds on a freshly initialized model.
    Bounds {
        dir: PathBuf,
        name: String,
        #[arg(long, default_value = "gin")]
        arch: Architecture,
        #[arg(long, default_value_t = 64)]
        hidden: usize,
        /// Stage `j.i`; a bare `j` means stage `j.1`.
        #[arg(long, default_value = "1.1")]
        layer: FlipTarget,
        #[arg(long, default_value = "relu")]
        activation: Activation,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long, default_value_t = 2)]
        mlp_depth: usize,
        /// Model seed index, hashed with base seed 0 as in `attack`.
        #[arg(long, default_value_t = 0)]
        seed: usize,
        #[arg(long)]
        degree_labels: bool,
    },
    /// Run a fault-injection sweep described by a config file.
    Attack { config: PathBuf },
    /// Correlations of dataset properties and metric deltas with delta Exp.
    Correlate { results: PathBuf },
    /// Text report (and optionally an SVG chart) from a results CSV.
    Report {
        results: PathBuf,
        /// Write an SVG chart to this path.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Lib(Error),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(text) => {
            let mut stdout = std::io::stdout().lock();
            match stdout.write_all(text.as_bytes()).and_then(|()| stdout.flush()) {
                // a closed pipe (e.g. `| head`) is not a failure
                Err(e) if e.kind() != ErrorKind::BrokenPipe => {
                    eprintln!("internal error: cannot write output: {e}");
                    ExitCode::from(3)
                }
                _ => ExitCode::SUCCESS,
            }
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) => 1,
                e if e.is_data_error() => 2,
                _ => 3,
            })
        }
        Err(Failure::Internal(m)) => {
            eprintln!("internal error: {m}");
            ExitCode::from(3)
        }
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Failure {
    Failure::Lib(Error::Io { path: path.into(), source })
}

/// Runs one subcommand and returns the text for stdout.
fn run(command: Command) -> Result<String, Failure> {
    let mut out = String::new();
    match command {
        Command::Stats { dir, name, degree_labels } => {
            let ds = load_dataset(&dir, &name, degree_labels)?;
            let s = dataset_stats(&ds);
            out = format!(
                "dataset            {}\n\
                 label source       {}\n\
                 graphs             {}\n\
                 avg nodes          {:.2}\n\
                 avg edges          {:.2}\n\
                 homophily H_D      {:.4}\n\
                 connection P_D     {:.4}\n\
                 max degree         {}\n\
                 label alphabet g   {}\n",
                ds.name,
                ds.label_source,
                s.graph_count,
                s.avg_nodes,
                s.avg_edges,
                s.homophily,
                s.connect_prob,
                s.max_degree,
                s.label_alphabet_size
            );
        }
        Command::Wl { dir, name, iters, degree_labels } => {
            let ds = load_dataset(&dir, &name, degree_labels)?;
            let s = wl_subdivision(&ds, iters);
            writeln!(out, "{:>4} {:>14} {:>12}", "t", "mean colors", "S_WL").unwrap();
            for t in 0..=iters {
                let mean = s.distinct_counts.iter().map(|c| c[t] as f64).sum::<f64>() / ds.len().max(1) as f64;
                let ratio = if t == 0 { "-".to_string() } else { format!("{:.6}", s.subdivision_ratios[t - 1]) };
                writeln!(out, "{t:>4} {mean:>14.4} {ratio:>12}").unwrap();
            }
            writeln!(out, "cumulative S_WL = {:.6}", s.cumulative).unwrap();
        }
        Command::Bounds { dir, name, arch, hidden, layer, activation, depth, mlp_depth, seed, degree_labels } => {
            let ds = load_dataset(&dir, &name, degree_labels)?;
            let g = ds
                .feature_dim()
                .ok_or_else(|| Failure::Internal("encoded dataset has no features".into()))?;
            let model = ModelSpec::new(arch, g, hidden, depth, activation)
                .with_mlp_depth(mlp_depth)
                .init(model_seed(0, seed))?;
            let stage = match layer {
                FlipTarget::Stage(id) => id,
                FlipTarget::Mlp(j) => LayerId::new(j, 1),
            };
            model.stage(stage).map_err(|e| Failure::Usage(e.to_string()))?;
            out = bounds_report(&model, &ds, stage)?.to_string();
        }
        Command::Attack { config } => out = attack(&config)?,
        Command::Correlate { results } => {
            out = correlate_results(&read_results(&results)?)?.to_string();
        }
        Command::Report { results, svg } => {
            let rows = read_results(&results)?;
            out = render_text(&rows);
            if let Some(path) = svg {
                std::fs::write(&path, render_svg(&rows)).map_err(|e| io_error(&path, e))?;
            }
        }
    }
    Ok(out)
}

fn read_results(path: &Path) -> Result<Vec<RunResult>, Failure> {
    let file = File::open(path).map_err(|e| io_error(path, e))?;
    Ok(read_csv(BufReader::new(file))?)
}

fn attack(path: &Path) -> Result<String, Failure> {
    let config = ExperimentConfig::load(path)?;
    let results = run_experiment(&config)?;
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    emit_csv(&results, dir.join("results.csv"))?;
    let echo = dir.join("config.txt");
    std::fs::write(&echo, config.to_text()).map_err(|e| io_error(&echo, e))?;

    // bounds for the first configured model at the first targeted stage
    let ds = load_dataset(&config.dataset_path, &config.dataset_name, config.degree_labels)?;
    let g = ds.feature_dim().unwrap_or(1);
    let model = ModelSpec::new(config.architectures[0], g, config.hidden, config.depth, config.activations[0])
        .with_mlp_depth(config.mlp_depth)
        .with_gin_eps(config.gin_eps)
        .init(model_seed(config.base_seed, 0))?;
    let stage = config.target_layers[0].stages(&model)?[0];
    let bounds = bounds_report(&model, &ds, stage)?;
    emit_report(&results, Some(&bounds), dir.join("report.txt"), config.svg)?;

    let failed = results.iter().filter(|r| !r.is_ok()).count();
    Ok(format!(
        "{} runs ({failed} failed) written to {}\n",
        results.len(),
        dir.join("results.csv").display()
    ))
}
