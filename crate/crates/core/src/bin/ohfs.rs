use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ohfs::eval::{write_predictions_csv, write_regret_csv, write_reports_csv};
use ohfs::oracles::{expansion_suite, walk_suite};
use ohfs::{
    evaluate, generate_drift_stream, load_stream, regret_decompose, run_baseline, run_learner, save_stream, sweep,
    CenterWeights, DriftKind, DriftSpec, Error, KernelParams, LearnerConfig, Metric, Scenario, Stream, SweepAxis,
};

#[derive(Parser)]
#[command(name = "ohfs", version, about = "Online quantized harmonic function solution for streaming classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the learner over a stream and write predictions plus a report.
    Run {
        #[command(flatten)]
        engine: EngineArgs,
        /// Also evaluate the nearest-neighbor baseline.
        #[arg(long)]
        baseline: bool,
    },
    /// Re-run the learner for each value of one parameter.
    Sweep {
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long, value_enum)]
        axis: Axis,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        values: Vec<f64>,
    },
    /// Write a synthetic drifting stream.
    Generate {
        #[arg(long, default_value = "relocate")]
        drift: DriftKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 500)]
        n_points: usize,
        #[arg(long, default_value_t = 2)]
        classes: usize,
        #[arg(long, default_value_t = 8)]
        dim: usize,
        #[arg(long, default_value_t = 2)]
        segments: usize,
        #[arg(long, default_value_t = 0.05)]
        displacement: f64,
        #[arg(long, default_value_t = 0.01)]
        noise: f64,
        #[arg(long, default_value_t = 1.0)]
        separation: f64,
        #[arg(long, default_value_t = 0.0)]
        outlier_fraction: f64,
        #[arg(long, default_value_t = 5.0)]
        outlier_scale: f64,
        #[arg(long, default_value_t = 4)]
        labeled_per_class: usize,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Decompose the streaming error of a fully labeled stream.
    Regret {
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Run the compact-versus-expanded and random-walk self-checks.
    OracleCheck {
        #[arg(long, default_value_t = 200)]
        graphs: usize,
        #[arg(long, default_value_t = 20)]
        walk_graphs: usize,
        #[arg(long, default_value_t = 1_000_000)]
        walks: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Epsilon,
    #[value(name = "n_g")]
    NG,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricKind {
    Euclidean,
    /// Weighted L2 with radial center weights (square inputs only).
    Weighted,
    /// Light-corrected face distance with radial center weights.
    Face,
}

#[derive(Args)]
struct EngineArgs {
    /// Stream file.
    #[arg(long, short)]
    input: PathBuf,
    /// Directory for the JSON and CSV outputs.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 0.025)]
    sigma: f64,
    #[arg(long, default_value_t = 1e-5)]
    epsilon: f64,
    /// Defaults to 10 * epsilon.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long = "n-g", default_value_t = 500)]
    n_g: usize,
    #[arg(long, value_enum, default_value = "euclidean")]
    metric: MetricKind,
}

impl EngineArgs {
    fn config(&self, dim: usize) -> ohfs::Result<LearnerConfig<f64>> {
        let metric = match self.metric {
            MetricKind::Euclidean => Metric::Euclidean,
            MetricKind::Weighted | MetricKind::Face => {
                let side = (dim as f64).sqrt().round() as usize;
                if side * side != dim {
                    return Err(Error::InvalidParameter(format!("radial weights need a square dimension, got {dim}")));
                }
                let psi = CenterWeights::radial(side, ohfs::metric::DEFAULT_RADIAL_RHO)?;
                if matches!(self.metric, MetricKind::Face) {
                    Metric::Face(psi)
                } else {
                    Metric::WeightedL2(psi)
                }
            }
        };
        let cfg = LearnerConfig::new(dim, metric, KernelParams::new(self.sigma, self.epsilon)?, self.n_g)?;
        match self.gamma {
            Some(g) => cfg.with_gamma(g),
            None => Ok(cfg),
        }
    }

    fn load(&self) -> ohfs::Result<(Stream<f64>, LearnerConfig<f64>)> {
        let stream = load_stream(&self.input)?;
        let config = self.config(stream.dim.max(1))?;
        Ok((stream, config))
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> ohfs::Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Numerical(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn create(path: &Path) -> ohfs::Result<std::io::BufWriter<fs::File>> {
    Ok(std::io::BufWriter::new(fs::File::create(path)?))
}

#[derive(Serialize)]
struct RunSummary {
    learner: ohfs::EvalReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    baseline: Option<ohfs::EvalReport>,
}

fn execute(cli: Cli) -> ohfs::Result<()> {
    match cli.command {
        Command::Run { engine, baseline } => {
            let (stream, config) = engine.load()?;
            fs::create_dir_all(&engine.out_dir)?;
            let out = run_learner(&stream, config.clone())?;
            let learner = evaluate(&stream, &out.predictions)?.with_latencies(&out.latencies);
            write_predictions_csv(&stream, &out, create(&engine.out_dir.join("predictions.csv"))?)?;
            let baseline = if baseline {
                let nn = run_baseline(&stream, &config.metric, &config.kernel)?;
                Some(evaluate(&stream, &nn.predictions)?.with_latencies(&nn.latencies))
            } else {
                None
            };
            let mut rows = vec![learner.clone()];
            rows.extend(baseline.clone());
            write_reports_csv(&rows, create(&engine.out_dir.join("report.csv"))?)?;
            let summary = RunSummary { learner, baseline };
            write_json(&engine.out_dir.join("report.json"), &summary)?;
            println!("{}", serde_json::to_string(&summary).unwrap_or_default());
        }
        Command::Sweep { engine, axis, values } => {
            let (stream, config) = engine.load()?;
            fs::create_dir_all(&engine.out_dir)?;
            let axis = match axis {
                Axis::Epsilon => SweepAxis::Epsilon,
                Axis::NG => SweepAxis::NG,
            };
            let scenario = Scenario { stream, config, gamma_override: engine.gamma };
            let reports = sweep(axis, &values, &scenario)?;
            write_json(&engine.out_dir.join("sweep.json"), &reports)?;
            write_reports_csv(&reports, create(&engine.out_dir.join("sweep.csv"))?)?;
            for r in &reports {
                println!(
                    "{}={} precision={:.4} recall={:.4} mean_ms={:.3}",
                    if axis == SweepAxis::Epsilon { "epsilon" } else { "n_g" },
                    r.axis_value.unwrap_or(f64::NAN),
                    r.precision,
                    r.recall,
                    r.mean_latency_ms
                );
            }
        }
        Command::Generate {
            drift,
            seed,
            n_points,
            classes,
            dim,
            segments,
            displacement,
            noise,
            separation,
            outlier_fraction,
            outlier_scale,
            labeled_per_class,
            output,
        } => {
            let spec = DriftSpec {
                n_points,
                classes,
                dim,
                drift,
                segments,
                displacement,
                noise,
                separation,
                outlier_fraction,
                outlier_scale,
                labeled_per_class,
                seed,
            };
            let stream = generate_drift_stream::<f64>(&spec)?;
            save_stream(&stream, &output)?;
            println!("wrote {} records to {}", stream.records.len(), output.display());
        }
        Command::Regret { engine } => {
            let (stream, config) = engine.load()?;
            fs::create_dir_all(&engine.out_dir)?;
            let report = regret_decompose(&stream.records, config)?;
            write_json(&engine.out_dir.join("regret.json"), &report)?;
            write_regret_csv(&report, create(&engine.out_dir.join("regret.csv"))?)?;
            println!(
                "n={} lhs={:.6} bound={:.6} (hfs={:.6} online={:.6} quant={:.6}) holds={}",
                report.n,
                report.total_lhs,
                report.bound(),
                report.term_hfs,
                report.term_online,
                report.term_quant,
                report.inequality_holds()
            );
        }
        Command::OracleCheck { graphs, walk_graphs, walks, seed, out_dir } => {
            let expansion = expansion_suite(graphs, 1e-10, seed)?;
            let walk = walk_suite(walk_graphs, walks, 4.0, seed)?;
            for s in [&expansion, &walk] {
                println!("{}: {}/{} passed, worst {:.3e}, {:.2}s", s.name, s.passed, s.instances, s.worst, s.seconds);
            }
            if let Some(dir) = out_dir {
                fs::create_dir_all(&dir)?;
                write_json(&dir.join("oracle_check.json"), &[&expansion, &walk])?;
            }
            // the walk suite tolerates one miss in twenty
            let walk_ok = walk.passed as f64 >= 0.95 * walk.instances as f64;
            if !expansion.all_passed() || !walk_ok {
                return Err(Error::Numerical("oracle check failed".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
