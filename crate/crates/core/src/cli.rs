//! The `tactile-hardness` command line.
//!
//! Every failure prints one line `E<code>:<kind>: <message>` to stderr and
//! exits with the code: 2 usage or config, 3 data, 4 divergence.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use plotters::prelude::*;

use crate::config::{Config, ConfigError};
use crate::dataset::{self, Dataset, DatasetError};
use crate::net::{load_checkpoint, save_checkpoint, NetError};
use crate::pipeline::{contact_threshold, select_clip, PipelineError};
use crate::traineval::{
    combined_protocol, evaluate, make_split, read_report_csv, train_from_scratch, SplitMode, TrainError,
};

#[derive(Debug, Parser)]
#[command(name = "tactile-hardness", version, about = "Simulated tactile presses and a hardness regressor")]
pub struct Cli {
    /// TOML overlay on the reference config; must set `run.seed`.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `run.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    /// One training set, scored on every held-out test set.
    Combined,
    UnseenHardness,
    UnseenShape,
    RobotProfile,
    /// Train or evaluate on every usable record.
    All,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the configured dataset into a directory.
    GenData {
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model; writes `model.ckpt` and `loss.csv`.
    Train {
        /// Dataset manifest.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = SplitArg::Combined)]
        split: SplitArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a model on the test sets of a split; writes one CSV per set.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = SplitArg::Combined)]
        split: SplitArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict the hardness of one folder of numbered PNG frames.
    Predict {
        #[arg(long)]
        model: PathBuf,
        sequence: PathBuf,
    },
    /// Build a manifest over recorded frame folders.
    Ingest {
        raw_dir: PathBuf,
        /// CSV with `id,label` rows.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Manifest path, or a directory to write `manifest.json` into.
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw a report scatter (and optionally a loss curve) as SVG.
    Plot {
        report: PathBuf,
        #[arg(long)]
        loss: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl ToString) -> Self {
        CliError {
            code: 2,
            kind: "usage",
            message: message.to_string(),
        }
    }

    pub fn data(kind: &'static str, message: impl ToString) -> Self {
        CliError {
            code: 3,
            kind,
            message: message.to_string(),
        }
    }

    /// The single stderr line.
    pub fn line(&self) -> String {
        let msg: String = self
            .message
            .chars()
            .map(|c| if c == '\n' { ' ' } else { c })
            .collect();
        format!("E{}:{}: {}", self.code, self.kind, msg)
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError {
            code: 2,
            kind: "config",
            message: e.to_string(),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        CliError::data("dataset", e)
    }
}

impl From<NetError> for CliError {
    fn from(e: NetError) -> Self {
        let kind = match e {
            NetError::FutureVersion { .. } | NetError::Checkpoint(_) => "checkpoint",
            _ => "model",
        };
        CliError::data(kind, e)
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let kind = match e {
            PipelineError::Empty => "empty_sequence",
            PipelineError::NoContact { .. } => "no_contact",
            PipelineError::ClipTooShort { .. } => "clip_too_short",
        };
        CliError::data(kind, e)
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Diverged { .. } => CliError {
                code: 4,
                kind: "diverged",
                message: e.to_string(),
            },
            TrainError::EmptySplit(_) => CliError {
                code: 2,
                kind: "empty_split",
                message: e.to_string(),
            },
            TrainError::NoUsableSequences(_) => CliError::data("no_usable_sequences", e),
            TrainError::Net(n) => n.into(),
        }
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::data("io", format!("{}: {e}", path.display()))
}

fn load_config(cli: &Cli) -> Result<Config, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => Config::from_path(p)?,
        None if cli.seed.is_some() => Config::reference().clone(),
        None => return Err(CliError::usage("give --config (with run.seed) or --seed")),
    };
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    Ok(cfg)
}

/// Named index sets for a split: training rows and test sets.
fn split_sets(ds: &Dataset, split: SplitArg, cfg: &Config) -> Result<(Vec<usize>, Vec<(String, Vec<usize>)>), CliError> {
    let mode = |m: SplitMode| -> Result<_, CliError> {
        let s = make_split(&ds.records, m, cfg)?;
        Ok((s.train, vec![(m.as_str().to_string(), s.test)]))
    };
    match split {
        SplitArg::Combined => {
            let p = combined_protocol(&ds.records, cfg)?;
            let mut tests = vec![
                ("unseen_hardness".to_string(), p.unseen_hardness),
                ("unseen_shape".to_string(), p.unseen_shape),
                ("robot".to_string(), p.robot),
                ("complex_holdout".to_string(), p.complex_holdout),
            ];
            if !p.simple_shapes.is_empty() {
                tests.push(("simple_shapes".to_string(), p.simple_shapes));
            }
            Ok((p.train, tests))
        }
        SplitArg::UnseenHardness => mode(SplitMode::UnseenHardness),
        SplitArg::UnseenShape => mode(SplitMode::UnseenShape),
        SplitArg::RobotProfile => mode(SplitMode::RobotProfile),
        SplitArg::All => {
            let all: Vec<usize> = (0..ds.len()).collect();
            if all.is_empty() {
                return Err(TrainError::EmptySplit("all".into()).into());
            }
            Ok((all.clone(), vec![("all".to_string(), all)]))
        }
    }
}

fn tau(cfg: &Config) -> f64 {
    contact_threshold(&cfg.pipeline, cfg.render.noise_sigma)
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(io(path))
}

pub fn loss_csv(curve: &[f64]) -> String {
    let mut s = String::from("iteration,loss\n");
    for (i, l) in curve.iter().enumerate() {
        let _ = writeln!(s, "{},{}", i + 1, l);
    }
    s
}

fn read_loss_csv(path: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::data("csv", format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| CliError::data("csv", e))?;
        let parse = |i: usize| row.get(i).and_then(|s| s.parse::<f64>().ok());
        match (parse(0), parse(1)) {
            (Some(i), Some(l)) => out.push((i, l)),
            _ => return Err(CliError::data("csv", format!("{}: bad loss row", path.display()))),
        }
    }
    Ok(out)
}

fn plot_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::data("plot", format!("{}: {e}", path.display()))
}

/// Prediction against label with the identity line.
pub fn plot_scatter(points: &[(f64, f64)], path: &Path) -> Result<(), CliError> {
    let root = SVGBackend::new(path, (640, 640)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_error(path, e))?;
    let mut chart = ChartBuilder::on(&root)
        .margin(20)
        .x_label_area_size(40)
        .y_label_area_size(40)
        .build_cartesian_2d(0f64..100f64, 0f64..100f64)
        .map_err(|e| plot_error(path, e))?;
    chart
        .configure_mesh()
        .x_desc("label (Shore 00)")
        .y_desc("prediction (Shore 00)")
        .draw()
        .map_err(|e| plot_error(path, e))?;
    chart
        .draw_series(LineSeries::new([(0.0, 0.0), (100.0, 100.0)], &BLACK))
        .map_err(|e| plot_error(path, e))?;
    chart
        .draw_series(points.iter().map(|&p| Circle::new(p, 3, BLUE.mix(0.6).filled())))
        .map_err(|e| plot_error(path, e))?;
    root.present().map_err(|e| plot_error(path, e))
}

pub fn plot_loss(curve: &[(f64, f64)], path: &Path) -> Result<(), CliError> {
    let x_max = curve.last().map_or(1.0, |p| p.0.max(1.0));
    let y_max = curve.iter().map(|p| p.1).fold(0.0, f64::max).max(1e-6);
    let root = SVGBackend::new(path, (800, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_error(path, e))?;
    let mut chart = ChartBuilder::on(&root)
        .margin(20)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(0f64..x_max, 0f64..y_max * 1.05)
        .map_err(|e| plot_error(path, e))?;
    chart
        .configure_mesh()
        .x_desc("iteration")
        .y_desc("loss")
        .draw()
        .map_err(|e| plot_error(path, e))?;
    chart
        .draw_series(LineSeries::new(curve.iter().copied(), &RED))
        .map_err(|e| plot_error(path, e))?;
    root.present().map_err(|e| plot_error(path, e))
}

/// Runs a parsed command. Progress goes to the log; results to stdout.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::GenData { out } => {
            let cfg = load_config(&cli)?;
            let manifest = dataset::write_generated(&cfg, out)?;
            let saturated = manifest.records.iter().filter(|r| r.saturated).count();
            println!(
                "wrote {} sequences ({} saturated) to {}",
                manifest.records.len(),
                saturated,
                out.display()
            );
        }
        Command::Train { data, split, out } => {
            let cfg = load_config(&cli)?;
            let ds = dataset::load_dataset(data)?;
            let (train, _) = split_sets(&ds, *split, &cfg)?;
            let (model, report) = train_from_scratch(&cfg, &ds, &train)?;
            create_dir(out)?;
            save_checkpoint(&model, &out.join("model.ckpt"))?;
            let loss_path = out.join("loss.csv");
            std::fs::write(&loss_path, loss_csv(&report.loss_curve)).map_err(io(&loss_path))?;
            println!(
                "trained on {} sequences ({} rejected); final loss {:.6}",
                report.used,
                report.rejected.len(),
                report.loss_curve.last().copied().unwrap_or(f64::NAN)
            );
        }
        Command::Eval {
            data,
            model,
            split,
            out,
        } => {
            let cfg = load_config(&cli)?;
            let model = load_checkpoint(model)?;
            let ds = dataset::load_dataset(data)?;
            let (_, tests) = split_sets(&ds, *split, &cfg)?;
            create_dir(out)?;
            let mut summary = String::new();
            for (name, idx) in tests {
                let report = evaluate(&model, &ds, &idx, tau(&cfg), &name)?;
                let path = out.join(format!("{name}.csv"));
                report.save_csv(&path).map_err(io(&path))?;
                println!("{name}: {}", report.summary_line());
                let _ = writeln!(summary, "{}", report.describe());
            }
            let path = out.join("summary.txt");
            std::fs::write(&path, summary).map_err(io(&path))?;
        }
        Command::Predict { model, sequence } => {
            let cfg = load_config(&cli)?;
            let model = load_checkpoint(model)?;
            let video = dataset::load_video_dir(sequence)?;
            let clip = select_clip(&video, tau(&cfg))?;
            let h = model.predict(&clip)?;
            let frames: Vec<String> = clip.source_indices.iter().map(|i| i.to_string()).collect();
            println!("shore00={:.2} frames={}", h.value(), frames.join(","));
        }
        Command::Ingest { raw_dir, labels, out } => {
            let manifest = dataset::ingest(raw_dir, labels.as_deref())?;
            if manifest.records.is_empty() {
                log::warn!("{} holds no frame folders", raw_dir.display());
            }
            let path = if out.extension().is_some_and(|e| e == "json") {
                out.clone()
            } else {
                create_dir(out)?;
                out.join("manifest.json")
            };
            manifest.save(&path)?;
            let labelled = manifest.records.iter().filter(|r| r.label.value().is_some()).count();
            println!(
                "ingested {} sequences ({} labelled) into {}",
                manifest.records.len(),
                labelled,
                path.display()
            );
        }
        Command::Plot { report, loss, out } => {
            let rows = read_report_csv(report).map_err(|e| CliError::data("csv", e))?;
            let points: Vec<(f64, f64)> = rows.iter().filter_map(|(_, l, p)| l.map(|l| (l, *p))).collect();
            create_dir(out)?;
            plot_scatter(&points, &out.join("scatter.svg"))?;
            if let Some(loss) = loss {
                plot_loss(&read_loss_csv(loss)?, &out.join("loss.svg"))?;
            }
            println!("wrote plots to {}", out.display());
        }
    }
    Ok(())
}

/// Parses arguments and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("{}", CliError::usage(first).line());
            return 2;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.line());
            e.code
        }
    }
}
