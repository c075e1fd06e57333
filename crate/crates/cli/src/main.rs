//! `cjs`: command-line driver for compact joint subspace domain adaptation.
//!
//! Settings resolve in three layers: built-in defaults, then an optional TOML
//! config file (`--config`), then command-line flags.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cjs_core::classifier::LinearOvrModel;
use cjs_core::data::{load_dataset, save_dataset, LoadOptions};
use cjs_core::distance::{class_distance_matrix, source_subspaces, SigmaMode};
use cjs_core::eval::evaluate;
use cjs_core::pipeline::{evaluate_datasets, run_once, sweep, sweep_csv, write_report, DataSource, PipelineConfig, SweepParam};
use cjs_core::synth::{synth_generate, SynthParams};
use cjs_core::Error;

#[derive(Parser)]
#[command(name = "cjs", version, about = "Unsupervised domain adaptation with compact joint subspaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full adaptation protocol and write a JSON report.
    Run {
        #[command(flatten)]
        opts: PipelineOpts,
        /// Print a summary table to stdout.
        #[arg(long)]
        table: bool,
    },
    /// Repeat the protocol over values of gamma or N and emit CSV.
    Sweep {
        #[command(flatten)]
        opts: PipelineOpts,
        /// Parameter to vary: `gamma` or `N`.
        #[arg(long)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<usize>,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Write a synthetic two-domain benchmark as CSV files.
    Synth(SynthOpts),
    /// Run one adaptation pass and save the resulting classifier.
    Train {
        #[command(flatten)]
        opts: PipelineOpts,
        #[arg(long)]
        model: PathBuf,
    },
    /// Classify samples with a saved classifier.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        /// Ground truth; when given, accuracy is printed.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        one_based_labels: bool,
        #[arg(long)]
        l2_normalize: bool,
        /// One predicted label per line; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump the source-class × target-class subspace distance matrix as CSV.
    Distances {
        #[command(flatten)]
        opts: PipelineOpts,
        /// Target samples per subspace piece; 0 uses whole classes. Defaults to N.
        #[arg(long)]
        chunk: Option<usize>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Args, Default)]
struct PipelineOpts {
    /// TOML file with pipeline settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Source domain as `FEATURES[,LABELS]`; repeat to merge several.
    #[arg(long = "source")]
    sources: Vec<String>,
    /// Target domain as `FEATURES[,LABELS]`; repeat to merge several.
    #[arg(long = "target")]
    targets: Vec<String>,
    #[arg(long)]
    gamma: Option<usize>,
    /// Samples per anchor subspace.
    #[arg(long = "anchor-size", visible_alias = "N")]
    anchor_size: Option<usize>,
    /// `median` or a positive number.
    #[arg(long)]
    sigma: Option<SigmaMode>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    reg_c: Option<f64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    one_based_labels: bool,
    #[arg(long)]
    l2_normalize: bool,
    /// Also score a source-only one-vs-rest SVM.
    #[arg(long)]
    baseline: bool,
    /// Report destination.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SynthOpts {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    subspace_dim: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    /// Source-to-target rotation in radians.
    #[arg(long)]
    angle: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    offset: Option<f64>,
    #[arg(long)]
    spread: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_source(spec: &str) -> DataSource {
    match spec.split_once(',') {
        Some((features, labels)) => DataSource { features: features.into(), labels: Some(labels.into()) },
        None => DataSource { features: spec.into(), labels: None },
    }
}

impl PipelineOpts {
    fn resolve(&self) -> Result<PipelineConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        if !self.sources.is_empty() {
            cfg.sources = self.sources.iter().map(|s| parse_source(s)).collect();
        }
        if !self.targets.is_empty() {
            cfg.targets = self.targets.iter().map(|s| parse_source(s)).collect();
        }
        macro_rules! set {
            ($($field:ident),*) => { $(if let Some(v) = self.$field.clone() { cfg.$field = v; })* };
        }
        set!(gamma, anchor_size, sigma, rho, mu, tol, max_iter, reg_c, runs, seed);
        if self.classes.is_some() {
            cfg.classes = self.classes;
        }
        if self.output.is_some() {
            cfg.output = self.output.clone();
        }
        cfg.one_based_labels |= self.one_based_labels;
        cfg.l2_normalize |= self.l2_normalize;
        cfg.baseline |= self.baseline;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(command: Command) -> Result<(), Error> {
    match command {
        Command::Run { opts, table } => {
            let cfg = opts.resolve()?;
            let (source, target) = cfg.load_data()?;
            let report = evaluate_datasets(&source, &target, &cfg)?;
            match &cfg.output {
                Some(path) => write_report(&report, path)?,
                None if !table => println!("{}", report.to_json()),
                None => {}
            }
            if table {
                print!("{}", report.render_table());
            }
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
        }
        Command::Sweep { opts, param, values, csv } => {
            let cfg = opts.resolve()?;
            let (source, target) = cfg.load_data()?;
            let rows = sweep(&source, &target, &cfg, param, &values)?;
            write_or_print(csv.as_deref(), &sweep_csv(param, &rows))?;
        }
        Command::Synth(o) => {
            let d = SynthParams::default();
            let params = SynthParams {
                classes: o.classes.unwrap_or(d.classes),
                dim: o.dim.unwrap_or(d.dim),
                subspace_dim: o.subspace_dim.unwrap_or(d.subspace_dim),
                samples_per_class: o.samples.unwrap_or(d.samples_per_class),
                angle: o.angle.unwrap_or(d.angle),
                noise: o.noise.unwrap_or(d.noise),
                offset: o.offset.unwrap_or(d.offset),
                spread: o.spread.unwrap_or(d.spread),
                seed: o.seed.unwrap_or(d.seed),
            };
            let (source, target) = synth_generate(&params)?;
            fs::create_dir_all(&o.out).map_err(|e| Error::io(&o.out, e))?;
            for (name, set) in [("source", &source), ("target", &target)] {
                let features = o.out.join(format!("{name}_features.csv"));
                let labels = o.out.join(format!("{name}_labels.csv"));
                save_dataset(set, &features, Some(&labels))?;
            }
            println!("wrote {} source and {} target samples to {}", source.len(), target.len(), o.out.display());
        }
        Command::Train { opts, model } => {
            let cfg = opts.resolve()?;
            let (source, target) = cfg.load_data()?;
            let classes = cfg.class_count(&source);
            let sources = source_subspaces(&source, classes, cfg.rank_tol)?;
            let outcome = run_once(&source, &target, &sources, &cfg, cfg.seed)?;
            outcome.model.save(&model)?;
            eprintln!(
                "trained on {} anchors (labeling {} iterations); model saved to {}",
                outcome.anchors.len(),
                outcome.soft.iterations,
                model.display()
            );
        }
        Command::Predict { model, features, labels, one_based_labels, l2_normalize, out } => {
            let model = LinearOvrModel::load(&model)?;
            let options = LoadOptions { one_based_labels, l2_normalize };
            let data = load_dataset(&features, labels.as_deref(), "input", options)?;
            let predictions = model.predict(data.features())?;
            let text: String = predictions.iter().map(|p| format!("{p}\n")).collect();
            write_or_print(out.as_deref(), &text)?;
            if let Some(truth) = data.labels() {
                let e = evaluate(&predictions, truth, model.classes())?;
                eprintln!("accuracy: {:.2} %", 100.0 * e.accuracy);
            }
        }
        Command::Distances { opts, chunk, csv } => {
            let cfg = opts.resolve()?;
            let (source, target) = cfg.load_data()?;
            let classes = cfg.class_count(&source);
            let chunk = match chunk.unwrap_or(cfg.anchor_size) {
                0 => None,
                n => Some(n),
            };
            let d = class_distance_matrix(&source, &target, classes, chunk, cfg.rank_tol)?;
            let mut text = String::from("source_class");
            for j in 0..classes {
                text.push_str(&format!(",target_{j}"));
            }
            text.push('\n');
            for i in 0..classes {
                text.push_str(&i.to_string());
                for j in 0..classes {
                    text.push_str(&format!(",{}", d[(i, j)]));
                }
                text.push('\n');
            }
            write_or_print(csv.as_deref(), &text)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
