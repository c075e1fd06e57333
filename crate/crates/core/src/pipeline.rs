//! End-to-end adaptation runs: anchor mining, anchor labeling, joint
//! subspace assembly, classifier training and scoring, repeated over seeds.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{assemble_joint_subspaces, train_ovr, train_ovr_svm, LinearOvrModel, SvmParams};
use crate::clustering::{build_anchor_subspaces, AnchorSubspace, ClusteringParams};
use crate::data::{load_dataset, merge_domains, DomainDataset, LoadOptions};
use crate::distance::{build_affinities, source_subspaces, AffinityPair, SigmaMode, SourceSubspace};
use crate::error::{Error, Result};
use crate::eval::{evaluate, mean_std};
use crate::labeling::{label_anchors, Discretized, LabelingParams, LabelingProblem, SoftLabeling};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// A feature file and its optional label file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSource {
    pub features: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Desired average K-means group size.
    pub gamma: usize,
    /// Samples per anchor subspace.
    pub anchor_size: usize,
    pub sigma: SigmaMode,
    pub rho: f64,
    pub mu: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub reg_c: f64,
    pub runs: usize,
    pub seed: u64,
    /// Class count; inferred from the source labels when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classes: Option<usize>,
    pub kmeans_max_iters: usize,
    pub rank_tol: f64,
    pub svm_gap_tol: f64,
    pub svm_max_epochs: usize,
    pub one_based_labels: bool,
    pub l2_normalize: bool,
    /// Also score a one-vs-rest SVM trained on the source domain alone.
    pub baseline: bool,
    pub sources: Vec<DataSource>,
    pub targets: Vec<DataSource>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let clustering = ClusteringParams::default();
        let labeling = LabelingParams::default();
        let svm = SvmParams::default();
        Self {
            gamma: clustering.gamma,
            anchor_size: clustering.anchor_size,
            sigma: SigmaMode::Median,
            rho: labeling.rho,
            mu: labeling.mu,
            tol: labeling.tol,
            max_iter: labeling.max_iter,
            reg_c: svm.reg_c,
            runs: 20,
            seed: 0,
            classes: None,
            kmeans_max_iters: clustering.max_kmeans_iters,
            rank_tol: clustering.rank_tol,
            svm_gap_tol: svm.gap_tol,
            svm_max_epochs: svm.max_epochs,
            one_based_labels: false,
            l2_normalize: false,
            baseline: false,
            sources: Vec::new(),
            targets: Vec::new(),
            output: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn clustering(&self, seed: u64) -> ClusteringParams {
        ClusteringParams {
            gamma: self.gamma,
            anchor_size: self.anchor_size,
            seed,
            max_kmeans_iters: self.kmeans_max_iters,
            rank_tol: self.rank_tol,
        }
    }

    pub fn labeling(&self) -> LabelingParams {
        LabelingParams { rho: self.rho, mu: self.mu, max_iter: self.max_iter, tol: self.tol }
    }

    pub fn svm(&self, seed: u64) -> SvmParams {
        SvmParams { reg_c: self.reg_c, gap_tol: self.svm_gap_tol, max_epochs: self.svm_max_epochs, seed }
    }

    /// Seed of run `index`.
    pub fn run_seed(&self, index: usize) -> u64 {
        self.seed.wrapping_add(index as u64)
    }

    /// Checks the algorithm parameters (not the data paths).
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::InvalidConfig("runs must be at least 1".into()));
        }
        self.clustering(self.seed).validate()?;
        self.labeling().validate()?;
        if !(self.reg_c > 0.0 && self.reg_c.is_finite()) {
            return Err(Error::InvalidConfig(format!("reg_c must be positive, got {}", self.reg_c)));
        }
        if let SigmaMode::Fixed(s) = self.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidConfig(format!("sigma must be positive, got {s}")));
            }
        }
        if !(self.rank_tol > 0.0 && self.rank_tol < 1.0) {
            return Err(Error::InvalidConfig(format!("rank_tol must lie in (0, 1), got {}", self.rank_tol)));
        }
        if self.svm_max_epochs == 0 || !(self.svm_gap_tol >= 0.0) {
            return Err(Error::InvalidConfig("SVM stopping parameters are invalid".into()));
        }
        if self.classes == Some(0) {
            return Err(Error::InvalidConfig("classes must be positive".into()));
        }
        Ok(())
    }

    fn load_options(&self) -> LoadOptions {
        LoadOptions { one_based_labels: self.one_based_labels, l2_normalize: self.l2_normalize }
    }

    /// Loads and merges all source and all target files.
    pub fn load_data(&self) -> Result<(DomainDataset, DomainDataset)> {
        if self.sources.is_empty() || self.targets.is_empty() {
            return Err(Error::InvalidConfig("need at least one source and one target".into()));
        }
        let load = |specs: &[DataSource], role: &str| -> Result<DomainDataset> {
            let sets = specs
                .iter()
                .enumerate()
                .map(|(i, spec)| {
                    let tag = spec.features.file_stem().map_or_else(|| format!("{role}{i}"), |s| s.to_string_lossy().into_owned());
                    load_dataset(&spec.features, spec.labels.as_deref(), &tag, self.load_options())
                })
                .collect::<Result<Vec<_>>>()?;
            merge_domains(&sets)
        };
        let source = load(&self.sources, "source")?;
        if source.labels().is_none() {
            return Err(Error::InvalidConfig("source domains must be labeled".into()));
        }
        let target = load(&self.targets, "target")?;
        if source.dim() != target.dim() {
            return Err(Error::DimensionMismatch { expected: source.dim(), found: target.dim() });
        }
        Ok((source, target))
    }

    pub fn class_count(&self, source: &DomainDataset) -> usize {
        self.classes.unwrap_or_else(|| source.num_classes())
    }
}

/// Everything one adaptation run produces.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub anchors: Vec<AnchorSubspace>,
    pub affinities: AffinityPair,
    pub soft: SoftLabeling,
    pub hard: Discretized,
    pub model: LinearOvrModel,
    pub predictions: Vec<usize>,
}

impl RunOutcome {
    pub fn anchor_classes(&self) -> Vec<usize> {
        self.hard.classes()
    }
}

/// One adaptation run with `seed` driving K-means and the SVM sweep order.
pub fn run_once(
    source: &DomainDataset,
    target: &DomainDataset,
    sources: &[SourceSubspace],
    config: &PipelineConfig,
    seed: u64,
) -> Result<RunOutcome> {
    let anchors = build_anchor_subspaces(target.features(), &config.clustering(seed))?;
    let affinities = build_affinities(sources, &anchors, config.sigma)?;
    let problem = LabelingProblem { affinities: affinities.clone(), params: config.labeling() };
    let (soft, hard) = label_anchors(&problem)?;
    let joint = assemble_joint_subspaces(sources, &anchors, &hard.labels)?;
    let model = train_ovr_svm(&joint, source, target, &config.svm(seed))?;
    let predictions = model.predict(target.features())?;
    Ok(RunOutcome { anchors, affinities, soft, hard, model, predictions })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run: usize,
    pub seed: u64,
    pub anchors: usize,
    pub anchor_labels: Vec<usize>,
    pub labeling_iterations: usize,
    pub labeling_converged: bool,
    pub constraint_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub source_domain: String,
    pub target_domain: String,
    pub classes: usize,
    pub dim: usize,
    pub source_samples: usize,
    pub target_samples: usize,
    /// False when the target domain had no labels to score against.
    pub scored: bool,
    pub per_run_accuracy: Vec<f64>,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    /// Truth × prediction counts of the last run.
    pub confusion: Option<Vec<Vec<usize>>>,
    pub source_only_accuracy: Option<f64>,
    /// Target predictions of the last run.
    pub predictions: Vec<usize>,
    pub runs: Vec<RunSummary>,
    pub warnings: Vec<String>,
    pub wall_time_s: f64,
    pub config: PipelineConfig,
}

impl EvaluationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plain-text summary table.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{} -> {}  (C={}, d={}, source n={}, target n={})\n",
            self.source_domain, self.target_domain, self.classes, self.dim, self.source_samples, self.target_samples
        ));
        out.push_str("run  seed        anchors  iters  converged  accuracy\n");
        for r in &self.runs {
            let acc = r.accuracy.map_or_else(|| "-".to_string(), |a| format!("{:.2}%", 100.0 * a));
            out.push_str(&format!(
                "{:<4} {:<11} {:<8} {:<6} {:<10} {}\n",
                r.run, r.seed, r.anchors, r.labeling_iterations, r.labeling_converged, acc
            ));
        }
        if let (Some(m), Some(s)) = (self.mean, self.std) {
            out.push_str(&format!("accuracy: {:.2} ± {:.2} %\n", 100.0 * m, 100.0 * s));
        }
        if let Some(b) = self.source_only_accuracy {
            out.push_str(&format!("source-only baseline: {:.2} %\n", 100.0 * b));
        }
        for w in &self.warnings {
            out.push_str(&format!("warning: {w}\n"));
        }
        out
    }
}

/// Accuracy of a one-vs-rest SVM trained on the source domain only.
pub fn source_only_accuracy(source: &DomainDataset, target: &DomainDataset, config: &PipelineConfig) -> Result<Option<f64>> {
    let Some(truth) = target.labels() else { return Ok(None) };
    let classes = config.class_count(source);
    let labels = source.labels().ok_or_else(|| Error::InvalidConfig("source domain must be labeled".into()))?;
    let model = train_ovr(source.features().matrix(), labels, classes, &config.svm(config.seed))?;
    let predictions = model.predict(target.features())?;
    Ok(Some(evaluate(&predictions, truth, classes)?.accuracy))
}

/// Runs the repeated-seed protocol on loaded data.
pub fn evaluate_datasets(source: &DomainDataset, target: &DomainDataset, config: &PipelineConfig) -> Result<EvaluationReport> {
    config.validate()?;
    let start = Instant::now();
    let classes = config.class_count(source);
    let sources = source_subspaces(source, classes, config.rank_tol)?;

    let outcomes: Vec<RunOutcome> = (0..config.runs)
        .into_par_iter()
        .map(|run| run_once(source, target, &sources, config, config.run_seed(run)))
        .collect::<Result<_>>()?;

    let mut warnings = Vec::new();
    let truth = target.labels();
    if truth.is_none() {
        warnings.push("target domain is unlabeled; predictions reported without accuracy".to_string());
    }
    let mut runs = Vec::with_capacity(outcomes.len());
    let mut per_run_accuracy = Vec::new();
    let mut confusion = None;
    for (run, outcome) in outcomes.iter().enumerate() {
        let scored = truth.map(|t| evaluate(&outcome.predictions, t, classes)).transpose()?;
        if let Some(e) = &scored {
            per_run_accuracy.push(e.accuracy);
            confusion = Some(e.confusion.clone());
        }
        if !outcome.soft.converged {
            warnings.push(format!(
                "run {run}: anchor labeling stopped at max_iter with constraint residual {:e}",
                outcome.soft.constraint_residual
            ));
        }
        if !outcome.hard.degenerate.is_empty() {
            warnings.push(format!("run {run}: anchors {:?} had all-zero codes and default to class 0", outcome.hard.degenerate));
        }
        runs.push(RunSummary {
            run,
            seed: config.run_seed(run),
            anchors: outcome.anchors.len(),
            anchor_labels: outcome.anchor_classes(),
            labeling_iterations: outcome.soft.iterations,
            labeling_converged: outcome.soft.converged,
            constraint_residual: outcome.soft.constraint_residual,
            accuracy: scored.map(|e| e.accuracy),
        });
    }
    let (mean, std) = if per_run_accuracy.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_std(&per_run_accuracy);
        (Some(m), Some(s))
    };
    let source_only = if config.baseline { source_only_accuracy(source, target, config)? } else { None };

    Ok(EvaluationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        source_domain: source.domain_tag().to_string(),
        target_domain: target.domain_tag().to_string(),
        classes,
        dim: source.dim(),
        source_samples: source.len(),
        target_samples: target.len(),
        scored: truth.is_some(),
        per_run_accuracy,
        mean,
        std,
        confusion,
        source_only_accuracy: source_only,
        predictions: outcomes.last().map(|o| o.predictions.clone()).unwrap_or_default(),
        runs,
        warnings,
        wall_time_s: start.elapsed().as_secs_f64(),
        config: config.clone(),
    })
}

/// Loads the configured data, runs every seed and writes the JSON report to
/// `config.output` when set.
pub fn run_pipeline(config: &PipelineConfig) -> Result<EvaluationReport> {
    config.validate()?;
    let (source, target) = config.load_data()?;
    let report = evaluate_datasets(&source, &target, config)?;
    if let Some(path) = &config.output {
        write_report(&report, path)?;
    }
    Ok(report)
}

pub fn write_report(report: &EvaluationReport, path: &Path) -> Result<()> {
    fs::write(path, report.to_json() + "\n").map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    Gamma,
    AnchorSize,
}

impl std::str::FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "gamma" => Ok(SweepParam::Gamma),
            "N" | "n" | "anchor_size" => Ok(SweepParam::AnchorSize),
            other => Err(format!("unknown sweep parameter {other:?} (expected gamma or N)")),
        }
    }
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Gamma => "gamma",
            SweepParam::AnchorSize => "N",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

/// Re-runs the protocol for every value of one parameter.
pub fn sweep(source: &DomainDataset, target: &DomainDataset, config: &PipelineConfig, param: SweepParam, values: &[usize]) -> Result<Vec<SweepRow>> {
    values
        .iter()
        .map(|&value| {
            let mut cfg = config.clone();
            match param {
                SweepParam::Gamma => cfg.gamma = value,
                SweepParam::AnchorSize => cfg.anchor_size = value,
            }
            let report = evaluate_datasets(source, target, &cfg)?;
            Ok(SweepRow { value, mean: report.mean, std: report.std })
        })
        .collect()
}

/// CSV with header `param,value,mean,std`; unscored rows leave the statistics empty.
pub fn sweep_csv(param: SweepParam, rows: &[SweepRow]) -> String {
    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = String::from("param,value,mean,std\n");
    for row in rows {
        out.push_str(&format!("{},{},{},{}\n", param.name(), row.value, fmt(row.mean), fmt(row.std)));
    }
    out
}
