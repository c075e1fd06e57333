//! Compact joint subspaces and one-vs-rest linear SVMs trained on them.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::AnchorSubspace;
use crate::data::{DomainDataset, FeatureMatrix, LabelMatrix};
use crate::distance::SourceSubspace;
use crate::error::{Error, Result};

/// Training members of one class: its source samples plus the samples of all
/// anchors labeled with that class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompactJointSubspace {
    pub class_index: usize,
    pub source_members: Vec<usize>,
    pub anchor_members: Vec<usize>,
}

impl CompactJointSubspace {
    pub fn len(&self) -> usize {
        self.source_members.len() + self.anchor_members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn assemble_joint_subspaces(
    sources: &[SourceSubspace],
    anchors: &[AnchorSubspace],
    anchor_labels: &LabelMatrix,
) -> Result<Vec<CompactJointSubspace>> {
    if anchor_labels.len() != anchors.len() {
        return Err(Error::LengthMismatch { left: anchor_labels.len(), right: anchors.len() });
    }
    if !anchors.is_empty() && !anchor_labels.is_hard() {
        return Err(Error::InvalidConfig("anchor labels must be hard codes".into()));
    }
    let assigned = anchor_labels.argmax();
    let mut joint: Vec<CompactJointSubspace> = sources
        .iter()
        .map(|s| CompactJointSubspace {
            class_index: s.class_index,
            source_members: s.member_indices.clone(),
            anchor_members: Vec::new(),
        })
        .collect();
    for (anchor, &class) in anchors.iter().zip(&assigned) {
        let slot = joint
            .iter_mut()
            .find(|j| j.class_index == class)
            .ok_or(Error::LabelOutOfRange { label: class, classes: sources.len() })?;
        slot.anchor_members.extend_from_slice(&anchor.member_indices);
    }
    Ok(joint)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    /// Trade-off between the mean hinge loss and `½‖w‖²`.
    pub reg_c: f64,
    /// Relative duality gap at which a binary problem counts as solved.
    pub gap_tol: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self { reg_c: 1.0, gap_tol: 1e-6, max_epochs: 5000, seed: 0 }
    }
}

/// One weight row and bias per class; the predicted class maximizes
/// `w_c·x + b_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOvrModel {
    pub weights: DMatrix<f64>,
    pub biases: DVector<f64>,
    pub reg_c: f64,
}

const MODEL_MAGIC: &str = "cjs-linear-ovr";
const MODEL_VERSION: u32 = 1;

impl LinearOvrModel {
    pub fn classes(&self) -> usize {
        self.weights.nrows()
    }

    pub fn dim(&self) -> usize {
        self.weights.ncols()
    }

    /// `C × n` class scores.
    pub fn decision_function(&self, x: &FeatureMatrix) -> Result<DMatrix<f64>> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.dim() });
        }
        let mut scores = &self.weights * x.matrix();
        for mut col in scores.column_iter_mut() {
            col += &self.biases;
        }
        Ok(scores)
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<usize>> {
        let scores = self.decision_function(x)?;
        let scores = LabelMatrix::soft(scores)?;
        Ok(scores.argmax())
    }

    /// Text dump: a version line, a shape line, then one `bias w_1 … w_d` row
    /// per class. Floats use shortest round-trip formatting.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(out, "{MODEL_MAGIC} {MODEL_VERSION}").map_err(io)?;
        writeln!(out, "classes {} dim {} reg_c {}", self.classes(), self.dim(), self.reg_c).map_err(io)?;
        for c in 0..self.classes() {
            let mut row = vec![self.biases[c].to_string()];
            row.extend(self.weights.row(c).iter().map(f64::to_string));
            writeln!(out, "{}", row.join(" ")).map_err(io)?;
        }
        out.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let mut next_line = |what: &str| -> Result<String> {
            lines
                .next()
                .transpose()
                .map_err(|e| Error::io(path, e))?
                .ok_or_else(|| Error::Parse { location: path.display().to_string(), message: format!("missing {what}") })
        };
        let bad = |message: String| Error::Parse { location: path.display().to_string(), message };

        let header = next_line("header")?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some(MODEL_MAGIC) {
            return Err(bad(format!("not a model file: {header:?}")));
        }
        let version: u32 = parts.next().and_then(|v| v.parse().ok()).ok_or_else(|| bad("missing version".into()))?;
        if version != MODEL_VERSION {
            return Err(bad(format!("unsupported model version {version}")));
        }

        let shape = next_line("shape line")?;
        let fields: Vec<&str> = shape.split_whitespace().collect();
        if fields.len() != 6 || fields[0] != "classes" || fields[2] != "dim" || fields[4] != "reg_c" {
            return Err(bad(format!("malformed shape line {shape:?}")));
        }
        let classes: usize = fields[1].parse().map_err(|_| bad("bad class count".into()))?;
        let dim: usize = fields[3].parse().map_err(|_| bad("bad dimension".into()))?;
        let reg_c: f64 = fields[5].parse().map_err(|_| bad("bad reg_c".into()))?;

        let mut weights = DMatrix::zeros(classes, dim);
        let mut biases = DVector::zeros(classes);
        for c in 0..classes {
            let row = next_line("weight row")?;
            let values: Vec<f64> = row
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad(format!("row {c}: {e}")))?;
            if values.len() != dim + 1 {
                return Err(bad(format!("row {c}: expected {} values, found {}", dim + 1, values.len())));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(bad(format!("row {c}: non-finite value")));
            }
            biases[c] = values[0];
            weights.row_mut(c).copy_from_slice(&values[1..]);
        }
        Ok(Self { weights, biases, reg_c })
    }
}

/// Trains one binary hinge-loss classifier per class on the joint subspaces:
/// positives are the members of that class's joint subspace, negatives the
/// members of all others.
pub fn train_ovr_svm(
    joint: &[CompactJointSubspace],
    source: &DomainDataset,
    target: &DomainDataset,
    params: &SvmParams,
) -> Result<LinearOvrModel> {
    if source.dim() != target.dim() {
        return Err(Error::DimensionMismatch { expected: source.dim(), found: target.dim() });
    }
    let classes = joint.len();
    let mut columns = Vec::new();
    let mut labels = Vec::new();
    for (position, js) in joint.iter().enumerate() {
        if js.class_index != position {
            return Err(Error::InvalidConfig(format!("joint subspace {position} has class {}", js.class_index)));
        }
        if js.is_empty() {
            return Err(Error::EmptyClass(position));
        }
        for &i in &js.source_members {
            columns.push(source.features().matrix().column(i));
            labels.push(position);
        }
        for &i in &js.anchor_members {
            columns.push(target.features().matrix().column(i));
            labels.push(position);
        }
    }
    let x = DMatrix::from_columns(&columns);
    train_ovr(&x, &labels, classes, params)
}

/// One-vs-rest training on explicit samples (columns of `x`).
pub fn train_ovr(x: &DMatrix<f64>, labels: &[usize], classes: usize, params: &SvmParams) -> Result<LinearOvrModel> {
    if !(params.reg_c > 0.0 && params.reg_c.is_finite()) {
        return Err(Error::InvalidConfig(format!("reg_c must be positive, got {}", params.reg_c)));
    }
    if labels.len() != x.ncols() {
        return Err(Error::LengthMismatch { left: labels.len(), right: x.ncols() });
    }
    let mut counts = vec![0usize; classes];
    for &l in labels {
        if l >= classes {
            return Err(Error::LabelOutOfRange { label: l, classes });
        }
        counts[l] += 1;
    }
    if let Some(empty) = counts.iter().position(|&n| n == 0) {
        return Err(Error::EmptyClass(empty));
    }

    let dim = x.nrows();
    let rows: Vec<(DVector<f64>, f64)> = (0..classes)
        .into_par_iter()
        .map(|class| {
            let signs: Vec<f64> = labels.iter().map(|&l| if l == class { 1.0 } else { -1.0 }).collect();
            let class_seed = params.seed.wrapping_add(class as u64);
            train_binary(x, &signs, params, class_seed).map_err(|(gap, epochs)| Error::SolverFailure { class, gap, epochs })
        })
        .collect::<Result<_>>()?;

    let mut weights = DMatrix::zeros(classes, dim);
    let mut biases = DVector::zeros(classes);
    for (c, (w, b)) in rows.into_iter().enumerate() {
        weights.row_mut(c).copy_from(&w.transpose());
        biases[c] = b;
    }
    Ok(LinearOvrModel { weights, biases, reg_c: params.reg_c })
}

/// Dual coordinate descent for
/// `min ½(‖w‖² + b²) + (reg_c / n) Σ max(0, 1 − y_i(w·x_i + b))`,
/// the bias being an extra feature fixed at 1. Sweeps all coordinates in a
/// seeded random order per epoch and stops once the duality gap is at most
/// `gap_tol · max(1, primal)`. On failure returns the last gap and epochs run.
fn train_binary(
    x: &DMatrix<f64>,
    y: &[f64],
    params: &SvmParams,
    seed: u64,
) -> std::result::Result<(DVector<f64>, f64), (f64, usize)> {
    let n = x.ncols();
    let upper = params.reg_c / n as f64;
    let diag: Vec<f64> = x.column_iter().map(|c| c.norm_squared() + 1.0).collect();
    let mut alpha = vec![0.0; n];
    let mut w = DVector::zeros(x.nrows());
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gap = f64::INFINITY;

    for epoch in 1..=params.max_epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let xi = x.column(i);
            let g = y[i] * (w.dot(&xi) + b) - 1.0;
            let projected = if alpha[i] <= 0.0 {
                g.min(0.0)
            } else if alpha[i] >= upper {
                g.max(0.0)
            } else {
                g
            };
            if projected != 0.0 {
                let old = alpha[i];
                alpha[i] = (old - g / diag[i]).clamp(0.0, upper);
                let step = (alpha[i] - old) * y[i];
                w.axpy(step, &xi, 1.0);
                b += step;
            }
        }

        let norm_sq = w.norm_squared() + b * b;
        let hinge: f64 = (0..n).map(|i| (1.0 - y[i] * (w.dot(&x.column(i)) + b)).max(0.0)).sum();
        let primal = 0.5 * norm_sq + upper * hinge;
        let dual = alpha.iter().sum::<f64>() - 0.5 * norm_sq;
        gap = primal - dual;
        if gap <= params.gap_tol * primal.max(1.0) {
            return Ok((w, b));
        }
        if epoch == params.max_epochs {
            break;
        }
    }
    Err((gap, params.max_epochs))
}
