//! Feature matrices, labeled domain datasets and label codes.
//!
//! Samples are stored as columns of a `d × n` matrix. On disk a feature file
//! is a CSV with one sample per row; it is transposed on load.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Dense `d × n` matrix of finite feature values, one sample per column.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: DMatrix<f64>,
}

impl FeatureMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(Error::BadDimensions("feature dimension must be at least 1".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature matrix"));
        }
        Ok(Self { data })
    }

    /// Builds a matrix from sample vectors, each of length `dim`.
    pub fn from_columns(dim: usize, columns: &[Vec<f64>]) -> Result<Self> {
        for col in columns {
            if col.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: col.len() });
            }
        }
        let data = DMatrix::from_fn(dim, columns.len(), |i, j| columns[j][i]);
        Self::new(data)
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    /// Gathers the given columns, in the given order, into a new matrix.
    pub fn select(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix { data: self.data.select_columns(indices) }
    }

    pub fn scaled(&self, factor: f64) -> Result<FeatureMatrix> {
        FeatureMatrix::new(&self.data * factor)
    }

    /// Rescales every nonzero column to unit Euclidean norm.
    pub fn l2_normalized(&self) -> FeatureMatrix {
        let mut data = self.data.clone();
        for mut col in data.column_iter_mut() {
            let norm = col.norm();
            if norm > 0.0 {
                col /= norm;
            }
        }
        FeatureMatrix { data }
    }
}

/// A feature matrix with optional per-sample class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainDataset {
    features: FeatureMatrix,
    labels: Option<Vec<usize>>,
    domain_tag: String,
}

impl DomainDataset {
    pub fn new(features: FeatureMatrix, labels: Option<Vec<usize>>, domain_tag: impl Into<String>) -> Result<Self> {
        if let Some(labels) = &labels {
            if labels.len() != features.len() {
                return Err(Error::LabelLengthMismatch { labels: labels.len(), samples: features.len() });
            }
        }
        Ok(Self { features, labels, domain_tag: domain_tag.into() })
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn domain_tag(&self) -> &str {
        &self.domain_tag
    }

    pub fn dim(&self) -> usize {
        self.features.dim()
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// `1 + max label`, or 0 when unlabeled or empty.
    pub fn num_classes(&self) -> usize {
        self.labels.as_ref().and_then(|l| l.iter().max()).map_or(0, |m| m + 1)
    }

    /// Indices of the samples carrying `class`, ascending.
    pub fn class_members(&self, class: usize) -> Vec<usize> {
        match &self.labels {
            Some(labels) => labels.iter().enumerate().filter(|(_, &l)| l == class).map(|(i, _)| i).collect(),
            None => Vec::new(),
        }
    }

    pub fn with_features(&self, features: FeatureMatrix) -> Result<Self> {
        DomainDataset::new(features, self.labels.clone(), self.domain_tag.clone())
    }

    pub fn with_labels(&self, labels: Option<Vec<usize>>) -> Result<Self> {
        DomainDataset::new(self.features.clone(), labels, self.domain_tag.clone())
    }
}

/// `C × m` matrix of label codes, one code vector per column.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatrix {
    codes: DMatrix<f64>,
    hard: bool,
}

impl LabelMatrix {
    /// Wraps a relaxed (soft) code matrix.
    pub fn soft(codes: DMatrix<f64>) -> Result<Self> {
        if codes.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("label codes"));
        }
        Ok(Self { codes, hard: false })
    }

    pub fn codes(&self) -> &DMatrix<f64> {
        &self.codes
    }

    pub fn is_hard(&self) -> bool {
        self.hard
    }

    pub fn num_classes(&self) -> usize {
        self.codes.nrows()
    }

    pub fn len(&self) -> usize {
        self.codes.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.ncols() == 0
    }

    /// Row index of the largest entry in every column, lowest index on ties.
    pub fn argmax(&self) -> Vec<usize> {
        self.codes
            .column_iter()
            .map(|col| {
                let mut best = 0;
                for (i, &v) in col.iter().enumerate() {
                    if v > col[best] {
                        best = i;
                    }
                }
                best
            })
            .collect()
    }
}

/// One-hot codes for `labels` over `classes` rows.
pub fn one_hot_encode(labels: &[usize], classes: usize) -> Result<LabelMatrix> {
    let mut codes = DMatrix::zeros(classes, labels.len());
    for (j, &label) in labels.iter().enumerate() {
        if label >= classes {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        codes[(label, j)] = 1.0;
    }
    Ok(LabelMatrix { codes, hard: true })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// Label files count classes from 1.
    pub one_based_labels: bool,
    /// Rescale each sample to unit L2 norm after loading.
    pub l2_normalize: bool,
}

pub fn load_dataset(
    features_path: &Path,
    labels_path: Option<&Path>,
    domain_tag: &str,
    options: LoadOptions,
) -> Result<DomainDataset> {
    let mut features = read_features(features_path)?;
    if options.l2_normalize {
        features = features.l2_normalized();
    }
    let labels = labels_path.map(|p| read_labels(p, options.one_based_labels)).transpose()?;
    if let Some(labels) = &labels {
        if labels.len() != features.len() {
            return Err(Error::LabelLengthMismatch { labels: labels.len(), samples: features.len() });
        }
    }
    DomainDataset::new(features, labels, domain_tag)
}

/// Reads a CSV feature file. A first row containing any non-numeric token is
/// taken as a header and skipped.
pub fn read_features(path: &Path) -> Result<FeatureMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 1;
        let record = record.map_err(|e| Error::Parse { location: format!("{}:{line}", path.display()), message: e.to_string() })?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let values = match parsed {
            Ok(values) => values,
            Err(_) if idx == 0 => continue,
            Err(e) => {
                return Err(Error::Parse { location: format!("{}:{line}", path.display()), message: e.to_string() })
            }
        };
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Parse {
                location: format!("{}:{line}", path.display()),
                message: format!("non-finite value {bad}"),
            });
        }
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(Error::Parse {
                    location: format!("{}:{line}", path.display()),
                    message: format!("expected {w} fields, found {}", values.len()),
                })
            }
            Some(_) => {}
        }
        rows.push(values);
    }
    let dim = width.ok_or_else(|| Error::Parse { location: path.display().to_string(), message: "no data rows".into() })?;
    FeatureMatrix::from_columns(dim, &rows)
}

/// Reads one integer label per line; blank lines are ignored.
pub fn read_labels(path: &Path, one_based: bool) -> Result<Vec<usize>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut labels = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let token = line.trim();
        if token.is_empty() {
            continue;
        }
        let location = || format!("{}:{}", path.display(), idx + 1);
        let value: usize = token.parse().map_err(|e: std::num::ParseIntError| Error::Parse {
            location: location(),
            message: format!("{e}: {token:?}"),
        })?;
        let value = if one_based {
            value.checked_sub(1).ok_or_else(|| Error::Parse {
                location: location(),
                message: "label 0 in a 1-based label file".into(),
            })?
        } else {
            value
        };
        labels.push(value);
    }
    Ok(labels)
}

/// Writes features as CSV (one sample per row) and, if present, labels as a
/// 0-based label file. Values use shortest round-trip formatting.
pub fn save_dataset(dataset: &DomainDataset, features_path: &Path, labels_path: Option<&Path>) -> Result<()> {
    write_features(dataset.features(), features_path)?;
    if let (Some(path), Some(labels)) = (labels_path, dataset.labels()) {
        write_lines(path, labels.iter())?;
    }
    Ok(())
}

pub fn write_features(features: &FeatureMatrix, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for col in features.matrix().column_iter() {
        let row: Vec<String> = col.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", row.join(",")).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn write_lines<T: std::fmt::Display>(path: &Path, items: impl Iterator<Item = T>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for item in items {
        writeln!(out, "{item}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Concatenates datasets column-wise, preserving sample order.
pub fn merge_domains(datasets: &[DomainDataset]) -> Result<DomainDataset> {
    let first = datasets.first().ok_or_else(|| Error::InvalidConfig("no datasets to merge".into()))?;
    let dim = first.dim();
    let labeled = first.labels().is_some();
    for ds in &datasets[1..] {
        if ds.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: ds.dim() });
        }
        if ds.labels().is_some() != labeled {
            return Err(Error::MixedLabeling);
        }
    }
    if datasets.len() == 1 {
        return Ok(first.clone());
    }

    let total: usize = datasets.iter().map(DomainDataset::len).sum();
    let mut data = DMatrix::zeros(dim, total);
    let mut offset = 0;
    for ds in datasets {
        data.columns_mut(offset, ds.len()).copy_from(ds.features().matrix());
        offset += ds.len();
    }
    let labels = labeled.then(|| datasets.iter().flat_map(|ds| ds.labels().unwrap().iter().copied()).collect());
    let tag = datasets.iter().map(DomainDataset::domain_tag).collect::<Vec<_>>().join("+");
    DomainDataset::new(FeatureMatrix::new(data)?, labels, tag)
}
