//! Subspace distances (summed principal sines) and Gaussian affinities
//! between source class subspaces and target anchors.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::AnchorSubspace;
use crate::data::DomainDataset;
use crate::error::{Error, Result};
use crate::linalg::{orthonormal_basis, principal_sines, OrthonormalBasis};

/// All source samples of one class and the basis of their span.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSubspace {
    pub class_index: usize,
    pub member_indices: Vec<usize>,
    pub basis: OrthonormalBasis,
}

/// One subspace per class `0..classes` from a labeled dataset.
pub fn source_subspaces(source: &DomainDataset, classes: usize, rank_tol: f64) -> Result<Vec<SourceSubspace>> {
    let labels = source.labels().ok_or_else(|| Error::InvalidConfig("source dataset must be labeled".into()))?;
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::LabelOutOfRange { label: bad, classes });
    }
    (0..classes)
        .into_par_iter()
        .map(|class| {
            let members = source.class_members(class);
            if members.is_empty() {
                return Err(Error::EmptyClass(class));
            }
            let basis = orthonormal_basis(&source.features().select(&members), rank_tol)?;
            Ok(SourceSubspace { class_index: class, member_indices: members, basis })
        })
        .collect()
}

/// Sum of the principal sines between two spans.
pub fn subspace_distance(a: &OrthonormalBasis, b: &OrthonormalBasis) -> Result<f64> {
    Ok(principal_sines(a, b)?.iter().sum())
}

/// How the affinity bandwidth σ is chosen. Serialized as `"median"` or a
/// number.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SigmaRepr", into = "SigmaRepr")]
pub enum SigmaMode {
    /// Median of the raw distances entering each matrix, chosen separately
    /// for the source–target and target–target blocks.
    #[default]
    Median,
    Fixed(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SigmaRepr {
    Value(f64),
    Name(String),
}

impl From<SigmaMode> for SigmaRepr {
    fn from(mode: SigmaMode) -> Self {
        match mode {
            SigmaMode::Median => SigmaRepr::Name("median".into()),
            SigmaMode::Fixed(v) => SigmaRepr::Value(v),
        }
    }
}

impl TryFrom<SigmaRepr> for SigmaMode {
    type Error = String;

    fn try_from(repr: SigmaRepr) -> std::result::Result<Self, String> {
        match repr {
            SigmaRepr::Value(v) => Ok(SigmaMode::Fixed(v)),
            SigmaRepr::Name(name) => name.parse(),
        }
    }
}

impl std::str::FromStr for SigmaMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("median") {
            return Ok(SigmaMode::Median);
        }
        s.parse::<f64>().map(SigmaMode::Fixed).map_err(|_| format!("sigma must be \"median\" or a number, got {s:?}"))
    }
}

/// Source–anchor (`C × K`) and anchor–anchor (`K × K`) affinities.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityPair {
    pub a_st: DMatrix<f64>,
    pub a_tt: DMatrix<f64>,
    pub sigma_st: f64,
    pub sigma_tt: f64,
}

/// `exp(−D / 2σ²)`.
pub fn gaussian_affinity(distance: f64, sigma: f64) -> f64 {
    (-distance / (2.0 * sigma * sigma)).exp()
}

/// Raw distances: source × anchor and anchor × anchor (zero diagonal).
pub fn distance_matrices(sources: &[SourceSubspace], anchors: &[AnchorSubspace]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let c = sources.len();
    let k = anchors.len();
    let st: Vec<f64> = (0..c * k)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx % c, idx / c);
            subspace_distance(&sources[i].basis, &anchors[j].basis)
        })
        .collect::<Result<_>>()?;
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| ((i + 1)..k).map(move |j| (i, j))).collect();
    let tt_upper: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| subspace_distance(&anchors[i].basis, &anchors[j].basis))
        .collect::<Result<_>>()?;
    let mut tt = DMatrix::zeros(k, k);
    for (&(i, j), &d) in pairs.iter().zip(&tt_upper) {
        tt[(i, j)] = d;
        tt[(j, i)] = d;
    }
    Ok((DMatrix::from_column_slice(c, k, &st), tt))
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len().is_multiple_of(2) { 0.5 * (values[mid - 1] + values[mid]) } else { values[mid] })
}

fn resolve_sigma(mode: SigmaMode, mut distances: Vec<f64>) -> Result<f64> {
    match mode {
        SigmaMode::Fixed(s) if s > 0.0 && s.is_finite() => Ok(s),
        SigmaMode::Fixed(s) => Err(Error::InvalidConfig(format!("sigma must be positive, got {s}"))),
        // Degenerate medians (no pairs, or all distances zero) fall back to 1.
        SigmaMode::Median => Ok(median(&mut distances).filter(|&m| m > 0.0).unwrap_or(1.0)),
    }
}

/// Affinity matrices from already computed distances.
pub fn affinities_from_distances(d_st: &DMatrix<f64>, d_tt: &DMatrix<f64>, sigma: SigmaMode) -> Result<AffinityPair> {
    let k = d_tt.nrows();
    let sigma_st = resolve_sigma(sigma, d_st.iter().copied().collect())?;
    let off_diag: Vec<f64> = (0..k).flat_map(|i| ((i + 1)..k).map(move |j| (i, j))).map(|(i, j)| d_tt[(i, j)]).collect();
    let sigma_tt = resolve_sigma(sigma, off_diag)?;
    let a_st = d_st.map(|d| gaussian_affinity(d, sigma_st));
    let mut a_tt = d_tt.map(|d| gaussian_affinity(d, sigma_tt));
    a_tt.fill_diagonal(1.0);
    Ok(AffinityPair { a_st, a_tt, sigma_st, sigma_tt })
}

pub fn build_affinities(sources: &[SourceSubspace], anchors: &[AnchorSubspace], sigma: SigmaMode) -> Result<AffinityPair> {
    if sources.is_empty() || anchors.is_empty() {
        return Err(Error::BadDimensions(format!("need C ≥ 1 and K ≥ 1, got C={} K={}", sources.len(), anchors.len())));
    }
    let (d_st, d_tt) = distance_matrices(sources, anchors)?;
    affinities_from_distances(&d_st, &d_tt, sigma)
}

/// `C × C` matrix of distances between source class `i` and target class `j`.
///
/// With `chunk = Some(n)` each target class is cut into consecutive `n`-sample
/// pieces (the size of an anchor) and the entry is the mean distance from the
/// source class to those pieces; trailing pieces smaller than `n` are
/// skipped. With `None` the whole target class is one subspace.
pub fn class_distance_matrix(
    source: &DomainDataset,
    target: &DomainDataset,
    classes: usize,
    chunk: Option<usize>,
    rank_tol: f64,
) -> Result<DMatrix<f64>> {
    if target.labels().is_none() {
        return Err(Error::InvalidConfig("class distances need target labels".into()));
    }
    if source.dim() != target.dim() {
        return Err(Error::DimensionMismatch { expected: source.dim(), found: target.dim() });
    }
    let sources = source_subspaces(source, classes, rank_tol)?;
    let mut target_pieces: Vec<Vec<OrthonormalBasis>> = Vec::with_capacity(classes);
    for class in 0..classes {
        let members = target.class_members(class);
        if members.is_empty() {
            return Err(Error::EmptyClass(class));
        }
        let groups: Vec<Vec<usize>> = match chunk {
            Some(n) if n > 0 => members.chunks_exact(n).map(<[usize]>::to_vec).collect(),
            _ => vec![members],
        };
        if groups.is_empty() {
            return Err(Error::EmptyClass(class));
        }
        let bases = groups
            .iter()
            .map(|g| orthonormal_basis(&target.features().select(g), rank_tol))
            .collect::<Result<Vec<_>>>()?;
        target_pieces.push(bases);
    }
    let mut out = DMatrix::zeros(classes, classes);
    for (i, src) in sources.iter().enumerate() {
        for (j, pieces) in target_pieces.iter().enumerate() {
            let total: f64 = pieces.iter().map(|b| subspace_distance(&src.basis, b)).sum::<Result<f64>>()?;
            out[(i, j)] = total / pieces.len() as f64;
        }
    }
    Ok(out)
}
