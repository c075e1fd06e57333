//! Anchor subspace mining in the target domain.
//!
//! Target samples are partitioned by K-means into `Z = round(N_T / γ)` groups.
//! Inside every group with at least `N` members the most compact `N`-sample
//! core subgroup (a center plus its `N − 1` nearest neighbors, minimizing the
//! summed neighbor distance) spans one anchor subspace.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::linalg::{orthonormal_basis, OrthonormalBasis};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusteringParams {
    /// Desired average K-means group size.
    pub gamma: usize,
    /// Samples per anchor subspace.
    pub anchor_size: usize,
    pub seed: u64,
    pub max_kmeans_iters: usize,
    pub rank_tol: f64,
}

impl Default for ClusteringParams {
    fn default() -> Self {
        Self { gamma: 20, anchor_size: 5, seed: 0, max_kmeans_iters: 300, rank_tol: crate::linalg::DEFAULT_RANK_TOL }
    }
}

impl ClusteringParams {
    pub fn validate(&self) -> Result<()> {
        if self.anchor_size < 2 {
            return Err(Error::InvalidConfig(format!("anchor size N must be at least 2, got {}", self.anchor_size)));
        }
        if self.gamma < self.anchor_size {
            return Err(Error::InvalidConfig(format!(
                "gamma ({}) must be at least the anchor size ({})",
                self.gamma, self.anchor_size
            )));
        }
        if self.max_kmeans_iters == 0 {
            return Err(Error::InvalidConfig("max_kmeans_iters must be positive".into()));
        }
        Ok(())
    }

    /// Number of K-means groups for `n_target` samples.
    pub fn group_count(&self, n_target: usize) -> usize {
        ((n_target as f64 / self.gamma as f64).round() as usize).max(1)
    }
}

/// `N` compact target samples and the orthonormal basis of their span.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSubspace {
    /// Indices into the target dataset; the core center comes first.
    pub member_indices: Vec<usize>,
    /// K-means group this anchor was mined from.
    pub group: usize,
    pub basis: OrthonormalBasis,
}

/// Lloyd's algorithm with D²-weighted seeding. Returns one group id per sample;
/// ids are contiguous from 0 and groups that go empty are dropped.
pub fn kmeans(x: &FeatureMatrix, clusters: usize, seed: u64, max_iters: usize) -> Result<Vec<usize>> {
    let n = x.len();
    if clusters == 0 {
        return Err(Error::InvalidConfig("cluster count must be positive".into()));
    }
    if clusters > n {
        return Err(Error::TooManyClusters { clusters, samples: n });
    }
    let data = x.matrix();
    let dim = x.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(clusters);
    let first = rng.random_range(0..n);
    centers.push(data.column(first).iter().copied().collect());
    let mut nearest: Vec<f64> = (0..n).map(|j| sq_dist(data.column(j).as_slice(), &centers[0])).collect();
    while centers.len() < clusters {
        let total: f64 = nearest.iter().sum();
        if !(total > 0.0) {
            // Every sample coincides with a chosen center.
            break;
        }
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = n - 1;
        for (j, &w) in nearest.iter().enumerate() {
            acc += w;
            if acc > target && w > 0.0 {
                pick = j;
                break;
            }
        }
        let center: Vec<f64> = data.column(pick).iter().copied().collect();
        for (j, slot) in nearest.iter_mut().enumerate() {
            *slot = slot.min(sq_dist(data.column(j).as_slice(), &center));
        }
        centers.push(center);
    }

    let mut assignment = vec![usize::MAX; n];
    for _ in 0..max_iters {
        let next: Vec<usize> = (0..n)
            .into_par_iter()
            .map(|j| {
                let col = data.column(j);
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for (c, center) in centers.iter().enumerate() {
                    let d = sq_dist(col.as_slice(), center);
                    if d < best_d {
                        best_d = d;
                        best = c;
                    }
                }
                best
            })
            .collect();
        if next == assignment {
            break;
        }
        assignment = next;

        let mut sums = vec![vec![0.0; dim]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (j, &c) in assignment.iter().enumerate() {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(data.column(j).iter()) {
                *s += v;
            }
        }
        if counts.contains(&0) {
            let remap = compact_ids(&counts);
            for a in assignment.iter_mut() {
                *a = remap[*a];
            }
            sums = sums.into_iter().zip(&counts).filter(|(_, &c)| c > 0).map(|(s, _)| s).collect();
            counts.retain(|&c| c > 0);
        }
        centers = sums
            .into_iter()
            .zip(&counts)
            .map(|(s, &count)| s.into_iter().map(|v| v / count as f64).collect())
            .collect();
    }

    let mut counts = vec![0usize; centers.len()];
    for &a in &assignment {
        counts[a] += 1;
    }
    let remap = compact_ids(&counts);
    Ok(assignment.into_iter().map(|a| remap[a]).collect())
}

fn compact_ids(counts: &[usize]) -> Vec<usize> {
    let mut next = 0;
    counts
        .iter()
        .map(|&c| {
            let id = next;
            if c > 0 {
                next += 1;
            }
            id
        })
        .collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Core subgroup of `group` (indices into `x`): the sample minimizing the
/// summed Euclidean distance to its `n − 1` nearest in-group neighbors,
/// followed by those neighbors in order of distance. `None` when the group
/// has fewer than `n` members. Ties go to the lowest sample index.
pub fn core_subgroup(x: &FeatureMatrix, group: &[usize], n: usize) -> Option<Vec<usize>> {
    if group.len() < n || n == 0 {
        return None;
    }
    let mut members = group.to_vec();
    members.sort_unstable();
    let data = x.matrix();

    let mut best: Option<(f64, Vec<usize>)> = None;
    for &center in &members {
        let c = data.column(center);
        let mut neighbors: Vec<(f64, usize)> = members
            .iter()
            .filter(|&&m| m != center)
            .map(|&m| ((data.column(m) - c).norm(), m))
            .collect();
        neighbors.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        neighbors.truncate(n - 1);
        let cost: f64 = neighbors.iter().map(|(d, _)| d).sum();
        if best.as_ref().is_none_or(|(b, _)| cost < *b) {
            let mut subgroup = Vec::with_capacity(n);
            subgroup.push(center);
            subgroup.extend(neighbors.iter().map(|&(_, m)| m));
            best = Some((cost, subgroup));
        }
    }
    best.map(|(_, s)| s)
}

/// Clusters the target samples and extracts one anchor per sufficiently large
/// group, ordered by group id.
pub fn build_anchor_subspaces(x_target: &FeatureMatrix, params: &ClusteringParams) -> Result<Vec<AnchorSubspace>> {
    params.validate()?;
    let n_target = x_target.len();
    if n_target < params.anchor_size {
        return Err(Error::NoAnchors { anchor_size: params.anchor_size });
    }
    let z = params.group_count(n_target);
    let assignment = kmeans(x_target, z, params.seed, params.max_kmeans_iters)?;
    let group_total = assignment.iter().max().map_or(0, |m| m + 1);
    let mut groups = vec![Vec::new(); group_total];
    for (j, &g) in assignment.iter().enumerate() {
        groups[g].push(j);
    }

    let anchors: Vec<Option<Result<AnchorSubspace>>> = groups
        .par_iter()
        .enumerate()
        .map(|(g, members)| {
            core_subgroup(x_target, members, params.anchor_size).map(|subgroup| {
                let basis = orthonormal_basis(&x_target.select(&subgroup), params.rank_tol)?;
                Ok(AnchorSubspace { member_indices: subgroup, group: g, basis })
            })
        })
        .collect();
    let anchors: Vec<AnchorSubspace> = anchors.into_iter().flatten().collect::<Result<_>>()?;
    if anchors.is_empty() {
        return Err(Error::NoAnchors { anchor_size: params.anchor_size });
    }
    Ok(anchors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn line(points: &[f64]) -> FeatureMatrix {
        FeatureMatrix::new(DMatrix::from_row_slice(1, points.len(), points)).unwrap()
    }

    #[test]
    fn one_dimensional_core_subgroup() {
        let x = line(&[0.0, 1.0, 2.0, 10.0]);
        let sub = core_subgroup(&x, &[0, 1, 2, 3], 3).unwrap();
        assert_eq!(sub[0], 1);
        let mut sorted = sub.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1, 2]);
    }

    #[test]
    fn small_group_has_no_core() {
        let x = line(&[0.0, 1.0]);
        assert_eq!(core_subgroup(&x, &[0, 1], 5), None);
    }

    #[test]
    fn identical_points_break_ties_by_lowest_index() {
        let x = line(&[4.0; 5]);
        let sub = core_subgroup(&x, &[4, 2, 0, 3, 1], 5).unwrap();
        assert_eq!(sub, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn single_cluster_takes_everything() {
        let x = line(&[0.0, 5.0, -3.0, 2.0]);
        assert_eq!(kmeans(&x, 1, 7, 100).unwrap(), vec![0; 4]);
    }

    #[test]
    fn too_many_clusters() {
        let x = line(&[0.0, 1.0]);
        assert!(matches!(kmeans(&x, 3, 0, 10), Err(Error::TooManyClusters { clusters: 3, samples: 2 })));
    }

    #[test]
    fn duplicate_points_collapse_groups() {
        let x = line(&[1.0; 6]);
        let a = kmeans(&x, 3, 1, 50).unwrap();
        assert!(a.iter().all(|&g| g == 0));
    }

    #[test]
    fn group_count_rounds() {
        let p = ClusteringParams::default();
        assert_eq!(p.group_count(100), 5);
        assert_eq!(p.group_count(109), 5);
        assert_eq!(p.group_count(110), 6);
        assert_eq!(p.group_count(3), 1);
    }

    #[test]
    fn defaults() {
        let p = ClusteringParams::default();
        assert_eq!((p.gamma, p.anchor_size), (20, 5));
    }

    #[test]
    fn too_few_target_samples() {
        let x = line(&[0.0, 1.0, 2.0, 3.0]);
        let err = build_anchor_subspaces(&x, &ClusteringParams::default()).unwrap_err();
        assert!(matches!(err, Error::NoAnchors { anchor_size: 5 }));
    }

    #[test]
    fn invalid_params() {
        let mut p = ClusteringParams { anchor_size: 1, ..Default::default() };
        assert!(p.validate().is_err());
        p.anchor_size = 5;
        p.gamma = 4;
        assert!(p.validate().is_err());
    }
}
