mod common;

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

use cjs_core::clustering::{build_anchor_subspaces, core_subgroup, kmeans, ClusteringParams};
use cjs_core::data::FeatureMatrix;
use cjs_core::Error;
use common::{gaussian, rng};

fn combinations(items: &[usize], k: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if current.len() == k {
        out.push(current.clone());
        return;
    }
    for i in start..items.len() {
        current.push(items[i]);
        combinations(items, k, i + 1, current, out);
        current.pop();
    }
}

/// Exhaustive search over every center and every (n−1)-subset of the rest.
fn brute_force_core(x: &DMatrix<f64>, group: &[usize], n: usize) -> Option<(usize, BTreeSet<usize>)> {
    if group.len() < n {
        return None;
    }
    let mut best: Option<(f64, usize, BTreeSet<usize>)> = None;
    for &center in group {
        let others: Vec<usize> = group.iter().copied().filter(|&m| m != center).collect();
        let mut subsets = Vec::new();
        combinations(&others, n - 1, 0, &mut Vec::new(), &mut subsets);
        for subset in subsets {
            let cost: f64 = subset.iter().map(|&m| (x.column(m) - x.column(center)).norm()).sum();
            if best.as_ref().is_none_or(|(b, _, _)| cost < *b) {
                best = Some((cost, center, subset.into_iter().collect()));
            }
        }
    }
    best.map(|(_, c, s)| (c, s))
}

fn blobs(centers: &[Vec<f64>], per_blob: usize, radius: f64, seed: u64) -> (FeatureMatrix, Vec<usize>) {
    let mut r = rng(seed);
    let d = centers[0].len();
    let mut cols = Vec::new();
    let mut truth = Vec::new();
    for (b, c) in centers.iter().enumerate() {
        for _ in 0..per_blob {
            let noise = gaussian(&mut r, d, 1);
            cols.push((0..d).map(|i| c[i] + radius * noise[i]).collect::<Vec<_>>());
            truth.push(b);
        }
    }
    (FeatureMatrix::from_columns(d, &cols).unwrap(), truth)
}

fn same_partition(a: &[usize], b: &[usize]) -> bool {
    a.len() == b.len() && (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
}

#[test]
fn core_subgroup_matches_exhaustive_search() {
    let mut r = rng(21);
    for _ in 0..40 {
        let size = r.random_range(2..16);
        let d = r.random_range(1..6);
        let n = r.random_range(1..5);
        let x = gaussian(&mut r, d, size + 3);
        let group: Vec<usize> = (0..size + 3).filter(|_| r.random_bool(0.8)).collect();
        let fm = FeatureMatrix::new(x.clone()).unwrap();
        let got = core_subgroup(&fm, &group, n);
        let expected = brute_force_core(&x, &group, n);
        match (got, expected) {
            (None, None) => {}
            (Some(g), Some((center, rest))) => {
                assert_eq!(g[0], center);
                assert_eq!(g[1..].iter().copied().collect::<BTreeSet<_>>(), rest);
            }
            (g, e) => panic!("mismatch: {g:?} vs {e:?}"),
        }
    }
}

#[test]
fn identical_points_pick_lowest_index() {
    let x = FeatureMatrix::new(DMatrix::from_element(2, 4, 1.5)).unwrap();
    assert_eq!(core_subgroup(&x, &[3, 1, 2], 3), Some(vec![1, 2, 3]));
}

#[test]
fn two_blobs_recovered() {
    let (x, truth) = blobs(&[vec![10.0, 0.0, 0.0], vec![-10.0, 0.0, 0.0]], 30, 0.1, 2);
    let groups = kmeans(&x, 2, 7, 100).unwrap();
    assert!(same_partition(&groups, &truth));
}

#[test]
fn one_group_and_too_many_groups() {
    let (x, _) = blobs(&[vec![0.0, 0.0]], 6, 1.0, 1);
    assert!(kmeans(&x, 1, 0, 50).unwrap().iter().all(|&g| g == 0));
    assert!(matches!(kmeans(&x, 7, 0, 50), Err(Error::TooManyClusters { clusters: 7, samples: 6 })));
}

#[test]
fn five_blobs_give_five_anchors() {
    let centers: Vec<Vec<f64>> = (0..5).map(|b| (0..4).map(|i| if i == b % 4 { 20.0 * (1 + b / 4) as f64 } else { 0.0 }).collect()).collect();
    let (x, truth) = blobs(&centers, 20, 0.5, 4);
    let params = ClusteringParams { gamma: 20, anchor_size: 5, seed: 3, ..Default::default() };
    let anchors = build_anchor_subspaces(&x, &params).unwrap();
    assert_eq!(anchors.len(), 5);
    for a in &anchors {
        assert_eq!(a.member_indices.len(), 5);
        let blob = truth[a.member_indices[0]];
        assert!(a.member_indices.iter().all(|&m| truth[m] == blob));
    }
}

#[test]
fn anchors_stay_inside_their_group() {
    let mut r = rng(9);
    let x = FeatureMatrix::new(gaussian(&mut r, 6, 120)).unwrap();
    let params = ClusteringParams { gamma: 15, anchor_size: 4, seed: 12, ..Default::default() };
    let groups = kmeans(&x, params.group_count(x.len()), params.seed, params.max_kmeans_iters).unwrap();
    let anchors = build_anchor_subspaces(&x, &params).unwrap();
    assert!(!anchors.is_empty());
    for a in &anchors {
        assert!(a.member_indices.iter().all(|&m| groups[m] == a.group));
        assert!(a.basis.rank() <= 4);
    }
}

#[test]
fn too_few_target_samples() {
    let x = FeatureMatrix::new(DMatrix::from_fn(3, 4, |i, j| (i * 4 + j) as f64)).unwrap();
    let params = ClusteringParams { gamma: 20, anchor_size: 5, ..Default::default() };
    assert!(matches!(build_anchor_subspaces(&x, &params), Err(Error::NoAnchors { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn kmeans_deterministic(seed in 0u64..1000, z in 1usize..6) {
        let mut r = rng(seed);
        let x = FeatureMatrix::new(gaussian(&mut r, 3, 40)).unwrap();
        let a = kmeans(&x, z, seed, 100).unwrap();
        prop_assert_eq!(&a, &kmeans(&x, z, seed, 100).unwrap());
        let used: BTreeSet<usize> = a.iter().copied().collect();
        prop_assert!(used.len() <= z);
        prop_assert_eq!(used.clone(), (0..used.len()).collect::<BTreeSet<_>>());
    }

    #[test]
    fn power_of_two_scaling_keeps_anchors(seed in 0u64..1000, exp in -4i32..5) {
        let mut r = rng(seed);
        let x = FeatureMatrix::new(gaussian(&mut r, 4, 60)).unwrap();
        let scaled = x.scaled(2f64.powi(exp)).unwrap();
        let params = ClusteringParams { gamma: 12, anchor_size: 4, seed, ..Default::default() };
        prop_assert_eq!(
            kmeans(&x, 5, seed, 100).unwrap(),
            kmeans(&scaled, 5, seed, 100).unwrap()
        );
        let a: Vec<Vec<usize>> = build_anchor_subspaces(&x, &params).unwrap().into_iter().map(|a| a.member_indices).collect();
        let b: Vec<Vec<usize>> = build_anchor_subspaces(&scaled, &params).unwrap().into_iter().map(|a| a.member_indices).collect();
        prop_assert_eq!(a, b);
    }
}
