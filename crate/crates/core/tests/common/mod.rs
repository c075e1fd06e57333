#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use cjs_core::distance::AffinityPair;
use cjs_core::linalg::OrthonormalBasis;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// `d × k` matrix with orthonormal columns.
pub fn random_orthonormal(rng: &mut ChaCha8Rng, d: usize, k: usize) -> DMatrix<f64> {
    gaussian(rng, d, k).qr().q()
}

/// Two `r`-dim subspaces of `R^d` whose principal angles are exactly `angles`:
/// `b1 = [u_1..u_r]`, `b2_i = cos θ_i u_i + sin θ_i u_{r+i}`.
pub fn subspaces_with_angles(rng: &mut ChaCha8Rng, d: usize, angles: &[f64]) -> (OrthonormalBasis, OrthonormalBasis) {
    let r = angles.len();
    let u = random_orthonormal(rng, d, 2 * r);
    let b1 = u.columns(0, r).into_owned();
    let mut b2 = DMatrix::zeros(d, r);
    for (i, &t) in angles.iter().enumerate() {
        b2.set_column(i, &(u.column(i) * t.cos() + u.column(r + i) * t.sin()));
    }
    (OrthonormalBasis::from_orthonormal(b1), OrthonormalBasis::from_orthonormal(b2))
}

/// Random affinity pair with entries in `(0, 1]` and a symmetric unit-diagonal
/// anchor block.
pub fn random_affinities(rng: &mut ChaCha8Rng, c: usize, k: usize) -> AffinityPair {
    let a_st = DMatrix::from_fn(c, k, |_, _| rng.random_range(0.05..1.0));
    let mut a_tt = DMatrix::from_element(k, k, 1.0);
    for i in 0..k {
        for j in i + 1..k {
            let v = rng.random_range(0.05..1.0);
            a_tt[(i, j)] = v;
            a_tt[(j, i)] = v;
        }
    }
    AffinityPair { a_st, a_tt, sigma_st: 1.0, sigma_tt: 1.0 }
}
