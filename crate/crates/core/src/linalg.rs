//! Dense kernels: orthonormal bases, principal sines, and the rank-one
//! Sylvester solve used by the anchor labeling iteration.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::data::FeatureMatrix;
use crate::error::{Error, Result};

pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Orthonormal `d × r` basis of a sample span.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalBasis {
    basis: DMatrix<f64>,
}

impl OrthonormalBasis {
    /// Wraps a matrix the caller guarantees has orthonormal columns.
    pub fn from_orthonormal(basis: DMatrix<f64>) -> Self {
        Self { basis }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Largest absolute entry of `BᵀB − I`.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = self.basis.transpose() * &self.basis;
        let eye = DMatrix::<f64>::identity(self.rank(), self.rank());
        (gram - eye).amax()
    }
}

/// Left singular vectors whose singular values exceed `rank_tol` times the
/// largest one.
pub fn orthonormal_basis(samples: &FeatureMatrix, rank_tol: f64) -> Result<OrthonormalBasis> {
    orthonormal_basis_of(samples.matrix(), rank_tol)
}

pub(crate) fn orthonormal_basis_of(samples: &DMatrix<f64>, rank_tol: f64) -> Result<OrthonormalBasis> {
    if samples.ncols() == 0 {
        return Err(Error::ZeroMatrix);
    }
    let svd = to_faer(samples).thin_svd().map_err(|_| Error::SvdNoConvergence)?;
    let sv = svd.S().column_vector();
    let sigma_max = (0..sv.nrows()).map(|i| sv[i]).fold(0.0, f64::max);
    if !(sigma_max > 0.0) {
        return Err(Error::ZeroMatrix);
    }
    let cut = rank_tol * sigma_max;
    let keep: Vec<usize> = (0..sv.nrows()).filter(|&i| sv[i] > cut).collect();
    let u = svd.U();
    Ok(OrthonormalBasis { basis: DMatrix::from_fn(samples.nrows(), keep.len(), |i, j| u[(i, keep[j])]) })
}

// SVDs go through faer: nalgebra 0.35 returns wrong singular vectors for
// about 1% of exactly rank-deficient inputs, e.g. noiseless class samples.
fn to_faer(m: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn singular_values(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    to_faer(m).singular_values().map_err(|_| Error::SvdNoConvergence)
}

/// Sines of the principal angles between two spans, ascending, one per angle
/// (`min(r1, r2)` values).
///
/// Cosines come from the singular values of `B1ᵀB2`. Angles whose cosine
/// exceeds `1/√2` take their sine from the residual `B2 − B1(B1ᵀB2)` instead,
/// which keeps small angles accurate to machine precision.
pub fn principal_sines(b1: &OrthonormalBasis, b2: &OrthonormalBasis) -> Result<Vec<f64>> {
    if b1.dim() != b2.dim() {
        return Err(Error::DimensionMismatch { expected: b1.dim(), found: b2.dim() });
    }
    // Project the lower-rank basis onto the other one.
    let (wide, narrow) = if b1.rank() >= b2.rank() { (b1, b2) } else { (b2, b1) };
    let m = narrow.rank();
    if m == 0 {
        return Ok(Vec::new());
    }

    let cross = wide.matrix().transpose() * narrow.matrix();
    let mut cosines: Vec<f64> = singular_values(&cross)?.iter().map(|c| c.clamp(0.0, 1.0)).collect();
    cosines.sort_by(|a, b| b.total_cmp(a));

    let residual = narrow.matrix() - wide.matrix() * &cross;
    let mut residual_sines: Vec<f64> = singular_values(&residual)?.iter().map(|s| s.clamp(0.0, 1.0)).collect();
    residual_sines.sort_by(f64::total_cmp);

    let sines = cosines
        .iter()
        .zip(&residual_sines)
        .map(|(&c, &s)| if c * c > 0.5 { s } else { (1.0 - c * c).sqrt() })
        .collect();
    Ok(sines)
}

/// Solves `X·Δ + μ·11ᵀ·X = rhs` for `X` (`C × K`), with `Δ` symmetric `K × K`
/// and `11ᵀ` the `C × C` all-ones matrix.
pub fn solve_rank1_sylvester(delta: &DMatrix<f64>, mu: f64, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if rhs.ncols() != delta.nrows() {
        return Err(Error::DimensionMismatch { expected: delta.nrows(), found: rhs.ncols() });
    }
    Rank1Sylvester::new(delta, mu, rhs.nrows())?.solve(rhs)
}

/// Factorized form of the operator `X ↦ X·Δ + μ·11ᵀ·X` for repeated solves.
///
/// Diagonalizes `Δ = QΛQᵀ` once; in rotated coordinates every column
/// decouples into `(λ_k I + μ11ᵀ) x̃_k = r̃_k`, inverted in closed form by
/// Sherman–Morrison.
#[derive(Debug, Clone)]
pub struct Rank1Sylvester {
    eigenvectors: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    mu: f64,
    rows: usize,
}

impl Rank1Sylvester {
    pub fn new(delta: &DMatrix<f64>, mu: f64, rows: usize) -> Result<Self> {
        let k = delta.nrows();
        if delta.ncols() != k {
            return Err(Error::BadDimensions(format!("Δ must be square, got {}×{}", k, delta.ncols())));
        }
        if !(mu > 0.0) {
            return Err(Error::InvalidConfig(format!("μ must be positive, got {mu}")));
        }
        let eig = SymmetricEigen::new(delta.clone());
        let shift = mu * rows as f64;
        let scale = eig.eigenvalues.amax().max(shift);
        let singular_tol = 1e-12 * scale;
        for &lambda in eig.eigenvalues.iter() {
            if lambda.abs() <= singular_tol || (rows > 0 && (lambda + shift).abs() <= singular_tol) {
                return Err(Error::SingularSystem { eigenvalue: lambda });
            }
        }
        Ok(Self { eigenvectors: eig.eigenvectors, eigenvalues: eig.eigenvalues, mu, rows })
    }

    pub fn solve(&self, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let k = self.eigenvalues.len();
        if rhs.shape() != (self.rows, k) {
            return Err(Error::DimensionMismatch { expected: self.rows * k, found: rhs.len() });
        }
        if k == 0 || self.rows == 0 {
            return Ok(DMatrix::zeros(self.rows, k));
        }
        let shift = self.mu * self.rows as f64;
        let q = &self.eigenvectors;
        let mut rotated = rhs * q;
        for (col_idx, mut col) in rotated.column_iter_mut().enumerate() {
            let lambda = self.eigenvalues[col_idx];
            let correction = self.mu * col.sum() / (lambda + shift);
            col.add_scalar_mut(-correction);
            col /= lambda;
        }
        Ok(rotated * q.transpose())
    }
}

/// Reference solver for `X·A + B·X = Q` through the Kronecker system
/// `(Aᵀ ⊗ I + I ⊗ B) vec(X) = vec(Q)`. Cubic in `C·K`; for cross-checking.
pub fn solve_sylvester_dense(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (c, k) = q.shape();
    if a.shape() != (k, k) {
        return Err(Error::DimensionMismatch { expected: k, found: a.nrows() });
    }
    if b.shape() != (c, c) {
        return Err(Error::DimensionMismatch { expected: c, found: b.nrows() });
    }
    let n = c * k;
    // vec is column-major: entry (i, j) of X sits at j*c + i.
    let mut system = DMatrix::<f64>::zeros(n, n);
    for j in 0..k {
        for jj in 0..k {
            let a_val = a[(jj, j)];
            if a_val != 0.0 {
                for i in 0..c {
                    system[(j * c + i, jj * c + i)] += a_val;
                }
            }
        }
        for i in 0..c {
            for ii in 0..c {
                system[(j * c + i, j * c + ii)] += b[(i, ii)];
            }
        }
    }
    let rhs = nalgebra::DVector::from_column_slice(q.as_slice());
    let sol = system.lu().solve(&rhs).ok_or(Error::SingularSystem { eigenvalue: 0.0 })?;
    Ok(DMatrix::from_column_slice(c, k, sol.as_slice()))
}

/// `max |X·Δ + μ·11ᵀ·X − rhs|`.
pub fn rank1_sylvester_residual(x: &DMatrix<f64>, delta: &DMatrix<f64>, mu: f64, rhs: &DMatrix<f64>) -> f64 {
    let col_sums = x.row_sum();
    let mut lhs = x * delta;
    for mut row in lhs.row_iter_mut() {
        row += &col_sums * mu;
    }
    (lhs - rhs).amax()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn basis_of(cols: &[&[f64]]) -> OrthonormalBasis {
        let dim = cols[0].len();
        let fm = FeatureMatrix::from_columns(dim, &cols.iter().map(|c| c.to_vec()).collect::<Vec<_>>()).unwrap();
        orthonormal_basis(&fm, DEFAULT_RANK_TOL).unwrap()
    }

    #[test]
    fn identity_columns_give_rank_two() {
        let b = basis_of(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
        assert_eq!(b.rank(), 2);
        assert!(b.orthonormality_error() < 1e-12);
        assert!(b.matrix().row(2).amax() < 1e-15);
    }

    #[test]
    fn collinear_columns_give_rank_one() {
        let b = basis_of(&[&[1.0, 1.0, 0.0], &[2.0, 2.0, 0.0]]);
        assert_eq!(b.rank(), 1);
        let v = b.matrix().column(0);
        let sign = v[0].signum();
        assert!((v[0] * sign - FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((v[1] * sign - FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(v[2].abs() < 1e-15);
    }

    #[test]
    fn zero_columns_are_rejected() {
        let fm = FeatureMatrix::new(DMatrix::zeros(3, 2)).unwrap();
        assert!(matches!(orthonormal_basis(&fm, DEFAULT_RANK_TOL), Err(Error::ZeroMatrix)));
        let empty = FeatureMatrix::new(DMatrix::zeros(3, 0)).unwrap();
        assert!(matches!(orthonormal_basis(&empty, DEFAULT_RANK_TOL), Err(Error::ZeroMatrix)));
    }

    #[test]
    fn sines_of_simple_planes() {
        let e1 = basis_of(&[&[1.0, 0.0]]);
        let e2 = basis_of(&[&[0.0, 1.0]]);
        let diag = basis_of(&[&[1.0, 1.0]]);
        assert_eq!(principal_sines(&e1, &e1).unwrap(), vec![0.0]);
        assert!((principal_sines(&e1, &e2).unwrap()[0] - 1.0).abs() < 1e-15);
        assert!((principal_sines(&e1, &diag).unwrap()[0] - FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn sines_reject_mismatched_dims() {
        let a = basis_of(&[&[1.0, 0.0]]);
        let b = basis_of(&[&[1.0, 0.0, 0.0]]);
        assert!(matches!(principal_sines(&a, &b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn sines_count_is_min_rank_and_ascending() {
        let a = basis_of(&[&[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 0.0, 0.0], &[0.0, 0.0, 1.0, 0.0]]);
        let b = basis_of(&[&[0.0, 0.0, 0.0, 1.0], &[1.0, 0.0, 0.0, 0.0]]);
        let s = principal_sines(&a, &b).unwrap();
        assert_eq!(s.len(), 2);
        assert!(s[0].abs() < 1e-15);
        assert!((s[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn scalar_sylvester() {
        let x = solve_rank1_sylvester(&DMatrix::from_element(1, 1, 2.0), 3.0, &DMatrix::from_element(1, 1, 10.0)).unwrap();
        assert!((x[(0, 0)] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn diagonal_sylvester_matches_direct_construction() {
        // C = 1: x_k (λ_k + μ) = r_k.
        let delta = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0]));
        let rhs = DMatrix::from_row_slice(1, 2, &[4.0, 9.0]);
        let x = solve_rank1_sylvester(&delta, 1.0, &rhs).unwrap();
        assert!((x[(0, 0)] - 2.0).abs() < 1e-14);
        assert!((x[(0, 1)] - 3.0).abs() < 1e-14);
        assert!(rank1_sylvester_residual(&x, &delta, 1.0, &rhs) <= 1e-12);
    }

    #[test]
    fn singular_operator_is_reported() {
        // Δ has a zero eigenvalue, which collides with the zero eigenvalues of μ11ᵀ.
        let delta = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        let rhs = DMatrix::from_element(2, 2, 1.0);
        assert!(matches!(solve_rank1_sylvester(&delta, 1.0, &rhs), Err(Error::SingularSystem { .. })));
        // Δ = −μC on the 1 direction.
        let delta = DMatrix::from_element(1, 1, -2.0);
        let rhs = DMatrix::from_element(2, 1, 1.0);
        assert!(matches!(solve_rank1_sylvester(&delta, 1.0, &rhs), Err(Error::SingularSystem { .. })));
    }

    #[test]
    fn fast_and_dense_solvers_agree() {
        let delta = DMatrix::from_row_slice(3, 3, &[3.0, -1.0, -0.5, -1.0, 2.5, -0.25, -0.5, -0.25, 1.75]);
        let rhs = DMatrix::from_row_slice(2, 3, &[1.0, -2.0, 0.5, 0.0, 3.0, -1.0]);
        let mu = 0.7;
        let fast = solve_rank1_sylvester(&delta, mu, &rhs).unwrap();
        let ones = DMatrix::from_element(2, 2, mu);
        let dense = solve_sylvester_dense(&delta, &ones, &rhs).unwrap();
        assert!((fast - dense).amax() < 1e-12);
    }
}
