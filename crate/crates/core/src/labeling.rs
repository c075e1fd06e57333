//! Class labels for anchor subspaces.
//!
//! Source class codes `Y` (`C × C`, identity) and anchor codes `Y'` (`C × K`)
//! are stacked as `𝒴 = [Y, Y']`. The label cost
//!
//! ```text
//! Σ_ij ‖y_i − y'_j‖² A^ST_ij + ρ Σ_jj' ‖y'_j − y'_j'‖² A^TT_jj'
//! ```
//!
//! equals `Σ ‖𝒴_i − 𝒴_j‖² 𝒜_ij` on the joint graph
//! `𝒜 = [I, ½A^ST; ½A^STᵀ, ρA^TT]`. With every code vector constrained to sum
//! to one, the relaxed problem is solved by alternating an exact solve for
//! `Y'` (a rank-one Sylvester equation in the Laplacian blocks) with a
//! multiplier ascent step of size μ, then rounded per anchor.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{one_hot_encode, LabelMatrix};
use crate::distance::AffinityPair;
use crate::error::{Error, Result};
use crate::linalg::Rank1Sylvester;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelingParams {
    /// Weight of the anchor–anchor topology term.
    pub rho: f64,
    /// Penalty weight and multiplier step.
    pub mu: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LabelingParams {
    fn default() -> Self {
        Self { rho: 0.1, mu: 1.0, max_iter: 10_000, tol: 1e-6 }
    }
}

impl LabelingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidConfig(format!("rho must be nonnegative, got {}", self.rho)));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidConfig(format!("mu must be positive, got {}", self.mu)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelingProblem {
    pub affinities: AffinityPair,
    pub params: LabelingParams,
}

impl LabelingProblem {
    pub fn classes(&self) -> usize {
        self.affinities.a_st.nrows()
    }

    pub fn anchors(&self) -> usize {
        self.affinities.a_st.ncols()
    }
}

/// Joint `(C+K) × (C+K)` affinity graph and its Laplacian.
#[derive(Debug, Clone, PartialEq)]
pub struct JointAffinity {
    pub classes: usize,
    pub affinity: DMatrix<f64>,
    pub degree: DVector<f64>,
    pub laplacian: DMatrix<f64>,
}

/// Laplacian blocks split after the first `C` rows and columns.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianBlocks {
    pub cc: DMatrix<f64>,
    pub ck: DMatrix<f64>,
    pub kc: DMatrix<f64>,
    pub kk: DMatrix<f64>,
}

impl JointAffinity {
    pub fn blocks(&self) -> LaplacianBlocks {
        let c = self.classes;
        let k = self.laplacian.nrows() - c;
        let l = &self.laplacian;
        LaplacianBlocks {
            cc: l.view((0, 0), (c, c)).into_owned(),
            ck: l.view((0, c), (c, k)).into_owned(),
            kc: l.view((c, 0), (k, c)).into_owned(),
            kk: l.view((c, c), (k, k)).into_owned(),
        }
    }
}

impl LaplacianBlocks {
    pub fn reassemble(&self) -> DMatrix<f64> {
        let c = self.cc.nrows();
        let k = self.kk.nrows();
        let mut out = DMatrix::zeros(c + k, c + k);
        out.view_mut((0, 0), (c, c)).copy_from(&self.cc);
        out.view_mut((0, c), (c, k)).copy_from(&self.ck);
        out.view_mut((c, 0), (k, c)).copy_from(&self.kc);
        out.view_mut((c, c), (k, k)).copy_from(&self.kk);
        out
    }
}

pub fn assemble_joint_affinity(pair: &AffinityPair, rho: f64) -> JointAffinity {
    let c = pair.a_st.nrows();
    let k = pair.a_st.ncols();
    let mut a = DMatrix::zeros(c + k, c + k);
    a.view_mut((0, 0), (c, c)).fill_with_identity();
    a.view_mut((0, c), (c, k)).copy_from(&(&pair.a_st * 0.5));
    a.view_mut((c, 0), (k, c)).copy_from(&(pair.a_st.transpose() * 0.5));
    a.view_mut((c, c), (k, k)).copy_from(&(&pair.a_tt * rho));
    let degree = a.column_sum();
    let laplacian = DMatrix::from_diagonal(&degree) - &a;
    JointAffinity { classes: c, affinity: a, degree, laplacian }
}

/// Outcome of the relaxed labeling iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftLabeling {
    /// `C × K` relaxed anchor codes.
    pub labels: LabelMatrix,
    /// Final Lagrange multipliers, length `C + K`.
    pub multipliers: DVector<f64>,
    pub iterations: usize,
    /// `‖𝒴ᵀ1 − 1‖_∞` at the last iterate.
    pub constraint_residual: f64,
    /// `‖Y'⁽ᵏ⁺¹⁾ − Y'⁽ᵏ⁾‖_max` at the last iterate.
    pub last_change: f64,
    /// False when `max_iter` ran out first.
    pub converged: bool,
}

/// Relaxed anchor codes by alternating the `Y'` solve and the multiplier
/// update from zero, until both the constraint residual and the iterate change
/// fall below `tol` or `max_iter` is reached.
pub fn label_anchors_soft(problem: &LabelingProblem, source_codes: &LabelMatrix) -> Result<SoftLabeling> {
    let params = problem.params;
    params.validate()?;
    let c = problem.classes();
    let k = problem.anchors();
    if problem.affinities.a_tt.shape() != (k, k) {
        return Err(Error::DimensionMismatch { expected: k, found: problem.affinities.a_tt.nrows() });
    }
    if source_codes.codes().shape() != (c, c) {
        return Err(Error::DimensionMismatch { expected: c, found: source_codes.len() });
    }
    let y = source_codes.codes();

    let joint = assemble_joint_affinity(&problem.affinities, params.rho);
    let blocks = joint.blocks();
    let solver = Rank1Sylvester::new(&blocks.kk, params.mu, c)?;
    // μ11ᵀ − YΔ_CK is fixed across iterations.
    let base_rhs = DMatrix::from_element(c, k, params.mu) - y * &blocks.ck;
    let source_sum_gap: DVector<f64> = y.row_sum().transpose().add_scalar(-1.0);

    let mut y_prime = DMatrix::zeros(c, k);
    let mut lambda = DVector::<f64>::zeros(c + k);
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    let mut change = f64::INFINITY;
    let mut converged = false;

    while iterations < params.max_iter {
        iterations += 1;
        let mut rhs = base_rhs.clone();
        for (j, mut col) in rhs.column_iter_mut().enumerate() {
            col.add_scalar_mut(-lambda[c + j]);
        }
        let next = solver.solve(&rhs)?;
        change = (&next - &y_prime).amax();
        y_prime = next;

        let anchor_sum_gap = y_prime.row_sum().transpose().add_scalar(-1.0);
        for i in 0..c {
            lambda[i] += params.mu * source_sum_gap[i];
        }
        for j in 0..k {
            lambda[c + j] += params.mu * anchor_sum_gap[j];
        }
        residual = source_sum_gap.amax().max(anchor_sum_gap.amax());

        if residual <= params.tol && change <= params.tol {
            converged = true;
            break;
        }
    }

    Ok(SoftLabeling {
        labels: LabelMatrix::soft(y_prime)?,
        multipliers: lambda,
        iterations,
        constraint_residual: residual,
        last_change: change,
        converged,
    })
}

/// Hard anchor labels from relaxed codes.
#[derive(Debug, Clone, PartialEq)]
pub struct Discretized {
    pub labels: LabelMatrix,
    /// Anchors whose code column was entirely zero; they default to class 0.
    pub degenerate: Vec<usize>,
}

impl Discretized {
    pub fn classes(&self) -> Vec<usize> {
        self.labels.argmax()
    }
}

/// Per anchor, the largest code entry becomes 1 and all others 0 (lowest
/// class index on ties).
pub fn discretize(soft: &LabelMatrix) -> Discretized {
    let degenerate = soft
        .codes()
        .column_iter()
        .enumerate()
        .filter(|(_, col)| col.iter().all(|&v| v == 0.0))
        .map(|(j, _)| j)
        .collect();
    let classes = soft.argmax();
    let labels = one_hot_encode(&classes, soft.num_classes().max(1)).expect("argmax is always in range");
    Discretized { labels, degenerate }
}

/// The label cost evaluated at arbitrary (soft or hard) anchor codes.
pub fn labeling_cost(pair: &AffinityPair, rho: f64, anchor_codes: &DMatrix<f64>) -> f64 {
    let c = pair.a_st.nrows();
    let k = pair.a_st.ncols();
    let mut cost = 0.0;
    for j in 0..k {
        let yj = anchor_codes.column(j);
        for i in 0..c {
            let mut sq = yj.norm_squared();
            sq += 1.0 - 2.0 * yj[i];
            cost += sq * pair.a_st[(i, j)];
        }
    }
    for j in 0..k {
        for jj in 0..k {
            if j != jj {
                cost += rho * (anchor_codes.column(j) - anchor_codes.column(jj)).norm_squared() * pair.a_tt[(j, jj)];
            }
        }
    }
    cost
}

/// Label cost of a hard assignment of classes to anchors.
pub fn assignment_cost(pair: &AffinityPair, rho: f64, assignment: &[usize]) -> f64 {
    let codes = one_hot_encode(assignment, pair.a_st.nrows()).expect("assignment within class range");
    labeling_cost(pair, rho, codes.codes())
}

/// Relaxed labeling followed by rounding, using identity source codes.
pub fn label_anchors(problem: &LabelingProblem) -> Result<(SoftLabeling, Discretized)> {
    let c = problem.classes();
    let identity = one_hot_encode(&(0..c).collect::<Vec<_>>(), c)?;
    let soft = label_anchors_soft(problem, &identity)?;
    let hard = discretize(&soft.labels);
    Ok((soft, hard))
}
