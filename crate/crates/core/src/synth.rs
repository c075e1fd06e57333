//! Synthetic two-domain data with one low-dimensional subspace per class.
//!
//! Each class gets a random orthonormal `2r`-dimensional frame `[B | F]`.
//! Source samples lie in `span(B)`; target samples lie in the rotated span
//! `cos α·B + sin α·F` (every principal angle to the source span equals `α`)
//! plus isotropic Gaussian noise. Within its subspace each class forms a
//! cloud around an offset drawn independently per domain, so the class
//! subspaces are shared across domains while the in-subspace distributions
//! are not.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{DomainDataset, FeatureMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub classes: usize,
    pub dim: usize,
    pub subspace_dim: usize,
    pub samples_per_class: usize,
    /// Rotation between source and target class subspaces, in `[0, π/2]`.
    pub angle: f64,
    /// Standard deviation of the isotropic target noise.
    pub noise: f64,
    /// Norm of each class's in-subspace mean coefficient vector.
    pub offset: f64,
    /// Standard deviation of the coefficients around that mean.
    pub spread: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            classes: 4,
            dim: 50,
            subspace_dim: 3,
            samples_per_class: 100,
            angle: 0.3,
            noise: 0.01,
            offset: 30.0,
            spread: 10.0,
            seed: 0,
        }
    }
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Source and target datasets with ground-truth labels; samples are ordered
/// class by class.
pub fn synth_generate(params: &SynthParams) -> Result<(DomainDataset, DomainDataset)> {
    let SynthParams { classes, dim, subspace_dim: r, samples_per_class: n, angle, noise, offset, spread, seed } = *params;
    if classes == 0 || r == 0 || r >= dim {
        return Err(Error::BadDimensions(format!("need classes ≥ 1 and 1 ≤ r < d, got C={classes} r={r} d={dim}")));
    }
    if 2 * r > dim && angle != 0.0 {
        return Err(Error::BadDimensions(format!("rotating an {r}-dim subspace needs d ≥ {}, got {dim}", 2 * r)));
    }
    if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&angle) {
        return Err(Error::BadDimensions(format!("angle must lie in [0, π/2], got {angle}")));
    }
    if !(noise >= 0.0) || !(spread >= 0.0) || !offset.is_finite() {
        return Err(Error::BadDimensions("noise and spread must be nonnegative".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frame_cols = (2 * r).min(dim);
    let total = classes * n;
    let mut source = DMatrix::zeros(dim, total);
    let mut target = DMatrix::zeros(dim, total);
    let mut labels = Vec::with_capacity(total);

    for class in 0..classes {
        let frame = gaussian_matrix(&mut rng, dim, frame_cols).qr().q();
        let base = frame.columns(0, r).into_owned();
        let rotated = if frame_cols == 2 * r {
            &base * angle.cos() + frame.columns(r, r) * angle.sin()
        } else {
            base.clone()
        };

        for (basis, out, with_noise) in [(&base, &mut source, false), (&rotated, &mut target, true)] {
            let direction = gaussian_matrix(&mut rng, r, 1);
            let norm = direction.norm();
            let mean = if norm > 0.0 { direction * (offset / norm) } else { direction };
            let mut coeffs = gaussian_matrix(&mut rng, r, n) * spread;
            for mut col in coeffs.column_iter_mut() {
                col += &mean;
            }
            let mut samples = basis * coeffs;
            if with_noise && noise > 0.0 {
                samples += gaussian_matrix(&mut rng, dim, n) * noise;
            }
            out.columns_mut(class * n, n).copy_from(&samples);
        }
        labels.extend(std::iter::repeat_n(class, n));
    }

    let source = DomainDataset::new(FeatureMatrix::new(source)?, Some(labels.clone()), "synthetic-source")?;
    let target = DomainDataset::new(FeatureMatrix::new(target)?, Some(labels), "synthetic-target")?;
    Ok((source, target))
}
