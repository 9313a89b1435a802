use nalgebra::{DMatrix, SymmetricEigen};

use super::ModelOutput;
use crate::error::{Error, Result};
use crate::superpoint::SuperPointPartition;

/// Singular values at or below this contribute nothing to the gradient.
pub const SINGULAR_EPS: f64 = 1e-8;
pub(crate) const POSTERIOR_FLOOR: f64 = 1e-12;

/// Singular values and right singular vectors from the Gram matrix `F^T F`.
/// Gram eigenvalues within round-off of zero (relative to the largest) are
/// clamped to zero before the square root.
fn gram_singular(f: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(f.transpose() * f);
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let floor = 4.0 * f.ncols() as f64 * f64::EPSILON * top;
    let sigma = eig.eigenvalues.iter().map(|&l| if l <= floor { 0.0 } else { l.sqrt() }).collect();
    (sigma, eig.eigenvectors)
}

/// `(1/N_s) * sum of singular values` of an `N_s x C` posterior block.
pub fn nuclear_loss(f: &DMatrix<f64>) -> f64 {
    if f.nrows() == 0 {
        return 0.0;
    }
    gram_singular(f).0.iter().sum::<f64>() / f.nrows() as f64
}

/// `(1/N_s) U V^T` over singular values above [`SINGULAR_EPS`].
pub fn nuclear_loss_gradient(f: &DMatrix<f64>) -> DMatrix<f64> {
    nuclear_loss_and_gradient(f).1
}

pub fn nuclear_loss_and_gradient(f: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
    let (n, c) = f.shape();
    if n == 0 {
        return (0.0, DMatrix::zeros(0, c));
    }
    let (sigma, vectors) = gram_singular(f);
    let mut value = 0.0;
    let mut m = DMatrix::<f64>::zeros(c, c);
    for (k, &s) in sigma.iter().enumerate() {
        value += s;
        if s > SINGULAR_EPS {
            let v = vectors.column(k);
            m += (v * v.transpose()) / s;
        }
    }
    let scale = 1.0 / n as f64;
    (value * scale, f * m * scale)
}

/// `-ln max(p, 1e-12)`.
pub fn cross_entropy(posterior: &[f64], label: u32) -> f64 {
    -posterior[label as usize].max(POSTERIOR_FLOOR).ln()
}

/// Mean cross-entropy over `labeled` `(point, class)` pairs plus `lambda_nc`
/// times the mean nuclear loss over every super-point of the sample.
pub fn total_loss(
    output: &ModelOutput,
    labeled: &[(u32, u32)],
    partition: &SuperPointPartition,
    lambda_nc: f64,
) -> Result<f64> {
    if labeled.is_empty() {
        return Err(Error::NoLabels);
    }
    if partition.len() != output.len() {
        return Err(Error::LengthMismatch { what: "partition", got: partition.len(), expected: output.len() });
    }
    let mut ce = 0.0;
    for &(i, y) in labeled {
        if y as usize >= output.num_classes {
            return Err(Error::LabelOutOfRange {
                label: y,
                num_classes: output.num_classes,
                context: format!("point {i}"),
            });
        }
        ce += cross_entropy(output.posterior(i as usize), y);
    }
    ce /= labeled.len() as f64;
    if lambda_nc == 0.0 {
        return Ok(ce);
    }
    let nc: f64 = partition.clusters().map(|m| nuclear_loss(&gather_rows(output, m))).sum();
    Ok(ce + lambda_nc * nc / partition.k() as f64)
}

pub(crate) fn gather_rows(output: &ModelOutput, members: &[u32]) -> DMatrix<f64> {
    let c = output.num_classes;
    DMatrix::from_fn(members.len(), c, |r, k| output.posterior(members[r] as usize)[k])
}
