//! Symmetric divergence between Gaussians and between datasets.
//!
//! The symmetric divergence is `D(p||q) + D(q||p)`. For two Gaussians it has
//! the closed form
//!
//! ```text
//! 1/2 tr(Sp^-1 Sq + Sq^-1 Sp - 2I) + 1/2 (mp - mq)^T (Sp^-1 + Sq^-1) (mp - mq)
//! ```
//!
//! which is what [`gaussian_divergence`] evaluates. Dataset divergence fits
//! one Gaussian to each dataset by moments and compares the fits.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::types::{Dataset, GaussianSummary};

/// Column means and biased (`1/n`) covariance plus `cov_regularization` on
/// the diagonal.
pub fn fit_gaussian(dataset: &Dataset, cov_regularization: f64) -> Result<GaussianSummary> {
    let n = dataset.n();
    let d = dataset.d();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let mut mean = DVector::zeros(d);
    for row in dataset.rows() {
        for (mu, x) in mean.iter_mut().zip(row) {
            *mu += x;
        }
    }
    mean /= n as f64;
    let mut cov = DMatrix::zeros(d, d);
    let mut centered = vec![0.0; d];
    for row in dataset.rows() {
        for (c, (x, mu)) in centered.iter_mut().zip(row.iter().zip(mean.iter())) {
            *c = x - mu;
        }
        for a in 0..d {
            for b in 0..=a {
                cov[(a, b)] += centered[a] * centered[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..=a {
            let v = cov[(a, b)] / n as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
        cov[(a, a)] += cov_regularization;
    }
    GaussianSummary::new(mean, cov)
}

fn factor(cov: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    cov.clone().cholesky().ok_or(Error::NotPositiveDefinite)
}

fn quadratic_form(chol: &Cholesky<f64, Dyn>, v: &DVector<f64>) -> f64 {
    let y = chol.l_dirty().solve_lower_triangular(v).expect("cholesky factor has a nonzero diagonal");
    y.norm_squared()
}

/// Closed-form symmetric divergence between two Gaussians.
///
/// Symmetric in its arguments bit for bit, and clamped at zero.
pub fn gaussian_divergence(p: &GaussianSummary, q: &GaussianSummary) -> Result<f64> {
    let d = p.dim();
    if q.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: q.dim() });
    }
    let chol_p = factor(&p.cov)?;
    let chol_q = factor(&q.cov)?;
    let trace_pq = chol_p.solve(&q.cov).trace();
    let trace_qp = chol_q.solve(&p.cov).trace();
    let delta = &p.mean - &q.mean;
    let quad = quadratic_form(&chol_p, &delta) + quadratic_form(&chol_q, &delta);
    let value = 0.5 * (trace_pq + trace_qp - 2.0 * d as f64) + 0.5 * quad;
    Ok(value.max(0.0))
}

/// Divergence between moment-matched Gaussian fits of two datasets.
pub fn dataset_divergence(a: &Dataset, b: &Dataset, cov_regularization: f64) -> Result<f64> {
    if a.d() != b.d() {
        return Err(Error::DimensionMismatch { expected: a.d(), found: b.d() });
    }
    gaussian_divergence(&fit_gaussian(a, cov_regularization)?, &fit_gaussian(b, cov_regularization)?)
}
