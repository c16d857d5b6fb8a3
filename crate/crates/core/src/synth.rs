//! Synthetic data and contamination.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::fit_gaussian;
use crate::types::Dataset;

/// Multiple of the clean data's largest standard deviation used as the
/// default contamination noise scale.
pub const DEFAULT_NOISE_MULTIPLIER: f64 = 6.0;

/// Draws `n` samples from `N(mean, cov)` as `mean + L z`, row by row.
pub fn gen_gaussian(n: usize, mean: &DVector<f64>, cov: &DMatrix<f64>, seed: u64) -> Result<Dataset> {
    let d = mean.len();
    if n == 0 || d == 0 {
        return Err(Error::EmptyDataset);
    }
    if cov.nrows() != d || cov.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, found: cov.nrows() });
    }
    let l = cov.clone().cholesky().ok_or(Error::NotPositiveDefinite)?.unpack();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(n * d);
    let mut z = DVector::zeros(d);
    for _ in 0..n {
        z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        let x = mean + &l * &z;
        values.extend(x.iter());
    }
    Dataset::from_vec(n, d, values)
}

/// One-dimensional curves embedded in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    /// `y = sin(x)` for `x` in `[0, 2 pi]`.
    SineCurve,
    /// Upper unit half-circle at the origin and lower unit half-circle
    /// centred at `(1, 0.5)`.
    TwoMoons,
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Shape::SineCurve => "sine",
            Shape::TwoMoons => "moons",
        })
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sine" | "sine-curve" => Ok(Shape::SineCurve),
            "moons" | "two-moons" => Ok(Shape::TwoMoons),
            other => Err(Error::ConfigInvalid(format!("unknown shape `{other}`"))),
        }
    }
}

impl Shape {
    fn point_at(self, t: f64, upper: bool) -> [f64; 2] {
        match self {
            Shape::SineCurve => [t, t.sin()],
            Shape::TwoMoons if upper => [t.cos(), t.sin()],
            Shape::TwoMoons => [1.0 - t.cos(), 0.5 - t.sin()],
        }
    }

    /// Euclidean distance from `point` to the noise-free curve.
    pub fn distance(self, point: &[f64]) -> f64 {
        let (px, py) = (point[0], point[1]);
        match self {
            Shape::SineCurve => sine_distance(px, py),
            Shape::TwoMoons => {
                arc_distance(px, py, 0.0, 0.0, true).min(arc_distance(px, py, 1.0, 0.5, false))
            }
        }
    }
}

/// Distance to a unit half-circle; `upper` selects the half with `y >= cy`.
fn arc_distance(px: f64, py: f64, cx: f64, cy: f64, upper: bool) -> f64 {
    let (qx, qy) = (px - cx, py - cy);
    let on_side = if upper { qy >= 0.0 } else { qy <= 0.0 };
    if on_side {
        ((qx * qx + qy * qy).sqrt() - 1.0).abs()
    } else {
        let to_end = |ex: f64| ((qx - ex).powi(2) + qy * qy).sqrt();
        to_end(1.0).min(to_end(-1.0))
    }
}

fn sine_distance(px: f64, py: f64) -> f64 {
    const GRID: usize = 4096;
    let sq = |t: f64| (t - px).powi(2) + (t.sin() - py).powi(2);
    let step = TAU / GRID as f64;
    let best = (0..=GRID)
        .map(|k| k as f64 * step)
        .min_by(|a, b| sq(*a).total_cmp(&sq(*b)))
        .unwrap_or(0.0);
    // golden-section refinement inside the bracketing cells
    let (mut a, mut b) = ((best - step).max(0.0), (best + step).min(TAU));
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let c = b - ratio * (b - a);
        let d = a + ratio * (b - a);
        if sq(c) < sq(d) {
            b = d;
        } else {
            a = c;
        }
    }
    sq(0.5 * (a + b)).min(sq(best)).sqrt()
}

/// Points on `shape` with isotropic Gaussian jitter of scale `noise_sigma`.
///
/// For two moons, even rows go to the upper moon and odd rows to the lower.
pub fn gen_nonlinear(n: usize, shape: Shape, noise_sigma: f64, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::ConfigInvalid(format!("noise_sigma must be nonnegative, got {noise_sigma}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(2 * n);
    for i in 0..n {
        let t = match shape {
            Shape::SineCurve => rng.random_range(0.0..=TAU),
            Shape::TwoMoons => rng.random_range(0.0..=PI),
        };
        let [x, y] = shape.point_at(t, i % 2 == 0);
        let jx: f64 = rng.sample(StandardNormal);
        let jy: f64 = rng.sample(StandardNormal);
        values.push(x + noise_sigma * jx);
        values.push(y + noise_sigma * jy);
    }
    Dataset::from_vec(n, 2, values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationReport {
    /// `true` for rows that received noise.
    pub outlier_mask: Vec<bool>,
    pub rate: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl ContaminationReport {
    pub fn outlier_indices(&self) -> Vec<usize> {
        self.outlier_mask.iter().enumerate().filter(|(_, m)| **m).map(|(i, _)| i).collect()
    }

    pub fn outlier_count(&self) -> usize {
        self.outlier_mask.iter().filter(|m| **m).count()
    }
}

/// `DEFAULT_NOISE_MULTIPLIER` standard deviations along the dataset's
/// largest-variance direction.
pub fn default_noise_sigma(dataset: &Dataset) -> Result<f64> {
    let fit = fit_gaussian(dataset, 0.0)?;
    let top = SymmetricEigen::new(fit.cov).eigenvalues.iter().copied().fold(0.0, f64::max);
    if !(top > 0.0) {
        return Err(Error::ConfigInvalid("clean data has no spread to scale the noise by".into()));
    }
    Ok(DEFAULT_NOISE_MULTIPLIER * top.sqrt())
}

/// Adds isotropic Gaussian noise of scale `noise_sigma` to `round(rate * n)`
/// rows chosen uniformly at random.
///
/// Rows are picked as a prefix of a seeded permutation and receive noise in
/// permutation order, so for a fixed seed a higher rate perturbs a superset
/// of the rows of a lower rate, with identical noise on the shared rows.
pub fn contaminate(dataset: &Dataset, rate: f64, noise_sigma: f64, seed: u64) -> Result<(Dataset, ContaminationReport)> {
    let n = dataset.n();
    let count = (rate * n as f64).round();
    if !(rate > 0.0 && rate < 1.0) || count < 1.0 {
        return Err(Error::RateOutOfRange { rate, n });
    }
    if !(noise_sigma > 0.0 && noise_sigma.is_finite()) {
        return Err(Error::ConfigInvalid(format!("noise_sigma must be positive, got {noise_sigma}")));
    }
    let count = count as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let d = dataset.d();
    let mut values = dataset.values().to_vec();
    let mut outlier_mask = vec![false; n];
    for &i in &order[..count] {
        outlier_mask[i] = true;
        for v in &mut values[i * d..(i + 1) * d] {
            let z: f64 = rng.sample(StandardNormal);
            *v += noise_sigma * z;
        }
    }
    let contaminated = Dataset::from_vec(n, d, values)?;
    Ok((contaminated, ContaminationReport { outlier_mask, rate, noise_sigma, seed }))
}
