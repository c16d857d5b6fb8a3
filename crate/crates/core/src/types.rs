//! Domain types shared by every stage of the pipeline.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `n x d` matrix of finite samples, stored row-major.
///
/// Every constructor validates, so holding a `Dataset` means `n >= 1`,
/// `d >= 1` and all entries are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: Vec<f64>,
    n: usize,
    d: usize,
}

impl Dataset {
    /// Builds a dataset from a row-major buffer of `n * d` values.
    pub fn from_vec(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::EmptyDataset);
        }
        if values.len() != n * d {
            return Err(Error::DimensionMismatch { expected: n * d, found: values.len() });
        }
        let dataset = Dataset { values, n, d };
        dataset.validate()?;
        Ok(dataset)
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        let d = rows[0].as_ref().len();
        let mut values = Vec::with_capacity(n * d);
        for row in rows {
            let row = row.as_ref();
            if row.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: row.len() });
            }
            values.extend_from_slice(row);
        }
        Self::from_vec(n, d, values)
    }

    /// Re-checks the dataset invariants.
    pub fn validate(&self) -> Result<&Self> {
        if self.n == 0 || self.d == 0 {
            return Err(Error::EmptyDataset);
        }
        if let Some(pos) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEntry { row: pos / self.d, col: pos % self.d });
        }
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.d)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Copy of the dataset with row `i` removed. Needs `n >= 2`.
    pub fn without_row(&self, i: usize) -> Result<Dataset> {
        if i >= self.n {
            return Err(Error::IndexOutOfRange { index: i, n: self.n });
        }
        if self.n < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: self.n });
        }
        let mut values = Vec::with_capacity((self.n - 1) * self.d);
        values.extend_from_slice(&self.values[..i * self.d]);
        values.extend_from_slice(&self.values[(i + 1) * self.d..]);
        Ok(Dataset { values, n: self.n - 1, d: self.d })
    }

    /// Rows reordered so that row `j` of the result is row `order[j]` of `self`.
    pub fn select_rows(&self, order: &[usize]) -> Result<Dataset> {
        let mut values = Vec::with_capacity(order.len() * self.d);
        for &i in order {
            if i >= self.n {
                return Err(Error::IndexOutOfRange { index: i, n: self.n });
            }
            values.extend_from_slice(self.row(i));
        }
        Dataset::from_vec(order.len(), self.d, values)
    }

    /// Per-column minimum and maximum.
    pub fn column_bounds(&self) -> Vec<(f64, f64)> {
        let mut bounds = vec![(f64::INFINITY, f64::NEG_INFINITY); self.d];
        for row in self.rows() {
            for (b, &v) in bounds.iter_mut().zip(row) {
                b.0 = b.0.min(v);
                b.1 = b.1.max(v);
            }
        }
        bounds
    }

    /// Mean Euclidean distance between corresponding rows of two same-shape datasets.
    pub fn mean_displacement(&self, other: &Dataset) -> Result<f64> {
        if self.n != other.n || self.d != other.d {
            return Err(Error::DimensionMismatch { expected: self.n * self.d, found: other.n * other.d });
        }
        let total: f64 = self.rows().zip(other.rows()).map(|(a, b)| euclidean(a, b)).sum();
        Ok(total / self.n as f64)
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

/// Numerically stable `ln(sum(exp(x)))`.
pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Per-sample weights held in the log domain and kept normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleWeights {
    log_w: Vec<f64>,
    iteration: usize,
}

impl SampleWeights {
    /// `1/n` for every sample, iteration zero.
    pub fn uniform(n: usize) -> Self {
        let lw = -(n as f64).ln();
        SampleWeights { log_w: vec![lw; n], iteration: 0 }
    }

    /// Normalizes an arbitrary vector of log-weights. At least one entry must
    /// be finite and none may be NaN or `+inf`.
    pub fn from_log_weights(log_w: Vec<f64>, iteration: usize) -> Result<Self> {
        if log_w.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if let Some(i) = log_w.iter().position(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::NonPositiveDensity(i));
        }
        let mut weights = SampleWeights { log_w, iteration };
        weights.normalize()?;
        Ok(weights)
    }

    /// Builds normalized weights from nonnegative linear-domain values.
    pub fn from_weights(w: &[f64]) -> Result<Self> {
        if let Some(i) = w.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::NonPositiveDensity(i));
        }
        Self::from_log_weights(w.iter().map(|v| v.ln()).collect(), 0)
    }

    pub(crate) fn normalize(&mut self) -> Result<()> {
        let total = log_sum_exp(&self.log_w);
        if !total.is_finite() {
            return Err(Error::NonPositiveDensity(0));
        }
        for v in &mut self.log_w {
            *v -= total;
        }
        Ok(())
    }

    pub(crate) fn advance(&mut self) {
        self.iteration += 1;
    }

    pub fn len(&self) -> usize {
        self.log_w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_w.is_empty()
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_w
    }

    pub(crate) fn log_weights_mut(&mut self) -> &mut [f64] {
        &mut self.log_w
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.log_w[i].exp()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_w.iter().map(|v| v.exp()).collect()
    }
}

/// For each sample, the indices of its `k` nearest other samples, ordered by
/// ascending distance with ties broken by ascending index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborhoodIndex {
    k: usize,
    neighbors: Vec<usize>,
}

impl NeighborhoodIndex {
    pub(crate) fn from_flat(k: usize, neighbors: Vec<usize>) -> Self {
        debug_assert!(k > 0 && neighbors.len() % k == 0);
        NeighborhoodIndex { k, neighbors }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.neighbors.len() / self.k
    }

    /// Neighbor list of sample `i`. Panics when `i >= n`; use
    /// [`crate::neighbors::neighbors_of`] for a checked lookup.
    pub fn list(&self, i: usize) -> &[usize] {
        &self.neighbors[i * self.k..(i + 1) * self.k]
    }

    pub fn lists(&self) -> impl ExactSizeIterator<Item = &[usize]> + '_ {
        self.neighbors.chunks_exact(self.k)
    }
}

/// Mean and covariance of a multivariate Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSummary {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianSummary {
    /// Checks that `cov` is square, matches `mean`, is symmetric within
    /// `1e-10` and admits a Cholesky factorization.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: cov.nrows() });
        }
        for i in 0..d {
            for j in 0..i {
                if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-10 {
                    return Err(Error::NotPositiveDefinite);
                }
            }
        }
        if cov.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(GaussianSummary { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Bandwidth selection for the leave-one-out kernel density backend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    /// Scott's factor `n^(-1/(d+4))` times the per-dimension standard deviation.
    Scott,
    /// The same bandwidth in every dimension.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityBackend {
    Gmm { components: usize },
    LeaveOneOutKde { bandwidth: BandwidthRule },
}

impl Default for DensityBackend {
    fn default() -> Self {
        DensityBackend::Gmm { components: 1 }
    }
}

impl fmt::Display for DensityBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DensityBackend::Gmm { components } => write!(f, "gmm:{components}"),
            DensityBackend::LeaveOneOutKde { bandwidth: BandwidthRule::Scott } => write!(f, "kde:scott"),
            DensityBackend::LeaveOneOutKde { bandwidth: BandwidthRule::Fixed(h) } => write!(f, "kde:{h}"),
        }
    }
}

impl FromStr for DensityBackend {
    type Err = Error;

    /// Accepts `gmm`, `gmm:<m>`, `kde`, `kde:scott` and `kde:<bandwidth>`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = match s.split_once(':') {
            Some((kind, arg)) => (kind, Some(arg)),
            None => (s, None),
        };
        let invalid = || Error::ConfigInvalid(format!("unrecognised density backend `{s}`"));
        match (kind, arg) {
            ("gmm", None) => Ok(DensityBackend::Gmm { components: 1 }),
            ("gmm", Some(m)) => {
                let components = m.parse().map_err(|_| invalid())?;
                Ok(DensityBackend::Gmm { components })
            }
            ("kde", None) | ("kde", Some("scott")) => {
                Ok(DensityBackend::LeaveOneOutKde { bandwidth: BandwidthRule::Scott })
            }
            ("kde", Some(h)) => {
                let h = h.parse().map_err(|_| invalid())?;
                Ok(DensityBackend::LeaveOneOutKde { bandwidth: BandwidthRule::Fixed(h) })
            }
            _ => Err(invalid()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorbConfig {
    /// Neighbors per sample.
    pub k: usize,
    /// Stop once the divergence between successive Gaussian fits drops below this.
    pub epsilon: f64,
    pub max_iterations: usize,
    pub density_backend: DensityBackend,
    /// Added to covariance diagonals wherever a covariance is estimated.
    pub cov_regularization: f64,
    pub seed: u64,
    /// Keep a copy of the positions after every iteration.
    #[serde(default)]
    pub record_snapshots: bool,
}

impl Default for AbsorbConfig {
    fn default() -> Self {
        AbsorbConfig {
            k: 10,
            epsilon: 1e-3,
            max_iterations: 50,
            density_backend: DensityBackend::default(),
            cov_regularization: 1e-6,
            seed: 0,
            record_snapshots: false,
        }
    }
}

impl AbsorbConfig {
    /// Checks the configuration against a dataset of `n` samples.
    pub fn validate_for(&self, n: usize) -> Result<()> {
        if n < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: n });
        }
        if self.k == 0 || self.k >= n {
            return Err(Error::KTooLarge { k: self.k, n });
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::ConfigInvalid(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_iterations == 0 {
            return Err(Error::ConfigInvalid("max_iterations must be at least 1".into()));
        }
        if !(self.cov_regularization > 0.0 && self.cov_regularization.is_finite()) {
            return Err(Error::ConfigInvalid(format!(
                "cov_regularization must be positive, got {}",
                self.cov_regularization
            )));
        }
        match self.density_backend {
            DensityBackend::Gmm { components: 0 } => {
                Err(Error::ConfigInvalid("a mixture needs at least one component".into()))
            }
            DensityBackend::Gmm { components } if components > n => {
                Err(Error::TooFewSamples { needed: components, got: n })
            }
            DensityBackend::LeaveOneOutKde { bandwidth: BandwidthRule::Fixed(h) } if !(h > 0.0 && h.is_finite()) => {
                Err(Error::ConfigInvalid(format!("bandwidth must be positive, got {h}")))
            }
            _ => Ok(()),
        }
    }
}
