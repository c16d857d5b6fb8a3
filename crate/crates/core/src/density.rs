//! Global density estimates used to weight samples.
//!
//! The weight of sample `i` is multiplied every iteration by the density of
//! the *other* samples evaluated at `x_i`. Two realizations are provided:
//!
//! * a Gaussian mixture fitted by EM. One mixture is fitted per iteration on
//!   all `n` samples, so each sample contributes `O(1/n)` to its own density.
//!   This is the cheap approximation of the leave-one-out semantics.
//! * a Gaussian kernel density estimate evaluated with sample `i` removed from
//!   the kernel sum and from the bandwidth statistics. This is exact
//!   leave-one-out and serves as the reference for the mixture backend.
//!
//! The derivation behind the weight update also carries a proposal density
//! and a neighbor-set likelihood; both are folded into a unit ratio, so
//! neither has a runtime counterpart here.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::types::{log_sum_exp, squared_distance, AbsorbConfig, BandwidthRule, Dataset, DensityBackend};

const EM_MAX_ITERATIONS: usize = 200;
const EM_RELATIVE_TOLERANCE: f64 = 1e-8;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// A Gaussian with a cached Cholesky factor for log-density evaluation.
#[derive(Debug, Clone, PartialEq)]
struct FactoredGaussian {
    /// Lower Cholesky factor, row-major.
    chol: Vec<f64>,
    /// `-d/2 ln(2 pi) - sum(ln L_ii)`
    log_norm: f64,
}

impl FactoredGaussian {
    fn new(cov: &DMatrix<f64>) -> Option<Self> {
        let d = cov.nrows();
        let l = cov.clone().cholesky()?.unpack();
        let mut chol = vec![0.0; d * d];
        let mut log_det_half = 0.0;
        for r in 0..d {
            for c in 0..=r {
                chol[r * d + c] = l[(r, c)];
            }
            log_det_half += l[(r, r)].ln();
        }
        Some(FactoredGaussian { chol, log_norm: -0.5 * d as f64 * LN_2PI - log_det_half })
    }

    fn log_pdf(&self, mean: &[f64], x: &[f64], scratch: &mut Vec<f64>) -> f64 {
        let d = mean.len();
        scratch.clear();
        let mut maha = 0.0;
        for r in 0..d {
            let mut acc = x[r] - mean[r];
            for (c, y) in scratch.iter().enumerate() {
                acc -= self.chol[r * d + c] * y;
            }
            let y = acc / self.chol[r * d + r];
            maha += y * y;
            scratch.push(y);
        }
        self.log_norm - 0.5 * maha
    }
}

/// Gaussian mixture fitted by expectation maximization.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    weights: Vec<f64>,
    means: Vec<DVector<f64>>,
    covariances: Vec<DMatrix<f64>>,
    factors: Vec<FactoredGaussian>,
    log_likelihoods: Vec<f64>,
    converged: bool,
}

impl GaussianMixture {
    /// Builds a mixture from explicit parameters. Weights are renormalized.
    pub fn from_parts(weights: Vec<f64>, means: Vec<DVector<f64>>, covariances: Vec<DMatrix<f64>>) -> Result<Self> {
        let m = weights.len();
        if m == 0 || means.len() != m || covariances.len() != m {
            return Err(Error::ConfigInvalid("mixture parts have inconsistent lengths".into()));
        }
        let d = means[0].len();
        if let Some(bad) = means.iter().map(|mu| mu.len()).chain(covariances.iter().map(|c| c.nrows())).find(|&len| len != d) {
            return Err(Error::DimensionMismatch { expected: d, found: bad });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::ConfigInvalid("mixture weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        let weights = weights.iter().map(|w| w / total).collect();
        let factors = covariances
            .iter()
            .map(FactoredGaussian::new)
            .collect::<Option<Vec<_>>>()
            .ok_or(Error::NotPositiveDefinite)?;
        Ok(GaussianMixture { weights, means, covariances, factors, log_likelihoods: Vec::new(), converged: true })
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[DVector<f64>] {
        &self.means
    }

    pub fn covariances(&self) -> &[DMatrix<f64>] {
        &self.covariances
    }

    /// Training log-likelihood after each E-step, in order.
    pub fn log_likelihood_trace(&self) -> &[f64] {
        &self.log_likelihoods
    }

    /// Whether EM stopped on the relative tolerance rather than the iteration cap.
    pub fn converged(&self) -> bool {
        self.converged
    }

    fn component_log_terms(&self, x: &[f64], scratch: &mut Vec<f64>, out: &mut [f64]) {
        for (j, slot) in out.iter_mut().enumerate() {
            *slot = self.weights[j].ln() + self.factors[j].log_pdf(self.means[j].as_slice(), x, scratch);
        }
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        let mut scratch = Vec::with_capacity(x.len());
        let mut terms = vec![0.0; self.components()];
        self.component_log_terms(x, &mut scratch, &mut terms);
        Ok(log_sum_exp(&terms))
    }
}

/// Gaussian product-kernel density estimate with per-dimension bandwidths.
#[derive(Debug, Clone, PartialEq)]
pub struct KdeModel {
    points: Dataset,
    bandwidth: Vec<f64>,
}

impl KdeModel {
    pub fn fit(points: &Dataset, rule: BandwidthRule, cov_regularization: f64) -> Result<Self> {
        let bandwidth = match rule {
            BandwidthRule::Fixed(h) => {
                if !(h > 0.0 && h.is_finite()) {
                    return Err(Error::ConfigInvalid(format!("bandwidth must be positive, got {h}")));
                }
                vec![h; points.d()]
            }
            BandwidthRule::Scott => {
                let n = points.n();
                let mut mean = vec![0.0; points.d()];
                let mut m2 = vec![0.0; points.d()];
                for row in points.rows() {
                    for (mu, x) in mean.iter_mut().zip(row) {
                        *mu += x;
                    }
                }
                mean.iter_mut().for_each(|mu| *mu /= n as f64);
                for row in points.rows() {
                    for ((s, mu), x) in m2.iter_mut().zip(&mean).zip(row) {
                        *s += (x - mu) * (x - mu);
                    }
                }
                m2.iter().map(|&s| scott_bandwidth(n, points.d(), s, cov_regularization)).collect()
            }
        };
        Ok(KdeModel { points: points.clone(), bandwidth })
    }

    pub fn bandwidth(&self) -> &[f64] {
        &self.bandwidth
    }

    pub fn dim(&self) -> usize {
        self.points.d()
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        let terms: Vec<f64> = self.points.rows().map(|p| log_product_kernel(x, p, &self.bandwidth)).collect();
        Ok(log_sum_exp(&terms) - (self.points.n() as f64).ln())
    }
}

/// Scott bandwidth from `m2 = sum (x - mean)^2` over `n` samples. The
/// standard deviation (unbiased when `n >= 2`) is floored at
/// `sqrt(cov_regularization)` so coincident samples keep a usable kernel.
fn scott_bandwidth(n: usize, d: usize, m2: f64, cov_regularization: f64) -> f64 {
    let var = if n >= 2 { m2.max(0.0) / (n - 1) as f64 } else { 0.0 };
    let sigma = var.sqrt().max(cov_regularization.sqrt());
    sigma * (n as f64).powf(-1.0 / (d as f64 + 4.0))
}

fn log_product_kernel(x: &[f64], center: &[f64], bandwidth: &[f64]) -> f64 {
    x.iter()
        .zip(center)
        .zip(bandwidth)
        .map(|((xi, ci), h)| {
            let z = (xi - ci) / h;
            -0.5 * z * z - h.ln() - 0.5 * LN_2PI
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub enum DensityModel {
    Gmm(GaussianMixture),
    Kde(KdeModel),
}

impl DensityModel {
    pub fn dim(&self) -> usize {
        match self {
            DensityModel::Gmm(g) => g.dim(),
            DensityModel::Kde(k) => k.dim(),
        }
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        match self {
            DensityModel::Gmm(g) => g.log_density(x),
            DensityModel::Kde(k) => k.log_density(x),
        }
    }
}

impl From<GaussianMixture> for DensityModel {
    fn from(g: GaussianMixture) -> Self {
        DensityModel::Gmm(g)
    }
}

impl From<KdeModel> for DensityModel {
    fn from(k: KdeModel) -> Self {
        DensityModel::Kde(k)
    }
}

/// Density of `model` at `point`. May underflow to zero far from the data;
/// use [`DensityModel::log_density`] where that matters.
pub fn evaluate_density(model: &DensityModel, point: &[f64]) -> Result<f64> {
    model.log_density(point).map(f64::exp)
}

/// Picks `m` distinct starting rows: the first uniformly, the rest with
/// probability proportional to squared distance from the nearest pick.
fn kmeans_plus_plus(dataset: &Dataset, m: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = dataset.n();
    let mut picks = vec![rng.random_range(0..n)];
    let mut nearest: Vec<f64> = (0..n).map(|i| squared_distance(dataset.row(i), dataset.row(picks[0]))).collect();
    while picks.len() < m {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &w) in nearest.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc >= target {
                    chosen = Some(i);
                    break;
                }
            }
            chosen.unwrap_or_else(|| nearest.iter().rposition(|&w| w > 0.0).unwrap_or(0))
        } else {
            let free: Vec<usize> = (0..n).filter(|i| !picks.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        for (i, best) in nearest.iter_mut().enumerate() {
            *best = best.min(squared_distance(dataset.row(i), dataset.row(next)));
        }
        picks.push(next);
    }
    picks
}

fn biased_covariance(dataset: &Dataset, resp: Option<&[f64]>, mean: &DVector<f64>, total: f64) -> DMatrix<f64> {
    let d = dataset.d();
    let mut cov = DMatrix::zeros(d, d);
    let mut centered = vec![0.0; d];
    for (i, row) in dataset.rows().enumerate() {
        let r = resp.map_or(1.0, |r| r[i]);
        if r == 0.0 {
            continue;
        }
        for (c, (x, mu)) in centered.iter_mut().zip(row.iter().zip(mean.iter())) {
            *c = x - mu;
        }
        for a in 0..d {
            let ra = r * centered[a];
            for b in 0..=a {
                cov[(a, b)] += ra * centered[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..=a {
            let v = cov[(a, b)] / total;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    cov
}

fn add_diagonal(cov: &mut DMatrix<f64>, lambda: f64) {
    for a in 0..cov.nrows() {
        cov[(a, a)] += lambda;
    }
}

/// Fits an `m`-component full-covariance mixture by EM.
///
/// Starts from k-means++ means drawn with `seed`, uniform weights and the
/// global covariance. Stops when the relative change of the training
/// log-likelihood falls below `1e-8`, or after 200 iterations.
/// `cov_regularization` is added to every covariance diagonal each M-step.
pub fn fit_gmm(dataset: &Dataset, m_components: usize, cov_regularization: f64, seed: u64) -> Result<GaussianMixture> {
    let n = dataset.n();
    let d = dataset.d();
    if m_components == 0 {
        return Err(Error::ConfigInvalid("a mixture needs at least one component".into()));
    }
    if n < m_components {
        return Err(Error::TooFewSamples { needed: m_components, got: n });
    }
    if !(cov_regularization >= 0.0 && cov_regularization.is_finite()) {
        return Err(Error::ConfigInvalid(format!("cov_regularization must be nonnegative, got {cov_regularization}")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = kmeans_plus_plus(dataset, m_components, &mut rng);

    let global_mean = DVector::from_iterator(
        d,
        (0..d).map(|c| dataset.rows().map(|r| r[c]).sum::<f64>() / n as f64),
    );
    let mut global_cov = biased_covariance(dataset, None, &global_mean, n as f64);
    add_diagonal(&mut global_cov, cov_regularization);

    let means: Vec<DVector<f64>> = picks.iter().map(|&i| DVector::from_column_slice(dataset.row(i))).collect();
    let covariances = vec![global_cov; m_components];
    let weights = vec![1.0 / m_components as f64; m_components];
    let mut model = GaussianMixture::from_parts(weights, means, covariances).map_err(|e| match e {
        Error::NotPositiveDefinite => Error::DegenerateComponent { component: 0, effective_count: n as f64 },
        other => other,
    })?;
    model.converged = false;

    let mut log_resp = vec![0.0; n * m_components];
    for iteration in 0..EM_MAX_ITERATIONS {
        // E-step
        let row_ll: Vec<f64> = log_resp
            .par_chunks_mut(m_components)
            .enumerate()
            .map(|(i, terms)| {
                let mut scratch = Vec::with_capacity(d);
                model.component_log_terms(dataset.row(i), &mut scratch, terms);
                let lse = log_sum_exp(terms);
                terms.iter_mut().for_each(|t| *t -= lse);
                lse
            })
            .collect();
        let ll: f64 = row_ll.iter().sum();
        if let Some(&prev) = model.log_likelihoods.last() {
            if (ll - prev).abs() <= EM_RELATIVE_TOLERANCE * prev.abs() {
                model.log_likelihoods.push(ll);
                model.converged = true;
                break;
            }
        }
        model.log_likelihoods.push(ll);
        if iteration + 1 == EM_MAX_ITERATIONS {
            break;
        }

        // M-step
        let mut weights = Vec::with_capacity(m_components);
        let mut means = Vec::with_capacity(m_components);
        let mut covariances = Vec::with_capacity(m_components);
        for j in 0..m_components {
            let resp: Vec<f64> = (0..n).map(|i| log_resp[i * m_components + j].exp()).collect();
            let effective: f64 = resp.iter().sum();
            if !(effective > 0.0) || (cov_regularization == 0.0 && effective < (d + 1) as f64) {
                return Err(Error::DegenerateComponent { component: j, effective_count: effective });
            }
            let mut mean = DVector::zeros(d);
            for (row, r) in dataset.rows().zip(&resp) {
                for (mu, x) in mean.iter_mut().zip(row) {
                    *mu += r * x;
                }
            }
            mean /= effective;
            let mut cov = biased_covariance(dataset, Some(&resp), &mean, effective);
            add_diagonal(&mut cov, cov_regularization);
            weights.push(effective / n as f64);
            means.push(mean);
            covariances.push(cov);
        }
        let trace = std::mem::take(&mut model.log_likelihoods);
        model = GaussianMixture::from_parts(weights, means, covariances).map_err(|e| match e {
            Error::NotPositiveDefinite => Error::DegenerateComponent { component: 0, effective_count: 0.0 },
            other => other,
        })?;
        model.log_likelihoods = trace;
        model.converged = false;
    }
    Ok(model)
}

fn check_loo_preconditions(dataset: &Dataset, i: usize) -> Result<()> {
    if dataset.n() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: dataset.n() });
    }
    if i >= dataset.n() {
        return Err(Error::IndexOutOfRange { index: i, n: dataset.n() });
    }
    Ok(())
}

/// Density of the other samples at sample `i` under the configured backend.
///
/// The kernel backend refits on the `n - 1` remaining rows; the mixture
/// backend fits on all rows (see the module docs).
pub fn leave_one_out_density(dataset: &Dataset, i: usize, config: &AbsorbConfig) -> Result<f64> {
    check_loo_preconditions(dataset, i)?;
    let log_density = match config.density_backend {
        DensityBackend::Gmm { components } => {
            fit_gmm(dataset, components, config.cov_regularization, config.seed)?.log_density(dataset.row(i))?
        }
        DensityBackend::LeaveOneOutKde { bandwidth } => {
            let rest = dataset.without_row(i)?;
            KdeModel::fit(&rest, bandwidth, config.cov_regularization)?.log_density(dataset.row(i))?
        }
    };
    Ok(log_density.exp())
}

/// Natural log of the leave-one-out density at every sample.
///
/// For the mixture backend a single fit is shared by all samples. For the
/// kernel backend each sample's bandwidth statistics and kernel sum exclude
/// that sample.
pub fn leave_one_out_log_densities(dataset: &Dataset, config: &AbsorbConfig) -> Result<Vec<f64>> {
    let n = dataset.n();
    let d = dataset.d();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    match config.density_backend {
        DensityBackend::Gmm { components } => {
            let model = fit_gmm(dataset, components, config.cov_regularization, config.seed)?;
            (0..n).into_par_iter().map(|i| model.log_density(dataset.row(i))).collect()
        }
        DensityBackend::LeaveOneOutKde { bandwidth: rule } => {
            let (mean, m2) = column_moments(dataset);
            let rest = (n - 1) as f64;
            Ok((0..n)
                .into_par_iter()
                .map(|i| {
                    let x = dataset.row(i);
                    let bandwidth: Vec<f64> = match rule {
                        BandwidthRule::Fixed(h) => vec![h; d],
                        BandwidthRule::Scott => (0..d)
                            .map(|c| {
                                // remove x from the running moments
                                let mean_rest = (mean[c] * n as f64 - x[c]) / rest;
                                let m2_rest = m2[c] - (x[c] - mean[c]) * (x[c] - mean_rest);
                                scott_bandwidth(n - 1, d, m2_rest, config.cov_regularization)
                            })
                            .collect(),
                    };
                    let terms: Vec<f64> = (0..n)
                        .filter(|&j| j != i)
                        .map(|j| log_product_kernel(x, dataset.row(j), &bandwidth))
                        .collect();
                    log_sum_exp(&terms) - rest.ln()
                })
                .collect())
        }
    }
}

fn column_moments(dataset: &Dataset) -> (Vec<f64>, Vec<f64>) {
    let n = dataset.n() as f64;
    let mut mean = vec![0.0; dataset.d()];
    for row in dataset.rows() {
        for (mu, x) in mean.iter_mut().zip(row) {
            *mu += x;
        }
    }
    mean.iter_mut().for_each(|mu| *mu /= n);
    let mut m2 = vec![0.0; dataset.d()];
    for row in dataset.rows() {
        for ((s, mu), x) in m2.iter_mut().zip(&mean).zip(row) {
            *s += (x - mu) * (x - mu);
        }
    }
    (mean, m2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn standard_normal_model(d: usize) -> DensityModel {
        GaussianMixture::from_parts(vec![1.0], vec![DVector::zeros(d)], vec![DMatrix::identity(d, d)])
            .unwrap()
            .into()
    }

    #[test]
    fn standard_normal_peaks() {
        let p1 = evaluate_density(&standard_normal_model(1), &[0.0]).unwrap();
        assert!((p1 - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
        assert!((p1 - 0.39894).abs() < 1e-5);
        let p2 = evaluate_density(&standard_normal_model(2), &[0.0, 0.0]).unwrap();
        assert!((p2 - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!((p2 - 0.15915).abs() < 1e-5);
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        let err = evaluate_density(&standard_normal_model(2), &[0.0]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 2, found: 1 }));
        let kde = KdeModel::fit(&Dataset::from_rows(&[[0.0], [1.0]]).unwrap(), BandwidthRule::Fixed(1.0), 0.0).unwrap();
        assert!(matches!(kde.log_density(&[0.0, 0.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn single_component_is_sample_moments() {
        let ds = Dataset::from_rows(&[[0.0, 1.0], [2.0, 5.0], [4.0, 0.0], [-1.0, 2.0]]).unwrap();
        let lambda = 1e-3;
        let g = fit_gmm(&ds, 1, lambda, 3).unwrap();
        let mean = [1.25, 2.0];
        for c in 0..2 {
            assert!((g.means()[0][c] - mean[c]).abs() < 1e-12);
        }
        let mut cov = [[0.0; 2]; 2];
        for row in ds.rows() {
            for a in 0..2 {
                for b in 0..2 {
                    cov[a][b] += (row[a] - mean[a]) * (row[b] - mean[b]) / 4.0;
                }
            }
        }
        for a in 0..2 {
            for b in 0..2 {
                let expected = cov[a][b] + if a == b { lambda } else { 0.0 };
                assert!((g.covariances()[0][(a, b)] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn too_few_samples_for_components() {
        let ds = Dataset::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        assert!(matches!(fit_gmm(&ds, 4, 1e-6, 0), Err(Error::TooFewSamples { needed: 4, got: 3 })));
    }

    #[test]
    fn degenerate_without_regularization() {
        let ds = Dataset::from_rows(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]).unwrap();
        assert!(matches!(fit_gmm(&ds, 1, 0.0, 0), Err(Error::DegenerateComponent { .. })));
        assert!(fit_gmm(&ds, 1, 1e-6, 0).is_ok());
    }

    #[test]
    fn two_point_kde_hand_value() {
        let ds = Dataset::from_rows(&[[0.0], [1.0]]).unwrap();
        let cfg = AbsorbConfig {
            k: 1,
            density_backend: DensityBackend::LeaveOneOutKde { bandwidth: BandwidthRule::Fixed(1.0) },
            ..Default::default()
        };
        let expected = (-0.5f64).exp() / (2.0 * PI).sqrt();
        let got = leave_one_out_density(&ds, 0, &cfg).unwrap();
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 0.24197).abs() < 1e-5);
        let batch = leave_one_out_log_densities(&ds, &cfg).unwrap();
        assert!((batch[0].exp() - expected).abs() < 1e-15);
    }

    #[test]
    fn symmetric_data_gives_symmetric_density() {
        let ds = Dataset::from_rows(&[[-1.5], [0.0], [1.5]]).unwrap();
        for backend in [
            DensityBackend::LeaveOneOutKde { bandwidth: BandwidthRule::Scott },
            DensityBackend::LeaveOneOutKde { bandwidth: BandwidthRule::Fixed(0.7) },
            DensityBackend::Gmm { components: 1 },
        ] {
            let cfg = AbsorbConfig { k: 1, density_backend: backend, ..Default::default() };
            let lo = leave_one_out_density(&ds, 0, &cfg).unwrap();
            let hi = leave_one_out_density(&ds, 2, &cfg).unwrap();
            assert_eq!(lo, hi, "{backend}");
        }
    }

    #[test]
    fn single_sample_is_too_few() {
        let ds = Dataset::from_rows(&[[1.0]]).unwrap();
        let cfg = AbsorbConfig::default();
        assert!(matches!(leave_one_out_density(&ds, 0, &cfg), Err(Error::TooFewSamples { .. })));
        let ds = Dataset::from_rows(&[[1.0], [2.0]]).unwrap();
        assert!(matches!(leave_one_out_density(&ds, 2, &cfg), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn batch_kde_matches_refit_per_sample() {
        let rows: Vec<[f64; 2]> = (0..25).map(|i| [(i as f64 * 0.37).sin() * 3.0, (i as f64 * 0.91).cos()]).collect();
        let ds = Dataset::from_rows(&rows).unwrap();
        let cfg = AbsorbConfig {
            k: 3,
            density_backend: DensityBackend::LeaveOneOutKde { bandwidth: BandwidthRule::Scott },
            ..Default::default()
        };
        let batch = leave_one_out_log_densities(&ds, &cfg).unwrap();
        for i in 0..ds.n() {
            let single = leave_one_out_density(&ds, i, &cfg).unwrap().ln();
            assert!((batch[i] - single).abs() < 1e-10, "row {i}: {} vs {single}", batch[i]);
        }
    }
}
