//! Independent reference implementations used only by tests.
#![allow(dead_code)]

use absorbkit::{Dataset, GaussianSummary, SampleWeights};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// All-pairs neighbor lists: full sort of `(squared distance, index)`.
pub fn brute_force_neighbors(data: &Dataset, k: usize) -> Vec<Vec<usize>> {
    (0..data.n())
        .map(|i| {
            let mut all: Vec<(f64, usize)> = (0..data.n())
                .filter(|&j| j != i)
                .map(|j| {
                    let d2: f64 = data.row(i).iter().zip(data.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
                    (d2, j)
                })
                .collect();
            all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            all.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

/// Weighted neighbor mean evaluated directly from linear-domain weights,
/// finding neighbors by brute force.
pub fn direct_weighted_means(data: &Dataset, weights: &SampleWeights, k: usize) -> Vec<Vec<f64>> {
    let w = weights.weights();
    brute_force_neighbors(data, k)
        .iter()
        .map(|list| {
            let total: f64 = list.iter().map(|&j| w[j]).sum();
            (0..data.d())
                .map(|c| list.iter().map(|&j| w[j] * data.row(j)[c]).sum::<f64>() / total)
                .collect()
        })
        .collect()
}

#[derive(Debug)]
pub enum OracleError {
    OracleDimensionTooLarge(usize),
}

fn log_pdf_1d(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + (x - mean) * (x - mean) / var)
}

/// Composite Simpson quadrature of `p ln(p/q)` over a range covering both
/// densities by 14 standard deviations.
fn kl_quadrature_1d(mp: f64, vp: f64, mq: f64, vq: f64) -> f64 {
    let (sp, sq) = (vp.sqrt(), vq.sqrt());
    let lo = (mp - 14.0 * sp).min(mq - 14.0 * sq);
    let hi = (mp + 14.0 * sp).max(mq + 14.0 * sq);
    let intervals = 40_000;
    let h = (hi - lo) / intervals as f64;
    let f = |x: f64| {
        let lp = log_pdf_1d(x, mp, vp);
        lp.exp() * (lp - log_pdf_1d(x, mq, vq))
    };
    let mut acc = f(lo) + f(hi);
    for i in 1..intervals {
        let x = lo + i as f64 * h;
        acc += if i % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
    }
    acc * h / 3.0
}

struct MvGaussian {
    mean: DVector<f64>,
    chol: DMatrix<f64>,
    inv: DMatrix<f64>,
    log_norm: f64,
}

impl MvGaussian {
    fn new(g: &GaussianSummary) -> Self {
        let d = g.dim();
        let chol = g.cov.clone().cholesky().unwrap().unpack();
        let inv = g.cov.clone().try_inverse().unwrap();
        let log_norm = -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + g.cov.determinant().ln());
        MvGaussian { mean: g.mean.clone(), chol, inv, log_norm }
    }

    fn log_pdf(&self, x: &DVector<f64>) -> f64 {
        let diff = x - &self.mean;
        self.log_norm - 0.5 * (diff.transpose() * &self.inv * &diff)[(0, 0)]
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> DVector<f64> {
        let z = DVector::from_fn(self.mean.len(), |_, _| rng.sample(StandardNormal));
        &self.mean + &self.chol * z
    }
}

/// Monte Carlo estimate of `E_p[ln p - ln q]` and its standard error.
fn kl_monte_carlo(p: &MvGaussian, q: &MvGaussian, draws: usize, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..draws {
        let x = p.sample(rng);
        let v = p.log_pdf(&x) - q.log_pdf(&x);
        sum += v;
        sum_sq += v * v;
    }
    let mean = sum / draws as f64;
    let var = (sum_sq / draws as f64 - mean * mean).max(0.0);
    (mean, (var / draws as f64).sqrt())
}

/// `D(p||q) + D(q||p)`: quadrature in one dimension, Monte Carlo in two or
/// three. Returns the estimate and its standard error (zero for quadrature).
pub fn numeric_kl_oracle(p: &GaussianSummary, q: &GaussianSummary, draws: usize, seed: u64) -> Result<(f64, f64), OracleError> {
    match p.dim() {
        1 => {
            let (mp, vp) = (p.mean[0], p.cov[(0, 0)]);
            let (mq, vq) = (q.mean[0], q.cov[(0, 0)]);
            Ok((kl_quadrature_1d(mp, vp, mq, vq) + kl_quadrature_1d(mq, vq, mp, vp), 0.0))
        }
        2 | 3 => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (gp, gq) = (MvGaussian::new(p), MvGaussian::new(q));
            let (a, se_a) = kl_monte_carlo(&gp, &gq, draws, &mut rng);
            let (b, se_b) = kl_monte_carlo(&gq, &gp, draws, &mut rng);
            Ok((a + b, (se_a * se_a + se_b * se_b).sqrt()))
        }
        d => Err(OracleError::OracleDimensionTooLarge(d)),
    }
}

pub fn gaussian_1d(mean: f64, var: f64) -> GaussianSummary {
    GaussianSummary::new(DVector::from_element(1, mean), DMatrix::from_element(1, 1, var)).unwrap()
}

/// Random SPD matrix `A A^T + 0.1 I` with entries of `A` in `[-1, 1]`.
pub fn random_spd(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(d, d) * 0.1
}

pub fn random_gaussian(d: usize, rng: &mut ChaCha8Rng) -> GaussianSummary {
    let mean = DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0));
    GaussianSummary::new(mean, random_spd(d, rng)).unwrap()
}

pub fn random_dataset(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Dataset {
    let values = (0..n * d).map(|_| rng.random_range(-5.0..5.0)).collect();
    Dataset::from_vec(n, d, values).unwrap()
}

/// Random dataset on a coarse integer grid so that distance ties are common.
pub fn random_grid_dataset(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Dataset {
    let values = (0..n * d).map(|_| rng.random_range(-3i32..=3) as f64).collect();
    Dataset::from_vec(n, d, values).unwrap()
}

/// A tight 2-D cluster around the origin plus one far point as the last row.
pub fn cluster_plus_outlier(n_cluster: usize, far: [f64; 2], seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<[f64; 2]> = (0..n_cluster)
        .map(|_| [0.3 * rng.sample::<f64, _>(StandardNormal), 0.3 * rng.sample::<f64, _>(StandardNormal)])
        .collect();
    rows.push(far);
    Dataset::from_rows(&rows).unwrap()
}
