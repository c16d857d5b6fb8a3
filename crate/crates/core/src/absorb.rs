//! The absorbing iteration.
//!
//! Each iteration
//!
//! 1. multiplies every sample weight by the leave-one-out density at that
//!    sample (weights accumulate across iterations and are renormalized),
//! 2. rebuilds the k-nearest-neighbor index on the current positions,
//! 3. replaces every sample, synchronously, by the weighted mean of its
//!    neighbors,
//! 4. compares a Gaussian fit of the new positions with the previous fit and
//!    stops once their symmetric divergence drops below `epsilon`.
//!
//! A sample never contributes to its own re-estimate, so an isolated outlier
//! is rebuilt entirely from the samples around it. Sets of samples that are
//! already represented by their neighbors are dropped from the conditioning
//! in the weight derivation, which is what reduces the weight factor to the
//! plain leave-one-out density.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::leave_one_out_log_densities;
use crate::error::{Error, Result};
use crate::metrics::{fit_gaussian, gaussian_divergence};
use crate::neighbors::build_index;
use crate::types::{AbsorbConfig, Dataset, NeighborhoodIndex, SampleWeights};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based iteration number.
    pub iteration: usize,
    /// Divergence between the Gaussian fits before and after this iteration.
    pub divergence: f64,
    pub mean_displacement: f64,
    pub min_weight: f64,
    pub max_weight: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbsorbResult {
    pub config: AbsorbConfig,
    pub denoised: Dataset,
    pub final_weights: SampleWeights,
    pub trace: IterationTrace,
    /// True iff the loop stopped on the divergence threshold.
    pub converged: bool,
    pub iterations_run: usize,
    /// Positions after each iteration, when requested in the config.
    pub snapshots: Vec<Dataset>,
}

/// Multiplies each weight by the matching density and renormalizes.
pub fn update_weights(weights: &SampleWeights, densities: &[f64]) -> Result<SampleWeights> {
    if let Some(i) = densities.iter().position(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(Error::NonPositiveDensity(i));
    }
    let logs: Vec<f64> = densities.iter().map(|p| p.ln()).collect();
    update_weights_log(weights, &logs)
}

/// [`update_weights`] with densities given as natural logs, which keeps
/// samples far outside the data from underflowing to zero.
pub fn update_weights_log(weights: &SampleWeights, log_densities: &[f64]) -> Result<SampleWeights> {
    if log_densities.len() != weights.len() {
        return Err(Error::DimensionMismatch { expected: weights.len(), found: log_densities.len() });
    }
    if let Some(i) = log_densities.iter().position(|l| !l.is_finite()) {
        return Err(Error::NonPositiveDensity(i));
    }
    let mut next = weights.clone();
    for (lw, ld) in next.log_weights_mut().iter_mut().zip(log_densities) {
        *lw += ld;
    }
    next.normalize()?;
    next.advance();
    Ok(next)
}

/// Replaces every sample by the weighted mean of its neighbors.
///
/// All rows are computed from the input positions. Each coordinate of the
/// result is clamped to the range spanned by the neighbors, which the exact
/// weighted mean never leaves; this only removes rounding overshoot.
pub fn absorb_step(dataset: &Dataset, weights: &SampleWeights, index: &NeighborhoodIndex) -> Result<Dataset> {
    let n = dataset.n();
    let d = dataset.d();
    if index.n() != n {
        return Err(Error::DimensionMismatch { expected: n, found: index.n() });
    }
    if weights.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: weights.len() });
    }
    let log_w = weights.log_weights();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let neighbors = index.list(i);
            let shift = neighbors.iter().map(|&j| log_w[j]).fold(f64::NEG_INFINITY, f64::max);
            if shift == f64::NEG_INFINITY {
                return Err(Error::ZeroWeightNeighborhood(i));
            }
            let mut acc = vec![0.0; d];
            let mut lo = vec![f64::INFINITY; d];
            let mut hi = vec![f64::NEG_INFINITY; d];
            let mut total = 0.0;
            for &j in neighbors {
                let w = (log_w[j] - shift).exp();
                total += w;
                for (c, &x) in dataset.row(j).iter().enumerate() {
                    acc[c] += w * x;
                    lo[c] = lo[c].min(x);
                    hi[c] = hi[c].max(x);
                }
            }
            Ok(acc.iter().zip(lo.iter().zip(&hi)).map(|(a, (l, h))| (a / total).clamp(*l, *h)).collect())
        })
        .collect::<Result<_>>()?;
    Dataset::from_vec(n, d, rows.concat())
}

/// Runs the absorbing loop until the divergence between successive Gaussian
/// fits falls below `config.epsilon` or `config.max_iterations` is reached.
pub fn run(dataset: &Dataset, config: &AbsorbConfig) -> Result<AbsorbResult> {
    dataset.validate()?;
    config.validate_for(dataset.n())?;

    let mut weights = SampleWeights::uniform(dataset.n());
    let mut current = dataset.clone();
    let mut previous_fit = fit_gaussian(&current, config.cov_regularization)?;
    let mut trace = IterationTrace::default();
    let mut snapshots = Vec::new();
    let mut converged = false;

    for iteration in 1..=config.max_iterations {
        let log_densities = leave_one_out_log_densities(&current, config)?;
        weights = update_weights_log(&weights, &log_densities)?;
        let index = build_index(&current, config.k)?;
        let next = absorb_step(&current, &weights, &index)?;

        let fit = fit_gaussian(&next, config.cov_regularization)?;
        let divergence = gaussian_divergence(&previous_fit, &fit)?;
        let w = weights.weights();
        trace.records.push(IterationRecord {
            iteration,
            divergence,
            mean_displacement: current.mean_displacement(&next)?,
            min_weight: w.iter().copied().fold(f64::INFINITY, f64::min),
            max_weight: w.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        });
        if config.record_snapshots {
            snapshots.push(next.clone());
        }
        current = next;
        previous_fit = fit;
        if divergence < config.epsilon {
            converged = true;
            break;
        }
    }

    Ok(AbsorbResult {
        config: config.clone(),
        denoised: current,
        final_weights: weights,
        iterations_run: trace.len(),
        trace,
        converged,
        snapshots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{BandwidthRule, DensityBackend};

    #[test]
    fn constant_density_keeps_uniform_weights() {
        let w = update_weights(&SampleWeights::uniform(4), &[0.7; 4]).unwrap();
        for v in w.weights() {
            assert!((v - 0.25).abs() < 1e-15);
        }
        assert_eq!(w.iteration(), 1);
    }

    #[test]
    fn densities_reweight_proportionally() {
        let w = update_weights(&SampleWeights::uniform(2), &[0.4, 0.1]).unwrap();
        let v = w.weights();
        assert!((v[0] - 0.8).abs() < 1e-15);
        assert!((v[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn zero_density_is_rejected() {
        let err = update_weights(&SampleWeights::uniform(3), &[0.5, 0.0, 0.1]).unwrap_err();
        assert!(matches!(err, Error::NonPositiveDensity(1)));
        let err = update_weights(&SampleWeights::uniform(3), &[0.5, 0.1]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn equal_weights_give_neighbor_mean() {
        let ds = Dataset::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let index = build_index(&ds, 2).unwrap();
        let out = absorb_step(&ds, &SampleWeights::uniform(3), &index).unwrap();
        assert_eq!(out.values(), &[1.5, 1.0, 0.5]);
    }

    #[test]
    fn weighted_neighbor_mean() {
        // sample 2 sits between its two neighbors; only their weights matter
        let ds = Dataset::from_rows(&[[0.0], [10.0], [4.0]]).unwrap();
        let index = build_index(&ds, 2).unwrap();
        assert_eq!(index.list(2), &[0, 1]);
        let w = SampleWeights::from_weights(&[0.8, 0.2, 0.5]).unwrap();
        let out = absorb_step(&ds, &w, &index).unwrap();
        assert!((out.row(2)[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn vanished_neighborhood_is_an_error() {
        let ds = Dataset::from_rows(&[[0.0], [1.0], [5.0]]).unwrap();
        let index = build_index(&ds, 1).unwrap();
        let w = SampleWeights::from_log_weights(vec![f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0], 0).unwrap();
        assert!(matches!(absorb_step(&ds, &w, &index), Err(Error::ZeroWeightNeighborhood(0))));
    }

    #[test]
    fn coincident_points_are_a_fixed_point() {
        let ds = Dataset::from_rows(&[[0.3, -1.7]; 12]).unwrap();
        for backend in [
            DensityBackend::Gmm { components: 1 },
            DensityBackend::LeaveOneOutKde { bandwidth: BandwidthRule::Scott },
        ] {
            let cfg = AbsorbConfig { k: 4, density_backend: backend, ..Default::default() };
            let res = run(&ds, &cfg).unwrap();
            assert_eq!(res.iterations_run, 1);
            assert!(res.converged);
            assert_eq!(res.trace.records[0].mean_displacement, 0.0);
            assert_eq!(res.denoised, ds);
        }
    }

    #[test]
    fn single_iteration_cap() {
        let rows: Vec<[f64; 2]> = (0..30).map(|i| [(i as f64).sin() * 4.0, (i as f64 * 0.5).cos()]).collect();
        let ds = Dataset::from_rows(&rows).unwrap();
        let cfg = AbsorbConfig { k: 5, max_iterations: 1, ..Default::default() };
        let res = run(&ds, &cfg).unwrap();
        assert_eq!(res.trace.len(), 1);
        assert_eq!(res.iterations_run, 1);
        assert_eq!(res.converged, res.trace.records[0].divergence < cfg.epsilon);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let ds = Dataset::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let cfg = AbsorbConfig { k: 3, ..Default::default() };
        assert!(matches!(run(&ds, &cfg), Err(Error::KTooLarge { .. })));
        let cfg = AbsorbConfig { k: 1, epsilon: 0.0, ..Default::default() };
        assert!(matches!(run(&ds, &cfg), Err(Error::ConfigInvalid(_))));
    }
}
