//! Outlier absorbing.
//!
//! Instead of flagging and deleting anomalous samples, every sample is
//! repeatedly replaced by a weighted average of its `k` nearest neighbors.
//! The weights come from a global, leave-one-out density estimate and are
//! accumulated multiplicatively across iterations, so samples sitting in
//! sparse regions lose influence while their own positions are pulled into
//! the dense part of the data.
//!
//! The crate is organised as:
//!
//! * [`types`]: datasets, sample weights, neighbor lists and configuration.
//! * [`neighbors`]: exact Euclidean k-nearest-neighbor index.
//! * [`density`]: Gaussian mixture (EM) and leave-one-out KDE backends.
//! * [`absorb`]: the weight update, the neighbor re-estimation step and the run loop.
//! * [`metrics`]: closed-form symmetric divergence between Gaussians.
//! * [`synth`]: synthetic generators and the contamination injector.
//! * [`io`]: CSV and run-report serialization.
//! * [`cli`]: the `absorbkit` command-line front end.

pub mod absorb;
pub mod cli;
pub mod density;
pub mod error;
pub mod io;
pub mod metrics;
pub mod neighbors;
pub mod synth;
pub mod types;

pub use absorb::{absorb_step, run, update_weights, AbsorbResult, IterationRecord, IterationTrace};
pub use density::{
    evaluate_density, fit_gmm, leave_one_out_density, leave_one_out_log_densities, DensityModel,
    GaussianMixture, KdeModel,
};
pub use error::{Error, Result};
pub use metrics::{dataset_divergence, fit_gaussian, gaussian_divergence};
pub use neighbors::{build_index, neighbors_of};
pub use synth::{contaminate, gen_gaussian, gen_nonlinear, ContaminationReport, Shape};
pub use types::{
    AbsorbConfig, BandwidthRule, Dataset, DensityBackend, GaussianSummary, NeighborhoodIndex,
    SampleWeights,
};
