//! Exact Euclidean k-nearest-neighbor index.
//!
//! The index is a brute-force scan with partial selection: for every query
//! row all `n - 1` squared distances are computed, the `k` smallest are
//! selected under the `(distance, index)` order and then sorted. Query rows
//! are processed in parallel; each list depends only on the input, so the
//! result does not depend on the thread count.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::types::{squared_distance, Dataset, NeighborhoodIndex};

fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Builds the neighbor lists of every sample, excluding the sample itself.
pub fn build_index(dataset: &Dataset, k: usize) -> Result<NeighborhoodIndex> {
    let n = dataset.n();
    if k == 0 || k >= n {
        return Err(Error::KTooLarge { k, n });
    }
    let lists: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let query = dataset.row(i);
            let mut candidates: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (squared_distance(query, dataset.row(j)), j))
                .collect();
            if k < candidates.len() {
                candidates.select_nth_unstable_by(k - 1, by_distance_then_index);
                candidates.truncate(k);
            }
            candidates.sort_unstable_by(by_distance_then_index);
            candidates.into_iter().map(|(_, j)| j).collect()
        })
        .collect();
    Ok(NeighborhoodIndex::from_flat(k, lists.concat()))
}

/// Checked lookup of the neighbor list of sample `i`.
pub fn neighbors_of(index: &NeighborhoodIndex, i: usize) -> Result<&[usize]> {
    if i >= index.n() {
        return Err(Error::IndexOutOfRange { index: i, n: index.n() });
    }
    Ok(index.list(i))
}
