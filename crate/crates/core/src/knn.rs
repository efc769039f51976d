//! Exact nearest-neighbor index.
//!
//! Brute-force scans are fine at the population sizes this crate works with
//! (a few thousand rows). Neighbor lists are precomputed once up to a maximum
//! `k`, so detectors can be evaluated for many neighbor counts without
//! recomputing distances. Ties in distance break toward the lower row index,
//! and a point is never its own neighbor.

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Precomputed sorted neighbor lists.
pub struct NeighborIndex {
    n: usize,
    k_max: usize,
    /// Row-major `(distance, neighbor)` pairs, `k_max` per point, ascending.
    neighbors: Vec<(f64, u32)>,
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

impl NeighborIndex {
    /// Builds the index over `n` points of dimension `dim` stored row-major.
    pub fn build(points: &[f64], dim: usize, k_max: usize) -> Result<Self> {
        if dim == 0 || points.len() % dim != 0 {
            return Err(Error::Dataset("point buffer does not tile into rows".into()));
        }
        let n = points.len() / dim;
        if k_max == 0 || k_max >= n {
            return Err(Error::Config(format!(
                "neighbor count must satisfy 1 <= k < n; got k={k_max}, n={n}"
            )));
        }
        let row = |i: usize| &points[i * dim..(i + 1) * dim];
        let mut neighbors = Vec::with_capacity(n * k_max);
        let mut scratch: Vec<(f64, u32)> = Vec::with_capacity(n - 1);
        for i in 0..n {
            scratch.clear();
            for j in 0..n {
                if j != i {
                    scratch.push((euclidean(row(i), row(j)), j as u32));
                }
            }
            let cmp = |a: &(f64, u32), b: &(f64, u32)| {
                a.0.partial_cmp(&b.0).expect("finite distances").then(a.1.cmp(&b.1))
            };
            if scratch.len() > k_max {
                scratch.select_nth_unstable_by(k_max - 1, cmp);
                scratch.truncate(k_max);
            }
            scratch.sort_unstable_by(cmp);
            neighbors.extend_from_slice(&scratch);
        }
        Ok(NeighborIndex { n, k_max, neighbors })
    }

    pub fn from_dataset(ds: &Dataset, k_max: usize) -> Result<Self> {
        Self::build(ds.features(), ds.n_cols(), k_max)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// The `k` nearest neighbors of point `i`, ascending by distance.
    pub fn neighbors(&self, i: usize, k: usize) -> &[(f64, u32)] {
        assert!(k <= self.k_max, "k={k} exceeds index capacity {}", self.k_max);
        &self.neighbors[i * self.k_max..i * self.k_max + k]
    }

    /// Distance from point `i` to its `k`-th nearest neighbor.
    pub fn k_distance(&self, i: usize, k: usize) -> f64 {
        self.neighbors(i, k)[k - 1].0
    }
}
