//! Local outlier factor.
//!
//! Scores follow the classic reachability construction: the k-distance of a
//! point is the distance to its k-th nearest neighbor; the reachability
//! distance from p to o is the larger of o's k-distance and their true
//! distance; the local reachability density is the inverse mean reachability
//! over the neighborhood; and the factor is the mean neighbor density over the
//! point's own density. Neighborhoods hold exactly k members with distance
//! ties broken toward the lower row index.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::knn::NeighborIndex;
use crate::metrics::ScoreVector;

/// Reachability sums are clamped here so duplicate points cannot produce an
/// infinite density.
pub const REACHABILITY_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LofConfig {
    pub k: usize,
}

impl LofConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 || self.k >= n {
            return Err(Error::Config(format!(
                "lof neighbor count must satisfy 1 <= k < n; got k={}, n={n}",
                self.k
            )));
        }
        Ok(())
    }
}

/// Scores every point of a prebuilt index for one neighbor count.
///
/// Sharing the index lets a tuning pass sweep `k` without recomputing
/// distances.
pub fn lof_from_index(index: &NeighborIndex, k: usize) -> Result<Vec<f64>> {
    if k == 0 || k > index.k_max() {
        return Err(Error::Config(format!(
            "k={k} outside index capacity 1..={}",
            index.k_max()
        )));
    }
    let n = index.len();
    let mut clamped = 0usize;
    let mut lrd = Vec::with_capacity(n);
    for p in 0..n {
        let mut sum = 0.0;
        for &(dist, o) in index.neighbors(p, k) {
            sum += index.k_distance(o as usize, k).max(dist);
        }
        if sum < REACHABILITY_EPS {
            sum = REACHABILITY_EPS;
            clamped += 1;
        }
        lrd.push(k as f64 / sum);
    }
    if clamped > 0 {
        log::warn!("lof: clamped zero reachability sums for {clamped} duplicate-heavy points");
    }
    let mut scores = Vec::with_capacity(n);
    for p in 0..n {
        let neighbor_density: f64 =
            index.neighbors(p, k).iter().map(|&(_, o)| lrd[o as usize]).sum();
        scores.push(neighbor_density / (k as f64 * lrd[p]));
    }
    Ok(scores)
}

/// Scores a dataset with the local outlier factor.
pub fn lof_score(ds: &Dataset, cfg: &LofConfig) -> Result<ScoreVector> {
    cfg.validate(ds.n_rows())?;
    let index = NeighborIndex::from_dataset(ds, cfg.k)?;
    ScoreVector::new(lof_from_index(&index, cfg.k)?, ds.n_rows())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{DatasetMeta, Dataset, FeatureRole, GroupLabel};

    fn dataset_1d(values: &[f64]) -> Dataset {
        let n = values.len();
        Dataset::new(
            values.to_vec(),
            1,
            vec![GroupLabel::A; n],
            vec![GroupLabel::A; n],
            vec![false; n],
            vec![FeatureRole::Incriminating],
            DatasetMeta { seed: 0, scenario: "fixture".into(), sim: None, scatter: None },
        )
        .unwrap()
    }

    #[test]
    fn uniform_spacing_gives_unit_factor_inside() {
        let ds = dataset_1d(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
        let scores = lof_score(&ds, &LofConfig { k: 2 }).unwrap();
        // Interior means the whole 3-hop reachability context avoids the two
        // boundary points, whose k-distance is inflated.
        for p in 3..=6 {
            assert!((scores[p] - 1.0).abs() < 1e-12, "interior point {p}: {}", scores[p]);
        }
    }

    #[test]
    fn duplicates_stay_finite() {
        let ds = dataset_1d(&[1.0, 1.0, 1.0, 1.0, 5.0]);
        let scores = lof_score(&ds, &LofConfig { k: 2 }).unwrap();
        assert!(scores.iter().all(|s| s.is_finite()));
        assert!(scores.iter().all(|&s| s >= 0.0));
    }

    #[test]
    fn k_must_be_less_than_n() {
        let ds = dataset_1d(&[0.0, 1.0, 2.0]);
        assert!(lof_score(&ds, &LofConfig { k: 3 }).is_err());
        assert!(lof_score(&ds, &LofConfig { k: 0 }).is_err());
    }
}
