//! Shared test oracles, kept deliberately independent of the library's
//! implementation paths: the factor oracle re-derives everything from the
//! definitions with fresh full scans, and the ranking oracle counts pairs
//! exhaustively.

#![allow(dead_code)]

use odaudit_core::data::{Dataset, DatasetMeta, FeatureRole, GroupLabel};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Local-outlier-factor oracle straight from the definitions.
///
/// Every quantity is recomputed on demand from full distance scans: the
/// neighbor set is the k closest points by (distance, index), the k-distance
/// is the distance to the k-th of them, the reachability distance is the max
/// of the neighbor's k-distance and the true distance, the local reachability
/// density is the inverse mean reachability, and the factor is the mean
/// neighbor density over the point's own density.
pub fn lof_bruteforce(points: &[Vec<f64>], k: usize) -> Vec<f64> {
    let n = points.len();
    assert!(k >= 1 && k < n);
    let neighbor_set = |p: usize| -> Vec<usize> {
        let mut others: Vec<usize> = (0..n).filter(|&j| j != p).collect();
        others.sort_by(|&a, &b| {
            euclid(&points[p], &points[a])
                .partial_cmp(&euclid(&points[p], &points[b]))
                .unwrap()
                .then(a.cmp(&b))
        });
        others.truncate(k);
        others
    };
    let k_distance = |p: usize| -> f64 {
        let set = neighbor_set(p);
        euclid(&points[p], &points[set[k - 1]])
    };
    let reach_dist = |p: usize, o: usize| -> f64 { k_distance(o).max(euclid(&points[p], &points[o])) };
    let lrd = |p: usize| -> f64 {
        let set = neighbor_set(p);
        let mean_reach: f64 = set.iter().map(|&o| reach_dist(p, o)).sum::<f64>() / k as f64;
        1.0 / mean_reach
    };
    (0..n)
        .map(|p| {
            let set = neighbor_set(p);
            let neighbor_density: f64 = set.iter().map(|&o| lrd(o)).sum();
            neighbor_density / (k as f64 * lrd(p))
        })
        .collect()
}

/// AUROC oracle: exhaustive positive/negative pair counting with half-credit
/// for ties.
pub fn auroc_paircount(scores: &[f64], y: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        if !yi {
            continue;
        }
        for (j, &yj) in y.iter().enumerate() {
            if yj {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Central finite differences of a scalar function.
pub fn finite_difference_grad(
    f: &mut dyn FnMut(&[f64]) -> f64,
    at: &[f64],
    step: f64,
) -> Vec<f64> {
    let mut grad = Vec::with_capacity(at.len());
    let mut point = at.to_vec();
    for i in 0..at.len() {
        let orig = point[i];
        point[i] = orig + step;
        let up = f(&point);
        point[i] = orig - step;
        let down = f(&point);
        point[i] = orig;
        grad.push((up - down) / (2.0 * step));
    }
    grad
}

/// Uniform random dataset, labels all negative, for detector equality checks.
pub fn random_dataset(n: usize, dim: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features: Vec<f64> = (0..n * dim).map(|_| rng.gen_range(-5.0..5.0)).collect();
    Dataset::new(
        features,
        dim,
        vec![GroupLabel::A; n],
        vec![GroupLabel::A; n],
        vec![false; n],
        vec![FeatureRole::Incriminating; dim],
        DatasetMeta { seed, scenario: "random".into(), sim: None, scatter: None },
    )
    .unwrap()
}

pub fn rows_of(ds: &Dataset) -> Vec<Vec<f64>> {
    (0..ds.n_rows()).map(|i| ds.row(i).to_vec()).collect()
}

/// Mean pairwise distance within the index set.
pub fn mean_intra_distance(rows: &[Vec<f64>], idx: &[usize]) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for (a, &i) in idx.iter().enumerate() {
        for &j in idx.iter().skip(a + 1) {
            total += euclid(&rows[i], &rows[j]);
            count += 1;
        }
    }
    total / count as f64
}

/// Mean distance between two index sets.
pub fn mean_cross_distance(rows: &[Vec<f64>], a: &[usize], b: &[usize]) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for &i in a {
        for &j in b {
            total += euclid(&rows[i], &rows[j]);
            count += 1;
        }
    }
    total / count as f64
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}
