//! Isolation forest.
//!
//! Each tree grows on a uniform subsample, splitting a uniformly chosen
//! feature at a uniform threshold between the node's minimum and maximum until
//! a point is isolated, the node degenerates, or the height limit
//! `ceil(log2(subsample))` is hit. Unterminated paths are extended by the
//! average-path normalizer of the leaf size, and the score for a point is
//! `2^(-E[h] / c(subsample))`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::ScoreVector;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IForestConfig {
    pub n_trees: usize,
    pub subsample: usize,
    pub seed: u64,
}

impl Default for IForestConfig {
    fn default() -> Self {
        IForestConfig { n_trees: 100, subsample: 256, seed: 0 }
    }
}

impl IForestConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Config("n_trees must be at least 1".into()));
        }
        if self.subsample < 2 {
            return Err(Error::Config("subsample must be at least 2".into()));
        }
        if n < 2 {
            return Err(Error::Config(format!("isolation forest needs n >= 2; got {n}")));
        }
        Ok(())
    }
}

/// Average path length of an unsuccessful binary-search-tree lookup among `n`
/// points; the normalizer in the score exponent.
pub fn average_path_length(n: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let harmonic: f64 = (1..n).map(|i| 1.0 / i as f64).sum();
    2.0 * harmonic - 2.0 * (n as f64 - 1.0) / n as f64
}

enum Node {
    Split { col: usize, threshold: f64, left: usize, right: usize },
    Leaf { size: usize },
}

struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn grow(
        points: &[f64],
        dim: usize,
        rows: &mut [u32],
        height_limit: usize,
        rng: &mut ChaCha8Rng,
    ) -> Tree {
        let mut tree = Tree { nodes: Vec::new() };
        tree.grow_node(points, dim, rows, 0, height_limit, rng);
        tree
    }

    fn grow_node(
        &mut self,
        points: &[f64],
        dim: usize,
        rows: &mut [u32],
        height: usize,
        height_limit: usize,
        rng: &mut ChaCha8Rng,
    ) -> usize {
        if rows.len() <= 1 || height >= height_limit {
            self.nodes.push(Node::Leaf { size: rows.len() });
            return self.nodes.len() - 1;
        }
        // Resample degenerate (constant) features a bounded number of times.
        let mut split = None;
        for _ in 0..dim {
            let col = rng.gen_range(0..dim);
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            for &r in rows.iter() {
                let v = points[r as usize * dim + col];
                min = min.min(v);
                max = max.max(v);
            }
            if max > min {
                let threshold = rng.gen_range(min..max);
                if threshold > min {
                    split = Some((col, threshold));
                    break;
                }
            }
        }
        let Some((col, threshold)) = split else {
            self.nodes.push(Node::Leaf { size: rows.len() });
            return self.nodes.len() - 1;
        };
        let mid = partition(points, dim, rows, col, threshold);
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { size: 0 }); // placeholder
        let (left_rows, right_rows) = rows.split_at_mut(mid);
        let left = self.grow_node(points, dim, left_rows, height + 1, height_limit, rng);
        let right = self.grow_node(points, dim, right_rows, height + 1, height_limit, rng);
        self.nodes[slot] = Node::Split { col, threshold, left, right };
        slot
    }

    /// Path length for one point: traversed edges plus the leaf-size
    /// adjustment for paths cut short.
    fn path_length(&self, point: &[f64]) -> f64 {
        let mut node = 0usize;
        let mut edges = 0.0;
        loop {
            match self.nodes[node] {
                Node::Leaf { size } => return edges + average_path_length(size),
                Node::Split { col, threshold, left, right } => {
                    node = if point[col] < threshold { left } else { right };
                    edges += 1.0;
                }
            }
        }
    }
}

/// Moves rows with `value < threshold` to the front; returns the split point.
fn partition(points: &[f64], dim: usize, rows: &mut [u32], col: usize, threshold: f64) -> usize {
    let mut mid = 0;
    for i in 0..rows.len() {
        if points[rows[i] as usize * dim + col] < threshold {
            rows.swap(i, mid);
            mid += 1;
        }
    }
    mid
}

/// Uniform subsample without replacement.
fn subsample_rows(n: usize, size: usize, rng: &mut ChaCha8Rng) -> Vec<u32> {
    if size >= n {
        return (0..n as u32).collect();
    }
    let mut pool: Vec<u32> = (0..n as u32).collect();
    for i in 0..size {
        let j = rng.gen_range(i..pool.len());
        pool.swap(i, j);
    }
    pool.truncate(size);
    pool
}

/// Mean path length of every point across the forest.
///
/// Per-tree seeds derive from the config seed and the tree index, so the
/// result is independent of build order.
fn mean_path_lengths(points: &[f64], dim: usize, n: usize, cfg: &IForestConfig) -> Vec<f64> {
    let psi = cfg.subsample.min(n);
    let height_limit = (psi as f64).log2().ceil() as usize;
    let mut totals = vec![0.0; n];
    for t in 0..cfg.n_trees {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, &[t as u64]));
        let mut rows = subsample_rows(n, psi, &mut rng);
        let tree = Tree::grow(points, dim, &mut rows, height_limit, &mut rng);
        for (i, total) in totals.iter_mut().enumerate() {
            *total += tree.path_length(&points[i * dim..(i + 1) * dim]);
        }
    }
    totals.iter().map(|t| t / cfg.n_trees as f64).collect()
}

/// Mean path length of every point across the forest; the raw quantity the
/// score exponentiates.
pub fn iforest_mean_paths(ds: &Dataset, cfg: &IForestConfig) -> Result<Vec<f64>> {
    cfg.validate(ds.n_rows())?;
    Ok(mean_path_lengths(ds.features(), ds.n_cols(), ds.n_rows(), cfg))
}

/// Scores a dataset with an isolation forest; higher means more isolated.
pub fn iforest_score(ds: &Dataset, cfg: &IForestConfig) -> Result<ScoreVector> {
    let n = ds.n_rows();
    let means = iforest_mean_paths(ds, cfg)?;
    let norm = average_path_length(cfg.subsample.min(n));
    let scores: Vec<f64> = means.iter().map(|m| 2f64.powf(-m / norm)).collect();
    ScoreVector::new(scores, n)
}
