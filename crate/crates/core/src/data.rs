//! Synthetic population simulation.
//!
//! A population holds two protected groups. Rows are described by three kinds
//! of columns: proxy columns correlate with group membership, incriminating
//! columns correlate with the true risk label, and occlusion columns are
//! irrelevant noise that hides outliers in subspaces. Outliers are either
//! clustered (a secondary mode on the incriminating columns) or scattered
//! (variance-inflated draws on a random incriminating subspace).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Protected-group label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupLabel {
    A,
    B,
}

impl GroupLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            GroupLabel::A => "a",
            GroupLabel::B => "b",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "a" => Ok(GroupLabel::A),
            "b" => Ok(GroupLabel::B),
            other => Err(Error::Parse(format!("unknown group label {other:?}"))),
        }
    }
}

impl std::fmt::Display for GroupLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Role of a feature column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureRole {
    /// Correlates with group membership, not with risk.
    Proxy,
    /// Correlates with the true risk label.
    Incriminating,
    /// Irrelevant noise.
    Occlusion,
}

impl FeatureRole {
    /// Short column-name prefix used in the CSV header (`g`, `c`, `o`).
    pub fn short(self) -> char {
        match self {
            FeatureRole::Proxy => 'g',
            FeatureRole::Incriminating => 'c',
            FeatureRole::Occlusion => 'o',
        }
    }
}

/// How outliers are placed in feature space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutlierMode {
    /// Outliers form a tight secondary mode on all incriminating columns.
    Clustered,
    /// Outliers inflate the variance of a random incriminating subspace.
    Scattered,
}

/// Simulation parameters for one unbiased population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_per_group: usize,
    pub base_rate: f64,
    pub dims_per_role: usize,
    pub proxy_mean_a: f64,
    pub proxy_mean_b: f64,
    pub culprit_inlier_mean: f64,
    pub culprit_outlier_mean: f64,
    pub std: f64,
    pub outlier_mode: OutlierMode,
    pub scatter_factors: Vec<f64>,
    /// Center of a scattered outlier's variance-inflated dims. Defaults to
    /// the inlier mean; measurement-bias scenarios displace it (the 0/10
    /// regime) so inlier and outlier supports stay distinguishable after
    /// further inflation.
    #[serde(default)]
    pub scatter_center: Option<f64>,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_per_group: 1000,
            base_rate: 0.1,
            dims_per_role: 5,
            proxy_mean_a: 5.0,
            proxy_mean_b: 20.0,
            culprit_inlier_mean: 0.0,
            culprit_outlier_mean: 3.0,
            std: 1.0,
            outlier_mode: OutlierMode::Clustered,
            scatter_factors: vec![3.0, 6.0, 9.0, 12.0, 15.0],
            scatter_center: None,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_per_group == 0 {
            return Err(Error::Config("n_per_group must be positive".into()));
        }
        if !(self.base_rate > 0.0 && self.base_rate < 0.5) {
            return Err(Error::Config(format!(
                "base_rate must lie in (0, 0.5); got {}",
                self.base_rate
            )));
        }
        if self.dims_per_role == 0 {
            return Err(Error::Config("dims_per_role must be positive".into()));
        }
        if !(self.std > 0.0) {
            return Err(Error::Config(format!("std must be positive; got {}", self.std)));
        }
        if self.scatter_factors.is_empty() {
            return Err(Error::Config("scatter_factors must be non-empty".into()));
        }
        if self.scatter_factors.iter().any(|&f| !(f > 1.0)) {
            return Err(Error::Config("all scatter_factors must exceed 1".into()));
        }
        if self.proxy_mean_a == self.proxy_mean_b {
            return Err(Error::Config(
                "proxy_mean_a and proxy_mean_b must differ so group supports separate".into(),
            ));
        }
        Ok(())
    }

    /// Exact number of outliers per group.
    pub fn outliers_per_group(&self) -> usize {
        (self.base_rate * self.n_per_group as f64).round() as usize
    }
}

/// Scattered-outlier draw parameters for one row: which incriminating dims
/// were variance-inflated and by what factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatterDraw {
    pub mask: u64,
    pub factor: f64,
}

impl ScatterDraw {
    pub const NONE: ScatterDraw = ScatterDraw { mask: 0, factor: 1.0 };
}

/// Provenance carried alongside the feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub seed: u64,
    pub scenario: String,
    /// Present when the dataset descends from a simulation; injectors that
    /// rescale around generative moments require it.
    pub sim: Option<SimConfig>,
    /// Per-row scattered-outlier draw parameters; needed to recover a cell's
    /// generative mean and variance.
    #[serde(default)]
    pub scatter: Option<Vec<ScatterDraw>>,
}

/// A population: feature matrix plus per-row group and risk labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    n_cols: usize,
    pub group: Vec<GroupLabel>,
    pub true_group: Vec<GroupLabel>,
    pub y: Vec<bool>,
    pub roles: Vec<FeatureRole>,
    pub meta: DatasetMeta,
}

impl Dataset {
    /// Builds a dataset from parts, checking the shape invariants.
    pub fn new(
        features: Vec<f64>,
        n_cols: usize,
        group: Vec<GroupLabel>,
        true_group: Vec<GroupLabel>,
        y: Vec<bool>,
        roles: Vec<FeatureRole>,
        meta: DatasetMeta,
    ) -> Result<Self> {
        let n = y.len();
        if n_cols == 0 || roles.len() != n_cols {
            return Err(Error::Dataset(format!(
                "roles length {} must equal column count {}",
                roles.len(),
                n_cols
            )));
        }
        if features.len() != n * n_cols || group.len() != n || true_group.len() != n {
            return Err(Error::Dataset("row-aligned vectors disagree on length".into()));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Dataset("features must be finite".into()));
        }
        if let Some(draws) = &meta.scatter {
            if draws.len() != n {
                return Err(Error::Dataset("scatter draws must align with rows".into()));
            }
        }
        Ok(Dataset { features, n_cols, group, true_group, y, roles, meta })
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.features[row * self.n_cols + col]
    }

    pub fn set_value(&mut self, row: usize, col: usize, v: f64) {
        self.features[row * self.n_cols + col] = v;
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    /// Column indices carrying the given role, in layout order.
    pub fn columns_with_role(&self, role: FeatureRole) -> Vec<usize> {
        self.roles
            .iter()
            .enumerate()
            .filter(|(_, r)| **r == role)
            .map(|(i, _)| i)
            .collect()
    }

    /// Row indices whose reported group matches `g`.
    pub fn rows_in_group(&self, g: GroupLabel) -> Vec<usize> {
        (0..self.n_rows()).filter(|&i| self.group[i] == g).collect()
    }

    pub fn outlier_count(&self) -> usize {
        self.y.iter().filter(|&&v| v).count()
    }

    pub fn outlier_count_in(&self, g: GroupLabel) -> usize {
        (0..self.n_rows()).filter(|&i| self.group[i] == g && self.y[i]).count()
    }

    /// Keeps only the rows selected by `keep` (in order).
    pub fn filter_rows(&self, keep: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(keep.len() * self.n_cols);
        for &i in keep {
            features.extend_from_slice(self.row(i));
        }
        let mut meta = self.meta.clone();
        if let Some(draws) = &self.meta.scatter {
            meta.scatter = Some(keep.iter().map(|&i| draws[i]).collect());
        }
        Dataset {
            features,
            n_cols: self.n_cols,
            group: keep.iter().map(|&i| self.group[i]).collect(),
            true_group: keep.iter().map(|&i| self.true_group[i]).collect(),
            y: keep.iter().map(|&i| self.y[i]).collect(),
            roles: self.roles.clone(),
            meta,
        }
    }

    /// Appends one row; the feature slice must match the column count.
    pub fn push_row(
        &mut self,
        features: &[f64],
        group: GroupLabel,
        true_group: GroupLabel,
        y: bool,
        scatter: ScatterDraw,
    ) -> Result<()> {
        if features.len() != self.n_cols {
            return Err(Error::Dataset(format!(
                "row has {} values, dataset has {} columns",
                features.len(),
                self.n_cols
            )));
        }
        self.features.extend_from_slice(features);
        self.group.push(group);
        self.true_group.push(true_group);
        self.y.push(y);
        if let Some(draws) = &mut self.meta.scatter {
            draws.push(scatter);
        }
        Ok(())
    }

    /// Generative mean of cell `(row, col)` under the originating simulation.
    ///
    /// Returns `None` when the dataset has no simulation provenance.
    pub fn generative_mean(&self, row: usize, col: usize) -> Option<f64> {
        let sim = self.meta.sim.as_ref()?;
        let mean = match self.roles[col] {
            FeatureRole::Proxy => match self.true_group[row] {
                GroupLabel::A => sim.proxy_mean_a,
                GroupLabel::B => sim.proxy_mean_b,
            },
            FeatureRole::Incriminating => match sim.outlier_mode {
                OutlierMode::Clustered if self.y[row] => sim.culprit_outlier_mean,
                OutlierMode::Scattered if self.y[row] && self.scatter_inflated(row, col) => {
                    sim.scatter_center.unwrap_or(sim.culprit_inlier_mean)
                }
                _ => sim.culprit_inlier_mean,
            },
            FeatureRole::Occlusion => 0.0,
        };
        Some(mean)
    }

    /// Whether the cell is a variance-inflated scattered-outlier dim.
    fn scatter_inflated(&self, row: usize, col: usize) -> bool {
        let ordinal =
            self.roles[..col].iter().filter(|r| **r == FeatureRole::Incriminating).count();
        self.meta.scatter.as_ref().map_or(false, |d| d[row].mask >> ordinal & 1 == 1)
    }

    /// Generative standard deviation of cell `(row, col)`: the simulation
    /// std everywhere except variance-inflated scattered dims, and unit std
    /// on occlusion columns.
    pub fn generative_std(&self, row: usize, col: usize) -> Option<f64> {
        let sim = self.meta.sim.as_ref()?;
        let std = match self.roles[col] {
            FeatureRole::Occlusion => 1.0,
            FeatureRole::Incriminating
                if sim.outlier_mode == OutlierMode::Scattered
                    && self.y[row]
                    && self.scatter_inflated(row, col) =>
            {
                let factor = self.meta.scatter.as_ref().map_or(1.0, |d| d[row].factor);
                sim.std * factor.sqrt()
            }
            _ => sim.std,
        };
        Some(std)
    }
}

/// Draws the feature vector of one row.
///
/// Outlier rows in scattered mode inflate the variance of the incriminating
/// columns selected by `scatter_mask`.
pub(crate) fn draw_row(
    rng: &mut ChaCha8Rng,
    cfg: &SimConfig,
    group: GroupLabel,
    outlier: bool,
    scatter_mask: u64,
    scatter_std: f64,
    out: &mut Vec<f64>,
) {
    let dpr = cfg.dims_per_role;
    let proxy_mean = match group {
        GroupLabel::A => cfg.proxy_mean_a,
        GroupLabel::B => cfg.proxy_mean_b,
    };
    let proxy = Normal::new(proxy_mean, cfg.std).expect("std > 0");
    for _ in 0..dpr {
        out.push(proxy.sample(rng));
    }
    for j in 0..dpr {
        let (mean, std) = if outlier {
            match cfg.outlier_mode {
                OutlierMode::Clustered => (cfg.culprit_outlier_mean, cfg.std),
                OutlierMode::Scattered => {
                    if scatter_mask >> j & 1 == 1 {
                        (cfg.scatter_center.unwrap_or(cfg.culprit_inlier_mean), scatter_std)
                    } else {
                        (cfg.culprit_inlier_mean, cfg.std)
                    }
                }
            }
        } else {
            (cfg.culprit_inlier_mean, cfg.std)
        };
        out.push(Normal::new(mean, std).expect("std > 0").sample(rng));
    }
    let occlusion = Normal::new(0.0, 1.0).expect("unit std");
    for _ in 0..dpr {
        out.push(occlusion.sample(rng));
    }
}

/// Generates one row's worth of outlier parameters in scattered mode.
pub(crate) fn scatter_params(rng: &mut ChaCha8Rng, cfg: &SimConfig) -> ScatterDraw {
    let dpr = cfg.dims_per_role as u32;
    // Uniform over the non-empty subsets of the incriminating columns.
    let mask = rng.gen_range(1..(1u64 << dpr));
    let factor = cfg.scatter_factors[rng.gen_range(0..cfg.scatter_factors.len())];
    ScatterDraw { mask, factor }
}

/// Simulates an unbiased population with exact per-group label counts.
///
/// Row layout: group-a inliers, group-a outliers, group-b inliers, group-b
/// outliers. Deterministic given the config (including its seed).
pub fn simulate(cfg: &SimConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_out = cfg.outliers_per_group();
    let n_in = cfg.n_per_group - n_out;
    let n_total = 2 * cfg.n_per_group;
    let n_cols = 3 * cfg.dims_per_role;

    let mut features = Vec::with_capacity(n_total * n_cols);
    let mut group = Vec::with_capacity(n_total);
    let mut y = Vec::with_capacity(n_total);
    let mut masks: Vec<ScatterDraw> = Vec::with_capacity(n_total);

    for g in [GroupLabel::A, GroupLabel::B] {
        for _ in 0..n_in {
            draw_row(&mut rng, cfg, g, false, 0, 0.0, &mut features);
            group.push(g);
            y.push(false);
            masks.push(ScatterDraw::NONE);
        }
        for _ in 0..n_out {
            let draw = match cfg.outlier_mode {
                OutlierMode::Clustered => ScatterDraw::NONE,
                OutlierMode::Scattered => scatter_params(&mut rng, cfg),
            };
            let scatter_std = cfg.std * draw.factor.sqrt();
            draw_row(&mut rng, cfg, g, true, draw.mask, scatter_std, &mut features);
            group.push(g);
            y.push(true);
            masks.push(draw);
        }
    }

    let mut roles = Vec::with_capacity(n_cols);
    roles.extend(std::iter::repeat(FeatureRole::Proxy).take(cfg.dims_per_role));
    roles.extend(std::iter::repeat(FeatureRole::Incriminating).take(cfg.dims_per_role));
    roles.extend(std::iter::repeat(FeatureRole::Occlusion).take(cfg.dims_per_role));

    let meta = DatasetMeta {
        seed: cfg.seed,
        scenario: "unbiased".to_string(),
        sim: Some(cfg.clone()),
        scatter: (cfg.outlier_mode == OutlierMode::Scattered).then_some(masks),
    };
    Dataset::new(features, n_cols, group.clone(), group, y, roles, meta)
}

/// Per-group counts in a [`Summary`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub n: usize,
    pub outliers: usize,
    /// `None` when the group is empty.
    pub base_rate: Option<f64>,
}

/// Mean and variance of one column within one group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnStats {
    pub col: usize,
    pub role: FeatureRole,
    pub mean_a: Option<f64>,
    pub var_a: Option<f64>,
    pub mean_b: Option<f64>,
    pub var_b: Option<f64>,
}

/// Counts, base rates, and per-role column moments of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub rows: usize,
    pub cols: usize,
    pub group_a: GroupSummary,
    pub group_b: GroupSummary,
    pub columns: Vec<ColumnStats>,
}

fn mean_var(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (Some(mean), None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some(var))
}

/// Summarizes counts and column moments by reported group.
pub fn summarize(ds: &Dataset) -> Summary {
    let summary_for = |g: GroupLabel| {
        let rows = ds.rows_in_group(g);
        let outliers = rows.iter().filter(|&&i| ds.y[i]).count();
        let base_rate = if rows.is_empty() {
            None
        } else {
            Some(outliers as f64 / rows.len() as f64)
        };
        GroupSummary { n: rows.len(), outliers, base_rate }
    };
    let group_a = summary_for(GroupLabel::A);
    let group_b = summary_for(GroupLabel::B);

    let rows_a = ds.rows_in_group(GroupLabel::A);
    let rows_b = ds.rows_in_group(GroupLabel::B);
    let columns = (0..ds.n_cols())
        .map(|c| {
            let vals_a: Vec<f64> = rows_a.iter().map(|&i| ds.value(i, c)).collect();
            let vals_b: Vec<f64> = rows_b.iter().map(|&i| ds.value(i, c)).collect();
            let (mean_a, var_a) = mean_var(&vals_a);
            let (mean_b, var_b) = mean_var(&vals_b);
            ColumnStats { col: c, role: ds.roles[c], mean_a, var_a, mean_b, var_b }
        })
        .collect();

    Summary { rows: ds.n_rows(), cols: ds.n_cols(), group_a, group_b, columns }
}
