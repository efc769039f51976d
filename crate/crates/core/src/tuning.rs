//! Hyperparameter grids and selection rules.
//!
//! Standard detectors pick the grid cell with the highest overall AUROC on
//! the given (possibly biased) dataset, ignoring group labels. The
//! fairness-regularized detector picks the cell whose (AUROC, flag-rate
//! ratio, TPR ratio) triplet lies closest to the ideal (1, 1, 1), with ratios
//! folded into (0, 1] so the direction of disparity does not matter.

use serde::{Deserialize, Serialize};

use crate::bias;
use crate::data::Dataset;
use crate::deep::{ae_score, ae_train, fairod_train, DeepHP, FairHP};
use crate::error::{Error, Result};
use crate::iforest::{iforest_score, IForestConfig};
use crate::knn::NeighborIndex;
use crate::lof::{lof_from_index, lof_score, LofConfig};
use crate::metrics::{self, fold_ratio, Grouping, ScoreVector};
use crate::seed;

/// One detector parameterization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "detector", rename_all = "lowercase")]
pub enum DetectorConfig {
    Lof(LofConfig),
    Iforest(IForestConfig),
    Deepae(DeepHP),
    Fairod(FairHP),
}

impl DetectorConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            DetectorConfig::Lof(_) => "lof",
            DetectorConfig::Iforest(_) => "iforest",
            DetectorConfig::Deepae(_) => "deepae",
            DetectorConfig::Fairod(_) => "fairod",
        }
    }

    /// Compact provenance string for leaderboards and run records.
    pub fn describe(&self) -> String {
        match self {
            DetectorConfig::Lof(c) => format!("k={}", c.k),
            DetectorConfig::Iforest(c) => format!("trees={},sub={}", c.n_trees, c.subsample),
            DetectorConfig::Deepae(h) => format!(
                "layers={},decay={},epochs={},lr={},wd={},dropout={}",
                h.num_layers, h.input_decay, h.epochs, h.lr, h.weight_decay, h.dropout
            ),
            DetectorConfig::Fairod(h) => format!(
                "layers={},decay={},epochs={},lr={},wd={},dropout={},alpha={},gamma={}",
                h.base.num_layers,
                h.base.input_decay,
                h.base.epochs,
                h.base.lr,
                h.base.weight_decay,
                h.base.dropout,
                h.alpha,
                h.gamma
            ),
        }
    }
}

/// Scores a dataset with any detector; `seed` drives the stochastic ones.
pub fn score_with(ds: &Dataset, cfg: &DetectorConfig, seed: u64) -> Result<ScoreVector> {
    match cfg {
        DetectorConfig::Lof(c) => lof_score(ds, c),
        DetectorConfig::Iforest(c) => iforest_score(ds, &IForestConfig { seed, ..*c }),
        DetectorConfig::Deepae(h) => {
            let model = ae_train(ds, h, seed)?;
            ae_score(&model, ds)
        }
        DetectorConfig::Fairod(h) => {
            let model = fairod_train(ds, h, seed)?;
            ae_score(&model, ds)
        }
    }
}

/// Neighbor counts 10, 20, ..., 250.
pub fn lof_grid() -> Vec<DetectorConfig> {
    (1..=25).map(|i| DetectorConfig::Lof(LofConfig { k: i * 10 })).collect()
}

/// The 128-cell autoencoder grid.
pub fn deepae_grid() -> Vec<DetectorConfig> {
    let mut grid = Vec::with_capacity(128);
    for num_layers in [2usize, 4] {
        for input_decay in [1.0, 1.5, 2.0, 2.5] {
            for epochs in [100usize, 250] {
                for lr in [1e-3, 1e-4] {
                    for weight_decay in [0.0, 1e-5] {
                        for dropout in [0.0, 0.2] {
                            grid.push(DetectorConfig::Deepae(DeepHP {
                                num_layers,
                                input_decay,
                                epochs,
                                lr,
                                weight_decay,
                                dropout,
                            }));
                        }
                    }
                }
            }
        }
    }
    grid
}

/// Twenty (alpha, gamma) cells over a fixed base configuration.
pub fn fairod_grid(base: DeepHP) -> Vec<FairHP> {
    let mut grid = Vec::with_capacity(20);
    for alpha in [0.01, 0.05, 0.2, 0.5, 0.8] {
        for gamma in [0.01, 0.2, 0.5, 0.8] {
            grid.push(FairHP { base, alpha, gamma });
        }
    }
    grid
}

/// One evaluated grid cell.
#[derive(Debug, Clone, Serialize)]
pub struct LeaderboardRow {
    pub index: usize,
    pub config: String,
    pub auroc: Option<f64>,
    /// Folded flag-rate and TPR ratios (fairness-aware selection only).
    pub fr_ratio: Option<f64>,
    pub tpr_ratio: Option<f64>,
    pub distance: Option<f64>,
    /// Set when an undefined ratio was substituted with the worst observed one.
    pub penalized: bool,
    pub error: Option<String>,
}

/// Outcome of a tuning pass.
#[derive(Debug, Clone)]
pub struct TuneOutcome<C> {
    pub best_index: usize,
    pub best: C,
    pub leaderboard: Vec<LeaderboardRow>,
}

/// Picks the grid cell with the highest overall AUROC; ties go to the first
/// cell in grid order, and failed cells are recorded with no score.
///
/// LOF cells share one neighbor index so the distance pass runs once.
pub fn tune_standard(
    ds: &Dataset,
    grid: &[DetectorConfig],
    master_seed: u64,
) -> Result<TuneOutcome<DetectorConfig>> {
    if grid.is_empty() {
        return Err(Error::Config("tuning grid must be non-empty".into()));
    }
    let lof_index = {
        let max_k = grid
            .iter()
            .filter_map(|c| match c {
                DetectorConfig::Lof(l) if l.k < ds.n_rows() => Some(l.k),
                _ => None,
            })
            .max();
        match max_k {
            Some(k) => Some(NeighborIndex::from_dataset(ds, k)?),
            None => None,
        }
    };
    let mut leaderboard = Vec::with_capacity(grid.len());
    for (i, cfg) in grid.iter().enumerate() {
        let cell_seed = seed::derive(master_seed, &[i as u64]);
        let scored = match (cfg, &lof_index) {
            (DetectorConfig::Lof(l), Some(index)) if l.k <= index.k_max() => {
                lof_from_index(index, l.k).and_then(|s| ScoreVector::new(s, ds.n_rows()))
            }
            _ => score_with(ds, cfg, cell_seed),
        };
        let row = match scored.and_then(|s| metrics::auroc(&s, &ds.y)) {
            Ok(a) => LeaderboardRow {
                index: i,
                config: cfg.describe(),
                auroc: Some(a),
                fr_ratio: None,
                tpr_ratio: None,
                distance: None,
                penalized: false,
                error: None,
            },
            Err(e) => LeaderboardRow {
                index: i,
                config: cfg.describe(),
                auroc: None,
                fr_ratio: None,
                tpr_ratio: None,
                distance: None,
                penalized: false,
                error: Some(e.to_string()),
            },
        };
        leaderboard.push(row);
    }
    let best_index = leaderboard
        .iter()
        .max_by(|a, b| {
            let av = a.auroc.unwrap_or(f64::NEG_INFINITY);
            let bv = b.auroc.unwrap_or(f64::NEG_INFINITY);
            // Strictly-greater comparison keeps the first cell on ties.
            av.partial_cmp(&bv).expect("finite or -inf")
        })
        .map(|row| row.index)
        .expect("non-empty grid");
    if leaderboard[best_index].auroc.is_none() {
        return Err(Error::Config("every tuning cell failed".into()));
    }
    Ok(TuneOutcome { best_index, best: grid[best_index].clone(), leaderboard })
}

/// Fairness-aware selection over (alpha, gamma) cells.
///
/// Each cell is trained once with a seed derived from the master seed and the
/// cell index; the triplet (AUROC, folded FR ratio, folded TPR ratio) is
/// measured on the reported groups with the flag budget set to the true
/// outlier count. Cells with an undefined ratio are penalized with the worst
/// ratio observed anywhere in the grid.
pub fn tune_fairod(
    ds: &Dataset,
    grid: &[FairHP],
    master_seed: u64,
) -> Result<TuneOutcome<FairHP>> {
    if grid.is_empty() {
        return Err(Error::Config("tuning grid must be non-empty".into()));
    }
    let budget = ds.y.iter().filter(|&&v| v).count();
    struct Cell {
        auroc: Option<f64>,
        fr: Option<f64>,
        tpr: Option<f64>,
        error: Option<String>,
    }
    let mut cells = Vec::with_capacity(grid.len());
    for (i, hp) in grid.iter().enumerate() {
        let cell_seed = seed::derive(master_seed, &[i as u64]);
        let outcome = fairod_train(ds, hp, cell_seed)
            .and_then(|model| ae_score(&model, ds))
            .and_then(|scores| {
                let a = metrics::auroc(&scores, &ds.y)?;
                let flags = metrics::flag_top_k(&scores, budget);
                let report = metrics::group_report(&flags, ds, Grouping::Reported)?;
                Ok((a, report.fr_ratio, report.tpr_ratio))
            });
        cells.push(match outcome {
            Ok((a, fr, tpr)) => Cell {
                auroc: Some(a),
                fr: fr.map(fold_ratio),
                tpr: tpr.map(fold_ratio),
                error: None,
            },
            Err(e) => Cell { auroc: None, fr: None, tpr: None, error: Some(e.to_string()) },
        });
    }
    let worst_ratio = cells
        .iter()
        .flat_map(|c| c.fr.iter().chain(c.tpr.iter()))
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let worst_ratio = if worst_ratio.is_finite() { worst_ratio } else { 0.0 };

    let mut leaderboard = Vec::with_capacity(grid.len());
    let mut best: Option<(usize, f64)> = None;
    for (i, (hp, cell)) in grid.iter().zip(&cells).enumerate() {
        let (distance, penalized) = match cell.auroc {
            Some(a) => {
                let fr = cell.fr.unwrap_or(worst_ratio);
                let tpr = cell.tpr.unwrap_or(worst_ratio);
                let penalized = cell.fr.is_none() || cell.tpr.is_none();
                let d = ((1.0 - a).powi(2) + (1.0 - fr).powi(2) + (1.0 - tpr).powi(2)).sqrt();
                (Some(d), penalized)
            }
            None => (None, false),
        };
        leaderboard.push(LeaderboardRow {
            index: i,
            config: DetectorConfig::Fairod(*hp).describe(),
            auroc: cell.auroc,
            fr_ratio: cell.fr,
            tpr_ratio: cell.tpr,
            distance,
            penalized,
            error: cell.error.clone(),
        });
        if let Some(d) = distance {
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
    }
    let (best_index, _) =
        best.ok_or_else(|| Error::Config("every fairness tuning cell failed".into()))?;
    Ok(TuneOutcome { best_index, best: grid[best_index], leaderboard })
}

/// Applies the injection, tunes when asked, and returns the biased dataset,
/// the chosen configuration, and its scores. Shared by the sweep runner and
/// the command line.
pub fn inject_tune_score(
    ds: &Dataset,
    spec: Option<&bias::BiasSpec>,
    cfg: &DetectorConfig,
    tune: bool,
    seed_value: u64,
) -> Result<(Dataset, DetectorConfig, ScoreVector)> {
    let biased = match spec {
        Some(spec) => bias::apply(ds, spec)?,
        None => ds.clone(),
    };
    let chosen = if tune {
        match cfg {
            DetectorConfig::Lof(_) => {
                tune_standard(&biased, &lof_grid(), seed::derive(seed_value, &[1]))?.best
            }
            DetectorConfig::Iforest(c) => DetectorConfig::Iforest(*c),
            DetectorConfig::Deepae(_) => {
                tune_standard(&biased, &deepae_grid(), seed::derive(seed_value, &[1]))?.best
            }
            DetectorConfig::Fairod(h) => {
                let outcome =
                    tune_fairod(&biased, &fairod_grid(h.base), seed::derive(seed_value, &[1]))?;
                DetectorConfig::Fairod(outcome.best)
            }
        }
    } else {
        cfg.clone()
    };
    let scores = score_with(&biased, &chosen, seed::derive(seed_value, &[2]))?;
    Ok((biased, chosen, scores))
}
