//! Bias injectors: transformations from an unbiased population to a biased one.
//!
//! Each injector touches only group b (the underprivileged group); group-a
//! rows pass through untouched. The one exception is the unequal-base-rate
//! transform, which regenerates outliers in both groups while conserving the
//! total outlier count and the per-group inlier counts.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureRole, GroupLabel, OutlierMode};
use crate::error::{Error, Result};

/// Whether removals hit an exact count or are drawn independently per row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    /// Exactly `round(beta * eligible)` rows are removed, uniformly chosen.
    #[default]
    #[serde(rename = "exact")]
    ExactCount,
    /// Each eligible row is removed independently with probability `beta`.
    Bernoulli,
}

/// One injection scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum BiasVariant {
    SizeDisparity { beta: f64 },
    UnderRepresentation { beta: f64 },
    VarianceShift { beta: f64 },
    MeanShift { beta: f64 },
    Obfuscation { beta: f64 },
    UnequalBaseRates { outliers_a: usize, outliers_b: usize },
}

impl BiasVariant {
    pub fn name(&self) -> &'static str {
        match self {
            BiasVariant::SizeDisparity { .. } => "size_disparity",
            BiasVariant::UnderRepresentation { .. } => "under_representation",
            BiasVariant::VarianceShift { .. } => "variance_shift",
            BiasVariant::MeanShift { .. } => "mean_shift",
            BiasVariant::Obfuscation { .. } => "obfuscation",
            BiasVariant::UnequalBaseRates { .. } => "unequal_base_rates",
        }
    }

    /// Scalar knob of the scenario, used for sweep axes and reports.
    pub fn beta(&self) -> f64 {
        match *self {
            BiasVariant::SizeDisparity { beta }
            | BiasVariant::UnderRepresentation { beta }
            | BiasVariant::VarianceShift { beta }
            | BiasVariant::MeanShift { beta }
            | BiasVariant::Obfuscation { beta } => beta,
            // Report the target group-b outlier count on the sweep axis.
            BiasVariant::UnequalBaseRates { outliers_b, .. } => outliers_b as f64,
        }
    }
}

/// Tagged description of one bias injection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasSpec {
    #[serde(flatten)]
    pub variant: BiasVariant,
    #[serde(default)]
    pub sampling_mode: SamplingMode,
    pub seed: u64,
}

impl BiasSpec {
    pub fn validate(&self) -> Result<()> {
        let frac = |beta: f64, name: &str| {
            if (0.0..1.0).contains(&beta) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} beta must lie in [0, 1); got {beta}")))
            }
        };
        match self.variant {
            BiasVariant::SizeDisparity { beta } => frac(beta, "size_disparity"),
            BiasVariant::UnderRepresentation { beta } => frac(beta, "under_representation"),
            BiasVariant::Obfuscation { beta } => frac(beta, "obfuscation"),
            BiasVariant::VarianceShift { beta } | BiasVariant::MeanShift { beta } => {
                if beta >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::Config(format!("shift beta must be non-negative; got {beta}")))
                }
            }
            BiasVariant::UnequalBaseRates { .. } => Ok(()),
        }
    }
}

/// Applies the injection described by `spec`.
pub fn apply(ds: &Dataset, spec: &BiasSpec) -> Result<Dataset> {
    spec.validate()?;
    match spec.variant {
        BiasVariant::SizeDisparity { beta } => {
            inject_size_bias(ds, beta, spec.sampling_mode, spec.seed)
        }
        BiasVariant::UnderRepresentation { beta } => {
            inject_underrep_bias(ds, beta, spec.sampling_mode, spec.seed)
        }
        BiasVariant::VarianceShift { beta } => inject_variance_shift(ds, beta),
        BiasVariant::MeanShift { beta } => inject_mean_shift(ds, beta),
        BiasVariant::Obfuscation { beta } => inject_obfuscation(ds, beta, spec.seed),
        BiasVariant::UnequalBaseRates { outliers_a, outliers_b } => {
            set_unequal_base_rates(ds, outliers_a, outliers_b, spec.seed)
        }
    }
}

fn check_fraction(beta: f64, name: &str) -> Result<()> {
    if (0.0..1.0).contains(&beta) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} beta must lie in [0, 1); got {beta}")))
    }
}

/// Uniformly chooses `count` distinct elements of `pool` (partial Fisher-Yates).
fn choose(pool: &mut Vec<usize>, count: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let count = count.min(pool.len());
    for i in 0..count {
        let j = rng.gen_range(i..pool.len());
        pool.swap(i, j);
    }
    let mut chosen: Vec<usize> = pool[..count].to_vec();
    chosen.sort_unstable();
    chosen
}

/// Drops eligible rows per the sampling mode; keeps everything else in order.
fn remove_rows(
    ds: &Dataset,
    eligible: Vec<usize>,
    beta: f64,
    mode: SamplingMode,
    seed: u64,
    tag: String,
) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let removed: Vec<usize> = match mode {
        SamplingMode::ExactCount => {
            let count = (beta * eligible.len() as f64).round() as usize;
            let mut pool = eligible;
            choose(&mut pool, count, &mut rng)
        }
        SamplingMode::Bernoulli => eligible
            .into_iter()
            .filter(|_| rng.gen_range(0.0..1.0) < beta)
            .collect(),
    };
    let keep: Vec<usize> = {
        let mut removed_iter = removed.iter().peekable();
        (0..ds.n_rows())
            .filter(|i| {
                if removed_iter.peek() == Some(&i) {
                    removed_iter.next();
                    false
                } else {
                    true
                }
            })
            .collect()
    };
    let mut out = ds.filter_rows(&keep);
    out.meta.scenario = format!("{} -> {}", ds.meta.scenario, tag);
    out
}

/// Removes group-b rows with probability (or exact fraction) `beta`.
pub fn inject_size_bias(
    ds: &Dataset,
    beta: f64,
    mode: SamplingMode,
    seed: u64,
) -> Result<Dataset> {
    check_fraction(beta, "size_disparity")?;
    let eligible = ds.rows_in_group(GroupLabel::B);
    let tag = format!("size_disparity(beta={beta})");
    Ok(remove_rows(ds, eligible, beta, mode, seed, tag))
}

/// Removes only positively-labeled group-b rows.
pub fn inject_underrep_bias(
    ds: &Dataset,
    beta: f64,
    mode: SamplingMode,
    seed: u64,
) -> Result<Dataset> {
    check_fraction(beta, "under_representation")?;
    let eligible: Vec<usize> = (0..ds.n_rows())
        .filter(|&i| ds.group[i] == GroupLabel::B && ds.y[i])
        .collect();
    let tag = format!("under_representation(beta={beta})");
    Ok(remove_rows(ds, eligible, beta, mode, seed, tag))
}

/// Adds measurement-noise variance `beta * std^2` to group-b proxy and
/// incriminating columns.
///
/// Each affected value is rescaled around its generative mean to the target
/// variance `sigma_cell^2 + beta * sigma_base^2`: on unit-variance cells this
/// multiplies the variance by `1 + beta`, while already-inflated scattered
/// dims gain the same absolute noise floor, the way additive measurement
/// error composes. Supports keep their centers; occlusion columns and group-a
/// rows are untouched. Requires simulation provenance.
pub fn inject_variance_shift(ds: &Dataset, beta: f64) -> Result<Dataset> {
    if beta < 0.0 {
        return Err(Error::Config(format!("variance_shift beta must be non-negative; got {beta}")));
    }
    let base_std = match &ds.meta.sim {
        Some(sim) => sim.std,
        None => {
            return Err(Error::Dataset(
                "variance shift requires simulation provenance to recover generative moments"
                    .into(),
            ))
        }
    };
    let mut out = ds.clone();
    for i in 0..ds.n_rows() {
        if ds.group[i] != GroupLabel::B {
            continue;
        }
        for c in 0..ds.n_cols() {
            if ds.roles[c] == FeatureRole::Occlusion {
                continue;
            }
            let mu = ds.generative_mean(i, c).expect("provenance checked above");
            let sigma = ds.generative_std(i, c).expect("provenance checked above");
            let scale =
                ((sigma * sigma + beta * base_std * base_std) / (sigma * sigma)).sqrt();
            out.set_value(i, c, mu + (ds.value(i, c) - mu) * scale);
        }
    }
    out.meta.scenario = format!("{} -> variance_shift(beta={beta})", ds.meta.scenario);
    Ok(out)
}

/// Shifts group-b incriminating columns additively by `beta`.
pub fn inject_mean_shift(ds: &Dataset, beta: f64) -> Result<Dataset> {
    if beta < 0.0 {
        return Err(Error::Config(format!("mean_shift beta must be non-negative; got {beta}")));
    }
    let mut out = ds.clone();
    for i in 0..ds.n_rows() {
        if ds.group[i] != GroupLabel::B {
            continue;
        }
        for c in 0..ds.n_cols() {
            if ds.roles[c] == FeatureRole::Incriminating {
                out.set_value(i, c, ds.value(i, c) + beta);
            }
        }
    }
    out.meta.scenario = format!("{} -> mean_shift(beta={beta})", ds.meta.scenario);
    Ok(out)
}

/// Flips the reported group of a fraction of group-b rows to a and redraws a
/// random non-empty subset of their proxy values from group-a's distribution.
///
/// `true_group` keeps the pre-obfuscation membership. The flip count is exact:
/// `round(beta * n_b)`. Requires simulation provenance for the proxy law.
pub fn inject_obfuscation(ds: &Dataset, beta: f64, seed: u64) -> Result<Dataset> {
    check_fraction(beta, "obfuscation")?;
    let sim = ds.meta.sim.as_ref().ok_or_else(|| {
        Error::Dataset("obfuscation requires simulation provenance for the proxy distribution".into())
    })?;
    let proxy_a = Normal::new(sim.proxy_mean_a, sim.std).expect("std > 0");

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool = ds.rows_in_group(GroupLabel::B);
    let count = (beta * pool.len() as f64).round() as usize;
    let flipped = choose(&mut pool, count, &mut rng);

    let proxy_cols = ds.columns_with_role(FeatureRole::Proxy);
    let mut out = ds.clone();
    for &i in &flipped {
        out.group[i] = GroupLabel::A;
        let mask = rng.gen_range(1..(1u64 << proxy_cols.len() as u32));
        for (j, &c) in proxy_cols.iter().enumerate() {
            if mask >> j & 1 == 1 {
                out.set_value(i, c, proxy_a.sample(&mut rng));
            }
        }
    }
    out.meta.scenario = format!("{} -> obfuscation(beta={beta})", ds.meta.scenario);
    Ok(out)
}

/// Re-balances outliers across groups while conserving the total outlier count
/// and the per-group inlier counts.
///
/// The surplus group drops uniformly chosen outlier rows; the deficit group
/// gains regenerated outlier rows drawn from the dataset's simulation recipe
/// (appended at the end).
pub fn set_unequal_base_rates(
    ds: &Dataset,
    outliers_a: usize,
    outliers_b: usize,
    seed: u64,
) -> Result<Dataset> {
    let current_a = ds.outlier_count_in(GroupLabel::A);
    let current_b = ds.outlier_count_in(GroupLabel::B);
    if outliers_a + outliers_b != current_a + current_b {
        return Err(Error::Config(format!(
            "target outlier counts ({outliers_a}, {outliers_b}) must sum to the current total {}",
            current_a + current_b
        )));
    }
    let sim = ds
        .meta
        .sim
        .as_ref()
        .ok_or_else(|| {
            Error::Dataset("unequal base rates require simulation provenance to regenerate outliers".into())
        })?
        .clone();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut removed: Vec<usize> = Vec::new();
    let mut additions: Vec<(GroupLabel, usize)> = Vec::new();
    for (g, current, target) in
        [(GroupLabel::A, current_a, outliers_a), (GroupLabel::B, current_b, outliers_b)]
    {
        if target < current {
            let mut pool: Vec<usize> =
                (0..ds.n_rows()).filter(|&i| ds.group[i] == g && ds.y[i]).collect();
            removed.extend(choose(&mut pool, current - target, &mut rng));
        } else if target > current {
            additions.push((g, target - current));
        }
    }
    removed.sort_unstable();

    let keep: Vec<usize> = {
        let mut removed_iter = removed.iter().peekable();
        (0..ds.n_rows())
            .filter(|i| {
                if removed_iter.peek() == Some(&i) {
                    removed_iter.next();
                    false
                } else {
                    true
                }
            })
            .collect()
    };
    let mut out = ds.filter_rows(&keep);
    for (g, count) in additions {
        for _ in 0..count {
            let draw = match sim.outlier_mode {
                OutlierMode::Clustered => crate::data::ScatterDraw::NONE,
                OutlierMode::Scattered => crate::data::scatter_params(&mut rng, &sim),
            };
            let scatter_std = sim.std * draw.factor.sqrt();
            let mut row = Vec::with_capacity(out.n_cols());
            crate::data::draw_row(&mut rng, &sim, g, true, draw.mask, scatter_std, &mut row);
            out.push_row(&row, g, g, true, draw)?;
        }
    }
    out.meta.scenario = format!(
        "{} -> unequal_base_rates(outliers_a={outliers_a}, outliers_b={outliers_b})",
        ds.meta.scenario
    );
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{simulate, SimConfig};

    fn base() -> Dataset {
        simulate(&SimConfig { seed: 11, ..SimConfig::default() }).unwrap()
    }

    #[test]
    fn size_bias_zero_is_identity_up_to_tag() {
        let ds = base();
        let out = inject_size_bias(&ds, 0.0, SamplingMode::ExactCount, 1).unwrap();
        assert_eq!(out.features(), ds.features());
        assert_eq!(out.group, ds.group);
        assert_eq!(out.y, ds.y);
        assert_ne!(out.meta.scenario, ds.meta.scenario);
    }

    #[test]
    fn size_bias_exact_count() {
        let ds = base();
        let out = inject_size_bias(&ds, 0.8, SamplingMode::ExactCount, 1).unwrap();
        assert_eq!(out.rows_in_group(GroupLabel::B).len(), 200);
        assert_eq!(out.rows_in_group(GroupLabel::A).len(), 1000);
    }

    #[test]
    fn underrep_touches_only_b_outliers() {
        let ds = base();
        let out = inject_underrep_bias(&ds, 0.8, SamplingMode::ExactCount, 1).unwrap();
        assert_eq!(out.outlier_count_in(GroupLabel::B), 20);
        assert_eq!(out.outlier_count_in(GroupLabel::A), 100);
        assert_eq!(out.rows_in_group(GroupLabel::B).len(), 920);
    }

    #[test]
    fn variance_shift_zero_is_identity_up_to_tag() {
        let ds = base();
        let out = inject_variance_shift(&ds, 0.0).unwrap();
        assert_eq!(out.features(), ds.features());
    }

    #[test]
    fn variance_shift_requires_provenance() {
        let mut ds = base();
        ds.meta.sim = None;
        assert!(matches!(inject_variance_shift(&ds, 1.0), Err(Error::Dataset(_))));
    }

    #[test]
    fn mean_shift_moves_culprit_columns_exactly() {
        let ds = base();
        let out = inject_mean_shift(&ds, 2.0).unwrap();
        let culprit = ds.columns_with_role(FeatureRole::Incriminating);
        let proxy = ds.columns_with_role(FeatureRole::Proxy);
        for i in 0..ds.n_rows() {
            let delta = if ds.group[i] == GroupLabel::B { 2.0 } else { 0.0 };
            for &c in &culprit {
                assert_eq!(out.value(i, c), ds.value(i, c) + delta);
            }
            for &c in &proxy {
                assert_eq!(out.value(i, c), ds.value(i, c));
            }
        }
    }

    #[test]
    fn obfuscation_flips_exact_count_and_conserves_rows() {
        let ds = base();
        let out = inject_obfuscation(&ds, 0.2, 5).unwrap();
        assert_eq!(out.n_rows(), ds.n_rows());
        let flipped = (0..out.n_rows())
            .filter(|&i| out.group[i] == GroupLabel::A && out.true_group[i] == GroupLabel::B)
            .count();
        assert_eq!(flipped, 200);
        let true_b = out.true_group.iter().filter(|&&g| g == GroupLabel::B).count();
        assert_eq!(true_b, 1000);
    }

    #[test]
    fn unequal_base_rates_conserves_totals() {
        let ds = base();
        let out = set_unequal_base_rates(&ds, 160, 40, 9).unwrap();
        assert_eq!(out.outlier_count_in(GroupLabel::A), 160);
        assert_eq!(out.outlier_count_in(GroupLabel::B), 40);
        assert_eq!(out.outlier_count(), 200);
        let inliers =
            |g| out.rows_in_group(g).iter().filter(|&&i| !out.y[i]).count();
        assert_eq!(inliers(GroupLabel::A), 900);
        assert_eq!(inliers(GroupLabel::B), 900);
    }

    #[test]
    fn unequal_base_rates_rejects_bad_total() {
        let ds = base();
        assert!(set_unequal_base_rates(&ds, 150, 40, 9).is_err());
    }

    #[test]
    fn invalid_betas_rejected() {
        let ds = base();
        assert!(inject_size_bias(&ds, 1.0, SamplingMode::ExactCount, 0).is_err());
        assert!(inject_obfuscation(&ds, -0.1, 0).is_err());
        assert!(inject_mean_shift(&ds, -1.0).is_err());
    }
}
