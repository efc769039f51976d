//! Detection-performance and group-fairness metrics.
//!
//! Rates that would divide by zero surface as `None`, never as NaN, and
//! ratios are only formed when both terms are defined with a positive
//! denominator. Thresholding flags a fixed budget of top-scored rows with
//! score ties broken toward the lower row index; ranking quality uses
//! mid-rank AUROC.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, GroupLabel};
use crate::error::{Error, Result};

/// Per-row outlierness scores, aligned to dataset rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(scores: Vec<f64>, expected_len: usize) -> Result<Self> {
        if scores.len() != expected_len {
            return Err(Error::Dataset(format!(
                "score vector length {} does not match dataset rows {expected_len}",
                scores.len()
            )));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::Dataset("scores must be finite".into()));
        }
        Ok(ScoreVector(scores))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Deref for ScoreVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Per-row outlier decisions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlagVector(pub Vec<bool>);

impl FlagVector {
    pub fn flag_count(&self) -> usize {
        self.0.iter().filter(|&&f| f).count()
    }
}

/// Which group column drives the per-group report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grouping {
    /// Pre-obfuscation membership: tracks harm to the individuals themselves.
    #[default]
    True,
    /// Group label as the detector would observe it.
    Reported,
}

/// Rates for one group; `None` marks an empty denominator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub n: usize,
    pub flag_rate: Option<f64>,
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
    pub ppv: Option<f64>,
}

/// Overall and group-wise evaluation of one flagging decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub auroc: f64,
    pub f1: f64,
    pub group_a: GroupStats,
    pub group_b: GroupStats,
    pub fr_ratio: Option<f64>,
    pub tpr_ratio: Option<f64>,
    pub fpr_ratio: Option<f64>,
    pub ppv_ratio: Option<f64>,
    pub bias_amplification: Option<f64>,
}

/// Flags the `k_true` highest-scoring rows.
pub fn flag_top_k(scores: &ScoreVector, k_true: usize) -> FlagVector {
    let n = scores.len();
    let k = k_true.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| {
        scores[b].partial_cmp(&scores[a]).expect("finite scores").then(a.cmp(&b))
    });
    let mut flags = vec![false; n];
    for &i in order.iter().take(k) {
        flags[i] = true;
    }
    FlagVector(flags)
}

/// Mid-rank AUROC: the probability a random positive outranks a random
/// negative, counting ties as one half.
pub fn auroc(scores: &ScoreVector, y: &[bool]) -> Result<f64> {
    if scores.len() != y.len() {
        return Err(Error::Dataset("scores and labels differ in length".into()));
    }
    let pos = y.iter().filter(|&&v| v).count();
    let neg = y.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(
            "auroc needs both classes present".into(),
        ));
    }
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));
    // Mid-ranks over tied score runs.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let mid_rank = (i + 1 + j) as f64 / 2.0; // average of ranks i+1 ..= j
        for &idx in &order[i..j] {
            if y[idx] {
                rank_sum_pos += mid_rank;
            }
        }
        i = j;
    }
    let pos_f = pos as f64;
    Ok((rank_sum_pos - pos_f * (pos_f + 1.0) / 2.0) / (pos_f * neg as f64))
}

/// F1 from flags: harmonic mean of precision and recall; zero when nothing
/// was correctly flagged.
pub fn f1(flags: &FlagVector, y: &[bool]) -> Result<f64> {
    if flags.0.len() != y.len() {
        return Err(Error::Dataset("flags and labels differ in length".into()));
    }
    if y.iter().all(|&v| !v) {
        return Err(Error::UndefinedMetric("f1 undefined without positives".into()));
    }
    let tp = flags.0.iter().zip(y).filter(|&(&f, &t)| f && t).count() as f64;
    if tp == 0.0 {
        return Ok(0.0);
    }
    let fp = flags.0.iter().zip(y).filter(|&(&f, &t)| f && !t).count() as f64;
    let fn_ = flags.0.iter().zip(y).filter(|&(&f, &t)| !f && t).count() as f64;
    let precision = tp / (tp + fp);
    let recall = tp / (tp + fn_);
    Ok(2.0 * precision * recall / (precision + recall))
}

fn ratio(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) if y > 0.0 => Some(x / y),
        _ => None,
    }
}

fn group_stats(rows: &[usize], flags: &FlagVector, y: &[bool]) -> GroupStats {
    let n = rows.len();
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut pos = 0usize;
    let mut flagged = 0usize;
    for &i in rows {
        let f = flags.0[i];
        let t = y[i];
        flagged += f as usize;
        pos += t as usize;
        tp += (f && t) as usize;
        fp += (f && !t) as usize;
    }
    let neg = n - pos;
    let rate = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    GroupStats {
        n,
        flag_rate: rate(flagged, n),
        tpr: rate(tp, pos),
        fpr: rate(fp, neg),
        ppv: rate(tp, flagged),
    }
}

/// Per-group confusion rates and their a/b ratios for one flagging decision.
pub fn group_report(flags: &FlagVector, ds: &Dataset, grouping: Grouping) -> Result<MetricReport> {
    if flags.0.len() != ds.n_rows() {
        return Err(Error::Dataset("flags and dataset differ in length".into()));
    }
    let column = match grouping {
        Grouping::Reported => &ds.group,
        Grouping::True => &ds.true_group,
    };
    let rows_a: Vec<usize> = (0..ds.n_rows()).filter(|&i| column[i] == GroupLabel::A).collect();
    let rows_b: Vec<usize> = (0..ds.n_rows()).filter(|&i| column[i] == GroupLabel::B).collect();
    if rows_a.is_empty() || rows_b.is_empty() {
        return Err(Error::UndefinedMetric("group report needs both groups non-empty".into()));
    }
    let group_a = group_stats(&rows_a, flags, &ds.y);
    let group_b = group_stats(&rows_b, flags, &ds.y);
    // AUROC needs raw scores; `evaluate` fills it. NaN marks "not computed"
    // and serializes to an empty CSV field.
    Ok(MetricReport {
        auroc: f64::NAN,
        f1: f1(flags, &ds.y).unwrap_or(f64::NAN),
        fr_ratio: ratio(group_a.flag_rate, group_b.flag_rate),
        tpr_ratio: ratio(group_a.tpr, group_b.tpr),
        fpr_ratio: ratio(group_a.fpr, group_b.fpr),
        ppv_ratio: ratio(group_a.ppv, group_b.ppv),
        bias_amplification: None,
        group_a,
        group_b,
    })
}

/// Full evaluation: mid-rank AUROC from raw scores, F1 and group rates from
/// the flags, and bias amplification from the observed base rates.
pub fn evaluate(
    scores: &ScoreVector,
    flags: &FlagVector,
    ds: &Dataset,
    grouping: Grouping,
) -> Result<MetricReport> {
    let mut report = group_report(flags, ds, grouping)?;
    report.auroc = auroc(scores, &ds.y)?;
    report.f1 = f1(flags, &ds.y)?;
    let column = match grouping {
        Grouping::Reported => &ds.group,
        Grouping::True => &ds.true_group,
    };
    let base_rate = |g: GroupLabel| {
        let rows: Vec<usize> = (0..ds.n_rows()).filter(|&i| column[i] == g).collect();
        let pos = rows.iter().filter(|&&i| ds.y[i]).count();
        (!rows.is_empty()).then(|| pos as f64 / rows.len() as f64)
    };
    report.bias_amplification = bias_amplification(&report, base_rate(GroupLabel::A), base_rate(GroupLabel::B));
    Ok(report)
}

/// Flag-rate ratio over ground-truth base-rate ratio; `None` when any
/// denominator vanishes.
pub fn bias_amplification(
    report: &MetricReport,
    br_a: Option<f64>,
    br_b: Option<f64>,
) -> Option<f64> {
    let fr_ratio = report.fr_ratio?;
    let br_a = br_a?;
    let br_b = br_b?;
    if br_b <= 0.0 || br_a <= 0.0 {
        return None;
    }
    Some(fr_ratio / (br_a / br_b))
}

/// Folds a ratio into `(0, 1]` so over- and under-shooting weigh equally.
pub fn fold_ratio(r: f64) -> f64 {
    if r <= 0.0 {
        0.0
    } else {
        r.min(1.0 / r)
    }
}
