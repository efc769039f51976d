//! End-to-end experiment orchestration: scenario sweeps over a bias grid,
//! repeats, aggregation, CSV persistence, and figure emission.
//!
//! Every sweep cell owns a seed derived from the master seed and the cell's
//! coordinates (scenario, knob index, detector index, repeat), so cells can
//! run in any order or in parallel and still produce byte-identical outputs.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bias::{BiasSpec, BiasVariant, SamplingMode};
use crate::data::{simulate, OutlierMode, SimConfig};
use crate::error::{Error, Result};
use crate::metrics::{self, Grouping, MetricReport};
use crate::plot::{line_chart, Series};
use crate::seed;
use crate::tuning::{inject_tune_score, DetectorConfig};

/// Which bias family a sweep walks through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// No injection; the knob grid is ignored beyond providing one cell.
    None,
    SizeDisparity,
    UnderRepresentation,
    VarianceShift,
    MeanShift,
    Obfuscation,
    /// Knob values are target group-b outlier counts; group a absorbs the rest.
    UnequalBaseRates,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::None => "none",
            ScenarioKind::SizeDisparity => "size_disparity",
            ScenarioKind::UnderRepresentation => "under_representation",
            ScenarioKind::VarianceShift => "variance_shift",
            ScenarioKind::MeanShift => "mean_shift",
            ScenarioKind::Obfuscation => "obfuscation",
            ScenarioKind::UnequalBaseRates => "unequal_base_rates",
        }
    }

    fn id(self) -> u64 {
        match self {
            ScenarioKind::None => 0,
            ScenarioKind::SizeDisparity => 1,
            ScenarioKind::UnderRepresentation => 2,
            ScenarioKind::VarianceShift => 3,
            ScenarioKind::MeanShift => 4,
            ScenarioKind::Obfuscation => 5,
            ScenarioKind::UnequalBaseRates => 6,
        }
    }
}

/// Scenario description: the bias family and its knob grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioPlan {
    pub kind: ScenarioKind,
    #[serde(default)]
    pub betas: Vec<f64>,
    #[serde(default)]
    pub mode: SamplingMode,
}

/// One detector entry in a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorPlan {
    #[serde(flatten)]
    pub config: DetectorConfig,
    /// Tune per biased dataset; a false value freezes the given config.
    #[serde(default)]
    pub tune: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub master_seed: u64,
    #[serde(default = "default_shallow")]
    pub repeats_shallow: usize,
    #[serde(default = "default_deep")]
    pub repeats_deep: usize,
    #[serde(default)]
    pub grouping: Grouping,
}

fn default_shallow() -> usize {
    10
}

fn default_deep() -> usize {
    5
}

/// A full sweep description; serializable as a TOML plan file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub sim: SimConfig,
    pub scenario: ScenarioPlan,
    pub run: RunSettings,
    pub detectors: Vec<DetectorPlan>,
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        if self.detectors.is_empty() {
            return Err(Error::Config("sweep needs at least one detector".into()));
        }
        if self.run.repeats_shallow == 0 || self.run.repeats_deep == 0 {
            return Err(Error::Config("repeat counts must be at least 1".into()));
        }
        if self.scenario.kind != ScenarioKind::None && self.scenario.betas.is_empty() {
            return Err(Error::Config("scenario needs a non-empty knob grid".into()));
        }
        Ok(())
    }

    fn knobs(&self) -> Vec<f64> {
        if self.scenario.kind == ScenarioKind::None {
            vec![0.0]
        } else {
            self.scenario.betas.clone()
        }
    }
}

/// One executed cell: provenance plus its evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub run_id: usize,
    pub scenario: String,
    pub outlier_mode: String,
    pub beta: f64,
    pub detector: String,
    pub repeat: usize,
    pub seed: u64,
    pub selected: String,
    pub report: Option<MetricReport>,
    pub error: Option<String>,
}

/// Mean and spread of one metric at one grid point.
#[derive(Debug, Clone, Serialize)]
pub struct AggregateRow {
    pub scenario: String,
    pub beta: f64,
    pub detector: String,
    pub metric: String,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub n: usize,
}

pub struct SweepOutcome {
    pub records: Vec<RunRecord>,
    pub aggregate: Vec<AggregateRow>,
}

/// The fixed metric column set shared by run CSVs and aggregates.
pub const METRIC_NAMES: [&str; 15] = [
    "auroc", "f1", "fr_a", "fr_b", "tpr_a", "tpr_b", "fpr_a", "fpr_b", "ppv_a", "ppv_b",
    "fr_ratio", "tpr_ratio", "fpr_ratio", "ppv_ratio", "bias_amp",
];

/// Metric values in `METRIC_NAMES` order; `None` for undefined cells.
pub fn metric_values(report: &MetricReport) -> [Option<f64>; 15] {
    let def = |v: f64| if v.is_finite() { Some(v) } else { None };
    [
        def(report.auroc),
        def(report.f1),
        report.group_a.flag_rate,
        report.group_b.flag_rate,
        report.group_a.tpr,
        report.group_b.tpr,
        report.group_a.fpr,
        report.group_b.fpr,
        report.group_a.ppv,
        report.group_b.ppv,
        report.fr_ratio,
        report.tpr_ratio,
        report.fpr_ratio,
        report.ppv_ratio,
        report.bias_amplification,
    ]
}

fn bias_spec_for(plan: &SweepPlan, knob: f64, bias_seed: u64) -> Result<Option<BiasSpec>> {
    let variant = match plan.scenario.kind {
        ScenarioKind::None => return Ok(None),
        ScenarioKind::SizeDisparity => BiasVariant::SizeDisparity { beta: knob },
        ScenarioKind::UnderRepresentation => BiasVariant::UnderRepresentation { beta: knob },
        ScenarioKind::VarianceShift => BiasVariant::VarianceShift { beta: knob },
        ScenarioKind::MeanShift => BiasVariant::MeanShift { beta: knob },
        ScenarioKind::Obfuscation => BiasVariant::Obfuscation { beta: knob },
        ScenarioKind::UnequalBaseRates => {
            let total = 2 * plan.sim.outliers_per_group();
            let outliers_b = knob.round() as usize;
            if outliers_b > total {
                return Err(Error::Config(format!(
                    "target group-b outliers {outliers_b} exceed the total {total}"
                )));
            }
            BiasVariant::UnequalBaseRates { outliers_a: total - outliers_b, outliers_b }
        }
    };
    Ok(Some(BiasSpec { variant, sampling_mode: plan.scenario.mode, seed: bias_seed }))
}

fn is_deep(cfg: &DetectorConfig) -> bool {
    matches!(cfg, DetectorConfig::Deepae(_) | DetectorConfig::Fairod(_))
}

/// Executes every (knob, detector, repeat) cell and aggregates the results.
///
/// Cells run in parallel; records come back in deterministic cell order
/// regardless of scheduling, and each cell's seed depends only on the master
/// seed and its coordinates.
pub fn run_sweep(plan: &SweepPlan) -> Result<SweepOutcome> {
    plan.validate()?;
    let knobs = plan.knobs();
    struct Cell {
        knob_idx: usize,
        det_idx: usize,
        repeat: usize,
    }
    let mut cells = Vec::new();
    for knob_idx in 0..knobs.len() {
        for (det_idx, det) in plan.detectors.iter().enumerate() {
            let repeats = if is_deep(&det.config) {
                plan.run.repeats_deep
            } else {
                plan.run.repeats_shallow
            };
            for repeat in 0..repeats {
                cells.push(Cell { knob_idx, det_idx, repeat });
            }
        }
    }

    let records: Vec<RunRecord> = cells
        .par_iter()
        .enumerate()
        .map(|(run_id, cell)| {
            let det = &plan.detectors[cell.det_idx];
            let knob = knobs[cell.knob_idx];
            let cell_seed = seed::derive(
                plan.run.master_seed,
                &[
                    plan.scenario.kind.id(),
                    cell.knob_idx as u64,
                    cell.det_idx as u64,
                    cell.repeat as u64,
                ],
            );
            let mut record = RunRecord {
                run_id,
                scenario: plan.scenario.kind.name().to_string(),
                outlier_mode: match plan.sim.outlier_mode {
                    OutlierMode::Clustered => "clustered".to_string(),
                    OutlierMode::Scattered => "scattered".to_string(),
                },
                beta: knob,
                detector: det.config.kind().to_string(),
                repeat: cell.repeat,
                seed: cell_seed,
                selected: String::new(),
                report: None,
                error: None,
            };
            match run_cell(plan, det, knob, cell_seed) {
                Ok((selected, report)) => {
                    record.selected = selected;
                    record.report = Some(report);
                }
                Err(e) => record.error = Some(e.to_string()),
            }
            record
        })
        .collect();

    let aggregate = aggregate_records(plan, &knobs, &records);
    Ok(SweepOutcome { records, aggregate })
}

/// Simulate, inject, optionally tune, score, flag, and evaluate one cell.
pub fn run_cell(
    plan: &SweepPlan,
    det: &DetectorPlan,
    knob: f64,
    cell_seed: u64,
) -> Result<(String, MetricReport)> {
    let sim_cfg = SimConfig { seed: seed::derive(cell_seed, &[10]), ..plan.sim.clone() };
    let ds = simulate(&sim_cfg)?;
    let spec = bias_spec_for(plan, knob, seed::derive(cell_seed, &[11]))?;
    let (biased, chosen, scores) =
        inject_tune_score(&ds, spec.as_ref(), &det.config, det.tune, cell_seed)?;
    let budget = biased.outlier_count();
    let flags = metrics::flag_top_k(&scores, budget);
    let report = metrics::evaluate(&scores, &flags, &biased, plan.run.grouping)?;
    Ok((chosen.describe(), report))
}

fn aggregate_records(plan: &SweepPlan, knobs: &[f64], records: &[RunRecord]) -> Vec<AggregateRow> {
    let mut rows = Vec::new();
    for &knob in knobs {
        for det in &plan.detectors {
            let kind = det.config.kind();
            let members: Vec<&RunRecord> = records
                .iter()
                .filter(|r| r.beta == knob && r.detector == kind && r.report.is_some())
                .collect();
            for (mi, metric) in METRIC_NAMES.iter().enumerate() {
                let values: Vec<f64> = members
                    .iter()
                    .filter_map(|r| metric_values(r.report.as_ref().expect("filtered"))[mi])
                    .collect();
                let n = values.len();
                let (mean, std) = if n == 0 {
                    (None, None)
                } else {
                    let m = values.iter().sum::<f64>() / n as f64;
                    let s = if n > 1 {
                        Some(
                            (values.iter().map(|v| (v - m).powi(2)).sum::<f64>()
                                / (n as f64 - 1.0))
                                .sqrt(),
                        )
                    } else {
                        None
                    };
                    (Some(m), s)
                };
                rows.push(AggregateRow {
                    scenario: plan.scenario.kind.name().to_string(),
                    beta: knob,
                    detector: kind.to_string(),
                    metric: metric.to_string(),
                    mean,
                    std,
                    n,
                });
            }
        }
    }
    rows
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Serializes run records with the fixed metric column set; absent metrics
/// stay empty so the schema is stable across scenarios.
pub fn runs_csv(records: &[RunRecord]) -> String {
    let mut out = String::from("run_id,scenario,mode,beta,detector,repeat,seed,selected,");
    out.push_str(&METRIC_NAMES.join(","));
    out.push_str(",error\n");
    for r in records {
        let metrics: Vec<String> = match &r.report {
            Some(rep) => metric_values(rep).iter().map(|v| opt(*v)).collect(),
            None => vec![String::new(); METRIC_NAMES.len()],
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},\"{}\",{},{}\n",
            r.run_id,
            r.scenario,
            r.outlier_mode,
            r.beta,
            r.detector,
            r.repeat,
            r.seed,
            r.selected,
            metrics.join(","),
            r.error.clone().unwrap_or_default()
        ));
    }
    out
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from("scenario,beta,detector,metric,mean,std,n\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.scenario,
            r.beta,
            r.detector,
            r.metric,
            opt(r.mean),
            opt(r.std),
            r.n
        ));
    }
    out
}

/// Figure set for one aggregate table: per detector, the four group-wise
/// rates as two-line charts plus a single-line overall AUROC chart.
pub fn render_plots(rows: &[AggregateRow]) -> Vec<(String, String)> {
    const FAMILIES: [(&str, &str, &str); 5] = [
        ("fr", "fr_a", "fr_b"),
        ("tpr", "tpr_a", "tpr_b"),
        ("fpr", "fpr_a", "fpr_b"),
        ("ppv", "ppv_a", "ppv_b"),
        ("auroc", "auroc", ""),
    ];
    let mut detectors: Vec<String> = rows.iter().map(|r| r.detector.clone()).collect();
    detectors.sort();
    detectors.dedup();
    let scenario = rows.first().map(|r| r.scenario.clone()).unwrap_or_default();

    let series_for = |detector: &str, metric: &str, label: &str, color: &'static str| {
        let mut points: Vec<(f64, Option<(f64, f64)>)> = rows
            .iter()
            .filter(|r| r.detector == detector && r.metric == metric)
            .map(|r| (r.beta, r.mean.map(|m| (m, r.std.unwrap_or(0.0)))))
            .collect();
        points.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite knobs"));
        Series { label: label.to_string(), color, points }
    };

    let mut figures = Vec::new();
    for detector in &detectors {
        for (family, metric_a, metric_b) in FAMILIES {
            let series = if metric_b.is_empty() {
                vec![series_for(detector, metric_a, "overall", "#2c3e50")]
            } else {
                vec![
                    series_for(detector, metric_a, "group a", "#c0392b"),
                    series_for(detector, metric_b, "group b", "#2980b9"),
                ]
            };
            if series.iter().all(|s| s.points.iter().all(|(_, v)| v.is_none())) {
                continue;
            }
            let title = format!("{detector}: {family} vs {scenario}");
            let svg = line_chart(&title, &scenario, family, &series);
            figures.push((format!("{detector}_{family}.svg"), svg));
        }
    }
    figures
}

/// Writes `runs.csv`, `aggregate.csv`, `plots/*.svg`, and `provenance.txt`.
pub fn write_outputs(plan: &SweepPlan, outcome: &SweepOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("runs.csv"), runs_csv(&outcome.records))?;
    fs::write(dir.join("aggregate.csv"), aggregate_csv(&outcome.aggregate))?;
    let plots = dir.join("plots");
    fs::create_dir_all(&plots)?;
    for (name, svg) in render_plots(&outcome.aggregate) {
        fs::write(plots.join(name), svg)?;
    }
    let plan_echo = toml::to_string_pretty(plan)
        .map_err(|e| Error::Parse(format!("serialize plan: {e}")))?;
    let failed = outcome.records.iter().filter(|r| r.error.is_some()).count();
    let provenance = format!(
        "master_seed = {}\ncells = {}\nfailed_cells = {}\n\n[plan]\n{plan_echo}",
        plan.run.master_seed,
        outcome.records.len(),
        failed
    );
    fs::write(dir.join("provenance.txt"), provenance)?;
    Ok(())
}

/// Re-executes one recorded cell from its provenance coordinates.
pub fn replay(plan: &SweepPlan, record: &RunRecord) -> Result<RunRecord> {
    let det = plan
        .detectors
        .iter()
        .find(|d| d.config.kind() == record.detector)
        .ok_or_else(|| Error::Config(format!("plan has no detector {:?}", record.detector)))?;
    let mut fresh = record.clone();
    match run_cell(plan, det, record.beta, record.seed) {
        Ok((selected, report)) => {
            fresh.selected = selected;
            fresh.report = Some(report);
            fresh.error = None;
        }
        Err(e) => {
            fresh.report = None;
            fresh.error = Some(e.to_string());
        }
    }
    Ok(fresh)
}
