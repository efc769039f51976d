//! Command-line front end: simulate populations, inject bias, score with any
//! detector, evaluate group-wise metrics, tune hyperparameters, check the
//! closed-form predictions, and run full sweeps with plots.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use odaudit_core::bias::{BiasSpec, BiasVariant, SamplingMode};
use odaudit_core::data::{simulate, SimConfig};
use odaudit_core::deep::{DeepHP, FairHP};
use odaudit_core::iforest::IForestConfig;
use odaudit_core::io;
use odaudit_core::lof::LofConfig;
use odaudit_core::metrics::{self, Grouping, ScoreVector};
use odaudit_core::sweep::{self, SweepPlan, METRIC_NAMES};
use odaudit_core::theory::{self, IdealGeometry, TheoryPrediction};
use odaudit_core::tuning::{self, DetectorConfig};

#[derive(Parser)]
#[command(name = "odaudit", version, about = "Fairness sandbox for outlier detectors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a population from a simulation config.
    Simulate {
        /// TOML simulation config.
        #[arg(long)]
        config: PathBuf,
        /// Output CSV path (a .meta.toml sidecar is written next to it).
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply one bias injection to a dataset.
    Inject {
        #[arg(long = "in")]
        input: PathBuf,
        /// size_disparity | under_representation | variance_shift |
        /// mean_shift | obfuscation | unequal_base_rates
        #[arg(long)]
        bias: String,
        /// Bias knob; for unequal_base_rates this is the target group-b
        /// outlier count.
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value = "exact")]
        mode: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a dataset with one detector.
    FitScore(FitScoreArgs),
    /// Evaluate scores against a dataset's labels and groups.
    Evaluate {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// true | reported
        #[arg(long, default_value = "true")]
        grouping: String,
        #[arg(long)]
        out: PathBuf,
        /// Provenance echoed into the report row.
        #[arg(long, default_value = "adhoc")]
        scenario: String,
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
        #[arg(long, default_value = "unknown")]
        detector: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Grid-search hyperparameters on a dataset.
    Tune {
        #[arg(long = "in")]
        input: PathBuf,
        /// lof | deepae | fairod (iforest has fixed defaults)
        #[arg(long)]
        detector: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Base autoencoder config (TOML), required for fairod.
        #[arg(long)]
        hp: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a closed-form prediction on an idealized geometry.
    TheoryCheck {
        /// 1..5 | lemma1 | lemma2
        #[arg(long)]
        prop: String,
        /// TOML geometry description.
        #[arg(long)]
        geom: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a full scenario sweep from a plan file.
    Sweep {
        #[arg(long)]
        plan: PathBuf,
        /// Worker threads (defaults to the logical CPU count).
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-execute one recorded sweep cell and verify its metrics.
    Replay {
        /// run_id from runs.csv.
        #[arg(long)]
        record: usize,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        runs: PathBuf,
    },
}

#[derive(Args)]
struct FitScoreArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// lof | iforest | deepae | fairod
    #[arg(long)]
    detector: String,
    /// Shallow parameters: k=<n> for lof, trees=<n>,sub=<n> for iforest.
    #[arg(long)]
    param: Option<String>,
    /// Deep hyperparameters (TOML DeepHP; FairHP for fairod).
    #[arg(long)]
    hp: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn parse_grouping(s: &str) -> Result<Grouping> {
    match s {
        "true" => Ok(Grouping::True),
        "reported" => Ok(Grouping::Reported),
        other => bail!("unknown grouping {other:?} (expected true or reported)"),
    }
}

fn parse_mode(s: &str) -> Result<SamplingMode> {
    match s {
        "exact" => Ok(SamplingMode::ExactCount),
        "bernoulli" => Ok(SamplingMode::Bernoulli),
        other => bail!("unknown sampling mode {other:?}"),
    }
}

fn parse_kv(param: &str) -> Vec<(String, String)> {
    param
        .split(',')
        .filter_map(|pair| {
            let mut it = pair.splitn(2, '=');
            Some((it.next()?.trim().to_string(), it.next()?.trim().to_string()))
        })
        .collect()
}

fn detector_config(args: &FitScoreArgs) -> Result<DetectorConfig> {
    let kv = args.param.as_deref().map(parse_kv).unwrap_or_default();
    let get = |key: &str| kv.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
    let parsed = match args.detector.as_str() {
        "lof" => {
            let k = get("k").context("lof needs --param k=<n>")?.parse()?;
            DetectorConfig::Lof(LofConfig { k })
        }
        "iforest" => {
            let mut cfg = IForestConfig::default();
            if let Some(v) = get("trees") {
                cfg.n_trees = v.parse()?;
            }
            if let Some(v) = get("sub") {
                cfg.subsample = v.parse()?;
            }
            DetectorConfig::Iforest(cfg)
        }
        "deepae" => {
            let path = args.hp.as_ref().context("deepae needs --hp <toml>")?;
            DetectorConfig::Deepae(io::load_toml::<DeepHP>(path)?)
        }
        "fairod" => {
            let path = args.hp.as_ref().context("fairod needs --hp <toml>")?;
            DetectorConfig::Fairod(io::load_toml::<FairHP>(path)?)
        }
        other => bail!("unknown detector {other:?}"),
    };
    Ok(parsed)
}

fn bias_spec(bias: &str, beta: f64, mode: SamplingMode, seed: u64, total: usize) -> Result<BiasSpec> {
    let variant = match bias {
        "size_disparity" => BiasVariant::SizeDisparity { beta },
        "under_representation" => BiasVariant::UnderRepresentation { beta },
        "variance_shift" => BiasVariant::VarianceShift { beta },
        "mean_shift" => BiasVariant::MeanShift { beta },
        "obfuscation" => BiasVariant::Obfuscation { beta },
        "unequal_base_rates" => {
            let outliers_b = beta.round() as usize;
            if outliers_b > total {
                bail!("target group-b outliers {outliers_b} exceed the total {total}");
            }
            BiasVariant::UnequalBaseRates { outliers_a: total - outliers_b, outliers_b }
        }
        other => bail!("unknown bias variant {other:?}"),
    };
    Ok(BiasSpec { variant, sampling_mode: mode, seed })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Splits one CSV line, honoring double-quoted fields.
fn split_csv_line(line: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut current = String::new();
    let mut quoted = false;
    for c in line.chars() {
        match c {
            '"' => quoted = !quoted,
            ',' if !quoted => fields.push(std::mem::take(&mut current)),
            _ => current.push(c),
        }
    }
    fields.push(current);
    fields
}

fn write_report_csv(
    path: &Path,
    scenario: &str,
    beta: f64,
    detector: &str,
    seed: u64,
    report: &metrics::MetricReport,
) -> Result<()> {
    let mut out = String::from("scenario,beta,detector,seed,");
    out.push_str(&METRIC_NAMES.join(","));
    out.push('\n');
    let values: Vec<String> =
        sweep::metric_values(report).iter().map(|v| opt(*v)).collect();
    out.push_str(&format!("{scenario},{beta},{detector},{seed},{}\n", values.join(",")));
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_leaderboard(path: &Path, rows: &[tuning::LeaderboardRow], best: usize) -> Result<()> {
    let mut out =
        String::from("index,config,auroc,fr_ratio,tpr_ratio,distance,penalized,selected,error\n");
    for r in rows {
        out.push_str(&format!(
            "{},\"{}\",{},{},{},{},{},{},{}\n",
            r.index,
            r.config,
            opt(r.auroc),
            opt(r.fr_ratio),
            opt(r.tpr_ratio),
            opt(r.distance),
            r.penalized,
            r.index == best,
            r.error.clone().unwrap_or_default()
        ));
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_verdicts(path: &Path, check: &str, p: &TheoryPrediction) -> Result<()> {
    let mut out = String::from("check,premises_hold,verdict,values,notes,premise_failures\n");
    let values: Vec<String> = p.values.iter().map(|(k, v)| format!("{k}={v}")).collect();
    out.push_str(&format!(
        "{check},{},{},\"{}\",\"{}\",\"{}\"\n",
        p.premises_hold,
        p.verdict.map(|v| v.to_string()).unwrap_or_default(),
        values.join("; "),
        p.notes.join(" | "),
        p.premise_failures.join(" | ")
    ));
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, out)?;
    Ok(())
}

fn run() -> Result<ExitCode> {
    env_logger::init();
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate { config, out } => {
            let cfg: SimConfig = io::load_toml(&config)?;
            let ds = simulate(&cfg)?;
            io::write_dataset(&ds, &out)?;
            println!(
                "wrote {} rows x {} columns to {}",
                ds.n_rows(),
                ds.n_cols(),
                out.display()
            );
        }
        Command::Inject { input, bias, beta, mode, seed, out } => {
            let ds = io::read_dataset(&input)?;
            let spec = bias_spec(&bias, beta, parse_mode(&mode)?, seed, ds.outlier_count())?;
            let biased = odaudit_core::bias::apply(&ds, &spec)?;
            io::write_dataset(&biased, &out)?;
            println!("scenario: {}", biased.meta.scenario);
        }
        Command::FitScore(args) => {
            let ds = io::read_dataset(&args.input)?;
            let cfg = detector_config(&args)?;
            let scores = tuning::score_with(&ds, &cfg, args.seed)?;
            io::write_scores(&scores, &args.out)?;
            println!("scored {} rows with {}", ds.n_rows(), cfg.describe());
        }
        Command::Evaluate { scores, data, grouping, out, scenario, beta, detector, seed } => {
            let ds = io::read_dataset(&data)?;
            let raw = io::read_scores(&scores)?;
            let scores = ScoreVector::new(raw, ds.n_rows())?;
            let flags = metrics::flag_top_k(&scores, ds.outlier_count());
            let report = metrics::evaluate(&scores, &flags, &ds, parse_grouping(&grouping)?)?;
            write_report_csv(&out, &scenario, beta, &detector, seed, &report)?;
            println!("auroc {:.4}, f1 {:.4}", report.auroc, report.f1);
        }
        Command::Tune { input, detector, seed, hp, out } => {
            let ds = io::read_dataset(&input)?;
            match detector.as_str() {
                "lof" => {
                    let outcome = tuning::tune_standard(&ds, &tuning::lof_grid(), seed)?;
                    write_leaderboard(&out, &outcome.leaderboard, outcome.best_index)?;
                    println!("selected {}", outcome.best.describe());
                }
                "deepae" => {
                    let outcome = tuning::tune_standard(&ds, &tuning::deepae_grid(), seed)?;
                    write_leaderboard(&out, &outcome.leaderboard, outcome.best_index)?;
                    println!("selected {}", outcome.best.describe());
                }
                "fairod" => {
                    let base_path = hp.context("fairod tuning needs --hp <base DeepHP toml>")?;
                    let base: DeepHP = io::load_toml(&base_path)?;
                    let outcome = tuning::tune_fairod(&ds, &tuning::fairod_grid(base), seed)?;
                    write_leaderboard(&out, &outcome.leaderboard, outcome.best_index)?;
                    println!(
                        "selected {}",
                        DetectorConfig::Fairod(outcome.best).describe()
                    );
                }
                "iforest" => {
                    bail!("iforest uses its fixed defaults (100 trees, 256 subsample); nothing to tune")
                }
                other => bail!("unknown detector {other:?}"),
            }
        }
        Command::TheoryCheck { prop, geom, out } => {
            let geometry: IdealGeometry = io::load_toml(&geom)?;
            let prediction = match prop.as_str() {
                "1" => theory::check_prop1(&geometry)?,
                "2" => theory::check_prop2(&geometry)?,
                "3" => theory::check_prop3(&geometry)?,
                "4" => theory::check_prop4(&geometry)?,
                "5" => theory::check_prop5(&geometry)?,
                "lemma1" => theory::check_lemma1(&geometry)?,
                "lemma2" => theory::check_lemma2(&geometry)?,
                other => bail!("unknown check {other:?} (expected 1..5, lemma1, lemma2)"),
            };
            write_verdicts(&out, &prop, &prediction)?;
            match (&prediction.premises_hold, &prediction.verdict) {
                (false, _) => println!("premises violated: {}", prediction.premise_failures.join("; ")),
                (true, Some(v)) => println!("verdict: {v}"),
                (true, None) => println!("values: {:?}", prediction.values),
            }
        }
        Command::Sweep { plan, jobs, out } => {
            if let Some(jobs) = jobs {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(jobs)
                    .build_global()
                    .context("configuring the worker pool")?;
            }
            let plan: SweepPlan = io::load_toml(&plan)?;
            let outcome = sweep::run_sweep(&plan)?;
            sweep::write_outputs(&plan, &outcome, &out)?;
            let failed = outcome.records.iter().filter(|r| r.error.is_some()).count();
            println!(
                "{} cells ({} failed); outputs in {}",
                outcome.records.len(),
                failed,
                out.display()
            );
            if failed > 0 {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Replay { record, plan, runs } => {
            let plan: SweepPlan = io::load_toml(&plan)?;
            let text = fs::read_to_string(&runs)?;
            let line = text
                .lines()
                .skip(1)
                .find(|l| l.split(',').next() == Some(record.to_string().as_str()))
                .with_context(|| format!("run_id {record} not found in {}", runs.display()))?;
            let fields = split_csv_line(line);
            let beta: f64 = fields[3].parse()?;
            let detector = fields[4].as_str();
            let seed: u64 = fields[6].parse()?;
            let det = plan
                .detectors
                .iter()
                .find(|d| d.config.kind() == detector)
                .with_context(|| format!("plan has no detector {detector:?}"))?;
            let (selected, report) = sweep::run_cell(&plan, det, beta, seed)?;
            let fresh: Vec<String> =
                sweep::metric_values(&report).iter().map(|v| opt(*v)).collect();
            let recorded: Vec<String> =
                fields[8..8 + METRIC_NAMES.len()].iter().map(|s| s.to_string()).collect();
            if fresh == recorded {
                println!("replay ok: run {record} ({selected}) reproduced exactly");
            } else {
                for (name, (a, b)) in METRIC_NAMES.iter().zip(recorded.iter().zip(&fresh)) {
                    if a != b {
                        eprintln!("mismatch {name}: recorded {a:?}, replayed {b:?}");
                    }
                }
                bail!("replay mismatch for run {record}");
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
