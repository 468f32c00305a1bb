//! The twelve stages of the full pipeline. Each reads the files written by
//! its predecessors in the run directory.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::config::{ModelKind, PipelineConfig};
use super::{to_json, FailureKind, PipelineError, Stage};
use crate::frame::SensorFrame;
use crate::ingest::{
    default_missing_tokens, encode_categorical, load_event_log, load_sensor_frame, write_event_log,
    write_sensor_frame, EventLog,
};
use crate::labeler::{
    extract_operational_intervals, generate_labels, partition_by_state, LabelSequence, OperationalInterval,
    Partitions,
};
use crate::models::search::{DrawResult, GridResult};
use crate::models::{
    cross_validate, evaluate, random_search, train_forest, train_mlp, EvalReport, ForestParams, TrainedModel,
};
use crate::outlier::{apply_cutoffs, file_stem, OutlierReport};
use crate::prepare::{balance_and_split, BalanceMode, DataSplits, Dataset};
use crate::reduce::{correlation_dedup, low_variability_filter, pearson_matrix, ReductionReport};
use crate::seed::derive_seed;
use crate::select::{apply_exclusions, drop_incomplete_rows, missing_ratio_filter};

pub(crate) const INGESTED: &str = "ingested.csv";
pub(crate) const EVENTS: &str = "events.csv";

pub(crate) struct Ctx<'a> {
    pub cfg: &'a PipelineConfig,
    pub dir: &'a Path,
    pub stage: Stage,
    /// Files written by the stage, relative to `dir`, in write order.
    pub outputs: Vec<String>,
}

impl<'a> Ctx<'a> {
    pub fn new(cfg: &'a PipelineConfig, dir: &'a Path, stage: Stage) -> Self {
        Self {
            cfg,
            dir,
            stage,
            outputs: Vec::new(),
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn fail(&self, kind: FailureKind, e: impl Into<Box<dyn std::error::Error + Send + Sync>>) -> PipelineError {
        PipelineError::Stage {
            stage: self.stage.name(),
            kind,
            source: e.into(),
        }
    }

    pub fn data<E: Into<Box<dyn std::error::Error + Send + Sync>>>(&self) -> impl Fn(E) -> PipelineError + '_ {
        move |e| self.fail(FailureKind::Data, e)
    }

    pub fn internal<E: Into<Box<dyn std::error::Error + Send + Sync>>>(
        &self,
    ) -> impl Fn(E) -> PipelineError + '_ {
        move |e| self.fail(FailureKind::Internal, e)
    }

    /// Registers an output written by other means.
    pub fn record(&mut self, name: &str) {
        if !self.outputs.iter().any(|o| o == name) {
            self.outputs.push(name.to_string());
        }
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<(), PipelineError> {
        std::fs::write(self.path(name), to_json(v)).map_err(self.internal())?;
        self.record(name);
        Ok(())
    }

    pub fn read_json<T: DeserializeOwned>(&self, name: &str) -> Result<T, PipelineError> {
        let p = self.path(name);
        let s = std::fs::read_to_string(&p)
            .map_err(|e| self.fail(FailureKind::Data, format!("{}: {e}", p.display())))?;
        serde_json::from_str(&s).map_err(|e| self.fail(FailureKind::Data, format!("{}: {e}", p.display())))
    }

    /// Loads a frame written by an earlier stage and restores categorical marks.
    pub fn read_frame(&self, name: &str) -> Result<SensorFrame, PipelineError> {
        let mut f = load_sensor_frame(&self.path(name), &self.cfg.time_column, &default_missing_tokens())
            .map_err(self.data())?;
        for c in self.cfg.categorical_features() {
            if f.column_index(&c).is_some() {
                f.mark_categorical(c);
            }
        }
        Ok(f)
    }

    pub fn write_frame(&mut self, name: &str, f: &SensorFrame) -> Result<(), PipelineError> {
        write_sensor_frame(f, &self.path(name), &self.cfg.time_column).map_err(self.internal())?;
        self.record(name);
        Ok(())
    }

    pub fn read_dataset(&self, name: &str) -> Result<(Vec<String>, Dataset), PipelineError> {
        Dataset::read_csv(&self.path(name)).map_err(self.data())
    }

    pub fn write_dataset(&mut self, name: &str, d: &Dataset, names: &[String]) -> Result<(), PipelineError> {
        d.write_csv(&self.path(name), names).map_err(self.internal())?;
        self.record(name);
        Ok(())
    }

    pub fn seed(&self, label: &str) -> u64 {
        derive_seed(self.cfg.seed, label)
    }

    /// The ingested frame restricted to the configured time window.
    pub fn timeline(&self) -> Result<SensorFrame, PipelineError> {
        let f = self.read_frame(INGESTED)?;
        apply_exclusions(&f, &BTreeSet::new(), self.cfg.keep_window).map_err(self.data())
    }

    pub fn events(&self) -> Result<EventLog, PipelineError> {
        load_event_log(&self.path(EVENTS)).map_err(self.data())
    }
}

pub(crate) fn run(ctx: &mut Ctx) -> Result<(), PipelineError> {
    match ctx.stage {
        Stage::Ingest => ingest(ctx),
        Stage::Select => select(ctx),
        Stage::Outlier => outlier(ctx),
        Stage::LowVariability => low_variability(ctx),
        Stage::Correlation => correlation(ctx),
        Stage::Reload => reload(ctx),
        Stage::Label => label(ctx),
        Stage::Partition => partition(ctx),
        Stage::Split => split(ctx),
        Stage::Scale => scale(ctx),
        Stage::Train => train(ctx),
        Stage::Evaluate => evaluate_stage(ctx),
        Stage::Baseline => super::baseline::run(ctx),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows: usize,
    pub features: Vec<String>,
    pub categorical: Vec<String>,
    pub missing_ratio: Vec<(String, f64)>,
    pub first_timestamp: Option<i64>,
    pub last_timestamp: Option<i64>,
    pub events: usize,
    pub failures: usize,
}

fn ingest(ctx: &mut Ctx) -> Result<(), PipelineError> {
    let cfg = ctx.cfg;
    let mut frame =
        load_sensor_frame(&cfg.paths.sensors, &cfg.time_column, &cfg.missing_token_set()).map_err(ctx.data())?;
    for enc in &cfg.categorical {
        frame = encode_categorical(&frame, enc).map_err(ctx.data())?;
    }
    let log = load_event_log(&cfg.paths.events).map_err(ctx.data())?;
    ctx.write_frame(INGESTED, &frame)?;
    write_event_log(&log, &ctx.path(EVENTS)).map_err(ctx.internal())?;
    ctx.record(EVENTS);
    let report = IngestReport {
        rows: frame.n_rows(),
        features: frame.feature_names().to_vec(),
        categorical: frame.categorical_columns().iter().cloned().collect(),
        missing_ratio: frame
            .feature_names()
            .iter()
            .cloned()
            .zip(frame.column_missing_ratios())
            .collect(),
        first_timestamp: frame.timestamps().first().copied(),
        last_timestamp: frame.timestamps().last().copied(),
        events: log.len(),
        failures: log.failures().count(),
    };
    ctx.write_json("ingest_report.json", &report)
}

fn select(ctx: &mut Ctx) -> Result<(), PipelineError> {
    let cfg = ctx.cfg;
    let frame = ctx.read_frame(INGESTED)?;
    let exclude: BTreeSet<String> = cfg.exclusions.iter().cloned().collect();
    let trimmed = apply_exclusions(&frame, &exclude, cfg.keep_window).map_err(ctx.data())?;
    let (selected, mut report) =
        missing_ratio_filter(&trimmed, cfg.nan.column, cfg.nan.row).map_err(ctx.data())?;
    report.excluded_by_expert = exclude.into_iter().collect();
    ctx.write_frame("selected.csv", &selected)?;
    ctx.write_json("selection_report.json", &report)
}

fn outlier(ctx: &mut Ctx) -> Result<(), PipelineError> {
    let frame = ctx.read_frame("selected.csv")?;
    let spec = ctx.cfg.cutoffs.restricted_to(&frame);
    let (cleaned, report) = apply_cutoffs(&frame, &spec).map_err(ctx.data())?;
    ctx.write_frame("cleaned.csv", &cleaned)?;
    ctx.write_json("outlier_report.json", &report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowVariabilityReport {
    pub threshold: f64,
    pub dropped: Vec<(String, f64)>,
    /// Zero-mean features whose cv is undefined; they are kept.
    pub undefined: Vec<String>,
    pub kept: Vec<String>,
}

fn low_variability(ctx: &mut Ctx) -> Result<(), PipelineError> {
    let frame = ctx.read_frame("cleaned.csv")?;
    let (kept, lv) = low_variability_filter(&frame, ctx.cfg.cv_threshold).map_err(ctx.data())?;
    let report = LowVariabilityReport {
        threshold: ctx.cfg.cv_threshold,
        dropped: lv.dropped,
        undefined: lv.undefined,
        kept: kept.feature_names().to_vec(),
    };
    ctx.write_json("low_variability.json", &report)
}

fn correlation(ctx: &mut Ctx) -> Result<(), PipelineError> {
    let frame = ctx.read_frame("cleaned.csv")?;
    let lv: LowVariabilityReport = ctx.read_json("low_variability.json")?;
    let numeric: Vec<String> = lv
        .kept
        .iter()
        .filter(|n| !frame.is_categorical(n))
        .cloned()
        .collect();
    let matrix = pearson_matrix(&frame.select_named(&numeric)).map_err(ctx.data())?;
    let dedup = correlation_dedup(&matrix, ctx.cfg.correlation_threshold, ctx.seed("reduce/correlation"))
        .map_err(ctx.data())?;
    let dropped: BTreeSet<&String> = dedup.dropped_for_correlation().collect();
    let report = ReductionReport {
        dropped_low_cv: lv.dropped.clone(),
        undefined_cv: lv.undefined.clone(),
        final_features: lv.kept.iter().filter(|n| !dropped.contains(n)).cloned().collect(),
        correlation_groups: dedup.correlation_groups,
    };

    let path = ctx.path("correlation_matrix.csv");
    let mut w = csv::Writer::from_path(&path).map_err(ctx.internal())?;
    let mut header = vec!["feature".to_string()];
    header.extend(matrix.feature_names.iter().cloned());
    w.write_record(&header).map_err(ctx.internal())?;
    for (name, row) in matrix.feature_names.iter().zip(&matrix.r) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(f64::to_string));
        w.write_record(&rec).map_err(ctx.internal())?;
    }
    w.flush().map_err(ctx.internal())?;
    ctx.record("correlation_matrix.csv");
    ctx.write_json("reduction_report.json", &report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReloadReport {
    pub rows: usize,
    pub features: Vec<String>,
    /// Rows present again that the selection or cutoff passes had removed.
    pub restored_rows: usize,
}

fn reload(ctx: &mut Ctx) -> Result<(), PipelineError> {
    let report: ReductionReport = ctx.read_json("reduction_report.json")?;
    let cleaned: BTreeSet<i64> = ctx.read_frame("cleaned.csv")?.timestamps().iter().copied().collect();
    let raw = ctx.timeline()?.select_named(&report.final_features);
    let restored = raw.timestamps().iter().filter(|t| !cleaned.contains(t)).count();
    ctx.write_frame("reloaded.csv", &raw)?;
    ctx.write_json(
        "reload_report.json",
        &ReloadReport {
            rows: raw.n_rows(),
            features: report.final_features,
            restored_rows: restored,
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelReport {
    pub counts: BTreeMap<String, usize>,
    pub intervals: Vec<OperationalInterval>,
}

fn label(ctx: &mut Ctx) -> Result<(), PipelineError> {
    // Labels come from the time-trimmed ingest so the operation signal is
    // available even when feature selection dropped it.
    let timeline = ctx.timeline()?;
    let log = ctx.events()?;
    let op = extract_operational_intervals(&log, &timeline, &ctx.cfg.labeling).map_err(ctx.data())?;
    let labels = generate_labels(&op, &ctx.cfg.labeling, &timeline).map_err(ctx.data())?;
    labels.write_csv(&ctx.path("labels.csv")).map_err(ctx.internal())?;
    ctx.record("labels.csv");
    ctx.write_json(
        "label_report.json",
        &LabelReport {
            counts: labels.counts(),
            intervals: op.intervals,
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub healthy_rows_before_cutoffs: usize,
    pub healthy_rows: usize,
    /// Failure mode to (file, rows).
    pub degraded: BTreeMap<String, (String, usize)>,
    pub transition_rows: usize,
    pub excluded_rows: usize,
    pub healthy_cutoffs: OutlierReport,
}

fn partition(ctx: &mut Ctx) -> Result<(), PipelineError> {
    let frame = ctx.read_frame("reloaded.csv")?;
    let labels = LabelSequence::read_csv(&ctx.path("labels.csv")).map_err(ctx.data())?;
    if labels.timestamps != frame.timestamps() {
        return Err(ctx.data()("labels.csv does not cover the reloaded rows".to_string()));
    }
    let parts = partition_by_state(&frame, &labels).map_err(ctx.data())?;
    let before = parts.healthy.n_rows();
    let spec = ctx.cfg.cutoffs.restricted_to(&parts.healthy);
    let (healthy, cut) = apply_cutoffs(&parts.healthy, &spec).map_err(ctx.data())?;
    let parts = Partitions { healthy, ..parts };
    let written = parts.write(ctx.dir, &ctx.cfg.time_column).map_err(ctx.internal())?;
    for p in &written {
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        ctx.record(&name);
    }
    let report = PartitionReport {
        healthy_rows_before_cutoffs: before,
        healthy_rows: parts.healthy.n_rows(),
        degraded: parts
            .degraded
            .iter()
            .map(|(m, f)| (m.clone(), (format!("degraded_{}.csv", file_stem(m)), f.n_rows())))
            .collect(),
        transition_rows: parts.transition.n_rows(),
        excluded_rows: parts.excluded_rows,
        healthy_cutoffs: cut,
    };
    ctx.write_json("partition_report.json", &report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetSize {
    pub rows: usize,
    pub degraded: usize,
}

impl SetSize {
    pub(crate) fn of(d: &Dataset) -> Self {
        Self {
            rows: d.len(),
            degraded: d.positives(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub balance: BalanceMode,
    pub seed: u64,
    pub incomplete_healthy_dropped: usize,
    pub incomplete_degraded_dropped: usize,
    pub train: SetSize,
    pub validation: SetSize,
    pub test: SetSize,
}

/// All degraded partitions of a run merged in time order.
fn degraded_union(ctx: &Ctx, report: &PartitionReport, healthy: SensorFrame) -> Result<(SensorFrame, SensorFrame), PipelineError> {
    let mut degraded = BTreeMap::new();
    for (mode, (file, _)) in &report.degraded {
        degraded.insert(mode.clone(), ctx.read_frame(file)?);
    }
    let empty = healthy.select_rows(&[]);
    let parts = Partitions {
        healthy,
        degraded,
        transition: empty.clone(),
        excluded_rows: 0,
    };
    let union = parts.degraded_union().unwrap_or(empty);
    Ok((parts.healthy, union))
}

fn split(ctx: &mut Ctx) -> Result<(), PipelineError> {
    let report: PartitionReport = ctx.read_json("partition_report.json")?;
    let healthy = ctx.read_frame("healthy.csv")?;
    let (healthy, degraded) = degraded_union(ctx, &report, healthy)?;
    let (healthy, h_drop) = drop_incomplete_rows(&healthy);
    let (degraded, d_drop) = drop_incomplete_rows(&degraded);
    let mut spec = ctx.cfg.split;
    spec.seed = ctx.seed("split");
    let splits = balance_and_split(&healthy, &degraded, &spec).map_err(ctx.data())?;
    let names = splits.feature_names.clone();
    ctx.write_dataset("train.csv", &splits.train, &names)?;
    ctx.write_dataset("validation.csv", &splits.validation, &names)?;
    ctx.write_dataset("test.csv", &splits.test, &names)?;
    ctx.write_json(
        "split_report.json",
        &SplitReport {
            balance: spec.balance,
            seed: spec.seed,
            incomplete_healthy_dropped: h_drop,
            incomplete_degraded_dropped: d_drop,
            train: SetSize::of(&splits.train),
            validation: SetSize::of(&splits.validation),
            test: SetSize::of(&splits.test),
        },
    )
}

fn read_splits(ctx: &Ctx, suffix: &str) -> Result<DataSplits, PipelineError> {
    let (names, train) = ctx.read_dataset(&format!("train{suffix}.csv"))?;
    let (vn, validation) = ctx.read_dataset(&format!("validation{suffix}.csv"))?;
    let (tn, test) = ctx.read_dataset(&format!("test{suffix}.csv"))?;
    if vn != names || tn != names {
        return Err(ctx.data()("split files disagree on feature columns".to_string()));
    }
    Ok(DataSplits {
        feature_names: names,
        train,
        validation,
        test,
    })
}

fn scale(ctx: &mut Ctx) -> Result<(), PipelineError> {
    let splits = read_splits(ctx, "")?;
    let (scaled, params) = splits
        .scaled(ctx.cfg.scaler, &ctx.cfg.categorical_features())
        .map_err(ctx.data())?;
    ctx.write_json("scaler.json", &params)?;
    let names = scaled.feature_names.clone();
    ctx.write_dataset("train_scaled.csv", &scaled.train, &names)?;
    ctx.write_dataset("validation_scaled.csv", &scaled.validation, &names)?;
    ctx.write_dataset("test_scaled.csv", &scaled.test, &names)
}

pub(crate) fn model_file(kind: ModelKind) -> String {
    format!("model_{}.json", kind.as_str())
}

/// Forest params with the configured seed replaced by the derived one.
pub(crate) fn seeded_forest(p: &ForestParams, seed: u64) -> ForestParams {
    ForestParams { seed, ..p.clone() }
}

fn train(ctx: &mut Ctx) -> Result<(), PipelineError> {
    let splits = read_splits(ctx, "_scaled")?;
    let models = &ctx.cfg.models;
    for &kind in &models.kinds {
        let model = match kind {
            ModelKind::Forest => {
                let seed = ctx.seed("train/forest");
                let params = if models.forest_grid.is_empty() {
                    seeded_forest(&models.forest, seed)
                } else {
                    let grid: Vec<ForestParams> = models.forest_grid.iter().map(|p| seeded_forest(p, seed)).collect();
                    let (best, results): (ForestParams, Vec<GridResult>) = cross_validate(
                        &splits.train.features,
                        &splits.train.labels,
                        &grid,
                        models.cv_folds,
                        ctx.seed("train/forest-cv"),
                    )
                    .map_err(ctx.data())?;
                    ctx.write_json("search_forest.json", &results)?;
                    best
                };
                TrainedModel::Forest(
                    train_forest(&splits.train.features, &splits.train.labels, &params).map_err(ctx.data())?,
                )
            }
            ModelKind::Mlp => {
                let params = match &models.mlp_space {
                    Some(space) => {
                        let (best, results): (_, Vec<DrawResult>) = random_search(
                            &splits.train,
                            &splits.validation,
                            space,
                            models.n_draws,
                            ctx.seed("train/mlp-search"),
                        )
                        .map_err(ctx.data())?;
                        ctx.write_json("search_mlp.json", &results)?;
                        best
                    }
                    None => crate::models::MlpParams {
                        seed: ctx.seed("train/mlp"),
                        ..models.mlp.clone()
                    },
                };
                let m = train_mlp(&splits.train, &splits.validation, &params).map_err(ctx.data())?;
                crate::models::mlp::write_curves(&ctx.path("curves_mlp.csv"), &m.curves).map_err(ctx.internal())?;
                ctx.record("curves_mlp.csv");
                TrainedModel::Mlp(m)
            }
        };
        let name = model_file(kind);
        model.save(&ctx.path(&name)).map_err(ctx.internal())?;
        ctx.record(&name);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub test: SetSize,
    pub models: BTreeMap<String, EvalReport>,
}

fn evaluate_stage(ctx: &mut Ctx) -> Result<(), PipelineError> {
    let (_, test) = ctx.read_dataset("test_scaled.csv")?;
    let mut models = BTreeMap::new();
    let mut predictions = Vec::new();
    for &kind in &ctx.cfg.models.kinds {
        let model = TrainedModel::load(&ctx.path(&model_file(kind))).map_err(ctx.data())?;
        let pred = model.predict(&test.features).map_err(ctx.data())?;
        let report = evaluate(&pred, &test.labels).map_err(ctx.data())?;
        ctx.write_json(&format!("eval_{}.json", kind.as_str()), &report)?;
        models.insert(kind.as_str().to_string(), report);
        predictions.push((kind.as_str().to_string(), pred));
    }
    write_predictions(ctx, "predictions.csv", &test, &predictions)?;
    ctx.write_json(
        "eval_report.json",
        &EvaluationReport {
            test: SetSize::of(&test),
            models,
        },
    )
}

pub(crate) fn write_predictions(
    ctx: &mut Ctx,
    name: &str,
    test: &Dataset,
    predictions: &[(String, Vec<u8>)],
) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_path(ctx.path(name)).map_err(ctx.internal())?;
    let mut header = vec!["timestamp".to_string(), "label".to_string()];
    header.extend(predictions.iter().map(|(k, _)| k.clone()));
    w.write_record(&header).map_err(ctx.internal())?;
    for i in 0..test.len() {
        let mut rec = vec![test.timestamps[i].to_string(), test.labels[i].to_string()];
        rec.extend(predictions.iter().map(|(_, p)| p[i].to_string()));
        w.write_record(&rec).map_err(ctx.internal())?;
    }
    w.flush().map_err(ctx.internal())?;
    ctx.record(name);
    Ok(())
}
