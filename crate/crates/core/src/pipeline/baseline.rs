//! Comparison baselines with minimal preprocessing: raw time-trimmed data,
//! constant columns dropped, missing cells set to zero, no transition class,
//! standard scaling, then PCA or autoencoder features.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::{ModelKind, Preset};
use super::stages::{seeded_forest, write_predictions, Ctx, SetSize};
use super::PipelineError;
use crate::baselines::{
    choose_error_threshold, fit_pca, project, select_components, train_autoencoder, write_reconstruction_errors,
    AeEpoch,
};
use crate::frame::{is_missing, Matrix, SensorFrame};
use crate::labeler::{label_frame, partition_by_state, LabelingConfig, WindowOverride};
use crate::models::{evaluate, train_forest, train_mlp, EvalReport, MlpParams};
use crate::prepare::{balance_and_split, fit_scaler, transform, BalanceMode, DataSplits, Dataset, ScalerKind};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub report: EvalReport,
    /// Reconstruction-error threshold of the autoencoder detector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub preset: Preset,
    pub balance: BalanceMode,
    pub features: Vec<String>,
    pub dropped_constant: Vec<String>,
    pub n_components: usize,
    pub explained_at_k: f64,
    pub train: SetSize,
    pub test: SetSize,
    /// Keyed by `<features>+<model>`, e.g. `pca+forest`.
    pub results: BTreeMap<String, BaselineResult>,
}

/// Same windows as configured but without a transition class.
fn no_transition(cfg: &LabelingConfig) -> LabelingConfig {
    let mut c = cfg.clone();
    c.transition_window = 0;
    for o in c.per_mode.values_mut() {
        *o = WindowOverride {
            transition_window: Some(0),
            ..*o
        };
    }
    c
}

fn zero_fill(f: &SensorFrame) -> SensorFrame {
    let values = f.values().iter().map(|&v| if is_missing(v) { 0.0 } else { v }).collect();
    SensorFrame::new(f.timestamps().to_vec(), f.feature_names().to_vec(), values).expect("same shape")
}

fn is_constant(cells: &[f64]) -> bool {
    stats::std_pop(cells).is_none_or(|s| s == 0.0)
}

fn keep_columns(s: &DataSplits, cols: &[usize]) -> DataSplits {
    let pick = |d: &Dataset| {
        let rows: Vec<Vec<f64>> = d.features.iter_rows().map(|r| cols.iter().map(|&j| r[j]).collect()).collect();
        let m = if rows.is_empty() {
            Matrix::empty(cols.len())
        } else {
            Matrix::from_rows(&rows)
        };
        d.with_features(m)
    };
    DataSplits {
        feature_names: cols.iter().map(|&j| s.feature_names[j].clone()).collect(),
        train: pick(&s.train),
        validation: pick(&s.validation),
        test: pick(&s.test),
    }
}

fn classify(
    ctx: &Ctx,
    tag: &str,
    train: &Dataset,
    validation: &Dataset,
    test: &Dataset,
    results: &mut BTreeMap<String, BaselineResult>,
    predictions: &mut Vec<(String, Vec<u8>)>,
) -> Result<(), PipelineError> {
    let models = &ctx.cfg.models;
    for &kind in &models.kinds {
        let pred = match kind {
            ModelKind::Forest => {
                let params = seeded_forest(&models.forest, ctx.seed("train/forest"));
                train_forest(&train.features, &train.labels, &params)
                    .and_then(|m| m.predict(&test.features))
                    .map_err(ctx.data())?
            }
            ModelKind::Mlp => {
                let params = MlpParams {
                    seed: ctx.seed("train/mlp"),
                    ..models.mlp.clone()
                };
                train_mlp(train, validation, &params)
                    .and_then(|m| m.predict(&test.features))
                    .map_err(ctx.data())?
            }
        };
        let key = format!("{tag}+{}", kind.as_str());
        results.insert(
            key.clone(),
            BaselineResult {
                report: evaluate(&pred, &test.labels).map_err(ctx.data())?,
                threshold: None,
            },
        );
        predictions.push((key, pred));
    }
    Ok(())
}

pub(crate) fn run(ctx: &mut Ctx) -> Result<(), PipelineError> {
    let cfg = ctx.cfg;
    let preset = cfg.baseline.preset;
    if preset == Preset::None {
        return Err(PipelineError::Config("the baseline stage needs a preset".into()));
    }
    let timeline = ctx.timeline()?;
    let log = ctx.events()?;
    let labels = label_frame(&log, &timeline, &no_transition(&cfg.labeling)).map_err(ctx.data())?;

    let mut keep = Vec::new();
    let mut dropped_constant = Vec::new();
    for j in 0..timeline.n_cols() {
        if is_constant(&timeline.present(j)) {
            dropped_constant.push(timeline.feature_names()[j].clone());
        } else {
            keep.push(j);
        }
    }
    let frame = zero_fill(&timeline.select_columns(&keep));
    let parts = partition_by_state(&frame, &labels).map_err(ctx.data())?;
    let degraded = parts
        .degraded_union()
        .ok_or_else(|| ctx.data()("no degraded rows".to_string()))?;
    let mut spec = cfg.split;
    spec.seed = ctx.seed("split");
    spec.balance = cfg.preset_balance();
    let splits = balance_and_split(&parts.healthy, &degraded, &spec).map_err(ctx.data())?;

    // Columns can still be constant on the (smaller) training set.
    let varying: Vec<usize> = (0..splits.feature_names.len())
        .filter(|&j| !is_constant(&splits.train.features.column(j)))
        .collect();
    dropped_constant.extend(
        (0..splits.feature_names.len())
            .filter(|j| !varying.contains(j))
            .map(|j| splits.feature_names[j].clone()),
    );
    let splits = keep_columns(&splits, &varying);
    let names = splits.feature_names.clone();
    let scaler = fit_scaler(&splits.train.features, &names, ScalerKind::Standard, &Default::default())
        .map_err(ctx.data())?;
    let scale = |d: &Dataset| -> Result<Dataset, PipelineError> {
        Ok(d.with_features(transform(&d.features, &names, &scaler).map_err(ctx.data())?))
    };
    let (train, validation, test) = (scale(&splits.train)?, scale(&splits.validation)?, scale(&splits.test)?);

    let pca = fit_pca(&train.features).map_err(ctx.data())?;
    let k = select_components(&pca, cfg.baseline.pca_threshold).map_err(ctx.data())?;
    pca.write_explained_variance(&ctx.path("explained_variance.csv"))
        .map_err(ctx.internal())?;
    ctx.record("explained_variance.csv");

    let mut results = BTreeMap::new();
    let mut predictions: Vec<(String, Vec<u8>)> = Vec::new();
    let wants_ae = matches!(preset, Preset::Scenario1 | Preset::Scenario3 | Preset::Scenario4);
    let wants_pca = matches!(preset, Preset::Scenario2 | Preset::Scenario4);

    if wants_pca {
        let p = |d: &Dataset| -> Result<Dataset, PipelineError> {
            Ok(d.with_features(project(&pca, k, &d.features).map_err(ctx.data())?))
        };
        classify(ctx, "pca", &p(&train)?, &p(&validation)?, &p(&test)?, &mut results, &mut predictions)?;
    }
    if wants_ae {
        // Unsupervised: labels only pick the error threshold.
        let params = MlpParams {
            seed: ctx.seed("baseline/ae"),
            ..cfg.baseline.autoencoder.clone()
        };
        let mut ae = train_autoencoder(&train.features, k, &params, cfg.baseline.latent_activation)
            .map_err(ctx.data())?;
        write_ae_curves(ctx, &ae.curves)?;
        if preset == Preset::Scenario1 {
            let errors = ae.reconstruction_errors(&train.features).map_err(ctx.data())?;
            let choice =
                choose_error_threshold(&errors, &train.labels, cfg.baseline.threshold_metric).map_err(ctx.data())?;
            ae.threshold = choice.threshold;
            let test_errors = ae.reconstruction_errors(&test.features).map_err(ctx.data())?;
            write_reconstruction_errors(
                &ctx.path("reconstruction_errors.csv"),
                &test.timestamps,
                &test_errors,
                &test.labels,
                ae.threshold,
            )
            .map_err(ctx.internal())?;
            ctx.record("reconstruction_errors.csv");
            let pred = ae.predict(&test.features).map_err(ctx.data())?;
            results.insert(
                "autoencoder".to_string(),
                BaselineResult {
                    report: evaluate(&pred, &test.labels).map_err(ctx.data())?,
                    threshold: Some(ae.threshold),
                },
            );
            predictions.push(("autoencoder".into(), pred));
        } else {
            let e = |d: &Dataset| -> Result<Dataset, PipelineError> {
                Ok(d.with_features(ae.encode(&d.features).map_err(ctx.data())?))
            };
            classify(ctx, "ae", &e(&train)?, &e(&validation)?, &e(&test)?, &mut results, &mut predictions)?;
        }
    }

    write_predictions(ctx, "predictions.csv", &test, &predictions)?;
    let report = BaselineReport {
        preset,
        balance: spec.balance,
        features: names,
        dropped_constant,
        n_components: k,
        explained_at_k: pca.cumulative()[k - 1],
        train: SetSize::of(&train),
        test: SetSize::of(&test),
        results,
    };
    ctx.write_json("baseline_report.json", &report)
}

fn write_ae_curves(ctx: &mut Ctx, curves: &[AeEpoch]) -> Result<(), PipelineError> {
    let mut s = String::from("epoch,loss\n");
    for c in curves {
        s.push_str(&format!("{},{}\n", c.epoch, c.loss));
    }
    std::fs::write(ctx.path("curves_ae.csv"), s).map_err(ctx.internal())?;
    ctx.record("curves_ae.csv");
    Ok(())
}
