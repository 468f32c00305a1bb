//! Versioned JSON configuration of a pipeline run.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::baselines::ThresholdMetric;
use crate::ingest::{default_missing_tokens, CategoricalEncoding};
use crate::labeler::{LabelingConfig, OperationSignal};
use crate::models::network::Activation;
use crate::models::{ForestParams, MlpParams, MlpSpace};
use crate::outlier::CutoffSpec;
use crate::prepare::{BalanceMode, ScalerKind, SplitSpec};
use crate::reduce::{DEFAULT_CORRELATION_THRESHOLD, DEFAULT_CV_THRESHOLD};
use crate::select::TimeWindow;
use crate::synth::{ChannelRole, GroundTruth, SynthConfig, EVENT_FILE, OPERATION_CHANNEL, SENSOR_FILE, TIME_COLUMN};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub sensors: PathBuf,
    pub events: PathBuf,
    pub out_dir: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            sensors: SENSOR_FILE.into(),
            events: EVENT_FILE.into(),
            out_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NanThresholds {
    /// Columns with at least this missing share are dropped.
    pub column: f64,
    /// Rows with more than this missing share are dropped; `null` disables.
    pub row: Option<f64>,
}

impl Default for NanThresholds {
    fn default() -> Self {
        Self {
            column: 0.5,
            row: Some(0.2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Forest,
    Mlp,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Forest => "forest",
            ModelKind::Mlp => "mlp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelsConfig {
    pub kinds: Vec<ModelKind>,
    /// Seeds inside these are replaced by ones derived from the master seed.
    pub forest: ForestParams,
    pub mlp: MlpParams,
    /// Non-empty: pick forest params by k-fold cross-validation.
    pub forest_grid: Vec<ForestParams>,
    pub cv_folds: usize,
    /// Present: pick MLP params by seeded random search.
    pub mlp_space: Option<MlpSpace>,
    pub n_draws: usize,
}

impl Default for ModelsConfig {
    fn default() -> Self {
        Self {
            kinds: vec![ModelKind::Forest, ModelKind::Mlp],
            forest: ForestParams::default(),
            mlp: MlpParams::default(),
            forest_grid: Vec::new(),
            cv_folds: 5,
            mlp_space: None,
            n_draws: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// The full preprocessing pipeline.
    #[default]
    None,
    /// Minimal preprocessing, autoencoder reconstruction-error detector.
    Scenario1,
    /// Minimal preprocessing, PCA features, unbalanced training.
    Scenario2,
    /// Minimal preprocessing, autoencoder latent features, unbalanced training.
    Scenario3,
    /// Scenarios 2 and 3 with balanced training.
    Scenario4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub preset: Preset,
    pub pca_threshold: f64,
    /// Autoencoder training; `hidden_layer_sizes` is ignored, the latent
    /// width follows the PCA component count.
    pub autoencoder: MlpParams,
    pub latent_activation: Activation,
    pub threshold_metric: ThresholdMetric,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            preset: Preset::None,
            pca_threshold: 0.9,
            autoencoder: MlpParams {
                hidden_layer_sizes: Vec::new(),
                learning_rate: 0.01,
                batch_size: 64,
                epochs: 10,
                seed: 0,
            },
            latent_activation: Activation::Relu,
            threshold_metric: ThresholdMetric::Accuracy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    pub paths: Paths,
    pub time_column: String,
    /// `null` means the default token set.
    pub missing_tokens: Option<Vec<String>>,
    pub categorical: Vec<CategoricalEncoding>,
    pub exclusions: Vec<String>,
    pub keep_window: Option<TimeWindow>,
    pub nan: NanThresholds,
    pub cutoffs: CutoffSpec,
    pub cv_threshold: f64,
    pub correlation_threshold: f64,
    pub labeling: LabelingConfig,
    pub split: SplitSpec,
    pub scaler: ScalerKind,
    pub models: ModelsConfig,
    pub baseline: BaselineConfig,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            paths: Paths::default(),
            time_column: TIME_COLUMN.into(),
            missing_tokens: None,
            categorical: Vec::new(),
            exclusions: Vec::new(),
            keep_window: None,
            nan: NanThresholds::default(),
            cutoffs: CutoffSpec::default(),
            cv_threshold: DEFAULT_CV_THRESHOLD,
            correlation_threshold: DEFAULT_CORRELATION_THRESHOLD,
            labeling: LabelingConfig::default(),
            split: SplitSpec::default(),
            scaler: ScalerKind::Standard,
            models: ModelsConfig::default(),
            baseline: BaselineConfig::default(),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    /// Reads a config file; relative input paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        for p in [&mut self.paths.sensors, &mut self.paths.events] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(o) = self.paths.out_dir.as_mut().filter(|o| o.is_relative()) {
            *o = base.join(&*o);
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn missing_token_set(&self) -> BTreeSet<String> {
        match &self.missing_tokens {
            Some(t) => t.iter().cloned().collect(),
            None => default_missing_tokens(),
        }
    }

    /// Names of the columns produced by categorical encoding.
    pub fn categorical_features(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for enc in &self.categorical {
            if enc.one_hot {
                out.extend(enc.mapping.keys().map(|c| format!("{}={}", enc.column, c)));
            } else {
                out.insert(enc.column.clone());
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.version != CONFIG_VERSION {
            return bad(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            ));
        }
        for (name, v) in [("nan.column", self.nan.column), ("nan.row", self.nan.row.unwrap_or(0.0))] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1]"));
            }
        }
        if !(self.cv_threshold > 0.0) {
            return bad("cv_threshold must be positive".into());
        }
        if !(self.correlation_threshold > 0.0 && self.correlation_threshold < 1.0) {
            return bad("correlation_threshold must lie in (0, 1)".into());
        }
        if !(self.baseline.pca_threshold > 0.0 && self.baseline.pca_threshold <= 1.0) {
            return bad("baseline.pca_threshold must lie in (0, 1]".into());
        }
        if self.models.kinds.is_empty() {
            return bad("models.kinds must name at least one model".into());
        }
        self.labeling
            .validate()
            .map_err(|e| PipelineError::Config(format!("labeling: {e}")))?;
        self.cutoffs
            .validate()
            .map_err(|e| PipelineError::Config(format!("cutoffs: {e}")))?;
        for enc in &self.categorical {
            enc.validate()
                .map_err(|e| PipelineError::Config(format!("categorical: {e}")))?;
        }
        self.models
            .forest
            .validate()
            .map_err(|e| PipelineError::Config(format!("models.forest: {e}")))?;
        self.models
            .mlp
            .validate()
            .map_err(|e| PipelineError::Config(format!("models.mlp: {e}")))?;
        Ok(())
    }

    /// Config matching a generated scenario: nominal bounds as cutoffs, the
    /// unrelated channels as expert exclusions, commissioning trimmed away.
    pub fn for_synthetic(synth: &SynthConfig, truth: &GroundTruth) -> Self {
        let cutoffs = truth
            .channels
            .iter()
            .filter(|c| {
                matches!(
                    c.role,
                    ChannelRole::Cluster { .. } | ChannelRole::Independent | ChannelRole::Operation
                )
            })
            .map(|c| (c.name.clone(), c.bounds))
            .collect();
        Self {
            exclusions: truth.unrelated_channels.clone(),
            keep_window: Some(TimeWindow {
                start: Some(truth.keep_from),
                end: None,
            }),
            cutoffs: CutoffSpec(cutoffs),
            labeling: LabelingConfig {
                degraded_window: synth.degradation.window_minutes * 60,
                transition_window: synth.truth.transition_minutes * 60,
                warmup: synth.truth.warmup_minutes * 60,
                cooldown: synth.truth.cooldown_minutes * 60,
                operation_signal: Some(OperationSignal {
                    feature: OPERATION_CHANNEL.into(),
                    threshold: 0.0,
                }),
                per_mode: Default::default(),
            },
            seed: synth.seed,
            ..Default::default()
        }
    }

    pub fn preset_balance(&self) -> BalanceMode {
        match self.baseline.preset {
            Preset::Scenario4 => BalanceMode::Both,
            Preset::None => self.split.balance,
            _ => BalanceMode::TestOnly,
        }
    }
}
