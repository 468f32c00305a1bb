//! Config-driven orchestration. Every stage reads its inputs from, and writes
//! its outputs to, the run directory, so stages can run one at a time and
//! give the same artifacts as a single full run.

mod baseline;
mod config;
mod report;
mod stages;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use baseline::{BaselineReport, BaselineResult};
pub use config::{
    BaselineConfig, ModelKind, ModelsConfig, NanThresholds, Paths, PipelineConfig, Preset, CONFIG_VERSION,
};
pub use report::write_report;
pub use stages::{SetSize, 
    EvaluationReport, IngestReport, LabelReport, LowVariabilityReport, PartitionReport, ReloadReport, SplitReport,
};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    /// Bad or inconsistent input data.
    Data,
    /// Failure writing artifacts or a broken invariant.
    Internal,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        kind: FailureKind,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
}

impl PipelineError {
    /// 1 usage/config, 2 data, 3 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 1,
            PipelineError::Stage {
                kind: FailureKind::Data, ..
            } => 2,
            PipelineError::Stage {
                kind: FailureKind::Internal,
                ..
            } => 3,
        }
    }

    pub fn stage(&self) -> Option<&'static str> {
        match self {
            PipelineError::Stage { stage, .. } => Some(stage),
            PipelineError::Config(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Ingest,
    Select,
    Outlier,
    LowVariability,
    Correlation,
    Reload,
    Label,
    Partition,
    Split,
    Scale,
    Train,
    Evaluate,
    Baseline,
}

impl Stage {
    /// The full preprocessing pipeline, in execution order.
    pub const FULL: [Stage; 12] = [
        Stage::Ingest,
        Stage::Select,
        Stage::Outlier,
        Stage::LowVariability,
        Stage::Correlation,
        Stage::Reload,
        Stage::Label,
        Stage::Partition,
        Stage::Split,
        Stage::Scale,
        Stage::Train,
        Stage::Evaluate,
    ];

    pub const BASELINE: [Stage; 2] = [Stage::Ingest, Stage::Baseline];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Select => "select",
            Stage::Outlier => "outlier",
            Stage::LowVariability => "low_variability",
            Stage::Correlation => "correlation",
            Stage::Reload => "reload",
            Stage::Label => "label",
            Stage::Partition => "partition",
            Stage::Split => "split",
            Stage::Scale => "scale",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Baseline => "baseline",
        }
    }

    pub fn from_name(name: &str) -> Option<Stage> {
        Stage::FULL
            .into_iter()
            .chain([Stage::Baseline])
            .find(|s| s.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageEntry {
    pub stage: String,
    pub outputs: Vec<FileHash>,
}

/// Per-stage output hashes. Holds no timestamps or absolute output paths, so
/// identical runs give identical manifests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub config_sha256: String,
    pub stages: Vec<StageEntry>,
}

impl Manifest {
    pub fn read(dir: &Path) -> Option<Manifest> {
        let s = std::fs::read_to_string(dir.join(MANIFEST_FILE)).ok()?;
        serde_json::from_str(&s).ok()
    }

    /// Hash of the serialised manifest.
    pub fn digest(&self) -> String {
        sha256_hex(to_json(self).as_bytes())
    }

    pub fn stage(&self, name: &str) -> Option<&StageEntry> {
        self.stages.iter().find(|e| e.stage == name)
    }

    fn upsert(&mut self, entry: StageEntry) {
        self.stages.retain(|e| e.stage != entry.stage);
        self.stages.push(entry);
        self.stages
            .sort_by_key(|e| Stage::from_name(&e.stage).map_or(usize::MAX, |s| s as usize));
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub(crate) fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("artifact serialises");
    s.push('\n');
    s
}

/// The config as recorded in a run: no output directory, so the hash does
/// not depend on where the run is written.
pub fn config_fingerprint(cfg: &PipelineConfig) -> (String, String) {
    let mut c = cfg.clone();
    c.paths.out_dir = None;
    let json = to_json(&c);
    let hash = sha256_hex(json.as_bytes());
    (json, hash)
}

fn internal(stage: Stage, e: impl std::error::Error + Send + Sync + 'static) -> PipelineError {
    PipelineError::Stage {
        stage: stage.name(),
        kind: FailureKind::Internal,
        source: Box::new(e),
    }
}

/// Runs `stages` in the given order inside `out_dir`, updating the manifest
/// after each one. Inputs of a stage are the files its predecessors wrote.
pub fn run_stages(cfg: &PipelineConfig, out_dir: &Path, stages: &[Stage]) -> Result<Manifest, PipelineError> {
    cfg.validate()?;
    let first = stages.first().copied().unwrap_or(Stage::Ingest);
    std::fs::create_dir_all(out_dir).map_err(|e| internal(first, e))?;
    let (cfg_json, cfg_hash) = config_fingerprint(cfg);
    std::fs::write(out_dir.join(CONFIG_FILE), &cfg_json).map_err(|e| internal(first, e))?;

    let mut manifest = match Manifest::read(out_dir) {
        Some(m) if m.config_sha256 == cfg_hash => m,
        _ => Manifest {
            version: CONFIG_VERSION,
            config_sha256: cfg_hash,
            stages: Vec::new(),
        },
    };
    for &stage in stages {
        log::info!("stage {}", stage.name());
        let mut ctx = stages::Ctx::new(cfg, out_dir, stage);
        stages::run(&mut ctx)?;
        let mut outputs = Vec::with_capacity(ctx.outputs.len());
        for file in &ctx.outputs {
            let bytes = std::fs::read(out_dir.join(file)).map_err(|e| internal(stage, e))?;
            outputs.push(FileHash {
                file: file.clone(),
                sha256: sha256_hex(&bytes),
            });
        }
        manifest.upsert(StageEntry {
            stage: stage.name().into(),
            outputs,
        });
        std::fs::write(out_dir.join(MANIFEST_FILE), to_json(&manifest)).map_err(|e| internal(stage, e))?;
    }
    Ok(manifest)
}

/// The full pipeline, or the baseline path when a preset is configured.
pub fn run_pipeline(cfg: &PipelineConfig, out_dir: &Path) -> Result<Manifest, PipelineError> {
    match cfg.baseline.preset {
        Preset::None => run_stages(cfg, out_dir, &Stage::FULL),
        _ => run_stages(cfg, out_dir, &Stage::BASELINE),
    }
}

/// Output directory: explicit override, then the config, then `./run`.
pub fn resolve_out_dir(cfg: &PipelineConfig, over: Option<&Path>) -> PathBuf {
    over.map(Path::to_path_buf)
        .or_else(|| cfg.paths.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("run"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_names_round_trip() {
        for s in Stage::FULL.into_iter().chain([Stage::Baseline]) {
            assert_eq!(Stage::from_name(s.name()), Some(s));
        }
        assert_eq!(Stage::from_name("nope"), None);
    }

    #[test]
    fn manifest_keeps_canonical_order() {
        let mut m = Manifest {
            version: 1,
            config_sha256: String::new(),
            stages: Vec::new(),
        };
        for s in ["train", "ingest", "split", "ingest"] {
            m.upsert(StageEntry {
                stage: s.into(),
                outputs: Vec::new(),
            });
        }
        let names: Vec<_> = m.stages.iter().map(|e| e.stage.as_str()).collect();
        assert_eq!(names, ["ingest", "split", "train"]);
    }

    #[test]
    fn fingerprint_ignores_out_dir() {
        let mut a = PipelineConfig::default();
        let b = a.clone();
        a.paths.out_dir = Some("/tmp/elsewhere".into());
        assert_eq!(config_fingerprint(&a).1, config_fingerprint(&b).1);
        a.seed = 7;
        assert_ne!(config_fingerprint(&a).1, config_fingerprint(&b).1);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(PipelineError::Config("x".into()).exit_code(), 1);
        let e = PipelineError::Stage {
            stage: "ingest",
            kind: FailureKind::Data,
            source: "boom".into(),
        };
        assert_eq!((e.exit_code(), e.stage()), (2, Some("ingest")));
    }
}
