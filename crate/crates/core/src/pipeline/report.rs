//! Markdown summary of a run directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;

use super::baseline::BaselineReport;
use super::stages::{EvaluationReport, PartitionReport, SplitReport};
use super::{FailureKind, Manifest, PipelineError};
use crate::models::EvalReport;
use crate::reduce::ReductionReport;
use crate::select::SelectionReport;

fn read<T: DeserializeOwned>(dir: &Path, name: &str) -> Option<T> {
    serde_json::from_str(&std::fs::read_to_string(dir.join(name)).ok()?).ok()
}

fn metric_rows(out: &mut String, rows: &[(&String, &EvalReport)]) {
    out.push_str("| model | accuracy | false healthy | false degraded | precision | recall | F1 |\n");
    out.push_str("|---|---|---|---|---|---|---|\n");
    for (name, r) in rows {
        let _ = writeln!(
            out,
            "| {name} | {:.4} | {:.4} | {:.4} | {:.4} | {:.4} | {:.4} |",
            r.accuracy.value,
            r.false_healthy.value,
            r.false_degraded.value,
            r.precision.value,
            r.recall.value,
            r.f1.value
        );
    }
}

/// Writes `report.md` from whichever stage reports exist in `dir`.
pub fn write_report(dir: &Path) -> Result<PathBuf, PipelineError> {
    let manifest = Manifest::read(dir).ok_or_else(|| PipelineError::Stage {
        stage: "report",
        kind: FailureKind::Data,
        source: format!("no manifest in {}", dir.display()).into(),
    })?;
    let mut out = String::from("# Pipeline run\n\n");
    let _ = writeln!(out, "Config hash `{}`.\n", manifest.config_sha256);
    out.push_str("## Stages\n\n");
    for e in &manifest.stages {
        let files: Vec<&str> = e.outputs.iter().map(|f| f.file.as_str()).collect();
        let _ = writeln!(out, "- {}: {}", e.stage, files.join(", "));
    }

    if let Some(s) = read::<SelectionReport>(dir, "selection_report.json") {
        out.push_str("\n## Feature selection\n\n");
        let _ = writeln!(out, "- excluded by expert: {}", s.excluded_by_expert.join(", "));
        for (name, r) in &s.dropped_columns {
            let _ = writeln!(out, "- dropped `{name}`: {:.1}% missing", 100.0 * r);
        }
        let _ = writeln!(out, "- rows dropped for missing values: {}", s.dropped_row_count);
        let _ = writeln!(out, "- remaining: {} rows x {} features", s.remaining_shape.0, s.remaining_shape.1);
    }
    if let Some(r) = read::<ReductionReport>(dir, "reduction_report.json") {
        out.push_str("\n## Reduction\n\n");
        for (name, cv) in &r.dropped_low_cv {
            let _ = writeln!(out, "- low variability `{name}`: cv {cv:.4}");
        }
        for g in &r.correlation_groups {
            let _ = writeln!(out, "- kept `{}`, dropped {}", g.kept, g.dropped.join(", "));
        }
        let _ = writeln!(out, "- final features ({}): {}", r.final_features.len(), r.final_features.join(", "));
    }
    if let Some(p) = read::<PartitionReport>(dir, "partition_report.json") {
        out.push_str("\n## Labels\n\n");
        let _ = writeln!(
            out,
            "- healthy: {} ({} before cutoffs)",
            p.healthy_rows, p.healthy_rows_before_cutoffs
        );
        for (mode, (_, n)) in &p.degraded {
            let _ = writeln!(out, "- degraded `{mode}`: {n}");
        }
        let _ = writeln!(out, "- transition: {}", p.transition_rows);
        let _ = writeln!(out, "- excluded: {}", p.excluded_rows);
    }
    if let Some(s) = read::<SplitReport>(dir, "split_report.json") {
        out.push_str("\n## Split\n\n");
        for (name, set) in [("train", &s.train), ("validation", &s.validation), ("test", &s.test)] {
            let _ = writeln!(out, "- {name}: {} rows, {} degraded", set.rows, set.degraded);
        }
    }
    if let Some(e) = read::<EvaluationReport>(dir, "eval_report.json") {
        let _ = writeln!(out, "\n## Test results ({} rows, {} degraded)\n", e.test.rows, e.test.degraded);
        metric_rows(&mut out, &e.models.iter().collect::<Vec<_>>());
    }
    if let Some(b) = read::<BaselineReport>(dir, "baseline_report.json") {
        let _ = writeln!(
            out,
            "\n## Baseline {:?} ({} components, {:.1}% variance)\n",
            b.preset,
            b.n_components,
            100.0 * b.explained_at_k
        );
        let rows: Vec<_> = b.results.iter().map(|(k, r)| (k, &r.report)).collect();
        metric_rows(&mut out, &rows);
    }

    let path = dir.join("report.md");
    std::fs::write(&path, out).map_err(|e| PipelineError::Stage {
        stage: "report",
        kind: FailureKind::Internal,
        source: Box::new(e),
    })?;
    Ok(path)
}
