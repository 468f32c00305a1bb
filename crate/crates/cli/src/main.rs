use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use machprep::ingest::{encode_categorical, load_sensor_frame};
use machprep::outlier::emit_diagnostics;
use machprep::pipeline::{
    resolve_out_dir, run_pipeline, run_stages, write_report, PipelineConfig, PipelineError, Preset, Stage,
};
use machprep::synth::{generate_scenario, write_scenario, SynthConfig};

/// Preprocessing pipeline for machinery sensor data with maintenance logs.
#[derive(Parser)]
#[command(name = "machprep", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Pipeline config (JSON). For `synth`, an optional scenario config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Log progress to stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scenario and a matching pipeline config.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Scenario length in hours.
        #[arg(long)]
        hours: Option<i64>,
    },
    /// Write per-feature series and a boxplot summary for cutoff selection.
    Inspect {
        #[command(flatten)]
        common: Common,
        /// Sensor CSV to inspect instead of the config's sensor file.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Ingest, expert exclusions, time window and missing-value filters.
    Select(StageArgs),
    /// Cutoffs, low-variability filter and correlation deduplication.
    Reduce(StageArgs),
    /// Reload surviving features, label and partition by health state.
    Label(StageArgs),
    /// Balanced split and scaling.
    Prepare(StageArgs),
    /// Train the configured classifiers.
    Train(StageArgs),
    /// Evaluate trained classifiers on the test set.
    Evaluate(StageArgs),
    /// Run every stage, or a baseline preset.
    Pipeline {
        #[command(flatten)]
        common: Common,
        /// Overrides the config's baseline preset.
        #[arg(long, value_parser = parse_preset)]
        preset: Option<Preset>,
    },
    /// Summarise a run directory as report.md.
    Report {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct StageArgs {
    #[command(flatten)]
    common: Common,
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown preset `{s}` (none, scenario1..scenario4)"))
}

enum Failure {
    Usage(String),
    Data(String),
    Internal(String),
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e.exit_code() {
            1 => Failure::Usage(e.to_string()),
            2 => Failure::Data(e.to_string()),
            _ => Failure::Internal(e.to_string()),
        }
    }
}

fn load_config(common: &Common) -> Result<(PipelineConfig, PathBuf), Failure> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| Failure::Usage("--config is required".into()))?;
    let mut cfg = PipelineConfig::load(path)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = resolve_out_dir(&cfg, common.out.as_deref());
    Ok((cfg, out))
}

fn stages(common: &Common, stages: &[Stage]) -> Result<(), Failure> {
    let (cfg, out) = load_config(common)?;
    run_stages(&cfg, &out, stages)?;
    Ok(())
}

fn synth(common: &Common, hours: Option<i64>) -> Result<(), Failure> {
    let mut cfg = match &common.config {
        Some(p) => {
            let s = std::fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
            serde_json::from_str::<SynthConfig>(&s).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?
        }
        None => SynthConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(h) = hours {
        cfg.duration_hours = h;
    }
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("scenario"));
    let (frame, log, truth) = generate_scenario(&cfg).map_err(|e| Failure::Usage(e.to_string()))?;
    write_scenario(&out, &frame, &log, &truth).map_err(|e| Failure::Internal(e.to_string()))?;
    let mut pc = PipelineConfig::for_synthetic(&cfg, &truth);
    pc.paths.out_dir = Some("run".into());
    std::fs::write(out.join("pipeline_config.json"), pc.to_json())
        .map_err(|e| Failure::Internal(format!("{}: {e}", out.display())))?;
    println!("wrote scenario to {}", out.display());
    Ok(())
}

fn inspect(common: &Common, input: Option<&Path>) -> Result<(), Failure> {
    let (cfg, path) = match (input, &common.config) {
        (Some(p), None) => (PipelineConfig::default(), p.to_path_buf()),
        (input, Some(_)) => {
            let (cfg, _) = load_config(common)?;
            let p = input.map(Path::to_path_buf).unwrap_or_else(|| cfg.paths.sensors.clone());
            (cfg, p)
        }
        (None, None) => return Err(Failure::Usage("inspect needs --config or --input".into())),
    };
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("diagnostics"));
    let mut frame = load_sensor_frame(&path, &cfg.time_column, &cfg.missing_token_set())
        .map_err(|e| Failure::Data(e.to_string()))?;
    for enc in &cfg.categorical {
        frame = encode_categorical(&frame, enc).map_err(|e| Failure::Data(e.to_string()))?;
    }
    let written = emit_diagnostics(&frame, &out).map_err(|e| Failure::Internal(e.to_string()))?;
    println!("wrote {} files to {}", written.len(), out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Synth { common, hours } => synth(&common, hours),
        Command::Inspect { common, input } => inspect(&common, input.as_deref()),
        Command::Select(a) => stages(&a.common, &[Stage::Ingest, Stage::Select]),
        Command::Reduce(a) => stages(&a.common, &[Stage::Outlier, Stage::LowVariability, Stage::Correlation]),
        Command::Label(a) => stages(&a.common, &[Stage::Reload, Stage::Label, Stage::Partition]),
        Command::Prepare(a) => stages(&a.common, &[Stage::Split, Stage::Scale]),
        Command::Train(a) => stages(&a.common, &[Stage::Train]),
        Command::Evaluate(a) => stages(&a.common, &[Stage::Evaluate]),
        Command::Pipeline { common, preset } => {
            let (mut cfg, out) = load_config(&common)?;
            if let Some(p) = preset {
                cfg.baseline.preset = p;
            }
            let manifest = run_pipeline(&cfg, &out)?;
            println!("{} stages, manifest {}", manifest.stages.len(), manifest.digest());
            Ok(())
        }
        Command::Report { common } => {
            let dir = match (&common.out, &common.config) {
                (Some(o), _) => o.clone(),
                (None, Some(_)) => load_config(&common)?.1,
                (None, None) => return Err(Failure::Usage("report needs --out or --config".into())),
            };
            let path = write_report(&dir)?;
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn verbose(cli: &Cli) -> bool {
    match &cli.command {
        Command::Synth { common, .. }
        | Command::Inspect { common, .. }
        | Command::Pipeline { common, .. }
        | Command::Report { common } => common.verbose,
        Command::Select(a)
        | Command::Reduce(a)
        | Command::Label(a)
        | Command::Prepare(a)
        | Command::Train(a)
        | Command::Evaluate(a) => a.common.verbose,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = if verbose(&cli) { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(m)) => {
            eprintln!("internal error: {m}");
            ExitCode::from(3)
        }
    }
}
