//! Command-line front end: parses a JSON experiment configuration, runs the
//! experiment and writes CSV/JSON artifacts plus a run manifest.
//!
//! Exit codes: 0 on success, 1 when any check in the run failed, 2 on
//! configuration or output errors.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};
use treelab::experiments::{self, ExperimentConfig, ExperimentKind, ExperimentOutput};
use treelab::io;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("range error: {0}")]
    Range(String),
}

#[derive(Debug, thiserror::Error)]
pub enum DispatchError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("output directory {}: {source}", path.display())]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("experiment failed: {0}")]
    Run(#[from] treelab::Error),
}

impl DispatchError {
    pub fn exit_code(&self) -> i32 {
        EXIT_CONFIG
    }
}

/// Parses and validates a configuration document, applying defaults.
pub fn parse_config(document: &str) -> Result<ExperimentConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(document);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let message = e.into_inner().to_string();
        let message = if message.contains("unknown variant") && path.starts_with("experiment") {
            let names: Vec<&str> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
            format!("{message} (valid experiments: {})", names.join(", "))
        } else {
            message
        };
        ConfigError::Schema { path, message }
    })?;
    cfg.validate().map_err(|e| ConfigError::Range(e.to_string()))?;
    Ok(cfg)
}

/// SHA-256 of the resolved configuration rendered as JSON with sorted keys.
pub fn config_digest(cfg: &ExperimentConfig) -> String {
    // serde_json::Value keeps object keys sorted
    let value = serde_json::to_value(cfg).expect("config serializes");
    let canonical = serde_json::to_string(&value).expect("value serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config_digest: String,
    pub seed: u64,
    pub experiment: String,
    pub started: String,
    pub finished: String,
    pub wall_time_seconds: f64,
    pub artifact_version: String,
    pub passed: bool,
    pub warnings: Vec<String>,
    pub outputs: Vec<String>,
}

#[derive(Debug, Serialize)]
struct ReportFile<'a> {
    experiment: &'a str,
    passed: bool,
    failed: usize,
    reports: &'a [treelab::stats::CheckReport],
    warnings: &'a [String],
}

fn output_err(path: &Path) -> impl FnOnce(std::io::Error) -> DispatchError + '_ {
    move |source| DispatchError::Output {
        path: path.to_path_buf(),
        source,
    }
}

/// Creates `dir` and checks that files can be written into it.
fn prepare_output_dir(dir: &Path) -> Result<(), DispatchError> {
    fs::create_dir_all(dir).map_err(output_err(dir))?;
    let probe = dir.join(".write-probe");
    File::create(&probe).map_err(output_err(dir))?;
    fs::remove_file(&probe).map_err(output_err(dir))?;
    Ok(())
}

fn write_file(
    dir: &Path,
    name: &str,
    outputs: &mut Vec<String>,
    f: impl FnOnce(BufWriter<File>) -> treelab::Result<()>,
) -> Result<(), DispatchError> {
    let path = dir.join(name);
    let file = File::create(&path).map_err(output_err(&path))?;
    f(BufWriter::new(file))?;
    outputs.push(name.to_string());
    Ok(())
}

fn write_outputs(dir: &Path, cfg: &ExperimentConfig, out: &ExperimentOutput) -> Result<Vec<String>, DispatchError> {
    let mut outputs = Vec::new();
    write_file(dir, "config.json", &mut outputs, |w| io::write_json(w, cfg))?;
    for (name, records) in &out.curves {
        write_file(dir, &format!("{name}.csv"), &mut outputs, |w| io::write_curve_csv(w, records))?;
    }
    if let Some(bands) = &out.bands {
        write_file(dir, "bands.csv", &mut outputs, |w| io::write_bands_csv(w, bands))?;
        write_file(dir, "bands.json", &mut outputs, |w| io::write_json(w, bands))?;
    }
    let report = ReportFile {
        experiment: out.experiment.name(),
        passed: out.passed(),
        failed: out.reports.iter().filter(|r| !r.passed).count(),
        reports: &out.reports,
        warnings: &out.warnings,
    };
    write_file(dir, "report.json", &mut outputs, |w| io::write_json(w, &report))?;
    Ok(outputs)
}

/// Runs the configured experiment and writes every artifact into
/// `output_dir`, finishing with `manifest.json`.
pub fn dispatch(cfg: &ExperimentConfig, output_dir: &Path) -> Result<RunManifest, DispatchError> {
    prepare_output_dir(output_dir)?;
    let started = chrono::Utc::now();
    let clock = Instant::now();
    let out = experiments::run(cfg)?;
    let mut outputs = write_outputs(output_dir, cfg, &out)?;
    let finished = chrono::Utc::now();
    outputs.push("manifest.json".into());
    let manifest = RunManifest {
        config_digest: config_digest(cfg),
        seed: cfg.seed,
        experiment: cfg.experiment.name().into(),
        started: started.to_rfc3339(),
        finished: finished.to_rfc3339(),
        wall_time_seconds: clock.elapsed().as_secs_f64(),
        artifact_version: format!("treelab {}", env!("CARGO_PKG_VERSION")),
        passed: out.passed(),
        warnings: out.warnings.clone(),
        outputs,
    };
    let mut ignored = Vec::new();
    write_file(output_dir, "manifest.json", &mut ignored, |w| io::write_json(w, &manifest))?;
    Ok(manifest)
}

/// Command-line options after parsing.
#[derive(Debug, Clone, clap::Parser)]
#[command(name = "treelab", version, about = "Run tree-operator experiments from a JSON configuration")]
pub struct Args {
    /// Experiment configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; affects speed only.
    #[arg(long)]
    pub threads: Option<usize>,
}

/// Full run for parsed arguments; prints diagnostics to stderr and returns
/// the process exit code.
pub fn run(args: &Args) -> i32 {
    let document = match fs::read_to_string(&args.config) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return EXIT_CONFIG;
        }
    };
    let mut cfg = match parse_config(&document) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let result = match args.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cfg, &args.out)),
            Err(e) => {
                eprintln!("error: cannot start {n} worker threads: {e}");
                return EXIT_CONFIG;
            }
        },
        None => dispatch(&cfg, &args.out),
    };
    match result {
        Ok(manifest) => {
            for w in &manifest.warnings {
                eprintln!("warning: {w}");
            }
            if manifest.passed {
                EXIT_OK
            } else {
                eprintln!("error: one or more checks failed; see report.json");
                EXIT_CHECK_FAILED
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
