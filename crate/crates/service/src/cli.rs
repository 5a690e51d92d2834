//! Command-line verbs. Exit codes: 0 ok, 1 usage, 2 data error, 3 runtime.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use mrbanks_core::analytics::analyze;
use mrbanks_core::market::{load_dataset, validate_dataset, Dataset};
use mrbanks_core::sim::{records_to_events, SimSpec};

use crate::config::ServiceConfig;
use crate::ingest::{ingest_path, write_records_csv, CsvMapping};
use crate::report::{build_bundle, sha256_hex};
use crate::state::{AppState, SystemClock};

#[derive(Debug, Parser)]
#[command(name = "mrbanks", version, about = "Market-direction guessing experiment: server, simulator and analytics")]
pub struct Cli {
    /// TOML service configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Jsonl,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP session server.
    Serve {
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Generate synthetic sessions from a JSON simulation spec.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "jsonl")]
        format: OutputFormat,
        /// Dataset for specs whose market mode is `dataset`.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Print the full analysis of an event log or record CSV as JSON.
    Analyze {
        #[arg(long)]
        input: PathBuf,
        /// TOML column mapping for CSV input.
        #[arg(long)]
        mapping: Option<PathBuf>,
        /// Include sessions that have not ended.
        #[arg(long)]
        live: bool,
    },
    /// Write the report bundle (JSON and per-figure CSVs).
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        mapping: Option<PathBuf>,
        #[arg(long)]
        live: bool,
    },
    /// Check a dataset manifest: ties, trend balance and labels.
    ValidateDataset {
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Required number of series per trend label.
        #[arg(long)]
        per_trend: Option<usize>,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

fn data(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn load_config(path: Option<&Path>) -> Result<ServiceConfig, CliError> {
    match path {
        Some(p) => ServiceConfig::load(p).map_err(|e| CliError::Usage(e.to_string())),
        None => Ok(ServiceConfig::default()),
    }
}

fn load_data(path: &Path) -> Result<Dataset, CliError> {
    load_dataset(path).map_err(|e| CliError::Data(format!("bad manifest: {e}")))
}

fn load_mapping(path: Option<&Path>) -> Result<Option<CsvMapping>, CliError> {
    path.map(|p| {
        let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))
    })
    .transpose()
}

fn load_records(
    input: &Path,
    mapping: Option<&Path>,
    live: bool,
) -> Result<(Vec<mrbanks_core::domain::RoundRecord>, String), CliError> {
    let bytes = std::fs::read(input).map_err(|e| CliError::Data(format!("cannot read {}: {e}", input.display())))?;
    let mapping = load_mapping(mapping)?;
    let ingest = ingest_path(input, mapping.as_ref(), live).map_err(data)?;
    for r in &ingest.rejects {
        eprintln!("rejected line {}: {}", r.line, r.reason);
    }
    Ok((ingest.records, sha256_hex(&bytes)))
}

/// Runs one parsed command, writing results to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let mut config = load_config(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
        config.analysis.information.bootstrap_seed = seed;
    }
    match cli.command {
        Command::Serve { bind, manifest, log } => {
            if let Some(b) = bind {
                config.bind = b;
            }
            if let Some(m) = manifest {
                config.manifest = m;
            }
            if let Some(l) = log {
                config.log_path = l;
            }
            serve(config)
        }
        Command::Simulate {
            spec,
            out: path,
            format,
            manifest,
        } => {
            let text = std::fs::read_to_string(&spec).map_err(|e| CliError::Usage(format!("{}: {e}", spec.display())))?;
            let mut spec: SimSpec = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", spec.display())))?;
            if let Some(seed) = cli.seed {
                spec.seed = seed;
            }
            let dataset = match (&spec.market, manifest) {
                (mrbanks_core::sim::MarketConfig::Dataset, m) => Some(load_data(&m.unwrap_or(config.manifest.clone()))?),
                _ => None,
            };
            let records = spec.run(dataset.as_ref()).map_err(data)?;
            let file = std::fs::File::create(&path).map_err(runtime)?;
            let mut w = std::io::BufWriter::new(file);
            match format {
                OutputFormat::Jsonl => {
                    for ev in records_to_events(&records).map_err(data)? {
                        writeln!(w, "{}", ev.to_json_line()).map_err(runtime)?;
                    }
                }
                OutputFormat::Csv => write_records_csv(&records, &mut w).map_err(runtime)?,
            }
            w.flush().map_err(runtime)?;
            writeln!(out, "wrote {} records to {}", records.len(), path.display()).map_err(runtime)
        }
        Command::Analyze { input, mapping, live } => {
            let (records, _) = load_records(&input, mapping.as_deref(), live)?;
            let report = analyze(&records, &config.analysis).map_err(data)?;
            writeln!(out, "{}", serde_json::to_string_pretty(&report).map_err(runtime)?).map_err(runtime)
        }
        Command::Report {
            input,
            out: dir,
            mapping,
            live,
        } => {
            let (records, hash) = load_records(&input, mapping.as_deref(), live)?;
            let seed = config.analysis.information.bootstrap_seed;
            let bundle = build_bundle(&records, &config.analysis, hash, seed).map_err(data)?;
            bundle.write(&dir).map_err(runtime)?;
            writeln!(out, "wrote report bundle to {}", dir.display()).map_err(runtime)
        }
        Command::ValidateDataset { manifest, per_trend } => {
            let dataset = load_data(&manifest.unwrap_or(config.manifest.clone()))?;
            let report = validate_dataset(&dataset, per_trend);
            writeln!(out, "{}", serde_json::to_string_pretty(&report).map_err(runtime)?).map_err(runtime)?;
            if report.is_ok() {
                Ok(())
            } else {
                Err(CliError::Data(report.problems.join("; ")))
            }
        }
    }
}

fn serve(config: ServiceConfig) -> Result<(), CliError> {
    let dataset = load_data(&config.manifest)?;
    let state = AppState::open(config.clone(), Arc::new(dataset), Arc::new(SystemClock)).map_err(|e| match e {
        crate::state::ServiceError::BadManifest(m) => CliError::Data(format!("bad manifest: {m}")),
        other => CliError::Data(other.to_string()),
    })?;
    let runtime_ = tokio::runtime::Runtime::new().map_err(runtime)?;
    runtime_.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&config.bind)
            .await
            .map_err(|e| CliError::Runtime(format!("cannot bind {}: {e}", config.bind)))?;
        eprintln!("listening on {}", config.bind);
        axum::serve(listener, crate::api::router(Arc::new(state)))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(runtime)
    })
}
