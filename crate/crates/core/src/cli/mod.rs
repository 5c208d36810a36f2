//! The `qoe3d` command line.

mod analyze;
mod preprocess;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::asset_io::AssetError;
use crate::session::{build_playlist, canonical_json, ExperimentConfig, Manifest, SessionError};

pub use analyze::{group_seeds, load_subjects, read_group_map, SubjectJudgments};
pub use preprocess::{preprocess_dir, split_stimulus_name, PreprocessReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "qoe3d", version, about = "Subjective quality experiments for point clouds and meshes")]
pub struct Cli {
    /// Print the machine-readable report on stdout instead of the summary.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalize models and write binary PLY, packed geometry and a manifest skeleton.
    Preprocess {
        /// Directory of .ply/.obj files.
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check manifest, config, assets and playlist construction.
    Validate {
        #[command(flatten)]
        common: SessionArgs,
        /// Write the resolved playlist as JSON.
        #[arg(long)]
        playlist_out: Option<PathBuf>,
    },
    /// Host a participant session.
    Serve {
        #[command(flatten)]
        common: SessionArgs,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        /// Directory with the built viewer bundle, served under /app.
        #[arg(long)]
        viewer_dir: Option<PathBuf>,
    },
    /// Screen subjects, compute MOS and compare two groups.
    Analyze {
        /// Journal (.jsonl) or CSV export files.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// JSON object or two-column CSV mapping each subject to a group.
        #[arg(long)]
        group_map: Option<PathBuf>,
        /// Config providing the rating scale.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Rating scale when no config is given.
        #[arg(long, default_value_t = 5)]
        categories: u32,
        /// Adds per-parameter MOS means to the report.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run synthetic raters through the full pipeline.
    Simulate {
        #[arg(long)]
        seed: u64,
        /// Defaults to the built-in five-source design.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 19)]
        subjects_per_group: usize,
        #[arg(long, default_value_t = 2)]
        groups: usize,
        #[arg(long, default_value_t = 0.5)]
        noise_sd: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct SessionArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config's display_order_seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl SessionArgs {
    fn load(&self) -> Result<(Manifest, ExperimentConfig), CommandOutcome> {
        let manifest = Manifest::load(&self.manifest).map_err(CommandOutcome::from_session)?;
        let mut config = ExperimentConfig::load(&self.config).map_err(CommandOutcome::from_session)?;
        if self.seed.is_some() {
            config.display_order_seed = self.seed;
        }
        Ok((manifest, config))
    }
}

/// Result of one command: exit code, human summary and JSON report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommandOutcome {
    pub exit_code: i32,
    pub summary: String,
    pub report: Value,
}

impl CommandOutcome {
    pub fn ok(summary: impl Into<String>, report: Value) -> Self {
        CommandOutcome {
            exit_code: EXIT_OK,
            summary: summary.into(),
            report,
        }
    }

    pub fn validation(errors: Vec<String>) -> Self {
        CommandOutcome {
            exit_code: EXIT_VALIDATION,
            summary: errors.join("\n"),
            report: json!({ "status": "invalid", "errors": errors }),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        let message = message.into();
        CommandOutcome {
            exit_code: EXIT_RUNTIME,
            report: json!({ "status": "error", "errors": [message] }),
            summary: message,
        }
    }

    fn from_session(e: SessionError) -> Self {
        match e {
            SessionError::Schema(v) => Self::validation(v),
            SessionError::Io { .. }
            | SessionError::ResultPathNotWritable { .. }
            | SessionError::JournalWriteFailure(_)
            | SessionError::Export(_) => Self::runtime(e.to_string()),
            other => Self::validation(vec![other.to_string()]),
        }
    }

    /// Canonical JSON of the report.
    pub fn report_json(&self) -> String {
        canonical_json(&self.report)
    }
}

pub fn run(cli: Cli) -> CommandOutcome {
    match cli.command {
        Command::Preprocess { input, out } => preprocess::cmd_preprocess(&input, &out),
        Command::Validate { common, playlist_out } => cmd_validate(&common, playlist_out.as_deref()),
        Command::Serve {
            common,
            bind,
            viewer_dir,
        } => cmd_serve(&common, bind, viewer_dir),
        Command::Analyze {
            inputs,
            group_map,
            config,
            categories,
            manifest,
            out,
        } => analyze::cmd_analyze(&analyze::AnalyzeArgs {
            inputs,
            group_map,
            config,
            categories,
            manifest,
            out,
        }),
        Command::Simulate {
            seed,
            manifest,
            config,
            subjects_per_group,
            groups,
            noise_sd,
            out,
        } => analyze::cmd_simulate(&analyze::SimulateArgs {
            seed,
            manifest,
            config,
            subjects_per_group,
            groups,
            noise_sd,
            out,
        }),
    }
}

/// Every problem found in the dataset. Empty means the session can run.
pub fn validation_errors(manifest: &Manifest, config: &ExperimentConfig) -> Vec<String> {
    let mut errors: Vec<String> = config.violations().into_iter().map(|v| format!("config: {v}")).collect();
    errors.extend(manifest.violations().into_iter().map(|v| format!("manifest: {v}")));
    for meta in manifest.entries() {
        let path = manifest.resolve_asset(meta);
        if !path.is_file() {
            errors.push(format!("missing asset for {}: {}", meta.id, path.display()));
        }
    }
    errors
}

fn cmd_validate(args: &SessionArgs, playlist_out: Option<&Path>) -> CommandOutcome {
    let (manifest, config) = match args.load() {
        Ok(v) => v,
        Err(outcome) => return outcome,
    };
    let mut errors = validation_errors(&manifest, &config);
    let playlist = if errors.is_empty() {
        match build_playlist(&manifest, &config) {
            Ok(p) => Some(p),
            Err(e) => {
                errors.push(format!("playlist: {e}"));
                None
            }
        }
    } else {
        None
    };
    if !errors.is_empty() {
        return CommandOutcome::validation(errors);
    }
    let playlist = playlist.expect("built when there are no errors");
    if let Some(path) = playlist_out {
        let text = serde_json::to_string_pretty(&playlist).expect("playlist serializes");
        if let Err(e) = std::fs::write(path, text) {
            return CommandOutcome::runtime(format!("{}: {e}", path.display()));
        }
    }
    let grid = manifest.combination_grid();
    let combos: Vec<Value> = grid
        .iter()
        .map(|(source, set)| json!({ "source_id": source, "combinations": set.iter().map(|(g, a)| [g, a]).collect::<Vec<_>>() }))
        .collect();
    let traps = playlist.trials.iter().filter(|t| t.is_trap_repeat).count();
    CommandOutcome::ok(
        format!(
            "{} trials ({} sources, {} impaired stimuli, {} trap repeats), seed {}",
            playlist.len(),
            grid.len(),
            manifest.impaired().count(),
            traps,
            playlist.seed
        ),
        json!({
            "status": "valid",
            "trial_count": playlist.len(),
            "trap_repeats": traps,
            "seed": playlist.seed,
            "config_digest": playlist.config_digest,
            "sources": combos,
        }),
    )
}

fn cmd_serve(args: &SessionArgs, bind: SocketAddr, viewer_dir: Option<PathBuf>) -> CommandOutcome {
    use crate::service::{serve_experiment, ServeOptions, ServiceError};

    let (manifest, config) = match args.load() {
        Ok(v) => v,
        Err(outcome) => return outcome,
    };
    let errors = config.violations();
    if !errors.is_empty() {
        return CommandOutcome::validation(errors);
    }
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(r) => r,
        Err(e) => return CommandOutcome::runtime(format!("cannot start runtime: {e}")),
    };
    runtime.block_on(async {
        let options = ServeOptions { bind, viewer_dir };
        let handle = match serve_experiment(&manifest, &config, &options).await {
            Ok(h) => h,
            Err(ServiceError::AssetMissing(paths)) => {
                return CommandOutcome::validation(
                    paths.iter().map(|p| format!("missing asset: {}", p.display())).collect(),
                )
            }
            Err(ServiceError::Session(e)) => return CommandOutcome::from_session(e),
            Err(e @ (ServiceError::Asset { .. } | ServiceError::AssetHashMismatch { .. })) => {
                return CommandOutcome::validation(vec![e.to_string()])
            }
            Err(e) => return CommandOutcome::runtime(e.to_string()),
        };
        eprintln!("serving on http://{}/app/ (Ctrl-C to stop)", handle.local_addr());
        let _ = tokio::signal::ctrl_c().await;
        match handle.shutdown().await {
            Ok(state) => CommandOutcome::ok(
                format!(
                    "{} of {} trials judged, journal {}",
                    state.completed().len(),
                    state.playlist().len(),
                    state.journal_path().display()
                ),
                json!({
                    "status": if state.is_finished() { "complete" } else { "incomplete" },
                    "completed": state.completed().len(),
                    "trial_count": state.playlist().len(),
                    "journal": state.journal_path(),
                }),
            ),
            Err(e) => CommandOutcome::runtime(e.to_string()),
        }
    })
}

fn asset_failure(path: &Path, e: &AssetError) -> String {
    format!("{}: {e}", path.display())
}
