//! Command-line front end: configuration, presets, subcommands and run manifests.

// `!(x > tol)` is deliberate: NaN must land on the failure branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod presets;

use clap::{Parser, Subcommand};
use commands::SpectraKind;
use config::RunConfig;
use error::CliError;
use manifest::{now_rfc3339, sha256_hex, OutputSink, RunManifest};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "oee",
    version,
    about = "Spin textures, invariants and entanglement spectra of four-band BdG models"
)]
pub struct Args {
    #[command(subcommand)]
    pub command: Command,

    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH", conflicts_with = "preset")]
    pub config: Option<PathBuf>,

    /// Bundled configuration (see `oee presets`).
    #[arg(long, global = true, value_name = "NAME")]
    pub preset: Option<String>,

    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    /// Momentum grid size, or number of ky samples for spectra.
    #[arg(long, global = true, value_name = "N")]
    pub grid: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Bulk (or open-lattice) spin texture along both evaluation paths.
    Texture,
    /// Chern and skyrmion numbers with cross-checks.
    Invariants,
    /// Slab, entanglement or spin-enriched entanglement spectra.
    Spectra {
        #[arg(value_enum)]
        which: SpectraKind,
    },
    /// Invariants over a (mu, Delta0) grid.
    Phasediagram,
    /// List the bundled presets.
    Presets,
}

impl Command {
    pub fn label(&self) -> String {
        match self {
            Command::Texture => "texture".into(),
            Command::Invariants => "invariants".into(),
            Command::Spectra { which } => format!("spectra_{}", which.as_str().replace('-', "_")),
            Command::Phasediagram => "phasediagram".into(),
            Command::Presets => "presets".into(),
        }
    }
}

/// Resolves `--config` / `--preset` and applies `--grid`.
pub fn load_config(args: &Args) -> Result<RunConfig, CliError> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::from_toml(&text)?
        }
        (None, Some(name)) => presets::load(name)?,
        (None, None) => return Err(CliError::Config("one of --config or --preset is required".into())),
        (Some(_), Some(_)) => return Err(CliError::Config("--config and --preset are exclusive".into())),
    };
    if let Some(n) = args.grid {
        cfg.override_grid(n)?;
    }
    Ok(cfg)
}

/// Runs one subcommand and writes its manifest. `presets` writes nothing and returns `None`.
pub fn run(args: &Args) -> Result<Option<RunManifest>, CliError> {
    if matches!(args.command, Command::Presets) {
        return Ok(None);
    }
    let cfg = load_config(args)?;
    let dir = args.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    let threads = match args.threads {
        Some(0) => return Err(CliError::Config("--threads must be positive".into())),
        Some(n) => n,
        None => 0,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let started = now_rfc3339();
    let mut sink = OutputSink::create(&dir)?;
    let result = pool.install(|| match args.command {
        Command::Texture => commands::cmd_texture(&cfg, &mut sink),
        Command::Invariants => commands::cmd_invariants(&cfg, &mut sink),
        Command::Spectra { which } => commands::cmd_spectra(&cfg, which, &mut sink),
        Command::Phasediagram => commands::cmd_phasediagram(&cfg, &mut sink),
        Command::Presets => Ok(()),
    });
    // reports written before a failed check are still recorded
    let manifest =
        sink.finish(&args.command.label(), sha256_hex(cfg.canonical_toml().as_bytes()), started)?;
    result.map(|_| Some(manifest))
}
