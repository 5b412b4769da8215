//! Experiment driver: catalogs, flat traces, deformation reports and the
//! verification suites, all configured from one TOML file.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;
pub mod verify;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "flatlab", version, about = "Flat-trace catalogs, deformation experiments and verification suites")]
pub struct Cli {
    /// TOML experiment configuration; built-in defaults when absent.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Length cutoff of the catalog.
    #[arg(long, global = true, value_name = "F")]
    pub lmax: Option<f64>,
    /// Finite-difference step in the deformation parameter.
    #[arg(long, global = true, value_name = "F")]
    pub dt: Option<f64>,
    /// Seed of the randomized suites.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the number of logical cores.
    #[arg(long, global = true, env = "THREADS", value_name = "N")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Enumerate closed-geodesic classes up to the length cutoff.
    Catalog,
    /// Assemble the flat trace of a catalog.
    Trace {
        /// Catalog file; `<out>/catalog.json` by default.
        #[arg(long, value_name = "PATH")]
        catalog: Option<PathBuf>,
    },
    /// Length variations, transport coefficients and pairings for the
    /// configured family.
    Deform {
        #[arg(long, value_name = "PATH")]
        catalog: Option<PathBuf>,
    },
    /// Run the verification suites.
    Verify {
        /// Run only the named suite; repeatable.
        #[arg(long = "suite", value_name = "NAME")]
        suites: Vec<String>,
        /// Negate X⊥ in the frame suites (negative control).
        #[arg(long)]
        flip_xperp: bool,
    },
}

impl Cli {
    /// Configuration with command-line overrides applied.
    pub fn config(&self) -> CliResult<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(l) = self.lmax {
            cfg.l_max = l;
        }
        if let Some(d) = self.dt {
            cfg.dt = d;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Command::Verify { flip_xperp: true, .. } = self.command {
            cfg.verify.flip_xperp = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Output of a successful command: a one-line summary and warnings.
#[derive(Debug)]
pub struct Outcome {
    pub summary: Value,
    pub warnings: Vec<String>,
}

pub fn run(cli: &Cli) -> CliResult<Outcome> {
    let cfg = cli.config()?;
    let catalog_arg = |c: &Option<PathBuf>| c.clone().unwrap_or_else(|| commands::catalog_path(&cfg.out));
    match &cli.command {
        Command::Catalog => {
            let path = commands::cmd_catalog(&cfg)?;
            Ok(Outcome { summary: json!({"command": "catalog", "path": path}), warnings: vec![] })
        }
        Command::Trace { catalog } => {
            let (path, warnings) = commands::cmd_trace(&cfg, &catalog_arg(catalog))?;
            Ok(Outcome { summary: json!({"command": "trace", "path": path}), warnings })
        }
        Command::Deform { catalog } => {
            let (path, warnings) = commands::cmd_deform(&cfg, &catalog_arg(catalog))?;
            Ok(Outcome { summary: json!({"command": "deform", "path": path}), warnings })
        }
        Command::Verify { suites, .. } => {
            let only = (!suites.is_empty()).then_some(suites.as_slice());
            let path = verify::cmd_verify(&cfg, only)?;
            Ok(Outcome { summary: json!({"command": "verify", "path": path}), warnings: vec![] })
        }
    }
}

/// Sizes the global worker pool.
pub fn configure_threads(n: Option<usize>) -> CliResult<()> {
    #[cfg(feature = "parallel")]
    if let Some(n) = n {
        if n == 0 {
            return Err(CliError::Config("threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}
