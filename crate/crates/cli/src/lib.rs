//! Batch runner: resolves a config, runs one subcommand inside a thread pool
//! of the configured size and writes its outputs plus a manifest.

pub mod acceptance;
pub mod commands;
pub mod config;
pub mod fixtures;

use std::path::Path;

use serde::Serialize;
use serde_json::Value;

pub use config::{Config, ConfigError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Serialize)]
pub struct ManifestError {
    pub name: String,
    pub message: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub subcommand: String,
    pub resolved_config: Value,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ManifestError>,
}

/// Runs a subcommand; returns the process exit code. Config errors are
/// reported before anything is written.
pub fn run(subcommand: &str, file: Option<&Path>, overrides: &[(String, Value)]) -> i32 {
    let cfg = match Config::resolve(subcommand, file, overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return EXIT_CONFIG;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cfg.threads()).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("config error: threads: {e}");
            return EXIT_CONFIG;
        }
    };
    let dir = cfg.out_dir();
    if let Err(e) = std::fs::create_dir_all(&dir) {
        eprintln!("cannot create {}: {e}", dir.display());
        return EXIT_DOMAIN;
    }
    let mut out = commands::Outputs::new(dir.clone());
    let result = pool.install(|| commands::execute(&cfg, &mut out));
    let error = result.as_ref().err().map(|e| ManifestError { name: e.name().into(), message: e.to_string() });
    let manifest = Manifest {
        subcommand: cfg.subcommand.clone(),
        resolved_config: cfg.to_json(),
        outputs: out.written.iter().map(|p| p.display().to_string()).collect(),
        error,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    if let Err(e) = std::fs::write(dir.join("manifest.json"), text) {
        eprintln!("cannot write manifest: {e}");
        return EXIT_DOMAIN;
    }
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{}: {e}", e.name());
            EXIT_DOMAIN
        }
    }
}
