//! Batch driver: validated configurations, stage runners and reproducible manifests.

pub mod config;
pub mod eval;
pub mod manifest;
pub mod stages;

use anyhow::{bail, Result};
use config::RunConfig;
use manifest::{OutputDir, RunManifest, MANIFEST_FILE};
use std::time::Instant;

/// Runs one stage and writes its outputs plus `manifest.json`; on failure nothing is left behind.
pub fn run(cfg: &RunConfig) -> Result<RunManifest> {
    cfg.validate()?;
    let start = Instant::now();
    let mut out = OutputDir::create(&cfg.out)?;
    match stages::run_stage(cfg, &mut out) {
        Ok(()) => {
            let manifest = RunManifest {
                tool: "landau-delta".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                command: cfg.command.name().into(),
                seed: cfg.seed,
                threads: rayon::current_num_threads(),
                wall_seconds: start.elapsed().as_secs_f64(),
                config: cfg.clone(),
                outputs: out.records().to_vec(),
            };
            let text = serde_json::to_string_pretty(&manifest)? + "\n";
            if let Err(e) = std::fs::write(out.path().join(MANIFEST_FILE), text) {
                out.discard();
                bail!("writing manifest: {e}");
            }
            Ok(manifest)
        }
        Err(e) => {
            out.discard();
            Err(e)
        }
    }
}

#[derive(Debug, PartialEq, Eq)]
pub struct Mismatch {
    pub file: String,
    pub expected: String,
    pub found: Option<String>,
}

/// Reruns the configuration recorded in a manifest into `out` and compares checksums.
pub fn replay(recorded: &RunManifest, out: &std::path::Path) -> Result<Vec<Mismatch>> {
    let mut cfg = recorded.config.clone();
    cfg.out = out.to_path_buf();
    let fresh = run(&cfg)?;
    Ok(recorded
        .outputs
        .iter()
        .filter_map(|rec| {
            let found = fresh
                .outputs
                .iter()
                .find(|o| o.file == rec.file)
                .map(|o| o.sha256.clone());
            (found.as_deref() != Some(rec.sha256.as_str())).then(|| Mismatch {
                file: rec.file.clone(),
                expected: rec.sha256.clone(),
                found,
            })
        })
        .collect())
}
