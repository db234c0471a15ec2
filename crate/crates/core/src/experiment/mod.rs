//! Batch experiments driven by TOML configs, with derived seeds, CSV outputs and a JSON
//! manifest carrying content digests.

mod config;
mod phase;
mod probe;
mod studies;

pub use config::{
    DriftConfig, DriftPreset, ExperimentConfig, ExperimentKind, MeasurePreset, Numerics, SpecConfig, Sweep,
};
pub use phase::{
    classify, phase_diagram, ratio_sweep, regime_label, Classification, PhaseCell, PhaseDiagram, RatioRow, SweepStyle,
};
pub use probe::{homeomorphism_probe, HomeomorphismReport};
pub use studies::{conjugacy_study, derivative_flow_study, transform_for, ConjugacyStudy, DerivativeFlowStudy};

use crate::error::{Error, Result};
use crate::seed::{derive_seed, hash_label};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const SCHEMA_VERSION: u32 = 1;
/// Environment variable naming the root that relative output directories resolve against.
pub const OUTPUT_ROOT_ENV: &str = "STABLELAB_OUTPUT_ROOT";
pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct DerivedSeed {
    pub label: String,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    pub config: ExperimentConfig,
    pub code_version: String,
    pub wall_time_seconds: f64,
    pub seeds: Vec<DerivedSeed>,
    pub outputs: Vec<OutputFile>,
    /// Invariant violations found while running; a non-empty list is a failed run.
    pub violations: Vec<String>,
    pub summary: serde_json::Value,
}

impl RunManifest {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    /// Digest of every output, in output order.
    pub fn digests(&self) -> Vec<(String, String)> {
        self.outputs.iter().map(|o| (o.name.clone(), o.sha256.clone())).collect()
    }
}

/// Seed of an experiment stage: hash of (base seed, kind, indices).
pub fn stage_seed(base: u64, kind: ExperimentKind, indices: &[u64]) -> u64 {
    let mut parts = vec![hash_label(kind.label())];
    parts.extend_from_slice(indices);
    derive_seed(base, &parts)
}

/// Output directory: the explicit override, else the config's `output` (or the kind name)
/// under the root named by `STABLELAB_OUTPUT_ROOT` (default `stablelab-out`). Absolute
/// config paths are used as given.
pub fn resolve_output_dir(config: &ExperimentConfig, explicit: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    let rel = PathBuf::from(config.output.clone().unwrap_or_else(|| config.kind.label().to_string()));
    if rel.is_absolute() {
        return rel;
    }
    let root = std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("stablelab-out"));
    root.join(rel)
}

/// Collects result files and their digests; nothing touches the disk until `flush`.
#[derive(Debug, Default)]
pub(crate) struct Outputs {
    files: Vec<(String, Vec<u8>)>,
    pub seeds: Vec<DerivedSeed>,
    pub violations: Vec<String>,
}

impl Outputs {
    pub fn add(&mut self, name: &str, content: String) {
        self.files.push((name.to_string(), content.into_bytes()));
    }

    pub fn seed(&mut self, label: impl Into<String>, seed: u64) {
        self.seeds.push(DerivedSeed { label: label.into(), seed });
    }

    pub fn violation(&mut self, msg: impl Into<String>) {
        self.violations.push(msg.into());
    }

    fn flush(&self, dir: &Path) -> Result<Vec<OutputFile>> {
        std::fs::create_dir_all(dir)?;
        let mut out = Vec::new();
        for (name, bytes) in &self.files {
            std::fs::write(dir.join(name), bytes)?;
            out.push(OutputFile { name: name.clone(), sha256: hex::encode(Sha256::digest(bytes)), bytes: bytes.len() });
        }
        Ok(out)
    }

    fn names(&self) -> Vec<String> {
        self.files.iter().map(|f| f.0.clone()).collect()
    }
}

/// Runs the configured pipeline and writes its CSV/JSON results plus `manifest.json` into `dir`.
pub fn run(config: &ExperimentConfig, dir: &Path) -> Result<RunManifest> {
    config.validate()?;
    let start = Instant::now();
    let mut out = Outputs::default();
    let summary = execute(config, &mut out)?;
    let outputs = out.flush(dir)?;
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        kind: config.kind,
        config: config.clone(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        seeds: out.seeds,
        outputs,
        violations: out.violations,
        summary,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Serde(e.to_string()))?;
    std::fs::write(dir.join(MANIFEST_NAME), json)?;
    Ok(manifest)
}

/// What `run` would produce, without computing anything.
pub fn dry_run(config: &ExperimentConfig, dir: &Path) -> Result<serde_json::Value> {
    config.validate()?;
    let files: Vec<&str> = match config.kind {
        ExperimentKind::DensityTable => vec!["density.csv", "summary.json"],
        ExperimentKind::Resolvent => {
            if config.sweep.lambdas.is_empty() {
                vec!["resolvent.csv", "resolvent.json"]
            } else {
                vec!["resolvent.csv", "resolvent.json", "decay.csv"]
            }
        }
        ExperimentKind::UniquenessRatio | ExperimentKind::Tanaka => vec!["ratio.csv", "summary.json"],
        ExperimentKind::PhaseDiagram => vec!["phase.csv", "phase_ratios.csv", "summary.json"],
        ExperimentKind::Homeomorphism => vec!["probe.csv", "summary.json"],
        ExperimentKind::DerivativeFlow => vec!["derivative_flow.csv", "summary.json"],
        ExperimentKind::Conjugacy => vec!["conjugacy.csv", "conjugacy_paths.csv", "summary.json"],
    };
    Ok(serde_json::json!({
        "kind": config.kind.label(),
        "output_dir": dir.display().to_string(),
        "files": files.iter().chain([MANIFEST_NAME].iter()).collect::<Vec<_>>(),
    }))
}

fn execute(config: &ExperimentConfig, out: &mut Outputs) -> Result<serde_json::Value> {
    let summary = match config.kind {
        ExperimentKind::DensityTable => studies::run_density(config, out)?,
        ExperimentKind::Resolvent => studies::run_resolvent(config, out)?,
        ExperimentKind::UniquenessRatio => phase::run_ratio(config, SweepStyle::Offset, out)?,
        ExperimentKind::Tanaka => phase::run_ratio(config, SweepStyle::Symmetric, out)?,
        ExperimentKind::PhaseDiagram => phase::run_phase(config, out)?,
        ExperimentKind::Homeomorphism => probe::run_probe(config, out)?,
        ExperimentKind::DerivativeFlow => studies::run_derivative_flow(config, out)?,
        ExperimentKind::Conjugacy => studies::run_conjugacy(config, out)?,
    };
    debug_assert!(!out.names().is_empty());
    Ok(summary)
}

pub(crate) fn to_json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| Error::Serde(e.to_string()))
}
