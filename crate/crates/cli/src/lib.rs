//! Command-line driver over the core pipeline: generation, statistics,
//! dataset surgery, evaluation, and a throughput benchmark.
//!
//! Every subcommand is a pure function of its resolved configuration and
//! input files. The only nondeterministic manifest content is the `timing`
//! block, which reruns and hashed comparisons are expected to exclude.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use synthdrive_core::dataset::DatasetError;
use synthdrive_core::eval::EvalError;
use synthdrive_core::mapio::MapError;
use synthdrive_core::worldgen::WorldError;

pub mod generate;
pub mod ops;

pub use generate::{run_bench, run_generate, BenchConfig, GenerateConfig};
pub use ops::{run_eval, run_filter, run_mix, run_sample, run_split, run_stats, EvalRequest, EvalReport, FilterMode};

/// Errors bucketed by exit code: 1 for bad requests (flags, config files,
/// operations invalid for their input), 2 for unreadable or malformed input
/// files and failed writes, 3 for failures while building or rendering.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Generation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Io(_) => 2,
            CliError::Generation(_) => 3,
        }
    }
}

impl From<MapError> for CliError {
    fn from(e: MapError) -> CliError {
        CliError::Io(e.to_string())
    }
}

impl From<WorldError> for CliError {
    fn from(e: WorldError) -> CliError {
        CliError::Generation(e.to_string())
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> CliError {
        match e {
            // Well-formed inputs that cannot satisfy the request.
            DatasetError::MissingOcclusionData { .. }
            | DatasetError::DuplicateNamespace(_)
            | DatasetError::SampleTooLarge { .. } => CliError::Config(e.to_string()),
            _ => CliError::Io(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> CliError {
        match e {
            EvalError::ZeroReference => CliError::Config(e.to_string()),
            _ => CliError::Io(e.to_string()),
        }
    }
}

/// One flat optional-field config shared by every subcommand; each reads the
/// fields it understands. Loaded from `--config FILE`, overridden by flags.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub preset: Option<String>,
    pub map: Option<PathBuf>,
    pub frames: Option<u64>,
    pub seed: Option<u64>,
    pub width: Option<u32>,
    pub height: Option<u32>,
    pub fov: Option<f64>,
    pub weather: Option<String>,
    pub time_of_day: Option<f64>,
    pub fog_beta: Option<f64>,
    pub jobs: Option<usize>,
    pub iou_threshold: Option<f64>,
    pub ap_mode: Option<String>,
    pub ratio: Option<String>,
    pub min_area: Option<u32>,
    pub count: Option<usize>,
}

pub fn load_file_config(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))
}

/// Parse "A:B" with both sides at least 1.
pub fn parse_ratio(text: &str) -> Result<(u64, u64), CliError> {
    let bad = || CliError::Config(format!("invalid ratio '{text}': expected A:B with A,B >= 1"));
    let (a, b) = text.split_once(':').ok_or_else(bad)?;
    let a: u64 = a.trim().parse().map_err(|_| bad())?;
    let b: u64 = b.trim().parse().map_err(|_| bad())?;
    if a == 0 || b == 0 {
        return Err(bad());
    }
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_parsing() {
        assert_eq!(parse_ratio("3:1").unwrap(), (3, 1));
        assert_eq!(parse_ratio(" 7 : 2 ").unwrap(), (7, 2));
        assert!(parse_ratio("3").is_err());
        assert!(parse_ratio("0:1").is_err());
        assert!(parse_ratio("3:x").is_err());
    }

    #[test]
    fn error_exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 1);
        assert_eq!(CliError::Io("x".into()).exit_code(), 2);
        assert_eq!(CliError::Generation("x".into()).exit_code(), 3);
    }

    #[test]
    fn config_file_rejects_unknown_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"frames": 3, "typo_field": 1}"#).unwrap();
        let err = load_file_config(Some(&path)).unwrap_err();
        assert_eq!(err.exit_code(), 1);

        std::fs::write(&path, r#"{"frames": 3, "seed": 9}"#).unwrap();
        let cfg = load_file_config(Some(&path)).unwrap();
        assert_eq!(cfg.frames, Some(3));
        assert_eq!(cfg.seed, Some(9));
        assert_eq!(cfg.width, None);
    }

    #[test]
    fn missing_config_file_is_io_error() {
        let err = load_file_config(Some(Path::new("/nonexistent/cfg.json"))).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
