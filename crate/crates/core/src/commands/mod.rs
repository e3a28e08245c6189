//! Batch operations behind the `segbite` binary.
//!
//! Every command takes a [`RunConfig`], works page by page on a thread pool
//! of `jobs` workers and merges results in page-id order, so output files
//! and reports do not depend on the degree of parallelism. Pages are
//! identified by file stem across annotations, images, OCR files, label maps
//! and predictions.
//!
//! Commands never print; they return an [`Outcome`] holding the text meant
//! for stdout and the process exit code.

mod build_mask;
mod evaluate;
mod stats;
mod validate;

pub use build_mask::{Manifest, ManifestRow, PageStatus};
pub use evaluate::{MergedPage, MergeSummary};
pub use stats::{Distribution, StatsReport};
pub use validate::ValidationReport;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::merge::MergeOptions;
use crate::metrics::{BootstrapConfig, MissingPolicy};
use crate::rasterize::ThresholdParams;

pub const EXIT_OK: u8 = 0;
/// Validation problems, failed pages or unusable inputs.
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    BuildMask,
    Evaluate,
    Merge,
    Stats,
    Validate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OcrFormat {
    #[default]
    PageXml,
    Alto,
}

impl std::str::FromStr for OcrFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "pagexml" | "page-xml" | "page" => Ok(Self::PageXml),
            "alto" => Ok(Self::Alto),
            other => Err(format!("unknown OCR format {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: CommandKind,
    /// COCO annotation file.
    pub annotations: Option<PathBuf>,
    pub images: Option<PathBuf>,
    /// Directory of `<page>.xml` OCR files.
    pub ocr_dir: Option<PathBuf>,
    pub ocr_format: OcrFormat,
    /// Directory of ground-truth label maps.
    pub gt: Option<PathBuf>,
    /// Directory of predicted label maps and/or prediction files.
    pub predictions: Option<PathBuf>,
    /// JSON object mapping page id to a split name such as `printed`.
    pub split: Option<PathBuf>,
    /// Output directory for `build-mask` and `merge`, report file otherwise.
    pub output: Option<PathBuf>,
    pub threshold: ThresholdParams,
    pub missing_policy: MissingPolicy,
    pub bootstrap: BootstrapConfig,
    pub merge: MergeOptions,
    /// Also write color overlays of the label maps.
    pub overlay: bool,
    /// Worker threads; 0 picks one per core.
    pub jobs: usize,
}

impl RunConfig {
    pub fn new(command: CommandKind) -> Self {
        Self {
            command,
            annotations: None,
            images: None,
            ocr_dir: None,
            ocr_format: OcrFormat::default(),
            gt: None,
            predictions: None,
            split: None,
            output: None,
            threshold: ThresholdParams::default(),
            missing_policy: MissingPolicy::default(),
            bootstrap: BootstrapConfig::default(),
            merge: MergeOptions::default(),
            overlay: false,
            jobs: 0,
        }
    }

    /// Rejects configurations the command cannot run with.
    pub fn check(&self) -> Result<(), CommandError> {
        let need = |field: &Option<PathBuf>, flag: &str| match field {
            Some(_) => Ok(()),
            None => Err(CommandError::Usage(format!("{} requires {flag}", self.name()))),
        };
        match self.command {
            CommandKind::BuildMask => {
                need(&self.annotations, "--annotations")?;
                need(&self.images, "--images")?;
                need(&self.ocr_dir, "--ocr-dir")?;
                need(&self.output, "--out")?;
            }
            CommandKind::Evaluate => {
                need(&self.gt, "--gt")?;
                need(&self.predictions, "--pred")?;
            }
            CommandKind::Merge => {
                need(&self.predictions, "--pred")?;
                need(&self.output, "--out")?;
                if self.gt.is_none() && self.annotations.is_none() {
                    return Err(CommandError::Usage(
                        "merge needs page sizes from --gt or --annotations".into(),
                    ));
                }
            }
            CommandKind::Stats | CommandKind::Validate => need(&self.annotations, "--annotations")?,
        }
        let w = self.threshold.window;
        if w < 3 || w.is_multiple_of(2) {
            return Err(CommandError::Usage(format!("--window must be odd and at least 3, got {w}")));
        }
        if !self.threshold.bias.is_finite() {
            return Err(CommandError::Usage("--bias must be finite".into()));
        }
        let a = self.bootstrap.alpha;
        if !(a > 0.0 && a < 1.0) {
            return Err(CommandError::Usage(format!("--alpha must be in (0, 1), got {a}")));
        }
        if !self.merge.cosine_threshold.is_finite() {
            return Err(CommandError::Usage("--cosine-threshold must be finite".into()));
        }
        Ok(())
    }

    fn name(&self) -> &'static str {
        match self.command {
            CommandKind::BuildMask => "build-mask",
            CommandKind::Evaluate => "evaluate",
            CommandKind::Merge => "merge",
            CommandKind::Stats => "stats",
            CommandKind::Validate => "validate",
        }
    }

    fn pool(&self) -> Result<rayon::ThreadPool, CommandError> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map_err(|e| CommandError::Usage(format!("cannot start {} workers: {e}", self.jobs)))
    }
}

#[derive(Debug, Error)]
pub enum CommandError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Data(String),
}

impl CommandError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Io { .. } => EXIT_IO,
            Self::Data(_) => EXIT_FAILURE,
        }
    }

    fn data(path: &Path, err: impl std::fmt::Display) -> Self {
        Self::Data(format!("{}: {err}", path.display()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub stdout: String,
    pub exit_code: u8,
}

pub fn run(config: &RunConfig) -> Result<Outcome, CommandError> {
    config.check()?;
    match config.command {
        CommandKind::BuildMask => build_mask::cmd_build_mask(config),
        CommandKind::Evaluate => evaluate::cmd_evaluate(config),
        CommandKind::Merge => evaluate::cmd_merge(config),
        CommandKind::Stats => stats::cmd_stats(config),
        CommandKind::Validate => validate::cmd_validate(config),
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CommandError> {
    fs::read(path).map_err(|source| CommandError::Io {
        path: path.to_owned(),
        source,
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CommandError> {
    fs::write(path, bytes).map_err(|source| CommandError::Io {
        path: path.to_owned(),
        source,
    })
}

fn create_dir(path: &Path) -> Result<(), CommandError> {
    fs::create_dir_all(path).map_err(|source| CommandError::Io {
        path: path.to_owned(),
        source,
    })
}

/// Files directly inside `dir` with extension `ext` (case-insensitive),
/// keyed by stem.
fn files_by_stem(dir: &Path, ext: &str) -> Result<BTreeMap<String, PathBuf>, CommandError> {
    let io = |source| CommandError::Io {
        path: dir.to_owned(),
        source,
    };
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        let matches = path
            .extension()
            .is_some_and(|e| e.to_string_lossy().eq_ignore_ascii_case(ext));
        if !matches || !path.is_file() {
            continue;
        }
        if let Some(stem) = path.file_stem() {
            out.insert(stem.to_string_lossy().into_owned(), path);
        }
    }
    Ok(out)
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports are always serializable");
    s.push('\n');
    s
}
