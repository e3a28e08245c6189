//! `segbite`: ground-truth masks, evaluation and corpus checks for logical
//! page segmentation.
//!
//! Every flag can also be set through an environment variable named
//! `SEGBITE_<FLAG>`, e.g. `SEGBITE_WINDOW=151` or `SEGBITE_JOBS=4`.
//! Command-line values win over the environment.
//!
//! Exit codes: 0 success, 1 validation problems or failed pages,
//! 2 usage errors, 3 I/O errors.

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use segbite::commands::{self, CommandKind, OcrFormat, RunConfig, EXIT_USAGE};
use segbite::merge::DEFAULT_COSINE_THRESHOLD;
use segbite::metrics::{Aggregation, MissingPolicy};
use segbite::rasterize::{Polarity, DEFAULT_BIAS, DEFAULT_WINDOW};

#[derive(Parser)]
#[command(name = "segbite", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "SEGBITE_JOBS", default_value_t = 0)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Build ground-truth label maps from annotations, page images and OCR.
    BuildMask {
        #[arg(long, env = "SEGBITE_ANNOTATIONS")]
        annotations: PathBuf,
        #[arg(long, env = "SEGBITE_IMAGES")]
        images: PathBuf,
        /// Directory of `<page>.xml` OCR files.
        #[arg(long, env = "SEGBITE_OCR_DIR")]
        ocr_dir: PathBuf,
        #[command(flatten)]
        ocr: OcrArgs,
        #[arg(long, env = "SEGBITE_OUT")]
        out: PathBuf,
        #[command(flatten)]
        threshold: ThresholdArgs,
        /// Also write color overlays to `<out>/overlays/`.
        #[arg(long, env = "SEGBITE_OVERLAY")]
        overlay: bool,
    },
    /// Score predictions against ground-truth label maps.
    Evaluate {
        /// Directory of ground-truth `<page>.png` label maps.
        #[arg(long, env = "SEGBITE_GT")]
        gt: PathBuf,
        /// Directory of predicted `<page>.png` label maps or `<page>.json` prediction files.
        #[arg(long, env = "SEGBITE_PRED")]
        pred: PathBuf,
        /// Write the JSON report here.
        #[arg(long, env = "SEGBITE_OUT")]
        out: Option<PathBuf>,
        #[arg(long, env = "SEGBITE_MISSING_POLICY", default_value = "extra-cluster", value_parser = ["extra-cluster", "singletons"])]
        missing_policy: String,
        #[arg(long, env = "SEGBITE_AGGREGATION", default_value = "macro", value_parser = ["macro", "pixel"])]
        aggregation: String,
        /// Bootstrap replicates (0 disables the interval).
        #[arg(long, env = "SEGBITE_BOOTSTRAP", default_value_t = 1000)]
        bootstrap: usize,
        #[arg(long, env = "SEGBITE_ALPHA", default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, env = "SEGBITE_SEED", default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        merge: MergeArgs,
    },
    /// Turn prediction files into predicted label maps.
    Merge {
        #[arg(long, env = "SEGBITE_PRED")]
        pred: PathBuf,
        #[arg(long, env = "SEGBITE_OUT")]
        out: PathBuf,
        /// Take page sizes from these ground-truth label maps.
        #[arg(long, env = "SEGBITE_GT")]
        gt: Option<PathBuf>,
        /// Take page sizes from this COCO file.
        #[arg(long, env = "SEGBITE_ANNOTATIONS")]
        annotations: Option<PathBuf>,
        #[command(flatten)]
        merge: MergeArgs,
    },
    /// Region, segment, textline and image-size statistics of a corpus.
    Stats {
        #[arg(long, env = "SEGBITE_ANNOTATIONS")]
        annotations: PathBuf,
        #[arg(long, env = "SEGBITE_OCR_DIR")]
        ocr_dir: Option<PathBuf>,
        #[command(flatten)]
        ocr: OcrArgs,
        /// JSON object mapping page id to split name (e.g. printed, handwritten).
        #[arg(long, env = "SEGBITE_SPLIT")]
        split: Option<PathBuf>,
        #[arg(long, env = "SEGBITE_OUT")]
        out: Option<PathBuf>,
    },
    /// Check annotations for dangling relations, bad boxes and format problems.
    Validate {
        #[arg(long, env = "SEGBITE_ANNOTATIONS")]
        annotations: PathBuf,
        #[arg(long, env = "SEGBITE_OUT")]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct OcrArgs {
    #[arg(long, env = "SEGBITE_OCR", default_value = "pagexml", value_parser = ["pagexml", "alto"])]
    ocr: String,
}

#[derive(Args)]
struct ThresholdArgs {
    /// Side of the adaptive-threshold window (odd).
    #[arg(long, env = "SEGBITE_WINDOW", default_value_t = DEFAULT_WINDOW)]
    window: u32,
    /// How far below the local mean a pixel must be to count as ink.
    #[arg(long, env = "SEGBITE_BIAS", default_value_t = DEFAULT_BIAS, allow_negative_numbers = true)]
    bias: f64,
    /// Treat light pixels on a dark background as ink.
    #[arg(long, env = "SEGBITE_INVERT_POLARITY")]
    invert_polarity: bool,
}

#[derive(Args)]
struct MergeArgs {
    #[arg(long, env = "SEGBITE_COSINE_THRESHOLD", default_value_t = DEFAULT_COSINE_THRESHOLD, allow_negative_numbers = true)]
    cosine_threshold: f64,
    /// Ignore self-scores when picking successors from a score matrix.
    #[arg(long, env = "SEGBITE_EXCLUDE_DIAGONAL")]
    exclude_diagonal: bool,
}

fn parse<T: std::str::FromStr<Err = String>>(s: &str) -> T {
    s.parse().expect("restricted by value_parser")
}

fn config(cli: Cli) -> RunConfig {
    let kind = match &cli.command {
        Command::BuildMask { .. } => CommandKind::BuildMask,
        Command::Evaluate { .. } => CommandKind::Evaluate,
        Command::Merge { .. } => CommandKind::Merge,
        Command::Stats { .. } => CommandKind::Stats,
        Command::Validate { .. } => CommandKind::Validate,
    };
    let mut c = RunConfig::new(kind);
    c.jobs = cli.jobs;
    let set_merge = |c: &mut RunConfig, m: MergeArgs| {
        c.merge.cosine_threshold = m.cosine_threshold;
        c.merge.exclude_diagonal = m.exclude_diagonal;
    };
    match cli.command {
        Command::BuildMask { annotations, images, ocr_dir, ocr, out, threshold, overlay } => {
            c.annotations = Some(annotations);
            c.images = Some(images);
            c.ocr_dir = Some(ocr_dir);
            c.ocr_format = parse::<OcrFormat>(&ocr.ocr);
            c.output = Some(out);
            c.threshold.window = threshold.window;
            c.threshold.bias = threshold.bias;
            if threshold.invert_polarity {
                c.threshold.polarity = Polarity::LightOnDark;
            }
            c.overlay = overlay;
        }
        Command::Evaluate { gt, pred, out, missing_policy, aggregation, bootstrap, alpha, seed, merge } => {
            c.gt = Some(gt);
            c.predictions = Some(pred);
            c.output = out;
            c.missing_policy = parse::<MissingPolicy>(&missing_policy);
            c.bootstrap.aggregation = parse::<Aggregation>(&aggregation);
            c.bootstrap.replicates = bootstrap;
            c.bootstrap.alpha = alpha;
            c.bootstrap.seed = seed;
            set_merge(&mut c, merge);
        }
        Command::Merge { pred, out, gt, annotations, merge } => {
            c.predictions = Some(pred);
            c.output = Some(out);
            c.gt = gt;
            c.annotations = annotations;
            set_merge(&mut c, merge);
        }
        Command::Stats { annotations, ocr_dir, ocr, split, out } => {
            c.annotations = Some(annotations);
            c.ocr_dir = ocr_dir;
            c.ocr_format = parse::<OcrFormat>(&ocr.ocr);
            c.split = split;
            c.output = out;
        }
        Command::Validate { annotations, out } => {
            c.annotations = Some(annotations);
            c.output = out;
        }
    }
    c
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match commands::run(&config(cli)) {
        Ok(outcome) => {
            let _ = std::io::stdout().write_all(outcome.stdout.as_bytes());
            ExitCode::from(outcome.exit_code)
        }
        Err(e) => {
            eprintln!("segbite: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
