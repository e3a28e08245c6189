use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::{create_dir, files_by_stem, read, to_json, write, CommandError, Outcome, RunConfig};
use super::EXIT_OK;
use crate::formats::{parse_coco, parse_prediction, read_label_map, read_label_map_sized, write_label_map};
use crate::geometry::Size;
use crate::merge::{merge_prediction, MergeMethod, MergeOptions};
use crate::metrics::{evaluate_page, EvalReport, PageEntry, ReportConfig};
use crate::rasterize::{rasterize_detections, LabelMap};
use crate::segmodel::Segmentation;

enum Source<'a> {
    LabelMap(&'a Path),
    PredictionFile(&'a Path),
    Missing,
}

/// Segments of one prediction file and the label map they rasterize to.
fn merged_map(
    path: &Path,
    size: Size,
    options: MergeOptions,
) -> Result<(Segmentation, MergeMethod, LabelMap), CommandError> {
    let pred = parse_prediction(&read(path)?).map_err(|e| CommandError::data(path, e))?;
    let (seg, method) = merge_prediction(&pred, options).map_err(|e| CommandError::data(path, e))?;
    let map = rasterize_detections(size, &pred.boxes, &seg).map_err(|e| CommandError::data(path, e))?;
    Ok((seg, method, map))
}

pub(super) fn cmd_evaluate(config: &RunConfig) -> Result<Outcome, CommandError> {
    let (Some(gt_dir), Some(pred_dir)) = (&config.gt, &config.predictions) else {
        unreachable!("checked by RunConfig::check")
    };
    let gt = files_by_stem(gt_dir, "png")?;
    let pred_maps = files_by_stem(pred_dir, "png")?;
    let pred_files = files_by_stem(pred_dir, "json")?;
    let overlap = gt
        .keys()
        .filter(|k| pred_maps.contains_key(*k) || pred_files.contains_key(*k))
        .count();
    if overlap == 0 {
        return Err(CommandError::Data(format!(
            "no page id in {} matches a ground-truth page in {}",
            pred_dir.display(),
            gt_dir.display()
        )));
    }
    let orphans = pred_maps
        .keys()
        .chain(pred_files.keys())
        .filter(|k| !gt.contains_key(*k))
        .collect::<std::collections::BTreeSet<_>>()
        .len();

    let jobs: Vec<(&String, &PathBuf, Source)> = gt
        .iter()
        .map(|(id, path)| {
            let source = match (pred_maps.get(id), pred_files.get(id)) {
                (Some(p), _) => Source::LabelMap(p),
                (None, Some(p)) => Source::PredictionFile(p),
                (None, None) => Source::Missing,
            };
            (id, path, source)
        })
        .collect();

    let entries: Vec<PageEntry> = config.pool()?.install(|| {
        jobs.par_iter()
            .map(|(id, gt_path, source)| {
                let gt_map = read_label_map(&read(gt_path)?).map_err(|e| CommandError::data(gt_path, e))?;
                let size = gt_map.size();
                let (pred, label) = match source {
                    Source::LabelMap(p) => (
                        read_label_map_sized(&read(p)?, size).map_err(|e| CommandError::data(p, e))?,
                        "label-map".to_owned(),
                    ),
                    Source::PredictionFile(p) => {
                        let (_, method, map) = merged_map(p, size, config.merge)?;
                        (map, format!("prediction-file:{}", method_name(method)))
                    }
                    Source::Missing => (LabelMap::background(size), "missing".to_owned()),
                };
                let score = evaluate_page(&gt_map, &pred, config.missing_policy)
                    .map_err(|e| CommandError::Data(format!("{id}: {e}")))?;
                Ok(PageEntry::new(id.as_str(), score, label))
            })
            .collect::<Result<_, CommandError>>()
    })?;

    let report = EvalReport::build(
        entries,
        ReportConfig {
            missing_policy: config.missing_policy,
            bootstrap: config.bootstrap,
        },
    )
    .map_err(|e| CommandError::Data(e.to_string()))?;
    if let Some(out) = &config.output {
        write(out, report.to_json().as_bytes())?;
    }
    let mut text = report.to_table();
    if orphans > 0 {
        let _ = writeln!(text, "ignored {orphans} prediction(s) without ground truth");
    }
    Ok(Outcome {
        stdout: text,
        exit_code: EXIT_OK,
    })
}

fn method_name(m: MergeMethod) -> &'static str {
    match m {
        MergeMethod::Relations => "relations",
        MergeMethod::Scores => "scores",
        MergeMethod::Embeddings => "embeddings",
        MergeMethod::Detector => "detector",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MergedPage {
    pub page_id: String,
    pub method: MergeMethod,
    /// Box indices per segment; segment `k` (0-based) has label `k + 1`.
    pub segments: Vec<Vec<u64>>,
    pub foreground: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MergeSummary {
    pub schema_version: u32,
    pub cosine_threshold: f64,
    pub exclude_diagonal: bool,
    pub pages: Vec<MergedPage>,
}

pub(super) fn cmd_merge(config: &RunConfig) -> Result<Outcome, CommandError> {
    let (Some(pred_dir), Some(out)) = (&config.predictions, &config.output) else {
        unreachable!("checked by RunConfig::check")
    };
    let sizes = page_sizes(config)?;
    let files = files_by_stem(pred_dir, "json")?;
    create_dir(out)?;
    let jobs: Vec<(&String, &PathBuf, Option<Size>)> = files
        .iter()
        .map(|(id, p)| (id, p, sizes.get(id).copied()))
        .collect();
    let missing: Vec<&str> = jobs
        .iter()
        .filter(|j| j.2.is_none())
        .map(|j| j.0.as_str())
        .collect();

    let pages: Vec<MergedPage> = config.pool()?.install(|| {
        jobs.par_iter()
            .filter_map(|&(id, path, size)| size.map(|s| (id, path, s)))
            .map(|(id, path, size)| {
                let (seg, method, map) = merged_map(path, size, config.merge)?;
                let png = write_label_map(&map).map_err(|e| CommandError::data(path, e))?;
                write(&out.join(format!("{id}.png")), &png)?;
                Ok(MergedPage {
                    page_id: id.clone(),
                    method,
                    segments: seg.segments.into_iter().map(|s| s.members).collect(),
                    foreground: map.foreground_count() as u64,
                })
            })
            .collect::<Result<_, CommandError>>()
    })?;
    let summary = MergeSummary {
        schema_version: 1,
        cosine_threshold: config.merge.cosine_threshold,
        exclude_diagonal: config.merge.exclude_diagonal,
        pages,
    };
    write(&out.join("segments.json"), to_json(&summary).as_bytes())?;

    let mut text = String::new();
    for id in &missing {
        let _ = writeln!(text, "{id}: no page size known, skipped");
    }
    let _ = writeln!(text, "{} label maps written, {} skipped", summary.pages.len(), missing.len());
    Ok(Outcome {
        stdout: text,
        exit_code: if missing.is_empty() { EXIT_OK } else { super::EXIT_FAILURE },
    })
}

/// Page sizes from ground-truth label maps, else from the annotations.
fn page_sizes(config: &RunConfig) -> Result<BTreeMap<String, Size>, CommandError> {
    if let Some(dir) = &config.gt {
        return files_by_stem(dir, "png")?
            .into_iter()
            .map(|(id, p)| {
                let map = read_label_map(&read(&p)?).map_err(|e| CommandError::data(&p, e))?;
                Ok((id, map.size()))
            })
            .collect();
    }
    let ann = config.annotations.as_ref().expect("checked by RunConfig::check");
    let doc = parse_coco(&read(ann)?).map_err(|e| CommandError::data(ann, e))?;
    Ok(doc.images.iter().map(|img| (img.page_id(), img.size)).collect())
}
