use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::{create_dir, read, to_json, write, CommandError, OcrFormat, Outcome, RunConfig};
use super::{EXIT_FAILURE, EXIT_OK};
use crate::formats::{parse_alto, parse_coco, parse_pagexml, write_label_map, FormatError, Parsed};
use crate::geometry::Polygon;
use crate::rasterize::{adaptive_threshold, build_label_map, GrayImage, LabelMap, Polarity};
use crate::segmodel::{segment_page, AnnotatedPage};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PageStatus {
    Ok,
    /// A companion file (image or OCR) is missing.
    Skipped,
    /// Inputs exist but could not be turned into a label map.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestRow {
    pub page_id: String,
    pub status: PageStatus,
    pub foreground: Option<u64>,
    pub segments: Option<usize>,
    pub textlines: Option<usize>,
    pub warnings: Vec<String>,
    pub error: Option<String>,
}

impl ManifestRow {
    fn problem(page_id: &str, status: PageStatus, error: String) -> Self {
        Self {
            page_id: page_id.to_owned(),
            status,
            foreground: None,
            segments: None,
            textlines: None,
            warnings: Vec::new(),
            error: Some(error),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub window: u32,
    pub bias: f64,
    pub inverted_polarity: bool,
    pub ocr: OcrFormat,
    pub pages: Vec<ManifestRow>,
}

/// Outline polygons from one OCR file: textlines for PAGE-XML, words for ALTO.
pub(super) fn read_ocr(bytes: &[u8], format: OcrFormat) -> Result<Parsed<Polygon>, FormatError> {
    Ok(match format {
        OcrFormat::PageXml => {
            let p = parse_pagexml(bytes)?;
            Parsed {
                items: p.items.into_iter().map(|l| l.polygon).collect(),
                warnings: p.warnings,
            }
        }
        OcrFormat::Alto => {
            let p = parse_alto(bytes)?;
            Parsed {
                items: p.items.into_iter().map(|w| w.polygon).collect(),
                warnings: p.warnings,
            }
        }
    })
}

pub(super) fn cmd_build_mask(config: &RunConfig) -> Result<Outcome, CommandError> {
    let (Some(ann), Some(images), Some(ocr), Some(out)) = (
        &config.annotations,
        &config.images,
        &config.ocr_dir,
        &config.output,
    ) else {
        unreachable!("checked by RunConfig::check")
    };
    let doc = parse_coco(&read(ann)?).map_err(|e| CommandError::data(ann, e))?;
    create_dir(out)?;
    if config.overlay {
        create_dir(&out.join("overlays"))?;
    }

    let pages = doc.pages();
    let mut seen = BTreeSet::new();
    let jobs: Vec<(&AnnotatedPage, &str, bool)> = pages
        .iter()
        .zip(&doc.images)
        .map(|(p, img)| (p, img.file_name.as_str(), seen.insert(p.page_id.clone())))
        .collect();

    let mut rows: Vec<ManifestRow> = config.pool()?.install(|| {
        jobs.par_iter()
            .map(|&(page, file_name, first)| {
                if !first {
                    return Ok(ManifestRow::problem(
                        &page.page_id,
                        PageStatus::Failed,
                        "another image has the same page id".into(),
                    ));
                }
                build_page(config, page, &image_path(images, file_name), ocr, out)
            })
            .collect::<Result<_, CommandError>>()
    })?;
    rows.sort_by(|a, b| a.page_id.cmp(&b.page_id));

    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        window: config.threshold.window,
        bias: config.threshold.bias,
        inverted_polarity: config.threshold.polarity == Polarity::LightOnDark,
        ocr: config.ocr_format,
        pages: rows,
    };
    write(&out.join("manifest.json"), to_json(&manifest).as_bytes())?;

    let count = |s| manifest.pages.iter().filter(|r| r.status == s).count();
    let failed = count(PageStatus::Failed);
    let mut text = String::new();
    for r in &manifest.pages {
        if let Some(e) = &r.error {
            let _ = writeln!(text, "{}: {:?}: {e}", r.page_id, r.status);
        }
    }
    let _ = writeln!(
        text,
        "{} label maps written, {} skipped, {failed} failed",
        count(PageStatus::Ok),
        count(PageStatus::Skipped)
    );
    Ok(Outcome {
        stdout: text,
        exit_code: if failed > 0 { EXIT_FAILURE } else { EXIT_OK },
    })
}

/// `file_name` under `dir`, falling back to its bare name.
fn image_path(dir: &Path, file_name: &str) -> PathBuf {
    let direct = dir.join(file_name);
    if direct.is_file() {
        return direct;
    }
    match Path::new(file_name).file_name() {
        Some(base) => dir.join(base),
        None => direct,
    }
}

fn build_page(
    config: &RunConfig,
    page: &AnnotatedPage,
    image: &Path,
    ocr_dir: &Path,
    out: &Path,
) -> Result<ManifestRow, CommandError> {
    let id = page.page_id.as_str();
    let ocr_path = ocr_dir.join(format!("{id}.xml"));
    for (path, what) in [(image, "image"), (ocr_path.as_path(), "OCR file")] {
        if !path.is_file() {
            let msg = format!("missing {what} {}", path.display());
            return Ok(ManifestRow::problem(id, PageStatus::Skipped, msg));
        }
    }
    let failed = |msg: String| Ok(ManifestRow::problem(id, PageStatus::Failed, msg));

    let decoded = match image::load_from_memory(&read(image)?) {
        Ok(img) => GrayImage::from_dynamic(&img),
        Err(e) => return failed(format!("{}: {e}", image.display())),
    };
    if decoded.size() != page.size {
        let (s, a) = (page.size, decoded.size());
        return failed(format!(
            "image is {}x{} but annotations say {}x{}",
            a.width, a.height, s.width, s.height
        ));
    }
    let lines = match read_ocr(&read(&ocr_path)?, config.ocr_format) {
        Ok(l) => l,
        Err(e) => return failed(format!("{}: {e}", ocr_path.display())),
    };
    let (kept, seg) = match segment_page(page) {
        Ok(s) => s,
        Err(e) => return failed(e.to_string()),
    };
    let mask = adaptive_threshold(&decoded, config.threshold)
        .map_err(|e| CommandError::Usage(e.to_string()))?;
    let map = match build_label_map(&kept, &seg, &lines.items, &mask) {
        Ok(m) => m,
        Err(e) => return failed(e.to_string()),
    };
    let png = match write_label_map(&map) {
        Ok(b) => b,
        Err(e) => return failed(e.to_string()),
    };
    write(&out.join(format!("{id}.png")), &png)?;
    if config.overlay {
        write(&out.join("overlays").join(format!("{id}.png")), &overlay(&decoded, &map))?;
    }
    Ok(ManifestRow {
        page_id: id.to_owned(),
        status: PageStatus::Ok,
        foreground: Some(map.foreground_count() as u64),
        segments: Some(seg.len()),
        textlines: Some(lines.items.len()),
        warnings: lines.warnings,
        error: None,
    })
}

fn label_color(label: u32) -> [u8; 3] {
    // spread hues with the golden-ratio step
    let h = (label as f64 * 0.618_033_988_75).fract() * 6.0;
    let x = 1.0 - (h % 2.0 - 1.0).abs();
    let (r, g, b) = match h as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    [(r * 255.0) as u8, (g * 255.0) as u8, (b * 255.0) as u8]
}

/// The page in gray with labeled pixels tinted by segment.
fn overlay(gray: &GrayImage, map: &LabelMap) -> Vec<u8> {
    let size = gray.size();
    let mut rgb = image::RgbImage::new(size.width, size.height);
    for (i, px) in rgb.pixels_mut().enumerate() {
        let v = gray.pixels()[i];
        px.0 = match map.labels()[i] {
            0 => [v / 2 + 128; 3],
            l => label_color(l),
        };
    }
    let mut bytes = Vec::new();
    rgb.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)
        .expect("encoding to memory does not fail");
    bytes
}
