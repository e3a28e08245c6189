use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use super::build_mask::read_ocr;
use super::{read, to_json, write, CommandError, Outcome, RunConfig, EXIT_OK};
use crate::formats::parse_coco_lenient;
use crate::segmodel::{drop_enclosed_titles, segments_from_relations, RegionClass};

pub const STATS_SCHEMA_VERSION: u32 = 1;

/// Summary of one per-page quantity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Distribution {
    pub count: usize,
    pub total: u64,
    pub min: Option<u64>,
    pub max: Option<u64>,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    /// Value to number of pages.
    pub histogram: BTreeMap<u64, usize>,
}

impl Distribution {
    pub fn from_values(values: &[u64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_unstable();
        let n = sorted.len();
        let total: u64 = sorted.iter().sum();
        let median = match n {
            0 => None,
            _ if n % 2 == 1 => Some(sorted[n / 2] as f64),
            _ => Some((sorted[n / 2 - 1] as f64 + sorted[n / 2] as f64) / 2.0),
        };
        let mut histogram = BTreeMap::new();
        for &v in &sorted {
            *histogram.entry(v).or_default() += 1;
        }
        Self {
            count: n,
            total,
            min: sorted.first().copied(),
            max: sorted.last().copied(),
            mean: (n > 0).then(|| total as f64 / n as f64),
            median,
            histogram,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub schema_version: u32,
    pub pages: usize,
    pub segments: u64,
    /// Pages per split; `all` when no split map was given.
    pub pages_by_split: BTreeMap<String, usize>,
    /// Split name to class name to annotated region count.
    pub regions: BTreeMap<String, BTreeMap<String, u64>>,
    /// Segments per page, counted after enclosed titles are dropped.
    pub segments_per_page: Distribution,
    pub regions_per_page: Distribution,
    /// Present when an OCR directory was given.
    pub textlines_per_page: Option<Distribution>,
    pub image_width: Distribution,
    pub image_height: Distribution,
    pub warnings: Vec<String>,
}

struct PageFacts {
    split: String,
    classes: BTreeMap<RegionClass, u64>,
    regions: u64,
    segments: Option<u64>,
    textlines: Option<u64>,
    warnings: Vec<String>,
}

pub(super) fn cmd_stats(config: &RunConfig) -> Result<Outcome, CommandError> {
    let ann = config.annotations.as_ref().expect("checked by RunConfig::check");
    let (doc, issues) = parse_coco_lenient(&read(ann)?).map_err(|e| CommandError::data(ann, e))?;
    let split: Option<BTreeMap<String, String>> = match &config.split {
        None => None,
        Some(p) => Some(serde_json::from_slice(&read(p)?).map_err(|e| CommandError::data(p, e))?),
    };
    let pages = doc.pages();

    let facts: Vec<PageFacts> = config.pool()?.install(|| {
        pages
            .par_iter()
            .map(|page| {
                let mut warnings = Vec::new();
                let mut classes = BTreeMap::new();
                for r in &page.regions {
                    *classes.entry(r.class).or_default() += 1;
                }
                let segments = match segments_from_relations(&drop_enclosed_titles(page)) {
                    Ok(s) => Some(s.len() as u64),
                    Err(e) => {
                        warnings.push(format!("{}: segments not counted: {e}", page.page_id));
                        None
                    }
                };
                let textlines = match &config.ocr_dir {
                    None => None,
                    Some(dir) => {
                        let path = dir.join(format!("{}.xml", page.page_id));
                        if path.is_file() {
                            match read_ocr(&read(&path)?, config.ocr_format) {
                                Ok(p) => Some(p.items.len() as u64),
                                Err(e) => {
                                    warnings.push(format!("{}: {e}", path.display()));
                                    None
                                }
                            }
                        } else {
                            warnings.push(format!("{}: no OCR file", page.page_id));
                            None
                        }
                    }
                };
                let split = match &split {
                    None => "all".to_owned(),
                    Some(m) => m.get(&page.page_id).cloned().unwrap_or_else(|| "unassigned".into()),
                };
                Ok(PageFacts {
                    split,
                    classes,
                    regions: page.regions.len() as u64,
                    segments,
                    textlines,
                    warnings,
                })
            })
            .collect::<Result<_, CommandError>>()
    })?;

    let mut regions: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
    let mut pages_by_split: BTreeMap<String, usize> = BTreeMap::new();
    let mut warnings: Vec<String> = issues.iter().map(|i| i.to_string()).collect();
    for f in &facts {
        *pages_by_split.entry(f.split.clone()).or_default() += 1;
        let row = regions.entry(f.split.clone()).or_default();
        for class in [RegionClass::Title, RegionClass::Text, RegionClass::PageNumber] {
            *row.entry(class.name().to_owned()).or_default() += f.classes.get(&class).copied().unwrap_or(0);
        }
        warnings.extend(f.warnings.iter().cloned());
    }
    let segs: Vec<u64> = facts.iter().filter_map(|f| f.segments).collect();
    let report = StatsReport {
        schema_version: STATS_SCHEMA_VERSION,
        pages: pages.len(),
        segments: segs.iter().sum(),
        pages_by_split,
        regions,
        segments_per_page: Distribution::from_values(&segs),
        regions_per_page: Distribution::from_values(&facts.iter().map(|f| f.regions).collect::<Vec<_>>()),
        textlines_per_page: config.ocr_dir.as_ref().map(|_| {
            Distribution::from_values(&facts.iter().filter_map(|f| f.textlines).collect::<Vec<_>>())
        }),
        image_width: Distribution::from_values(&pages.iter().map(|p| p.size.width as u64).collect::<Vec<_>>()),
        image_height: Distribution::from_values(&pages.iter().map(|p| p.size.height as u64).collect::<Vec<_>>()),
        warnings,
    };
    if let Some(out) = &config.output {
        write(out, to_json(&report).as_bytes())?;
    }
    Ok(Outcome {
        stdout: table(&report),
        exit_code: EXIT_OK,
    })
}

fn table(r: &StatsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "pages {}  segments {}", r.pages, r.segments);
    let _ = writeln!(out, "\n{:<12} {:>7} {:>10} {:>10} {:>12}", "split", "pages", "title", "text", "page-number");
    for (split, row) in &r.regions {
        let get = |k: &str| row.get(k).copied().unwrap_or(0);
        let _ = writeln!(
            out,
            "{:<12} {:>7} {:>10} {:>10} {:>12}",
            split,
            r.pages_by_split.get(split).copied().unwrap_or(0),
            get("title"),
            get("text"),
            get("page-number")
        );
    }
    let _ = writeln!(out, "\n{:<20} {:>7} {:>8} {:>8} {:>10} {:>8}", "per page", "pages", "min", "max", "mean", "median");
    let mut dist = |name: &str, d: &Distribution| {
        let opt = |v: Option<u64>| v.map_or("-".to_owned(), |v| v.to_string());
        let optf = |v: Option<f64>| v.map_or("-".to_owned(), |v| format!("{v:.2}"));
        let _ = writeln!(
            out,
            "{:<20} {:>7} {:>8} {:>8} {:>10} {:>8}",
            name,
            d.count,
            opt(d.min),
            opt(d.max),
            optf(d.mean),
            optf(d.median)
        );
    };
    dist("segments", &r.segments_per_page);
    dist("regions", &r.regions_per_page);
    if let Some(t) = &r.textlines_per_page {
        dist("textlines", t);
    }
    dist("image width", &r.image_width);
    dist("image height", &r.image_height);
    if !r.warnings.is_empty() {
        let _ = writeln!(out, "\n{} warning(s)", r.warnings.len());
        for w in &r.warnings {
            let _ = writeln!(out, "  {w}");
        }
    }
    out
}
