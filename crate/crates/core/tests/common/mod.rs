//! Synthetic corpora: COCO annotations, page images and PAGE-XML files built
//! from random column layouts.

#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use segbite::geometry::{BBox, Size};
use segbite::rasterize::LabelMap;

pub struct SyntheticRegion {
    pub id: u64,
    pub bbox: BBox,
    /// `title`, `text` or `page-number`.
    pub class: &'static str,
}

pub struct SyntheticPage {
    pub id: String,
    pub size: Size,
    pub regions: Vec<SyntheticRegion>,
    pub relations: Vec<(u64, u64)>,
    /// Textline rectangles.
    pub lines: Vec<BBox>,
    /// Dark rectangles drawn on a white page.
    pub ink: Vec<BBox>,
}

/// A page of `columns` columns, each holding a few stacked article blocks.
/// Blocks in the same column may continue the previous article, which makes
/// multi-box segments.
pub fn random_page(rng: &mut impl Rng, id: &str, size: Size, first_id: u64) -> SyntheticPage {
    let mut page = SyntheticPage {
        id: id.to_owned(),
        size,
        regions: Vec::new(),
        relations: Vec::new(),
        lines: Vec::new(),
        ink: Vec::new(),
    };
    let mut next = first_id;
    let margin = 10;
    let columns = rng.random_range(1..=4u32);
    let col_w = (size.width - 2 * margin) / columns;
    for c in 0..columns {
        let x0 = margin + c * col_w;
        let mut y = margin;
        let mut prev: Option<u64> = None;
        while y + 40 < size.height - margin {
            let h = rng.random_range(30..=(size.height / 3).max(31)).min(size.height - margin - y);
            let bbox = BBox::new(x0, y, col_w - 6, h).unwrap();
            let title = rng.random_bool(0.2);
            let region = SyntheticRegion {
                id: next,
                bbox,
                class: if title { "title" } else { "text" },
            };
            if let Some(p) = prev.filter(|_| rng.random_bool(0.4)) {
                page.relations.push((p, next));
            }
            prev = Some(next);
            next += 1;
            add_lines(rng, &mut page, bbox, if title { 14 } else { 9 });
            page.regions.push(region);
            y += h + rng.random_range(4..12);
        }
    }
    if size.width > 60 && size.height > 30 {
        let bbox = BBox::new(size.width / 2, size.height - margin + 1, 12, 8).unwrap();
        page.regions.push(SyntheticRegion {
            id: next,
            bbox,
            class: "page-number",
        });
        page.ink.push(BBox::new(bbox.x + 2, bbox.y + 1, 8, 6).unwrap());
    }
    page
}

fn add_lines(rng: &mut impl Rng, page: &mut SyntheticPage, region: BBox, line_h: u32) {
    let mut y = region.y + 2;
    while y + line_h + 2 < region.y + region.h {
        let line = BBox::new(region.x + 2, y, region.w - 4, line_h).unwrap();
        page.lines.push(line);
        // words as dark bars inside the line
        let mut x = line.x + 1;
        while x + 6 < line.x + line.w {
            let w = rng.random_range(3..20).min(line.x + line.w - x - 1);
            page.ink.push(BBox::new(x, y + 2, w, line_h - 4).unwrap());
            x += w + rng.random_range(2..6);
        }
        y += line_h + 3;
    }
}

pub struct CorpusPaths {
    pub coco: PathBuf,
    pub images: PathBuf,
    pub ocr: PathBuf,
}

pub fn coco_json(pages: &[SyntheticPage]) -> String {
    let mut images = Vec::new();
    let mut annotations = Vec::new();
    let mut relations = Vec::new();
    for (i, p) in pages.iter().enumerate() {
        images.push(serde_json::json!({
            "id": i + 1, "file_name": format!("{}.png", p.id),
            "width": p.size.width, "height": p.size.height
        }));
        for r in &p.regions {
            let cat = match r.class {
                "title" => 1,
                "text" => 2,
                _ => 3,
            };
            annotations.push(serde_json::json!({
                "id": r.id, "image_id": i + 1, "category_id": cat,
                "bbox": [r.bbox.x, r.bbox.y, r.bbox.w, r.bbox.h]
            }));
        }
        for (s, t) in &p.relations {
            relations.push(serde_json::json!({"source": s, "target": t}));
        }
    }
    serde_json::to_string_pretty(&serde_json::json!({
        "images": images,
        "annotations": annotations,
        "categories": [
            {"id": 1, "name": "title"}, {"id": 2, "name": "text"}, {"id": 3, "name": "page-number"}
        ],
        "relations": relations,
    }))
    .unwrap()
}

pub fn page_xml(page: &SyntheticPage) -> String {
    let mut lines = String::new();
    for (i, l) in page.lines.iter().enumerate() {
        let (x0, y0, x1, y1) = (l.x, l.y, l.x + l.w, l.y + l.h);
        let _ = write!(
            lines,
            r#"<TextLine id="l{i}"><Coords points="{x0},{y0} {x1},{y0} {x1},{y1} {x0},{y1}"/><TextEquiv conf="0.9"><Unicode>line {i}</Unicode></TextEquiv></TextLine>"#
        );
    }
    format!(
        r#"<?xml version="1.0" encoding="UTF-8"?>
<PcGts xmlns="http://schema.primaresearch.org/PAGE/gts/pagecontent/2019-07-15"><Page imageFilename="{}.png" imageWidth="{}" imageHeight="{}"><TextRegion id="r0"><Coords points="0,0 1,0 1,1"/>{lines}</TextRegion></Page></PcGts>
"#,
        page.id, page.size.width, page.size.height
    )
}

pub fn page_image(page: &SyntheticPage) -> image::GrayImage {
    let mut img = image::GrayImage::from_pixel(page.size.width, page.size.height, image::Luma([245]));
    for b in &page.ink {
        for y in b.y..(b.y + b.h).min(page.size.height) {
            for x in b.x..(b.x + b.w).min(page.size.width) {
                img.put_pixel(x, y, image::Luma([20]));
            }
        }
    }
    img
}

pub fn write_corpus(dir: &Path, pages: &[SyntheticPage]) -> CorpusPaths {
    let paths = CorpusPaths {
        coco: dir.join("annotations.json"),
        images: dir.join("images"),
        ocr: dir.join("pagexml"),
    };
    fs::create_dir_all(&paths.images).unwrap();
    fs::create_dir_all(&paths.ocr).unwrap();
    fs::write(&paths.coco, coco_json(pages)).unwrap();
    for p in pages {
        page_image(p)
            .save(paths.images.join(format!("{}.png", p.id)))
            .unwrap();
        fs::write(paths.ocr.join(format!("{}.xml", p.id)), page_xml(p)).unwrap();
    }
    paths
}

/// `count` random pages with globally unique region ids.
pub fn random_corpus(rng: &mut impl Rng, count: usize, size: Size) -> Vec<SyntheticPage> {
    let mut next = 1;
    (0..count)
        .map(|i| {
            let p = random_page(rng, &format!("page{i:03}"), size, next);
            next += p.regions.len() as u64 + 1;
            p
        })
        .collect()
}

/// A label map of `k` horizontal bands with every `stride`-th pixel left as
/// background.
pub fn banded_label_map(size: Size, k: u32, stride: usize) -> LabelMap {
    let n = size.pixel_count();
    let labels = (0..n)
        .map(|i| {
            if i % stride == 0 {
                0
            } else {
                let row = (i / size.width as usize) as u64;
                (row * k as u64 / size.height as u64) as u32 + 1
            }
        })
        .collect();
    LabelMap::new(size, labels).unwrap()
}
