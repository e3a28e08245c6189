//! Ground-truth pixel segmentation.
//!
//! A pixel ends up with segment label `k` when it is ink according to the
//! adaptive threshold, lies inside an OCR textline polygon, and is covered by
//! regions of segment `k` and of no other segment.

use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{BBox, Polygon, Size};
use crate::segmodel::{AnnotatedPage, RegionId, Segmentation};

pub const DEFAULT_WINDOW: u32 = 301;
pub const DEFAULT_BIAS: f64 = 10.0;

const CONFLICT: u32 = u32::MAX;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RasterError {
    #[error("threshold window must be odd and at least 3, got {0}")]
    BadWindow(u32),
    #[error("size mismatch: expected {expected:?}, got {actual:?}")]
    SizeMismatch { expected: Size, actual: Size },
    #[error("pixel buffer holds {actual} values, {expected} expected")]
    BufferLength { expected: usize, actual: usize },
    #[error("segment {segment} references region {region} which is not on the page")]
    UnknownRegion { segment: u32, region: RegionId },
    #[error("label {0} is reserved")]
    ReservedLabel(u32),
}

/// 8-bit luminance image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    size: Size,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(size: Size, pixels: Vec<u8>) -> Result<Self, RasterError> {
        check_len(size, pixels.len())?;
        Ok(Self { size, pixels })
    }

    pub fn filled(size: Size, value: u8) -> Self {
        Self {
            size,
            pixels: vec![value; size.pixel_count()],
        }
    }

    /// Luminance from any decoded image; color uses Rec. 601 weights.
    pub fn from_dynamic(img: &image::DynamicImage) -> Self {
        let size = Size {
            width: img.width().max(1),
            height: img.height().max(1),
        };
        let pixels = match img {
            image::DynamicImage::ImageLuma8(g) => g.as_raw().clone(),
            image::DynamicImage::ImageLumaA8(g) => g.pixels().map(|p| p[0]).collect(),
            image::DynamicImage::ImageLuma16(g) => g.pixels().map(|p| (p[0] >> 8) as u8).collect(),
            other => other
                .to_rgb8()
                .pixels()
                .map(|p| rec601(p[0], p[1], p[2]))
                .collect(),
        };
        Self { size, pixels }
    }

    pub fn size(&self) -> Size {
        self.size
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[y as usize * self.size.width as usize + x as usize]
    }
}

/// Rec. 601 luma, rounded to nearest.
pub fn rec601(r: u8, g: u8, b: u8) -> u8 {
    ((299 * r as u32 + 587 * g as u32 + 114 * b as u32 + 500) / 1000) as u8
}

fn check_len(size: Size, len: usize) -> Result<(), RasterError> {
    if len != size.pixel_count() {
        return Err(RasterError::BufferLength {
            expected: size.pixel_count(),
            actual: len,
        });
    }
    Ok(())
}

/// Foreground bitmap, row-major; `true` is ink.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    size: Size,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(size: Size, bits: Vec<bool>) -> Result<Self, RasterError> {
        check_len(size, bits.len())?;
        Ok(Self { size, bits })
    }

    pub fn filled(size: Size, value: bool) -> Self {
        Self {
            size,
            bits: vec![value; size.pixel_count()],
        }
    }

    pub fn size(&self) -> Size {
        self.size
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn bits_mut(&mut self) -> &mut [bool] {
        &mut self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Per-pixel segment labels; 0 is background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    size: Size,
    labels: Vec<u32>,
}

impl LabelMap {
    pub fn new(size: Size, labels: Vec<u32>) -> Result<Self, RasterError> {
        check_len(size, labels.len())?;
        if labels.contains(&CONFLICT) {
            return Err(RasterError::ReservedLabel(CONFLICT));
        }
        Ok(Self { size, labels })
    }

    pub fn background(size: Size) -> Self {
        Self {
            size,
            labels: vec![0; size.pixel_count()],
        }
    }

    pub fn size(&self) -> Size {
        self.size
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn get(&self, x: u32, y: u32) -> u32 {
        self.labels[y as usize * self.size.width as usize + x as usize]
    }

    pub fn foreground_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l != 0).count()
    }

    pub fn max_label(&self) -> u32 {
        self.labels.iter().copied().max().unwrap_or(0)
    }
}

/// Which side of the local mean counts as ink.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Polarity {
    /// Dark ink on a light background.
    #[default]
    DarkOnLight,
    LightOnDark,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdParams {
    pub window: u32,
    pub bias: f64,
    pub polarity: Polarity,
}

impl Default for ThresholdParams {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
            bias: DEFAULT_BIAS,
            polarity: Polarity::DarkOnLight,
        }
    }
}

/// Local-mean adaptive threshold over a `window x window` neighborhood,
/// clamped at the image border.
///
/// With `sum` and `count` taken over the clamped window, a pixel `v` is ink
/// iff `(v + bias) * count < sum` (dark on light) or `(v - bias) * count > sum`
/// (light on dark), i.e. `v < mean - bias` / `v > mean + bias` without the
/// division. Neighborhood sums come from an integral image, so the cost does
/// not depend on the window.
pub fn adaptive_threshold(img: &GrayImage, params: ThresholdParams) -> Result<BinaryMask, RasterError> {
    let window = params.window;
    if window < 3 || window.is_multiple_of(2) {
        return Err(RasterError::BadWindow(window));
    }
    let (w, h) = (img.size.width as usize, img.size.height as usize);
    let stride = w + 1;
    let mut integral = vec![0u64; stride * (h + 1)];
    for y in 0..h {
        let mut row_sum = 0u64;
        for x in 0..w {
            row_sum += img.pixels[y * w + x] as u64;
            integral[(y + 1) * stride + x + 1] = integral[y * stride + x + 1] + row_sum;
        }
    }
    let radius = (window / 2) as usize;
    let mut bits = vec![false; w * h];
    bits.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let y0 = y.saturating_sub(radius);
        let y1 = (y + radius + 1).min(h);
        for (x, bit) in row.iter_mut().enumerate() {
            let x0 = x.saturating_sub(radius);
            let x1 = (x + radius + 1).min(w);
            let sum = integral[y1 * stride + x1] + integral[y0 * stride + x0]
                - integral[y0 * stride + x1]
                - integral[y1 * stride + x0];
            let count = ((y1 - y0) * (x1 - x0)) as u64;
            *bit = is_ink(img.pixels[y * w + x], sum, count, params);
        }
    });
    Ok(BinaryMask {
        size: img.size,
        bits,
    })
}

/// Decision rule shared by every thresholding path.
pub fn is_ink(value: u8, sum: u64, count: u64, params: ThresholdParams) -> bool {
    let (v, s, n) = (value as f64, sum as f64, count as f64);
    match params.polarity {
        Polarity::DarkOnLight => (v + params.bias) * n < s,
        Polarity::LightOnDark => (v - params.bias) * n > s,
    }
}

/// Per-pixel segment claims: 0 unclaimed, `CONFLICT` for two segments.
fn claim_map(size: Size, groups: &[(u32, Vec<BBox>)]) -> Vec<u32> {
    let width = size.width as usize;
    let mut claims = vec![0u32; size.pixel_count()];
    for (label, boxes) in groups {
        for b in boxes {
            let Some(b) = b.clip(size) else { continue };
            for y in b.y..b.y + b.h {
                let row = &mut claims[y as usize * width..][..width];
                for c in &mut row[b.x as usize..(b.x + b.w) as usize] {
                    *c = match *c {
                        0 => *label,
                        existing if existing == *label => existing,
                        _ => CONFLICT,
                    };
                }
            }
        }
    }
    claims
}

fn polygon_mask(size: Size, polygons: &[&Polygon]) -> Vec<bool> {
    let width = size.width as usize;
    let mut inside = vec![false; size.pixel_count()];
    for poly in polygons {
        poly.for_each_span(size, |row, first, last| {
            let start = row as usize * width;
            inside[start + first as usize..=start + last as usize].fill(true);
        });
    }
    inside
}

/// Labels the pixels claimed by exactly one group's boxes, optionally
/// restricted to ink pixels and to the union of `lines`.
pub fn label_regions(
    size: Size,
    groups: &[(u32, Vec<BBox>)],
    mask: Option<&BinaryMask>,
    lines: Option<&[&Polygon]>,
) -> Result<LabelMap, RasterError> {
    if let Some(m) = mask {
        if m.size != size {
            return Err(RasterError::SizeMismatch {
                expected: size,
                actual: m.size,
            });
        }
    }
    if let Some((label, _)) = groups.iter().find(|(l, _)| *l == 0 || *l == CONFLICT) {
        return Err(RasterError::ReservedLabel(*label));
    }
    let mut labels = claim_map(size, groups);
    let in_line = lines.map(|l| polygon_mask(size, l));
    for (i, label) in labels.iter_mut().enumerate() {
        let keep = *label != CONFLICT
            && mask.is_none_or(|m| m.bits[i])
            && in_line.as_ref().is_none_or(|l| l[i]);
        if !keep {
            *label = 0;
        }
    }
    Ok(LabelMap { size, labels })
}

/// Ground-truth label map for one page. Only regions that belong to a segment
/// contribute, so page numbers and dropped titles leave no pixels.
pub fn build_label_map(
    page: &AnnotatedPage,
    seg: &Segmentation,
    lines: &[Polygon],
    mask: &BinaryMask,
) -> Result<LabelMap, RasterError> {
    if mask.size != page.size {
        return Err(RasterError::SizeMismatch {
            expected: page.size,
            actual: mask.size,
        });
    }
    let mut groups = Vec::with_capacity(seg.segments.len());
    for s in &seg.segments {
        let boxes = s
            .members
            .iter()
            .map(|&id| {
                page.region(id)
                    .map(|r| r.bbox)
                    .ok_or(RasterError::UnknownRegion {
                        segment: s.id,
                        region: id,
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        groups.push((s.id, boxes));
    }
    let lines: Vec<&Polygon> = lines.iter().collect();
    label_regions(page.size, &groups, Some(mask), Some(&lines))
}

/// Predicted label map from detection boxes grouped by a segmentation whose
/// members are box indices. Pixels claimed by two segments stay background.
pub fn rasterize_detections(
    size: Size,
    boxes: &[BBox],
    seg: &Segmentation,
) -> Result<LabelMap, RasterError> {
    let groups: Vec<(u32, Vec<BBox>)> = seg
        .segments
        .iter()
        .map(|s| {
            s.members
                .iter()
                .map(|&i| {
                    boxes.get(i as usize).copied().ok_or(RasterError::UnknownRegion {
                        segment: s.id,
                        region: i,
                    })
                })
                .collect::<Result<Vec<_>, _>>()
                .map(|b| (s.id, b))
        })
        .collect::<Result<_, _>>()?;
    label_regions(size, &groups, None, None)
}

/// Pixel count per nonzero label.
pub fn foreground_census(map: &LabelMap) -> BTreeMap<u32, u64> {
    let mut hist = BTreeMap::new();
    for &l in map.labels.iter().filter(|&&l| l != 0) {
        *hist.entry(l).or_default() += 1;
    }
    hist
}
