//! Geometric node and edge features for region-graph models.
//!
//! Layout version 1. Node features, for a box `(x, y, w, h)` on a page of
//! width `W` and height `H`, with `cx = x + w/2`, `cy = y + h/2`,
//! `r = x + w`, `b = y + h`:
//!
//! | index  | feature |
//! |--------|---------|
//! | 0..14  | `x, y, w, h, cx, cy, x, y, r, y, r, b, x, b` (position, size, center, corners TL TR BR BL) |
//! | 14..28 | the same 14 values with x-like entries divided by `W` and y-like entries by `H` |
//! | 28     | aspect ratio `w / h` |
//!
//! Edge features for an unordered pair `i < j`, with `dx = cx_j - cx_i`,
//! `dy = cy_j - cy_i`, `D = sqrt(W² + H²)`, and `gx`, `gy` the gaps between
//! the closest edges on each axis (0 when the projections overlap):
//!
//! | index | feature |
//! |-------|---------|
//! | 0..3  | `dx, dy, sqrt(dx² + dy²)` |
//! | 3..6  | `dx / W, dy / H, sqrt(dx² + dy²) / D` |
//! | 6..8  | `gx, gy` |
//! | 8..10 | `gx / W, gy / H` |
//! | 10    | `sqrt(gx² + gy²) / D` |
//! | 11    | external text similarity, 0 when not supplied |

use super::MergeError;
use crate::geometry::{BBox, Size};

pub const NODE_FEATURES: usize = 29;
pub const EDGE_FEATURES: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeFeatures {
    pub source: usize,
    pub target: usize,
    pub values: [f64; EDGE_FEATURES],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    pub nodes: Vec<[f64; NODE_FEATURES]>,
    pub edges: Vec<EdgeFeatures>,
}

fn node_features(b: &BBox, page: Size) -> [f64; NODE_FEATURES] {
    let (x, y, w, h) = (b.x as f64, b.y as f64, b.w as f64, b.h as f64);
    let (cx, cy) = b.center();
    let (r, bt) = (x + w, y + h);
    let abs = [x, y, w, h, cx, cy, x, y, r, y, r, bt, x, bt];
    let (pw, ph) = (page.width as f64, page.height as f64);
    let mut out = [0.0; NODE_FEATURES];
    out[..14].copy_from_slice(&abs);
    for (k, v) in abs.iter().enumerate() {
        // even slots hold x-like values, odd slots y-like ones
        out[14 + k] = v / if k % 2 == 0 { pw } else { ph };
    }
    out[28] = if h > 0.0 { w / h } else { 0.0 };
    out
}

fn gap(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (a0.max(b0) - a1.min(b1)).max(0.0)
}

/// Node features for every box and edge features for every unordered pair.
/// `text_similarity`, when given, must be `n x n`; entry `[i][j]` fills the
/// last edge column of pair `(i, j)`.
pub fn extract_features(
    boxes: &[BBox],
    page: Size,
    text_similarity: Option<&[Vec<f64>]>,
) -> Result<Features, MergeError> {
    let n = boxes.len();
    if let Some(t) = text_similarity {
        if t.len() != n || t.iter().any(|r| r.len() != n) {
            return Err(MergeError::TextSimilarityShape(n));
        }
    }
    let (pw, ph) = (page.width as f64, page.height as f64);
    let diag = pw.hypot(ph);
    let mut edges = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let (a, c) = (&boxes[i], &boxes[j]);
            let (acx, acy) = a.center();
            let (ccx, ccy) = c.center();
            let (dx, dy) = (ccx - acx, ccy - acy);
            let dist = dx.hypot(dy);
            let gx = gap(a.x as f64, a.right() as f64, c.x as f64, c.right() as f64);
            let gy = gap(a.y as f64, a.bottom() as f64, c.y as f64, c.bottom() as f64);
            let text = text_similarity.map_or(0.0, |t| t[i][j]);
            edges.push(EdgeFeatures {
                source: i,
                target: j,
                values: [
                    dx,
                    dy,
                    dist,
                    dx / pw,
                    dy / ph,
                    dist / diag,
                    gx,
                    gy,
                    gx / pw,
                    gy / ph,
                    gx.hypot(gy) / diag,
                    text,
                ],
            });
        }
    }
    Ok(Features {
        nodes: boxes.iter().map(|b| node_features(b, page)).collect(),
        edges,
    })
}

/// Per-column mean and population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ColumnStats {
    pub fn fit<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let width = rows.first().map_or(0, |r| r.as_ref().len());
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; width];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r.as_ref()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; width];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r.as_ref()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        Self {
            mean,
            std: var.into_iter().map(|s| (s / n).sqrt()).collect(),
        }
    }
}

/// `(x - mean) / std` elementwise, row by row.
pub fn zscore<R: AsRef<[f64]>>(rows: &[R], stats: &ColumnStats) -> Result<Vec<Vec<f64>>, MergeError> {
    if stats.mean.len() != stats.std.len() {
        return Err(MergeError::FeatureWidth {
            expected: stats.mean.len(),
            found: stats.std.len(),
        });
    }
    if let Some(col) = stats.std.iter().position(|&s| s.is_nan() || s <= 0.0) {
        return Err(MergeError::ZeroStd(col));
    }
    rows.iter()
        .map(|r| {
            let r = r.as_ref();
            if r.len() != stats.mean.len() {
                return Err(MergeError::FeatureWidth {
                    expected: stats.mean.len(),
                    found: r.len(),
                });
            }
            Ok(r.iter()
                .zip(&stats.mean)
                .zip(&stats.std)
                .map(|((x, m), s)| (x - m) / s)
                .collect())
        })
        .collect()
}
