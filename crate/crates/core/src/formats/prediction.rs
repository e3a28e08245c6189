//! Per-page output of an external layout model.
//!
//! ```json
//! {"page_id": "p1", "boxes": [[x, y, w, h], ...], "classes": ["text", ...],
//!  "relations": [[i, j], ...], "scores": [[...], ...], "embeddings": [[...], ...]}
//! ```
//!
//! All keys but `page_id` and `boxes` are optional; `i`, `j` index `boxes`.

use serde::{Deserialize, Serialize};

use super::{byte_offset, FormatError};
use crate::geometry::BBox;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawPrediction {
    pub page_id: String,
    pub boxes: Vec<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relations: Option<Vec<[usize; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<Vec<Vec<f64>>>,
}

/// Square relation-score matrix, row-major: `get(i, j)` scores `i -> j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    n: usize,
    values: Vec<f64>,
}

impl ScoreMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Option<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return None;
        }
        Some(Self {
            n,
            values: rows.concat(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.n..(i + 1) * self.n]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PagePrediction {
    pub page_id: String,
    pub boxes: Vec<BBox>,
    pub classes: Option<Vec<String>>,
    pub relations: Option<Vec<(usize, usize)>>,
    pub scores: Option<ScoreMatrix>,
    pub embeddings: Option<Vec<Vec<f64>>>,
}

impl TryFrom<RawPrediction> for PagePrediction {
    type Error = FormatError;

    fn try_from(raw: RawPrediction) -> Result<Self, FormatError> {
        let bad = |m: String| FormatError::Prediction(format!("{}: {m}", raw.page_id));
        let n = raw.boxes.len();
        if let Some(c) = &raw.classes {
            if c.len() != n {
                return Err(bad(format!("{} classes for {n} boxes", c.len())));
            }
        }
        if let Some(rel) = &raw.relations {
            if let Some([i, j]) = rel.iter().find(|[i, j]| *i >= n || *j >= n) {
                return Err(bad(format!("relation [{i}, {j}] is out of range for {n} boxes")));
            }
        }
        let scores = match &raw.scores {
            None => None,
            Some(rows) => match ScoreMatrix::from_rows(rows) {
                Some(m) if m.n() == n => Some(m),
                _ => return Err(bad(format!("scores must be a {n}x{n} matrix"))),
            },
        };
        if let Some(e) = &raw.embeddings {
            if e.len() != n {
                return Err(bad(format!("{} embedding rows for {n} boxes", e.len())));
            }
            if let Some(first) = e.first() {
                if e.iter().any(|r| r.len() != first.len()) {
                    return Err(bad("embedding rows differ in dimension".into()));
                }
            }
        }
        Ok(PagePrediction {
            boxes: raw
                .boxes
                .iter()
                .map(|b| BBox::from_float_xywh(b[0], b[1], b[2], b[3]))
                .collect(),
            classes: raw.classes,
            relations: raw
                .relations
                .map(|r| r.into_iter().map(|[i, j]| (i, j)).collect()),
            scores,
            embeddings: raw.embeddings,
            page_id: raw.page_id,
        })
    }
}

pub fn parse_prediction(bytes: &[u8]) -> Result<PagePrediction, FormatError> {
    let raw: RawPrediction = serde_json::from_slice(bytes).map_err(|e| FormatError::Syntax {
        offset: byte_offset(bytes, e.line(), e.column()),
        message: e.to_string(),
    })?;
    raw.try_into()
}
