//! Readers for annotation, OCR, prediction and label-map files.

mod alto;
mod coco;
mod labelmap;
mod pagexml;
mod prediction;

pub use alto::{parse_alto, WordBox};
pub use coco::{
    parse_coco, parse_coco_lenient, CocoAnnotation, CocoCategory, CocoDocument, CocoImage,
    CocoIssue, CocoRelation,
};
pub use labelmap::{read_label_map, read_label_map_sized, write_label_map, MAX_LABEL};
pub use pagexml::{parse_pagexml, TextLine};
pub use prediction::{parse_prediction, PagePrediction, RawPrediction, ScoreMatrix};

use thiserror::Error;

use crate::geometry::round_coord;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormatError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("invalid annotations: {0}")]
    Validation(CocoIssue),
    #[error("invalid prediction file: {0}")]
    Prediction(String),
    #[error("label map: {0}")]
    LabelMap(String),
}

/// Parse result that also carries recoverable problems.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub items: Vec<T>,
    pub warnings: Vec<String>,
}

impl<T> Default for Parsed<T> {
    fn default() -> Self {
        Self {
            items: Vec::new(),
            warnings: Vec::new(),
        }
    }
}

/// Byte offset of a 1-based `(line, column)` position.
pub(crate) fn byte_offset(text: &[u8], line: usize, column: usize) -> usize {
    let mut offset = 0;
    for _ in 1..line {
        match text[offset..].iter().position(|&b| b == b'\n') {
            Some(p) => offset += p + 1,
            None => return text.len(),
        }
    }
    (offset + column.saturating_sub(1)).min(text.len())
}

pub(crate) fn xml_document(bytes: &[u8]) -> Result<roxmltree::Document<'_>, FormatError> {
    let text = std::str::from_utf8(bytes).map_err(|e| FormatError::Syntax {
        offset: e.valid_up_to(),
        message: "invalid UTF-8".into(),
    })?;
    roxmltree::Document::parse(text).map_err(|e| {
        let pos = e.pos();
        FormatError::Syntax {
            offset: byte_offset(bytes, pos.row as usize, pos.col as usize),
            message: e.to_string(),
        }
    })
}

/// Reads coordinate lists written as `x,y x,y ...` or `x y x y ...`.
pub(crate) fn parse_points(s: &str) -> Option<Vec<(u32, u32)>> {
    let nums: Vec<f64> = s
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect::<Option<_>>()?;
    if !nums.len().is_multiple_of(2) {
        return None;
    }
    Some(
        nums.chunks_exact(2)
            .map(|p| (round_coord(p[0]), round_coord(p[1])))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_count_bytes() {
        let t = b"ab\ncd\nef";
        assert_eq!(byte_offset(t, 1, 1), 0);
        assert_eq!(byte_offset(t, 2, 2), 4);
        assert_eq!(byte_offset(t, 9, 1), t.len());
    }

    #[test]
    fn points_accept_both_separators() {
        assert_eq!(parse_points("0,0 10,0 10,5"), Some(vec![(0, 0), (10, 0), (10, 5)]));
        assert_eq!(parse_points("1 2 3.5 4"), Some(vec![(1, 2), (4, 4)]));
        assert_eq!(parse_points("1,2 3"), None);
        assert_eq!(parse_points("a,b"), None);
    }
}
