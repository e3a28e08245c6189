//! COCO detection annotations extended with a top-level `relations` array.
//!
//! ```json
//! {"images": [{"id": 1, "file_name": "p1.jpg", "width": 800, "height": 1200}],
//!  "annotations": [{"id": 10, "image_id": 1, "category_id": 2, "bbox": [x, y, w, h]}],
//!  "categories": [{"id": 2, "name": "text"}],
//!  "relations": [{"source": 10, "target": 11}]}
//! ```
//!
//! Relation endpoints are annotation ids. `from`/`to` are accepted as aliases
//! of `source`/`target`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use super::{byte_offset, FormatError};
use crate::geometry::{BBox, Size};
use crate::segmodel::{AnnotatedPage, Region, RegionClass, RegionId};

#[derive(Debug, Clone, PartialEq)]
pub struct CocoImage {
    pub id: u64,
    pub file_name: String,
    pub size: Size,
}

impl CocoImage {
    /// File stem of `file_name`, used as the page identity.
    pub fn page_id(&self) -> String {
        Path::new(&self.file_name)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.file_name.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CocoAnnotation {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u64,
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CocoCategory {
    pub id: u64,
    pub name: String,
    pub class: Option<RegionClass>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CocoRelation {
    pub source: u64,
    pub target: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CocoDocument {
    pub images: Vec<CocoImage>,
    pub annotations: Vec<CocoAnnotation>,
    pub categories: Vec<CocoCategory>,
    pub relations: Vec<CocoRelation>,
    /// Top-level keys this reader does not interpret.
    pub extra: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CocoIssue {
    DuplicateImage { image: u64 },
    DuplicateAnnotation { annotation: u64 },
    UnknownImage { annotation: u64, image: u64 },
    UnknownCategoryName { category: u64, name: String },
    UnknownCategoryId { annotation: u64, category: u64 },
    DanglingRelation { source: u64, target: u64, missing: u64 },
    CrossImageRelation { source: u64, target: u64 },
    BadImageSize { image: u64 },
}

impl fmt::Display for CocoIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DuplicateImage { image } => write!(f, "image id {image} is defined twice"),
            Self::DuplicateAnnotation { annotation } => {
                write!(f, "annotation id {annotation} is defined twice")
            }
            Self::UnknownImage { annotation, image } => {
                write!(f, "annotation {annotation} references unknown image {image}")
            }
            Self::UnknownCategoryName { category, name } => write!(
                f,
                "category {category} has name {name:?}; expected title, text or page-number"
            ),
            Self::UnknownCategoryId {
                annotation,
                category,
            } => write!(
                f,
                "annotation {annotation} references unknown category {category}"
            ),
            Self::DanglingRelation {
                source,
                target,
                missing,
            } => write!(
                f,
                "relation {source}->{target} references unknown annotation {missing}"
            ),
            Self::CrossImageRelation { source, target } => write!(
                f,
                "relation {source}->{target} links annotations on different images"
            ),
            Self::BadImageSize { image } => write!(f, "image {image} has zero width or height"),
        }
    }
}

#[derive(Deserialize)]
struct RawDocument {
    images: Vec<RawImage>,
    annotations: Vec<RawAnnotation>,
    categories: Vec<RawCategory>,
    #[serde(default)]
    relations: Vec<RawRelation>,
    #[serde(flatten)]
    extra: BTreeMap<String, Value>,
}

#[derive(Deserialize)]
struct RawImage {
    id: u64,
    file_name: String,
    width: u32,
    height: u32,
}

#[derive(Deserialize)]
struct RawAnnotation {
    id: u64,
    image_id: u64,
    category_id: u64,
    bbox: [f64; 4],
}

#[derive(Deserialize)]
struct RawCategory {
    id: u64,
    name: String,
}

#[derive(Deserialize)]
struct RawRelation {
    #[serde(alias = "from")]
    source: u64,
    #[serde(alias = "to")]
    target: u64,
}

/// Strict parse: any [`CocoIssue`] is an error.
pub fn parse_coco(bytes: &[u8]) -> Result<CocoDocument, FormatError> {
    let (doc, issues) = parse_coco_lenient(bytes)?;
    match issues.into_iter().next() {
        Some(issue) => Err(FormatError::Validation(issue)),
        None => Ok(doc),
    }
}

/// Syntax errors are fatal; invariant violations are returned alongside the
/// document.
pub fn parse_coco_lenient(bytes: &[u8]) -> Result<(CocoDocument, Vec<CocoIssue>), FormatError> {
    let raw: RawDocument = serde_json::from_slice(bytes).map_err(|e| FormatError::Syntax {
        offset: byte_offset(bytes, e.line(), e.column()),
        message: e.to_string(),
    })?;
    let doc = CocoDocument {
        images: raw
            .images
            .into_iter()
            .map(|i| CocoImage {
                id: i.id,
                file_name: i.file_name,
                size: Size {
                    width: i.width,
                    height: i.height,
                },
            })
            .collect(),
        annotations: raw
            .annotations
            .into_iter()
            .map(|a| CocoAnnotation {
                id: a.id,
                image_id: a.image_id,
                category_id: a.category_id,
                bbox: BBox::from_float_xywh(a.bbox[0], a.bbox[1], a.bbox[2], a.bbox[3]),
            })
            .collect(),
        categories: raw
            .categories
            .into_iter()
            .map(|c| CocoCategory {
                id: c.id,
                class: RegionClass::from_name(&c.name),
                name: c.name,
            })
            .collect(),
        relations: raw
            .relations
            .into_iter()
            .map(|r| CocoRelation {
                source: r.source,
                target: r.target,
            })
            .collect(),
        extra: raw.extra,
    };
    let issues = doc.issues();
    Ok((doc, issues))
}

impl CocoDocument {
    /// All invariant violations, in document order.
    pub fn issues(&self) -> Vec<CocoIssue> {
        let mut issues = Vec::new();
        let mut images = HashSet::new();
        for img in &self.images {
            if !images.insert(img.id) {
                issues.push(CocoIssue::DuplicateImage { image: img.id });
            }
            if img.size.width == 0 || img.size.height == 0 {
                issues.push(CocoIssue::BadImageSize { image: img.id });
            }
        }
        let categories: HashMap<u64, &CocoCategory> =
            self.categories.iter().map(|c| (c.id, c)).collect();
        for c in &self.categories {
            if c.class.is_none() {
                issues.push(CocoIssue::UnknownCategoryName {
                    category: c.id,
                    name: c.name.clone(),
                });
            }
        }
        let mut owner: HashMap<u64, u64> = HashMap::new();
        for a in &self.annotations {
            if owner.insert(a.id, a.image_id).is_some() {
                issues.push(CocoIssue::DuplicateAnnotation { annotation: a.id });
            }
            if !images.contains(&a.image_id) {
                issues.push(CocoIssue::UnknownImage {
                    annotation: a.id,
                    image: a.image_id,
                });
            }
            if !categories.contains_key(&a.category_id) {
                issues.push(CocoIssue::UnknownCategoryId {
                    annotation: a.id,
                    category: a.category_id,
                });
            }
        }
        for r in &self.relations {
            let (s, t) = (owner.get(&r.source), owner.get(&r.target));
            for (id, img) in [(r.source, s), (r.target, t)] {
                if img.is_none() {
                    issues.push(CocoIssue::DanglingRelation {
                        source: r.source,
                        target: r.target,
                        missing: id,
                    });
                }
            }
            if let (Some(a), Some(b)) = (s, t) {
                if a != b {
                    issues.push(CocoIssue::CrossImageRelation {
                        source: r.source,
                        target: r.target,
                    });
                }
            }
        }
        issues
    }

    /// One page per image, in image order. Annotations with unknown
    /// categories are skipped; relations go to the page of their source (or
    /// target, when the source is unknown) and are kept even when dangling so
    /// that page validation can report them.
    pub fn pages(&self) -> Vec<AnnotatedPage> {
        let classes: HashMap<u64, RegionClass> = self
            .categories
            .iter()
            .filter_map(|c| c.class.map(|k| (c.id, k)))
            .collect();
        let slot: HashMap<u64, usize> = self
            .images
            .iter()
            .enumerate()
            .map(|(i, img)| (img.id, i))
            .collect();
        let mut pages: Vec<AnnotatedPage> = self
            .images
            .iter()
            .map(|img| AnnotatedPage {
                page_id: img.page_id(),
                size: img.size,
                regions: Vec::new(),
                relations: Vec::new(),
            })
            .collect();
        let mut owner: HashMap<u64, u64> = HashMap::new();
        for a in &self.annotations {
            owner.insert(a.id, a.image_id);
            let (Some(&class), Some(&i)) = (classes.get(&a.category_id), slot.get(&a.image_id))
            else {
                continue;
            };
            pages[i].regions.push(Region {
                id: a.id as RegionId,
                bbox: a.bbox,
                class,
            });
        }
        for r in &self.relations {
            let image = owner.get(&r.source).or_else(|| owner.get(&r.target));
            if let Some(i) = image.and_then(|img| slot.get(img)) {
                pages[*i].relations.push((r.source, r.target));
            }
        }
        pages
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "info": {"description": "fixture"},
        "images": [{"id": 1, "file_name": "scans/page-1.jpg", "width": 100, "height": 200}],
        "annotations": [
            {"id": 5, "image_id": 1, "category_id": 2, "bbox": [0, 0, 50, 20], "area": 1000},
            {"id": 6, "image_id": 1, "category_id": 2, "bbox": [0, 30.5, 50, 20]}
        ],
        "categories": [{"id": 2, "name": "text"}],
        "relations": [{"source": 5, "target": 6}]
    }"#;

    #[test]
    fn minimal_document() {
        let doc = parse_coco(MINIMAL.as_bytes()).unwrap();
        assert_eq!(doc.relations, vec![CocoRelation { source: 5, target: 6 }]);
        assert!(doc.extra.contains_key("info"));
        assert_eq!(doc.annotations[1].bbox, BBox::new(0, 31, 50, 20).unwrap());
        let pages = doc.pages();
        assert_eq!(pages.len(), 1);
        assert_eq!(pages[0].page_id, "page-1");
        assert_eq!(pages[0].relations, vec![(5, 6)]);
    }

    #[test]
    fn from_to_aliases() {
        let text = MINIMAL.replace("\"source\"", "\"from\"").replace("\"target\"", "\"to\"");
        let doc = parse_coco(text.as_bytes()).unwrap();
        assert_eq!(doc.relations.len(), 1);
    }

    #[test]
    fn dangling_relation_names_the_id() {
        let text = MINIMAL.replace("\"target\": 6", "\"target\": 99");
        let err = parse_coco(text.as_bytes()).unwrap_err();
        assert_eq!(
            err,
            FormatError::Validation(CocoIssue::DanglingRelation { source: 5, target: 99, missing: 99 })
        );
        assert!(err.to_string().contains("99"));
    }

    #[test]
    fn title_text_page_number_categories() {
        let text = r#"{"images": [], "annotations": [], "categories": [
            {"id": 1, "name": "Title"}, {"id": 2, "name": "Text"}, {"id": 3, "name": "Page number"}]}"#;
        let doc = parse_coco(text.as_bytes()).unwrap();
        let classes: Vec<_> = doc.categories.iter().map(|c| c.class).collect();
        assert_eq!(
            classes,
            vec![Some(RegionClass::Title), Some(RegionClass::Text), Some(RegionClass::PageNumber)]
        );
    }

    #[test]
    fn unknown_category_is_rejected() {
        let text = MINIMAL.replace("\"text\"", "\"figure\"");
        assert!(matches!(
            parse_coco(text.as_bytes()),
            Err(FormatError::Validation(CocoIssue::UnknownCategoryName { category: 2, .. }))
        ));
    }

    #[test]
    fn syntax_error_reports_offset() {
        let text = "{\"images\": [}";
        match parse_coco(text.as_bytes()) {
            Err(FormatError::Syntax { offset, .. }) => assert!(offset <= text.len() && offset >= 11),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cross_image_relation_is_flagged() {
        let text = r#"{"images": [{"id": 1, "file_name": "a.png", "width": 9, "height": 9},
                                {"id": 2, "file_name": "b.png", "width": 9, "height": 9}],
            "annotations": [{"id": 1, "image_id": 1, "category_id": 1, "bbox": [0,0,1,1]},
                            {"id": 2, "image_id": 2, "category_id": 1, "bbox": [0,0,1,1]}],
            "categories": [{"id": 1, "name": "text"}],
            "relations": [{"source": 1, "target": 2}]}"#;
        let (_, issues) = parse_coco_lenient(text.as_bytes()).unwrap();
        assert_eq!(issues, vec![CocoIssue::CrossImageRelation { source: 1, target: 2 }]);
    }
}
