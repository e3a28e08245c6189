//! Logical segments from annotated regions and relations.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::geometry::{enclosure_ratio, BBox, Size};
use crate::unionfind::UnionFind;

/// Minimum `area(inner ∩ outer) / area(inner)` for `inner` to count as enclosed.
pub const ENCLOSURE_THRESHOLD: f64 = 0.95;

pub type RegionId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RegionClass {
    Title,
    Text,
    PageNumber,
}

impl RegionClass {
    /// Case-insensitive, with `-`, `_` and space treated as equivalent.
    pub fn from_name(name: &str) -> Option<Self> {
        let norm: String = name
            .trim()
            .chars()
            .map(|c| match c {
                '_' | ' ' => '-',
                c => c.to_ascii_lowercase(),
            })
            .collect();
        match norm.as_str() {
            "title" => Some(Self::Title),
            "text" => Some(Self::Text),
            "page-number" => Some(Self::PageNumber),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Title => "title",
            Self::Text => "text",
            Self::PageNumber => "page-number",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub id: RegionId,
    pub bbox: BBox,
    pub class: RegionClass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedPage {
    pub page_id: String,
    pub size: Size,
    pub regions: Vec<Region>,
    /// Directed `(source, target)` links.
    pub relations: Vec<(RegionId, RegionId)>,
}

impl AnnotatedPage {
    pub fn region(&self, id: RegionId) -> Option<&Region> {
        self.regions.iter().find(|r| r.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    /// Positive label used in label maps.
    pub id: u32,
    pub members: Vec<RegionId>,
}

/// A partition of region (or detection) ids into labeled segments.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Segmentation {
    pub segments: Vec<Segment>,
}

impl Segmentation {
    /// Builds a segmentation from groups, assigning ids `1..=K` in order.
    pub fn from_groups(groups: Vec<Vec<RegionId>>) -> Self {
        Self {
            segments: groups
                .into_iter()
                .enumerate()
                .map(|(i, members)| Segment {
                    id: i as u32 + 1,
                    members,
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Map from member id to segment label.
    pub fn membership(&self) -> HashMap<RegionId, u32> {
        self.segments
            .iter()
            .flat_map(|s| s.members.iter().map(move |&m| (m, s.id)))
            .collect()
    }

    /// Members as sorted sets, sorted; convenient for comparing partitions.
    pub fn canonical(&self) -> Vec<Vec<RegionId>> {
        let mut groups: Vec<Vec<RegionId>> = self
            .segments
            .iter()
            .map(|s| {
                let mut m = s.members.clone();
                m.sort_unstable();
                m
            })
            .collect();
        groups.sort();
        groups
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SegModelError {
    #[error("page {page}: relation {source_id}->{target_id} references unknown region {missing}")]
    DanglingRelation {
        page: String,
        source_id: RegionId,
        target_id: RegionId,
        missing: RegionId,
    },
    #[error("page {page}: relation {source_id}->{target_id} touches page-number region {region}; page numbers have no relations")]
    PageNumberRelation {
        page: String,
        source_id: RegionId,
        target_id: RegionId,
        region: RegionId,
    },
}

/// Orders the members of one component: along the directed chain when the
/// component's relations form a simple path, otherwise by `fallback`.
pub(crate) fn order_component<K: Ord>(
    nodes: &[usize],
    edges: &BTreeSet<(usize, usize)>,
    fallback: impl Fn(usize) -> K,
) -> Vec<usize> {
    let mut ordered = nodes.to_vec();
    ordered.sort_by_key(|&n| fallback(n));
    if nodes.len() < 2 {
        return ordered;
    }
    let inside: BTreeSet<usize> = nodes.iter().copied().collect();
    let local: Vec<(usize, usize)> = edges
        .iter()
        .copied()
        .filter(|(a, b)| a != b && inside.contains(a))
        .collect();
    if local.len() != nodes.len() - 1 {
        return ordered;
    }
    let mut next: HashMap<usize, usize> = HashMap::new();
    let mut indegree: HashMap<usize, usize> = HashMap::new();
    for &(a, b) in &local {
        if next.insert(a, b).is_some() {
            return ordered;
        }
        *indegree.entry(b).or_default() += 1;
    }
    if indegree.values().any(|&d| d > 1) {
        return ordered;
    }
    let starts: Vec<usize> = nodes
        .iter()
        .copied()
        .filter(|n| !indegree.contains_key(n))
        .collect();
    if starts.len() != 1 {
        return ordered;
    }
    let mut chain = vec![starts[0]];
    while let Some(&n) = next.get(chain.last().unwrap()) {
        if chain.len() > nodes.len() {
            return ordered;
        }
        chain.push(n);
    }
    if chain.len() == nodes.len() {
        chain
    } else {
        ordered
    }
}

/// Connected components of the relation graph over non-page-number regions.
pub fn segments_from_relations(page: &AnnotatedPage) -> Result<Segmentation, SegModelError> {
    let index: HashMap<RegionId, usize> = page
        .regions
        .iter()
        .enumerate()
        .map(|(i, r)| (r.id, i))
        .collect();

    let mut edges = BTreeSet::new();
    for &(s, t) in &page.relations {
        let lookup = |id: RegionId| {
            index.get(&id).copied().ok_or(SegModelError::DanglingRelation {
                page: page.page_id.clone(),
                source_id: s,
                target_id: t,
                missing: id,
            })
        };
        let (si, ti) = (lookup(s)?, lookup(t)?);
        for (i, id) in [(si, s), (ti, t)] {
            if page.regions[i].class == RegionClass::PageNumber {
                return Err(SegModelError::PageNumberRelation {
                    page: page.page_id.clone(),
                    source_id: s,
                    target_id: t,
                    region: id,
                });
            }
        }
        edges.insert((si, ti));
    }

    let mut uf = UnionFind::new(page.regions.len());
    for &(a, b) in &edges {
        uf.union(a, b);
    }
    let geometric = |i: usize| {
        let r = &page.regions[i];
        (r.bbox.y, r.bbox.x, r.id)
    };
    let groups = uf
        .groups()
        .into_iter()
        .filter(|g| page.regions[g[0]].class != RegionClass::PageNumber)
        .map(|g| {
            order_component(&g, &edges, geometric)
                .into_iter()
                .map(|i| page.regions[i].id)
                .collect()
        })
        .collect();
    Ok(Segmentation::from_groups(groups))
}

/// Removes relation-less titles enclosed in a text region.
pub fn drop_enclosed_titles(page: &AnnotatedPage) -> AnnotatedPage {
    let related: BTreeSet<RegionId> = page
        .relations
        .iter()
        .flat_map(|&(s, t)| [s, t])
        .collect();
    let texts: Vec<&BBox> = page
        .regions
        .iter()
        .filter(|r| r.class == RegionClass::Text)
        .map(|r| &r.bbox)
        .collect();
    let regions = page
        .regions
        .iter()
        .filter(|r| {
            let enclosed = r.class == RegionClass::Title
                && !related.contains(&r.id)
                && texts
                    .iter()
                    .any(|t| enclosure_ratio(&r.bbox, t) >= ENCLOSURE_THRESHOLD);
            !enclosed
        })
        .cloned()
        .collect();
    AnnotatedPage {
        regions,
        ..page.clone()
    }
}

/// Convenience: enclosed-title removal followed by grouping.
pub fn segment_page(page: &AnnotatedPage) -> Result<(AnnotatedPage, Segmentation), SegModelError> {
    let kept = drop_enclosed_titles(page);
    let seg = segments_from_relations(&kept)?;
    Ok((kept, seg))
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DiagnosticKind {
    DanglingRelation {
        source: RegionId,
        target: RegionId,
        missing: RegionId,
    },
    PageNumberRelation {
        source: RegionId,
        target: RegionId,
        page_number: RegionId,
    },
    DegenerateBox {
        region: RegionId,
    },
    OutOfImage {
        region: RegionId,
    },
    DuplicateRegion {
        region: RegionId,
    },
    /// Document-level problem reported by a parser.
    Format {
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct Diagnostic {
    pub page_id: String,
    #[serde(flatten)]
    pub kind: DiagnosticKind,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.page_id)?;
        match &self.kind {
            DiagnosticKind::DanglingRelation {
                source,
                target,
                missing,
            } => write!(f, "relation {source}->{target} references unknown region {missing}"),
            DiagnosticKind::PageNumberRelation {
                source,
                target,
                page_number,
            } => write!(
                f,
                "relation {source}->{target} touches page-number region {page_number} (page numbers have no relations)"
            ),
            DiagnosticKind::DegenerateBox { region } => {
                write!(f, "region {region} has a zero-area box")
            }
            DiagnosticKind::OutOfImage { region } => {
                write!(f, "region {region} extends past the image bounds")
            }
            DiagnosticKind::DuplicateRegion { region } => {
                write!(f, "region id {region} appears more than once")
            }
            DiagnosticKind::Format { message } => f.write_str(message),
        }
    }
}

/// Every invariant violation on the page, in a stable order.
pub fn validate_page(page: &AnnotatedPage) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut push = |kind| {
        out.push(Diagnostic {
            page_id: page.page_id.clone(),
            kind,
        })
    };
    let mut seen = BTreeSet::new();
    for r in &page.regions {
        if !seen.insert(r.id) {
            push(DiagnosticKind::DuplicateRegion { region: r.id });
        }
        if r.bbox.is_degenerate() {
            push(DiagnosticKind::DegenerateBox { region: r.id });
        }
        if !r.bbox.fits(page.size) {
            push(DiagnosticKind::OutOfImage { region: r.id });
        }
    }
    for &(source, target) in &page.relations {
        for id in [source, target] {
            match page.region(id) {
                None => push(DiagnosticKind::DanglingRelation {
                    source,
                    target,
                    missing: id,
                }),
                Some(r) if r.class == RegionClass::PageNumber => {
                    push(DiagnosticKind::PageNumberRelation {
                        source,
                        target,
                        page_number: id,
                    })
                }
                Some(_) => {}
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn region(id: RegionId, class: RegionClass, x: u32, y: u32, w: u32, h: u32) -> Region {
        Region {
            id,
            bbox: BBox::new(x, y, w, h).unwrap(),
            class,
        }
    }

    fn page(regions: Vec<Region>, relations: Vec<(RegionId, RegionId)>) -> AnnotatedPage {
        AnnotatedPage {
            page_id: "p".into(),
            size: Size::new(1000, 1000).unwrap(),
            regions,
            relations,
        }
    }

    use RegionClass::*;

    #[test]
    fn class_names_normalize() {
        assert_eq!(RegionClass::from_name("Page Number"), Some(PageNumber));
        assert_eq!(RegionClass::from_name("page_number"), Some(PageNumber));
        assert_eq!(RegionClass::from_name("TITLE"), Some(Title));
        assert_eq!(RegionClass::from_name("figure"), None);
    }

    #[test]
    fn single_relation_groups_pair() {
        let p = page(
            vec![
                region(1, Text, 0, 0, 10, 10),
                region(2, Text, 0, 20, 10, 10),
                region(3, Text, 0, 40, 10, 10),
            ],
            vec![(1, 2)],
        );
        let seg = segments_from_relations(&p).unwrap();
        assert_eq!(seg.canonical(), vec![vec![1, 2], vec![3]]);
    }

    #[test]
    fn chain_is_ordered_by_relations() {
        // geometric order would be 3, 2, 1; the chain says 1 -> 2 -> 3
        let p = page(
            vec![
                region(1, Text, 0, 80, 10, 10),
                region(2, Text, 0, 40, 10, 10),
                region(3, Text, 0, 0, 10, 10),
            ],
            vec![(2, 3), (1, 2)],
        );
        let seg = segments_from_relations(&p).unwrap();
        assert_eq!(seg.len(), 1);
        assert_eq!(seg.segments[0].members, vec![1, 2, 3]);
    }

    #[test]
    fn cycle_falls_back_to_geometric_order() {
        let p = page(
            vec![
                region(1, Text, 50, 0, 10, 10),
                region(2, Text, 0, 0, 10, 10),
                region(3, Text, 0, 30, 10, 10),
            ],
            vec![(1, 2), (2, 3), (3, 1)],
        );
        let seg = segments_from_relations(&p).unwrap();
        assert_eq!(seg.segments[0].members, vec![2, 1, 3]);
    }

    #[test]
    fn page_numbers_are_excluded() {
        let p = page(
            vec![region(1, Text, 0, 0, 10, 10), region(9, PageNumber, 0, 900, 10, 10)],
            vec![],
        );
        let seg = segments_from_relations(&p).unwrap();
        assert_eq!(seg.canonical(), vec![vec![1]]);
    }

    #[test]
    fn page_number_relation_is_an_error() {
        let p = page(
            vec![region(1, Text, 0, 0, 10, 10), region(9, PageNumber, 0, 900, 10, 10)],
            vec![(1, 9)],
        );
        assert!(matches!(
            segments_from_relations(&p),
            Err(SegModelError::PageNumberRelation { region: 9, .. })
        ));
    }

    #[test]
    fn enclosed_title_is_dropped() {
        let p = page(
            vec![region(1, Title, 10, 10, 50, 10), region(2, Text, 0, 0, 200, 100)],
            vec![],
        );
        let kept = drop_enclosed_titles(&p);
        assert_eq!(kept.regions.len(), 1);
        assert_eq!(kept.regions[0].id, 2);
    }

    #[test]
    fn related_title_is_kept() {
        let p = page(
            vec![region(1, Title, 0, 0, 200, 20), region(2, Text, 0, 30, 200, 100)],
            vec![(1, 2)],
        );
        assert_eq!(drop_enclosed_titles(&p).regions.len(), 2);
        // relations exempt a title even when it sits inside the text box
        let p = page(
            vec![region(1, Title, 10, 10, 50, 10), region(2, Text, 0, 0, 200, 100)],
            vec![(1, 2)],
        );
        assert_eq!(drop_enclosed_titles(&p).regions.len(), 2);
    }

    #[test]
    fn half_overlapping_title_is_kept() {
        // title (0,0,100,20) against text (50,0,200,100): overlap 50x20 = half the title
        let p = page(
            vec![region(1, Title, 0, 0, 100, 20), region(2, Text, 50, 0, 200, 100)],
            vec![],
        );
        let ratio = enclosure_ratio(&p.regions[0].bbox, &p.regions[1].bbox);
        assert_eq!(ratio, 0.5);
        assert_eq!(drop_enclosed_titles(&p).regions.len(), 2);
    }

    #[test]
    fn nearly_enclosed_title_is_dropped() {
        // 96 of 100 columns inside the text box
        let p = page(
            vec![region(1, Title, 4, 10, 100, 10), region(2, Text, 8, 0, 200, 100)],
            vec![],
        );
        assert_eq!(drop_enclosed_titles(&p).regions.len(), 1);
    }

    #[test]
    fn validate_examples() {
        let clean = page(
            vec![region(1, Text, 0, 0, 10, 10), region(2, Text, 0, 20, 10, 10)],
            vec![(1, 2)],
        );
        assert!(validate_page(&clean).is_empty());

        let pn = page(
            vec![region(1, Text, 0, 0, 10, 10), region(2, PageNumber, 0, 20, 10, 10)],
            vec![(1, 2)],
        );
        let d = validate_page(&pn);
        assert_eq!(d.len(), 1);
        assert!(matches!(d[0].kind, DiagnosticKind::PageNumberRelation { page_number: 2, .. }));

        let mut wide = page(vec![region(1, Text, 990, 0, 20, 10)], vec![]);
        wide.size = Size::new(1000, 1000).unwrap();
        let d = validate_page(&wide);
        assert_eq!(d, vec![Diagnostic { page_id: "p".into(), kind: DiagnosticKind::OutOfImage { region: 1 } }]);

        let dangling = page(vec![region(1, Text, 0, 0, 10, 10)], vec![(1, 7)]);
        let d = validate_page(&dangling);
        assert_eq!(d.len(), 1);
        assert!(d[0].to_string().contains("unknown region 7"));
    }

    fn arb_page() -> impl Strategy<Value = AnnotatedPage> {
        (1usize..12).prop_flat_map(|n| {
            let regions = prop::collection::vec(
                (0u32..900, 0u32..900, 1u32..100, 1u32..100, 0u8..3),
                n,
            );
            let rels = prop::collection::vec((0..n, 0..n), 0..n * 2);
            (regions, rels).prop_map(|(rs, rels)| {
                let regions: Vec<Region> = rs
                    .into_iter()
                    .enumerate()
                    .map(|(i, (x, y, w, h, c))| {
                        let class = [Title, Text, PageNumber][c as usize];
                        region(i as u64 * 3 + 1, class, x, y, w, h)
                    })
                    .collect();
                let relations = rels
                    .into_iter()
                    .filter(|&(a, b)| {
                        regions[a].class != PageNumber && regions[b].class != PageNumber
                    })
                    .map(|(a, b)| (regions[a].id, regions[b].id))
                    .collect();
                page(regions, relations)
            })
        })
    }

    proptest! {
        #[test]
        fn segments_partition_surviving_regions(p in arb_page()) {
            let (kept, seg) = segment_page(&p).unwrap();
            let mut members: Vec<RegionId> = seg.segments.iter().flat_map(|s| s.members.clone()).collect();
            let total = members.len();
            members.sort_unstable();
            members.dedup();
            prop_assert_eq!(total, members.len());
            let mut expected: Vec<RegionId> = kept.regions.iter()
                .filter(|r| r.class != PageNumber).map(|r| r.id).collect();
            expected.sort_unstable();
            prop_assert_eq!(members, expected);
            prop_assert!(seg.len() <= kept.regions.len());
        }

        #[test]
        fn redundant_relation_keeps_partition(p in arb_page()) {
            let seg = segments_from_relations(&p).unwrap();
            if let Some(s) = seg.segments.iter().find(|s| s.members.len() >= 2) {
                let mut q = p.clone();
                q.relations.push((s.members[1], s.members[0]));
                prop_assert_eq!(segments_from_relations(&q).unwrap().canonical(), seg.canonical());
            }
        }

        #[test]
        fn count_equals_regions_iff_no_relations(p in arb_page()) {
            let seg = segments_from_relations(&p).unwrap();
            let eligible = p.regions.iter().filter(|r| r.class != PageNumber).count();
            let effective = p.relations.iter().any(|(a, b)| a != b);
            prop_assert_eq!(seg.len() == eligible, !effective);
        }
    }
}
