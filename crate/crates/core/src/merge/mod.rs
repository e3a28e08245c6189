//! Model-agnostic postprocessing of detector and relation-model outputs.
//!
//! Every merger returns a [`Segmentation`] whose members are detection
//! indices.

mod features;

pub use features::{
    extract_features, zscore, ColumnStats, EdgeFeatures, Features, EDGE_FEATURES, NODE_FEATURES,
};

use std::collections::BTreeSet;

use thiserror::Error;

use crate::formats::{PagePrediction, ScoreMatrix};
use crate::geometry::{enclosure_ratio, BBox};
use crate::segmodel::{order_component, Segmentation, ENCLOSURE_THRESHOLD};
use crate::unionfind::UnionFind;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MergeError {
    #[error("score matrix is empty")]
    EmptyScores,
    #[error("score ({row}, {col}) is not finite")]
    NonFiniteScore { row: usize, col: usize },
    #[error("embedding {0} is the zero vector")]
    ZeroEmbedding(usize),
    #[error("embedding {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("embedding {0} has a non-finite entry")]
    NonFiniteEmbedding(usize),
    #[error("relation ({0}, {1}) is out of range")]
    RelationOutOfRange(usize, usize),
    #[error("column {0} has zero standard deviation")]
    ZeroStd(usize),
    #[error("feature row has {found} columns, expected {expected}")]
    FeatureWidth { expected: usize, found: usize },
    #[error("text-similarity matrix must be {0}x{0}")]
    TextSimilarityShape(usize),
}

/// Indices of boxes that survive removal of boxes enclosed in a larger kept
/// box. Enclosure uses the same area-ratio rule as annotated titles; among
/// equal-area boxes the earlier one wins.
pub fn containment_filter(boxes: &[BBox]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&a, &b| boxes[b].area().cmp(&boxes[a].area()).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        let enclosed = kept
            .iter()
            .any(|&k| enclosure_ratio(&boxes[i], &boxes[k]) >= ENCLOSURE_THRESHOLD);
        if !enclosed {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    kept
}

/// Builds segments from directed successor links over `n` detections.
pub fn segments_from_links(n: usize, links: &[(usize, usize)]) -> Result<Segmentation, MergeError> {
    let mut uf = UnionFind::new(n);
    let mut edges = BTreeSet::new();
    for &(a, b) in links {
        if a >= n || b >= n {
            return Err(MergeError::RelationOutOfRange(a, b));
        }
        uf.union(a, b);
        edges.insert((a, b));
    }
    let groups = uf
        .groups()
        .into_iter()
        .map(|g| {
            order_component(&g, &edges, |i| i)
                .into_iter()
                .map(|i| i as u64)
                .collect()
        })
        .collect();
    Ok(Segmentation::from_groups(groups))
}

/// Each detection links to its highest-scoring successor (lowest index on
/// ties); choosing itself means the chain ends there. With
/// `exclude_diagonal`, self-scores are ignored and every detection but a lone
/// one links somewhere. Segments are the weakly connected components.
pub fn chains_from_scores(
    scores: &ScoreMatrix,
    exclude_diagonal: bool,
) -> Result<Segmentation, MergeError> {
    let n = scores.n();
    if n == 0 {
        return Err(MergeError::EmptyScores);
    }
    let mut links = Vec::with_capacity(n);
    for i in 0..n {
        let row = scores.row(i);
        if let Some(col) = row.iter().position(|v| !v.is_finite()) {
            return Err(MergeError::NonFiniteScore { row: i, col });
        }
        let best = row
            .iter()
            .enumerate()
            .filter(|&(j, _)| !(exclude_diagonal && j == i))
            .fold(None, |best: Option<(usize, f64)>, (j, &v)| match best {
                Some((_, bv)) if bv >= v => best,
                _ => Some((j, v)),
            });
        if let Some((j, _)) = best {
            if j != i {
                links.push((i, j));
            }
        }
    }
    segments_from_links(n, &links)
}

/// Cosine similarity of two equal-length vectors.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

pub const DEFAULT_COSINE_THRESHOLD: f64 = 0.5;

/// Joins every pair whose embedding cosine similarity reaches `threshold`.
pub fn cosine_merge(embeddings: &[Vec<f64>], threshold: f64) -> Result<Segmentation, MergeError> {
    let dim = embeddings.first().map_or(0, Vec::len);
    for (i, v) in embeddings.iter().enumerate() {
        if v.len() != dim {
            return Err(MergeError::DimensionMismatch {
                index: i,
                expected: dim,
                found: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(MergeError::NonFiniteEmbedding(i));
        }
        if v.iter().all(|&x| x == 0.0) {
            return Err(MergeError::ZeroEmbedding(i));
        }
    }
    let unit: Vec<Vec<f64>> = embeddings
        .iter()
        .map(|v| {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter().map(|x| x / norm).collect()
        })
        .collect();
    let n = embeddings.len();
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        for j in i + 1..n {
            let c: f64 = unit[i].iter().zip(&unit[j]).map(|(a, b)| a * b).sum();
            if c >= threshold {
                uf.union(i, j);
            }
        }
    }
    let groups = uf
        .groups()
        .into_iter()
        .map(|g| g.into_iter().map(|i| i as u64).collect())
        .collect();
    Ok(Segmentation::from_groups(groups))
}

/// Restricts a segmentation over a subset of detections back to the
/// original indices: member `k` becomes `retained[k]`.
pub fn lift_to_original(seg: Segmentation, retained: &[usize]) -> Segmentation {
    Segmentation {
        segments: seg
            .segments
            .into_iter()
            .map(|mut s| {
                for m in &mut s.members {
                    *m = retained[*m as usize] as u64;
                }
                s
            })
            .collect(),
    }
}

/// Which part of a prediction file produced the segments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MergeMethod {
    Relations,
    Scores,
    Embeddings,
    /// Boxes only: containment filter, then one segment per kept box.
    Detector,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeOptions {
    pub cosine_threshold: f64,
    pub exclude_diagonal: bool,
}

impl Default for MergeOptions {
    fn default() -> Self {
        Self {
            cosine_threshold: DEFAULT_COSINE_THRESHOLD,
            exclude_diagonal: false,
        }
    }
}

/// Segments for one prediction file, using the richest output present:
/// explicit relations, then a score matrix, then embeddings, then the bare
/// boxes.
pub fn merge_prediction(
    pred: &PagePrediction,
    options: MergeOptions,
) -> Result<(Segmentation, MergeMethod), MergeError> {
    let n = pred.boxes.len();
    if let Some(links) = &pred.relations {
        return Ok((segments_from_links(n, links)?, MergeMethod::Relations));
    }
    if n == 0 {
        return Ok((Segmentation::default(), MergeMethod::Detector));
    }
    if let Some(s) = &pred.scores {
        return Ok((chains_from_scores(s, options.exclude_diagonal)?, MergeMethod::Scores));
    }
    if let Some(e) = &pred.embeddings {
        return Ok((cosine_merge(e, options.cosine_threshold)?, MergeMethod::Embeddings));
    }
    let kept = containment_filter(&pred.boxes);
    let singles = Segmentation::from_groups((0..kept.len() as u64).map(|k| vec![k]).collect());
    Ok((lift_to_original(singles, &kept), MergeMethod::Detector))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn b(x: u32, y: u32, w: u32, h: u32) -> BBox {
        BBox::new(x, y, w, h).unwrap()
    }

    fn scores(rows: &[&[f64]]) -> ScoreMatrix {
        ScoreMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn containment_examples() {
        assert_eq!(containment_filter(&[b(0, 0, 100, 100), b(10, 10, 20, 20)]), vec![0]);
        assert_eq!(containment_filter(&[b(0, 0, 10, 10), b(50, 50, 10, 10)]), vec![0, 1]);
        assert_eq!(
            containment_filter(&[b(20, 20, 20, 20), b(0, 0, 100, 100), b(10, 10, 50, 50)]),
            vec![1]
        );
        // duplicates keep the first
        assert_eq!(containment_filter(&[b(5, 5, 10, 10), b(5, 5, 10, 10)]), vec![0]);
        assert!(containment_filter(&[]).is_empty());
    }

    #[test]
    fn chain_examples() {
        let one = chains_from_scores(&scores(&[&[0.3]]), false).unwrap();
        assert_eq!(one.canonical(), vec![vec![0]]);

        let s = scores(&[&[0.0, 0.9, 0.1], &[0.0, 0.8, 0.2], &[0.1, 0.2, 0.7]]);
        assert_eq!(chains_from_scores(&s, false).unwrap().canonical(), vec![vec![0, 1], vec![2]]);

        let mutual = scores(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(chains_from_scores(&mutual, false).unwrap().canonical(), vec![vec![0, 1]]);
    }

    #[test]
    fn chain_order_and_ties() {
        // 2 -> 0 -> 1, ties broken toward lower index
        let s = scores(&[&[0.0, 0.5, 0.5], &[0.0, 0.9, 0.0], &[0.6, 0.0, 0.0]]);
        let seg = chains_from_scores(&s, false).unwrap();
        assert_eq!(seg.segments[0].members, vec![2, 0, 1]);
    }

    #[test]
    fn diagonal_exclusion() {
        let s = scores(&[&[9.0, 0.1], &[0.2, 9.0]]);
        assert_eq!(chains_from_scores(&s, false).unwrap().len(), 2);
        assert_eq!(chains_from_scores(&s, true).unwrap().len(), 1);
        assert_eq!(chains_from_scores(&scores(&[&[1.0]]), true).unwrap().len(), 1);
    }

    #[test]
    fn non_finite_scores_are_rejected() {
        let s = scores(&[&[0.0, f64::NAN], &[0.0, 0.0]]);
        assert_eq!(chains_from_scores(&s, false), Err(MergeError::NonFiniteScore { row: 0, col: 1 }));
        assert_eq!(chains_from_scores(&scores(&[]), false), Err(MergeError::EmptyScores));
    }

    #[test]
    fn cosine_examples() {
        let same = vec![vec![1.0, 2.0, 3.0]; 3];
        assert_eq!(cosine_merge(&same, 0.99).unwrap().len(), 1);

        let ortho = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        assert_eq!(cosine_merge(&ortho, 0.5).unwrap().len(), 3);

        // 0 and 1 are 45 degrees apart (cos 0.7071), as are 2 and 3; 1 and 2 are 90 apart
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = vec![vec![1.0, 0.0, 0.0], vec![s, s, 0.0], vec![0.0, 0.0, 1.0], vec![0.0, s, s]];
        assert!((cosine(&v[0], &v[1]) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert_eq!(cosine(&v[0], &v[2]), 0.0);
        assert!((cosine(&v[1], &v[3]) - 0.5).abs() < 1e-12);
        let seg = cosine_merge(&v, 0.7).unwrap();
        assert_eq!(seg.canonical(), vec![vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn cosine_errors() {
        assert_eq!(cosine_merge(&[vec![1.0], vec![0.0]], 0.5), Err(MergeError::ZeroEmbedding(1)));
        assert!(matches!(
            cosine_merge(&[vec![1.0], vec![1.0, 2.0]], 0.5),
            Err(MergeError::DimensionMismatch { index: 1, .. })
        ));
    }

    #[test]
    fn lifting_maps_back_to_input_indices() {
        let seg = Segmentation::from_groups(vec![vec![0, 1], vec![2]]);
        let lifted = lift_to_original(seg, &[3, 5, 9]);
        assert_eq!(lifted.canonical(), vec![vec![3, 5], vec![9]]);
    }

    fn arb_boxes() -> impl Strategy<Value = Vec<BBox>> {
        prop::collection::vec((0u32..200, 0u32..200, 1u32..120, 1u32..120), 0..16)
            .prop_map(|v| v.into_iter().map(|(x, y, w, h)| b(x, y, w, h)).collect())
    }

    proptest! {
        #[test]
        fn containment_is_idempotent(boxes in arb_boxes()) {
            let kept = containment_filter(&boxes);
            let sub: Vec<BBox> = kept.iter().map(|&i| boxes[i]).collect();
            prop_assert_eq!(containment_filter(&sub), (0..sub.len()).collect::<Vec<_>>());
            for (i, a) in sub.iter().enumerate() {
                for (j, c) in sub.iter().enumerate() {
                    if i != j && a.area() < c.area() {
                        prop_assert!(enclosure_ratio(a, c) < ENCLOSURE_THRESHOLD);
                    }
                }
            }
        }

        #[test]
        fn row_shift_keeps_chains(n in 1usize..9, seed in any::<u64>(), shifts in prop::collection::vec(-50.0f64..50.0, 9)) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(0..8) as f64 / 4.0).collect()).collect();
            let m = ScoreMatrix::from_rows(&rows).unwrap();
            let mut shifted = m.clone();
            for (i, shift) in shifts.iter().enumerate().take(n) {
                shifted.row_mut(i).iter_mut().for_each(|v| *v += shift);
            }
            prop_assert_eq!(chains_from_scores(&m, false).unwrap(), chains_from_scores(&shifted, false).unwrap());
        }

        #[test]
        fn cosine_ignores_scale(vs in prop::collection::vec(prop::collection::vec(-4i32..5, 3), 1..10), scale in prop::collection::vec(1u32..6, 10), t in -0.9f64..0.9) {
            prop_assume!(vs.iter().all(|v| v.iter().any(|&x| x != 0)));
            let base: Vec<Vec<f64>> = vs.iter().map(|v| v.iter().map(|&x| x as f64).collect()).collect();
            let scaled: Vec<Vec<f64>> = base.iter().zip(&scale).map(|(v, &s)| v.iter().map(|x| x * s as f64).collect()).collect();
            let a = cosine_merge(&base, t).unwrap();
            prop_assert_eq!(a.canonical(), cosine_merge(&scaled, t).unwrap().canonical());
            let mut all: Vec<u64> = a.segments.iter().flat_map(|s| s.members.clone()).collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..base.len() as u64).collect::<Vec<_>>());
        }
    }
}
