//! Rand index over ground-truth foreground pixels.

use std::collections::HashMap;

use super::MetricError;
use crate::rasterize::LabelMap;

/// What happens to ground-truth pixels that the prediction leaves unlabeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingPolicy {
    /// All such pixels share one fresh cluster per page.
    #[default]
    ExtraCluster,
    /// Each such pixel becomes its own cluster.
    Singletons,
}

impl std::str::FromStr for MissingPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "extra-cluster" => Ok(Self::ExtraCluster),
            "singletons" => Ok(Self::Singletons),
            other => Err(format!("unknown missing-pixel policy {other:?}")),
        }
    }
}

/// Cluster ids for an enumeration of pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelClustering(pub Vec<u32>);

impl PixelClustering {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Pairs the ground-truth foreground pixels (row-major) with their predicted
/// clusters.
pub fn align_prediction(
    gt: &LabelMap,
    pred: &LabelMap,
    policy: MissingPolicy,
) -> Result<(PixelClustering, PixelClustering), MetricError> {
    if gt.size() != pred.size() {
        return Err(MetricError::SizeMismatch {
            gt: gt.size(),
            pred: pred.size(),
        });
    }
    let pairs = gt
        .labels()
        .iter()
        .zip(pred.labels())
        .filter(|(g, _)| **g != 0);
    let fresh = pairs.clone().map(|(_, p)| *p).max().unwrap_or(0) as u64 + 1;
    let mut next = fresh;
    let mut gt_ids = Vec::new();
    let mut pred_ids = Vec::new();
    for (&g, &p) in pairs {
        gt_ids.push(g);
        let id = if p != 0 {
            p as u64
        } else {
            match policy {
                MissingPolicy::ExtraCluster => fresh,
                MissingPolicy::Singletons => {
                    next += 1;
                    next - 1
                }
            }
        };
        pred_ids.push(u32::try_from(id).map_err(|_| MetricError::IdSpaceExhausted)?);
    }
    Ok((PixelClustering(gt_ids), PixelClustering(pred_ids)))
}

fn pairs_of(k: u64) -> u128 {
    let k = k as u128;
    k * k.saturating_sub(1) / 2
}

/// Sparse cross-tabulation of two clusterings of the same elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    /// Nonzero cells `(row, column, count)`, rows and columns indexed densely
    /// in order of first appearance.
    pub cells: Vec<(u32, u32, u64)>,
    pub row_sums: Vec<u64>,
    pub col_sums: Vec<u64>,
    pub total: u64,
}

/// Maps arbitrary ids to `0..k` in order of first appearance.
fn densify(ids: &[u32]) -> (Vec<u32>, usize) {
    let max = ids.iter().copied().max().unwrap_or(0) as usize;
    let mut out = Vec::with_capacity(ids.len());
    let mut count = 0u32;
    if max <= 4 * ids.len() + (1 << 16) {
        let mut table = vec![u32::MAX; max + 1];
        for &id in ids {
            let slot = &mut table[id as usize];
            if *slot == u32::MAX {
                *slot = count;
                count += 1;
            }
            out.push(*slot);
        }
    } else {
        let mut table = HashMap::new();
        for &id in ids {
            let slot = *table.entry(id).or_insert_with(|| {
                count += 1;
                count - 1
            });
            out.push(slot);
        }
    }
    (out, count as usize)
}

const DENSE_CELL_LIMIT: usize = 1 << 24;

impl ContingencyTable {
    pub fn new(gt: &PixelClustering, pred: &PixelClustering) -> Result<Self, MetricError> {
        if gt.len() != pred.len() {
            return Err(MetricError::LengthMismatch {
                gt: gt.len(),
                pred: pred.len(),
            });
        }
        let (rows, n_rows) = densify(&gt.0);
        let (cols, n_cols) = densify(&pred.0);
        let mut row_sums = vec![0u64; n_rows];
        let mut col_sums = vec![0u64; n_cols];
        for (&r, &c) in rows.iter().zip(&cols) {
            row_sums[r as usize] += 1;
            col_sums[c as usize] += 1;
        }
        let cells = if n_rows.saturating_mul(n_cols) <= DENSE_CELL_LIMIT {
            let mut dense = vec![0u64; n_rows * n_cols];
            for (&r, &c) in rows.iter().zip(&cols) {
                dense[r as usize * n_cols + c as usize] += 1;
            }
            dense
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0)
                .map(|(i, &v)| ((i / n_cols) as u32, (i % n_cols) as u32, v))
                .collect()
        } else {
            let mut sparse: HashMap<(u32, u32), u64> = HashMap::new();
            for (&r, &c) in rows.iter().zip(&cols) {
                *sparse.entry((r, c)).or_default() += 1;
            }
            let mut cells: Vec<_> = sparse.into_iter().map(|((r, c), v)| (r, c, v)).collect();
            cells.sort_unstable();
            cells
        };
        Ok(Self {
            cells,
            row_sums,
            col_sums,
            total: gt.len() as u64,
        })
    }

    /// Agreeing pairs via
    /// `C(n,2) + 2 Σ C(n_ij,2) - Σ C(a_i,2) - Σ C(b_j,2)`.
    pub fn rand_index(&self) -> Result<RandIndex, MetricError> {
        if self.total < 2 {
            return Err(MetricError::TooFewElements(self.total as usize));
        }
        let pairs = pairs_of(self.total);
        let within: u128 = self.cells.iter().map(|c| pairs_of(c.2)).sum();
        let rows: u128 = self.row_sums.iter().map(|&a| pairs_of(a)).sum();
        let cols: u128 = self.col_sums.iter().map(|&b| pairs_of(b)).sum();
        Ok(RandIndex {
            agreements: pairs + 2 * within - rows - cols,
            pairs,
        })
    }
}

/// Exact Rand index as a ratio of pair counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct RandIndex {
    pub agreements: u128,
    pub pairs: u128,
}

impl RandIndex {
    pub fn value(&self) -> f64 {
        self.agreements as f64 / self.pairs as f64
    }
}

pub fn rand_index(gt: &PixelClustering, pred: &PixelClustering) -> Result<RandIndex, MetricError> {
    if gt.len() != pred.len() {
        return Err(MetricError::LengthMismatch {
            gt: gt.len(),
            pred: pred.len(),
        });
    }
    if gt.len() < 2 {
        return Err(MetricError::TooFewElements(gt.len()));
    }
    ContingencyTable::new(gt, pred)?.rand_index()
}

pub const BRUTE_FORCE_LIMIT: usize = 10_000;

/// Literal enumeration of every pixel pair. Quadratic; for checking only.
pub fn rand_index_bruteforce(
    gt: &PixelClustering,
    pred: &PixelClustering,
) -> Result<RandIndex, MetricError> {
    let n = gt.len();
    if n != pred.len() {
        return Err(MetricError::LengthMismatch { gt: n, pred: pred.len() });
    }
    if n < 2 {
        return Err(MetricError::TooFewElements(n));
    }
    if n > BRUTE_FORCE_LIMIT {
        return Err(MetricError::TooLargeForBruteForce(n));
    }
    let mut agreements = 0u128;
    for i in 0..n {
        for j in i + 1..n {
            let same_gt = gt.0[i] == gt.0[j];
            let same_pred = pred.0[i] == pred.0[j];
            if same_gt == same_pred {
                agreements += 1;
            }
        }
    }
    Ok(RandIndex {
        agreements,
        pairs: (n * (n - 1) / 2) as u128,
    })
}

/// Score of one page; `rand_index` is `None` when the ground truth has fewer
/// than two foreground pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PageScore {
    pub pixels: u64,
    pub rand_index: Option<RandIndex>,
}

pub fn evaluate_page(
    gt: &LabelMap,
    pred: &LabelMap,
    policy: MissingPolicy,
) -> Result<PageScore, MetricError> {
    let (g, p) = align_prediction(gt, pred, policy)?;
    let pixels = g.len() as u64;
    let rand_index = if g.len() < 2 {
        None
    } else {
        Some(rand_index(&g, &p)?)
    };
    Ok(PageScore { pixels, rand_index })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Size;

    fn pc(v: &[u32]) -> PixelClustering {
        PixelClustering(v.to_vec())
    }

    fn map(w: u32, h: u32, labels: &[u32]) -> LabelMap {
        LabelMap::new(Size::new(w, h).unwrap(), labels.to_vec()).unwrap()
    }

    #[test]
    fn rand_index_examples() {
        let gt = pc(&[1, 1, 2, 2]);
        assert_eq!(rand_index(&gt, &pc(&[1, 1, 2, 2])).unwrap().value(), 1.0);
        // the two within-cluster gt pairs agree; the four cross pairs do not
        let r = rand_index(&gt, &pc(&[1, 1, 1, 1])).unwrap();
        assert_eq!((r.agreements, r.pairs), (2, 6));
        // only (1,4) and (2,3) are different in both
        let r = rand_index(&gt, &pc(&[1, 2, 1, 2])).unwrap();
        assert_eq!((r.agreements, r.pairs), (2, 6));
    }

    #[test]
    fn brute_force_examples() {
        assert_eq!(rand_index_bruteforce(&pc(&[1, 2]), &pc(&[1, 1])).unwrap().value(), 0.0);
        assert_eq!(rand_index_bruteforce(&pc(&[1, 2]), &pc(&[1, 2])).unwrap().value(), 1.0);
        assert_eq!(
            rand_index_bruteforce(&pc(&[1, 1, 2, 2]), &pc(&[1, 2, 1, 2])).unwrap(),
            RandIndex { agreements: 2, pairs: 6 }
        );
        let big = pc(&vec![0; BRUTE_FORCE_LIMIT + 1]);
        assert_eq!(rand_index_bruteforce(&big, &big), Err(MetricError::TooLargeForBruteForce(BRUTE_FORCE_LIMIT + 1)));
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(rand_index(&pc(&[1]), &pc(&[1])), Err(MetricError::TooFewElements(1)));
        assert!(matches!(rand_index(&pc(&[1, 2]), &pc(&[1])), Err(MetricError::LengthMismatch { .. })));
    }

    #[test]
    fn alignment_policies() {
        let gt = map(3, 2, &[1, 1, 0, 2, 2, 0]);
        let pred = map(3, 2, &[1, 1, 7, 0, 0, 5]);
        let (g, p) = align_prediction(&gt, &pred, MissingPolicy::ExtraCluster).unwrap();
        assert_eq!(g, pc(&[1, 1, 2, 2]));
        // fresh ids lie above every predicted label on gt foreground
        assert_eq!(p, pc(&[1, 1, 2, 2]));
        let (_, p) = align_prediction(&gt, &pred, MissingPolicy::Singletons).unwrap();
        assert_eq!(p, pc(&[1, 1, 2, 3]));
        let (g2, p2) = align_prediction(&gt, &gt, MissingPolicy::ExtraCluster).unwrap();
        assert_eq!(g2, p2);
    }

    #[test]
    fn alignment_requires_equal_sizes() {
        assert!(matches!(
            align_prediction(&map(2, 1, &[1, 1]), &map(1, 2, &[1, 1]), MissingPolicy::ExtraCluster),
            Err(MetricError::SizeMismatch { .. })
        ));
    }

    #[test]
    fn contingency_margins() {
        let t = ContingencyTable::new(&pc(&[5, 5, 9, 9, 9]), &pc(&[1, 2, 2, 2, 3])).unwrap();
        assert_eq!(t.total, 5);
        assert_eq!(t.row_sums, vec![2, 3]);
        assert_eq!(t.col_sums, vec![1, 3, 1]);
        assert_eq!(t.cells.iter().map(|c| c.2).sum::<u64>(), 5);
    }

    #[test]
    fn sparse_path_matches_dense() {
        let n = 5000u32;
        // 5000 x 4999 cells is past the dense limit
        let gt = pc(&(0..n).map(|i| i / 2 + (i % 2) * 10_000).collect::<Vec<_>>());
        let pred = pc(&(0..n).map(|i| (i * 7919) % 4999).collect::<Vec<_>>());
        const { assert!(5000 * 4999 > DENSE_CELL_LIMIT) };
        let fast = rand_index(&gt, &pred).unwrap();
        assert_eq!(fast, rand_index_bruteforce(&gt, &pred).unwrap());
    }

    #[test]
    fn large_counts_do_not_overflow() {
        // 10^8 pixels in one cluster on both sides: every pair agrees
        let t = ContingencyTable {
            cells: vec![(0, 0, 100_000_000)],
            row_sums: vec![100_000_000],
            col_sums: vec![100_000_000],
            total: 100_000_000,
        };
        let r = t.rand_index().unwrap();
        assert_eq!(r.agreements, r.pairs);
        assert_eq!(r.pairs, 4_999_999_950_000_000);
    }

    #[test]
    fn evaluate_skips_tiny_pages() {
        let gt = map(2, 1, &[1, 0]);
        let s = evaluate_page(&gt, &gt, MissingPolicy::ExtraCluster).unwrap();
        assert_eq!(s, PageScore { pixels: 1, rand_index: None });
    }

    #[test]
    fn extra_segments_on_background_are_free() {
        let gt = map(4, 1, &[1, 1, 0, 0]);
        let pred = map(4, 1, &[3, 3, 8, 9]);
        let s = evaluate_page(&gt, &pred, MissingPolicy::ExtraCluster).unwrap();
        assert_eq!(s.rand_index.unwrap().value(), 1.0);
    }

    #[test]
    fn ten_percent_reassignment_on_two_segments() {
        // With K equal segments and a fraction p of pixels moved to a random
        // other segment, E[1 - RI] is about (1/K)(1 - (1-p)^2 - p^2/(K-1))
        // + ((K-1)/K)(2p(1-p)/(K-1) + p^2(K-2)/(K-1)^2). For K = 2, p = 0.1
        // that is 0.18, so RI ~ 0.82.
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 4000u32;
        let gt: Vec<u32> = (0..n).map(|i| 1 + i % 2).collect();
        let mut total = 0.0;
        for _ in 0..100 {
            let mut idx: Vec<usize> = (0..n as usize).collect();
            idx.shuffle(&mut rng);
            let mut pred = gt.clone();
            for &i in &idx[..n as usize / 10] {
                pred[i] = 3 - pred[i];
            }
            let s = evaluate_page(&map(n, 1, &gt), &map(n, 1, &pred), MissingPolicy::ExtraCluster).unwrap();
            total += s.rand_index.unwrap().value();
        }
        let mean = total / 100.0;
        assert!((mean - 0.83).abs() <= 0.03, "mean {mean}");
    }
}
