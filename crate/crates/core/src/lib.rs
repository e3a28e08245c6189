//! Evaluation of logical page segmentation as clustering of foreground
//! pixels.
//!
//! The crate builds ground-truth label maps from region/relation annotations,
//! OCR textlines and an adaptive threshold ([`rasterize`]), scores predicted
//! label maps with a Rand index restricted to ground-truth foreground pixels
//! ([`metrics`]), and turns raw detector or relation-model output into
//! predicted segments ([`merge`]). [`commands`] wires these into the batch
//! operations exposed by the `segbite` binary.
//!
//! ```
//! use segbite::geometry::Size;
//! use segbite::metrics::{evaluate_page, MissingPolicy};
//! use segbite::rasterize::LabelMap;
//!
//! let size = Size::new(4, 1).unwrap();
//! let gt = LabelMap::new(size, vec![1, 1, 2, 2]).unwrap();
//! let pred = LabelMap::new(size, vec![5, 5, 5, 5]).unwrap();
//! let score = evaluate_page(&gt, &pred, MissingPolicy::ExtraCluster).unwrap();
//! assert_eq!(score.rand_index.unwrap().value(), 1.0 / 3.0);
//! ```

pub mod commands;
pub mod formats;
pub mod geometry;
pub mod merge;
pub mod metrics;
pub mod rasterize;
pub mod segmodel;
mod unionfind;

pub use unionfind::UnionFind;
