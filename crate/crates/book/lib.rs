// mdbook cannot run listings that depend on an outside crate, so every
// chapter is pulled in here and `cargo test --doc` runs its code blocks.
// One module per chapter keeps failures traceable to a file.

#[doc = include_str!("../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../book/src/ground-truth.md")]
pub mod ground_truth {}
#[doc = include_str!("../../book/src/thresholding.md")]
pub mod thresholding {}
#[doc = include_str!("../../book/src/rand-index.md")]
pub mod rand_index {}
#[doc = include_str!("../../book/src/missing-pixels.md")]
pub mod missing_pixels {}
#[doc = include_str!("../../book/src/bootstrap.md")]
pub mod bootstrap {}
#[doc = include_str!("../../book/src/merging.md")]
pub mod merging {}
#[doc = include_str!("../../book/src/formats.md")]
pub mod formats {}
#[doc = include_str!("../../book/src/cli.md")]
pub mod cli {}
