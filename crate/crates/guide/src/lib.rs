//! Compiles and runs every code snippet of the book under `cargo test`.
//!
//! Each chapter's markdown is attached verbatim as the documentation of an
//! empty module, so `cargo test --doc -p guide` executes the book's code
//! fences against the current library. One module per chapter keeps test
//! failures attributable to a specific chapter.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/model.md")]
pub mod model {}

#[doc = include_str!("../../../book/src/smoothness.md")]
pub mod smoothness {}

#[doc = include_str!("../../../book/src/spectral.md")]
pub mod spectral {}

#[doc = include_str!("../../../book/src/estimators.md")]
pub mod estimators {}

#[doc = include_str!("../../../book/src/synthetic.md")]
pub mod synthetic {}

#[doc = include_str!("../../../book/src/cross_validation.md")]
pub mod cross_validation {}

#[doc = include_str!("../../../book/src/ingestion.md")]
pub mod ingestion {}

#[doc = include_str!("../../../book/src/diagnostics.md")]
pub mod diagnostics {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
