//! The guide, republished as module docs.
//!
//! Each module below includes one chapter of the mdbook under `book/` at
//! the repository root, so `cargo test` compiles and runs every code block
//! in the book as a doc-test. Render the same sources with
//! `mdbook build book`. If a snippet rots, the build breaks here first.

#[doc = include_str!("../../../book/src/overview.md")]
pub mod overview {}

#[doc = include_str!("../../../book/src/model.md")]
pub mod model {}

#[doc = include_str!("../../../book/src/subspace.md")]
pub mod subspace {}

#[doc = include_str!("../../../book/src/privacy.md")]
pub mod privacy {}

#[doc = include_str!("../../../book/src/transfer.md")]
pub mod transfer {}

#[doc = include_str!("../../../book/src/attack.md")]
pub mod attack {}

#[doc = include_str!("../../../book/src/harness.md")]
pub mod harness {}
