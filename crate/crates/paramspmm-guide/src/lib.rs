//! Every code block in the guide under `book/` compiles and runs here as a
//! doctest, so the prose cannot drift from the library. Each module below
//! is one chapter, included verbatim.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/matrices.md")]
pub mod matrices {}

#[doc = include_str!("../../../book/src/format.md")]
pub mod format {}

#[doc = include_str!("../../../book/src/engine.md")]
pub mod engine {}

#[doc = include_str!("../../../book/src/features.md")]
pub mod features {}

#[doc = include_str!("../../../book/src/decider.md")]
pub mod decider {}

#[doc = include_str!("../../../book/src/reordering.md")]
pub mod reordering {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

#[doc = include_str!("../../../book/src/file-formats.md")]
pub mod file_formats {}
