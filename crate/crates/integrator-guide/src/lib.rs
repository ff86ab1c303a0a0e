//! Doc-test shims for the guide in `book/`: every fenced Rust block in the
//! chapters below compiles and runs as a doc-test of this crate, so the
//! prose and the library cannot drift apart silently.
//!
//! The modules are empty on purpose; their only job is to carry the
//! chapter markdown as documentation.

#[doc = include_str!("../../../book/src/overview.md")]
pub mod overview {}

#[doc = include_str!("../../../book/src/ch01-grid-model.md")]
pub mod ch01_grid_model {}

#[doc = include_str!("../../../book/src/ch02-operators.md")]
pub mod ch02_operators {}

#[doc = include_str!("../../../book/src/ch03-noise-and-paths.md")]
pub mod ch03_noise_and_paths {}

#[doc = include_str!("../../../book/src/ch04-gram-geometry.md")]
pub mod ch04_gram_geometry {}

#[doc = include_str!("../../../book/src/ch05-local-time.md")]
pub mod ch05_local_time {}

#[doc = include_str!("../../../book/src/ch06-moments.md")]
pub mod ch06_moments {}

#[doc = include_str!("../../../book/src/ch07-selfx.md")]
pub mod ch07_selfx {}

#[doc = include_str!("../../../book/src/ch08-verification.md")]
pub mod ch08_verification {}

#[doc = include_str!("../../../book/src/ch09-cli.md")]
pub mod ch09_cli {}
