//! The guide chapters under `book/`, included here so that `cargo test`
//! compiles and runs every Rust snippet in the book as a doc-test. A failing
//! snippet names its chapter module.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/algebras.md")]
pub mod algebras {}

#[doc = include_str!("../../../book/src/modular.md")]
pub mod modular_theory {}

#[doc = include_str!("../../../book/src/entropy.md")]
pub mod entropy_chapter {}

#[doc = include_str!("../../../book/src/entanglement.md")]
pub mod entanglement_chapter {}

#[doc = include_str!("../../../book/src/nuclearity.md")]
pub mod nuclearity_chapter {}

#[doc = include_str!("../../../book/src/inclusions.md")]
pub mod inclusions_chapter {}

#[doc = include_str!("../../../book/src/harness.md")]
pub mod harness_chapter {}
