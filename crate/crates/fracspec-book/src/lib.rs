//! Runs the code snippets of the guide in `book/` as doc-tests, one module
//! per chapter so a failure names its chapter.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/measures.md")]
pub mod measures {}

#[doc = include_str!("../../../book/src/besov.md")]
pub mod besov {}

#[doc = include_str!("../../../book/src/symbols.md")]
pub mod symbols {}

#[doc = include_str!("../../../book/src/operators.md")]
pub mod operators {}

#[doc = include_str!("../../../book/src/spectra.md")]
pub mod spectra {}

#[doc = include_str!("../../../book/src/s_numbers.md")]
pub mod s_numbers {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
