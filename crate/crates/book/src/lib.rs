//! The guide in `book/` compiled as doc-tests, one module per chapter, so
//! every listing is checked by `cargo test`.

#[doc = include_str!("../../../book/src/intro.md")]
pub mod intro {}
#[doc = include_str!("../../../book/src/weights.md")]
pub mod weights {}
#[doc = include_str!("../../../book/src/norms.md")]
pub mod norms {}
#[doc = include_str!("../../../book/src/construction.md")]
pub mod construction {}
#[doc = include_str!("../../../book/src/embedding.md")]
pub mod embedding {}
#[doc = include_str!("../../../book/src/conditionality.md")]
pub mod conditionality {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
