//! Compiles the guide under `book/src` as doc-tests, one module per chapter,
//! so every listing runs with `cargo test`.

#[cfg(doctest)]
mod chapters {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/lstm.md")]
    mod lstm {}
    #[doc = include_str!("../../../book/src/additive.md")]
    mod additive {}
    #[doc = include_str!("../../../book/src/gbt.md")]
    mod gbt {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/scheduling.md")]
    mod scheduling {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
