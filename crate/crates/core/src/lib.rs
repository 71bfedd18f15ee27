pub mod dataset;
pub mod error;
pub mod rng;
pub mod stats;
pub mod synthgen;
pub mod io;
pub mod matcher;
pub mod neural;
pub mod kmf;
pub mod chimeric;
pub mod kang;
pub mod pipeline;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/datasets.md")]
    mod datasets {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    mod synthetic {}
    #[doc = include_str!("../../../book/src/statistics.md")]
    mod statistics {}
    #[doc = include_str!("../../../book/src/matching.md")]
    mod matching {}
    #[doc = include_str!("../../../book/src/kmf.md")]
    mod kmf {}
    #[doc = include_str!("../../../book/src/chimeric.md")]
    mod chimeric {}
    #[doc = include_str!("../../../book/src/kang.md")]
    mod kang {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
