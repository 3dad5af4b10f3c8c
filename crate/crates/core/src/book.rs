//! The guide chapters, compiled as doctests so their snippets track the API.

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/problems.md")]
mod problems {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/designs.md")]
mod designs {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/surrogates.md")]
mod surrogates {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/pareto.md")]
mod pareto {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/acquisition.md")]
mod acquisition {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/moea.md")]
mod moea {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/workflows.md")]
mod workflows {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod cli {}
