//! Large-deviation tools for stochastic resonance in slowly forced double wells.
//!
//! The guide in `book/` walks through the modules with runnable examples.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod action;
pub mod chain;
pub mod cli;
pub mod config;
pub mod error;
pub mod landscape;
pub(crate) mod linalg;
pub mod optim;
pub mod profile;
pub mod resonance;
pub mod rng;
pub mod sde;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/landscape.md")]
    mod landscape {}
    #[doc = include_str!("../../../book/src/action.md")]
    mod action {}
    #[doc = include_str!("../../../book/src/sde.md")]
    mod sde {}
    #[doc = include_str!("../../../book/src/resonance.md")]
    mod resonance {}
    #[doc = include_str!("../../../book/src/chain.md")]
    mod chain {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
