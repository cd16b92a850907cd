//! Probabilistic backlog, delay and output bounds for flows crossing a tandem
//! of Rayleigh-fading links, computed in the SNR domain with Mellin
//! transforms, plus a slotted simulator to check them.
//!
//! Amounts are in nats and times in slots throughout; [`traffic::to_internal`]
//! converts from kb, kbps, ms and dB.

// `!(x > 0.0)` is used on purpose so that NaN falls into the error branch.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod error;
pub mod fading;
pub mod mellin;
pub mod process;
pub mod special;
pub mod traffic;

pub mod bounds;
pub mod cli;
pub mod sim;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/domains.md")]
    mod domains {}
    #[doc = include_str!("../../../book/src/mellin.md")]
    mod mellin {}
    #[doc = include_str!("../../../book/src/rayleigh.md")]
    mod rayleigh {}
    #[doc = include_str!("../../../book/src/bounds.md")]
    mod bounds {}
    #[doc = include_str!("../../../book/src/cross.md")]
    mod cross {}
    #[doc = include_str!("../../../book/src/simulator.md")]
    mod simulator {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
