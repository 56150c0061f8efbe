//! Two-user broadcast erasure channels with receiver caches: rate regions,
//! coding schemes under several CSIT and cache-knowledge models, and a Monte
//! Carlo harness that measures them against their target corners.

pub mod error;
pub mod gf2;
pub mod channel;
pub mod protocols;
pub mod regions;
pub mod sim;

/// Compiles and runs the code in the guide under `book/src`.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/gf2.md")]
    struct Gf2;
    #[doc = include_str!("../../../book/src/channel.md")]
    struct Channel;
    #[doc = include_str!("../../../book/src/regions.md")]
    struct Regions;
    #[doc = include_str!("../../../book/src/protocols.md")]
    struct Protocols;
    #[doc = include_str!("../../../book/src/engineering.md")]
    struct Engineering;
    #[doc = include_str!("../../../book/src/simulation.md")]
    struct Simulation;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
    #[doc = include_str!("../../../book/src/acceptance.md")]
    struct Acceptance;
}
