//! Option pricing for traders with private information.
//!
//! The crate covers binomial and trinomial lattices whose branch probabilities
//! are deformed by trader information, the matching closed-form prices, a
//! random-clock (subordinated) market with a log-stable call pricer, simulation
//! of informed-trader payoffs and calibration of implied information surfaces.

pub mod calibration;
pub mod closed_form;
pub mod error;
pub mod informed_sim;
pub mod lattice;
pub mod model;
mod rootfind;
mod stats;
pub mod subordination;

pub use error::{Error, Result};
pub use model::{
    norm_cdf, norm_pdf, perceived_sharpe, sharpe, BinaryProbModel, MarketParams, OptionKind,
    OptionSpec, PerceivedParams, TraderInfo,
};

/// Generator used for every seeded computation: ChaCha8 seeded from `seed`, on stream `stream`.
pub fn seeded_rng(seed: u64, stream: u64) -> rand_chacha::ChaCha8Rng {
    stats::stream_rng(seed, stream)
}
