//! Support-aware histogram approximation of strict turnstile streams.

pub mod baselines;
pub mod dp;
pub mod error;
pub mod gadgets;
pub mod hashing;
pub mod hhh;
pub mod histogram;
pub mod ingest;
pub mod onepass;
pub mod sketch;
pub mod stream;
pub mod sweep;
pub mod synth;
pub mod twopass;

pub use error::{Error, Result};
