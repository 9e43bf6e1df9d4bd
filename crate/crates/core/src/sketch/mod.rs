//! Streaming sketches: count-min, space-saving, heavy hitters, L0 sampling.

mod countmin;
mod heavy;
mod l0;
mod space_saving;

pub use countmin::CountMin;
pub use heavy::{HeavyHitterSketch, HhMode};
pub use l0::{l0_repetitions, L0Outcome, L0Sampler, OneSparseUnit};
pub use space_saving::{SpaceSaving, SsEntry};
