//! Laser phase-noise true random number generation toolkit.
//!
//! The crate covers the whole chain of a delayed self-homodyne TRNG:
//!
//! * [`phase_sim`] synthesizes 8-bit ADC samples of the beat signal produced
//!   by a Wiener-diffusing laser phase,
//! * [`ingest`] reads and writes headerless sample dumps and packed
//!   bitstreams,
//! * [`conditioning`] applies pairwise XOR debiasing and m-LSB extraction,
//! * [`entropy`] and [`spectral`] quantify the randomness of the data,
//! * [`battery`] runs the ENT metrics and an eight-test NIST STS subset,
//! * [`cli`] wires the stages together behind the `laser-trng` binary.
//!
//! Data-parallel loops run on rayon when the `parallel` feature is enabled
//! (the default) and fall back to plain iterators otherwise. Results never
//! depend on the thread count.

pub mod battery;
pub mod bitstream;
pub mod cli;
pub mod conditioning;
pub mod entropy;
pub mod error;
pub mod ingest;
pub mod par;
pub mod phase_sim;
pub mod special;
pub mod spectral;

pub use bitstream::BitStream;
pub use error::{Error, Result};
pub use phase_sim::{SampleBlock, SimConfig};
