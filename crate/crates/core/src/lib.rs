//! Room impulse response synthesis and reverberant-speech dataset tooling.
//!
//! Three RIR generators share one [`scene::Scene`] description:
//! a low-frequency wave solver ([`fdtd`]), a full-band geometric solver
//! ([`geo`]: image sources plus diffuse ray tracing) and a crossover merge of
//! the two ([`hybrid`]). Around them sit the analysis and evaluation pieces
//! ([`analysis`], [`srmr`], [`wpe`]) and the data pipeline ([`dataset`]).

// `!(x > 0.0)` is how NaN gets rejected along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod audio;
pub mod cli;
pub mod dataset;
pub mod dsp;
pub mod error;
pub mod fdtd;
pub mod geo;
pub mod hybrid;
pub mod rir;
pub mod scene;
pub mod srmr;
pub mod wpe;

pub use error::{Error, Result};
pub use rir::{ImpulseResponse, Method};
pub use scene::{parse_scene, Scene};
