//! Compressive phase retrieval from magnitude-only measurements.
//!
//! A K-sparse complex signal of length n is sketched by a sparse binary code
//! (balls into bins) modulated by four trigonometric rows per bin. The
//! decoders color balls bin by bin with guess-and-check processors and union
//! their relative phases, in time and memory linear in K.
//!
//! Indices are 1-based everywhere in the public API.

pub mod analysis;
pub mod decoder;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod fourier;
pub mod io;
pub mod measurement;
pub mod nonsparse;
pub mod signal;

pub use num_complex::Complex64;

pub use decoder::{
    decode, decode_multicolor, decode_unicolor, Algorithm, DecodeResult, DecodeStatus,
    DecoderOptions,
};
pub use ensemble::{CodeEnsemble, EnsembleKind, InducedGraph};
pub use error::{Error, Result};
pub use measurement::{encode, MeasurementSet, ModulationKind, ModulationParams};
pub use signal::{align_global_phase, generate_signal, RngSeed, SparseSignal, ValueModel};
