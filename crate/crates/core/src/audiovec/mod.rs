//! Frame-level acoustic features and the bag-of-audio-words encoding.

mod codebook;
mod features;
mod framing;
pub mod spectral;

pub use codebook::{encode_boaw, fit_codebook, nearest_centroid, BoawVector, Codebook, CodebookParams};
pub use features::{
    extract_features, fit_normalization, frame_features, pooled_features, FrameFeatureMatrix, NormalizationStats,
    COL_CENTROID, COL_FLATNESS, COL_RMS, COL_ZCR,
};
pub use framing::{frame_signal, Frames};
pub use spectral::{
    mfcc, power_spectrum, rms, spectral_centroid, spectral_flatness, zero_crossing_rate, SpectralFrontEnd,
};

pub const FRAME_LENGTH: usize = 2048;
pub const HOP_LENGTH: usize = 512;
pub const N_MELS: usize = 128;
pub const N_MFCC: usize = 13;
/// 13 MFCCs, centroid, zero-crossing rate, flatness, RMS.
pub const FEATURE_DIM: usize = N_MFCC + 4;
pub const DEFAULT_CODEBOOK_SIZE: usize = 50;
