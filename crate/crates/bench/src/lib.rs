//! Synthetic inputs shared by the benchmarks.

use mmsim_core::corpus::{MonoSignal, SAMPLE_RATE};
use mmsim_core::Matrix;

/// Two-tone signal of the given length in seconds.
pub fn tone_signal(seconds: f64) -> MonoSignal {
    let sr = SAMPLE_RATE as f64;
    let len = (seconds * sr) as usize;
    let samples = (0..len)
        .map(|i| {
            let t = i as f64 / sr;
            0.6 * (2.0 * std::f64::consts::PI * 440.0 * t).sin() + 0.3 * (2.0 * std::f64::consts::PI * 1320.0 * t).sin()
        })
        .collect();
    MonoSignal {
        programme_id: "bench".into(),
        samples,
        sample_rate: SAMPLE_RATE,
    }
}

/// Deterministic pseudo-count matrix (rows x cols) without an RNG.
pub fn count_matrix(rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |i, j| ((i * 31 + j * 17 + i * j) % 7) as f64)
}
