//! Framewise spectral and temporal descriptors.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{N_MELS, N_MFCC};
use crate::corpus::SAMPLE_RATE;

/// Power-spectrum floor used before taking logs.
pub const POWER_FLOOR: f64 = 1e-10;

/// Windowed FFT front end with a cached plan and mel filterbank.
pub struct SpectralFrontEnd {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    buffer: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
    mel: MelFilterbank,
}

impl SpectralFrontEnd {
    pub fn new(frame_length: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(frame_length);
        let scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
        SpectralFrontEnd {
            fft,
            window: hann(frame_length),
            buffer: vec![Complex::default(); frame_length],
            scratch,
            mel: MelFilterbank::new(N_MELS, frame_length, SAMPLE_RATE as f64),
        }
    }

    /// `|FFT(hann * frame)|²` for bins `0..=N/2`.
    pub fn power_spectrum(&mut self, frame: &[f64]) -> Vec<f64> {
        assert_eq!(frame.len(), self.window.len(), "frame length mismatch");
        for ((b, &x), &w) in self.buffer.iter_mut().zip(frame).zip(&self.window) {
            *b = Complex::new(x * w, 0.0);
        }
        self.fft.process_with_scratch(&mut self.buffer, &mut self.scratch);
        self.buffer[..=frame.len() / 2].iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn mfcc(&self, spectrum: &[f64]) -> [f64; N_MFCC] {
        mfcc_with(&self.mel, spectrum)
    }
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

pub fn power_spectrum(frame: &[f64]) -> Vec<f64> {
    SpectralFrontEnd::new(frame.len()).power_spectrum(frame)
}

/// Center frequency in Hz of spectrum bin `b` for a `frame_length`-point FFT.
pub fn bin_frequency(b: usize, frame_length: usize) -> f64 {
    b as f64 * SAMPLE_RATE as f64 / frame_length as f64
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular HTK-mel filters spanning 0 Hz to Nyquist, each scaled to unit
/// area (`2 / bandwidth`).
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    /// Per filter: first bin and weights from there on.
    filters: Vec<(usize, Vec<f64>)>,
    n_bins: usize,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, frame_length: usize, sample_rate: f64) -> Self {
        let n_bins = frame_length / 2 + 1;
        let top = hz_to_mel(sample_rate / 2.0);
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64))
            .collect();
        let freqs: Vec<f64> = (0..n_bins)
            .map(|b| b as f64 * sample_rate / frame_length as f64)
            .collect();
        let filters = (0..n_mels)
            .map(|m| {
                let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
                let norm = 2.0 / (hi - lo);
                let weights: Vec<f64> = freqs
                    .iter()
                    .map(|&f| {
                        let rising = (f - lo) / (mid - lo);
                        let falling = (hi - f) / (hi - mid);
                        rising.min(falling).max(0.0) * norm
                    })
                    .collect();
                let first = weights.iter().position(|&w| w > 0.0).unwrap_or(0);
                let last = weights.iter().rposition(|&w| w > 0.0).map_or(first, |l| l + 1);
                (first, weights[first..last].to_vec())
            })
            .collect();
        MelFilterbank { filters, n_bins }
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    pub fn apply(&self, spectrum: &[f64]) -> Vec<f64> {
        assert_eq!(spectrum.len(), self.n_bins, "spectrum length mismatch");
        self.filters
            .iter()
            .map(|(first, w)| w.iter().zip(&spectrum[*first..]).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// 13 MFCCs of a power spectrum: 128 mel bands, `10 log10` with a floor,
/// orthonormal DCT-II.
pub fn mfcc(spectrum: &[f64]) -> [f64; N_MFCC] {
    let frame_length = (spectrum.len() - 1) * 2;
    let bank = MelFilterbank::new(N_MELS, frame_length, SAMPLE_RATE as f64);
    mfcc_with(&bank, spectrum)
}

fn mfcc_with(bank: &MelFilterbank, spectrum: &[f64]) -> [f64; N_MFCC] {
    let log_mel: Vec<f64> = bank
        .apply(spectrum)
        .into_iter()
        .map(|e| 10.0 * e.max(POWER_FLOOR).log10())
        .collect();
    let n = log_mel.len() as f64;
    let mut out = [0.0; N_MFCC];
    for (k, c) in out.iter_mut().enumerate() {
        let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
        let sum: f64 = log_mel
            .iter()
            .enumerate()
            .map(|(i, &x)| x * (PI * k as f64 * (2.0 * i as f64 + 1.0) / (2.0 * n)).cos())
            .sum();
        *c = scale * sum;
    }
    out
}

/// Magnitude-weighted mean frequency in Hz; 0 for a silent spectrum.
pub fn spectral_centroid(spectrum: &[f64]) -> f64 {
    let frame_length = (spectrum.len() - 1) * 2;
    let mut weighted = 0.0;
    let mut total = 0.0;
    for (b, &p) in spectrum.iter().enumerate() {
        let mag = p.sqrt();
        weighted += bin_frequency(b, frame_length) * mag;
        total += mag;
    }
    if total < 1e-12 {
        0.0
    } else {
        weighted / total
    }
}

/// Geometric over arithmetic mean of the floored power spectrum.
pub fn spectral_flatness(spectrum: &[f64]) -> f64 {
    let n = spectrum.len() as f64;
    let floored = || spectrum.iter().map(|&p| p.max(POWER_FLOOR));
    let first = floored().next().unwrap_or(POWER_FLOOR);
    if floored().all(|p| p == first) {
        return 1.0;
    }
    let (log_sum, sum) = floored().fold((0.0, 0.0), |(l, s), p| (l + p.ln(), s + p));
    let ratio = (log_sum / n).exp() / (sum / n);
    ratio.min(1.0)
}

/// Fraction of adjacent sample pairs whose sign differs (zero counts as
/// non-negative).
pub fn zero_crossing_rate(frame: &[f64]) -> f64 {
    if frame.len() < 2 {
        return 0.0;
    }
    let crossings = frame.windows(2).filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0)).count();
    crossings as f64 / (frame.len() - 1) as f64
}

pub fn rms(frame: &[f64]) -> f64 {
    if frame.is_empty() {
        return 0.0;
    }
    (frame.iter().map(|x| x * x).sum::<f64>() / frame.len() as f64).sqrt()
}

/// First MFCC of an all-zero spectrum.
pub fn silent_mfcc0() -> f64 {
    10.0 * POWER_FLOOR.log10() * (N_MELS as f64).sqrt()
}
