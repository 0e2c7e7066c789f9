use std::f64::consts::PI;
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};

/// Sample rate of every ingested signal.
pub const SAMPLE_RATE: u32 = 22050;
/// Taps per polyphase branch of the resampler.
pub const RESAMPLER_TAPS: usize = 64;
/// Signals shorter than this are zero-padded on load.
const MIN_LENGTH: usize = crate::audiovec::FRAME_LENGTH;
/// Above this many phases the filter bank is evaluated on the fly.
const MAX_TABLE_PHASES: usize = 8192;

#[derive(Debug, Clone, PartialEq)]
pub struct MonoSignal {
    pub programme_id: String,
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

/// Decodes a 16-bit PCM or 32-bit float WAV file, downmixes to mono and
/// resamples to [`SAMPLE_RATE`].
pub fn load_audio(path: &Path, programme_id: &str) -> Result<MonoSignal> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let reader = hound::WavReader::open(path).map_err(|e| map_hound(e, path))?;
    let spec = reader.spec();
    if spec.channels == 0 || spec.channels > 2 {
        return Err(Error::UnsupportedWavFormat(format!("{} channels", spec.channels)));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| map_hound(e, path))?,
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| map_hound(e, path))?,
        (fmt, bits) => {
            return Err(Error::UnsupportedWavFormat(format!("{bits}-bit {fmt:?} samples")));
        }
    };
    let channels = spec.channels as usize;
    let mono: Vec<f64> = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|frame| frame.iter().sum::<f64>() / channels as f64)
            .collect()
    };
    if mono.is_empty() {
        return Err(Error::EmptyAudio(path.to_path_buf()));
    }

    let mut samples = if spec.sample_rate == SAMPLE_RATE {
        mono
    } else {
        resample(&mono, spec.sample_rate, SAMPLE_RATE)
    };
    for s in &mut samples {
        *s = s.clamp(-1.0, 1.0);
    }
    if samples.len() < MIN_LENGTH {
        warn!(
            "{programme_id}: {} samples is shorter than one frame; zero-padding to {MIN_LENGTH}",
            samples.len()
        );
        samples.resize(MIN_LENGTH, 0.0);
    }
    Ok(MonoSignal {
        programme_id: programme_id.to_string(),
        samples,
        sample_rate: SAMPLE_RATE,
    })
}

fn map_hound(e: hound::Error, path: &Path) -> Error {
    match e {
        hound::Error::IoError(io) if io.kind() == std::io::ErrorKind::NotFound => {
            Error::MissingFile(path.to_path_buf())
        }
        hound::Error::IoError(io) => Error::Io(io),
        hound::Error::Unsupported => Error::UnsupportedWavFormat("unsupported encoding".into()),
        other => Error::UnsupportedWavFormat(other.to_string()),
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Band-limited rational resampling with a Blackman-windowed sinc,
/// [`RESAMPLER_TAPS`] taps per phase. Output length is
/// `round(len * to / from)`.
pub fn resample(input: &[f64], from: u32, to: u32) -> Vec<f64> {
    assert!(from > 0 && to > 0, "sample rates must be positive");
    if from == to {
        return input.to_vec();
    }
    let g = gcd(from as u64, to as u64);
    let up = (to as u64 / g) as usize;
    let down = (from as u64 / g) as usize;
    let out_len = ((input.len() as u128 * up as u128 * 2 + down as u128) / (2 * down as u128)) as usize;

    // normalized cutoff relative to the input Nyquist rate
    let cutoff = if up < down { 0.95 * up as f64 / down as f64 } else { 1.0 };
    let half = (RESAMPLER_TAPS / 2) as isize;

    let table: Option<Vec<[f64; RESAMPLER_TAPS]>> =
        (up <= MAX_TABLE_PHASES).then(|| (0..up).map(|ph| phase_taps(ph as f64 / up as f64, cutoff)).collect());

    let mut out = Vec::with_capacity(out_len);
    for n in 0..out_len {
        let pos = n as u128 * down as u128;
        let base = (pos / up as u128) as isize;
        let phase = (pos % up as u128) as usize;
        let computed;
        let taps = match &table {
            Some(t) => &t[phase],
            None => {
                computed = phase_taps(phase as f64 / up as f64, cutoff);
                &computed
            }
        };
        let mut acc = 0.0;
        for (j, &h) in taps.iter().enumerate() {
            let idx = base + j as isize - (half - 1);
            if idx >= 0 && (idx as usize) < input.len() {
                acc += h * input[idx as usize];
            }
        }
        out.push(acc);
    }
    out
}

fn phase_taps(frac: f64, cutoff: f64) -> [f64; RESAMPLER_TAPS] {
    let half = (RESAMPLER_TAPS / 2) as f64;
    let mut taps = [0.0; RESAMPLER_TAPS];
    for (j, t) in taps.iter_mut().enumerate() {
        let d = j as f64 - (half - 1.0) - frac;
        let x = cutoff * d;
        let sinc = if x == 0.0 { 1.0 } else { (PI * x).sin() / (PI * x) };
        let u = d / half;
        let window = if u.abs() >= 1.0 {
            0.0
        } else {
            0.42 + 0.5 * (PI * u).cos() + 0.08 * (2.0 * PI * u).cos()
        };
        *t = cutoff * sinc * window;
    }
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_wav(path: &Path, spec: hound::WavSpec, samples: &[i32]) {
        let mut w = hound::WavWriter::create(path, spec).unwrap();
        for &s in samples {
            w.write_sample(s).unwrap();
        }
        w.finalize().unwrap();
    }

    fn spec(channels: u16, rate: u32, bits: u16) -> hound::WavSpec {
        hound::WavSpec {
            channels,
            sample_rate: rate,
            bits_per_sample: bits,
            sample_format: hound::SampleFormat::Int,
        }
    }

    #[test]
    fn mono_native_rate_is_bitwise_scaled() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        let raw: Vec<i32> = (0..3000).map(|i| (i * 37) % 65536 - 32768).collect();
        write_wav(&p, spec(1, 22050, 16), &raw);
        let sig = load_audio(&p, "a").unwrap();
        assert_eq!(sig.samples.len(), 3000);
        for (s, r) in sig.samples.iter().zip(&raw) {
            assert_eq!(*s, *r as f64 / 32768.0);
        }
    }

    #[test]
    fn stereo_44100_downmixed_and_halved() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.wav");
        let mut raw = Vec::new();
        for i in 0..44100 {
            let v = (8000.0 * (2.0 * PI * 300.0 * i as f64 / 44100.0).sin()) as i32;
            raw.push(v);
            raw.push(-v / 2);
        }
        write_wav(&p, spec(2, 44100, 16), &raw);
        let sig = load_audio(&p, "s").unwrap();
        assert_eq!(sig.sample_rate, 22050);
        assert!((sig.samples.len() as i64 - 22050).abs() <= 1);
        assert!(sig.samples.iter().all(|s| (-1.0..=1.0).contains(s)));
    }

    #[test]
    fn float_wav_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 22050,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let mut w = hound::WavWriter::create(&p, spec).unwrap();
        for i in 0..4096 {
            w.write_sample(if i % 2 == 0 { 0.5f32 } else { 1.5f32 }).unwrap();
        }
        w.finalize().unwrap();
        let sig = load_audio(&p, "f").unwrap();
        assert_eq!(sig.samples[0], 0.5);
        // clamped
        assert_eq!(sig.samples[1], 1.0);
    }

    #[test]
    fn pcm24_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.wav");
        write_wav(&p, spec(1, 22050, 24), &[1, 2, 3]);
        assert!(matches!(load_audio(&p, "x"), Err(Error::UnsupportedWavFormat(_))));
    }

    #[test]
    fn empty_and_missing() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.wav");
        write_wav(&p, spec(1, 22050, 16), &[]);
        assert!(matches!(load_audio(&p, "e"), Err(Error::EmptyAudio(_))));
        assert!(matches!(
            load_audio(&dir.path().join("nope.wav"), "n"),
            Err(Error::MissingFile(_))
        ));
    }

    #[test]
    fn short_signal_padded_to_one_frame() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("short.wav");
        write_wav(&p, spec(1, 22050, 16), &[100; 10]);
        let sig = load_audio(&p, "short").unwrap();
        assert_eq!(sig.samples.len(), MIN_LENGTH);
        assert_eq!(sig.samples[10], 0.0);
    }

    #[test]
    fn resample_length_law() {
        for (len, from) in [
            (44100usize, 44100u32),
            (48000, 48000),
            (1000, 8000),
            (12345, 16000),
            (777, 22051),
        ] {
            let x = vec![0.1; len];
            let y = resample(&x, from, 22050);
            let expected = (len as f64 * 22050.0 / from as f64).round() as i64;
            assert!((y.len() as i64 - expected).abs() <= 1, "{len}@{from}: {}", y.len());
        }
    }

    #[test]
    fn resampled_tone_matches_analytic_tone() {
        // independent check: evaluate the continuous tone directly at the
        // output instants and compare away from the edges
        for from in [44100u32, 16000, 48000] {
            let f = 440.0;
            let x: Vec<f64> = (0..from as usize)
                .map(|i| 0.5 * (2.0 * PI * f * i as f64 / from as f64).sin())
                .collect();
            let y = resample(&x, from, 22050);
            let worst = (200..y.len() - 200)
                .map(|n| (y[n] - 0.5 * (2.0 * PI * f * n as f64 / 22050.0).sin()).abs())
                .fold(0.0, f64::max);
            assert!(worst < 2e-3, "{from}: max error {worst}");
        }
    }

    #[test]
    fn resampler_rejects_content_above_target_nyquist() {
        let from = 44100;
        let x: Vec<f64> = (0..from as usize)
            .map(|i| (2.0 * PI * 15000.0 * i as f64 / from as f64).sin())
            .collect();
        let y = resample(&x, from, 22050);
        let rms = (y[200..y.len() - 200].iter().map(|v| v * v).sum::<f64>() / (y.len() - 400) as f64).sqrt();
        assert!(rms < 0.05, "alias energy {rms}");
    }
}
