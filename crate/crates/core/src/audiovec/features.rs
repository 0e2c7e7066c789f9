use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::framing::Frames;
use super::spectral::{rms, spectral_centroid, spectral_flatness, zero_crossing_rate, SpectralFrontEnd};
use super::{FEATURE_DIM, FRAME_LENGTH, HOP_LENGTH, N_MFCC};
use crate::artifact::{Artifact, ArtifactHeader};
use crate::corpus::MonoSignal;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Column holding the spectral centroid (Hz).
pub const COL_CENTROID: usize = N_MFCC;
pub const COL_ZCR: usize = N_MFCC + 1;
pub const COL_FLATNESS: usize = N_MFCC + 2;
pub const COL_RMS: usize = N_MFCC + 3;

/// Frames x 17 matrix: 13 MFCCs, centroid, ZCR, flatness, RMS.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFeatureMatrix {
    pub programme_id: String,
    pub rows: Matrix,
}

impl FrameFeatureMatrix {
    pub fn frames(&self) -> usize {
        self.rows.rows()
    }

    pub fn to_artifact(&self) -> Artifact {
        let mut header = ArtifactHeader::new("features");
        header.dims.insert("frames".into(), self.frames());
        header.dims.insert("features".into(), FEATURE_DIM);
        header.dims.insert("frame_length".into(), FRAME_LENGTH);
        header.dims.insert("hop".into(), HOP_LENGTH);
        header.matrices = vec!["features".into()];
        header.extra = serde_json::json!({ "programme_id": self.programme_id });
        Artifact {
            header,
            matrices: vec![self.rows.clone()],
        }
    }

    pub fn from_artifact(a: &Artifact) -> Result<Self> {
        a.expect_type("features")?;
        let rows = a.matrix("features")?.clone();
        if rows.cols() != FEATURE_DIM {
            return Err(Error::DimensionMismatch {
                expected: FEATURE_DIM,
                actual: rows.cols(),
            });
        }
        Ok(FrameFeatureMatrix {
            programme_id: serde_json::from_value(a.header.extra["programme_id"].clone())?,
            rows,
        })
    }

    /// Drops frames whose RMS is below `threshold`, keeping at least the
    /// loudest frame.
    pub fn trim_silence(&self, threshold: f64) -> FrameFeatureMatrix {
        let kept: Vec<&[f64]> = self.rows.row_iter().filter(|r| r[COL_RMS] >= threshold).collect();
        let rows = if kept.is_empty() {
            let loudest = self
                .rows
                .row_iter()
                .max_by(|a, b| a[COL_RMS].total_cmp(&b[COL_RMS]))
                .expect("at least one frame");
            Matrix::from_rows(&[loudest])
        } else {
            Matrix::from_rows(&kept)
        };
        FrameFeatureMatrix {
            programme_id: self.programme_id.clone(),
            rows,
        }
    }
}

/// Feature row for one time-domain frame.
pub fn frame_features(front: &mut SpectralFrontEnd, frame: &[f64]) -> [f64; FEATURE_DIM] {
    let spectrum = front.power_spectrum(frame);
    let mut row = [0.0; FEATURE_DIM];
    row[..N_MFCC].copy_from_slice(&front.mfcc(&spectrum));
    row[COL_CENTROID] = spectral_centroid(&spectrum);
    row[COL_ZCR] = zero_crossing_rate(frame);
    row[COL_FLATNESS] = spectral_flatness(&spectrum);
    row[COL_RMS] = rms(frame);
    row
}

/// Spectral columns use the Hann-windowed spectrum; ZCR and RMS use the raw
/// frame. Frames are processed in parallel; results do not depend on
/// scheduling.
pub fn extract_features(signal: &MonoSignal) -> FrameFeatureMatrix {
    let frames = Frames::new(&signal.samples, FRAME_LENGTH, HOP_LENGTH);
    let rows: Vec<[f64; FEATURE_DIM]> = (0..frames.len())
        .into_par_iter()
        .map_init(
            || (SpectralFrontEnd::new(FRAME_LENGTH), Vec::with_capacity(FRAME_LENGTH)),
            |(front, buf), i| {
                frames.fill(i, buf);
                frame_features(front, buf)
            },
        )
        .collect();
    FrameFeatureMatrix {
        programme_id: signal.programme_id.clone(),
        rows: Matrix::from_rows(&rows),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Columns whose variance was zero; their std was replaced by 1.
    pub flagged: Vec<bool>,
}

impl NormalizationStats {
    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }

    pub fn apply_matrix(&self, rows: &Matrix) -> Matrix {
        let mut out = rows.clone();
        for r in 0..out.rows() {
            for (c, x) in out.row_mut(r).iter_mut().enumerate() {
                *x = (*x - self.mean[c]) / self.std[c];
            }
        }
        out
    }
}

/// Per-column mean and population standard deviation.
pub fn fit_normalization(frames: &Matrix) -> Result<NormalizationStats> {
    let n = frames.rows();
    if n < 2 {
        return Err(Error::InsufficientFrames(n));
    }
    let cols = frames.cols();
    let mut mean = vec![0.0; cols];
    for row in frames.row_iter() {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; cols];
    for row in frames.row_iter() {
        for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    let mut flagged = vec![false; cols];
    let std = var
        .iter()
        .enumerate()
        .map(|(c, v)| {
            let s = (v / n as f64).sqrt();
            if s > 1e-12 * mean[c].abs().max(1.0) {
                s
            } else {
                flagged[c] = true;
                1.0
            }
        })
        .collect();
    let nflag = flagged.iter().filter(|&&f| f).count();
    if nflag > 0 {
        warn!("{nflag} feature column(s) have zero variance; using std = 1");
    }
    Ok(NormalizationStats { mean, std, flagged })
}

/// Mean and standard deviation of each normalized feature over a
/// programme's frames (34 values). Alternative audio representation.
pub fn pooled_features(features: &FrameFeatureMatrix, stats: &NormalizationStats) -> Vec<f64> {
    let z = stats.apply_matrix(&features.rows);
    let n = z.rows() as f64;
    let cols = z.cols();
    let mut out = vec![0.0; 2 * cols];
    for row in z.row_iter() {
        for (o, x) in out.iter_mut().zip(row) {
            *o += x / n;
        }
    }
    for row in z.row_iter() {
        for c in 0..cols {
            out[cols + c] += (row[c] - out[c]).powi(2) / n;
        }
    }
    for v in &mut out[cols..] {
        *v = v.sqrt();
    }
    out
}
