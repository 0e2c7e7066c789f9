use crate::corpus::MonoSignal;

/// Centered framing over a reflection-padded signal: `frame_length / 2`
/// samples are mirrored onto each end and frame `i` starts at padded offset
/// `i * hop`. There are `1 + len / hop` frames.
#[derive(Debug, Clone, Copy)]
pub struct Frames<'a> {
    samples: &'a [f64],
    frame_length: usize,
    hop: usize,
}

impl<'a> Frames<'a> {
    pub fn new(samples: &'a [f64], frame_length: usize, hop: usize) -> Self {
        assert!(hop > 0 && frame_length > 0, "frame length and hop must be positive");
        Frames {
            samples,
            frame_length,
            hop,
        }
    }

    pub fn len(&self) -> usize {
        1 + self.samples.len() / self.hop
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn frame_length(&self) -> usize {
        self.frame_length
    }

    /// Writes frame `i` into `out` (cleared first).
    pub fn fill(&self, i: usize, out: &mut Vec<f64>) {
        out.clear();
        let pad = (self.frame_length / 2) as isize;
        let start = (i * self.hop) as isize - pad;
        out.extend((0..self.frame_length as isize).map(|j| self.sample_reflected(start + j)));
    }

    pub fn frame(&self, i: usize) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.frame_length);
        self.fill(i, &mut v);
        v
    }

    /// Mirror about the end samples without repeating them
    /// (`x[-1] = x[1]`, `x[L] = x[L-2]`), repeated as often as needed.
    fn sample_reflected(&self, idx: isize) -> f64 {
        let len = self.samples.len() as isize;
        match len {
            0 => 0.0,
            1 => self.samples[0],
            _ => {
                let period = 2 * (len - 1);
                let mut k = idx.rem_euclid(period);
                if k >= len {
                    k = period - k;
                }
                self.samples[k as usize]
            }
        }
    }
}

pub fn frame_signal(signal: &MonoSignal, frame_length: usize, hop: usize) -> Vec<Vec<f64>> {
    let frames = Frames::new(&signal.samples, frame_length, hop);
    (0..frames.len()).map(|i| frames.frame(i)).collect()
}
