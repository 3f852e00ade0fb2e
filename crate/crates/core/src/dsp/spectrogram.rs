use std::f64::consts::PI;

use rustfft::{num_complex::Complex64, FftPlanner};

use super::DspError;

pub const DB_FLOOR: f64 = -120.0;

/// Magnitude spectrogram in dB, `db[bin][frame]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub db: Vec<Vec<f64>>,
    pub frequencies: Vec<f64>,
    /// Frame centre times in seconds.
    pub times: Vec<f64>,
}

impl Spectrogram {
    pub fn n_bins(&self) -> usize {
        self.db.len()
    }

    pub fn n_frames(&self) -> usize {
        self.times.len()
    }

    /// CSV with a header row of frame times; one row per frequency bin.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("freq_hz");
        for t in &self.times {
            out.push_str(&format!(",{t:.4}"));
        }
        out.push('\n');
        for (f, row) in self.frequencies.iter().zip(&self.db) {
            out.push_str(&format!("{f:.4}"));
            for v in row {
                out.push_str(&format!(",{v:.3}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Hann-windowed short-time Fourier magnitudes.
pub fn stft_spectrogram(x: &[f64], fs: f64, window: usize, hop: usize) -> Result<Spectrogram, DspError> {
    if window == 0 || hop == 0 {
        return Err(DspError::InvalidWindow);
    }
    if x.len() < window {
        return Err(DspError::SignalTooShort {
            needed: window,
            actual: x.len(),
        });
    }
    let n_frames = 1 + (x.len() - window) / hop;
    let n_bins = window / 2 + 1;
    // periodic Hann
    let taper: Vec<f64> = (0..window)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / window as f64).cos())
        .collect();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(window);

    let mut db = vec![vec![DB_FLOOR; n_frames]; n_bins];
    let mut buf = vec![Complex64::new(0.0, 0.0); window];
    for frame in 0..n_frames {
        let start = frame * hop;
        for (b, (&v, &w)) in buf.iter_mut().zip(x[start..start + window].iter().zip(&taper)) {
            *b = Complex64::new(v * w, 0.0);
        }
        fft.process(&mut buf);
        for (bin, row) in db.iter_mut().enumerate() {
            let mag = buf[bin].norm();
            row[frame] = if mag > 0.0 {
                (20.0 * mag.log10()).max(DB_FLOOR)
            } else {
                DB_FLOOR
            };
        }
    }

    Ok(Spectrogram {
        db,
        frequencies: (0..n_bins).map(|k| k as f64 * fs / window as f64).collect(),
        times: (0..n_frames)
            .map(|f| (f * hop) as f64 / fs + window as f64 / (2.0 * fs))
            .collect(),
    })
}
