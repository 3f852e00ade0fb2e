//! Orthogonal discrete wavelet transform (Mallat cascade) with symmetric
//! half-sample boundary extension.
//!
//! Each analysis level maps `n` samples to `⌊(n + F − 1) / 2⌋`
//! coefficients per band for a filter of length `F`. The slight redundancy
//! at the edges is what makes symmetric extension perfectly invertible for
//! non-symmetric orthogonal filters.

use super::DspError;

#[derive(Debug, Clone, PartialEq)]
pub struct WaveletSpec {
    pub name: String,
    pub dec_lo: Vec<f64>,
    pub dec_hi: Vec<f64>,
    pub rec_lo: Vec<f64>,
    pub rec_hi: Vec<f64>,
}

// Minimum-phase Daubechies scaling filters (reconstruction low-pass),
// derived by spectral factorization at 60 digits.
const DB1: [f64; 2] = [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2];
const DB2: [f64; 4] = [
    0.482_962_913_144_534_143_37,
    0.836_516_303_737_807_905_58,
    0.224_143_868_042_013_381_03,
    -0.129_409_522_551_260_381_17,
];
const DB4: [f64; 8] = [
    0.230_377_813_308_896_500_86,
    0.714_846_570_552_915_647_09,
    0.630_880_767_929_858_907_88,
    -0.027_983_769_416_859_854_211,
    -0.187_034_811_719_093_084_08,
    0.030_841_381_835_560_763_627,
    0.032_883_011_666_885_199_735,
    -0.010_597_401_785_069_032_105,
];
const DB6: [f64; 12] = [
    0.111_540_743_350_109_463_62,
    0.494_623_890_398_453_085_68,
    0.751_133_908_021_095_350_68,
    0.315_250_351_709_197_629_09,
    -0.226_264_693_965_439_820_08,
    -0.129_766_867_567_261_935_56,
    0.097_501_605_587_323_049_102,
    0.027_522_865_530_305_728_626,
    -0.031_582_039_317_486_029_565,
    0.000_553_842_201_161_496_139_25,
    0.004_777_257_510_945_510_639_6,
    -0.001_077_301_085_308_479_564_9,
];

impl WaveletSpec {
    /// Builds the four filters of an orthogonal wavelet from its scaling
    /// (reconstruction low-pass) filter.
    pub fn from_scaling(name: &str, rec_lo: &[f64]) -> Self {
        let rec_lo = rec_lo.to_vec();
        let dec_lo: Vec<f64> = rec_lo.iter().rev().copied().collect();
        let rec_hi: Vec<f64> = dec_lo
            .iter()
            .enumerate()
            .map(|(k, &h)| if k % 2 == 0 { h } else { -h })
            .collect();
        let dec_hi = rec_hi.iter().rev().copied().collect();
        Self {
            name: name.to_owned(),
            dec_lo,
            dec_hi,
            rec_lo,
            rec_hi,
        }
    }

    /// `haar`/`db1`, `db2`, `db4` or `db6`.
    pub fn by_name(name: &str) -> Result<Self, DspError> {
        let taps: &[f64] = match name.to_ascii_lowercase().as_str() {
            "haar" | "db1" => &DB1,
            "db2" => &DB2,
            "db4" => &DB4,
            "db6" => &DB6,
            _ => return Err(DspError::UnknownWavelet(name.to_owned())),
        };
        Ok(Self::from_scaling(name, taps))
    }

    pub fn filter_len(&self) -> usize {
        self.dec_lo.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DwtCoefficients {
    pub approximation: Vec<f64>,
    /// Detail bands, finest (level 1) first.
    pub details: Vec<Vec<f64>>,
    /// Input length at each level, finest first; `lengths[0]` is the signal length.
    pub lengths: Vec<usize>,
    pub original_length: usize,
    pub levels: usize,
    pub wavelet: WaveletSpec,
}

/// Half-sample symmetric index: `… x1 x0 | x0 x1 … xn-1 | xn-1 xn-2 …`.
#[inline]
fn symmetric_index(k: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = k.rem_euclid(period) as usize;
    if m < n {
        m
    } else {
        2 * n - 1 - m
    }
}

pub(crate) fn coeff_len(n: usize, filter_len: usize) -> usize {
    (n + filter_len - 1) / 2
}

/// Convolve with both analysis filters and keep odd output positions.
fn analyze_level(x: &[f64], w: &WaveletSpec) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let f = w.filter_len();
    let m = coeff_len(n, f);
    let mut lo = Vec::with_capacity(m);
    let mut hi = Vec::with_capacity(m);
    for i in 0..m {
        let pos = 2 * i + 1;
        let (mut a, mut d) = (0.0, 0.0);
        for j in 0..f {
            let k = pos as isize - j as isize;
            let v = if k >= 0 && (k as usize) < n {
                x[k as usize]
            } else {
                x[symmetric_index(k, n)]
            };
            a += w.dec_lo[j] * v;
            d += w.dec_hi[j] * v;
        }
        lo.push(a);
        hi.push(d);
    }
    (lo, hi)
}

/// Upsample both bands, convolve with the synthesis filters and keep the
/// `2m − F + 2` fully-overlapped outputs, truncated to `out_len`.
fn synthesize_level(lo: &[f64], hi: &[f64], w: &WaveletSpec, out_len: usize) -> Vec<f64> {
    let f = w.filter_len();
    let m = lo.len();
    let full = 2 * m + 2 - f;
    let mut out = vec![0.0; full.max(out_len)];
    for (i, o) in out.iter_mut().enumerate().take(full) {
        // z[i + f - 2] = Σ_k a[k] g[i + f - 2 - 2k]
        let n = i + f - 2;
        let k_hi = (n / 2).min(m - 1);
        let k_lo = (n + 1).saturating_sub(f).div_ceil(2);
        let mut acc = 0.0;
        for k in k_lo..=k_hi {
            let tap = n - 2 * k;
            acc += lo[k] * w.rec_lo[tap] + hi[k] * w.rec_hi[tap];
        }
        *o = acc;
    }
    out.truncate(out_len);
    out
}

/// Multilevel analysis.
pub fn dwt_analyze(x: &[f64], wavelet: &WaveletSpec, levels: usize) -> Result<DwtCoefficients, DspError> {
    if levels == 0 {
        return Err(DspError::DecompositionError("levels must be at least 1".into()));
    }
    if levels >= usize::BITS as usize || x.len() < (1usize << levels) {
        return Err(DspError::DecompositionError(format!(
            "{} samples is too short for {levels} levels",
            x.len()
        )));
    }
    let mut details = Vec::with_capacity(levels);
    let mut lengths = Vec::with_capacity(levels);
    let mut current = x.to_vec();
    for _ in 0..levels {
        lengths.push(current.len());
        let (lo, hi) = analyze_level(&current, wavelet);
        details.push(hi);
        current = lo;
    }
    Ok(DwtCoefficients {
        approximation: current,
        details,
        lengths,
        original_length: x.len(),
        levels,
        wavelet: wavelet.clone(),
    })
}

/// Multilevel synthesis; output has `coeffs.original_length` samples.
pub fn dwt_synthesize(coeffs: &DwtCoefficients) -> Result<Vec<f64>, DspError> {
    let w = &coeffs.wavelet;
    let f = w.filter_len();
    let inconsistent = |m: String| Err(DspError::ReconstructionError(m));
    if coeffs.levels == 0 || coeffs.details.len() != coeffs.levels || coeffs.lengths.len() != coeffs.levels {
        return inconsistent("level count does not match band count".into());
    }
    if coeffs.lengths[0] != coeffs.original_length {
        return inconsistent("first level length differs from original length".into());
    }
    let mut current = coeffs.approximation.clone();
    for level in (0..coeffs.levels).rev() {
        let n = coeffs.lengths[level];
        let expected = coeff_len(n, f);
        let detail = &coeffs.details[level];
        if current.len() != expected || detail.len() != expected {
            return inconsistent(format!(
                "level {}: expected {expected} coefficients, found {} / {}",
                level + 1,
                current.len(),
                detail.len()
            ));
        }
        if 2 * expected + 2 < f + n {
            return inconsistent(format!("level {} cannot reach {n} samples", level + 1));
        }
        current = synthesize_level(&current, detail, w, n);
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_signal(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn filters_are_orthonormal() {
        for name in ["haar", "db2", "db4", "db6"] {
            let w = WaveletSpec::by_name(name).unwrap();
            let sum: f64 = w.dec_lo.iter().sum();
            assert!((sum - std::f64::consts::SQRT_2).abs() < 1e-12, "{name}: {sum}");
            let f = w.filter_len();
            // double-shift orthogonality
            for shift in (0..f).step_by(2) {
                let dot: f64 = (0..f - shift).map(|k| w.dec_lo[k] * w.dec_lo[k + shift]).sum();
                let want = if shift == 0 { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-14, "{name} shift {shift}: {dot}");
            }
            let hi_sum: f64 = w.dec_hi.iter().sum();
            assert!(hi_sum.abs() < 1e-14);
            // quadrature mirror: dec_hi[k] = (-1)^(k+1) dec_lo[F-1-k]
            for k in 0..f {
                let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
                assert_eq!(w.dec_hi[k], sign * w.dec_lo[f - 1 - k]);
            }
        }
    }

    #[test]
    fn unknown_wavelet() {
        assert!(matches!(WaveletSpec::by_name("sym5"), Err(DspError::UnknownWavelet(_))));
    }

    #[test]
    fn perfect_reconstruction() {
        for name in ["haar", "db2", "db4", "db6"] {
            let w = WaveletSpec::by_name(name).unwrap();
            for n in [512, 1000, 1023, 1024] {
                let x = random_signal(n, n as u64);
                for levels in 1..=7 {
                    let c = dwt_analyze(&x, &w, levels).unwrap();
                    let y = dwt_synthesize(&c).unwrap();
                    assert_eq!(y.len(), n);
                    let err = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    assert!(err < 1e-10, "{name} n={n} L={levels}: {err}");
                }
            }
        }
    }

    #[test]
    fn zeros_and_constants() {
        let w = WaveletSpec::by_name("db4").unwrap();
        let c = dwt_analyze(&[0.0; 256], &w, 4).unwrap();
        assert!(c
            .approximation
            .iter()
            .chain(c.details.iter().flatten())
            .all(|v| *v == 0.0));
        assert!(dwt_synthesize(&c).unwrap().iter().all(|v| *v == 0.0));

        let levels = 5;
        let c = dwt_analyze(&[2.5; 1000], &w, levels).unwrap();
        let want = 2.5 * std::f64::consts::SQRT_2.powi(levels as i32);
        assert!(c.details.iter().flatten().all(|d| d.abs() < 1e-9));
        assert!(c.approximation.iter().all(|a| (a - want).abs() < 1e-9));
    }

    #[test]
    fn band_lengths() {
        let w = WaveletSpec::by_name("db4").unwrap();
        let c = dwt_analyze(&random_signal(1000, 1), &w, 3).unwrap();
        assert_eq!(c.lengths, vec![1000, 503, 255]);
        assert_eq!(c.details[0].len(), 503);
        assert_eq!(c.approximation.len(), 131);
    }

    #[test]
    fn level_errors() {
        let w = WaveletSpec::by_name("db4").unwrap();
        assert!(matches!(
            dwt_analyze(&[0.0; 64], &w, 0),
            Err(DspError::DecompositionError(_))
        ));
        assert!(matches!(
            dwt_analyze(&[0.0; 64], &w, 7),
            Err(DspError::DecompositionError(_))
        ));
        assert!(dwt_analyze(&[0.0; 64], &w, 6).is_ok());

        let mut c = dwt_analyze(&random_signal(128, 3), &w, 3).unwrap();
        c.details[1].pop();
        assert!(matches!(dwt_synthesize(&c), Err(DspError::ReconstructionError(_))));
    }
}
