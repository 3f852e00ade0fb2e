//! Butterworth low-pass design (analog prototype, pre-warped bilinear
//! transform) factored into second-order sections, plus zero-phase
//! forward-backward application.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::DspError;

/// One biquad with unity `a0`:
/// `H(z) = (b0 + b1 z⁻¹ + b2 z⁻²) / (1 + a1 z⁻¹ + a2 z⁻²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    pub fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b0 + self.b1 * z_inv + self.b2 * z2) / (1.0 + self.a1 * z_inv + self.a2 * z2)
    }

    /// Moduli of the two poles, from the denominator's roots.
    pub fn pole_moduli(&self) -> [f64; 2] {
        // z² + a1 z + a2 = 0
        let disc = Complex64::new(self.a1 * self.a1 - 4.0 * self.a2, 0.0).sqrt();
        let p1 = (-self.a1 + disc) / 2.0;
        let p2 = (-self.a1 - disc) / 2.0;
        [p1.norm(), p2.norm()]
    }

    fn dc_gain(&self) -> f64 {
        (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2)
    }

    /// Transposed direct form II over `x` in place, starting from `state`.
    fn run(&self, x: &mut [f64], mut s1: f64, mut s2: f64) {
        for v in x.iter_mut() {
            let input = *v;
            let y = self.b0 * input + s1;
            s1 = self.b1 * input - self.a1 * y + s2;
            s2 = self.b2 * input - self.a2 * y;
            *v = y;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SosCascade {
    pub sections: Vec<Biquad>,
    pub design_order: usize,
    pub cutoff_hz: f64,
    pub sampling_rate: f64,
}

impl SosCascade {
    /// Complex frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / self.sampling_rate;
        let z_inv = Complex64::from_polar(1.0, -w);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
    }

    pub fn magnitude(&self, freq_hz: f64) -> f64 {
        self.response(freq_hz).norm()
    }

    /// Edge padding used by zero-phase application.
    pub fn pad_len(&self) -> usize {
        3 * self.design_order
    }

    /// Single causal pass with steady-state initial conditions scaled by
    /// the first sample, so a constant input produces no start-up transient.
    fn run_causal(&self, x: &mut [f64]) {
        let Some(&x0) = x.first() else { return };
        let mut level = x0;
        for s in &self.sections {
            let g = s.dc_gain();
            let s1 = (g - s.b0) * level;
            let s2 = (s.b2 - s.a2 * g) * level;
            s.run(x, s1, s2);
            level *= g;
        }
    }
}

/// Designs an order-`order` Butterworth low-pass at `cutoff_hz`.
///
/// Sections are ordered by ascending pole Q; an odd order leaves one
/// first-order section (stored with `b2 = a2 = 0`) at the front.
pub fn design_lowpass(order: usize, cutoff_hz: f64, fs: f64) -> Result<SosCascade, DspError> {
    if order == 0 {
        return Err(DspError::DesignError("order must be at least 1".into()));
    }
    if !(fs > 0.0 && cutoff_hz > 0.0 && cutoff_hz < fs / 2.0) {
        return Err(DspError::DesignError(format!(
            "cutoff {cutoff_hz} Hz must lie in (0, {}) for fs {fs} Hz",
            fs / 2.0
        )));
    }

    // Pre-warped analog cutoff so the -3 dB point lands exactly on cutoff_hz.
    let k = 2.0 * fs;
    let wc = k * (PI * cutoff_hz / fs).tan();
    let bilinear = |s: Complex64| (k + s) / (k - s);

    // (Q, section)
    let mut sections: Vec<(f64, Biquad)> = Vec::with_capacity(order.div_ceil(2));
    for i in 0..order / 2 {
        let theta = PI * (2 * i + 1 + order) as f64 / (2 * order) as f64;
        let pole_s = Complex64::from_polar(wc, theta);
        let q = 1.0 / (2.0 * (-theta.cos()));
        let pole_z = bilinear(pole_s);
        let a1 = -2.0 * pole_z.re;
        let a2 = pole_z.norm_sqr();
        // zeros at z = -1, unity gain at DC
        let g = (1.0 + a1 + a2) / 4.0;
        sections.push((
            q,
            Biquad {
                b0: g,
                b1: 2.0 * g,
                b2: g,
                a1,
                a2,
            },
        ));
    }
    if order % 2 == 1 {
        let pole_z = bilinear(Complex64::new(-wc, 0.0)).re;
        let g = (1.0 - pole_z) / 2.0;
        sections.push((
            0.5,
            Biquad {
                b0: g,
                b1: g,
                b2: 0.0,
                a1: -pole_z,
                a2: 0.0,
            },
        ));
    }
    sections.sort_by(|a, b| a.0.total_cmp(&b.0));

    Ok(SosCascade {
        sections: sections.into_iter().map(|(_, s)| s).collect(),
        design_order: order,
        cutoff_hz,
        sampling_rate: fs,
    })
}

/// Filters `x`. With `zero_phase`, runs forward then backward over an
/// odd-reflected extension of `3 × order` samples at each edge.
pub fn apply_filter(sos: &SosCascade, x: &[f64], zero_phase: bool) -> Result<Vec<f64>, DspError> {
    let pad = sos.pad_len();
    if x.len() <= pad {
        return Err(DspError::SignalTooShort {
            needed: pad + 1,
            actual: x.len(),
        });
    }
    if !zero_phase {
        let mut y = x.to_vec();
        sos.run_causal(&mut y);
        return Ok(y);
    }

    let n = x.len();
    let (first, last) = (x[0], x[n - 1]);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));

    sos.run_causal(&mut ext);
    ext.reverse();
    sos.run_causal(&mut ext);
    ext.reverse();
    Ok(ext[pad..pad + n].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sine(freq: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * freq * i as f64 / fs).sin()).collect()
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    #[test]
    fn section_count_and_stability() {
        for order in 1..=16 {
            let sos = design_lowpass(order, 45.0, 500.0).unwrap();
            assert_eq!(sos.sections.len(), order.div_ceil(2));
            for s in &sos.sections {
                for m in s.pole_moduli() {
                    assert!(m < 1.0, "order {order}: pole modulus {m}");
                }
            }
        }
    }

    #[test]
    fn dc_and_cutoff_gain() {
        let sos = design_lowpass(15, 45.0, 500.0).unwrap();
        assert!((sos.magnitude(0.0) - 1.0).abs() < 1e-9);
        assert!((sos.magnitude(45.0) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
    }

    #[test]
    fn nyquist_boundary() {
        assert!(design_lowpass(15, 45.0, 100.0).is_ok());
        assert!(matches!(design_lowpass(15, 55.0, 100.0), Err(DspError::DesignError(_))));
        assert!(design_lowpass(15, 50.0, 100.0).is_err());
        assert!(design_lowpass(0, 10.0, 100.0).is_err());
    }

    #[test]
    fn sections_sorted_by_q() {
        let sos = design_lowpass(15, 45.0, 500.0).unwrap();
        // first-order section first, then increasingly resonant pairs
        assert_eq!(sos.sections[0].a2, 0.0);
        assert!(sos.sections[1..].iter().all(|s| s.a2 != 0.0));
    }

    #[test]
    fn constant_passes_unchanged() {
        let sos = design_lowpass(15, 45.0, 500.0).unwrap();
        for zero_phase in [true, false] {
            let y = apply_filter(&sos, &vec![3.25; 500], zero_phase).unwrap();
            assert!(y.iter().all(|v| (v - 3.25).abs() < 1e-6), "{zero_phase}");
        }
    }

    #[test]
    fn stopband_and_passband() {
        let sos = design_lowpass(15, 45.0, 500.0).unwrap();
        let x = sine(60.0, 500.0, 5000);
        let y = apply_filter(&sos, &x, true).unwrap();
        let ratio = rms(&y) / rms(&x);
        // steady-state response at 60 Hz squared is ~1e-4; edge transients dominate
        assert!(ratio <= 0.032, "60 Hz ratio {ratio}");

        let x = sine(5.0, 500.0, 5000);
        let y = apply_filter(&sos, &x, true).unwrap();
        assert!((rms(&y) / rms(&x) - 1.0).abs() < 0.01);
    }

    #[test]
    fn magnitude_is_monotone() {
        for (order, fc, fs) in [(15, 45.0, 500.0), (15, 45.0, 100.0), (4, 10.0, 250.0)] {
            let sos = design_lowpass(order, fc, fs).unwrap();
            let mags: Vec<f64> = (0..512).map(|i| sos.magnitude(i as f64 * fs / 2.0 / 511.0)).collect();
            for w in mags.windows(2) {
                assert!(w[1] <= w[0] + 1e-9);
            }
        }
    }

    #[test]
    fn too_short() {
        let sos = design_lowpass(15, 45.0, 500.0).unwrap();
        assert_eq!(
            apply_filter(&sos, &[0.0; 45], true),
            Err(DspError::SignalTooShort { needed: 46, actual: 45 })
        );
        assert!(apply_filter(&sos, &[0.0; 46], true).is_ok());
    }

    proptest! {
        #[test]
        fn linear(
            x in prop::collection::vec(-5.0f64..5.0, 200),
            y in prop::collection::vec(-5.0f64..5.0, 200),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            let sos = design_lowpass(15, 45.0, 500.0).unwrap();
            let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
            let lhs = apply_filter(&sos, &mix, true).unwrap();
            let fx = apply_filter(&sos, &x, true).unwrap();
            let fy = apply_filter(&sos, &y, true).unwrap();
            for i in 0..lhs.len() {
                prop_assert!((lhs[i] - (a * fx[i] + b * fy[i])).abs() < 1e-9);
            }
        }
    }
}
