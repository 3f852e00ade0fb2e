//! IEEE 754 binary16 conversion at the bit level.

pub const F16_INFINITY: u16 = 0x7C00;
pub const F16_MAX: f32 = 65504.0;

/// Round-to-nearest-even narrowing; overflow goes to signed infinity and
/// NaN stays NaN.
pub fn f32_to_f16(x: f32) -> u16 {
    let bits = x.to_bits();
    let sign = ((bits >> 16) & 0x8000) as u16;
    let exp = ((bits >> 23) & 0xFF) as i32;
    let man = bits & 0x7F_FFFF;

    if exp == 0xFF {
        return if man == 0 {
            sign | F16_INFINITY
        } else {
            sign | 0x7E00 | (man >> 13) as u16
        };
    }
    let e = exp - 127 + 15;
    if e >= 0x1F {
        return sign | F16_INFINITY;
    }
    if e <= 0 {
        // binary16 subnormal: units of 2^-24
        let shift = (14 - e) as u32;
        if shift > 24 {
            return sign;
        }
        let m = man | 0x80_0000;
        return sign | round_shift(m, shift) as u16;
    }
    // carry out of the mantissa bumps the exponent, up to infinity
    let q = ((e as u32) << 10) | (man >> 13);
    sign | round_even(q, man & 0x1FFF, 0x1000) as u16
}

fn round_shift(m: u32, shift: u32) -> u32 {
    round_even(m >> shift, m & ((1 << shift) - 1), 1 << (shift - 1))
}

fn round_even(q: u32, rem: u32, half: u32) -> u32 {
    if rem > half || (rem == half && q & 1 == 1) {
        q + 1
    } else {
        q
    }
}

/// Exact widening.
pub fn f16_to_f32(h: u16) -> f32 {
    let sign = u32::from(h & 0x8000) << 16;
    let exp = u32::from((h >> 10) & 0x1F);
    let man = u32::from(h & 0x3FF);
    match exp {
        0 => {
            let v = man as f32 * f32::from_bits(0x3380_0000); // 2^-24
            if sign != 0 {
                -v
            } else {
                v
            }
        }
        0x1F => f32::from_bits(sign | 0x7F80_0000 | (man << 13)),
        _ => f32::from_bits(sign | ((exp + 112) << 23) | (man << 13)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_values() {
        assert_eq!(f32_to_f16(0.0), 0x0000);
        assert_eq!(f32_to_f16(-0.0), 0x8000);
        assert_eq!(f32_to_f16(1.0), 0x3C00);
        assert_eq!(f32_to_f16(0.1), 0x2E66);
        assert_eq!(f32_to_f16(70000.0), 0x7C00);
        assert_eq!(f32_to_f16(-70000.0), 0xFC00);
        assert_eq!(f32_to_f16(65504.0), 0x7BFF);
        assert_eq!(f32_to_f16(f32::INFINITY), 0x7C00);
        assert!(f16_to_f32(f32_to_f16(f32::NAN)).is_nan());
        // smallest subnormal, and half of it ties to even (zero)
        assert_eq!(f32_to_f16(2f32.powi(-24)), 0x0001);
        assert_eq!(f32_to_f16(2f32.powi(-25)), 0x0000);
        assert_eq!(f32_to_f16(1.5 * 2f32.powi(-25)), 0x0001);
        // 65520 is the midpoint between 65504 and the next step: ties to even overflows
        assert_eq!(f32_to_f16(65520.0), 0x7C00);
        assert_eq!(f16_to_f32(0x3555), 0.333_251_95);
    }

    #[test]
    fn all_halves_round_trip() {
        for h in 0..=u16::MAX {
            let f = f16_to_f32(h);
            if f.is_nan() {
                continue;
            }
            assert_eq!(f32_to_f16(f), h, "{h:#06x}");
        }
    }

    proptest! {
        #[test]
        fn matches_reference_conversion(bits in any::<u32>()) {
            let x = f32::from_bits(bits);
            let ours = f32_to_f16(x);
            let theirs = ::half::f16::from_f32(x);
            if x.is_nan() {
                prop_assert!(f16_to_f32(ours).is_nan());
            } else {
                prop_assert_eq!(ours, theirs.to_bits());
                prop_assert_eq!(f16_to_f32(ours).to_bits(), theirs.to_f32().to_bits());
            }
        }
    }
}
