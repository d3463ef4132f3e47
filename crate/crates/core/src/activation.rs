//! Branch-free hyperbolic tangent for the reservoir's inner loop.
//!
//! `tanh(x) = (1 − e) / (1 + e)` with `e = exp(−2|x|)`; the exponential uses
//! a `ln 2` range reduction and a degree-13 Taylor polynomial, and `2^k` is
//! built directly from the exponent bits. Absolute error is below 1e-15 on the
//! whole real line, and the loop vectorizes where libm's `tanh` does not.

const LOG2E: f64 = std::f64::consts::LOG2_E;
const LN2_HI: f64 = 6.931_471_803_691_238_164_90e-1;
const LN2_LO: f64 = 1.908_214_929_270_587_700_02e-10;
// 1.5 · 2^52: adding it rounds to the nearest integer, which then sits in the
// low mantissa bits.
const ROUND_MAGIC: f64 = 6_755_399_441_055_744.0;
// tanh(20) rounds to 1.0 in f64.
const SATURATION: f64 = 20.0;

#[inline(always)]
pub fn tanh(x: f64) -> f64 {
    let a = x.abs();
    let a = if a < SATURATION { a } else { SATURATION };
    let y = -2.0 * a;
    let shifted = y * LOG2E + ROUND_MAGIC;
    let k = shifted - ROUND_MAGIC;
    let r = (y - k * LN2_HI) - k * LN2_LO;

    let mut p = 1.0 / 6_227_020_800.0;
    p = p * r + 1.0 / 479_001_600.0;
    p = p * r + 1.0 / 39_916_800.0;
    p = p * r + 1.0 / 3_628_800.0;
    p = p * r + 1.0 / 362_880.0;
    p = p * r + 1.0 / 40_320.0;
    p = p * r + 1.0 / 5_040.0;
    p = p * r + 1.0 / 720.0;
    p = p * r + 1.0 / 120.0;
    p = p * r + 1.0 / 24.0;
    p = p * r + 1.0 / 6.0;
    p = p * r + 0.5;
    p = p * r + 1.0;
    p = p * r + 1.0;

    // Low 12 bits of `shifted` hold k (two's complement); k + 1023 is the
    // biased exponent of 2^k.
    let two_k = f64::from_bits(shifted.to_bits().wrapping_add(1023) << 52);
    let e = p * two_k;
    let t = (1.0 - e) / (1.0 + e);
    if x < 0.0 {
        -t
    } else {
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dense_grid_against_libm() {
        let mut worst = 0.0f64;
        for i in 0..=400_000 {
            let x = -25.0 + i as f64 * 1.25e-4;
            worst = worst.max((tanh(x) - x.tanh()).abs());
        }
        assert!(worst < 1e-15, "max abs error {worst:e}");
    }

    #[test]
    fn special_values() {
        assert_eq!(tanh(0.0), 0.0);
        assert_eq!(tanh(1e300), 1.0);
        assert_eq!(tanh(-1e300), -1.0);
        assert_eq!(tanh(f64::INFINITY), 1.0);
        assert!((tanh(1e-12) - 1e-12).abs() < 1e-20 + 1e-16);
    }

    proptest! {
        #[test]
        fn odd_and_close_to_libm(x in -40.0..40.0f64) {
            prop_assert_eq!(tanh(-x), -tanh(x));
            prop_assert!((tanh(x) - x.tanh()).abs() < 1e-15);
        }
    }
}
