use core::fmt::{Debug, Display};
use core::iter::Sum;
use core::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::Float;

/// Floating-point element type for parameters and activations.
///
/// Implemented for `f32` (training) and `f64` (gradient checks and
/// reproducibility runs).
pub trait Real:
    Float
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Width in bits, 32 or 64.
    const BITS: u32;

    fn of(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn write_le(self, out: &mut alloc::vec::Vec<u8>);
    /// Reads one value from the front of `bytes`; `bytes` must hold at least `BITS / 8` bytes.
    fn read_le(bytes: &[u8]) -> Self;
}

impl Real for f32 {
    const BITS: u32 = 32;

    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn write_le(self, out: &mut alloc::vec::Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        let mut b = [0u8; 4];
        b.copy_from_slice(&bytes[..4]);
        f32::from_le_bytes(b)
    }
}

impl Real for f64 {
    const BITS: u32 = 64;

    #[inline]
    fn of(x: f64) -> Self {
        x
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    fn write_le(self, out: &mut alloc::vec::Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        let mut b = [0u8; 8];
        b.copy_from_slice(&bytes[..8]);
        f64::from_le_bytes(b)
    }
}

/// Numerically stable `-ln σ(x) = ln(1 + e^{-x})`.
pub fn neg_log_sigmoid<T: Real>(x: T) -> T {
    if x > T::zero() {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

/// Logistic sigmoid, stable for large |x|.
pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neg_log_sigmoid_values() {
        assert!((neg_log_sigmoid(0.0f64) - core::f64::consts::LN_2).abs() < 1e-15);
        // -ln σ(10) = ln(1 + e^-10)
        let want = libm_ln1p(libm_exp(-10.0));
        assert!((neg_log_sigmoid(10.0f64) - want).abs() < 1e-18);
        assert!(neg_log_sigmoid(-800.0f64).is_finite());
        assert!(neg_log_sigmoid(800.0f64) >= 0.0);
    }

    fn libm_exp(x: f64) -> f64 {
        Float::exp(x)
    }
    fn libm_ln1p(x: f64) -> f64 {
        Float::ln_1p(x)
    }

    #[test]
    fn sigmoid_symmetry() {
        for &x in &[-30.0f64, -1.5, 0.0, 0.3, 40.0] {
            assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-15);
        }
    }
}
