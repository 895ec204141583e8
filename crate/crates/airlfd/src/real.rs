use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssign, NumCast};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Scalar type accepted by every numeric routine in the crate.
pub trait Real:
    Float
    + FromPrimitive
    + NumCast
    + NumAssign
    + Default
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`; used for constants and RNG draws.
    fn c(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant fits scalar")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("count fits scalar")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Numerically stable `ln(1 + e^x)`.
pub fn softplus<T: Real>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn mean<T: Real>(xs: &[T]) -> T {
    let mut s = T::zero();
    for &x in xs {
        s += x;
    }
    s / T::from_usize_lossy(xs.len())
}

/// Population mean and standard deviation.
pub fn mean_std<T: Real>(xs: &[T]) -> (T, T) {
    let m = mean(xs);
    let mut v = T::zero();
    for &x in xs {
        v += (x - m) * (x - m);
    }
    (m, (v / T::from_usize_lossy(xs.len())).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softplus_matches_naive_in_safe_range() {
        for &x in &[-5.0f64, -1.0, 0.0, 0.3, 4.0] {
            assert!((softplus(x) - (1.0 + x.exp()).ln()).abs() < 1e-14);
        }
        assert_eq!(softplus(1000.0f64), 1000.0);
        assert!(softplus(-1000.0f64) >= 0.0);
    }

    #[test]
    fn sigmoid_symmetry_and_saturation() {
        assert_eq!(sigmoid(0.0f64), 0.5);
        assert!((sigmoid(2.0f64) + sigmoid(-2.0) - 1.0).abs() < 1e-15);
        assert!(sigmoid(-800.0f64) >= 0.0);
        assert_eq!(sigmoid(800.0f64), 1.0);
    }

    #[test]
    fn mean_std_population() {
        let (m, s) = mean_std(&[1.0f64, 3.0, 3.0, 5.0]);
        assert_eq!(m, 3.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
        let (m32, _) = mean_std(&[1.0f32, 2.0]);
        assert_eq!(m32, 1.5);
    }
}
