//! Scalar abstraction shared by every numeric routine in the crate.

use num_traits::{Float, FromPrimitive};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Real scalar type the engine is generic over (`f32` or `f64`).
pub trait Scalar:
    Float + FromPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}

/// Converts a count into `T`.
#[inline]
pub fn from_usize<T: Scalar>(k: usize) -> T {
    T::from_usize(k).expect("count representable in scalar type")
}

/// Pairwise (cascade) summation; result does not depend on evaluation order
/// of the caller, only on the slice order.
pub fn pairwise_sum<T: Scalar>(xs: &[T]) -> T {
    const LEAF: usize = 16;
    if xs.len() <= LEAF {
        let mut s = T::zero();
        for &x in xs {
            s = s + x;
        }
        s
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_for_small_inputs() {
        let xs: Vec<f64> = (0..100).map(|k| k as f64 * 0.25).collect();
        let naive: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - naive).abs() < 1e-12);
    }

    #[test]
    fn literals_roundtrip() {
        assert_eq!(lit::<f32>(0.5), 0.5f32);
        assert_eq!(from_usize::<f64>(7), 7.0);
    }
}
