//! Minimal ring interface so pointwise tensor algebra runs unchanged on plain
//! values and on jets.

use crate::jet::Jet;
use crate::scalar::Scalar;
use num_traits::{One, Zero};

pub trait Ring: Clone + Send + Sync {
    type S: Scalar;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn scale(&self, s: Self::S) -> Self;
    fn recip(&self) -> Self;
    fn constant_like(&self, s: Self::S) -> Self;
    fn value(&self) -> Self::S;

    fn zero_like(&self) -> Self {
        self.constant_like(Self::S::zero())
    }
    fn neg(&self) -> Self {
        self.scale(-Self::S::one())
    }
    fn add_scalar(&self, s: Self::S) -> Self {
        self.add(&self.constant_like(s))
    }
    fn exp(&self) -> Self;
    fn sqrt(&self) -> Self;
}

impl<T: Scalar> Ring for T {
    type S = T;
    #[inline]
    fn add(&self, o: &Self) -> Self {
        *self + *o
    }
    #[inline]
    fn sub(&self, o: &Self) -> Self {
        *self - *o
    }
    #[inline]
    fn mul(&self, o: &Self) -> Self {
        *self * *o
    }
    #[inline]
    fn scale(&self, s: T) -> Self {
        *self * s
    }
    #[inline]
    fn recip(&self) -> Self {
        T::one() / *self
    }
    #[inline]
    fn constant_like(&self, s: T) -> Self {
        s
    }
    #[inline]
    fn value(&self) -> T {
        *self
    }
    #[inline]
    fn exp(&self) -> Self {
        num_traits::Float::exp(*self)
    }
    #[inline]
    fn sqrt(&self) -> Self {
        num_traits::Float::sqrt(*self)
    }
}

impl<T: Scalar> Ring for Jet<T> {
    type S = T;
    fn add(&self, o: &Self) -> Self {
        self.add_ref(o)
    }
    fn sub(&self, o: &Self) -> Self {
        self.sub_ref(o)
    }
    fn mul(&self, o: &Self) -> Self {
        self.mul_ref(o)
    }
    fn scale(&self, s: T) -> Self {
        Jet::scale(self, s)
    }
    fn recip(&self) -> Self {
        Jet::recip(self)
    }
    fn constant_like(&self, s: T) -> Self {
        Jet::constant_like(self, s)
    }
    fn value(&self) -> T {
        Jet::value(self)
    }
    fn exp(&self) -> Self {
        Jet::exp(self)
    }
    fn sqrt(&self) -> Self {
        Jet::sqrt(self)
    }
}
