//! Scalar abstraction shared by all geometric code.

use nalgebra as na;
use num_traits as nt;

/// Floating point scalar the geometry, cloud and evaluation code is generic over.
pub trait Real:
    Copy + Default + nt::FromPrimitive + nt::ToPrimitive + na::RealField + na::Scalar + Send + Sync
{
    const ZERO: Self;
    const ONE: Self;
    const HALF: Self;
    const TWO: Self;

    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(v: f64) -> Self {
        <Self as nt::FromPrimitive>::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        <Self as nt::FromPrimitive>::from_usize(v).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        nt::ToPrimitive::to_f64(&self).expect("finite scalar")
    }

    /// Total order for finite values; NaN compares equal to everything.
    #[inline]
    fn total_cmp_finite(&self, other: &Self) -> std::cmp::Ordering {
        self.partial_cmp(other).unwrap_or(std::cmp::Ordering::Equal)
    }
}

macro_rules! impl_real {
    ($f:ty) => {
        impl Real for $f {
            const ZERO: Self = 0.0;
            const ONE: Self = 1.0;
            const HALF: Self = 0.5;
            const TWO: Self = 2.0;
        }
    };
}

impl_real!(f32);
impl_real!(f64);

#[inline]
pub(crate) fn deg<T: Real>(radians: T) -> T {
    radians * T::lit(180.0) / T::pi()
}

#[inline]
pub(crate) fn rad<T: Real>(degrees: T) -> T {
    degrees * T::pi() / T::lit(180.0)
}
