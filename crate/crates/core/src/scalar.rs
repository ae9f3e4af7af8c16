//! Scalar traits shared by the exact and floating-point code paths.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::Neg;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, FloatConst, Num, NumAssign};

/// A field element that can be built from an exact ratio of integers.
///
/// Operator coefficient tables are stored as `(numerator, denominator)`
/// pairs, so anything implementing this trait (including arbitrary
/// precision rationals) can carry the 1D operators and transfer stencils.
pub trait Scalar: Clone + Debug + PartialOrd + Num + Neg<Output = Self> + Send + Sync + 'static {
    fn from_ratio(num: i128, den: i128) -> Self;

    fn from_int(n: i64) -> Self {
        Self::from_ratio(n as i128, 1)
    }
}

/// Floating-point scalar used by the 3D solver.
pub trait Real:
    Scalar + Float + FloatConst + NumAssign + Copy + Sum + Display + LowerExp + Default
{
    fn lit(x: f64) -> Self;

    fn as_f64(self) -> f64;
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Scalar for $t {
            #[inline]
            fn from_ratio(num: i128, den: i128) -> Self {
                (num as f64 / den as f64) as $t
            }
        }

        impl Real for $t {
            #[inline]
            fn lit(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

impl Scalar for BigRational {
    fn from_ratio(num: i128, den: i128) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
}
