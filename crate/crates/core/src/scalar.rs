//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real floating-point scalar: `f32` or `f64`.
///
/// Special functions are evaluated in `f64` and rounded back, which is exact
/// for `f64` and more than enough for `f32`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Panics only if the value is not representable,
    /// which cannot happen for finite literals and `f32`/`f64`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Complementary error function.
    fn erfc(self) -> Self {
        Self::lit(libm::erfc(self.to_f64_lossy()))
    }

    /// Natural log of the gamma function.
    fn ln_gamma(self) -> Self {
        Self::lit(libm::lgamma(self.to_f64_lossy()))
    }

    /// Inverse of the standard normal CDF.
    fn inv_norm_cdf(self) -> Self {
        let p = self.to_f64_lossy();
        let mut x = -std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(2.0 * p);
        // one Newton step against the accurate tail
        if x.is_finite() {
            let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
            let cdf = 0.5 * libm::erfc(-x / std::f64::consts::SQRT_2);
            if pdf > 0.0 {
                x -= (cdf - p) / pdf;
            }
        }
        Self::lit(x)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Standard normal density.
#[inline]
pub fn norm_pdf<T: Real>(x: T) -> T {
    if x.is_infinite() {
        return T::zero();
    }
    let inv_sqrt_2pi = T::FRAC_1_SQRT_2() * T::FRAC_2_SQRT_PI() * T::lit(0.5);
    inv_sqrt_2pi * (-(x * x) * T::lit(0.5)).exp()
}

/// Gaussian tail probability `Q(x) = P(Z > x)`.
#[inline]
pub fn q_func<T: Real>(x: T) -> T {
    (x * T::FRAC_1_SQRT_2()).erfc() * T::lit(0.5)
}

/// Standard normal mass on `[a, b]`, computed from whichever tail keeps
/// precision.
pub fn norm_mass<T: Real>(a: T, b: T) -> T {
    if a >= T::zero() {
        q_func(a) - q_func(b)
    } else if b <= T::zero() {
        q_func(-b) - q_func(-a)
    } else {
        T::one() - q_func(-a) - q_func(b)
    }
}

#[inline]
pub fn db_to_linear<T: Real>(db: T) -> T {
    T::lit(10.0).powf(db / T::lit(10.0))
}

#[inline]
pub fn linear_to_db<T: Real>(x: T) -> T {
    T::lit(10.0) * x.log10()
}
