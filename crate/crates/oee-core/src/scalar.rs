use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display};

/// Real scalar the whole library is generic over. Implemented for `f32` and `f64`.
pub trait Real:
    faer::traits::RealField
    + Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Tolerance for exact identities (Hermiticity, projector checks, degeneracy).
    const TIGHT: f64;
    /// Tolerance for derived quantities that accumulate rounding.
    const LOOSE: f64;

    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal fits the scalar type")
    }

    fn tight() -> Self {
        Self::lit(Self::TIGHT)
    }

    fn loose() -> Self {
        Self::lit(Self::LOOSE)
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {
    const TIGHT: f64 = 1e-4;
    const LOOSE: f64 = 1e-3;
}

impl Real for f64 {
    const TIGHT: f64 = 1e-10;
    const LOOSE: f64 = 1e-8;
}

pub type Cx<T> = Complex<T>;

#[inline]
pub fn cx<T: Real>(re: T, im: T) -> Cx<T> {
    Complex::new(re, im)
}

#[inline]
pub fn re<T: Real>(x: T) -> Cx<T> {
    Complex::new(x, T::zero())
}

/// `exp(i phi)`
#[inline]
pub fn phase<T: Real>(phi: T) -> Cx<T> {
    Complex::new(phi.cos(), phi.sin())
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle<T: Real>(x: T) -> T {
    let two_pi = T::PI() + T::PI();
    let mut y = (x + T::PI()) % two_pi;
    if y < T::zero() {
        y += two_pi;
    }
    y - T::PI()
}

/// Neumaier-compensated sum; order-insensitive to within a few ulps.
pub fn compensated_sum<T: Real, I: IntoIterator<Item = T>>(items: I) -> T {
    let mut sum = T::zero();
    let mut c = T::zero();
    for x in items {
        let t = sum + x;
        if Float::abs(sum) >= Float::abs(x) {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

pub fn dot3<T: Real>(a: &[T; 3], b: &[T; 3]) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross3<T: Real>(a: &[T; 3], b: &[T; 3]) -> [T; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn norm3<T: Real>(a: &[T; 3]) -> T {
    dot3(a, a).sqrt()
}
