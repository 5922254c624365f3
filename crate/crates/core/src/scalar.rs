//! Scalar abstraction shared by every module.

use nalgebra as na;
use num_traits as nt;

/// Floating point types the engine can run on.
pub trait Real: Copy + Send + Sync + nt::FloatConst + nt::FromPrimitive + na::RealField {
    /// Lossless-enough conversion of an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as nt::FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    /// Conversion back to `f64` for reporting.
    fn to_f64_lossy(self) -> f64;
}

impl Real for f32 {
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self
    }
}

/// Shorthand for [`Real::lit`].
#[inline]
pub fn c<T: Real>(x: f64) -> T {
    T::lit(x)
}

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`, built from error-free
/// transformations; roughly doubles the working precision of `T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleWord<T: Real> {
    pub hi: T,
    pub lo: T,
}

#[inline]
fn two_sum<T: Real>(a: T, b: T) -> (T, T) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn fast_two_sum<T: Real>(a: T, b: T) -> (T, T) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod<T: Real>(a: T, b: T) -> (T, T) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl<T: Real> DoubleWord<T> {
    #[inline]
    pub fn new(x: T) -> Self {
        Self { hi: x, lo: T::zero() }
    }

    #[inline]
    pub fn value(self) -> T {
        self.hi + self.lo
    }
}

impl<T: Real> std::ops::Add for DoubleWord<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = fast_two_sum(s, e + t);
        let (hi, lo) = fast_two_sum(s, e + f);
        Self { hi, lo }
    }
}

impl<T: Real> std::ops::Neg for DoubleWord<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self { hi: -self.hi, lo: -self.lo }
    }
}

impl<T: Real> std::ops::Sub for DoubleWord<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl<T: Real> std::ops::Mul for DoubleWord<T> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = fast_two_sum(p, e);
        Self { hi, lo }
    }
}

impl<T: Real> std::ops::AddAssign for DoubleWord<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> std::ops::SubAssign for DoubleWord<T> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T: Real> std::ops::MulAssign for DoubleWord<T> {
    #[inline]
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}

impl<T: Real> nt::Zero for DoubleWord<T> {
    #[inline]
    fn zero() -> Self {
        Self::new(T::zero())
    }
    #[inline]
    fn is_zero(&self) -> bool {
        self.hi.is_zero() && self.lo.is_zero()
    }
}

impl<T: Real> nt::One for DoubleWord<T> {
    #[inline]
    fn one() -> Self {
        Self::new(T::one())
    }
}

/// Accumulation scalar for contractions over values of type `T`.
pub trait Accum<T: Real>:
    na::Scalar
    + Copy
    + nt::Zero
    + nt::One
    + std::ops::Neg<Output = Self>
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
{
    fn lift(x: T) -> Self;
    fn lower(self) -> T;
}

impl<T: Real> Accum<T> for T {
    #[inline]
    fn lift(x: T) -> Self {
        x
    }
    #[inline]
    fn lower(self) -> T {
        self
    }
}

impl<T: Real> Accum<T> for DoubleWord<T> {
    #[inline]
    fn lift(x: T) -> Self {
        Self::new(x)
    }
    #[inline]
    fn lower(self) -> T {
        self.value()
    }
}
