//! Floating-point scalar abstraction shared by every numeric module.

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

/// Real floating-point scalar: `f32` or `f64`.
///
/// The propagators, Krylov solver and analysis routines are written against
/// this trait. Every tolerance quoted in the tests assumes `f64`; `f32`
/// instantiations only reach single-precision accuracy.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub(crate) fn dot<S: Real>(x: &[S], y: &[S]) -> S {
    x.iter().zip(y).map(|(&a, &b)| a * b).sum()
}

pub(crate) fn norm2<S: Real>(x: &[S]) -> S {
    // scaled accumulation avoids overflow for the huge heat-mode values
    let scale = x.iter().fold(S::zero(), |m, &v| m.max(v.abs()));
    if scale == S::zero() || !scale.is_finite() {
        return scale;
    }
    let ss: S = x.iter().map(|&v| (v / scale) * (v / scale)).sum();
    scale * ss.sqrt()
}

/// `y += a * x`
pub(crate) fn axpy<S: Real>(a: S, x: &[S], y: &mut [S]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}
