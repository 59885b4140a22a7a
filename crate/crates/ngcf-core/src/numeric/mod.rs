//! Minimal dense/sparse kernel set with a deterministic RNG.
//!
//! All kernels are pure functions over row-major [`DenseMatrix`] and
//! compressed-row [`CsrMatrix`] storage, executed single-threaded in a fixed
//! order so results are bit-reproducible for a given seed.

mod dense;
mod rng;
mod sparse;

pub use dense::DenseMatrix;
pub use rng::Rng;
pub use sparse::CsrMatrix;

use num_traits::{Float, NumCast};

/// Floating-point scalar used by the kernels. Activations and parameters are
/// `f32` in normal operation and `f64` in gradient-check mode.
pub trait Scalar: Float + Default + core::fmt::Debug + core::fmt::Display + 'static {
    #[inline]
    fn from_f64(x: f64) -> Self {
        <Self as NumCast>::from(x).expect("f64 converts to scalar")
    }

    #[inline]
    fn to_f64(self) -> f64 {
        <f64 as NumCast>::from(self).expect("scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Numerically stable logistic function.
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Numerically stable `ln(1 + e^x)`; equals `-ln(sigmoid(-x))`.
pub fn softplus<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Plain sequential dot product.
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc = acc + x * y;
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rounding {
    Up,
    Down,
}

/// `ceil(n * frac)` or `floor(n * frac)` computed in integer arithmetic
/// (fraction held to nine decimal digits) so that e.g. a 0.8 fraction of 10
/// is exactly 8 rather than a ceiling of `8.000000000000002`.
pub fn scaled_count(n: usize, frac: f64, rounding: Rounding) -> usize {
    const DEN: u128 = 1_000_000_000;
    let num = (frac * DEN as f64).round() as u128;
    let prod = n as u128 * num;
    let count = match rounding {
        Rounding::Up => prod.div_ceil(DEN),
        Rounding::Down => prod / DEN,
    };
    (count as usize).min(n)
}

/// Sum with a fixed pairwise reduction order, independent of caller context.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}
