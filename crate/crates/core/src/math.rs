// Float intrinsics routed through num-traits so the crate builds with
// either std or libm.
use num_traits::Float;

#[inline]
pub(crate) fn tanh(x: f64) -> f64 {
    Float::tanh(x)
}

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    Float::ln(x)
}

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    Float::sqrt(x)
}

#[inline]
pub(crate) fn sin_cos(x: f64) -> (f64, f64) {
    Float::sin_cos(x)
}

#[inline]
pub(crate) fn powi(x: f64, n: i32) -> f64 {
    Float::powi(x, n)
}
