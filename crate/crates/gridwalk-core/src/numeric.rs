//! Thin wrappers over `libm` used for all transcendentals and rounding.
//!
//! Routing these through `libm` in every build keeps `std` and `no_std`
//! outputs bit-identical (the std intrinsics may differ by an ulp across
//! platforms, which would break byte-stable reports).

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn log2(x: f64) -> f64 {
    libm::log2(x)
}

#[inline]
pub(crate) fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub(crate) fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

/// Round to nearest integer, ties away from zero (`libm::round` semantics).
#[inline]
pub(crate) fn round(x: f64) -> f64 {
    libm::round(x)
}

/// Integer power of two as f64, valid for |e| < 1023.
#[inline]
pub(crate) fn pow2(e: i32) -> f64 {
    libm::scalbn(1.0, e)
}

/// General power `x^y` (platform-independent `libm::pow`).
#[inline]
pub(crate) fn pow(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}
