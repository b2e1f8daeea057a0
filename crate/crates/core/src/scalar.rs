use core::fmt::{Debug, Display};
use core::iter::Sum;

use num_traits::{Float, FloatConst};

/// Floating point storage type. `f32` is the working precision; `f64` is
/// used by every verification oracle.
pub trait Scalar: Float + FloatConst + Default + Debug + Display + Sum + Send + Sync + 'static {
    const BYTES: usize;
    const NAME: &'static str;

    fn of(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    const BYTES: usize = 4;
    const NAME: &'static str = "f32";

    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    const BYTES: usize = 8;
    const NAME: &'static str = "f64";

    #[inline]
    fn of(x: f64) -> Self {
        x
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}
