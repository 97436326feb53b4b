use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumCast};

/// Real scalar used by the geometry and metric code: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + NumCast + Sum + Debug + Display + Default + Send + Sync + 'static
{
    fn from_count(n: usize) -> Self {
        <Self as NumCast>::from(n).expect("usize fits in a float")
    }

    fn lit(v: f64) -> Self {
        <Self as NumCast>::from(v).expect("f64 literal fits")
    }

    fn to_f64_lossy(self) -> f64 {
        <f64 as NumCast>::from(self).unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
