//! Scalar abstraction shared by every solver in the crate.
//!
//! All numerical kernels are written against [`Real`] so they can be run in
//! `f32` (half the tape memory) or `f64` (the default, see the aliases at the
//! crate root). Reductions that feed statistics are always carried out in
//! `f64` regardless of the working precision.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point working precision of the particle and grid solvers.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` constant into the working precision.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 literal is representable")
    }

    /// Widens to `f64` for accumulation and reporting.
    #[inline]
    fn wide(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_round_trip() {
        assert_eq!(f64::lit(0.25), 0.25);
        assert_eq!(f32::lit(0.25).wide(), 0.25);
        assert!((f32::lit(0.1).wide() - 0.1).abs() < 1e-8);
    }
}
