//! Scalar abstraction for vote weights and accuracy rates.
//!
//! Consensus tallies and metric rates are written once over [`Weight`] so the
//! same code runs on `f64` (the transcript representation), `f32`, and exact
//! rationals (used by tests and by anything that needs bit-for-bit sums).

use std::fmt::Debug;

use num_traits::{FromPrimitive, Num};

/// A non-negative quantity that can be summed and compared.
pub trait Weight: Num + Copy + PartialOrd + FromPrimitive + Debug {}

impl<T> Weight for T where T: Num + Copy + PartialOrd + FromPrimitive + Debug {}

/// Exact rational scalar.
pub type Rational = num_rational::Ratio<i64>;

/// Converts an `f64` into `W`, falling back to zero when the value has no
/// representation in `W`.
pub fn weight_from_f64<W: Weight>(value: f64) -> W {
    W::from_f64(value).unwrap_or_else(W::zero)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions() {
        assert_eq!(weight_from_f64::<f32>(0.5), 0.5f32);
        assert_eq!(weight_from_f64::<Rational>(0.25), Rational::new(1, 4));
        assert_eq!(weight_from_f64::<Rational>(f64::NAN), Rational::from_integer(0));
    }
}
