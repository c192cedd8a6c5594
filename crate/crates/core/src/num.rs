//! Scalar abstraction shared by the path maps.
//!
//! The reflection machinery runs in two arithmetics: `i64` (micro paths in
//! order-size units, where equality with the event engine must be exact) and
//! `f64` (Brownian paths in the limit engine).

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};

pub trait PathScalar:
    Copy
    + PartialOrd
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + Send
    + Sync
    + 'static
{
    const ZERO: Self;

    fn max_of(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    /// Positive part, `max(self, 0)`.
    fn pos(self) -> Self {
        Self::max_of(self, Self::ZERO)
    }

    fn to_f64(self) -> f64;
}

impl PathScalar for i64 {
    const ZERO: Self = 0;

    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl PathScalar for f64 {
    const ZERO: Self = 0.0;

    fn to_f64(self) -> f64 {
        self
    }
}
