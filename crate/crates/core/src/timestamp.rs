//! Exact rational timestamps.
//!
//! Only the order of timestamps is ever observed by the semantics, so the
//! representation is an exact normalized fraction rather than a float.

use std::fmt;

use num_rational::Ratio;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(Ratio<i64>);

impl Timestamp {
    pub const ZERO: Timestamp = Timestamp(Ratio::new_raw(0, 1));

    pub fn from_int(n: i64) -> Self {
        Timestamp(Ratio::from_integer(n))
    }

    /// `numer / denom`, normalized. Panics if `denom` is zero.
    pub fn new(numer: i64, denom: i64) -> Self {
        Timestamp(Ratio::new(numer, denom))
    }

    pub fn numer(&self) -> i64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i64 {
        *self.0.denom()
    }

    pub fn midpoint(self, other: Timestamp) -> Timestamp {
        Timestamp((self.0 + other.0) / Ratio::from_integer(2))
    }

    pub fn succ(self) -> Timestamp {
        Timestamp(self.0 + Ratio::from_integer(1))
    }
}

impl Default for Timestamp {
    fn default() -> Self {
        Timestamp::ZERO
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom() == 1 {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl fmt::Debug for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}
