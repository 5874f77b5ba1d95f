//! Fixed-point simulation time.
//!
//! All schedule and window arithmetic runs on signed 64-bit microsecond
//! counts so that two schedules generated from the same inputs compare equal
//! bit for bit. Window starts may be negative (windows aligned to epoch 0).

use std::fmt;
use std::ops::{Add, Sub};

use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;
use serde::{Serialize, Serializer};

pub const MICROS_PER_SECOND: i64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Micros(pub i64);

impl Micros {
    pub const ZERO: Micros = Micros(0);

    pub const fn from_secs(secs: i64) -> Self {
        Micros(secs * MICROS_PER_SECOND)
    }

    /// Converts a decimal number of seconds. Returns `None` when the value
    /// needs sub-microsecond resolution or does not fit in 64 bits.
    pub fn from_decimal_secs(secs: Decimal) -> Option<Self> {
        let scaled = secs.checked_mul(Decimal::from(MICROS_PER_SECOND))?;
        if scaled.fract() != Decimal::ZERO {
            return None;
        }
        scaled.to_i64().map(Micros)
    }

    pub fn as_decimal_secs(self) -> Decimal {
        Decimal::new(self.0, 6).normalize()
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / MICROS_PER_SECOND as f64
    }

    /// Floor division by a positive step, rounding towards negative infinity.
    pub fn floor_div(self, step: Micros) -> i64 {
        self.0.div_euclid(step.0)
    }
}

impl Add for Micros {
    type Output = Micros;
    fn add(self, rhs: Micros) -> Micros {
        Micros(self.0 + rhs.0)
    }
}

impl Sub for Micros {
    type Output = Micros;
    fn sub(self, rhs: Micros) -> Micros {
        Micros(self.0 - rhs.0)
    }
}

/// Seconds with trailing zeros trimmed: `100`, `0.25`, `-27`.
impl fmt::Display for Micros {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_decimal_secs())
    }
}

impl Serialize for Micros {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}
