use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Serialize};

/// Fixed-point time in millionths of an hour.
///
/// Instance times are decimal hours; storing them as integers keeps every
/// constraint comparison exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Ticks(pub i64);

impl Ticks {
    pub const PER_HOUR: i64 = 1_000_000;
    pub const ZERO: Ticks = Ticks(0);

    /// Rounds `hours` to the nearest tick.
    pub fn from_hours(hours: f64) -> Self {
        Ticks((hours * Self::PER_HOUR as f64).round() as i64)
    }

    pub fn hours(self) -> f64 {
        self.0 as f64 / Self::PER_HOUR as f64
    }
}

impl Add for Ticks {
    type Output = Ticks;
    fn add(self, rhs: Ticks) -> Ticks {
        Ticks(self.0 + rhs.0)
    }
}

impl AddAssign for Ticks {
    fn add_assign(&mut self, rhs: Ticks) {
        self.0 += rhs.0;
    }
}

impl Sub for Ticks {
    type Output = Ticks;
    fn sub(self, rhs: Ticks) -> Ticks {
        Ticks(self.0 - rhs.0)
    }
}

impl std::iter::Sum for Ticks {
    fn sum<I: Iterator<Item = Ticks>>(iter: I) -> Ticks {
        Ticks(iter.map(|t| t.0).sum())
    }
}

impl fmt::Display for Ticks {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.hours())
    }
}
