use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use super::Odds;

/// An amount in integer minor units (e.g. cents).
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Money(pub i64);

impl Money {
    pub const ZERO: Money = Money(0);

    pub fn minor(self) -> i64 {
        self.0
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money(self.0 - rhs.0)
    }
}

impl Neg for Money {
    type Output = Money;
    fn neg(self) -> Money {
        Money(-self.0)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl SubAssign for Money {
    fn sub_assign(&mut self, rhs: Money) {
        self.0 -= rhs.0;
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        Money(iter.map(|m| m.0).sum())
    }
}

/// Layer liability of `stake` at `odds` in hundredths of a minor unit:
/// `stake * (odds - 1) * 100`, exact.
pub fn liability_centi(stake: Money, odds: Odds) -> i64 {
    stake.0 * (odds.hundredths() as i64 - 100)
}

/// Liability rounded up to whole minor units; what a layer must reserve.
pub fn liability_ceil(stake: Money, odds: Odds) -> Money {
    Money(div_ceil(liability_centi(stake, odds), 100))
}

/// Liability rounded down to whole minor units.
pub fn liability_floor(stake: Money, odds: Odds) -> Money {
    Money(liability_centi(stake, odds).div_euclid(100))
}

/// `round(num / den)` with halves rounded toward positive infinity.
pub fn round_half_up(num: i64, den: i64) -> i64 {
    debug_assert!(den > 0);
    (2 * num + den).div_euclid(2 * den)
}

fn div_ceil(num: i64, den: i64) -> i64 {
    -((-num).div_euclid(den))
}
