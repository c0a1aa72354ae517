//! Decimal odds on a quantized tick ladder.

use std::fmt;
use std::sync::LazyLock;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ExchangeError;

/// `(upper bound, increment)` pairs in hundredths, starting from 1.01.
const BANDS: [(u32, u32); 10] = [
    (200, 1),
    (300, 2),
    (400, 5),
    (600, 10),
    (1000, 20),
    (2000, 50),
    (3000, 100),
    (5000, 200),
    (10000, 500),
    (100000, 1000),
];

pub const MIN_HUNDREDTHS: u32 = 101;
pub const MAX_HUNDREDTHS: u32 = 100_000;

static LADDER: LazyLock<Vec<u32>> = LazyLock::new(|| {
    let mut ticks = vec![MIN_HUNDREDTHS];
    let mut v = MIN_HUNDREDTHS;
    for (upper, inc) in BANDS {
        while v < upper {
            v += inc;
            ticks.push(v);
        }
    }
    ticks
});

/// Every permissible odds value, in hundredths, ascending.
pub fn ladder_ticks() -> &'static [u32] {
    &LADDER
}

/// Decimal odds stored as an index into the tick ladder.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Odds(u16);

impl Odds {
    pub const MIN: Odds = Odds(0);

    pub fn max() -> Odds {
        Odds((LADDER.len() - 1) as u16)
    }

    pub fn from_tick(tick: usize) -> Option<Odds> {
        (tick < LADDER.len()).then(|| Odds(tick as u16))
    }

    pub fn tick(self) -> usize {
        self.0 as usize
    }

    /// Exact lookup; values off the ladder are rejected.
    pub fn from_hundredths(h: u32) -> Result<Odds, ExchangeError> {
        LADDER
            .binary_search(&h)
            .map(|i| Odds(i as u16))
            .map_err(|_| {
                ExchangeError::InvalidOdds(format!(
                    "{:.2} is not on the odds ladder",
                    h as f64 / 100.0
                ))
            })
    }

    /// Exact lookup of a decimal value (to the nearest hundredth).
    pub fn from_decimal(d: f64) -> Result<Odds, ExchangeError> {
        if !d.is_finite() || d <= 1.0 {
            return Err(ExchangeError::InvalidOdds(format!("{d} is not above 1.0")));
        }
        Odds::from_hundredths((d * 100.0).round() as u32)
    }

    pub fn hundredths(self) -> u32 {
        LADDER[self.0 as usize]
    }

    pub fn decimal(self) -> f64 {
        self.hundredths() as f64 / 100.0
    }

    pub fn next(self) -> Option<Odds> {
        Odds::from_tick(self.tick() + 1)
    }

    pub fn prev(self) -> Option<Odds> {
        self.tick().checked_sub(1).map(|t| Odds(t as u16))
    }
}

/// Rounds `raw` to the nearest ladder tick, ties upward, clamped to
/// `[1.01, 1000]`. Values at or below 1.0 are rejected.
pub fn quantize_odds(raw: f64) -> Result<Odds, ExchangeError> {
    if raw.is_nan() || raw <= 1.0 {
        return Err(ExchangeError::InvalidOdds(format!(
            "{raw} is not above 1.0"
        )));
    }
    let x = raw * 100.0;
    let ladder = ladder_ticks();
    if x <= MIN_HUNDREDTHS as f64 {
        return Ok(Odds::MIN);
    }
    if x >= MAX_HUNDREDTHS as f64 {
        return Ok(Odds::max());
    }
    // first tick >= x
    let hi = ladder.partition_point(|&t| (t as f64) < x);
    let lo = hi - 1;
    let d_lo = x - ladder[lo] as f64;
    let d_hi = ladder[hi] as f64 - x;
    // decimal inputs like 2.01 are not exact in binary; treat near-ties as ties
    let tie_eps = 1e-9 * x;
    if d_hi <= d_lo + tie_eps {
        Ok(Odds(hi as u16))
    } else {
        Ok(Odds(lo as u16))
    }
}

impl fmt::Display for Odds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2}", self.decimal())
    }
}

impl fmt::Debug for Odds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Odds({self})")
    }
}

impl Serialize for Odds {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.decimal())
    }
}

impl<'de> Deserialize<'de> for Odds {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        Odds::from_decimal(v).map_err(serde::de::Error::custom)
    }
}
