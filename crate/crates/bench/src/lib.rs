//! Fixtures shared by the criterion benches.

use racebook_core::batch::with_competitors;
use racebook_core::config::ExperimentConfig;
use racebook_core::exchange::{BettorId, MarketBook, Money, Odds, Side};
use racebook_core::RaceConfig;

pub const BETTORS: u32 = 16;

/// The default field widened or narrowed to `n` runners.
pub fn field(n: usize) -> RaceConfig {
    with_competitors(&ExperimentConfig::defaults().race, n)
}

/// A book with well-funded accounts and `n` competitors.
pub fn funded_book(n: u32) -> MarketBook {
    let mut book = MarketBook::new((1..=n).collect());
    for b in 1..=BETTORS {
        book.open_account(BettorId(b), Money(i64::MAX / 64))
            .expect("fresh account");
    }
    book
}

/// A deterministic order stream around a handful of ticks so that a good
/// share of submissions cross resting liquidity.
pub fn order_stream(len: usize, competitors: u32) -> Vec<(BettorId, u32, Side, Odds, Money)> {
    let mut x: u64 = 0x9e37_79b9_7f4a_7c15;
    (0..len)
        .map(|_| {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            let side = if x & 1 == 0 { Side::Back } else { Side::Lay };
            let tick = 95 + (x >> 8) as usize % 10;
            (
                BettorId(1 + (x >> 16) as u32 % BETTORS),
                1 + (x >> 24) as u32 % competitors,
                side,
                Odds::from_tick(tick).expect("tick on ladder"),
                Money(1 + (x >> 32) as i64 % 200),
            )
        })
        .collect()
}
