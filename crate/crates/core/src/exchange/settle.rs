//! Market settlement with per-market net commission.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::money::{liability_centi, round_half_up};
use super::{Bet, BettorId, ExchangeError, MatchRecord, Money, Side};

/// Commission rate in basis points of net winnings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CommissionRate(u32);

impl CommissionRate {
    pub const DEFAULT: CommissionRate = CommissionRate(500);

    pub fn from_basis_points(bp: u32) -> Result<Self, ExchangeError> {
        if bp >= 10_000 {
            return Err(ExchangeError::InvalidCommission(bp as f64 / 10_000.0));
        }
        Ok(CommissionRate(bp))
    }

    /// From a fraction such as `0.05`; must be in `[0, 1)` and a whole number
    /// of basis points.
    pub fn from_fraction(rate: f64) -> Result<Self, ExchangeError> {
        if !(rate.is_finite() && (0.0..1.0).contains(&rate)) {
            return Err(ExchangeError::InvalidCommission(rate));
        }
        let bp = rate * 10_000.0;
        if (bp - bp.round()).abs() > 1e-6 {
            return Err(ExchangeError::InvalidCommission(rate));
        }
        Self::from_basis_points(bp.round() as u32)
    }

    pub fn basis_points(self) -> u32 {
        self.0
    }

    pub fn fraction(self) -> f64 {
        self.0 as f64 / 10_000.0
    }

    /// Commission on positive net winnings, rounded half up.
    pub fn charge(self, gross: Money) -> Money {
        if gross.is_positive() {
            Money(round_half_up(gross.0 * self.0 as i64, 10_000))
        } else {
            Money::ZERO
        }
    }
}

impl Default for CommissionRate {
    fn default() -> Self {
        Self::DEFAULT
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SettlementRow {
    pub bettor_id: BettorId,
    pub gross: Money,
    pub commission: Money,
    pub net: Money,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SettlementReport {
    pub winner: u32,
    pub commission_rate_bp: u32,
    /// One row per bettor with at least one matched bet, by bettor id.
    pub rows: Vec<SettlementRow>,
    /// Commission charged, summed over rows.
    pub total_commission: Money,
    /// What the exchange keeps: commission plus any rounding remainder.
    /// Always equals minus the sum of the bettors' net results.
    pub exchange_take: Money,
}

impl SettlementReport {
    pub fn net_sum(&self) -> Money {
        self.rows.iter().map(|r| r.net).sum()
    }
}

/// Computes per-bettor results from the match ledger. Gross results are
/// accumulated exactly in hundredths of a minor unit and rounded half up once
/// per bettor.
pub(crate) fn settle_book(
    bets: &[Bet],
    trades: &[MatchRecord],
    winner: u32,
    rate: CommissionRate,
) -> SettlementReport {
    let owner = |id: super::BetId| bets[(id.0 - 1) as usize].bettor_id;
    let mut gross_centi: BTreeMap<BettorId, i64> = BTreeMap::new();
    for m in trades {
        let backer = owner(m.back_bet_id);
        let layer = owner(m.lay_bet_id);
        let (back_delta, lay_delta) = if m.competitor_id == winner {
            let x = liability_centi(m.amount, m.odds);
            (x, -x)
        } else {
            (-m.amount.0 * 100, m.amount.0 * 100)
        };
        *gross_centi.entry(backer).or_default() += back_delta;
        *gross_centi.entry(layer).or_default() += lay_delta;
    }
    let rows: Vec<SettlementRow> = gross_centi
        .into_iter()
        .map(|(bettor_id, g)| {
            let gross = Money(round_half_up(g, 100));
            let commission = rate.charge(gross);
            SettlementRow {
                bettor_id,
                gross,
                commission,
                net: gross - commission,
            }
        })
        .collect();
    let total_commission = rows.iter().map(|r| r.commission).sum();
    let exchange_take = -rows.iter().map(|r| r.net).sum::<Money>();
    SettlementReport {
        winner,
        commission_rate_bp: rate.basis_points(),
        rows,
        total_commission,
        exchange_take,
    }
}

/// What a single matched bet pays its owner before commission, in minor
/// units rounded half up.
pub fn bet_result(side: Side, odds: super::Odds, amount: Money, won: bool) -> Money {
    let centi = match (side, won) {
        (Side::Back, true) => liability_centi(amount, odds),
        (Side::Back, false) => -amount.0 * 100,
        (Side::Lay, true) => -liability_centi(amount, odds),
        (Side::Lay, false) => amount.0 * 100,
    };
    Money(round_half_up(centi, 100))
}
