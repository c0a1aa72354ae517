//! Betting-exchange matching engine.
//!
//! Back and lay bets on each competitor are matched at identical odds in
//! arrival order. Stakes on both sides are in backer-stake units; a lay of
//! `s` at odds `o` risks `s * (o - 1)`. Funds are reserved when a bet is
//! accepted and released on cancel, expiry or settlement.

mod book;
mod money;
mod odds;
pub mod reference;
mod settle;

pub use book::{
    Account, Bet, BetId, BettorId, CompetitorGrid, LadderRow, MarketBook, MarketGrid, MarketState,
    MatchRecord, PriceLevel, Side, SubmitOutcome,
};
pub use money::{liability_ceil, liability_centi, liability_floor, round_half_up, Money};
pub use odds::{ladder_ticks, quantize_odds, Odds};
pub use settle::{bet_result, CommissionRate, SettlementReport, SettlementRow};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExchangeError {
    #[error("market is not open for betting")]
    MarketClosed,
    #[error("market is already closed")]
    AlreadyClosed,
    #[error("market must be closed before settlement")]
    NotClosed,
    #[error("market is already settled")]
    AlreadySettled,
    #[error("invalid odds: {0}")]
    InvalidOdds(String),
    #[error("stake must be positive (got {0})")]
    InvalidStake(Money),
    #[error("insufficient funds: need {needed}, have {available}")]
    InsufficientFunds { needed: Money, available: Money },
    #[error("unknown competitor {0}")]
    UnknownCompetitor(u32),
    #[error("unknown bettor {}", .0 .0)]
    UnknownBettor(BettorId),
    #[error("bettor {} already has an account", .0 .0)]
    DuplicateAccount(BettorId),
    #[error("unknown bet {}", .0 .0)]
    UnknownBet(BetId),
    #[error("bet {} does not belong to bettor {}", bet_id.0, bettor.0)]
    NotOwner { bet_id: BetId, bettor: BettorId },
    #[error("commission rate {0} must be a whole number of basis points in [0, 1)")]
    InvalidCommission(f64),
    #[error("replay diverged: {0}")]
    ReplayMismatch(String),
}

/// A journal entry of the exchange.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExchangeEvent {
    Submit {
        bet_id: BetId,
        bettor_id: BettorId,
        competitor_id: u32,
        side: Side,
        odds: Odds,
        stake: Money,
        reserved: Money,
    },
    Match {
        back_bet_id: BetId,
        lay_bet_id: BetId,
        competitor_id: u32,
        odds: Odds,
        amount: Money,
    },
    Cancel {
        bet_id: BetId,
        bettor_id: BettorId,
        amount: Money,
        released: Money,
    },
    Expire {
        bet_id: BetId,
        bettor_id: BettorId,
        amount: Money,
        released: Money,
    },
    Close,
    Settle {
        winner: u32,
        commission_rate_bp: u32,
        exchange_take: Money,
        transfers: Vec<SettlementRow>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExchangeRecord {
    pub seq: u64,
    pub time: f64,
    #[serde(flatten)]
    pub event: ExchangeEvent,
}

/// Rebuilds a book by re-applying the submit, cancel, close and settle
/// entries of `records`. Generated entries (matches, expiries) must agree
/// with the recorded ones. `after_each` runs after every applied entry.
pub fn replay<F>(
    competitor_ids: Vec<u32>,
    accounts: &[(BettorId, Money)],
    records: &[ExchangeRecord],
    mut after_each: F,
) -> Result<MarketBook, ExchangeError>
where
    F: FnMut(&MarketBook) -> Result<(), String>,
{
    let mut book = MarketBook::new(competitor_ids);
    for &(bettor, deposit) in accounts {
        book.open_account(bettor, deposit)?;
    }
    for rec in records {
        let applied = match &rec.event {
            ExchangeEvent::Submit {
                bet_id,
                bettor_id,
                competitor_id,
                side,
                odds,
                stake,
                ..
            } => {
                let out =
                    book.submit_bet(*bettor_id, *competitor_id, *side, *odds, *stake, rec.time)?;
                if out.bet_id != *bet_id {
                    return Err(ExchangeError::ReplayMismatch(format!(
                        "bet id {} recorded, {} assigned",
                        bet_id.0, out.bet_id.0
                    )));
                }
                true
            }
            ExchangeEvent::Cancel {
                bet_id, bettor_id, ..
            } => {
                book.cancel_bet(*bet_id, *bettor_id, rec.time)?;
                true
            }
            ExchangeEvent::Close => {
                // expiries were logged just before the close entry
                if book.state() == MarketState::Open {
                    book.close_betting(rec.time)?;
                }
                true
            }
            ExchangeEvent::Expire { .. } => {
                if book.state() == MarketState::Open {
                    book.close_betting(rec.time)?;
                }
                false
            }
            ExchangeEvent::Settle {
                winner,
                commission_rate_bp,
                ..
            } => {
                book.settle(
                    *winner,
                    CommissionRate::from_basis_points(*commission_rate_bp)?,
                    rec.time,
                )?;
                true
            }
            ExchangeEvent::Match { .. } => false,
        };
        if applied {
            after_each(&book).map_err(ExchangeError::ReplayMismatch)?;
        }
    }
    if book.journal() != records {
        let at = book
            .journal()
            .iter()
            .zip(records)
            .position(|(a, b)| a != b)
            .unwrap_or(book.journal().len().min(records.len()));
        return Err(ExchangeError::ReplayMismatch(format!(
            "journals differ at entry {}",
            at + 1
        )));
    }
    Ok(book)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn journal_round_trips_through_json() {
        let mut b = MarketBook::new(vec![1, 2]);
        b.open_account(BettorId(1), Money(10_000)).unwrap();
        b.open_account(BettorId(2), Money(10_000)).unwrap();
        let o = Odds::from_decimal(2.5).unwrap();
        b.submit_bet(BettorId(1), 2, Side::Back, o, Money(300), 0.0)
            .unwrap();
        let id = b
            .submit_bet(BettorId(2), 2, Side::Lay, o, Money(100), 1.0)
            .unwrap()
            .bet_id;
        b.submit_bet(BettorId(2), 1, Side::Lay, o, Money(50), 1.5)
            .unwrap();
        b.cancel_bet(id, BettorId(2), 2.0).unwrap();
        b.close_betting(3.0).unwrap();
        b.settle(2, CommissionRate::DEFAULT, 4.0).unwrap();

        let lines: Vec<String> = b
            .journal()
            .iter()
            .map(|r| serde_json::to_string(r).unwrap())
            .collect();
        assert!(lines[0].contains("\"kind\":\"submit\""));
        let parsed: Vec<ExchangeRecord> = lines
            .iter()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(parsed, b.journal());

        let rebuilt = replay(
            vec![1, 2],
            &[(BettorId(1), Money(10_000)), (BettorId(2), Money(10_000))],
            &parsed,
            |bk| bk.check_invariants(),
        )
        .unwrap();
        assert_eq!(rebuilt, b);
    }

    #[test]
    fn replay_detects_tampering() {
        let mut b = MarketBook::new(vec![1]);
        b.open_account(BettorId(1), Money(1000)).unwrap();
        b.open_account(BettorId(2), Money(1000)).unwrap();
        let o = Odds::from_decimal(3.0).unwrap();
        b.submit_bet(BettorId(1), 1, Side::Back, o, Money(10), 0.0)
            .unwrap();
        b.submit_bet(BettorId(2), 1, Side::Lay, o, Money(10), 0.0)
            .unwrap();
        let mut recs = b.journal().to_vec();
        if let ExchangeEvent::Match { amount, .. } = &mut recs[2].event {
            *amount = Money(9);
        }
        let accts = [(BettorId(1), Money(1000)), (BettorId(2), Money(1000))];
        assert!(matches!(
            replay(vec![1], &accts, &recs, |_| Ok(())),
            Err(ExchangeError::ReplayMismatch(_))
        ));
    }
}
