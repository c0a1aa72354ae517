//! A deliberately naive matcher: every submit scans all earlier bets in
//! arrival order. Slow but obviously correct, for differential testing of
//! [`MarketBook`](super::MarketBook).

use std::collections::BTreeMap;

use super::{BetId, BettorId, LadderRow, MatchRecord, Money, Odds, Side};

#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceBet {
    pub bet_id: BetId,
    pub bettor_id: BettorId,
    pub competitor_id: u32,
    pub side: Side,
    pub odds: Odds,
    pub stake: Money,
    pub unmatched: Money,
    pub matched: Money,
}

#[derive(Clone, Debug, Default)]
pub struct ReferenceBook {
    pub bets: Vec<ReferenceBet>,
    pub trades: Vec<MatchRecord>,
}

impl ReferenceBook {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn submit(
        &mut self,
        bettor_id: BettorId,
        competitor_id: u32,
        side: Side,
        odds: Odds,
        stake: Money,
        time: f64,
    ) -> BetId {
        let bet_id = BetId(self.bets.len() as u64 + 1);
        let mut remaining = stake;
        for b in self.bets.iter_mut() {
            if !remaining.is_positive() {
                break;
            }
            if b.competitor_id != competitor_id
                || b.side == side
                || b.odds != odds
                || !b.unmatched.is_positive()
            {
                continue;
            }
            let amount = remaining.min(b.unmatched);
            b.unmatched -= amount;
            b.matched += amount;
            remaining -= amount;
            let (back_bet_id, lay_bet_id) = match side {
                Side::Back => (bet_id, b.bet_id),
                Side::Lay => (b.bet_id, bet_id),
            };
            self.trades.push(MatchRecord {
                back_bet_id,
                lay_bet_id,
                competitor_id,
                odds,
                amount,
                match_time: time,
            });
        }
        self.bets.push(ReferenceBet {
            bet_id,
            bettor_id,
            competitor_id,
            side,
            odds,
            stake,
            unmatched: remaining,
            matched: stake - remaining,
        });
        bet_id
    }

    pub fn cancel(&mut self, bet_id: BetId) -> Money {
        let b = &mut self.bets[(bet_id.0 - 1) as usize];
        std::mem::replace(&mut b.unmatched, Money::ZERO)
    }

    /// Unmatched stake per odds for one competitor, ascending odds.
    pub fn ladder(&self, competitor_id: u32) -> Vec<LadderRow> {
        let mut m: BTreeMap<Odds, (Money, Money)> = BTreeMap::new();
        for b in &self.bets {
            if b.competitor_id != competitor_id || !b.unmatched.is_positive() {
                continue;
            }
            let e = m.entry(b.odds).or_default();
            match b.side {
                Side::Back => e.0 += b.unmatched,
                Side::Lay => e.1 += b.unmatched,
            }
        }
        m.into_iter()
            .map(|(odds, (back_stake, lay_stake))| LadderRow {
                odds,
                back_stake,
                lay_stake,
            })
            .collect()
    }
}
