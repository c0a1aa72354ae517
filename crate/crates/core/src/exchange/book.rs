use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::money::{liability_ceil, liability_floor};
use super::settle::{settle_book, CommissionRate, SettlementReport};
use super::{ExchangeError, ExchangeEvent, ExchangeRecord, Money, Odds};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BetId(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BettorId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Back,
    Lay,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Back => Side::Lay,
            Side::Lay => Side::Back,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarketState {
    Open,
    Closed,
    Settled,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bet {
    pub bet_id: BetId,
    pub bettor_id: BettorId,
    pub competitor_id: u32,
    pub side: Side,
    pub odds: Odds,
    /// Backer-stake units on both sides.
    pub stake: Money,
    pub arrival_seq: u64,
    pub arrival_time: f64,
    pub unmatched: Money,
    pub matched: Money,
    /// Portion removed by cancellation or expiry.
    pub cancelled: Money,
    /// Funds currently held against this bet.
    pub reserved: Money,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub back_bet_id: BetId,
    pub lay_bet_id: BetId,
    pub competitor_id: u32,
    pub odds: Odds,
    pub amount: Money,
    pub match_time: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    /// Free funds.
    pub balance: Money,
    /// Funds held against open or matched bets.
    pub reserved: Money,
}

#[derive(Clone, Debug, Default, PartialEq)]
struct Level {
    queue: VecDeque<BetId>,
    total: Money,
}

#[derive(Clone, Debug, Default, PartialEq)]
struct CompetitorBook {
    backs: BTreeMap<Odds, Level>,
    lays: BTreeMap<Odds, Level>,
}

impl CompetitorBook {
    fn side_mut(&mut self, side: Side) -> &mut BTreeMap<Odds, Level> {
        match side {
            Side::Back => &mut self.backs,
            Side::Lay => &mut self.lays,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriceLevel {
    pub odds: Odds,
    pub stake: Money,
}

/// Best levels for one competitor. `backs` are resting back bets, lowest odds
/// first; `lays` are resting lay bets, highest odds first. In both cases the
/// first entry is the most attractive one for a counterparty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompetitorGrid {
    pub competitor_id: u32,
    pub backs: Vec<PriceLevel>,
    pub lays: Vec<PriceLevel>,
}

impl CompetitorGrid {
    pub fn best_back(&self) -> Option<PriceLevel> {
        self.backs.first().copied()
    }

    pub fn best_lay(&self) -> Option<PriceLevel> {
        self.lays.first().copied()
    }
}

/// One entry per competitor, in competitor order.
pub type MarketGrid = Vec<CompetitorGrid>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LadderRow {
    pub odds: Odds,
    pub back_stake: Money,
    pub lay_stake: Money,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubmitOutcome {
    pub bet_id: BetId,
    pub matches: Vec<MatchRecord>,
}

/// The matching engine for one race market.
///
/// Bets match only against the opposite side at identical odds, oldest
/// first. Every mutation is appended to an internal journal.
#[derive(Clone, Debug, PartialEq)]
pub struct MarketBook {
    competitor_ids: Vec<u32>,
    books: Vec<CompetitorBook>,
    bets: Vec<Bet>,
    trades: Vec<MatchRecord>,
    accounts: BTreeMap<BettorId, Account>,
    state: MarketState,
    journal: Vec<ExchangeRecord>,
}

impl MarketBook {
    pub fn new(competitor_ids: Vec<u32>) -> Self {
        let books = vec![CompetitorBook::default(); competitor_ids.len()];
        Self {
            competitor_ids,
            books,
            bets: Vec::new(),
            trades: Vec::new(),
            accounts: BTreeMap::new(),
            state: MarketState::Open,
            journal: Vec::new(),
        }
    }

    pub fn open_account(&mut self, bettor: BettorId, deposit: Money) -> Result<(), ExchangeError> {
        if deposit.0 < 0 {
            return Err(ExchangeError::InvalidStake(deposit));
        }
        if self.accounts.contains_key(&bettor) {
            return Err(ExchangeError::DuplicateAccount(bettor));
        }
        self.accounts.insert(
            bettor,
            Account {
                balance: deposit,
                reserved: Money::ZERO,
            },
        );
        Ok(())
    }

    pub fn state(&self) -> MarketState {
        self.state
    }

    pub fn competitor_ids(&self) -> &[u32] {
        &self.competitor_ids
    }

    pub fn account(&self, bettor: BettorId) -> Option<Account> {
        self.accounts.get(&bettor).copied()
    }

    pub fn accounts(&self) -> &BTreeMap<BettorId, Account> {
        &self.accounts
    }

    pub fn bet(&self, id: BetId) -> Option<&Bet> {
        id.0.checked_sub(1).and_then(|i| self.bets.get(i as usize))
    }

    pub fn bets(&self) -> &[Bet] {
        &self.bets
    }

    pub fn trades(&self) -> &[MatchRecord] {
        &self.trades
    }

    pub fn journal(&self) -> &[ExchangeRecord] {
        &self.journal
    }

    /// Bets of `bettor` with an unmatched remainder, oldest first.
    pub fn open_bets(&self, bettor: BettorId) -> impl Iterator<Item = &Bet> {
        self.bets
            .iter()
            .filter(move |b| b.bettor_id == bettor && b.unmatched.is_positive())
    }

    fn competitor_index(&self, id: u32) -> Result<usize, ExchangeError> {
        self.competitor_ids
            .iter()
            .position(|&c| c == id)
            .ok_or(ExchangeError::UnknownCompetitor(id))
    }

    fn log(&mut self, time: f64, event: ExchangeEvent) {
        let seq = self.journal.len() as u64 + 1;
        self.journal.push(ExchangeRecord { seq, time, event });
    }

    /// Funds a bet of this shape would hold at acceptance.
    pub fn reservation_for(side: Side, odds: Odds, stake: Money) -> Money {
        match side {
            Side::Back => stake,
            Side::Lay => liability_ceil(stake, odds),
        }
    }

    pub fn submit_bet(
        &mut self,
        bettor: BettorId,
        competitor_id: u32,
        side: Side,
        odds: Odds,
        stake: Money,
        time: f64,
    ) -> Result<SubmitOutcome, ExchangeError> {
        if self.state != MarketState::Open {
            return Err(ExchangeError::MarketClosed);
        }
        if !stake.is_positive() {
            return Err(ExchangeError::InvalidStake(stake));
        }
        let ci = self.competitor_index(competitor_id)?;
        let reservation = Self::reservation_for(side, odds, stake);
        let account = self
            .accounts
            .get_mut(&bettor)
            .ok_or(ExchangeError::UnknownBettor(bettor))?;
        if account.balance < reservation {
            return Err(ExchangeError::InsufficientFunds {
                needed: reservation,
                available: account.balance,
            });
        }
        account.balance -= reservation;
        account.reserved += reservation;

        let bet_id = BetId(self.bets.len() as u64 + 1);
        self.bets.push(Bet {
            bet_id,
            bettor_id: bettor,
            competitor_id,
            side,
            odds,
            stake,
            arrival_seq: bet_id.0,
            arrival_time: time,
            unmatched: stake,
            matched: Money::ZERO,
            cancelled: Money::ZERO,
            reserved: reservation,
        });
        self.log(
            time,
            ExchangeEvent::Submit {
                bet_id,
                bettor_id: bettor,
                competitor_id,
                side,
                odds,
                stake,
                reserved: reservation,
            },
        );

        let mut matches = Vec::new();
        let mut remaining = stake;
        while remaining.is_positive() {
            let opposite = self.books[ci].side_mut(side.opposite());
            let Some(level) = opposite.get_mut(&odds) else {
                break;
            };
            let resting_id = *level.queue.front().expect("non-empty level");
            let resting = &mut self.bets[(resting_id.0 - 1) as usize];
            let amount = remaining.min(resting.unmatched);
            resting.unmatched -= amount;
            resting.matched += amount;
            level.total -= amount;
            if !resting.unmatched.is_positive() {
                level.queue.pop_front();
            }
            if level.queue.is_empty() {
                opposite.remove(&odds);
            }
            remaining -= amount;
            let incoming = &mut self.bets[(bet_id.0 - 1) as usize];
            incoming.unmatched -= amount;
            incoming.matched += amount;

            let (back_bet_id, lay_bet_id) = match side {
                Side::Back => (bet_id, resting_id),
                Side::Lay => (resting_id, bet_id),
            };
            let record = MatchRecord {
                back_bet_id,
                lay_bet_id,
                competitor_id,
                odds,
                amount,
                match_time: time,
            };
            self.log(
                time,
                ExchangeEvent::Match {
                    back_bet_id,
                    lay_bet_id,
                    competitor_id,
                    odds,
                    amount,
                },
            );
            self.trades.push(record.clone());
            matches.push(record);
        }
        if remaining.is_positive() {
            let level = self.books[ci].side_mut(side).entry(odds).or_default();
            level.queue.push_back(bet_id);
            level.total += remaining;
        }
        Ok(SubmitOutcome { bet_id, matches })
    }

    /// Removes the unmatched part of a bet from the book and returns the
    /// reservation it held. Returns `(unmatched amount, released funds)`.
    fn pull_unmatched(&mut self, bet_id: BetId) -> (Money, Money) {
        let idx = (bet_id.0 - 1) as usize;
        let bet = &self.bets[idx];
        let amount = bet.unmatched;
        if !amount.is_positive() {
            return (Money::ZERO, Money::ZERO);
        }
        let (side, odds, ci) = (
            bet.side,
            bet.odds,
            self.competitor_index(bet.competitor_id).expect("known"),
        );
        let levels = self.books[ci].side_mut(side);
        if let Some(level) = levels.get_mut(&odds) {
            level.queue.retain(|&id| id != bet_id);
            level.total -= amount;
            if level.queue.is_empty() {
                levels.remove(&odds);
            }
        }
        let bet = &mut self.bets[idx];
        let release = match bet.side {
            Side::Back => amount,
            Side::Lay => liability_floor(amount, bet.odds),
        }
        .min(bet.reserved);
        bet.unmatched = Money::ZERO;
        bet.cancelled += amount;
        bet.reserved -= release;
        let account = self
            .accounts
            .get_mut(&bet.bettor_id)
            .expect("account exists");
        account.reserved -= release;
        account.balance += release;
        (amount, release)
    }

    /// Cancels the unmatched portion of a bet. A bet with nothing unmatched
    /// yields `Money::ZERO` and leaves no journal entry.
    pub fn cancel_bet(
        &mut self,
        bet_id: BetId,
        bettor: BettorId,
        time: f64,
    ) -> Result<Money, ExchangeError> {
        let bet = self.bet(bet_id).ok_or(ExchangeError::UnknownBet(bet_id))?;
        if bet.bettor_id != bettor {
            return Err(ExchangeError::NotOwner { bet_id, bettor });
        }
        if self.state != MarketState::Open {
            return Err(ExchangeError::MarketClosed);
        }
        let (amount, released) = self.pull_unmatched(bet_id);
        if amount.is_positive() {
            self.log(
                time,
                ExchangeEvent::Cancel {
                    bet_id,
                    bettor_id: bettor,
                    amount,
                    released,
                },
            );
        }
        Ok(amount)
    }

    /// Expires every unmatched portion and closes the market. Returns the
    /// released funds per bettor.
    pub fn close_betting(&mut self, time: f64) -> Result<Vec<(BettorId, Money)>, ExchangeError> {
        if self.state != MarketState::Open {
            return Err(ExchangeError::AlreadyClosed);
        }
        let mut refunds: BTreeMap<BettorId, Money> = BTreeMap::new();
        for i in 0..self.bets.len() {
            let bet_id = self.bets[i].bet_id;
            let bettor = self.bets[i].bettor_id;
            let (amount, released) = self.pull_unmatched(bet_id);
            if amount.is_positive() {
                *refunds.entry(bettor).or_default() += released;
                self.log(
                    time,
                    ExchangeEvent::Expire {
                        bet_id,
                        bettor_id: bettor,
                        amount,
                        released,
                    },
                );
            }
        }
        self.state = MarketState::Closed;
        self.log(time, ExchangeEvent::Close);
        Ok(refunds.into_iter().collect())
    }

    /// Settles a closed market on `winner`, releasing all reservations and
    /// applying net results to balances.
    pub fn settle(
        &mut self,
        winner: u32,
        rate: CommissionRate,
        time: f64,
    ) -> Result<SettlementReport, ExchangeError> {
        match self.state {
            MarketState::Open => return Err(ExchangeError::NotClosed),
            MarketState::Settled => return Err(ExchangeError::AlreadySettled),
            MarketState::Closed => {}
        }
        self.competitor_index(winner)?;
        let report = settle_book(&self.bets, &self.trades, winner, rate);
        for bet in &mut self.bets {
            let account = self
                .accounts
                .get_mut(&bet.bettor_id)
                .expect("account exists");
            account.reserved -= bet.reserved;
            account.balance += bet.reserved;
            bet.reserved = Money::ZERO;
        }
        for row in &report.rows {
            self.accounts
                .get_mut(&row.bettor_id)
                .expect("account exists")
                .balance += row.net;
        }
        self.state = MarketState::Settled;
        self.log(
            time,
            ExchangeEvent::Settle {
                winner,
                commission_rate_bp: rate.basis_points(),
                exchange_take: report.exchange_take,
                transfers: report.rows.clone(),
            },
        );
        Ok(report)
    }

    /// Top `depth` levels per competitor on each side.
    pub fn market_grid(&self, depth: usize) -> MarketGrid {
        self.books
            .iter()
            .zip(&self.competitor_ids)
            .map(|(book, &competitor_id)| CompetitorGrid {
                competitor_id,
                backs: book
                    .backs
                    .iter()
                    .take(depth)
                    .map(|(&odds, l)| PriceLevel {
                        odds,
                        stake: l.total,
                    })
                    .collect(),
                lays: book
                    .lays
                    .iter()
                    .rev()
                    .take(depth)
                    .map(|(&odds, l)| PriceLevel {
                        odds,
                        stake: l.total,
                    })
                    .collect(),
            })
            .collect()
    }

    /// Every odds value with unmatched stake for one competitor, ascending.
    pub fn ladder(&self, competitor_id: u32) -> Result<Vec<LadderRow>, ExchangeError> {
        let book = &self.books[self.competitor_index(competitor_id)?];
        let mut rows: BTreeMap<Odds, LadderRow> = BTreeMap::new();
        for (&odds, l) in &book.backs {
            rows.entry(odds)
                .or_insert(LadderRow {
                    odds,
                    back_stake: Money::ZERO,
                    lay_stake: Money::ZERO,
                })
                .back_stake += l.total;
        }
        for (&odds, l) in &book.lays {
            rows.entry(odds)
                .or_insert(LadderRow {
                    odds,
                    back_stake: Money::ZERO,
                    lay_stake: Money::ZERO,
                })
                .lay_stake += l.total;
        }
        Ok(rows.into_values().collect())
    }

    /// Checks the structural invariants of the book.
    pub fn check_invariants(&self) -> Result<(), String> {
        for (ci, book) in self.books.iter().enumerate() {
            let cid = self.competitor_ids[ci];
            for odds in book.backs.keys() {
                if book.lays.contains_key(odds) {
                    return Err(format!("crossed level: competitor {cid} at {odds}"));
                }
            }
            for (side, levels) in [(Side::Back, &book.backs), (Side::Lay, &book.lays)] {
                for (odds, level) in levels {
                    if level.queue.is_empty() {
                        return Err(format!("empty level left in book at {odds}"));
                    }
                    let mut total = Money::ZERO;
                    let mut last_seq = 0;
                    for id in &level.queue {
                        let b = self.bet(*id).ok_or("queued bet missing")?;
                        if b.side != side || b.odds != *odds || b.competitor_id != cid {
                            return Err(format!("bet {} queued at wrong level", id.0));
                        }
                        if b.arrival_seq <= last_seq {
                            return Err(format!("time priority broken at {odds}"));
                        }
                        last_seq = b.arrival_seq;
                        total += b.unmatched;
                    }
                    if total != level.total {
                        return Err(format!("level total mismatch at {odds}"));
                    }
                }
            }
        }
        let mut reserved: BTreeMap<BettorId, Money> = BTreeMap::new();
        for b in &self.bets {
            if b.unmatched + b.matched + b.cancelled != b.stake
                || b.unmatched.0 < 0
                || b.matched.0 < 0
            {
                return Err(format!("bet {} portions do not sum to stake", b.bet_id.0));
            }
            *reserved.entry(b.bettor_id).or_default() += b.reserved;
        }
        for (bettor, acct) in &self.accounts {
            if acct.balance.0 < 0 || acct.reserved.0 < 0 {
                return Err(format!("negative account for bettor {}", bettor.0));
            }
            if reserved.get(bettor).copied().unwrap_or_default() != acct.reserved {
                return Err(format!("reservation mismatch for bettor {}", bettor.0));
            }
        }
        Ok(())
    }
}
