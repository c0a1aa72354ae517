use proptest::prelude::*;

use racebook_core::agents::{
    decide, rb_weight, AgentParams, Observation, OpenBet, OrderAction, Strategy as Kind,
};
use racebook_core::exchange::{BettorId, MarketBook, Money, Odds, Side};
use racebook_core::race::{CompetitorSpec, RaceConfig, RaceState, StepDistribution};
use racebook_core::seed::stream;

fn strategy() -> impl Strategy<Value = Kind> {
    prop_oneof![
        (0u32..8).prop_map(|d| Kind::Rp { d }),
        (1.0f64..20.0).prop_map(|window| Kind::Linex { window }),
        Just(Kind::Lw),
        (0.5f64..50.0).prop_map(|gap| Kind::Ud { gap }),
        Just(Kind::Btf),
        (0.3f64..1.0).prop_map(|gamma| Kind::Rb {
            gamma,
            d: 3,
            stake_multiples: vec![1, 2, 5]
        }),
        Just(Kind::Zi {
            odds_lo: 1.5,
            odds_hi: 20.0
        }),
    ]
}

const ME: BettorId = BettorId(1);

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// Whatever an agent decides, the exchange accepts it.
    #[test]
    fn decisions_respect_exchange_rules(
        strat in strategy(),
        balance in 0i64..5_000,
        max_stake in 1i64..2_000,
        resting in prop::collection::vec((0usize..3, any::<bool>(), 0usize..150, 1i64..500), 0..20),
        ticks in 0u64..30,
        seed in any::<u64>(),
    ) {
        let race = RaceConfig::new(
            300.0,
            vec![
                CompetitorSpec::new(1, StepDistribution::uniform(10.0, 20.0)),
                CompetitorSpec::new(2, StepDistribution::uniform(1.0, 25.0)),
                CompetitorSpec::new(3, StepDistribution::uniform(12.0, 14.0)),
            ],
        );
        let mut rng = stream(seed);
        let mut state = RaceState::start(&race, &mut rng);
        let mut history = vec![state.positions.clone()];
        for _ in 0..ticks {
            if state.is_finished() {
                break;
            }
            state.advance(&race, &mut rng).unwrap();
            history.push(state.positions.clone());
        }

        let mut book = MarketBook::new(race.competitor_ids());
        book.open_account(ME, Money(balance)).unwrap();
        book.open_account(BettorId(2), Money(1_000_000)).unwrap();
        for &(c, back, tick, stake) in &resting {
            let side = if back { Side::Back } else { Side::Lay };
            book.submit_bet(BettorId(2), c as u32 + 1, side, Odds::from_tick(tick).unwrap(), Money(stake), 0.0).unwrap();
        }
        let grid = book.market_grid(3);
        let mut params = AgentParams::new(strat);
        params.max_stake = Money(max_stake);
        let obs = Observation {
            time: ticks as f64,
            race: &race,
            state: &state,
            history: &history,
            grid: &grid,
            open_bets: Vec::<OpenBet>::new(),
            balance: book.account(ME).unwrap().balance,
        };
        let d = decide(&params, &obs, &mut stream(seed ^ 1)).unwrap();
        let sum: f64 = d.prediction.probs().iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        prop_assert!(d.prediction.probs().iter().all(|p| (0.0..=1.0).contains(p)));
        if balance == 0 {
            prop_assert!(d.actions.is_empty());
        }
        for a in &d.actions {
            if let OrderAction::Place { competitor, side, odds, stake } = *a {
                prop_assert!(stake.is_positive());
                prop_assert!(Odds::from_hundredths(odds.hundredths()).is_ok());
                let r = book.submit_bet(ME, competitor as u32 + 1, side, odds, stake, ticks as f64);
                prop_assert!(r.is_ok(), "{:?} rejected: {:?}", a, r);
            }
        }
        prop_assert_eq!(book.check_invariants(), Ok(()));
    }

    // the curve is monotone only for gamma above about 0.2792
    #[test]
    fn weighting_is_increasing(p in 0.0f64..0.999, dp in 1e-6f64..1e-3, gamma in 0.28f64..=1.0) {
        let q = (p + dp).min(1.0);
        prop_assert!(rb_weight(q, gamma) > rb_weight(p, gamma));
    }
}

#[test]
fn longshots_overweighted_favourites_underweighted() {
    let gamma = 0.61;
    // fixed point of w(p) = p, found by bisection
    let (mut lo, mut hi) = (0.05, 0.95);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rb_weight(mid, gamma) > mid {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let fixed = 0.5 * (lo + hi);
    for i in 1..100 {
        let p = i as f64 / 100.0;
        if p < fixed - 1e-9 {
            assert!(rb_weight(p, gamma) > p, "p={p}");
        } else if p > fixed + 1e-9 {
            assert!(rb_weight(p, gamma) < p, "p={p}");
        }
    }
}
