mod common;

use proptest::prelude::*;
use santa_core::ledger::{Endpoints, PiggyDirection, RoundTag};
use santa_core::physical::{
    run_physical_fast, run_physical_round2, run_physical_round2_simplified,
};
use santa_core::protocol::{run_balances, ProtocolRun, RunOptions, Variant};
use santa_core::sep::{
    aggregate_balances, greedy_settle, min_transactions, reduce_ssp_to_sep, sep_decision,
    ssp_via_sep, Reduction,
};
use santa_core::{BalanceVector, Cents, ExpenseGroup, ExpenseScenario, Payment};

use common::{brute_min_transfers, ssp_brute};

fn zero_sum(max_len: usize, spread: i64) -> impl Strategy<Value = Vec<i64>> {
    prop::collection::vec(-spread..=spread, 0..max_len).prop_map(|mut v| {
        let total: i64 = v.iter().sum();
        v.push(-total);
        v
    })
}

/// `(balances, B)` valid for the protocols: debts at most `B` (below `B`
/// when `strict`) and credits no larger than the rest can owe.
fn protocol_input(strict: bool) -> impl Strategy<Value = (BalanceVector, Cents)> {
    (3usize..=8, 1i64..=300).prop_flat_map(move |(n, bound)| {
        let top = if strict { bound - 1 } else { bound };
        prop::collection::vec(-2 * bound..=top, n - 1).prop_filter_map(
            "last balance out of range",
            move |mut v| {
                let last = -v.iter().sum::<Cents>();
                (last <= top && last >= -(n as Cents - 1) * bound).then(|| {
                    v.push(last);
                    (BalanceVector::new(v).unwrap(), bound)
                })
            },
        )
    })
}

fn scenario() -> impl Strategy<Value = ExpenseScenario> {
    (1usize..=6).prop_flat_map(|n| {
        let group = (
            prop::collection::btree_set(0..n, 1..=n),
            prop::collection::vec((0usize..64, 0i64..50_000), 0..4),
        )
            .prop_map(|(members, raw)| {
                let members: Vec<usize> = members.into_iter().collect();
                let payments = raw
                    .into_iter()
                    .map(|(k, amount)| Payment {
                        payer: members[k % members.len()],
                        amount,
                    })
                    .collect();
                ExpenseGroup { members, payments }
            });
        (prop::collection::vec(group, 0..5), any::<u64>()).prop_map(move |(groups, seed)| {
            ExpenseScenario {
                participants: (0..n).map(|i| format!("p{i}")).collect(),
                groups,
                bound_b: 10_000,
                seed,
            }
        })
    })
}

#[test]
fn oracles_on_known_cases() {
    assert_eq!(brute_min_transfers(&[-1500, 8800, -7300]), 2);
    assert_eq!(brute_min_transfers(&[5, -5, 7, -7]), 2);
    assert_eq!(brute_min_transfers(&[5, 4, 3, -5, -7]), 3);
    assert_eq!(brute_min_transfers(&[0, 0, 0]), 0);
    assert!(ssp_brute(&[3, -3, 5]));
    assert!(!ssp_brute(&[1, 2]));
    assert!(!ssp_brute(&[]));
}

proptest! {
    #[test]
    fn aggregation_is_zero_sum(s in scenario()) {
        let balances = aggregate_balances(&s).unwrap();
        prop_assert_eq!(balances.len(), s.participants.len());
        prop_assert_eq!(balances.as_slice().iter().sum::<i64>(), 0);
    }

    #[test]
    fn greedy_settles_within_m_minus_1(v in zero_sum(12, 1000)) {
        let balances = BalanceVector::new(v.clone()).unwrap();
        let plan = greedy_settle(&balances);
        prop_assert!(plan.settles(&v));
        prop_assert!(plan.transfers.iter().all(|t| t.amount > 0));
        prop_assert!(plan.len() <= balances.nonzero_count().saturating_sub(1));
    }

    #[test]
    fn exact_matches_brute_force_and_beats_greedy(v in zero_sum(9, 6)) {
        let balances = BalanceVector::new(v.clone()).unwrap();
        let (count, plan) = min_transactions(&balances).unwrap();
        prop_assert_eq!(count, brute_min_transfers(&v));
        prop_assert_eq!(plan.len(), count);
        prop_assert!(plan.settles(&v));
        prop_assert!(count <= greedy_settle(&balances).len());
        prop_assert_eq!(sep_decision(&balances).unwrap(), count + 1 < v.len());
    }

    #[test]
    fn reduction_is_sound(values in prop::collection::vec(-8i64..=8, 1..=12)) {
        prop_assert_eq!(ssp_via_sep(&values).unwrap(), ssp_brute(&values));
        if let Reduction::Instance(instance) = reduce_ssp_to_sep(&values) {
            prop_assert_eq!(instance.len(), values.len() + 1);
        }
    }

    #[test]
    fn slow_protocol_guarantees((balances, bound) in protocol_input(false), seed in any::<u64>()) {
        let n = balances.len();
        let mut run = ProtocolRun::from_balances(&balances, bound, Variant::Slow, seed, &RunOptions::default()).unwrap();
        run.run_round1_slow().unwrap();
        for &b in run.balances() {
            prop_assert!(b % bound == 0 && b <= bound);
        }
        run.run_round2_and_3_slow().unwrap();
        run.verify().unwrap();
        prop_assert!(run.ledger().is_conserved());
        prop_assert_eq!(run.transaction_count(), 3 * n);
        prop_assert!(run.max_transaction_amount() <= bound);
        prop_assert_eq!(run.ledger().piggy_balance(), 0);
        let in_addresses: Cents = run.ledger().address_balances().values().sum();
        prop_assert_eq!(in_addresses, n as Cents * bound);
    }

    #[test]
    fn fast_protocol_guarantees((balances, bound) in protocol_input(true), seed in any::<u64>()) {
        let n = balances.len();
        let run = run_balances(&balances, bound, Variant::Fast, seed, &RunOptions::default()).unwrap();
        prop_assert!(run.ledger().is_conserved());
        prop_assert_eq!(run.transaction_count(), 2 * n + 1);
        let private: Vec<Cents> = run
            .trace()
            .iter()
            .filter(|t| t.round == RoundTag::Merged)
            .map(|t| t.amount)
            .collect();
        prop_assert_eq!(private.len(), n);
        prop_assert!(private.windows(2).all(|w| w[0] < w[1]));
        for (hop, &amount) in private.iter().enumerate() {
            let hop = hop as Cents;
            prop_assert!(hop * bound < amount && amount <= (hop + 1) * bound);
        }
        let deposits: Vec<Cents> = run
            .ledger()
            .public_log()
            .iter()
            .filter(|e| e.direction == PiggyDirection::ToPiggy)
            .map(|e| e.amount)
            .collect();
        prop_assert_eq!(deposits, vec![n as Cents * bound]);
    }

    #[test]
    fn runs_replay_from_their_seed((balances, bound) in protocol_input(true), seed in any::<u64>()) {
        for variant in [Variant::Slow, Variant::Fast, Variant::PhysicalSlow, Variant::PhysicalFast] {
            let a = run_balances(&balances, bound, variant, seed, &RunOptions::default()).unwrap();
            let b = run_balances(&balances, bound, variant, seed, &RunOptions::default()).unwrap();
            prop_assert_eq!(a.trace_lines(), b.trace_lines());
        }
    }

    #[test]
    fn public_log_never_names_participants((balances, bound) in protocol_input(false), seed in any::<u64>()) {
        let run = run_balances(&balances, bound, Variant::Slow, seed, &RunOptions::default()).unwrap();
        for tx in run.trace() {
            match tx.endpoints {
                Endpoints::Private { from, to } => prop_assert_eq!(to, (from + 1) % balances.len()),
                Endpoints::Public { token, .. } => prop_assert!(run.ledger().owner_of(token).is_some()),
            }
        }
        for i in 0..balances.len() {
            let view = run.ledger().extract_view(i).unwrap();
            prop_assert_eq!(view.public_log.len(), 2 * balances.len());
        }
    }

    #[test]
    fn room_traces_depend_only_on_n(
        (a, bound) in protocol_input(true),
        seed in any::<u64>(),
    ) {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let b = common::random_balances(&mut rng, a.len(), bound, true);
        for variant in [Variant::PhysicalSlow, Variant::PhysicalFast] {
            let ra = run_balances(&a, bound, variant, seed, &RunOptions::default()).unwrap();
            let rb = run_balances(&b, bound, variant, seed ^ 1, &RunOptions::default()).unwrap();
            prop_assert_eq!(&ra.envelope_round().unwrap().trace, &rb.envelope_round().unwrap().trace);
        }
    }

    #[test]
    fn envelope_rounds_conserve_money(
        (n, debtors) in (3usize..=8).prop_flat_map(|n| (Just(n), 0..n)),
        picks in prop::collection::vec(any::<usize>(), 8),
        rotate in any::<usize>(),
        bound in 1i64..=100,
    ) {
        // rounded balances: `debtors` participants owe B, the rest hold
        // the matching credit in multiples of B
        let mut rounded: Vec<Cents> = vec![0; n];
        for (slot, pick) in picks.iter().take(debtors).enumerate() {
            rounded[slot] = bound;
            rounded[debtors + pick % (n - debtors)] -= bound;
        }
        rounded.rotate_left(rotate % n);
        let mut standard = rounded.clone();
        let round = run_physical_round2(&mut standard, bound).unwrap();
        prop_assert!(standard.iter().all(|&b| b == 0));
        prop_assert_eq!(round.money_deposited, round.money_taken);
        let mut simplified = rounded.clone();
        let round = run_physical_round2_simplified(&mut simplified, bound).unwrap();
        prop_assert!(simplified.iter().all(|&b| b == 0));
        prop_assert_eq!(round.stack.height(), n);

        let mut fast: Vec<Cents> = rounded.iter().map(|&b| b.min(0)).collect();
        let total: Cents = fast.iter().sum();
        prop_assume!(total >= -(n as Cents) * bound);
        fast[0] -= n as Cents * bound + total;
        let round = run_physical_fast(&mut fast, bound).unwrap();
        prop_assert!(fast.iter().all(|&b| b == 0));
        prop_assert_eq!(round.money_taken, n);
    }
}
