//! Oracles and generators shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use santa_core::{BalanceVector, Cents};

/// Fewest transfers settling `balances`, by exhaustive search over
/// transfer sequences: repeatedly zero the first open balance against each
/// opposite-sign balance in turn. Independent of the partition DP.
pub fn brute_min_transfers(balances: &[i64]) -> usize {
    fn search(debts: &mut [i64], start: usize) -> usize {
        let Some(first) = (start..debts.len()).find(|&i| debts[i] != 0) else {
            return 0;
        };
        let mut best = usize::MAX;
        for j in first + 1..debts.len() {
            if debts[j].signum() == -debts[first].signum() {
                let moved = debts[first];
                debts[j] += moved;
                debts[first] = 0;
                best = best.min(1 + search(debts, first + 1));
                debts[first] = moved;
                debts[j] -= moved;
            }
        }
        best
    }
    let mut debts: Vec<i64> = balances.iter().copied().filter(|&b| b != 0).collect();
    search(&mut debts, 0)
}

/// Does some nonempty sub-multiset of `values` sum to zero?
pub fn ssp_brute(values: &[i64]) -> bool {
    (1u32..1 << values.len()).any(|mask| {
        values
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, v)| v)
            .sum::<i64>()
            == 0
    })
}

/// Zero-sum balances with every debt at most `bound` (strictly below it
/// when `strict`), by rejection sampling.
pub fn random_balances<R: Rng>(rng: &mut R, n: usize, bound: Cents, strict: bool) -> BalanceVector {
    let top = if strict { bound - 1 } else { bound };
    loop {
        let mut v: Vec<Cents> = (0..n - 1)
            .map(|_| rng.random_range(-2 * bound..=top))
            .collect();
        let last = -v.iter().sum::<Cents>();
        if last <= top && last >= -(n as Cents - 1) * bound {
            v.push(last);
            return BalanceVector::new(v).expect("zero-sum by construction");
        }
    }
}
