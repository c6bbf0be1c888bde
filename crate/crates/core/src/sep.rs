//! Shared-expense settlement: balance aggregation, greedy and exact
//! settlement, the decision variant and the subset-sum reduction.
//!
//! Balances follow the "positive pays" convention: a positive entry is a
//! debtor, a negative entry is owed money. A [`Transfer`] moves money from
//! a debtor to a creditor, so applying it subtracts from `from` and adds
//! to `to`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amount::Amount;

/// Largest vector the exact solver accepts.
pub const EXACT_SOLVER_MAX_LEN: usize = 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SepError {
    #[error("balances must sum to zero (found {0})")]
    Imbalanced(String),
    #[error("instance too large for exact solver: {len} entries (max {max})")]
    TooLarge { len: usize, max: usize },
    #[error("scenario has no participants")]
    NoParticipants,
    #[error("group {group} has no members")]
    EmptyGroup { group: usize },
    #[error("group {group}: member {member} is not a participant")]
    UnknownMember { group: usize, member: usize },
    #[error("group {group}: member {member} listed twice")]
    DuplicateMember { group: usize, member: usize },
    #[error("group {group}: payer {payer} is not a member of the group")]
    PayerNotMember { group: usize, payer: usize },
    #[error("group {group}: payment of {amount} is negative")]
    NegativePayment { group: usize, amount: String },
    #[error("bound B must be positive (got {0})")]
    NonPositiveBound(String),
}

/// A zero-sum vector of balances, one per participant.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct BalanceVector<T>(Vec<T>);

impl<T: Amount> BalanceVector<T> {
    pub fn new(balances: Vec<T>) -> Result<Self, SepError> {
        let total: T = balances.iter().copied().sum();
        if !total.is_zero() {
            return Err(SepError::Imbalanced(total.to_string()));
        }
        Ok(Self(balances))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![T::zero(); len])
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn nonzero_count(&self) -> usize {
        self.0.iter().filter(|b| !b.is_zero()).count()
    }
}

impl<'de, T: Amount + Deserialize<'de>> Deserialize<'de> for BalanceVector<T> {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = Vec::<T>::deserialize(deserializer)?;
        Self::new(raw).map_err(serde::de::Error::custom)
    }
}

/// One payment inside an expense group.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Payment<T> {
    pub payer: usize,
    #[serde(rename = "amount_cents")]
    pub amount: T,
}

/// A set of participants sharing the cost of their payments equally.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpenseGroup<T> {
    pub members: Vec<usize>,
    #[serde(default)]
    pub payments: Vec<Payment<T>>,
}

/// Participants, their expense groups, the public gift bound and a seed.
///
/// Participant indices in groups and payments are 0-based positions in
/// `participants`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpenseScenario<T> {
    pub participants: Vec<String>,
    #[serde(default)]
    pub groups: Vec<ExpenseGroup<T>>,
    #[serde(rename = "bound_b_cents")]
    pub bound_b: T,
    #[serde(default)]
    pub seed: u64,
}

impl<T: Amount> ExpenseScenario<T> {
    pub fn validate(&self) -> Result<(), SepError> {
        let n = self.participants.len();
        if n == 0 {
            return Err(SepError::NoParticipants);
        }
        if self.bound_b <= T::zero() {
            return Err(SepError::NonPositiveBound(self.bound_b.to_string()));
        }
        for (g, group) in self.groups.iter().enumerate() {
            if group.members.is_empty() {
                return Err(SepError::EmptyGroup { group: g });
            }
            let mut seen = BTreeSet::new();
            for &member in &group.members {
                if member >= n {
                    return Err(SepError::UnknownMember { group: g, member });
                }
                if !seen.insert(member) {
                    return Err(SepError::DuplicateMember { group: g, member });
                }
            }
            for payment in &group.payments {
                if !seen.contains(&payment.payer) {
                    return Err(SepError::PayerNotMember {
                        group: g,
                        payer: payment.payer,
                    });
                }
                if payment.amount < T::zero() {
                    return Err(SepError::NegativePayment {
                        group: g,
                        amount: payment.amount.to_string(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// A directed money movement from a debtor to a creditor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transfer<T> {
    pub from: usize,
    pub to: usize,
    #[serde(rename = "amount_cents")]
    pub amount: T,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SettlementPlan<T> {
    pub transfers: Vec<Transfer<T>>,
}

impl<T> Default for SettlementPlan<T> {
    fn default() -> Self {
        Self {
            transfers: Vec::new(),
        }
    }
}

impl<T: Amount> SettlementPlan<T> {
    pub fn len(&self) -> usize {
        self.transfers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transfers.is_empty()
    }

    /// Balances left after executing every transfer.
    pub fn apply(&self, balances: &[T]) -> Vec<T> {
        let mut out = balances.to_vec();
        for t in &self.transfers {
            out[t.from] -= t.amount;
            out[t.to] += t.amount;
        }
        out
    }

    /// True when the plan zeroes `balances` using only positive amounts.
    pub fn settles(&self, balances: &[T]) -> bool {
        self.transfers
            .iter()
            .all(|t| t.amount > T::zero() && t.from < balances.len() && t.to < balances.len())
            && self.apply(balances).iter().all(|b| b.is_zero())
    }
}

/// Net balance of every participant over all groups.
///
/// Each group's total is split evenly among its members; when the total is
/// not divisible by the member count, the leftover cents go one each to the
/// lowest-index members.
pub fn aggregate_balances<T: Amount>(
    scenario: &ExpenseScenario<T>,
) -> Result<BalanceVector<T>, SepError> {
    scenario.validate()?;
    let mut balances = vec![T::zero(); scenario.participants.len()];
    for group in &scenario.groups {
        let mut members = group.members.clone();
        members.sort_unstable();
        let count = T::from(members.len()).expect("member count fits the amount type");
        let total: T = group.payments.iter().map(|p| p.amount).sum();
        let share = total / count;
        let remainder = (total % count)
            .to_usize()
            .expect("remainder is non-negative");
        for (rank, &member) in members.iter().enumerate() {
            balances[member] += share;
            if rank < remainder {
                balances[member] += T::one();
            }
        }
        for payment in &group.payments {
            balances[payment.payer] -= payment.amount;
        }
    }
    BalanceVector::new(balances)
}

/// Repeatedly pays from the largest debtor to the largest creditor.
///
/// Ties pick the lowest index. Every step zeroes at least one of the two
/// parties, so the plan has at most `nonzero_count - 1` transfers.
pub fn greedy_settle<T: Amount>(balances: &BalanceVector<T>) -> SettlementPlan<T> {
    let mut work = balances.as_slice().to_vec();
    let mut transfers = Vec::new();
    loop {
        let (mut debtor, mut creditor) = (0, 0);
        for (i, &b) in work.iter().enumerate() {
            if b > work[debtor] {
                debtor = i;
            }
            if b < work[creditor] {
                creditor = i;
            }
        }
        if work.is_empty() || work[debtor] <= T::zero() {
            break;
        }
        let amount = work[debtor].min(-work[creditor]);
        work[debtor] -= amount;
        work[creditor] += amount;
        transfers.push(Transfer {
            from: debtor,
            to: creditor,
            amount,
        });
    }
    SettlementPlan { transfers }
}

/// Fewest transfers that settle `balances`, with a plan achieving it.
///
/// With `m` nonzero balances and `k` the largest number of parts in a
/// partition of them into zero-sum subsets, the optimum is `m - k`. `k` is
/// found by a dynamic program over subsets: ordering the elements, each
/// zero-sum prefix closes one part, so the best ordering of a mask extends
/// the best ordering of the mask minus its last element.
pub fn min_transactions<T: Amount>(
    balances: &BalanceVector<T>,
) -> Result<(usize, SettlementPlan<T>), SepError> {
    if balances.len() > EXACT_SOLVER_MAX_LEN {
        return Err(SepError::TooLarge {
            len: balances.len(),
            max: EXACT_SOLVER_MAX_LEN,
        });
    }
    let nonzero: Vec<usize> = balances
        .as_slice()
        .iter()
        .enumerate()
        .filter(|(_, b)| !b.is_zero())
        .map(|(i, _)| i)
        .collect();
    let m = nonzero.len();
    if m == 0 {
        return Ok((0, SettlementPlan::default()));
    }
    let values: Vec<T> = nonzero.iter().map(|&i| balances.as_slice()[i]).collect();
    let full = (1usize << m) - 1;

    let mut sums = vec![T::zero(); full + 1];
    for mask in 1..=full {
        let low = mask.trailing_zeros() as usize;
        sums[mask] = sums[mask & (mask - 1)] + values[low];
    }
    let mut parts = vec![0u8; full + 1];
    for mask in 1..=full {
        let mut best = 0;
        let mut rest = mask;
        while rest != 0 {
            let bit = rest & rest.wrapping_neg();
            best = best.max(parts[mask ^ bit]);
            rest ^= bit;
        }
        parts[mask] = best + u8::from(sums[mask].is_zero());
    }

    // Walk back from the full set; each zero-sum mask on the path closes a part.
    let mut boundaries = Vec::new();
    let mut mask = full;
    while mask != 0 {
        if sums[mask].is_zero() {
            boundaries.push(mask);
        }
        let closes = u8::from(sums[mask].is_zero());
        let mut rest = mask;
        loop {
            let bit = rest & rest.wrapping_neg();
            if parts[mask ^ bit] + closes == parts[mask] {
                mask ^= bit;
                break;
            }
            rest ^= bit;
        }
    }
    boundaries.push(0);

    let mut plan = SettlementPlan::default();
    for pair in boundaries.windows(2) {
        let part = pair[0] & !pair[1];
        let members: Vec<usize> = (0..m).filter(|b| part >> b & 1 == 1).collect();
        let sub = BalanceVector(members.iter().map(|&b| values[b]).collect());
        for t in greedy_settle(&sub).transfers {
            plan.transfers.push(Transfer {
                from: nonzero[members[t.from]],
                to: nonzero[members[t.to]],
                amount: t.amount,
            });
        }
    }
    let count = m - usize::from(parts[full]);
    debug_assert_eq!(plan.len(), count);
    Ok((count, plan))
}

/// Can `balances` be settled with strictly fewer than `len - 1` transfers?
pub fn sep_decision<T: Amount>(balances: &BalanceVector<T>) -> Result<bool, SepError> {
    let (count, _) = min_transactions(balances)?;
    Ok((count as i64) < balances.len() as i64 - 1)
}

/// Output of the subset-sum to settlement reduction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Reduction<T> {
    /// The whole multiset already sums to zero.
    AnswerYes,
    /// The values plus the negated total; ask [`sep_decision`] about it.
    Instance(BalanceVector<T>),
}

pub fn reduce_ssp_to_sep<T: Amount>(values: &[T]) -> Reduction<T> {
    let total: T = values.iter().copied().sum();
    if total.is_zero() {
        return Reduction::AnswerYes;
    }
    let mut instance = values.to_vec();
    instance.push(-total);
    Reduction::Instance(BalanceVector(instance))
}

/// Decides subset-sum through the reduction and the exact settlement oracle.
pub fn ssp_via_sep<T: Amount>(values: &[T]) -> Result<bool, SepError> {
    match reduce_ssp_to_sep(values) {
        Reduction::AnswerYes => Ok(true),
        Reduction::Instance(instance) => sep_decision(&instance),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bv(v: &[i64]) -> BalanceVector<i64> {
        BalanceVector::new(v.to_vec()).unwrap()
    }

    fn t(from: usize, to: usize, amount: i64) -> Transfer<i64> {
        Transfer { from, to, amount }
    }

    pub(crate) fn dinner() -> ExpenseScenario<i64> {
        ExpenseScenario {
            participants: vec!["Jannik".into(), "Jean-Guillaume".into(), "Pascal".into()],
            groups: vec![ExpenseGroup {
                members: vec![0, 1, 2],
                payments: vec![
                    Payment {
                        payer: 0,
                        amount: 15500,
                    },
                    Payment {
                        payer: 1,
                        amount: 5200,
                    },
                    Payment {
                        payer: 2,
                        amount: 21300,
                    },
                ],
            }],
            bound_b: 5000,
            seed: 0,
        }
    }

    #[test]
    fn dinner_balances() {
        let balances = aggregate_balances(&dinner()).unwrap();
        assert_eq!(balances.as_slice(), &[-1500, 8800, -7300]);
    }

    #[test]
    fn dinner_plus_taxi() {
        let mut s = dinner();
        s.participants.push("Xavier".into());
        s.groups.push(ExpenseGroup {
            members: vec![0, 1, 3],
            payments: vec![Payment {
                payer: 1,
                amount: 6000,
            }],
        });
        let balances = aggregate_balances(&s).unwrap();
        assert_eq!(balances.as_slice(), &[500, 4800, -7300, 2000]);
    }

    #[test]
    fn no_payments_is_all_zero() {
        let s = ExpenseScenario::<i64> {
            participants: vec!["a".into(), "b".into()],
            groups: vec![ExpenseGroup {
                members: vec![0, 1],
                payments: vec![],
            }],
            bound_b: 10,
            seed: 0,
        };
        assert_eq!(aggregate_balances(&s).unwrap().as_slice(), &[0, 0]);
    }

    #[test]
    fn remainder_goes_to_lowest_indices() {
        let s = ExpenseScenario::<i64> {
            participants: vec!["a".into(), "b".into(), "c".into()],
            groups: vec![ExpenseGroup {
                members: vec![2, 0, 1],
                payments: vec![Payment {
                    payer: 0,
                    amount: 100,
                }],
            }],
            bound_b: 100,
            seed: 0,
        };
        // shares 34, 33, 33
        assert_eq!(aggregate_balances(&s).unwrap().as_slice(), &[-66, 33, 33]);
    }

    #[test]
    fn rejects_invalid_scenarios() {
        let mut s = dinner();
        s.groups[0].payments[0].payer = 7;
        assert_eq!(
            aggregate_balances(&s),
            Err(SepError::PayerNotMember { group: 0, payer: 7 })
        );

        let mut s = dinner();
        s.groups[0].payments[1].amount = -1;
        assert!(matches!(
            aggregate_balances(&s),
            Err(SepError::NegativePayment { group: 0, .. })
        ));

        let mut s = dinner();
        s.groups[0].members.push(5);
        assert_eq!(
            aggregate_balances(&s),
            Err(SepError::UnknownMember {
                group: 0,
                member: 5
            })
        );

        let mut s = dinner();
        s.groups[0].members.push(1);
        assert_eq!(
            aggregate_balances(&s),
            Err(SepError::DuplicateMember {
                group: 0,
                member: 1
            })
        );

        let mut s = dinner();
        s.bound_b = 0;
        assert!(matches!(
            aggregate_balances(&s),
            Err(SepError::NonPositiveBound(_))
        ));
    }

    #[test]
    fn balance_vector_must_sum_to_zero() {
        assert_eq!(
            BalanceVector::new(vec![1i64, 2]),
            Err(SepError::Imbalanced("3".into()))
        );
        let err = serde_json::from_str::<BalanceVector<i64>>("[1, -2]").unwrap_err();
        assert!(err.to_string().contains("sum to zero"));
    }

    #[test]
    fn greedy_dinner() {
        let plan = greedy_settle(&bv(&[-1500, 8800, -7300]));
        assert_eq!(plan.transfers, vec![t(1, 2, 7300), t(1, 0, 1500)]);
    }

    #[test]
    fn greedy_dinner_plus_taxi() {
        let plan = greedy_settle(&bv(&[500, 4800, -7300, 2000]));
        assert_eq!(
            plan.transfers,
            vec![t(1, 2, 4800), t(3, 2, 2000), t(0, 2, 500)]
        );
    }

    #[test]
    fn greedy_zero_vector() {
        assert!(greedy_settle(&bv(&[0, 0, 0])).is_empty());
        assert!(greedy_settle(&BalanceVector::<i64>::zeros(0)).is_empty());
    }

    #[test]
    fn greedy_ties_pick_lowest_index() {
        let plan = greedy_settle(&bv(&[3, 3, -3, -3]));
        assert_eq!(plan.transfers, vec![t(0, 2, 3), t(1, 3, 3)]);
    }

    #[test]
    fn exact_examples() {
        let (count, plan) = min_transactions(&bv(&[-1500, 8800, -7300])).unwrap();
        assert_eq!(count, 2);
        assert!(plan.settles(&[-1500, 8800, -7300]));

        let (count, plan) = min_transactions(&bv(&[0, 0, 0])).unwrap();
        assert_eq!(count, 0);
        assert!(plan.is_empty());

        let (count, plan) = min_transactions(&bv(&[5, -5, 7, -7])).unwrap();
        assert_eq!(count, 2);
        assert!(plan.settles(&[5, -5, 7, -7]));
    }

    #[test]
    fn exact_beats_greedy_when_pairs_exist() {
        // greedy pairs 5 with -7 and never recovers the {5, -5} part
        let v = [5, 4, 3, -5, -7];
        assert_eq!(greedy_settle(&bv(&v)).len(), 4);
        let (count, plan) = min_transactions(&bv(&v)).unwrap();
        assert_eq!(count, 3);
        assert!(plan.settles(&v));
    }

    #[test]
    fn exact_rejects_large_instances() {
        let mut v = vec![1i64; 21];
        v[20] = -20;
        assert_eq!(
            min_transactions(&bv(&v)),
            Err(SepError::TooLarge { len: 21, max: 20 })
        );
        assert!(sep_decision(&bv(&v)).is_err());
    }

    #[test]
    fn exact_handles_max_length() {
        let mut v: Vec<i64> = (1..=10).collect();
        v.extend((1..=10).map(|x| -x));
        let (count, plan) = min_transactions(&bv(&v)).unwrap();
        assert_eq!(count, 10);
        assert!(plan.settles(&v));
    }

    #[test]
    fn decision_examples() {
        assert!(sep_decision(&bv(&[5, -5, 7, -7])).unwrap());
        assert!(!sep_decision(&bv(&[-1500, 8800, -7300])).unwrap());
        assert!(sep_decision(&bv(&[0, 0, 0])).unwrap());
        assert!(!sep_decision(&bv(&[0])).unwrap());
        assert!(!sep_decision(&BalanceVector::<i64>::zeros(0)).unwrap());
    }

    #[test]
    fn reduction_examples() {
        assert_eq!(reduce_ssp_to_sep(&[1i64, 2, -3]), Reduction::AnswerYes);

        let Reduction::Instance(k) = reduce_ssp_to_sep(&[1i64, 2]) else {
            panic!("expected an instance");
        };
        assert_eq!(k.as_slice(), &[1, 2, -3]);
        assert!(!sep_decision(&k).unwrap());

        let Reduction::Instance(k) = reduce_ssp_to_sep(&[3i64, -3, 5]) else {
            panic!("expected an instance");
        };
        assert_eq!(k.as_slice(), &[3, -3, 5, -5]);
        assert!(sep_decision(&k).unwrap());
    }

    #[test]
    fn zero_entry_is_a_subset_sum_witness() {
        assert!(ssp_via_sep(&[0i64, 4]).unwrap());
        assert!(!ssp_via_sep(&[4i64]).unwrap());
    }

    #[test]
    fn works_on_narrow_and_wide_scalars() {
        let narrow = BalanceVector::new(vec![5i32, -5, 7, -7]).unwrap();
        assert_eq!(min_transactions(&narrow).unwrap().0, 2);
        let wide = BalanceVector::new(vec![i128::from(i64::MAX), -i128::from(i64::MAX)]).unwrap();
        assert_eq!(greedy_settle(&wide).len(), 1);
    }
}
