//! Simulated payment fabric.
//!
//! Two channel kinds exist. Private transfers are seen only by their two
//! endpoints. Public anonymous transactions move money into or out of the
//! shared piggy-bank address and are seen by everyone, but only as
//! `(round, direction, amount, opaque token)`. The token-to-owner table is
//! kept for audit bookkeeping and never appears in a [`View`].
//!
//! Public transactions issued during a round stay pending until
//! [`LedgerState::seal_round`], which appends them to the public log in a
//! seeded random order. Balance effects apply immediately.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Cents;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Private,
    PublicAnonymous,
}

/// Protocol phase a transaction belongs to. Variants are declared in
/// chronological order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundTag {
    Round1,
    Merged,
    PiggyDeposit,
    PiggyWithdraw,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PiggyDirection {
    ToPiggy,
    FromPiggy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Sent,
    Received,
}

/// Opaque anonymous address. Drawn at random so its value carries no
/// information about its owner or about when it was created.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AddressToken(u64);

impl AddressToken {
    pub fn from_raw(raw: u64) -> Self {
        Self(raw)
    }
}

impl fmt::Display for AddressToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl fmt::Debug for AddressToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AddressToken({self})")
    }
}

impl Serialize for AddressToken {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AddressToken {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        u64::from_str_radix(&text, 16)
            .map(Self)
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Endpoints {
    Private {
        from: usize,
        to: usize,
    },
    Public {
        direction: PiggyDirection,
        token: AddressToken,
    },
}

/// One money movement, with endpoints as recorded by the ledger.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Transaction {
    pub round: RoundTag,
    pub amount: Cents,
    pub endpoints: Endpoints,
}

impl Transaction {
    pub fn kind(&self) -> ChannelKind {
        match self.endpoints {
            Endpoints::Private { .. } => ChannelKind::Private,
            Endpoints::Public { .. } => ChannelKind::PublicAnonymous,
        }
    }
}

/// A public transaction as every participant observes it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PublicEvent {
    pub round: RoundTag,
    pub direction: PiggyDirection,
    pub amount: Cents,
    pub token: AddressToken,
}

/// A value the view owner sent or received itself.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ViewEvent {
    pub direction: Direction,
    pub kind: ChannelKind,
    pub amount: Cents,
    pub round: RoundTag,
    /// The owner's own address, for its public transactions.
    pub token: Option<AddressToken>,
}

/// Everything one participant sent and received, plus the public log.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct View {
    pub owner: usize,
    pub events: Vec<ViewEvent>,
    pub public_log: Vec<PublicEvent>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LedgerError {
    #[error("transaction amount must be positive (got {0})")]
    NonPositiveAmount(Cents),
    #[error("unknown participant {0}")]
    UnknownParticipant(usize),
    #[error("participant {0} cannot pay itself")]
    SelfTransfer(usize),
    #[error("piggy bank overdraw: requested {requested}, available {available}")]
    Overdraw { requested: Cents, available: Cents },
    #[error("address {0} was already used")]
    TokenReused(AddressToken),
    #[error("public round still open; seal it first")]
    RoundOpen,
}

#[derive(Clone, Debug)]
pub struct LedgerState {
    balances: Vec<Cents>,
    piggy_balance: Cents,
    address_balances: BTreeMap<AddressToken, Cents>,
    owners: BTreeMap<AddressToken, usize>,
    public_log: Vec<PublicEvent>,
    private_logs: Vec<Vec<ViewEvent>>,
    history: Vec<Transaction>,
    pending: Vec<(Transaction, usize)>,
    deposited: Cents,
    initial_total: Cents,
}

impl LedgerState {
    /// Fresh ledger over the running balances `p_i` (positive = owes).
    pub fn new(balances: Vec<Cents>) -> Self {
        let initial_total = balances.iter().sum();
        let n = balances.len();
        Self {
            balances,
            piggy_balance: 0,
            address_balances: BTreeMap::new(),
            owners: BTreeMap::new(),
            public_log: Vec::new(),
            private_logs: vec![Vec::new(); n],
            history: Vec::new(),
            pending: Vec::new(),
            deposited: 0,
            initial_total,
        }
    }

    pub fn participants(&self) -> usize {
        self.balances.len()
    }

    pub fn balance(&self, i: usize) -> Cents {
        self.balances[i]
    }

    pub fn balances(&self) -> &[Cents] {
        &self.balances
    }

    pub fn piggy_balance(&self) -> Cents {
        self.piggy_balance
    }

    pub fn address_balances(&self) -> &BTreeMap<AddressToken, Cents> {
        &self.address_balances
    }

    pub fn public_log(&self) -> &[PublicEvent] {
        &self.public_log
    }

    pub fn private_log(&self, i: usize) -> Option<&[ViewEvent]> {
        self.private_logs.get(i).map(Vec::as_slice)
    }

    /// Every committed transaction in trace order.
    pub fn history(&self) -> &[Transaction] {
        &self.history
    }

    pub fn has_open_round(&self) -> bool {
        !self.pending.is_empty()
    }

    /// Audit-only: who controls `token`.
    pub fn owner_of(&self, token: AddressToken) -> Option<usize> {
        self.owners.get(&token).copied()
    }

    /// Debts plus piggy-bank credit; constant across every operation.
    pub fn net_position(&self) -> Cents {
        self.balances.iter().sum::<Cents>() + self.piggy_balance
    }

    /// Both conservation laws: the debt ledger including the piggy bank
    /// keeps its initial total, and every deposited cent sits either in the
    /// piggy bank or in an anonymous address.
    pub fn is_conserved(&self) -> bool {
        let in_addresses: Cents = self.address_balances.values().sum();
        self.net_position() == self.initial_total
            && self.piggy_balance >= 0
            && self.piggy_balance + in_addresses == self.deposited
    }

    /// A token that has never been used on this ledger.
    pub fn mint_token<R: Rng + ?Sized>(&self, rng: &mut R) -> AddressToken {
        loop {
            let token = AddressToken(rng.random());
            if !self.owners.contains_key(&token) {
                return token;
            }
        }
    }

    fn check_participant(&self, i: usize) -> Result<(), LedgerError> {
        if i < self.balances.len() {
            Ok(())
        } else {
            Err(LedgerError::UnknownParticipant(i))
        }
    }

    fn check_amount(amount: Cents) -> Result<(), LedgerError> {
        if amount > 0 {
            Ok(())
        } else {
            Err(LedgerError::NonPositiveAmount(amount))
        }
    }

    fn check_fresh(&self, token: AddressToken) -> Result<(), LedgerError> {
        if self.owners.contains_key(&token) {
            Err(LedgerError::TokenReused(token))
        } else {
            Ok(())
        }
    }

    pub fn private_transfer(
        &mut self,
        from: usize,
        to: usize,
        amount: Cents,
        round: RoundTag,
    ) -> Result<(), LedgerError> {
        Self::check_amount(amount)?;
        self.check_participant(from)?;
        self.check_participant(to)?;
        if from == to {
            return Err(LedgerError::SelfTransfer(from));
        }
        self.balances[from] -= amount;
        self.balances[to] += amount;
        let event = |direction| ViewEvent {
            direction,
            kind: ChannelKind::Private,
            amount,
            round,
            token: None,
        };
        self.private_logs[from].push(event(Direction::Sent));
        self.private_logs[to].push(event(Direction::Received));
        self.history.push(Transaction {
            round,
            amount,
            endpoints: Endpoints::Private { from, to },
        });
        Ok(())
    }

    /// `from` pays `amount` into the piggy bank out of its address `source`.
    pub fn public_deposit(
        &mut self,
        from: usize,
        amount: Cents,
        source: AddressToken,
    ) -> Result<(), LedgerError> {
        Self::check_amount(amount)?;
        self.check_participant(from)?;
        self.check_fresh(source)?;
        self.balances[from] -= amount;
        self.piggy_balance += amount;
        self.deposited += amount;
        self.owners.insert(source, from);
        self.pending.push((
            Transaction {
                round: RoundTag::PiggyDeposit,
                amount,
                endpoints: Endpoints::Public {
                    direction: PiggyDirection::ToPiggy,
                    token: source,
                },
            },
            from,
        ));
        Ok(())
    }

    /// The piggy bank pays `amount` to `fresh_address`, controlled by `to`.
    /// Any participant may trigger this: the piggy key is shared.
    pub fn public_withdraw(
        &mut self,
        to: usize,
        amount: Cents,
        fresh_address: AddressToken,
    ) -> Result<(), LedgerError> {
        Self::check_amount(amount)?;
        self.check_participant(to)?;
        self.check_fresh(fresh_address)?;
        if amount > self.piggy_balance {
            return Err(LedgerError::Overdraw {
                requested: amount,
                available: self.piggy_balance,
            });
        }
        self.piggy_balance -= amount;
        self.balances[to] += amount;
        *self.address_balances.entry(fresh_address).or_insert(0) += amount;
        self.owners.insert(fresh_address, to);
        self.pending.push((
            Transaction {
                round: RoundTag::PiggyWithdraw,
                amount,
                endpoints: Endpoints::Public {
                    direction: PiggyDirection::FromPiggy,
                    token: fresh_address,
                },
            },
            to,
        ));
        Ok(())
    }

    /// Publishes the pending public transactions in a random order.
    pub fn seal_round<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let mut pending = std::mem::take(&mut self.pending);
        pending.shuffle(rng);
        for (tx, owner) in pending {
            let Endpoints::Public { direction, token } = tx.endpoints else {
                unreachable!("only public transactions are deferred");
            };
            self.public_log.push(PublicEvent {
                round: tx.round,
                direction,
                amount: tx.amount,
                token,
            });
            self.private_logs[owner].push(ViewEvent {
                direction: match direction {
                    PiggyDirection::ToPiggy => Direction::Sent,
                    PiggyDirection::FromPiggy => Direction::Received,
                },
                kind: ChannelKind::PublicAnonymous,
                amount: tx.amount,
                round: tx.round,
                token: Some(token),
            });
            self.history.push(tx);
        }
    }

    pub fn extract_view(&self, i: usize) -> Result<View, LedgerError> {
        self.check_participant(i)?;
        if self.has_open_round() {
            return Err(LedgerError::RoundOpen);
        }
        Ok(View {
            owner: i,
            events: self.private_logs[i].clone(),
            public_log: self.public_log.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::run_rng;

    #[test]
    fn private_transfer_is_seen_by_endpoints_only() {
        let mut ledger = LedgerState::new(vec![500, 4800, -7300, 2000]);
        ledger
            .private_transfer(0, 1, 1200, RoundTag::Round1)
            .unwrap();
        assert_eq!(ledger.private_log(0).unwrap().len(), 1);
        assert_eq!(ledger.private_log(1).unwrap().len(), 1);
        assert!(ledger.private_log(2).unwrap().is_empty());
        assert!(ledger.public_log().is_empty());
        assert_eq!(ledger.balances(), &[-700, 6000, -7300, 2000]);
        assert!(ledger.is_conserved());
    }

    #[test]
    fn relay_counts_events_per_participant() {
        let mut ledger = LedgerState::new(vec![0, 0, 0]);
        ledger.private_transfer(0, 1, 5, RoundTag::Round1).unwrap();
        ledger.private_transfer(1, 2, 5, RoundTag::Round1).unwrap();
        let counts: Vec<usize> = (0..3)
            .map(|i| ledger.private_log(i).unwrap().len())
            .collect();
        assert_eq!(counts, vec![1, 2, 1]);
    }

    #[test]
    fn zero_and_negative_amounts_are_rejected() {
        let mut ledger = LedgerState::new(vec![0, 0, 0]);
        assert_eq!(
            ledger.private_transfer(0, 1, 0, RoundTag::Round1),
            Err(LedgerError::NonPositiveAmount(0))
        );
        let token = AddressToken(1);
        assert_eq!(
            ledger.public_deposit(0, -5, token),
            Err(LedgerError::NonPositiveAmount(-5))
        );
        assert_eq!(
            ledger.private_transfer(0, 9, 1, RoundTag::Round1),
            Err(LedgerError::UnknownParticipant(9))
        );
        assert_eq!(
            ledger.private_transfer(1, 1, 1, RoundTag::Round1),
            Err(LedgerError::SelfTransfer(1))
        );
        assert!(ledger.history().is_empty());
    }

    #[test]
    fn deposits_fill_the_piggy_bank() {
        let mut rng = run_rng(1);
        let mut ledger = LedgerState::new(vec![0, 5000, -10000, 5000]);
        for i in 0..4 {
            let token = ledger.mint_token(&mut rng);
            ledger.public_deposit(i, 5000, token).unwrap();
        }
        assert_eq!(ledger.piggy_balance(), 20000);
        assert!(ledger.is_conserved());
    }

    #[test]
    fn overdraw_is_rejected() {
        let mut ledger = LedgerState::new(vec![0, 0]);
        assert_eq!(
            ledger.public_withdraw(0, 5000, AddressToken(9)),
            Err(LedgerError::Overdraw {
                requested: 5000,
                available: 0
            })
        );
    }

    #[test]
    fn address_reuse_is_rejected() {
        let mut ledger = LedgerState::new(vec![5000, -5000]);
        ledger.public_deposit(0, 5000, AddressToken(1)).unwrap();
        ledger.public_deposit(0, 5000, AddressToken(2)).unwrap();
        ledger.public_withdraw(1, 5000, AddressToken(3)).unwrap();
        assert_eq!(
            ledger.public_withdraw(1, 5000, AddressToken(3)),
            Err(LedgerError::TokenReused(AddressToken(3)))
        );
        assert_eq!(
            ledger.public_deposit(0, 1, AddressToken(1)),
            Err(LedgerError::TokenReused(AddressToken(1)))
        );
    }

    #[test]
    fn views_require_sealed_rounds() {
        let mut rng = run_rng(3);
        let mut ledger = LedgerState::new(vec![0, 0, 0]);
        assert!(ledger.extract_view(1).unwrap().events.is_empty());
        assert_eq!(
            ledger.extract_view(3),
            Err(LedgerError::UnknownParticipant(3))
        );
        let token = ledger.mint_token(&mut rng);
        ledger.public_deposit(2, 10, token).unwrap();
        assert_eq!(ledger.extract_view(1), Err(LedgerError::RoundOpen));
        ledger.seal_round(&mut rng);
        let view = ledger.extract_view(2).unwrap();
        assert_eq!(view.events.len(), 1);
        assert_eq!(view.events[0].token, Some(token));
        assert_eq!(view.public_log.len(), 1);
        assert!(ledger.extract_view(1).unwrap().events.is_empty());
    }

    #[test]
    fn tokens_round_trip_as_hex() {
        let token = AddressToken(0xdead_beef);
        let json = serde_json::to_string(&token).unwrap();
        assert_eq!(json, "\"00000000deadbeef\"");
        assert_eq!(serde_json::from_str::<AddressToken>(&json).unwrap(), token);
    }
}
