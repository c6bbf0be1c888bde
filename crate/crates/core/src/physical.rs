//! Envelope-and-secure-room settlement.
//!
//! A stack of opaque envelopes sits in a room that one participant at a
//! time may enter. Money envelopes go on top; dummy envelopes, same shape
//! and weight, only ever go underneath. An outside observer sees who
//! enters and in which phase, nothing else, so the [`RoomTrace`] of a run
//! depends only on `n` and the variant.
//!
//! Visits happen in index order in every phase.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Cents;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PhysicalError {
    #[error("bound B must be positive (got {0})")]
    NonPositiveBound(Cents),
    #[error(
        "participant {participant}: balance {balance} is not allowed before the envelope round"
    )]
    BadBalance { participant: usize, balance: Cents },
    #[error("balances sum to {found}, expected {expected}")]
    BadTotal { found: Cents, expected: Cents },
    #[error("participant {participant} needs {wanted} envelopes but only {height} remain")]
    StackExhausted {
        participant: usize,
        wanted: usize,
        height: usize,
    },
    #[error("participant {participant} drew a dummy envelope")]
    DummyTaken { participant: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Envelope {
    Money(Cents),
    Dummy,
}

/// Top of the stack is the front.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EnvelopeStack {
    envelopes: VecDeque<Envelope>,
}

impl EnvelopeStack {
    /// All an outsider can learn about the stack.
    pub fn height(&self) -> usize {
        self.envelopes.len()
    }

    /// Audit-only: the stack from top to bottom.
    pub fn audit_contents(&self) -> impl Iterator<Item = &Envelope> {
        self.envelopes.iter()
    }

    fn put_money_on_top(&mut self, amount: Cents) {
        self.envelopes.push_front(Envelope::Money(amount));
    }

    fn slide_dummy_under(&mut self) {
        self.envelopes.push_back(Envelope::Dummy);
    }

    /// Opens `count` envelopes from the top and returns the money inside.
    fn take_from_top(&mut self, participant: usize, count: usize) -> Result<Cents, PhysicalError> {
        if count > self.envelopes.len() {
            return Err(PhysicalError::StackExhausted {
                participant,
                wanted: count,
                height: self.envelopes.len(),
            });
        }
        let mut collected = 0;
        for envelope in self.envelopes.drain(..count) {
            match envelope {
                Envelope::Money(amount) => collected += amount,
                Envelope::Dummy => return Err(PhysicalError::DummyTaken { participant }),
            }
        }
        Ok(collected)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisitPhase {
    Deposit,
    Collect,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RoomVisit {
    pub visitor: usize,
    pub phase: VisitPhase,
}

/// What the outside observer records.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RoomTrace(pub Vec<RoomVisit>);

impl RoomTrace {
    fn visit(&mut self, visitor: usize, phase: VisitPhase) {
        self.0.push(RoomVisit { visitor, phase });
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Result of one envelope round. Counters are for auditing conservation;
/// they are not observable by participants.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnvelopeRound {
    pub stack: EnvelopeStack,
    pub trace: RoomTrace,
    pub money_deposited: usize,
    pub money_taken: usize,
    /// Largest amount moved in a single visit.
    pub largest_visit: Cents,
}

impl EnvelopeRound {
    fn new() -> Self {
        Self {
            stack: EnvelopeStack::default(),
            trace: RoomTrace::default(),
            money_deposited: 0,
            money_taken: 0,
            largest_visit: 0,
        }
    }

    fn collect(
        &mut self,
        balances: &mut [Cents],
        i: usize,
        bound: Cents,
    ) -> Result<(), PhysicalError> {
        self.trace.visit(i, VisitPhase::Collect);
        if balances[i] >= 0 {
            return Ok(());
        }
        let count = (-balances[i] / bound) as usize;
        let collected = self.stack.take_from_top(i, count)?;
        for _ in 0..count {
            self.stack.slide_dummy_under();
        }
        balances[i] += collected;
        self.money_taken += count;
        self.largest_visit = self.largest_visit.max(collected);
        Ok(())
    }
}

fn check_bound(bound: Cents) -> Result<(), PhysicalError> {
    if bound > 0 {
        Ok(())
    } else {
        Err(PhysicalError::NonPositiveBound(bound))
    }
}

fn check_total(balances: &[Cents], expected: Cents) -> Result<(), PhysicalError> {
    let found: Cents = balances.iter().sum();
    if found == expected {
        Ok(())
    } else {
        Err(PhysicalError::BadTotal { found, expected })
    }
}

/// Balances must be `B`, `0` or a negative multiple of `B`, summing to 0.
fn check_rounded(balances: &[Cents], bound: Cents) -> Result<(), PhysicalError> {
    check_bound(bound)?;
    for (participant, &balance) in balances.iter().enumerate() {
        if balance % bound != 0 || balance > bound {
            return Err(PhysicalError::BadBalance {
                participant,
                balance,
            });
        }
    }
    check_total(balances, 0)
}

/// Everyone deposits one `B` envelope, then everyone collects their credit.
pub fn run_physical_round2(
    balances: &mut [Cents],
    bound: Cents,
) -> Result<EnvelopeRound, PhysicalError> {
    check_rounded(balances, bound)?;
    let mut round = EnvelopeRound::new();
    for (i, balance) in balances.iter_mut().enumerate() {
        round.trace.visit(i, VisitPhase::Deposit);
        round.stack.put_money_on_top(bound);
        *balance -= bound;
        round.money_deposited += 1;
        round.largest_visit = round.largest_visit.max(bound);
    }
    for i in 0..balances.len() {
        round.collect(balances, i, bound)?;
    }
    Ok(round)
}

/// Only debtors deposit money; everyone else slides a dummy under the
/// stack, which costs nothing in the physical world.
pub fn run_physical_round2_simplified(
    balances: &mut [Cents],
    bound: Cents,
) -> Result<EnvelopeRound, PhysicalError> {
    check_rounded(balances, bound)?;
    let mut round = EnvelopeRound::new();
    for (i, balance) in balances.iter_mut().enumerate() {
        round.trace.visit(i, VisitPhase::Deposit);
        if *balance == bound {
            round.stack.put_money_on_top(bound);
            *balance -= bound;
            round.money_deposited += 1;
            round.largest_visit = round.largest_visit.max(bound);
        } else {
            round.stack.slide_dummy_under();
        }
    }
    for i in 0..balances.len() {
        round.collect(balances, i, bound)?;
    }
    Ok(round)
}

/// Recovery after the merged round. `balances` already include the first
/// participant's `n * B` payment, which it now places on the stack as `n`
/// money envelopes; everyone then collects.
pub fn run_physical_fast(
    balances: &mut [Cents],
    bound: Cents,
) -> Result<EnvelopeRound, PhysicalError> {
    check_bound(bound)?;
    let n = balances.len();
    for (participant, &balance) in balances.iter().enumerate() {
        if balance % bound != 0 || balance > 0 {
            return Err(PhysicalError::BadBalance {
                participant,
                balance,
            });
        }
    }
    check_total(balances, -(n as Cents) * bound)?;
    let mut round = EnvelopeRound::new();
    if n > 0 {
        round.trace.visit(0, VisitPhase::Deposit);
        for _ in 0..n {
            round.stack.put_money_on_top(bound);
        }
        round.money_deposited = n;
        round.largest_visit = n as Cents * bound;
    }
    for i in 0..n {
        round.collect(balances, i, bound)?;
    }
    Ok(round)
}
