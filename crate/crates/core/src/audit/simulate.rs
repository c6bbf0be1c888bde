//! Semi-honest simulators.
//!
//! Each simulator knows only one participant's inputs `(n, B, p_i)`. It
//! plays everybody else against that participant's real step functions on
//! a real [`LedgerState`] and returns the participant's [`View`]. The other
//! participants exist on the simulated ledger as phantoms whose balances
//! mean nothing.
//!
//! Amounts are in cents with a unit of one cent.

use rand::Rng;

use crate::ledger::{LedgerState, RoundTag, View};
use crate::protocol::{
    credit_withdrawals, deposit, draw_t1_fast, draw_t1_slow, fast_relay_amount, fast_residue,
    slow_relay_amount, withdraw, Variant, MIN_PARTICIPANTS,
};
use crate::Cents;

use super::AuditError;

/// What a single participant knows before the protocol starts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimInputs {
    pub n: usize,
    pub bound: Cents,
    pub balance: Cents,
}

impl SimInputs {
    /// Checks the inputs against the variant's preconditions: `p_i <= B`
    /// (slow) or `p_i < B` (fast), and a credit no larger than the other
    /// `n - 1` participants can owe.
    pub fn validate(&self, variant: Variant, participant: usize) -> Result<(), AuditError> {
        let SimInputs { n, bound, balance } = *self;
        let ok = n >= MIN_PARTICIPANTS
            && participant < n
            && bound > 0
            && balance >= -(n as Cents - 1) * bound
            && (balance < bound || (balance == bound && !variant.is_fast()));
        if ok {
            Ok(())
        } else {
            Err(AuditError::BadInputs {
                inputs: *self,
                participant,
            })
        }
    }
}

fn ledger_for(inputs: &SimInputs, participant: usize) -> LedgerState {
    let mut balances = vec![0; inputs.n];
    balances[participant] = inputs.balance;
    LedgerState::new(balances)
}

/// The participant's own withdrawals, then the simulator's `n - w` on
/// behalf of the rest, attributed to the next participant.
fn recover<R: Rng + ?Sized>(
    ledger: &mut LedgerState,
    participant: usize,
    n: usize,
    bound: Cents,
    rng: &mut R,
) -> Result<(), AuditError> {
    let own = credit_withdrawals(ledger.balance(participant), bound)?;
    let others = n.checked_sub(own).ok_or_else(|| {
        AuditError::Simulation(format!(
            "participant {participant} wants {own} of {n} withdrawals"
        ))
    })?;
    withdraw(ledger, participant, bound, own, rng)?;
    withdraw(ledger, (participant + 1) % n, bound, others, rng)?;
    ledger.seal_round(rng);
    Ok(())
}

/// Slow-protocol simulator for participant `i` (0-based).
pub fn simulate_view_slow<R: Rng + ?Sized>(
    i: usize,
    inputs: SimInputs,
    rng: &mut R,
) -> Result<View, AuditError> {
    inputs.validate(Variant::Slow, i)?;
    let draw = if i == 0 {
        None
    } else {
        Some(draw_t1_slow(rng, inputs.bound))
    };
    simulate_slow_with(i, inputs, draw, rng)
}

/// `incoming` is the simulated `t_{i-1}` for `i > 0`; the first
/// participant draws its own `t_1` from `rng` (or takes `incoming` when
/// enumerating).
pub(crate) fn simulate_slow_with<R: Rng + ?Sized>(
    i: usize,
    inputs: SimInputs,
    incoming: Option<Cents>,
    rng: &mut R,
) -> Result<View, AuditError> {
    let SimInputs {
        n,
        bound: b,
        balance,
    } = inputs;
    let mut ledger = ledger_for(&inputs, i);
    let next = (i + 1) % n;
    if i == 0 {
        let t1 = incoming.unwrap_or_else(|| draw_t1_slow(rng, b));
        ledger.private_transfer(0, 1, t1, RoundTag::Round1)?;
        // the unique reply in [1, B] leaving a multiple of B
        let reply = slow_relay_amount(t1 - balance, b);
        ledger.private_transfer(n - 1, 0, reply, RoundTag::Round1)?;
    } else {
        let prev = incoming.expect("simulated t_{i-1} is required for i > 0");
        ledger.private_transfer(i - 1, i, prev, RoundTag::Round1)?;
        let t = slow_relay_amount(ledger.balance(i), b);
        ledger.private_transfer(i, next, t, RoundTag::Round1)?;
    }
    for j in 0..n {
        deposit(&mut ledger, j, b, rng)?;
    }
    ledger.seal_round(rng);
    recover(&mut ledger, i, n, b, rng)?;
    Ok(ledger.extract_view(i)?)
}

/// Fast-protocol simulator for participant `i` (0-based).
pub fn simulate_view_fast<R: Rng + ?Sized>(
    i: usize,
    inputs: SimInputs,
    rng: &mut R,
) -> Result<View, AuditError> {
    inputs.validate(Variant::Fast, i)?;
    let draw = if i == 0 {
        None
    } else {
        Some(draw_t1_fast(rng, inputs.bound))
    };
    simulate_fast_with(i, inputs, draw, rng)
}

pub(crate) fn simulate_fast_with<R: Rng + ?Sized>(
    i: usize,
    inputs: SimInputs,
    incoming: Option<Cents>,
    rng: &mut R,
) -> Result<View, AuditError> {
    let SimInputs {
        n,
        bound: b,
        balance,
    } = inputs;
    let mut ledger = ledger_for(&inputs, i);
    let next = (i + 1) % n;
    let pot = n as Cents * b;
    if i == 0 {
        let t1 = incoming.unwrap_or_else(|| draw_t1_fast(rng, b));
        ledger.private_transfer(0, 1, fast_relay_amount(t1, 0, b), RoundTag::Merged)?;
        // the unique reply in [(n-1)B + 1, nB] leaving a multiple of B
        let reply = (n as Cents - 1) * b + slow_relay_amount(1 + t1 - balance, b);
        ledger.private_transfer(n - 1, 0, reply, RoundTag::Merged)?;
    } else {
        let prev = incoming.expect("simulated t_{i-1} is required for i > 0");
        ledger.private_transfer(
            i - 1,
            i,
            fast_relay_amount(prev, i - 1, b),
            RoundTag::Merged,
        )?;
        let residue = fast_residue(ledger.balance(i), b);
        ledger.private_transfer(i, next, fast_relay_amount(residue, i, b), RoundTag::Merged)?;
    }
    deposit(&mut ledger, 0, pot, rng)?;
    ledger.seal_round(rng);
    recover(&mut ledger, i, n, b, rng)?;
    Ok(ledger.extract_view(i)?)
}
