//! Private Conspiracy Santa settlement.
//!
//! Two protocols settle a zero-sum balance vector without revealing any
//! individual balance, given a public bound `B` on every debt:
//!
//! * **slow** (3n transactions, every amount at most `B`): a private ring
//!   relay rounds each balance to `B`, `0` or a negative multiple of `B`;
//!   everyone then pays `B` into the piggy bank and creditors withdraw `B`
//!   at a time to fresh anonymous addresses.
//! * **fast** (2n + 1 transactions, amounts up to `n * B`): the relay also
//!   forwards one extra `B` per hop, so only the first participant pays the
//!   piggy bank, `n * B` in one go, before the same withdrawals.
//!
//! The physical variants replace the piggy bank with an envelope stack in
//! a secure room; see [`crate::physical`].
//!
//! Internally the relay arithmetic runs in whole `unit`s (1 cent by
//! default). With a unit of 100 the protocols behave exactly as if the
//! balances were whole euros.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{AddressToken, LedgerError, LedgerState, RoundTag, Transaction};
use crate::physical::{self, EnvelopeRound, PhysicalError};
use crate::rng::{run_rng, RunRng};
use crate::sep::{aggregate_balances, SepError};
use crate::trace::TraceLine;
use crate::{BalanceVector, Cents, ExpenseScenario};

/// Smallest group a conspiracy can have without trivially leaking prices.
pub const MIN_PARTICIPANTS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Slow,
    Fast,
    PhysicalSlow,
    PhysicalFast,
}

impl Variant {
    pub fn is_fast(self) -> bool {
        matches!(self, Self::Fast | Self::PhysicalFast)
    }

    pub fn is_physical(self) -> bool {
        matches!(self, Self::PhysicalSlow | Self::PhysicalFast)
    }

    /// Transactions after setup. For the physical variants each room visit
    /// counts as one transaction.
    pub fn transaction_count(self, n: usize) -> usize {
        if self.is_fast() {
            2 * n + 1
        } else {
            3 * n
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error(transparent)]
    Scenario(#[from] SepError),
    #[error("a conspiracy needs at least {MIN_PARTICIPANTS} participants (got {0})")]
    TooFewParticipants(usize),
    #[error("bound B too small: participant {participant} owes {balance} but the {variant:?} variant needs {}", if *strict { "balance < B" } else { "balance <= B" })]
    BoundTooSmall {
        participant: usize,
        balance: Cents,
        variant: Variant,
        strict: bool,
    },
    #[error("unit {unit} must be positive and divide B and every balance")]
    BadUnit { unit: Cents },
    #[error("forced t1 = {value} is outside [{min}, {max}] or not a multiple of the unit")]
    ForcedT1OutOfRange {
        value: Cents,
        min: Cents,
        max: Cents,
    },
    #[error("{stage} is not valid for a {variant:?} run at this point")]
    OutOfOrder {
        stage: &'static str,
        variant: Variant,
    },
    #[error("ledger rejected a protocol transaction: {0}")]
    Ledger(#[from] LedgerError),
    #[error("envelope round failed: {0}")]
    Physical(#[from] PhysicalError),
    #[error("protocol invariant violated: {0}")]
    Invariant(String),
}

impl ProtocolError {
    /// Errors that can only come from a bug, never from bad input.
    pub fn is_internal(&self) -> bool {
        matches!(
            self,
            Self::OutOfOrder { .. } | Self::Ledger(_) | Self::Physical(_) | Self::Invariant(_)
        )
    }
}

fn invariant(ok: bool, message: impl FnOnce() -> String) -> Result<(), ProtocolError> {
    if ok {
        Ok(())
    } else {
        Err(ProtocolError::Invariant(message()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunOptions {
    /// Granularity of the relay arithmetic, in cents.
    pub unit: Cents,
    /// Fixes the first participant's random draw, in cents. Test-only:
    /// a known `t_1` unmasks every relayed amount.
    pub forced_t1: Option<Cents>,
    /// Use the dummy-envelope shortcut in the physical slow variant.
    pub simplified_envelopes: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            unit: 1,
            forced_t1: None,
            simplified_envelopes: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParticipantState {
    pub index: usize,
    pub balance: Cents,
    pub role_addresses: Vec<AddressToken>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Stage {
    Setup,
    Rounded,
    Settled,
}

// Participant-side rules, in units. The simulators in `audit` call these
// too, so a simulated participant runs exactly the real participant code.

/// First participant's draw in the slow protocol: uniform on `[1, b]`.
pub fn draw_t1_slow<R: Rng + ?Sized>(rng: &mut R, b: Cents) -> Cents {
    rng.random_range(1..=b)
}

/// First participant's draw in the fast protocol: uniform on `[0, b - 1]`.
pub fn draw_t1_fast<R: Rng + ?Sized>(rng: &mut R, b: Cents) -> Cents {
    rng.random_range(0..b)
}

/// Slow relay amount: the running balance mod `b`, with 0 mapped to `b`.
pub fn slow_relay_amount(balance: Cents, b: Cents) -> Cents {
    match balance.rem_euclid(b) {
        0 => b,
        r => r,
    }
}

/// Fast relay residue `t_i = (balance - 1) mod b`.
pub fn fast_residue(balance: Cents, b: Cents) -> Cents {
    (balance - 1).rem_euclid(b)
}

/// Amount hop `hop` (0-based) forwards in the fast relay: `1 + t + hop*b`.
pub fn fast_relay_amount(residue: Cents, hop: usize, b: Cents) -> Cents {
    1 + residue + hop as Cents * b
}

/// Pays `amount` into the piggy bank from a fresh address of `who`.
pub(crate) fn deposit<R: Rng + ?Sized>(
    ledger: &mut LedgerState,
    who: usize,
    amount: Cents,
    rng: &mut R,
) -> Result<AddressToken, LedgerError> {
    let token = ledger.mint_token(rng);
    ledger.public_deposit(who, amount, token)?;
    Ok(token)
}

/// Withdraws `bound` to a fresh address of `who`, `count` times.
pub(crate) fn withdraw<R: Rng + ?Sized>(
    ledger: &mut LedgerState,
    who: usize,
    bound: Cents,
    count: usize,
    rng: &mut R,
) -> Result<Vec<AddressToken>, LedgerError> {
    (0..count)
        .map(|_| {
            let token = ledger.mint_token(rng);
            ledger.public_withdraw(who, bound, token).map(|()| token)
        })
        .collect()
}

/// Number of `bound` withdrawals that zero `who`'s credit.
pub(crate) fn credit_withdrawals(balance: Cents, bound: Cents) -> Result<usize, ProtocolError> {
    invariant(balance <= 0 && balance % bound == 0, || {
        format!("balance {balance} is not a non-positive multiple of {bound} before recovery")
    })?;
    Ok((-balance / bound) as usize)
}

/// One execution of a settlement protocol.
#[derive(Clone, Debug)]
pub struct ProtocolRun {
    variant: Variant,
    bound: Cents,
    unit: Cents,
    seed: u64,
    initial: Vec<Cents>,
    ledger: LedgerState,
    rng: RunRng,
    stage: Stage,
    forced_t1: Option<Cents>,
    simplified_envelopes: bool,
    addresses: Vec<Vec<AddressToken>>,
    envelopes: Option<(EnvelopeRound, Vec<Cents>)>,
}

impl ProtocolRun {
    /// Aggregates the scenario's balances and validates them for `variant`.
    pub fn setup(
        scenario: &ExpenseScenario,
        variant: Variant,
        options: &RunOptions,
    ) -> Result<Self, ProtocolError> {
        let balances = aggregate_balances(scenario)?;
        Self::from_balances(&balances, scenario.bound_b, variant, scenario.seed, options)
    }

    pub fn from_balances(
        balances: &BalanceVector,
        bound: Cents,
        variant: Variant,
        seed: u64,
        options: &RunOptions,
    ) -> Result<Self, ProtocolError> {
        let n = balances.len();
        if n < MIN_PARTICIPANTS {
            return Err(ProtocolError::TooFewParticipants(n));
        }
        if bound <= 0 {
            return Err(SepError::NonPositiveBound(bound.to_string()).into());
        }
        let unit = options.unit;
        if unit <= 0 || bound % unit != 0 || balances.as_slice().iter().any(|b| b % unit != 0) {
            return Err(ProtocolError::BadUnit { unit });
        }
        let strict = variant.is_fast();
        for (participant, &balance) in balances.as_slice().iter().enumerate() {
            if balance > bound || (strict && balance == bound) {
                return Err(ProtocolError::BoundTooSmall {
                    participant,
                    balance,
                    variant,
                    strict,
                });
            }
        }
        if let Some(value) = options.forced_t1 {
            let (min, max) = if strict {
                (0, bound - unit)
            } else {
                (unit, bound)
            };
            if value < min || value > max || value % unit != 0 {
                return Err(ProtocolError::ForcedT1OutOfRange { value, min, max });
            }
        }
        Ok(Self {
            variant,
            bound,
            unit,
            seed,
            initial: balances.as_slice().to_vec(),
            ledger: LedgerState::new(balances.as_slice().to_vec()),
            rng: run_rng(seed),
            stage: Stage::Setup,
            forced_t1: options.forced_t1,
            simplified_envelopes: options.simplified_envelopes,
            addresses: vec![Vec::new(); n],
            envelopes: None,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn bound(&self) -> Cents {
        self.bound
    }

    pub fn unit(&self) -> Cents {
        self.unit
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn participants(&self) -> usize {
        self.initial.len()
    }

    pub fn initial_balances(&self) -> &[Cents] {
        &self.initial
    }

    pub fn ledger(&self) -> &LedgerState {
        &self.ledger
    }

    /// Current balances, including any envelope round already played.
    pub fn balances(&self) -> &[Cents] {
        match &self.envelopes {
            Some((_, balances)) => balances,
            None => self.ledger.balances(),
        }
    }

    pub fn states(&self) -> Vec<ParticipantState> {
        self.balances()
            .iter()
            .zip(&self.addresses)
            .enumerate()
            .map(|(index, (&balance, addresses))| ParticipantState {
                index,
                balance,
                role_addresses: addresses.clone(),
            })
            .collect()
    }

    /// Ledger transactions in trace order.
    pub fn trace(&self) -> &[Transaction] {
        self.ledger.history()
    }

    pub fn envelope_round(&self) -> Option<&EnvelopeRound> {
        self.envelopes.as_ref().map(|(round, _)| round)
    }

    /// Full observable trace: ledger transactions, then room visits.
    pub fn trace_lines(&self) -> Vec<TraceLine> {
        let mut lines: Vec<TraceLine> = self.trace().iter().map(TraceLine::from).collect();
        if let Some(round) = self.envelope_round() {
            lines.extend(round.trace.0.iter().map(TraceLine::from));
        }
        lines
    }

    pub fn transaction_count(&self) -> usize {
        self.trace().len() + self.envelope_round().map_or(0, |r| r.trace.len())
    }

    pub fn max_transaction_amount(&self) -> Cents {
        let ledger_max = self.trace().iter().map(|t| t.amount).max().unwrap_or(0);
        let room_max = self.envelope_round().map_or(0, |r| r.largest_visit);
        ledger_max.max(room_max)
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary {
            variant: self.variant,
            n: self.participants(),
            bound_b_cents: self.bound,
            final_balances: self.balances().to_vec(),
            tx_count: self.transaction_count(),
            max_tx_amount_cents: self.max_transaction_amount(),
        }
    }

    fn expect_stage(
        &self,
        stage: Stage,
        name: &'static str,
        ok: bool,
    ) -> Result<(), ProtocolError> {
        if self.stage == stage && ok {
            Ok(())
        } else {
            Err(ProtocolError::OutOfOrder {
                stage: name,
                variant: self.variant,
            })
        }
    }

    fn units(&self) -> (Cents, usize) {
        (self.bound / self.unit, self.participants())
    }

    fn check_zero_sum(&self, after: &str) -> Result<(), ProtocolError> {
        invariant(self.ledger.is_conserved(), || {
            format!("conservation broken after {after}")
        })
    }

    /// Private ring relay rounding every balance to a multiple of `B`.
    pub fn run_round1_slow(&mut self) -> Result<(), ProtocolError> {
        self.expect_stage(Stage::Setup, "round 1", !self.variant.is_fast())?;
        let (b, n) = self.units();
        let unit = self.unit;
        let t1 = match self.forced_t1 {
            Some(cents) => cents / unit,
            None => draw_t1_slow(&mut self.rng, b),
        };
        self.ledger
            .private_transfer(0, 1, t1 * unit, RoundTag::Round1)?;
        for i in 1..n {
            let t = slow_relay_amount(self.ledger.balance(i) / unit, b);
            self.ledger
                .private_transfer(i, (i + 1) % n, t * unit, RoundTag::Round1)?;
        }
        self.check_zero_sum("round 1")?;
        for (i, &balance) in self.ledger.balances().iter().enumerate() {
            invariant(balance % self.bound == 0 && balance <= self.bound, || {
                format!("participant {i} left round 1 at {balance}")
            })?;
        }
        self.stage = Stage::Rounded;
        Ok(())
    }

    /// Everyone pays `B` into the piggy bank; creditors withdraw theirs.
    pub fn run_round2_and_3_slow(&mut self) -> Result<(), ProtocolError> {
        self.expect_stage(
            Stage::Rounded,
            "rounds 2 and 3",
            self.variant == Variant::Slow,
        )?;
        let n = self.participants();
        for i in 0..n {
            let token = deposit(&mut self.ledger, i, self.bound, &mut self.rng)?;
            self.addresses[i].push(token);
        }
        self.ledger.seal_round(&mut self.rng);
        invariant(
            self.ledger.piggy_balance() == n as Cents * self.bound,
            || "piggy bank did not receive n * B".into(),
        )?;
        self.recover_credits()
    }

    /// Ring relay forwarding one extra `B` per hop, then the first
    /// participant pays `n * B` into the piggy bank (or, physically, onto
    /// the envelope stack).
    pub fn run_merged_fast(&mut self) -> Result<(), ProtocolError> {
        self.expect_stage(Stage::Setup, "merged round", self.variant.is_fast())?;
        let (b, n) = self.units();
        let unit = self.unit;
        let t1 = match self.forced_t1 {
            Some(cents) => cents / unit,
            None => draw_t1_fast(&mut self.rng, b),
        };
        let mut received = fast_relay_amount(t1, 0, b);
        self.ledger
            .private_transfer(0, 1, received * unit, RoundTag::Merged)?;
        for i in 1..n {
            let residue = fast_residue(self.ledger.balance(i) / unit, b);
            let sent = fast_relay_amount(residue, i, b);
            invariant(sent > received, || {
                format!("participant {i} forwarded {sent} after receiving {received}")
            })?;
            self.ledger
                .private_transfer(i, (i + 1) % n, sent * unit, RoundTag::Merged)?;
            received = sent;
        }
        let pot = n as Cents * self.bound;
        if self.variant == Variant::Fast {
            let token = deposit(&mut self.ledger, 0, pot, &mut self.rng)?;
            self.addresses[0].push(token);
            self.ledger.seal_round(&mut self.rng);
            self.check_zero_sum("merged round")?;
            invariant(self.ledger.piggy_balance() == pot, || {
                "piggy bank did not receive n * B".into()
            })?;
        }
        let first_offset = if self.variant == Variant::Fast {
            0
        } else {
            pot
        };
        for (i, &balance) in self.ledger.balances().iter().enumerate() {
            let balance = if i == 0 {
                balance - first_offset
            } else {
                balance
            };
            invariant(balance % self.bound == 0 && balance <= 0, || {
                format!("participant {i} left the merged round at {balance}")
            })?;
        }
        self.stage = Stage::Rounded;
        Ok(())
    }

    /// Creditors withdraw `B` at a time until the piggy bank is empty.
    pub fn run_recovery_fast(&mut self) -> Result<(), ProtocolError> {
        self.expect_stage(Stage::Rounded, "recovery", self.variant == Variant::Fast)?;
        self.recover_credits()
    }

    fn recover_credits(&mut self) -> Result<(), ProtocolError> {
        let n = self.participants();
        let mut total = 0;
        for i in 0..n {
            let count = credit_withdrawals(self.ledger.balance(i), self.bound)?;
            total += count;
            let tokens = withdraw(&mut self.ledger, i, self.bound, count, &mut self.rng)?;
            self.addresses[i].extend(tokens);
        }
        self.ledger.seal_round(&mut self.rng);
        invariant(total == n, || format!("{total} withdrawals instead of {n}"))?;
        invariant(self.ledger.piggy_balance() == 0, || {
            "piggy bank not empty".into()
        })?;
        self.check_zero_sum("recovery")?;
        self.stage = Stage::Settled;
        Ok(())
    }

    /// Secure-room round of a physical variant.
    pub fn run_envelope_round(&mut self) -> Result<(), ProtocolError> {
        self.expect_stage(Stage::Rounded, "envelope round", self.variant.is_physical())?;
        let mut balances = self.ledger.balances().to_vec();
        let round = match self.variant {
            Variant::PhysicalFast => {
                balances[0] -= self.participants() as Cents * self.bound;
                physical::run_physical_fast(&mut balances, self.bound)?
            }
            _ if self.simplified_envelopes => {
                physical::run_physical_round2_simplified(&mut balances, self.bound)?
            }
            _ => physical::run_physical_round2(&mut balances, self.bound)?,
        };
        invariant(round.money_deposited == round.money_taken, || {
            format!(
                "{} money envelopes deposited but {} taken",
                round.money_deposited, round.money_taken
            )
        })?;
        self.envelopes = Some((round, balances));
        self.stage = Stage::Settled;
        Ok(())
    }

    /// Runs every stage of the variant and checks the run's guarantees.
    pub fn execute(&mut self) -> Result<(), ProtocolError> {
        match self.variant {
            Variant::Slow => {
                self.run_round1_slow()?;
                self.run_round2_and_3_slow()?;
            }
            Variant::Fast => {
                self.run_merged_fast()?;
                self.run_recovery_fast()?;
            }
            Variant::PhysicalSlow => {
                self.run_round1_slow()?;
                self.run_envelope_round()?;
            }
            Variant::PhysicalFast => {
                self.run_merged_fast()?;
                self.run_envelope_round()?;
            }
        }
        self.verify()
    }

    /// Final-state checks: everyone at zero, exact transaction count, and
    /// every amount inside its window.
    pub fn verify(&self) -> Result<(), ProtocolError> {
        let n = self.participants();
        invariant(self.stage == Stage::Settled, || {
            "run is not finished".into()
        })?;
        invariant(self.balances().iter().all(|&b| b == 0), || {
            format!("final balances {:?} are not all zero", self.balances())
        })?;
        let expected = self.variant.transaction_count(n);
        invariant(self.transaction_count() == expected, || {
            format!(
                "{} transactions instead of {expected}",
                self.transaction_count()
            )
        })?;
        let bound = self.bound;
        let mut hop = 0;
        for tx in self.trace() {
            let ok = match tx.round {
                RoundTag::Round1 => (1..=bound).contains(&tx.amount),
                RoundTag::Merged => {
                    hop += 1;
                    let hop = hop as Cents;
                    ((hop - 1) * bound + 1..=hop * bound).contains(&tx.amount)
                }
                RoundTag::PiggyDeposit if self.variant.is_fast() => tx.amount == n as Cents * bound,
                RoundTag::PiggyDeposit | RoundTag::PiggyWithdraw => tx.amount == bound,
            };
            invariant(ok, || {
                format!("{:?} amount {} outside its window", tx.round, tx.amount)
            })?;
        }
        Ok(())
    }
}

/// Runs a whole protocol from a scenario.
pub fn run_full(
    scenario: &ExpenseScenario,
    variant: Variant,
    options: &RunOptions,
) -> Result<ProtocolRun, ProtocolError> {
    let mut run = ProtocolRun::setup(scenario, variant, options)?;
    run.execute()?;
    Ok(run)
}

/// Runs a whole protocol from an already aggregated balance vector.
pub fn run_balances(
    balances: &BalanceVector,
    bound: Cents,
    variant: Variant,
    seed: u64,
    options: &RunOptions,
) -> Result<ProtocolRun, ProtocolError> {
    let mut run = ProtocolRun::from_balances(balances, bound, variant, seed, options)?;
    run.execute()?;
    Ok(run)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub variant: Variant,
    pub n: usize,
    pub bound_b_cents: Cents,
    pub final_balances: Vec<Cents>,
    pub tx_count: usize,
    pub max_tx_amount_cents: Cents,
}

/// Scenario file: an expense scenario plus run settings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioDocument {
    #[serde(flatten)]
    pub scenario: ExpenseScenario,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<Variant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit_cents: Option<Cents>,
}

impl ScenarioDocument {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
