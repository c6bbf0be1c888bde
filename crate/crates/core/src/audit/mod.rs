//! Privacy audit.
//!
//! Both protocols claim perfect semi-honest security: for every
//! participant there is a simulator that, from that participant's inputs
//! alone, produces views with exactly the distribution of real views. This
//! module implements those simulators ([`simulate`]) and checks the claim
//! empirically by comparing view histograms under total variation
//! distance.
//!
//! Views are canonicalized before counting. Tokens are fresh random
//! values, so raw views would never repeat; the canonical form keeps only
//! whether each public event belongs to the view's owner, and sorts the
//! public log, whose order is already randomized by the ledger.

pub mod simulate;
mod stats;

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{ChannelKind, Direction, LedgerError, PiggyDirection, RoundTag, View};
use crate::protocol::{run_balances, ProtocolError, RunOptions, Variant};
use crate::rng::{derive_seed, run_rng};
use crate::{BalanceVector, Cents};

pub use simulate::{simulate_view_fast, simulate_view_slow, SimInputs};
pub use stats::{chi_square_uniform, uniform_noise_floor, ChiSquare};

/// TV threshold for 100 000 trials over supports of at most ten views.
pub const DEFAULT_THRESHOLD: f64 = 0.02;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AuditError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("simulated ledger rejected a transaction: {0}")]
    Ledger(#[from] LedgerError),
    #[error(
        "inputs {inputs:?} are outside the protocol preconditions for participant {participant}"
    )]
    BadInputs {
        inputs: SimInputs,
        participant: usize,
    },
    #[error("the {0:?} variant has no statistical audit; its room trace is balance-independent by construction")]
    UnsupportedVariant(Variant),
    #[error("participant {participant} is out of range for {n} participants")]
    UnknownParticipant { participant: usize, n: usize },
    #[error("at least one trial is required")]
    NoTrials,
    #[error("cannot compare an empty distribution")]
    EmptyDistribution,
    #[error("simulation failed: {0}")]
    Simulation(String),
}

impl AuditError {
    pub fn is_internal(&self) -> bool {
        match self {
            Self::Protocol(e) => e.is_internal(),
            Self::Ledger(_) | Self::Simulation(_) => true,
            _ => false,
        }
    }
}

/// A view with token identities erased.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CanonicalView {
    pub owner: usize,
    /// The owner's private transfers in the order they happened.
    pub private: Vec<(Direction, RoundTag, Cents)>,
    /// The public log as `(round, direction, amount, owned by the owner)`,
    /// sorted.
    pub public: Vec<(RoundTag, PiggyDirection, Cents, bool)>,
}

impl CanonicalView {
    pub fn new(view: &View) -> Self {
        let own: HashSet<_> = view.events.iter().filter_map(|e| e.token).collect();
        let private = view
            .events
            .iter()
            .filter(|e| e.kind == ChannelKind::Private)
            .map(|e| (e.direction, e.round, e.amount))
            .collect();
        let mut public: Vec<_> = view
            .public_log
            .iter()
            .map(|e| (e.round, e.direction, e.amount, own.contains(&e.token)))
            .collect();
        public.sort_unstable();
        Self {
            owner: view.owner,
            private,
            public,
        }
    }
}

/// Empirical distribution of canonical views.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ViewDistribution {
    pub histogram: BTreeMap<CanonicalView, u64>,
    pub trials: u64,
}

impl ViewDistribution {
    pub fn record(&mut self, view: CanonicalView) {
        *self.histogram.entry(view).or_insert(0) += 1;
        self.trials += 1;
    }

    pub fn merge(&mut self, other: ViewDistribution) {
        for (view, count) in other.histogram {
            *self.histogram.entry(view).or_insert(0) += count;
        }
        self.trials += other.trials;
    }

    pub fn support(&self) -> BTreeSet<CanonicalView> {
        self.histogram.keys().cloned().collect()
    }

    fn frequency(&self, view: &CanonicalView) -> f64 {
        self.histogram
            .get(view)
            .map_or(0.0, |&c| c as f64 / self.trials as f64)
    }
}

/// Half the L1 distance between the two empirical laws.
pub fn tv_distance(a: &ViewDistribution, b: &ViewDistribution) -> Result<f64, AuditError> {
    if a.trials == 0 || b.trials == 0 {
        return Err(AuditError::EmptyDistribution);
    }
    let keys: BTreeSet<&CanonicalView> = a.histogram.keys().chain(b.histogram.keys()).collect();
    let l1: f64 = keys
        .into_iter()
        .map(|v| (a.frequency(v) - b.frequency(v)).abs())
        .sum();
    Ok((l1 / 2.0).min(1.0))
}

fn check_audited(variant: Variant) -> Result<(), AuditError> {
    if variant.is_physical() {
        Err(AuditError::UnsupportedVariant(variant))
    } else {
        Ok(())
    }
}

/// Runs `trials` independent trials, each producing one view per tracked
/// participant, and histograms them. Trial `k` depends only on
/// `derive_seed(master_seed, k)`.
fn collect<F>(
    trials: u64,
    tracked: usize,
    master_seed: u64,
    trial: F,
) -> Result<Vec<ViewDistribution>, AuditError>
where
    F: Fn(u64) -> Result<Vec<CanonicalView>, AuditError> + Sync,
{
    if trials == 0 {
        return Err(AuditError::NoTrials);
    }
    let empty = || vec![ViewDistribution::default(); tracked];
    (0..trials)
        .into_par_iter()
        .try_fold(empty, |mut acc, k| {
            for (dist, view) in acc.iter_mut().zip(trial(derive_seed(master_seed, k))?) {
                dist.record(view);
            }
            Ok(acc)
        })
        .try_reduce(empty, |mut a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                x.merge(y);
            }
            Ok(a)
        })
}

/// Real views of every participant from the same `trials` runs.
pub fn real_view_distributions(
    balances: &BalanceVector,
    bound: Cents,
    variant: Variant,
    trials: u64,
    master_seed: u64,
) -> Result<Vec<ViewDistribution>, AuditError> {
    check_audited(variant)?;
    let n = balances.len();
    let options = RunOptions::default();
    // fail on bad inputs before fanning out
    run_balances(balances, bound, variant, master_seed, &options)?;
    collect(trials, n, master_seed, |seed| {
        let run = run_balances(balances, bound, variant, seed, &options)?;
        (0..n)
            .map(|i| Ok(CanonicalView::new(&run.ledger().extract_view(i)?)))
            .collect()
    })
}

pub fn real_view_distribution(
    balances: &BalanceVector,
    bound: Cents,
    variant: Variant,
    participant: usize,
    trials: u64,
    master_seed: u64,
) -> Result<ViewDistribution, AuditError> {
    check_audited(variant)?;
    let n = balances.len();
    if participant >= n {
        return Err(AuditError::UnknownParticipant { participant, n });
    }
    let options = RunOptions::default();
    run_balances(balances, bound, variant, master_seed, &options)?;
    let mut dists = collect(trials, 1, master_seed, |seed| {
        let run = run_balances(balances, bound, variant, seed, &options)?;
        Ok(vec![CanonicalView::new(
            &run.ledger().extract_view(participant)?,
        )])
    })?;
    Ok(dists.remove(0))
}

pub fn sim_view_distribution(
    inputs: SimInputs,
    variant: Variant,
    participant: usize,
    trials: u64,
    master_seed: u64,
) -> Result<ViewDistribution, AuditError> {
    check_audited(variant)?;
    inputs.validate(variant, participant)?;
    let mut dists = collect(trials, 1, master_seed, |seed| {
        let mut rng = run_rng(seed);
        let view = if variant.is_fast() {
            simulate_view_fast(participant, inputs, &mut rng)?
        } else {
            simulate_view_slow(participant, inputs, &mut rng)?
        };
        Ok(vec![CanonicalView::new(&view)])
    })?;
    Ok(dists.remove(0))
}

fn draw_range(variant: Variant, bound: Cents) -> std::ops::RangeInclusive<Cents> {
    if variant.is_fast() {
        0..=bound - 1
    } else {
        1..=bound
    }
}

/// Every canonical view participant `participant` can see in a real run,
/// found by forcing each possible `t_1`. Everything else a run randomizes
/// is erased by canonicalization.
pub fn real_view_support(
    balances: &BalanceVector,
    bound: Cents,
    variant: Variant,
    participant: usize,
) -> Result<BTreeSet<CanonicalView>, AuditError> {
    check_audited(variant)?;
    draw_range(variant, bound)
        .map(|t1| {
            let options = RunOptions {
                forced_t1: Some(t1),
                ..RunOptions::default()
            };
            let run = run_balances(balances, bound, variant, t1 as u64, &options)?;
            Ok(CanonicalView::new(&run.ledger().extract_view(participant)?))
        })
        .collect()
}

/// Every canonical view the simulator can produce, over all its draws.
pub fn sim_view_support(
    inputs: SimInputs,
    variant: Variant,
    participant: usize,
) -> Result<BTreeSet<CanonicalView>, AuditError> {
    check_audited(variant)?;
    inputs.validate(variant, participant)?;
    draw_range(variant, inputs.bound)
        .map(|draw| {
            let mut rng = run_rng(draw as u64);
            let view = if variant.is_fast() {
                simulate::simulate_fast_with(participant, inputs, Some(draw), &mut rng)?
            } else {
                simulate::simulate_slow_with(participant, inputs, Some(draw), &mut rng)?
            };
            Ok(CanonicalView::new(&view))
        })
        .collect()
}

/// Counts of the amount participant `participant` (>= 1) receives in the
/// slow relay, indexed by `amount - 1`.
pub fn relay_counts(
    balances: &BalanceVector,
    bound: Cents,
    participant: usize,
    trials: u64,
    master_seed: u64,
) -> Result<Vec<u64>, AuditError> {
    let n = balances.len();
    if participant == 0 || participant >= n {
        return Err(AuditError::UnknownParticipant { participant, n });
    }
    if trials == 0 {
        return Err(AuditError::NoTrials);
    }
    let options = RunOptions::default();
    run_balances(balances, bound, Variant::Slow, master_seed, &options)?;
    let slots = bound as usize;
    (0..trials)
        .into_par_iter()
        .try_fold(
            || vec![0u64; slots],
            |mut counts, k| {
                let mut run = crate::protocol::ProtocolRun::from_balances(
                    balances,
                    bound,
                    Variant::Slow,
                    derive_seed(master_seed, k),
                    &options,
                )?;
                run.run_round1_slow()?;
                let received = run.trace()[participant - 1].amount;
                counts[(received - 1) as usize] += 1;
                Ok::<_, AuditError>(counts)
            },
        )
        .try_reduce(
            || vec![0u64; slots],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub variant: Variant,
    pub participant: usize,
    pub trials: u64,
    #[serde(rename = "B")]
    pub bound_b: Cents,
    pub n: usize,
    pub tv_distance: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Compares real and simulated views of one participant.
///
/// Real runs use `master_seed`; the simulator uses an independent stream
/// derived from it, so the two samples share no randomness.
pub fn audit(
    balances: &BalanceVector,
    bound: Cents,
    variant: Variant,
    participant: usize,
    trials: u64,
    master_seed: u64,
    threshold: f64,
) -> Result<AuditReport, AuditError> {
    let real = real_view_distribution(balances, bound, variant, participant, trials, master_seed)?;
    let inputs = SimInputs {
        n: balances.len(),
        bound,
        balance: balances.as_slice()[participant],
    };
    let sim = sim_view_distribution(inputs, variant, participant, trials, sim_seed(master_seed))?;
    let tv = tv_distance(&real, &sim)?;
    Ok(AuditReport {
        variant,
        participant,
        trials,
        bound_b: bound,
        n: balances.len(),
        tv_distance: tv,
        threshold,
        pass: tv < threshold,
    })
}

/// Master seed of the simulator sample paired with real runs from `master`.
pub fn sim_seed(master: u64) -> u64 {
    derive_seed(master, u64::MAX)
}
