//! Settling shared expenses, in the open and in private.
//!
//! * [`sep`] solves the plain shared-expense problem: aggregate balances,
//!   settle them greedily or with the fewest transfers, and decide the
//!   NP-complete "fewer than n - 1 transfers" question.
//! * [`ledger`] simulates the payment fabric: private pairwise channels and
//!   a public anonymous ledger with a shared piggy-bank address.
//! * [`protocol`] runs the two private Conspiracy Santa settlement
//!   protocols (3n and 2n + 1 transactions) on that ledger.
//! * [`physical`] runs the envelope-and-secure-room variants.
//! * [`audit`] holds the semi-honest simulators and the empirical
//!   indistinguishability tests that compare real and simulated views.
//!
//! The settlement algorithms are generic over any signed integer
//! [`Amount`]; the aliases below fix it to `i64` cents.

pub mod amount;
pub mod audit;
pub mod ledger;
pub mod physical;
pub mod protocol;
pub mod rng;
pub mod sep;
pub mod trace;

pub use amount::Amount;

/// Money in integer cents.
pub type Cents = i64;
pub type BalanceVector = sep::BalanceVector<Cents>;
pub type ExpenseScenario = sep::ExpenseScenario<Cents>;
pub type ExpenseGroup = sep::ExpenseGroup<Cents>;
pub type Payment = sep::Payment<Cents>;
pub type SettlementPlan = sep::SettlementPlan<Cents>;
pub type Transfer = sep::Transfer<Cents>;
