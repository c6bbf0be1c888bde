//! Integer money scalars.
//!
//! Settlement math is exact: every amount is an integer number of the
//! smallest currency unit (cents). The algorithms in [`crate::sep`] are
//! written against [`Amount`] so they run unchanged on `i32`, `i64` or
//! `i128`; the protocol layer fixes the scalar to [`crate::Cents`].

use std::fmt::{Debug, Display};
use std::hash::Hash;
use std::iter::Sum;

use num_traits::{NumAssign, PrimInt, Signed};

/// A signed machine integer usable as a money amount.
pub trait Amount:
    PrimInt + Signed + NumAssign + Sum + Hash + Debug + Display + Send + Sync + 'static
{
}

impl<T> Amount for T where
    T: PrimInt + Signed + NumAssign + Sum + Hash + Debug + Display + Send + Sync + 'static
{
}
