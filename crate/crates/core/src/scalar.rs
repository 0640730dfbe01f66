//! Scalar abstraction shared by the numeric parts of the crate.
//!
//! Metrics, rank aggregation and embedding similarity are written against
//! [`Scalar`] so they can run in `f32` or `f64`. The engine itself works in
//! `f64`; see the aliases at the crate root.

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable by metrics and aggregation.
pub trait Scalar: Float + FromPrimitive + ToPrimitive + Debug + Default + Send + Sync + 'static {}

impl<T> Scalar for T where T: Float + FromPrimitive + ToPrimitive + Debug + Default + Send + Sync + 'static {}

/// Lossless for every count this crate produces (token and candidate counts).
#[inline]
pub(crate) fn count<F: Scalar>(n: usize) -> F {
    F::from_usize(n).expect("count representable as float")
}
