//! Threshold policies for scheduling EV charging, flexible loads, rooftop
//! solar and a home battery under net-metering time-of-use tariffs.
//!
//! The crate builds expected value functions of remaining EV demand by
//! backward induction ([`value`]), turns their supergradients into the
//! thresholds that drive the procrastination and myopic policies
//! ([`policy`]), and benchmarks those policies against an offline oracle and
//! simpler baselines by Monte-Carlo simulation ([`sim`]).

// Range checks are written `!(x >= 0.0)` so that NaN fails them too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod dist;
pub mod error;
pub mod export;
pub mod model;
pub mod oracle;
pub mod policy;
pub mod scenario;
pub mod sim;
pub mod value;

pub use error::{Error, Result};
pub use model::{Action, HouseholdConfig, PricePair, State};
