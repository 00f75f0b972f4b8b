//! Deterministic mechanics and analytics for a constant-product launchpad
//! bonding curve.
//!
//! The crate is organized around a small pipeline:
//!
//! * [`curve`] owns the fixed-point swap math (virtual reserves, fees,
//!   graduation, migration to the real pool),
//! * [`ingest`] parses trade logs and assembles per-token trajectories,
//! * [`estimate`] computes conditional graduation-probability curves and
//!   related descriptive statistics,
//! * [`breakeven`] maps graduation odds to expected returns and backtests
//!   the buy-at-level, hold-to-graduation rule,
//! * [`dump`] detects coordinated sell-offs with a robust control limit,
//! * [`synth`] generates seeded synthetic markets through the curve module
//!   so that every generated log satisfies the curve invariants.
//!
//! All SOL quantities are integer lamports and all token quantities are
//! integer base units; see [`fixed`] for conversions.

pub mod breakeven;
pub mod curve;
pub mod dump;
pub mod estimate;
pub mod fixed;
pub mod ingest;
pub mod synth;
#[cfg(test)]
pub(crate) mod testutil;

pub use curve::{CurveParams, CurveState, PoolState, SwapQuote};
pub use ingest::{TokenTrajectory, TradeEvent, TxType};
