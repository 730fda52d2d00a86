//! Volatility return-interval analysis.
//!
//! The pipeline turns minute prices into a normalized volatility series,
//! extracts the intervals between threshold exceedances, fits a
//! stretched-exponential scaling function to the scaled interval density,
//! measures how interval moments drift with the mean interval, and
//! aggregates the fitted exponents against per-stock factors.
//!
//! Synthetic long-range correlated series (see [`synth`]) stand in for
//! proprietary tick data and double as verification oracles.

pub mod config;
pub mod dfa;
pub mod error;
pub mod factors;
pub mod ingest;
pub mod intervals;
pub mod pipeline;
pub mod report;
pub mod scaling;
pub mod stats;
pub mod synth;
pub mod volatility;

pub use config::Config;
pub use error::{Error, Result};
pub use intervals::{IntervalSet, ScaledPdf};
pub use report::AnalysisReport;
pub use scaling::{MomentScalingResult, SeFitResult};
pub use volatility::VolatilitySeries;
