//! Recovery-informed forecasting toolkit.
//!
//! The crate is organised around the three stages of a recovery forecast:
//!
//! * **base forecasts** ([`models`], [`hierarchy`], [`combine`]): counterfactual
//!   no-break forecasts from a zoo of univariate models, hierarchical
//!   reconciliation and non-negative stacking;
//! * **reference forecasts** ([`signals`]): short-horizon forecasts driven by
//!   search-index and flight signals;
//! * **recovery curves** ([`recovery`]): trend paths joining the initial
//!   (reference) and terminal (scaled base) forecasts, times a seasonal profile.
//!
//! [`eval`] holds point and interval scoring, [`series`] the monthly series
//! carrier with imputation and CSV ingestion.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod combine;
pub mod error;
pub mod eval;
pub mod hierarchy;
pub mod linalg;
pub mod models;
pub mod optim;
pub mod recovery;
pub mod series;
pub mod signals;
pub mod stats;

pub use error::{Error, Result};
pub use series::{MonthKey, MonthlySeries, SplitSpec};
