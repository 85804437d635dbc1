//! Desk-scale numerical laboratory for small-cap decoupling.
//!
//! The crate is split along the experiment families it supports:
//!
//! * [`expsum`]: curves, frequency sets and pointwise exponential sums.
//! * [`moments`]: exact and Monte-Carlo `L^p` moments over slab domains,
//!   plus log-log exponent fits.
//! * [`decoupling`]: cap partitions, extremal test functions and empirical
//!   lower bounds for decoupling constants.
//! * [`geometry`]: tubes, plates and planks; intersection volumes, Kakeya
//!   overlaps and rich-cube counting.
//! * [`energy`]: additive energy of finite point sets.
//! * [`vdc`]: direct phase sums and the k-th derivative bound formulas.
//! * [`oracle`]: slow, independent reference implementations.
//!
//! All randomized routines take explicit seeds and reduce over fixed work
//! blocks, so results do not depend on the size of the rayon pool.

pub mod decoupling;
pub mod energy;
mod error;
pub mod expsum;
pub mod geometry;
pub mod moments;
pub mod numeric;
pub mod oracle;
pub mod records;
pub mod vdc;

pub use error::{Error, Result};
