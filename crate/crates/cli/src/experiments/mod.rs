//! The experiment behind each subcommand. Every experiment maps its
//! parameters and a base seed to an [`Outcome`]: a numeric table, summary
//! numbers, and one [`Check`] per declared threshold.

pub mod decouple;
pub mod energy;
pub mod kakeya;
pub mod moments;
pub mod oracle;
pub mod vdc;

use serde::{Deserialize, Serialize};
use smallcap_core::records::Table;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

/// One threshold comparison `value relation limit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub limit: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, relation: Relation::AtMost, limit, pass: value <= limit }
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, relation: Relation::AtLeast, limit, pass: value >= limit }
    }

    /// A yes/no condition, recorded as `1 >= 1` or `0 >= 1`.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self::at_least(name, if ok { 1.0 } else { 0.0 }, 1.0)
    }

    pub fn line(&self) -> String {
        let rel = match self.relation {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
        };
        format!(
            "{} {}: {:.6e} {rel} {:.6e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.limit
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub table: Table,
    pub summary: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    /// Every seed handed to a randomized routine, in order of use.
    pub seeds: Vec<u64>,
}

impl Outcome {
    pub fn new(table: Table) -> Self {
        Self { table, summary: BTreeMap::new(), checks: Vec::new(), seeds: Vec::new() }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Independent stream seed for item `index` under base seed `seed`
/// (splitmix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x632B_E59B_D9B4_E019);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Largest over smallest of a set of positive constants (1 when all are
/// equal, including all zero).
pub fn spread(values: &[f64]) -> f64 {
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    if hi == lo {
        1.0
    } else if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}
