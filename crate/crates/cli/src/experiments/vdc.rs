//! Zeta blocks `sum_{N < n <= 2N} n^{it}` against the derivative bounds.

use super::{Check, Outcome};
use crate::config::{ensure, Invalid};
use serde::{Deserialize, Serialize};
use smallcap_core::records::Table;
use smallcap_core::vdc::{bdg_bound, bound_scan, new_fourth_bound, PhaseSpec, MAX_T};
use smallcap_core::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VdcParams {
    pub t: f64,
    /// Block lengths; defaults to the powers of two in `[t^{1/3}, t^{5/12}]`.
    pub n_values: Option<Vec<u64>>,
    /// Require `|sum| <= slack * new bound` wherever the new bound applies.
    pub slack: Option<f64>,
    /// Side of the `(N, varpi)` grid on which the new bound is compared with
    /// the older one (0 skips the comparison).
    pub bound_grid: usize,
    pub epsilon: f64,
}

impl Default for VdcParams {
    fn default() -> Self {
        Self { t: 1e6, n_values: None, slack: None, bound_grid: 10, epsilon: 0.0 }
    }
}

impl VdcParams {
    pub fn validate(&self) -> std::result::Result<(), Invalid> {
        ensure(self.t >= 1.0 && self.t <= MAX_T, "t", || format!("{} not in [1, {MAX_T:e}]", self.t))?;
        if let Some(ns) = &self.n_values {
            ensure(!ns.is_empty(), "n_values", || "empty list".into())?;
            ensure(ns.iter().all(|&n| n >= 1 && (n as f64) <= self.t.sqrt()), "n_values", || {
                "every N must lie in [1, t^(1/2)]".into()
            })?;
        } else {
            ensure(!self.block_lengths().is_empty(), "t", || "no power of two in [t^(1/3), t^(5/12)]".into())?;
        }
        ensure(self.bound_grid != 1, "bound_grid", || "a grid needs at least 2 points per side".into())?;
        ensure(self.bound_grid <= 40, "bound_grid", || "at most 40 points per side".into())?;
        ensure((0.0..1.0).contains(&self.epsilon), "epsilon", || "must lie in [0, 1)".into())?;
        if let Some(s) = self.slack {
            ensure(s > 0.0, "slack", || "must be positive".into())?;
        }
        Ok(())
    }

    pub fn block_lengths(&self) -> Vec<u64> {
        if let Some(ns) = &self.n_values {
            return ns.clone();
        }
        let (lo, hi) = (self.t.powf(1.0 / 3.0), self.t.powf(5.0 / 12.0));
        (0..63).map(|e| 1u64 << e).filter(|&n| n as f64 >= lo && n as f64 <= hi).collect()
    }
}

pub fn run(params: &VdcParams, _seed: u64) -> Result<Outcome> {
    let mut out = Outcome::new(Table::new(["N", "abs_sum", "classical", "bdg", "new", "in_regime", "block_bound"]));
    let rows = bound_scan(params.t, &params.block_lengths())?;
    let mut worst: f64 = 0.0;
    let mut applicable = 0usize;
    let mut worst_block: f64 = 0.0;
    for row in &rows {
        // the bound on a whole zeta block that the fourth-derivative estimate
        // implies: N^{11/15} t^{1/15}
        let block = (row.n as f64).powf(11.0 / 15.0) * params.t.powf(1.0 / 15.0);
        worst_block = worst_block.max(row.abs_sum / block);
        let spec = PhaseSpec::zeta_block(params.t, row.n);
        let bdg = bdg_bound(&spec, params.epsilon)?;
        let new = new_fourth_bound(&spec, params.epsilon).ok();
        out.table.push(vec![
            row.n as f64,
            row.abs_sum,
            row.classical,
            bdg,
            new.unwrap_or(0.0),
            if new.is_some() { 1.0 } else { 0.0 },
            block,
        ]);
        if let Some(b) = new {
            applicable += 1;
            worst = worst.max(row.abs_sum / b);
        }
    }
    out.summary.insert("max_sum_over_new".into(), worst);
    out.summary.insert("rows_in_regime".into(), applicable as f64);
    out.summary.insert("max_sum_over_block_bound".into(), worst_block);
    if let Some(s) = params.slack {
        out.checks.push(Check::holds("some block inside the regime", applicable > 0));
        out.checks.push(Check::at_most("|sum| / new bound", worst, s));
    }

    if params.bound_grid >= 2 {
        let g = params.bound_grid;
        let mut max_ratio: f64 = 0.0;
        for i in 0..g {
            let n = 1u64 << (8 + i);
            for j in 0..g {
                let varpi = 1.0 + j as f64 / (g - 1) as f64;
                let spec = PhaseSpec::bound_only(n, 4, (n as f64).powf(-varpi), 16.0);
                max_ratio = max_ratio.max(new_fourth_bound(&spec, params.epsilon)? / bdg_bound(&spec, params.epsilon)?);
            }
        }
        out.summary.insert("max_new_over_bdg".into(), max_ratio);
        out.checks.push(Check::at_most("new bound / older bound on the grid", max_ratio, 1.0));
    }
    Ok(out)
}
