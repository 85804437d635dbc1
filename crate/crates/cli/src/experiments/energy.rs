//! Additive energy of the cone point sets, checked against the brute-force
//! count on random subsets.

use super::{derive_seed, Check, Outcome};
use crate::config::{ensure, Invalid};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use smallcap_core::energy::{additive_energy, circle_points, energy_exponent_scan, DEFAULT_TOLERANCE};
use smallcap_core::expsum::cone_points;
use smallcap_core::moments::fit_growth_exponent;
use smallcap_core::oracle::{naive_energy, MAX_NAIVE_ENERGY_POINTS};
use smallcap_core::records::Table;
use smallcap_core::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyParams {
    pub delta_values: Vec<f64>,
    pub tolerance: f64,
    /// Random cone subsets compared against the brute-force count.
    pub oracle_sets: usize,
    pub oracle_max_size: usize,
    /// Also scan the single-circle set at the same spacings.
    pub degenerate_circle: bool,
    pub max_slope: Option<f64>,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            delta_values: vec![0.125, 0.0625, 0.03125],
            tolerance: DEFAULT_TOLERANCE,
            oracle_sets: 10,
            oracle_max_size: 40,
            degenerate_circle: false,
            max_slope: None,
        }
    }
}

impl EnergyParams {
    pub fn validate(&self) -> std::result::Result<(), Invalid> {
        ensure(!self.delta_values.is_empty(), "delta_values", || "empty list".into())?;
        ensure(self.delta_values.iter().all(|&d| d > 0.0 && d <= 0.5), "delta_values", || {
            "every delta must lie in (0, 1/2]".into()
        })?;
        ensure(self.tolerance >= 0.0 && self.tolerance < 1e-3, "tolerance", || "must lie in [0, 1e-3)".into())?;
        ensure((1..=MAX_NAIVE_ENERGY_POINTS).contains(&self.oracle_max_size), "oracle_max_size", || {
            format!("must lie in 1..={MAX_NAIVE_ENERGY_POINTS}")
        })?;
        if self.max_slope.is_some() || self.degenerate_circle {
            ensure(self.delta_values.len() >= 3, "delta_values", || "a slope fit needs at least 3 values".into())?;
        }
        Ok(())
    }
}

pub fn run(params: &EnergyParams, seed: u64) -> Result<Outcome> {
    let mut out = Outcome::new(Table::new(["delta", "set_size", "energy", "circle_size", "circle_energy"]));

    let scan = if params.tolerance == DEFAULT_TOLERANCE {
        energy_exponent_scan(&params.delta_values)?.rows
    } else {
        let mut rows = Vec::new();
        for &d in &params.delta_values {
            let e = additive_energy(&as_rows(cone_points(d)?), params.tolerance)?;
            rows.push((d, e.set_size, e.count));
        }
        rows
    };
    let mut circle = Vec::new();
    for &(d, n, e) in &scan {
        let (cn, ce) = if params.degenerate_circle {
            let c = additive_energy(&circle_points(d)?, params.tolerance)?;
            circle.push((c.set_size as f64, c.count as f64));
            (c.set_size as f64, c.count as f64)
        } else {
            (0.0, 0.0)
        };
        out.table.push(vec![d, n as f64, e as f64, cn, ce]);
    }
    if scan.len() >= 3 {
        let fit = fit_growth_exponent(&scan.iter().map(|r| (r.1 as f64, r.2 as f64)).collect::<Vec<_>>())?;
        out.summary.insert("slope".into(), fit.slope);
        out.summary.insert("r_squared".into(), fit.r_squared);
        if let Some(hi) = params.max_slope {
            out.checks.push(Check::at_most("energy exponent", fit.slope, hi));
        }
    }
    if circle.len() >= 3 {
        out.summary.insert("circle_slope".into(), fit_growth_exponent(&circle)?.slope);
    }

    if params.oracle_sets > 0 {
        let coarsest = params.delta_values.iter().copied().fold(0.0, f64::max);
        let pool = as_rows(cone_points(coarsest)?);
        let mut mismatches = 0usize;
        for k in 0..params.oracle_sets {
            let s = derive_seed(seed, k as u64);
            out.seeds.push(s);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let size = rng.gen_range(1..=params.oracle_max_size.min(pool.len()));
            let subset: Vec<Vec<f64>> = pool.choose_multiple(&mut rng, size).cloned().collect();
            let fast = additive_energy(&subset, params.tolerance)?.count;
            if fast != naive_energy(&subset, params.tolerance)? {
                mismatches += 1;
            }
        }
        out.summary.insert("oracle_mismatches".into(), mismatches as f64);
        out.checks.push(Check::at_most("energy oracle mismatches", mismatches as f64, 0.0));
    }
    Ok(out)
}

fn as_rows(points: Vec<smallcap_core::geometry::Vec3>) -> Vec<Vec<f64>> {
    points.into_iter().map(|p| p.0.to_vec()).collect()
}
