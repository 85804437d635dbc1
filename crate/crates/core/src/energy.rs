//! Additive energy `E_2(L) = #{(l1, l2, l3, l4) in L^4 : l1 + l2 = l3 + l4}`.
//!
//! Pair sums are enumerated once per unordered pair (weight 2 off the
//! diagonal, 1 on it), bucketed along the first coordinate so that memory
//! stays bounded, quantized into cells of width `tol` and swept in sorted
//! order. With `d` coordinates, `3^(d-1)` cursors walk the neighboring cell
//! rows monotonically, so each sum meets only the candidates that can lie
//! within `tol` in sup-norm; those are then checked exactly.

use crate::expsum::cone_points;
use crate::moments::{fit_growth_exponent, ExponentFit};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyCount {
    /// Ordered quadruples.
    pub count: u64,
    pub set_size: usize,
    pub tolerance: f64,
    /// Quadruples whose sums differ by more than `tol / 2` but at most `tol`;
    /// a nonzero value suggests rerunning at a tighter tolerance.
    pub near_tolerance: u64,
}

#[derive(Debug, Clone)]
pub struct EnergyOptions {
    /// Pair sums held in memory at once.
    pub bucket_cap: usize,
}

impl Default for EnergyOptions {
    fn default() -> Self {
        Self { bucket_cap: 8_000_000 }
    }
}

pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy)]
struct PairSum {
    key: [i64; 3],
    at: [f64; 3],
    weight: u8,
    core: bool,
}

pub fn additive_energy(points: &[Vec<f64>], tol: f64) -> Result<EnergyCount> {
    additive_energy_with(points, tol, &EnergyOptions::default())
}

pub fn additive_energy_with(points: &[Vec<f64>], tol: f64, opts: &EnergyOptions) -> Result<EnergyCount> {
    let dim = points.first().map(Vec::len).unwrap_or(1);
    if points.is_empty() {
        return Ok(EnergyCount { count: 0, set_size: 0, tolerance: tol, near_tolerance: 0 });
    }
    if !(1..=3).contains(&dim) || points.iter().any(|p| p.len() != dim) {
        return Err(Error::InvalidSpec("points must share a dimension between 1 and 3".into()));
    }
    if !(tol >= 0.0 && tol.is_finite()) {
        return Err(Error::InvalidSpec(format!("tolerance {tol} must be finite and >= 0")));
    }
    let mut pts: Vec<[f64; 3]> = points
        .iter()
        .map(|p| {
            let mut a = [0.0; 3];
            a[..dim].copy_from_slice(p);
            a
        })
        .collect();
    if pts.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidSpec("non-finite coordinate".into()));
    }
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])).then(a[2].total_cmp(&b[2])));
    if pts.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Precondition("points must be pairwise distinct".into()));
    }
    let n = pts.len();
    let xs: Vec<f64> = pts.iter().map(|p| p[0]).collect();
    let (smin, smax) = (2.0 * xs[0], 2.0 * xs[n - 1]);
    let pairs = n as u64 * (n as u64 + 1) / 2;
    let buckets = pairs.div_ceil(opts.bucket_cap.max(1) as u64).max(1) as usize;
    let width = (smax - smin) / buckets as f64;
    let bounds: Vec<(f64, f64)> = (0..buckets)
        .map(|b| {
            let lo = if b == 0 { f64::NEG_INFINITY } else { smin + b as f64 * width };
            let hi = if b + 1 == buckets { f64::INFINITY } else { smin + (b + 1) as f64 * width };
            (lo, hi)
        })
        .collect();
    let results: Vec<(u64, u64)> = bounds
        .par_iter()
        .map(|&(lo, hi)| count_bucket(&pts, &xs, dim, tol, lo, hi))
        .collect();
    let count = results.iter().map(|r| r.0).sum();
    let near_tolerance = results.iter().map(|r| r.1).sum();
    Ok(EnergyCount { count, set_size: n, tolerance: tol, near_tolerance })
}

fn quantize(at: &[f64; 3], tol: f64) -> [i64; 3] {
    if tol == 0.0 {
        // exact grouping on the bit pattern (with -0 folded into +0)
        at.map(|v| if v == 0.0 { 0 } else { v.to_bits() as i64 })
    } else {
        at.map(|v| (v / tol).floor() as i64)
    }
}

/// Ordered-pair matches for sums whose first coordinate lies in `[lo, hi)`,
/// against partners anywhere (sums within `tol` outside the range are
/// loaded as halo).
fn count_bucket(pts: &[[f64; 3]], xs: &[f64], dim: usize, tol: f64, lo: f64, hi: f64) -> (u64, u64) {
    let n = pts.len();
    let mut sums: Vec<PairSum> = Vec::new();
    for i in 0..n {
        // partners j >= i with x_i + x_j in [lo - tol, hi + tol]
        let a = lo - tol - xs[i];
        let b = hi + tol - xs[i];
        let start = i + xs[i..].partition_point(|&x| x < a);
        let end = i + xs[i..].partition_point(|&x| x <= b);
        for j in start..end {
            let at = [pts[i][0] + pts[j][0], pts[i][1] + pts[j][1], pts[i][2] + pts[j][2]];
            sums.push(PairSum {
                key: quantize(&at, tol),
                at,
                weight: if i == j { 1 } else { 2 },
                core: at[0] >= lo && at[0] < hi,
            });
        }
    }
    sums.sort_unstable_by(|a, b| a.key.cmp(&b.key).then(a.at[0].total_cmp(&b.at[0])));
    if tol == 0.0 {
        return (count_exact(&sums), 0);
    }
    let offsets = neighbor_offsets(dim);
    let mut cursors = vec![0usize; offsets.len()];
    let (mut count, mut near) = (0u64, 0u64);
    for u in &sums {
        if !u.core {
            continue;
        }
        let mut inner = 0u64;
        let mut inner_near = 0u64;
        for (c, off) in cursors.iter_mut().zip(&offsets) {
            let mut lower = [u.key[0] + off[0], u.key[1] + off[1], u.key[2] + off[2]];
            lower[dim - 1] -= 1;
            let mut upper = lower;
            upper[dim - 1] += 2;
            while *c < sums.len() && sums[*c].key < lower {
                *c += 1;
            }
            let mut k = *c;
            while k < sums.len() && sums[k].key <= upper {
                let v = &sums[k];
                let gap = (0..dim).map(|d| (u.at[d] - v.at[d]).abs()).fold(0.0, f64::max);
                if gap <= tol {
                    inner += v.weight as u64;
                    if gap > tol / 2.0 {
                        inner_near += v.weight as u64;
                    }
                }
                k += 1;
            }
        }
        count += u.weight as u64 * inner;
        near += u.weight as u64 * inner_near;
    }
    (count, near)
}

fn count_exact(sums: &[PairSum]) -> u64 {
    let mut total = 0u64;
    let mut i = 0;
    while i < sums.len() {
        let mut j = i;
        let (mut all, mut core) = (0u64, 0u64);
        while j < sums.len() && sums[j].key == sums[i].key {
            all += sums[j].weight as u64;
            if sums[j].core {
                core += sums[j].weight as u64;
            }
            j += 1;
        }
        total += core * all;
        i = j;
    }
    total
}

/// Offsets over the leading `dim - 1` coordinates, in lexicographic order
/// so that the cursor targets stay sorted.
fn neighbor_offsets(dim: usize) -> Vec<[i64; 3]> {
    let mut out = vec![[0i64; 3]];
    for d in 0..dim - 1 {
        let mut next = Vec::with_capacity(out.len() * 3);
        for o in &out {
            for step in -1..=1 {
                let mut p = *o;
                p[d] = step;
                next.push(p);
            }
        }
        out = next;
    }
    out.sort();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyScan {
    /// `(delta, |L|, E_2)`.
    pub rows: Vec<(f64, usize, u64)>,
    pub fit: ExponentFit,
}

/// Energy of the polar-grid cone sets, fitted as `log E_2` against `log |L|`.
pub fn energy_exponent_scan(deltas: &[f64]) -> Result<EnergyScan> {
    let mut rows = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let pts: Vec<Vec<f64>> = cone_points(d)?.into_iter().map(|p| p.0.to_vec()).collect();
        let e = additive_energy(&pts, DEFAULT_TOLERANCE)?;
        rows.push((d, e.set_size, e.count));
    }
    let fit = fit_growth_exponent(&rows.iter().map(|r| (r.1 as f64, r.2 as f64)).collect::<Vec<_>>())?;
    Ok(EnergyScan { rows, fit })
}

/// Degenerate comparison set: `delta`-spaced points on the single circle
/// of radius 1 at height 1 of the cone.
pub fn circle_points(delta: f64) -> Result<Vec<Vec<f64>>> {
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(Error::Precondition(format!("delta = {delta} outside (0, 1/2]")));
    }
    let m = (std::f64::consts::TAU / delta).floor() as usize;
    Ok((0..m)
        .map(|j| {
            let phi = std::f64::consts::TAU * j as f64 / m as f64;
            vec![phi.cos(), phi.sin(), 1.0]
        })
        .collect())
}
