use super::boxes::OrientedBox;
use super::families::BoxFamily;
use crate::numeric::KahanSum;
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    /// `||sum 1_B||_2^2 = sum_{B1, B2} |B1 n B2|` over ordered pairs.
    pub value: f64,
    /// `sum |B|`, the diagonal part.
    pub total_measure: f64,
    /// Off-diagonal pairs that reached the exact clipping stage.
    pub candidate_pairs: u64,
}

/// Exact `L^2` overlap by pairwise clipping.
///
/// Broad phase: boxes are sorted by the lower `x` end of their bounding
/// boxes and swept, so only pairs whose `x`-extents overlap are examined;
/// the `y`/`z` extents and a separating-axis test prune further before the
/// clipping kernel runs.
pub fn kakeya_l2_overlap(family: &BoxFamily) -> Result<OverlapReport> {
    if family.is_empty() {
        return Err(Error::Precondition("empty family".into()));
    }
    let boxes = &family.boxes;
    let mut order: Vec<(usize, [f64; 3], [f64; 3])> = boxes
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let (lo, hi) = b.aabb();
            (i, lo.0, hi.0)
        })
        .collect();
    order.sort_by(|a, b| a.1[0].total_cmp(&b.1[0]).then(a.0.cmp(&b.0)));
    let dims = boxes[0].dims();
    let rows: Vec<(f64, u64)> = (0..order.len())
        .into_par_iter()
        .map(|a| {
            let (ia, lo_a, hi_a) = order[a];
            let mut acc = KahanSum::new();
            let mut pairs = 0;
            for &(ib, lo_b, hi_b) in &order[a + 1..] {
                if lo_b[0] >= hi_a[0] {
                    break;
                }
                if (1..dims).any(|k| lo_b[k] >= hi_a[k] || lo_a[k] >= hi_b[k]) {
                    continue;
                }
                pairs += 1;
                acc.add(boxes[ia].intersection_measure(&boxes[ib]));
            }
            (acc.value(), pairs)
        })
        .collect();
    let off: KahanSum = rows.iter().map(|r| r.0).collect();
    let total_measure: f64 = boxes.iter().map(OrientedBox::measure).sum();
    Ok(OverlapReport {
        value: total_measure + 2.0 * off.value(),
        total_measure,
        candidate_pairs: rows.iter().map(|r| r.1).sum(),
    })
}

/// Rasterized `||sum 1_B||_2^2` for planar families: cells of side
/// `cell`, counts taken at cell centers, `sum count^2 * cell^2`.
pub fn rasterized_l2_overlap(family: &BoxFamily, cell: f64) -> Result<f64> {
    if family.is_empty() || !family.boxes.iter().all(|b| b.planar) {
        return Err(Error::Precondition("rasterization needs a nonempty planar family".into()));
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for b in &family.boxes {
        let (l, h) = b.aabb();
        for k in 0..2 {
            lo[k] = lo[k].min(l.0[k]);
            hi[k] = hi[k].max(h.0[k]);
        }
    }
    let nx = ((hi[0] - lo[0]) / cell).ceil() as usize + 1;
    let ny = ((hi[1] - lo[1]) / cell).ceil() as usize + 1;
    if (nx as u128) * (ny as u128) > 1 << 28 {
        return Err(Error::SizeCap(format!("{nx} x {ny} raster cells")));
    }
    let mut counts = vec![0u32; nx * ny];
    for b in &family.boxes {
        let poly: Vec<[f64; 2]> = b.corners().iter().map(|p| [p.x(), p.y()]).collect();
        let (l, h) = b.aabb();
        let i0 = ((l.x() - lo[0]) / cell - 0.5).floor().max(0.0) as usize;
        let i1 = (((h.x() - lo[0]) / cell - 0.5).ceil() as usize).min(nx - 1);
        for i in i0..=i1 {
            let x = lo[0] + (i as f64 + 0.5) * cell;
            let Some((y_lo, y_hi)) = vertical_chord(&poly, x) else { continue };
            let j0 = ((y_lo - lo[1]) / cell - 0.5).ceil().max(0.0) as usize;
            let j1 = ((y_hi - lo[1]) / cell - 0.5).floor();
            if j1 < 0.0 {
                continue;
            }
            for j in j0..=(j1 as usize).min(ny - 1) {
                counts[i * ny + j] += 1;
            }
        }
    }
    let s: KahanSum = counts.iter().filter(|&&c| c > 0).map(|&c| (c as f64) * (c as f64)).collect();
    Ok(s.value() * cell * cell)
}

/// `y`-range of the intersection of the vertical line at `x` with a convex
/// polygon.
fn vertical_chord(poly: &[[f64; 2]], x: f64) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let (xmin, xmax) = (a[0].min(b[0]), a[0].max(b[0]));
        if x < xmin || x > xmax {
            continue;
        }
        if (b[0] - a[0]).abs() < 1e-300 {
            lo = lo.min(a[1].min(b[1]));
            hi = hi.max(a[1].max(b[1]));
        } else {
            let t = (x - a[0]) / (b[0] - a[0]);
            let y = a[1] + t * (b[1] - a[1]);
            lo = lo.min(y);
            hi = hi.max(y);
        }
    }
    (lo <= hi).then_some((lo, hi))
}
