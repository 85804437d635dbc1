//! Rich-cube counting over a regular grid of cubes (squares in the plane).

use super::boxes::OrientedBox;
use super::families::BoxFamily;
use super::vec3::Vec3;
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Cubes a cube is blown up by before intersection tests.
pub const INFLATION: f64 = 1.5;

/// Regular grid of cubes `lo + side * ([i, i+1] x [j, j+1] x [k, k+1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeGrid {
    pub lo: Vec3,
    pub side: f64,
    pub cells: [usize; 3],
    pub planar: bool,
    pub inflation: f64,
}

impl CubeGrid {
    /// `[0, 1]^2` or `[0, 1]^3` cut into cubes of side `side`.
    pub fn unit(side: f64, planar: bool) -> Result<Self> {
        Self::region(Vec3::ZERO, 1.0, side, planar)
    }

    /// `lo + [0, extent]^n`.
    pub fn region(lo: Vec3, extent: f64, side: f64, planar: bool) -> Result<Self> {
        if !(side > 0.0 && side <= extent) {
            return Err(Error::Precondition(format!("cube side {side} must lie in (0, {extent}]")));
        }
        let n = (extent / side - 1e-9).ceil() as usize;
        Ok(Self { lo, side, cells: [n, n, if planar { 1 } else { n }], planar, inflation: INFLATION })
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().map(|&c| c as u64).product()
    }

    pub fn cube(&self, i: usize, j: usize, k: usize) -> OrientedBox {
        let c = Vec3::new(
            self.lo.x() + (i as f64 + 0.5) * self.side,
            self.lo.y() + (j as f64 + 0.5) * self.side,
            if self.planar { 0.0 } else { self.lo.z() + (k as f64 + 0.5) * self.side },
        );
        OrientedBox::axis_aligned(c, 0.5 * self.side * self.inflation, self.planar)
    }
}

/// Histogram of exact richness tuples `(r_1, ..., r_f)`, one entry per
/// family. Cubes meeting no box at all are only counted in `total_cubes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RichCubeHistogram {
    pub cube_side: f64,
    pub total_cubes: u64,
    pub counts: BTreeMap<Vec<u32>, u64>,
}

impl RichCubeHistogram {
    /// Cubes meeting at least `thresholds[i]` boxes of family `i`.
    pub fn at_least(&self, thresholds: &[u32]) -> u64 {
        self.counts
            .iter()
            .filter(|(r, _)| r.iter().zip(thresholds).all(|(a, b)| a >= b))
            .map(|(_, c)| c)
            .sum()
    }

    /// Count by dyadic level `2^j <= min_i r_i < 2^{j+1}`.
    pub fn dyadic(&self) -> BTreeMap<u32, u64> {
        let mut out = BTreeMap::new();
        for (r, c) in &self.counts {
            let m = r.iter().copied().min().unwrap_or(0);
            if m > 0 {
                *out.entry(1u32 << (31 - m.leading_zeros())).or_default() += c;
            }
        }
        out
    }

    /// Largest `min_i r_i` over all cubes.
    pub fn max_richness(&self) -> u32 {
        self.counts.keys().map(|r| r.iter().copied().min().unwrap_or(0)).max().unwrap_or(0)
    }

    fn merge(&mut self, other: RichCubeHistogram) {
        for (k, v) in other.counts {
            *self.counts.entry(k).or_default() += v;
        }
    }
}

/// Cells per slab along `x`; slabs are the unit of parallel work and of
/// memory streaming.
const SLAB_CELLS: usize = 1 << 16;

/// Count, for every cube of the grid, how many boxes of each family meet
/// its inflated copy; a uniform spatial hash (the grid itself) limits the
/// tests to cubes inside each box's bounding box.
pub fn count_rich_cubes(families: &[&BoxFamily], grid: &CubeGrid) -> Result<RichCubeHistogram> {
    if families.is_empty() || families.len() > 3 {
        return Err(Error::Precondition("count_rich_cubes takes 1 to 3 families".into()));
    }
    if families.iter().any(|f| f.boxes.iter().any(|b| b.planar != grid.planar)) {
        return Err(Error::Precondition("box and cube dimensions differ".into()));
    }
    let [nx, ny, nz] = grid.cells;
    let per_x = ny * nz;
    let xs_per_slab = (SLAB_CELLS / per_x.max(1)).max(1);
    let slabs: Vec<(usize, usize)> = (0..nx).step_by(xs_per_slab).map(|a| (a, (a + xs_per_slab).min(nx))).collect();
    let nf = families.len();
    // cell index ranges touched by each box, with the inflation margin
    let margin = 0.5 * (grid.inflation - 1.0) * grid.side;
    let ranges: Vec<Vec<[(usize, usize); 3]>> = families
        .iter()
        .map(|f| {
            f.boxes
                .iter()
                .map(|b| {
                    let (lo, hi) = b.aabb();
                    let mut r = [(0, 0); 3];
                    for k in 0..3 {
                        if grid.planar && k == 2 {
                            r[k] = (0, 1);
                            continue;
                        }
                        let a = ((lo.0[k] - margin - grid.lo.0[k]) / grid.side).floor();
                        let b = ((hi.0[k] + margin - grid.lo.0[k]) / grid.side).ceil();
                        let a = a.max(0.0) as usize;
                        let b = (b.max(0.0) as usize).min(grid.cells[k]);
                        r[k] = (a.min(b), b);
                    }
                    r
                })
                .collect()
        })
        .collect();
    let parts: Vec<RichCubeHistogram> = slabs
        .par_iter()
        .map(|&(x0, x1)| {
            let mut counts = vec![0u32; (x1 - x0) * per_x * nf];
            for (fi, f) in families.iter().enumerate() {
                for (b, r) in f.boxes.iter().zip(&ranges[fi]) {
                    let (ia, ib) = (r[0].0.max(x0), r[0].1.min(x1));
                    for i in ia..ib {
                        for j in r[1].0..r[1].1 {
                            for k in r[2].0..r[2].1 {
                                if grid.cube(i, j, k).overlaps(b) {
                                    counts[((i - x0) * per_x + j * nz + k) * nf + fi] += 1;
                                }
                            }
                        }
                    }
                }
            }
            let mut hist = RichCubeHistogram { cube_side: grid.side, total_cubes: 0, counts: BTreeMap::new() };
            for cell in counts.chunks(nf) {
                if cell.iter().any(|&c| c > 0) {
                    *hist.counts.entry(cell.to_vec()).or_default() += 1;
                }
            }
            hist
        })
        .collect();
    let mut out = RichCubeHistogram { cube_side: grid.side, total_cubes: grid.total(), counts: BTreeMap::new() };
    for p in parts {
        out.merge(p);
    }
    Ok(out)
}
