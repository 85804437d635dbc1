//! Slow reference implementations used to check the fast paths.
//!
//! Nothing here shares a kernel with the code it checks (other than
//! pointwise evaluation of a sum); everything runs single-threaded and is
//! size-capped.

use crate::expsum::{eval_sum, ExpSumSpec};
use crate::geometry::{BoxFamily, CubeGrid, OrientedBox, RichCubeHistogram, Vec3};
use crate::moments::{AxisRange, SlabDomain};
use crate::numeric::{KahanSum, Z99};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub instance: String,
    pub primary_value: f64,
    pub oracle_value: f64,
    pub relative_gap: f64,
}

impl OracleReport {
    pub fn new(instance: impl Into<String>, primary_value: f64, oracle_value: f64) -> Self {
        Self {
            instance: instance.into(),
            primary_value,
            oracle_value,
            relative_gap: (primary_value - oracle_value).abs() / oracle_value.abs().max(1e-300),
        }
    }
}

pub const MAX_QUADRATURE_NODES: u128 = 1_000_000_000;

/// Nodes per unit needed to sample `|S|^p` at the Nyquist rate along each
/// axis of the domain.
pub fn nyquist_nodes(spec: &ExpSumSpec, p: f64, domain: &SlabDomain) -> Vec<usize> {
    let terms = spec.terms();
    (0..spec.dimension())
        .map(|axis| {
            let (lo, hi) = (0..terms.len()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), j| {
                let f = terms.freq(j)[axis];
                (lo.min(f), hi.max(f))
            });
            // |S|^p carries frequencies up to (p/2) * spread
            let band = 0.5 * p * (hi - lo);
            ((2.0 * band * domain.axes[axis].length()).ceil() as usize).max(1)
        })
        .collect()
}

/// Tensor midpoint rule for `int_domain |S|^p` (or its average).
pub fn dense_quadrature_moment(
    spec: &ExpSumSpec,
    p: f64,
    domain: &SlabDomain,
    nodes_per_axis: &[usize],
    normalized: bool,
) -> Result<f64> {
    let dim = spec.dimension();
    if domain.axes.len() != dim || nodes_per_axis.len() != dim {
        return Err(Error::InvalidSpec("axis count mismatch".into()));
    }
    let nyq = nyquist_nodes(spec, p, domain);
    for (axis, (&m, &q)) in nodes_per_axis.iter().zip(&nyq).enumerate() {
        if m < 2 * q {
            return Err(Error::Precondition(format!(
                "axis {axis}: {m} nodes is below twice the Nyquist count {q}"
            )));
        }
    }
    let total: u128 = nodes_per_axis.iter().map(|&m| m as u128).product();
    if total > MAX_QUADRATURE_NODES {
        return Err(Error::SizeCap(format!("{total} quadrature nodes")));
    }
    let starts: Vec<f64> = domain.axes.iter().map(AxisRange::start).collect();
    let lens: Vec<f64> = domain.axes.iter().map(AxisRange::length).collect();
    let mut idx = vec![0usize; dim];
    let mut x = vec![0.0; dim];
    let mut acc = KahanSum::new();
    loop {
        for k in 0..dim {
            x[k] = starts[k] + lens[k] * (idx[k] as f64 + 0.5) / nodes_per_axis[k] as f64;
        }
        acc.add(eval_sum(spec, &x)?.norm().powf(p));
        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] < nodes_per_axis[k] {
                break;
            }
            idx[k] = 0;
            k += 1;
            if k == dim {
                let cell: f64 = lens.iter().zip(nodes_per_axis).map(|(l, &m)| l / m as f64).product();
                let v = acc.value() * cell;
                let vol: f64 = lens.iter().product();
                return Ok(if normalized { v / vol } else { v });
            }
        }
    }
}

pub const MAX_NAIVE_ENERGY_POINTS: usize = 40;

/// Ordered quadruples with `|(a + b) - (c + d)|_inf <= tol`, by direct loops.
pub fn naive_energy(points: &[Vec<f64>], tol: f64) -> Result<u64> {
    if points.len() > MAX_NAIVE_ENERGY_POINTS {
        return Err(Error::SizeCap(format!("{} points (cap {MAX_NAIVE_ENERGY_POINTS})", points.len())));
    }
    let n = points.len();
    let mut count = 0u64;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let close = (0..points[a].len()).all(|k| {
                        let lhs = points[a][k] + points[b][k];
                        let rhs = points[c][k] + points[d][k];
                        (lhs - rhs).abs() <= tol
                    });
                    if close {
                        count += 1;
                    }
                }
            }
        }
    }
    Ok(count)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McVolume {
    pub volume: f64,
    /// 99% confidence half-width.
    pub ci: f64,
    /// No sample landed in the intersection: the volume is below what
    /// this many samples can resolve.
    pub below_resolution: bool,
}

fn box_point(b: &OrientedBox, s: [f64; 3]) -> Vec3 {
    let mut p = b.center;
    let dims = if b.planar { 2 } else { 3 };
    for k in 0..dims {
        p = p + b.axes[k] * (s[k] * b.half[k]);
    }
    p
}

fn inside(b: &OrientedBox, p: &Vec3) -> bool {
    let dims = if b.planar { 2 } else { 3 };
    let d = *p - b.center;
    (0..dims).all(|k| d.dot(&b.axes[k]).abs() <= b.half[k])
}

/// `|a n b|` by sampling uniformly in `a` and counting hits in `b`.
pub fn mc_volume(a: &OrientedBox, b: &OrientedBox, samples: usize, seed: u64) -> Result<McVolume> {
    if samples < 100 {
        return Err(Error::TooFewSamples(samples));
    }
    if a.planar != b.planar {
        return Err(Error::Precondition("boxes of different dimension".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..samples {
        let s = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        if inside(b, &box_point(a, s)) {
            hits += 1;
        }
    }
    let measure = if a.planar { 4.0 * a.half[0] * a.half[1] } else { 8.0 * a.half[0] * a.half[1] * a.half[2] };
    let frac = hits as f64 / samples as f64;
    Ok(McVolume {
        volume: frac * measure,
        ci: Z99 * (frac * (1.0 - frac) / samples as f64).sqrt() * measure,
        below_resolution: hits == 0,
    })
}

fn corners(b: &OrientedBox) -> Vec<Vec3> {
    let dims = if b.planar { 2 } else { 3 };
    (0..1usize << dims)
        .map(|mask| {
            let s = [0, 1, 2].map(|k| if k < dims && mask >> k & 1 == 1 { 1.0 } else { -1.0 });
            box_point(b, if dims == 2 { [s[0], s[1], 0.0] } else { s })
        })
        .collect()
}

/// Open-interior overlap: boxes that only touch do not overlap.
fn boxes_overlap(a: &OrientedBox, b: &OrientedBox) -> bool {
    let dims = if a.planar { 2 } else { 3 };
    let mut axes: Vec<Vec3> = a.axes[..dims].iter().chain(&b.axes[..dims]).copied().collect();
    if dims == 3 {
        for u in &a.axes {
            for v in &b.axes {
                let c = u.cross(v);
                if c.norm() > 1e-12 {
                    axes.push(c);
                }
            }
        }
    }
    let (ca, cb) = (corners(a), corners(b));
    axes.iter().all(|ax| {
        let range = |cs: &[Vec3]| {
            cs.iter().map(|c| c.dot(ax)).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
        };
        let (alo, ahi) = range(&ca);
        let (blo, bhi) = range(&cb);
        ahi > blo && bhi > alo
    })
}

pub const MAX_NAIVE_CUBES: u64 = 10_000;
pub const MAX_NAIVE_BOXES: usize = 1_000;

/// Every cube against every box.
pub fn naive_rich_cubes(families: &[&BoxFamily], grid: &CubeGrid) -> Result<RichCubeHistogram> {
    let boxes: usize = families.iter().map(|f| f.boxes.len()).sum();
    if grid.total() > MAX_NAIVE_CUBES || boxes > MAX_NAIVE_BOXES {
        return Err(Error::SizeCap(format!("{} cubes x {boxes} boxes", grid.total())));
    }
    let mut counts = BTreeMap::new();
    let half = 0.5 * grid.side * grid.inflation;
    for i in 0..grid.cells[0] {
        for j in 0..grid.cells[1] {
            for k in 0..grid.cells[2] {
                let center = Vec3::new(
                    grid.lo.x() + (i as f64 + 0.5) * grid.side,
                    grid.lo.y() + (j as f64 + 0.5) * grid.side,
                    if grid.planar { 0.0 } else { grid.lo.z() + (k as f64 + 0.5) * grid.side },
                );
                let cube = OrientedBox {
                    center,
                    axes: [Vec3::X, Vec3::Y, Vec3::Z],
                    half: [half; 3],
                    tag: crate::geometry::BoxTag::Cube,
                    planar: grid.planar,
                    clipped: false,
                };
                let r: Vec<u32> = families
                    .iter()
                    .map(|f| f.boxes.iter().filter(|b| boxes_overlap(&cube, b)).count() as u32)
                    .collect();
                if r.iter().any(|&c| c > 0) {
                    *counts.entry(r).or_default() += 1;
                }
            }
        }
    }
    Ok(RichCubeHistogram { cube_side: grid.side, total_cubes: grid.total(), counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoxTag;

    #[test]
    fn parseval_by_quadrature() {
        let spec = ExpSumSpec::moment_curve(2, 8).unwrap();
        let dom = SlabDomain::torus(2);
        let nodes: Vec<usize> = nyquist_nodes(&spec, 2.0, &dom).iter().map(|q| 4 * q).collect();
        let v = dense_quadrature_moment(&spec, 2.0, &dom, &nodes, false).unwrap();
        assert!((v / 8.0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn under_resolved_grid_refused() {
        let spec = ExpSumSpec::moment_curve(2, 8).unwrap();
        let dom = SlabDomain::torus(2);
        assert!(dense_quadrature_moment(&spec, 4.0, &dom, &[8, 8], false).is_err());
    }

    #[test]
    fn small_energies() {
        assert_eq!(naive_energy(&[vec![0.2, 0.7]], 0.0).unwrap(), 1);
        let pts: Vec<Vec<f64>> = (1..=5).map(|j| vec![j as f64, (j * j) as f64]).collect();
        assert_eq!(naive_energy(&pts, 0.0).unwrap(), 45);
    }

    #[test]
    fn unit_cube_volume() {
        let c = OrientedBox::axis_aligned(Vec3::new(0.5, 0.5, 0.5), 0.5, false);
        let v = mc_volume(&c, &c, 1000, 1).unwrap();
        assert_eq!(v.volume, 1.0);
        let far = OrientedBox::axis_aligned(Vec3::new(3.0, 0.5, 0.5), 0.5, false);
        let v = mc_volume(&c, &far, 1000, 1).unwrap();
        assert!(v.below_resolution && v.volume == 0.0);
    }

    #[test]
    fn one_box_rich_count() {
        let b = OrientedBox::axis_aligned(Vec3::new(0.5, 0.5, 0.0), 0.125, true);
        let fam = BoxFamily::unstructured(vec![OrientedBox { tag: BoxTag::Tube2D, ..b }], 0.25);
        let mut grid = CubeGrid::unit(0.125, true).unwrap();
        grid.inflation = 1.0;
        let h = naive_rich_cubes(&[&fam], &grid).unwrap();
        // [0.375, 0.625]^2 meets the open interiors of a 2 x 2 block of cells
        assert_eq!(h.at_least(&[1]), 4);
    }
}
