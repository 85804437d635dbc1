//! Structured box families and their audits.

use super::boxes::{BoxTag, OrientedBox};
use super::plates::{vinogradov_plate, Interval};
use super::vec3::Vec3;
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

/// The three pairwise disjoint broad parameter ranges.
pub const BROAD_RANGES: [(f64, f64); 3] = [(0.0, 1.0 / 6.0), (1.0 / 3.0, 0.5), (2.0 / 3.0, 1.0)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BroadGroup {
    pub range: (f64, f64),
    /// Interval indices `k`, meaning `I = [k delta, (k + 1) delta]`.
    pub intervals: Vec<usize>,
    /// Plates per fat plate for every chosen interval.
    pub per_fat: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Structure {
    Unstructured,
    PlanarTubes {
        alpha: f64,
        /// `W = R^{1 - alpha}` with `R = delta^{-2}`.
        w: f64,
        /// At most this many tubes per fat tube.
        per_fat: usize,
        /// Direction angles of the tube long axes.
        directions: Vec<f64>,
    },
    Vinogradov {
        alpha: f64,
        /// `W = delta^{3 alpha - 2}`; plates repeat with period `1/W` in `x`.
        w: f64,
        groups: Vec<BroadGroup>,
    },
}

/// Provenance of one box inside its family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxLabel {
    pub group: usize,
    pub direction: usize,
    pub fat: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxFamily {
    pub boxes: Vec<OrientedBox>,
    pub labels: Vec<BoxLabel>,
    pub delta: f64,
    pub structure: Structure,
}

impl BoxFamily {
    pub fn unstructured(boxes: Vec<OrientedBox>, delta: f64) -> Self {
        let labels = (0..boxes.len()).map(|i| BoxLabel { group: 0, direction: i, fat: 0 }).collect();
        Self { boxes, labels, delta, structure: Structure::Unstructured }
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }
    pub fn total_measure(&self) -> f64 {
        self.boxes.iter().map(OrientedBox::measure).sum()
    }

    /// Boxes of one broad group, as an unstructured family.
    pub fn group(&self, g: usize) -> BoxFamily {
        let (boxes, labels): (Vec<_>, Vec<_>) = self
            .boxes
            .iter()
            .zip(&self.labels)
            .filter(|(_, l)| l.group == g)
            .map(|(b, l)| (*b, *l))
            .unzip();
        BoxFamily { boxes, labels, delta: self.delta, structure: Structure::Unstructured }
    }

    pub fn remove(&mut self, index: usize) {
        self.boxes.remove(index);
        self.labels.remove(index);
    }
}

/// How each direction's fat tubes are populated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fill")]
pub enum TubeFill {
    /// `min(N, slots)` tubes in every fat tube, at random slots.
    Saturated,
    /// Like `Saturated`, then each tube is kept with probability `keep`.
    Random { keep: f64 },
    /// Tubes only through (the neighborhoods of) `count` random hub points.
    Hubs { count: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TubeOptions {
    pub fill: TubeFill,
    /// Directions are `k delta` for `0 <= k delta < angle_range`.
    pub angle_range: f64,
}

impl Default for TubeOptions {
    fn default() -> Self {
        Self { fill: TubeFill::Saturated, angle_range: PI }
    }
}

/// Planar `(delta, 1)`-tubes with `delta`-separated directions, at most `N`
/// per fat `(1/W, 1)`-tube, `W = delta^{-2(1 - alpha)}`.
///
/// For each direction the offsets `s` (distance of the tube axis from the
/// origin) run over the slots `-1/2 + (m + 1/2) delta`; fat tubes tile
/// `[-1/2, 1/2]` in width `1/W`.
pub fn generate_structured_tubes(delta: f64, alpha: f64, n: usize, seed: u64, opts: TubeOptions) -> Result<BoxFamily> {
    if !(delta > 0.0 && delta <= 0.25) {
        return Err(Error::Precondition(format!("delta = {delta} outside (0, 1/4]")));
    }
    if !(0.5 - 1e-12..=1.0 + 1e-12).contains(&alpha) {
        return Err(Error::Precondition(format!("alpha = {alpha} outside [1/2, 1]")));
    }
    let w = delta.powf(-2.0 * (1.0 - alpha));
    let slots = (1.0 / delta).round() as usize;
    let capacity = (1.0 / (w * delta) + 1e-9).floor() as usize;
    if n == 0 || n > capacity {
        return Err(Error::Precondition(format!(
            "N = {n} infeasible: a fat tube holds at most {capacity} delta-separated parallel tubes"
        )));
    }
    let n_dirs = ((opts.angle_range / delta) - 1e-9).ceil().max(1.0) as usize;
    let n_dirs = n_dirs.min((PI / delta).floor() as usize);
    let directions: Vec<f64> = (0..n_dirs).map(|k| k as f64 * delta).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hubs: Vec<(f64, f64)> = match opts.fill {
        TubeFill::Hubs { count } => {
            (0..count).map(|_| (rng.gen_range(-0.25..0.25), rng.gen_range(-0.25..0.25))).collect()
        }
        _ => Vec::new(),
    };
    let fat_of = |slot: usize| -> i64 {
        let s = -0.5 + (slot as f64 + 0.5) * delta;
        ((s + 0.5) * w).floor() as i64
    };
    let mut boxes = Vec::new();
    let mut labels = Vec::new();
    for (d, &theta) in directions.iter().enumerate() {
        let normal = (-theta.sin(), theta.cos());
        let mut by_fat: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
        for slot in 0..slots {
            by_fat.entry(fat_of(slot)).or_default().push(slot);
        }
        for (&fat, members) in &by_fat {
            let chosen: Vec<usize> = match opts.fill {
                TubeFill::Saturated | TubeFill::Random { .. } => {
                    let mut m = members.clone();
                    m.shuffle(&mut rng);
                    m.truncate(n);
                    if let TubeFill::Random { keep } = opts.fill {
                        m.retain(|_| rng.gen::<f64>() < keep);
                    }
                    m
                }
                TubeFill::Hubs { .. } => {
                    let mut near: Vec<(f64, usize)> = members
                        .iter()
                        .filter_map(|&slot| {
                            let s = -0.5 + (slot as f64 + 0.5) * delta;
                            let dist = hubs
                                .iter()
                                .map(|h| (h.0 * normal.0 + h.1 * normal.1 - s).abs())
                                .fold(f64::INFINITY, f64::min);
                            (dist <= 1.5 * delta).then_some((dist, slot))
                        })
                        .collect();
                    near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                    near.into_iter().take(n).map(|(_, s)| s).collect()
                }
            };
            let mut chosen = chosen;
            chosen.sort_unstable();
            for slot in chosen {
                let s = -0.5 + (slot as f64 + 0.5) * delta;
                let tube = OrientedBox::planar(s * normal.0, s * normal.1, theta, 0.5, delta / 2.0, BoxTag::Tube2D)?;
                boxes.push(tube);
                labels.push(BoxLabel { group: 0, direction: d, fat });
            }
        }
    }
    Ok(BoxFamily {
        boxes,
        labels,
        delta,
        structure: Structure::PlanarTubes { alpha, w, per_fat: n, directions },
    })
}

/// `N ceil(W) D`: the largest family the fat-tube lattice admits (`ceil(W)`
/// fat tubes per direction, the last one possibly partial).
pub fn max_tube_family_size(family: &BoxFamily) -> Option<f64> {
    match &family.structure {
        Structure::PlanarTubes { w, per_fat, directions, .. } => {
            Some(*per_fat as f64 * (w - 1e-9).ceil() * directions.len() as f64)
        }
        _ => None,
    }
}

/// Random planar tubes: `directions` distinct angles from the `delta` grid
/// inside `[angle_lo, angle_hi)`, `m` tubes per direction with centers
/// uniform in `[0, 1]^2`.
pub fn generate_random_tubes(
    delta: f64,
    directions: usize,
    m: usize,
    angle_lo: f64,
    angle_hi: f64,
    seed: u64,
) -> Result<BoxFamily> {
    let first = (angle_lo / delta).ceil() as i64;
    let last = ((angle_hi / delta) - 1e-9).ceil() as i64;
    let mut grid: Vec<i64> = (first..last).collect();
    if grid.len() < directions {
        return Err(Error::Precondition(format!(
            "only {} delta-separated directions fit in the angle range",
            grid.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    grid.shuffle(&mut rng);
    grid.truncate(directions);
    grid.sort_unstable();
    let mut boxes = Vec::with_capacity(directions * m);
    let mut labels = Vec::with_capacity(directions * m);
    for (d, k) in grid.iter().enumerate() {
        let theta = *k as f64 * delta;
        for _ in 0..m {
            let (cx, cy) = (rng.gen::<f64>(), rng.gen::<f64>());
            boxes.push(OrientedBox::planar(cx, cy, theta, 0.5, delta / 2.0, BoxTag::Tube2D)?);
            labels.push(BoxLabel { group: 0, direction: d, fat: 0 });
        }
    }
    Ok(BoxFamily { boxes, labels, delta, structure: Structure::Unstructured })
}

/// Number of `delta`-intervals `[k delta, (k + 1) delta]` inside `[a, b]`.
pub fn intervals_in(delta: f64, range: (f64, f64)) -> Vec<usize> {
    let first = (range.0 / delta - 1e-9).ceil().max(0.0) as usize;
    let mut out = Vec::new();
    let mut k = first;
    while (k + 1) as f64 * delta <= range.1 + 1e-12 {
        out.push(k);
        k += 1;
    }
    out
}

/// Vinogradov plates with broad structure, `x`-periodicity of period `1/W`
/// and exactly `N^(i)` plates in every full fat plate.
///
/// For each chosen interval, `N^(i)` base offsets `b` are drawn from the
/// `delta`-slots of `[0, 1/W)`, and plates are centered at
/// `(b + j/W, 1/2, 1/2)` for all `j` with `b + j/W < 1`. The fat plate of
/// index `k` is the set of plates whose `x` lies in `[k/W, (k+1)/W)`; its
/// thickness along the normal is `t_x / W >= W^{-1}/4`.
pub fn generate_vinogradov_family(delta: f64, alpha: f64, m: [usize; 3], n: [usize; 3], seed: u64) -> Result<BoxFamily> {
    if !(alpha > 1.0 / 3.0 && alpha <= 2.0 / 3.0 + 1e-12) {
        return Err(Error::Precondition(format!("alpha = {alpha} outside (1/3, 2/3]")));
    }
    if !(delta > 0.0 && delta <= 1.0 / 8.0) {
        return Err(Error::Precondition(format!("delta = {delta} outside (0, 1/8]")));
    }
    let w = delta.powf(3.0 * alpha - 2.0);
    let period = 1.0 / w;
    let slots = (period / delta + 1e-9).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut boxes = Vec::new();
    let mut labels = Vec::new();
    let mut groups = Vec::with_capacity(3);
    for g in 0..3 {
        let available = intervals_in(delta, BROAD_RANGES[g]);
        if m[g] == 0 || m[g] > available.len() {
            return Err(Error::Precondition(format!(
                "M^({}) = {} but the broad interval holds {} delta-intervals",
                g + 1,
                m[g],
                available.len()
            )));
        }
        if n[g] == 0 || n[g] > slots {
            return Err(Error::Precondition(format!(
                "N^({}) = {} exceeds the {} delta-slots of a fat plate",
                g + 1,
                n[g],
                slots
            )));
        }
        let mut chosen = available.clone();
        chosen.shuffle(&mut rng);
        chosen.truncate(m[g]);
        chosen.sort_unstable();
        for &k in &chosen {
            let interval = Interval::new(k as f64 * delta, delta)?;
            let mut bases: Vec<usize> = (0..slots).collect();
            bases.shuffle(&mut rng);
            bases.truncate(n[g]);
            bases.sort_unstable();
            for b in bases {
                let b = (b as f64 + 0.5) * delta;
                let mut j = 0;
                loop {
                    let x = b + j as f64 * period;
                    if x >= 1.0 {
                        break;
                    }
                    boxes.push(vinogradov_plate(interval, Vec3::new(x, 0.5, 0.5))?);
                    labels.push(BoxLabel { group: g, direction: k, fat: j });
                    j += 1;
                }
            }
        }
        groups.push(BroadGroup { range: BROAD_RANGES[g], intervals: chosen, per_fat: n[g] });
    }
    Ok(BoxFamily { boxes, labels, delta, structure: Structure::Vinogradov { alpha, w, groups } })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AuditCheck {
    Separation,
    Uniformity,
    Periodicity,
    BroadStructure,
    Aspect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditFailure {
    pub check: AuditCheck,
    pub box_ids: Vec<usize>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub pass: bool,
    pub failures: Vec<AuditFailure>,
    /// Largest number of boxes found in one fat box.
    pub max_per_fat: usize,
}

impl AuditReport {
    pub fn failed(&self, check: AuditCheck) -> bool {
        self.failures.iter().any(|f| f.check == check)
    }
}

/// Recount the declared structure from the box geometry alone.
pub fn audit_structure(family: &BoxFamily) -> AuditReport {
    let mut failures = Vec::new();
    let mut max_per_fat = 0;
    for (i, b) in family.boxes.iter().enumerate() {
        if !b.aspect_consistent(4.0) {
            failures.push(AuditFailure {
                check: AuditCheck::Aspect,
                box_ids: vec![i],
                detail: format!("half-dimensions {:?} do not match tag {:?}", b.half, b.tag),
            });
        }
    }
    match &family.structure {
        Structure::Unstructured => {}
        Structure::PlanarTubes { w, per_fat, directions, .. } => {
            audit_tubes(family, *w, *per_fat, directions, &mut failures, &mut max_per_fat)
        }
        Structure::Vinogradov { w, groups, .. } => {
            audit_plates(family, *w, groups, &mut failures, &mut max_per_fat)
        }
    }
    AuditReport { pass: failures.is_empty(), failures, max_per_fat }
}

fn audit_tubes(
    family: &BoxFamily,
    w: f64,
    per_fat: usize,
    directions: &[f64],
    failures: &mut Vec<AuditFailure>,
    max_per_fat: &mut usize,
) {
    let delta = family.delta;
    for a in 0..directions.len() {
        for b in a + 1..directions.len() {
            let gap = (directions[a] - directions[b]).rem_euclid(PI);
            if gap.min(PI - gap) < delta * (1.0 - 1e-9) {
                failures.push(AuditFailure {
                    check: AuditCheck::Separation,
                    box_ids: vec![],
                    detail: format!("directions {a} and {b} are closer than delta"),
                });
            }
        }
    }
    let mut cells: BTreeMap<(usize, i64), Vec<usize>> = BTreeMap::new();
    for (i, t) in family.boxes.iter().enumerate() {
        let theta = t.axes[0].y().atan2(t.axes[0].x()).rem_euclid(PI);
        let dir = directions.iter().position(|&d| {
            let gap = (d - theta).rem_euclid(PI);
            gap.min(PI - gap) < delta / 4.0
        });
        let Some(dir) = dir else {
            failures.push(AuditFailure {
                check: AuditCheck::Separation,
                box_ids: vec![i],
                detail: format!("tube direction {theta} is not a declared direction"),
            });
            continue;
        };
        let d = directions[dir];
        let offset = t.center.x() * -d.sin() + t.center.y() * d.cos();
        let fat = ((offset + 0.5) * w).floor() as i64;
        cells.entry((dir, fat)).or_default().push(i);
    }
    for ((dir, fat), ids) in cells {
        *max_per_fat = (*max_per_fat).max(ids.len());
        if ids.len() > per_fat {
            failures.push(AuditFailure {
                check: AuditCheck::Uniformity,
                detail: format!("fat tube {fat} of direction {dir} holds {} > {per_fat} tubes", ids.len()),
                box_ids: ids,
            });
        }
    }
}

/// Parameter `u` with `t(u)` parallel to the plate normal.
fn normal_parameter(normal: &Vec3) -> f64 {
    let n = if normal.x() < 0.0 { -*normal } else { *normal };
    n.y() / (2.0 * n.x())
}

fn audit_plates(
    family: &BoxFamily,
    w: f64,
    groups: &[BroadGroup],
    failures: &mut Vec<AuditFailure>,
    max_per_fat: &mut usize,
) {
    let delta = family.delta;
    let period = 1.0 / w;
    let mut by_interval: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, s) in family.boxes.iter().enumerate() {
        let u = normal_parameter(&s.axes[0]);
        let k = (u / delta - 0.5).round().max(0.0) as usize;
        let group = groups.iter().position(|g| g.intervals.contains(&k));
        let in_range = group.map(|g| {
            let (a, b) = groups[g].range;
            k as f64 * delta >= a - 1e-12 && (k + 1) as f64 * delta <= b + 1e-12
        });
        if in_range != Some(true) {
            failures.push(AuditFailure {
                check: AuditCheck::BroadStructure,
                box_ids: vec![i],
                detail: format!("plate normal parameter {u:.4} is not in a declared broad interval"),
            });
            continue;
        }
        by_interval.entry(k).or_default().push(i);
    }
    for g in groups {
        for &k in &g.intervals {
            let ids = by_interval.get(&k).cloned().unwrap_or_default();
            // uniformity: exact count in every full fat plate
            let mut windows: HashMap<i64, Vec<usize>> = HashMap::new();
            for &i in &ids {
                let x = family.boxes[i].center.x();
                windows.entry((x / period + 1e-9).floor() as i64).or_default().push(i);
            }
            let full = (w + 1e-9).floor() as i64;
            for win in 0..(w - 1e-9).ceil() as i64 {
                let members = windows.get(&win).cloned().unwrap_or_default();
                *max_per_fat = (*max_per_fat).max(members.len());
                let ok = if win < full { members.len() == g.per_fat } else { members.len() <= g.per_fat };
                if !ok {
                    failures.push(AuditFailure {
                        check: AuditCheck::Uniformity,
                        detail: format!(
                            "interval {k}: fat plate {win} holds {} plates, expected {}",
                            members.len(),
                            g.per_fat
                        ),
                        box_ids: members,
                    });
                }
            }
            // periodicity: translate by +-1/W in x and look for a partner
            let xs: Vec<f64> = ids.iter().map(|&i| family.boxes[i].center.x()).collect();
            for (pos, &i) in ids.iter().enumerate() {
                let x = xs[pos];
                for shift in [period, -period] {
                    let target = x + shift;
                    if !(0.0..1.0).contains(&target) {
                        continue;
                    }
                    if !xs.iter().any(|&y| (y - target).abs() < 1e-9) {
                        failures.push(AuditFailure {
                            check: AuditCheck::Periodicity,
                            box_ids: vec![i],
                            detail: format!("interval {k}: no partner for x = {x:.6} at x = {target:.6}"),
                        });
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tubes_respect_multiplicity() {
        let f = generate_structured_tubes(1.0 / 16.0, 0.75, 2, 1, TubeOptions::default()).unwrap();
        let report = audit_structure(&f);
        assert!(report.pass, "{:?}", report.failures);
        assert_eq!(report.max_per_fat, 2);
        assert!(f.len() as f64 <= max_tube_family_size(&f).unwrap() + 1e-9);
    }

    #[test]
    fn alpha_one_single_tube_per_direction() {
        let f = generate_structured_tubes(1.0 / 16.0, 1.0, 1, 5, TubeOptions::default()).unwrap();
        let report = audit_structure(&f);
        assert!(report.pass);
        assert_eq!(report.max_per_fat, 1);
        if let Structure::PlanarTubes { directions, .. } = &f.structure {
            assert_eq!(f.len(), directions.len());
        }
    }

    #[test]
    fn forced_extra_tube_fails_uniformity() {
        let mut f = generate_structured_tubes(1.0 / 16.0, 0.75, 1, 2, TubeOptions::default()).unwrap();
        // duplicate the neighbor slot of the first tube inside its fat tube
        let t = f.boxes[0];
        let shifted = OrientedBox { center: t.center + t.axes[1] * f.delta, ..t };
        let label = f.labels[0];
        f.boxes.push(shifted);
        f.labels.push(label);
        let mut report = audit_structure(&f);
        if report.pass {
            // the neighbor slot fell into the next fat tube; go the other way
            let last = f.boxes.len() - 1;
            f.boxes[last].center = t.center - t.axes[1] * f.delta;
            report = audit_structure(&f);
        }
        assert!(report.failed(AuditCheck::Uniformity));
    }

    #[test]
    fn vinogradov_periodic_orbits() {
        let delta = 1.0 / 16.0;
        let f = generate_vinogradov_family(delta, 0.5, [2, 2, 2], [2, 2, 2], 7).unwrap();
        assert!(audit_structure(&f).pass);
        // W = 4 is an integer, so |S_I| = N W exactly
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for l in &f.labels {
            *counts.entry(l.direction).or_default() += 1;
        }
        assert!(counts.values().all(|&c| c == 2 * 4));
        let mut broken = f.clone();
        broken.remove(1);
        assert!(audit_structure(&broken).failed(AuditCheck::Periodicity));
    }

    #[test]
    fn two_thirds_has_no_replication() {
        let f = generate_vinogradov_family(1.0 / 16.0, 2.0 / 3.0, [1, 1, 1], [3, 3, 3], 1).unwrap();
        assert_eq!(f.len(), 9);
        assert!(f.labels.iter().all(|l| l.fat == 0));
    }
}
