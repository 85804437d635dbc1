//! Tube and plate incidence experiments: linear, bilinear, refined planar
//! and trilinear rich-cube counts, and the plate intersection geometry.

use super::{derive_seed, spread, Check, Outcome};
use crate::config::{ensure, Invalid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use smallcap_core::geometry::{
    audit_structure, count_rich_cubes, generate_random_tubes, generate_structured_tubes, generate_vinogradov_family,
    intervals_in, kakeya_l2_overlap, max_tube_family_size, plank_in_plate_check, plate_intersection_volume,
    rasterized_l2_overlap, vinogradov_plate, BoxFamily, CubeGrid, Interval, RichCubeHistogram, Structure, TubeFill,
    TubeOptions, Vec3, BROAD_RANGES,
};
use smallcap_core::records::Table;
use smallcap_core::{Error, Result};
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum KakeyaParams {
    Linear(LinearParams),
    Bilinear(BilinearParams),
    RefinedPlanar(RefinedPlanarParams),
    Trilinear(TrilinearParams),
    Plates(PlateParams),
}

impl Default for KakeyaParams {
    fn default() -> Self {
        KakeyaParams::Linear(LinearParams::default())
    }
}

/// Random tube families over all directions; `||sum 1_T||_2^2` against
/// `log(1/delta) m sum |T|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearParams {
    pub delta: f64,
    pub directions: usize,
    /// Tubes per direction, cycled over the families.
    pub multiplicities: Vec<usize>,
    pub families: usize,
    /// Raster cell is `delta / raster_refinement` (0 skips the raster).
    pub raster_refinement: usize,
    pub max_constant: Option<f64>,
    pub max_raster_gap: Option<f64>,
}

impl Default for LinearParams {
    fn default() -> Self {
        Self {
            delta: 1.0 / 64.0,
            directions: 64,
            multiplicities: vec![1, 2, 4],
            families: 10,
            raster_refinement: 8,
            max_constant: None,
            max_raster_gap: None,
        }
    }
}

/// Two transverse random families; bilinear rich squares against
/// `|T1| |T2| / (r1 r2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BilinearParams {
    pub delta: f64,
    /// Half-width of each angular window (first centered at `window`, the
    /// second at `pi/2`).
    pub window: f64,
    /// Directions per family; defaults to every grid direction of the window.
    pub directions: Option<usize>,
    pub multiplicity: usize,
    pub families: usize,
    pub max_constant: Option<f64>,
}

impl Default for BilinearParams {
    fn default() -> Self {
        Self { delta: 1.0 / 32.0, window: 0.3, directions: None, multiplicity: 4, families: 10, max_constant: None }
    }
}

/// Structured tubes; `|Q_r| r^2 W / (|T| |T_max|)` for dyadic `r >= c N W`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefinedPlanarParams {
    pub alpha_values: Vec<f64>,
    pub delta_values: Vec<f64>,
    pub per_fat: usize,
    /// Hub points the tubes pass through (0: saturated fill).
    pub hubs: usize,
    pub seeds: usize,
    /// Richness threshold factor `c` in `r >= c N W`.
    pub richness_factor: f64,
    pub max_spread: Option<f64>,
}

impl Default for RefinedPlanarParams {
    fn default() -> Self {
        Self {
            alpha_values: vec![0.5, 0.75],
            delta_values: vec![1.0 / 16.0, 1.0 / 32.0],
            per_fat: 1,
            hubs: 3,
            seeds: 2,
            richness_factor: 4.0,
            max_spread: None,
        }
    }
}

/// Structured Vinogradov plate families with the largest admissible `M`
/// and `N`; trilinear rich cubes against
/// `(NM/(r^2 delta))^{(4-6a)/(3a-1)} (NM/r)^3 W`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrilinearParams {
    pub alpha: f64,
    pub delta_values: Vec<f64>,
    pub seeds: usize,
    pub max_spread: Option<f64>,
}

impl Default for TrilinearParams {
    fn default() -> Self {
        Self { alpha: 0.5, delta_values: vec![1.0 / 16.0, 1.0 / 32.0], seeds: 2, max_spread: None }
    }
}

/// Random centered plate pairs (volume against `delta^2 / angle`) and
/// shrunken planks inside plates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlateParams {
    pub delta: f64,
    pub pairs: usize,
    /// Pairs closer than `min_angle_factor * delta` in angle are redrawn.
    pub min_angle_factor: f64,
    pub max_ratio: Option<f64>,
    pub plank_delta: f64,
    pub plank_shrink: f64,
    pub plank_pairs: usize,
}

impl Default for PlateParams {
    fn default() -> Self {
        Self {
            delta: 1.0 / 64.0,
            pairs: 50,
            min_angle_factor: 4.0,
            max_ratio: None,
            plank_delta: 1.0 / 256.0,
            plank_shrink: 0.05,
            plank_pairs: 50,
        }
    }
}

fn positive_delta(d: f64, max: f64, key: &'static str) -> std::result::Result<(), Invalid> {
    ensure(d > 0.0 && d <= max, key, || format!("{d} not in (0, {max}]"))
}

impl KakeyaParams {
    pub fn validate(&self) -> std::result::Result<(), Invalid> {
        match self {
            KakeyaParams::Linear(q) => {
                positive_delta(q.delta, 0.25, "delta")?;
                ensure(q.directions >= 1 && q.directions as f64 <= PI / q.delta, "directions", || {
                    format!("at most pi/delta = {} directions", (PI / q.delta).floor())
                })?;
                ensure(!q.multiplicities.is_empty(), "multiplicities", || "empty list".into())?;
                ensure(q.multiplicities.iter().all(|&m| (1..=64).contains(&m)), "multiplicities", || {
                    "each multiplicity must be in 1..=64".into()
                })?;
                ensure(q.families >= 1, "families", || "at least one family".into())?;
                ensure(q.raster_refinement <= 32, "raster_refinement", || "at most 32".into())?;
                ensure(q.max_raster_gap.is_none() || q.raster_refinement > 0, "max_raster_gap", || {
                    "needs a raster (raster_refinement > 0)".into()
                })
            }
            KakeyaParams::Bilinear(q) => {
                positive_delta(q.delta, 0.25, "delta")?;
                ensure(q.window > 0.0 && q.window < PI / 4.0, "window", || "must lie in (0, pi/4)".into())?;
                ensure(window_directions(q.delta, q.window) >= 1, "window", || "no grid direction fits".into())?;
                if let Some(d) = q.directions {
                    ensure(d >= 1 && d <= window_directions(q.delta, q.window), "directions", || {
                        format!("at most {} directions fit the window", window_directions(q.delta, q.window))
                    })?;
                }
                ensure((1..=64).contains(&q.multiplicity), "multiplicity", || "must be in 1..=64".into())?;
                ensure(q.families >= 1, "families", || "at least one family".into())
            }
            KakeyaParams::RefinedPlanar(q) => {
                ensure(!q.alpha_values.is_empty(), "alpha_values", || "empty list".into())?;
                ensure(q.alpha_values.iter().all(|a| (0.5..=1.0).contains(a)), "alpha_values", || {
                    "every alpha must lie in [1/2, 1]".into()
                })?;
                ensure(!q.delta_values.is_empty(), "delta_values", || "empty list".into())?;
                ensure(q.delta_values.iter().all(|&d| d > 0.0 && d <= 0.25), "delta_values", || {
                    "every delta must lie in (0, 1/4]".into()
                })?;
                ensure(q.per_fat >= 1, "per_fat", || "at least one tube per fat tube".into())?;
                ensure(q.seeds >= 1, "seeds", || "at least one seed".into())?;
                ensure(q.richness_factor > 0.0, "richness_factor", || "must be positive".into())
            }
            KakeyaParams::Trilinear(q) => {
                ensure(q.alpha > 1.0 / 3.0 && q.alpha <= 2.0 / 3.0, "alpha", || format!("{} not in (1/3, 2/3]", q.alpha))?;
                ensure(!q.delta_values.is_empty(), "delta_values", || "empty list".into())?;
                ensure(q.delta_values.iter().all(|&d| d >= 1.0 / 64.0 && d <= 0.125), "delta_values", || {
                    "every delta must lie in [1/64, 1/8]".into()
                })?;
                ensure(q.seeds >= 1, "seeds", || "at least one seed".into())
            }
            KakeyaParams::Plates(q) => {
                positive_delta(q.delta, 0.125, "delta")?;
                ensure(q.min_angle_factor >= 0.0 && q.min_angle_factor * q.delta < 0.5, "min_angle_factor", || {
                    "angle floor must stay below 1/2".into()
                })?;
                positive_delta(q.plank_delta, 0.125, "plank_delta")?;
                ensure(q.plank_shrink > 0.0, "plank_shrink", || "must be positive".into())?;
                ensure(q.pairs + q.plank_pairs >= 1, "pairs", || "nothing to do".into())
            }
        }
    }
}

pub fn run(params: &KakeyaParams, seed: u64) -> Result<Outcome> {
    match params {
        KakeyaParams::Linear(q) => linear(q, seed),
        KakeyaParams::Bilinear(q) => bilinear(q, seed),
        KakeyaParams::RefinedPlanar(q) => refined_planar(q, seed),
        KakeyaParams::Trilinear(q) => trilinear(q, seed),
        KakeyaParams::Plates(q) => plates(q, seed),
    }
}

fn linear(q: &LinearParams, seed: u64) -> Result<Outcome> {
    let mut out =
        Outcome::new(Table::new(["family", "m", "tubes", "value", "total_measure", "constant", "raster", "raster_gap"]));
    let log = (1.0 / q.delta).ln();
    let (mut worst, mut worst_gap) = (0.0f64, 0.0f64);
    for k in 0..q.families {
        let m = q.multiplicities[k % q.multiplicities.len()];
        let s = derive_seed(seed, k as u64);
        out.seeds.push(s);
        let f = generate_random_tubes(q.delta, q.directions, m, 0.0, PI, s)?;
        let rep = kakeya_l2_overlap(&f)?;
        let constant = rep.value / (log * m as f64 * rep.total_measure);
        let (raster, gap) = if q.raster_refinement > 0 {
            let v = rasterized_l2_overlap(&f, q.delta / q.raster_refinement as f64)?;
            (v, (v / rep.value - 1.0).abs())
        } else {
            (0.0, 0.0)
        };
        out.table.push(vec![k as f64, m as f64, f.len() as f64, rep.value, rep.total_measure, constant, raster, gap]);
        worst = worst.max(constant);
        worst_gap = worst_gap.max(gap);
    }
    out.summary.insert("max_constant".into(), worst);
    out.summary.insert("max_raster_gap".into(), worst_gap);
    if let Some(c) = q.max_constant {
        out.checks.push(Check::at_most("overlap / (log(1/delta) m sum|T|)", worst, c));
    }
    if let Some(g) = q.max_raster_gap {
        out.checks.push(Check::at_most("raster vs pairwise relative gap", worst_gap, g));
    }
    Ok(out)
}

/// Grid directions `k delta` available in both windows, counted the way the
/// generator counts them (the second window is not aligned with the grid).
fn window_directions(delta: f64, window: f64) -> usize {
    let count = |lo: f64, hi: f64| {
        let first = (lo / delta).ceil() as i64;
        let last = ((hi / delta) - 1e-9).ceil() as i64;
        (last - first).max(0) as usize
    };
    count(0.0, 2.0 * window).min(count(PI / 2.0 - window, PI / 2.0 + window))
}

fn dyadic_up_to(max: u32) -> Vec<u32> {
    (0..32).map(|e| 1u32 << e).take_while(|&r| r <= max.max(1)).collect()
}

fn bilinear(q: &BilinearParams, seed: u64) -> Result<Outcome> {
    let mut out = Outcome::new(Table::new(["family", "tubes_1", "tubes_2", "r1", "r2", "count", "constant"]));
    let dirs = q.directions.unwrap_or_else(|| window_directions(q.delta, q.window));
    let grid = CubeGrid::region(Vec3::new(-0.5, -0.5, 0.0), 2.0, q.delta, true)?;
    let mut worst: f64 = 0.0;
    for k in 0..q.families {
        let (s1, s2) = (derive_seed(seed, 2 * k as u64), derive_seed(seed, 2 * k as u64 + 1));
        out.seeds.extend([s1, s2]);
        let t1 = generate_random_tubes(q.delta, dirs, q.multiplicity, 0.0, 2.0 * q.window, s1)?;
        let t2 = generate_random_tubes(q.delta, dirs, q.multiplicity, PI / 2.0 - q.window, PI / 2.0 + q.window, s2)?;
        let h = count_rich_cubes(&[&t1, &t2], &grid)?;
        let (max1, max2) = max_per_family(&h);
        let (n1, n2) = (t1.len() as f64, t2.len() as f64);
        for &r1 in &dyadic_up_to(max1) {
            for &r2 in &dyadic_up_to(max2) {
                let count = h.at_least(&[r1, r2]);
                let constant = count as f64 * r1 as f64 * r2 as f64 / (n1 * n2);
                out.table.push(vec![k as f64, n1, n2, r1 as f64, r2 as f64, count as f64, constant]);
                worst = worst.max(constant);
            }
        }
    }
    out.summary.insert("max_constant".into(), worst);
    out.summary.insert("directions".into(), dirs as f64);
    if let Some(c) = q.max_constant {
        out.checks.push(Check::at_most("rich squares * r1 r2 / (|T1| |T2|)", worst, c));
    }
    Ok(out)
}

fn max_per_family(h: &RichCubeHistogram) -> (u32, u32) {
    h.counts.keys().fold((0, 0), |(a, b), r| (a.max(r[0]), b.max(r[1])))
}

fn refined_planar(q: &RefinedPlanarParams, seed: u64) -> Result<Outcome> {
    let mut out = Outcome::new(Table::new([
        "alpha", "delta", "seed_index", "tubes", "max_tubes", "w", "r", "count", "ratio", "in_range",
    ]));
    let mut index = 0u64;
    let mut all_spread: f64 = 1.0;
    for &alpha in &q.alpha_values {
        let mut constants = Vec::new();
        let mut constants_all_r = Vec::new();
        for &delta in &q.delta_values {
            let (mut c, mut c_all, mut levels) = (0.0f64, 0.0f64, 0usize);
            for k in 0..q.seeds {
                let s = derive_seed(seed, index);
                index += 1;
                out.seeds.push(s);
                let fill = if q.hubs == 0 { TubeFill::Saturated } else { TubeFill::Hubs { count: q.hubs } };
                let f = generate_structured_tubes(delta, alpha, q.per_fat, s, TubeOptions { fill, ..TubeOptions::default() })?;
                let Structure::PlanarTubes { w, .. } = f.structure else {
                    return Err(Error::InvalidSpec("structured tubes lost their structure record".into()));
                };
                let t_max = max_tube_family_size(&f).unwrap_or(f.len() as f64);
                let grid = CubeGrid::region(Vec3::new(-1.0, -1.0, 0.0), 2.0, delta, true)?;
                let h = count_rich_cubes(&[&f], &grid)?;
                let threshold = q.richness_factor * q.per_fat as f64 * w;
                for &r in &dyadic_up_to(h.max_richness()) {
                    let count = h.at_least(&[r]);
                    let ratio = count as f64 * (r as f64).powi(2) * w / (f.len() as f64 * t_max);
                    let in_range = r as f64 >= threshold;
                    out.table.push(vec![
                        alpha,
                        delta,
                        k as f64,
                        f.len() as f64,
                        t_max,
                        w,
                        r as f64,
                        count as f64,
                        ratio,
                        if in_range { 1.0 } else { 0.0 },
                    ]);
                    c_all = c_all.max(ratio);
                    if in_range {
                        c = c.max(ratio);
                        levels += 1;
                    }
                }
            }
            out.summary.insert(format!("constant_a{alpha}_d{delta}"), c);
            out.summary.insert(format!("constant_all_r_a{alpha}_d{delta}"), c_all);
            out.summary.insert(format!("levels_in_range_a{alpha}_d{delta}"), levels as f64);
            constants.push(c);
            constants_all_r.push(c_all);
        }
        let sp = spread(&constants);
        out.summary.insert(format!("spread_a{alpha}"), sp);
        out.summary.insert(format!("spread_all_r_a{alpha}"), spread(&constants_all_r));
        all_spread = all_spread.max(sp);
        if let Some(m) = q.max_spread {
            out.checks.push(Check::at_most(format!("constant spread across delta at alpha={alpha}"), sp, m));
        }
    }
    out.summary.insert("max_spread".into(), all_spread);
    Ok(out)
}

fn trilinear(q: &TrilinearParams, seed: u64) -> Result<Outcome> {
    let mut out = Outcome::new(Table::new([
        "delta", "seed_index", "m", "n", "plates", "r", "count", "rhs", "ratio", "trivial_ratio",
    ]));
    let a = q.alpha;
    let exponent = (4.0 - 6.0 * a) / (3.0 * a - 1.0);
    let mut constants = Vec::new();
    let (mut audits_ok, mut trivial_worst) = (true, 0.0f64);
    let mut index = 0u64;
    for &delta in &q.delta_values {
        let w = delta.powf(3.0 * a - 2.0);
        let m = intervals_in(delta, BROAD_RANGES[0]).len();
        let n = ((1.0 / w) / delta + 1e-9).floor() as usize;
        let mut c: f64 = 0.0;
        for k in 0..q.seeds {
            let s = derive_seed(seed, index);
            index += 1;
            out.seeds.push(s);
            let fam = generate_vinogradov_family(delta, a, [m; 3], [n; 3], s)?;
            let audit = audit_structure(&fam);
            audits_ok &= audit.pass;
            let groups: Vec<BoxFamily> = (0..3).map(|g| fam.group(g)).collect();
            let refs: Vec<&BoxFamily> = groups.iter().collect();
            let h = count_rich_cubes(&refs, &CubeGrid::unit(delta, false)?)?;
            let sizes: f64 = groups.iter().map(|g| g.len() as f64).product();
            let nm = (n * m) as f64;
            for &r in &dyadic_up_to(h.max_richness()) {
                let rf = r as f64;
                let count = h.at_least(&[r, r, r]) as f64;
                let rhs = (nm / (rf * rf * delta)).powf(exponent) * (nm / rf).powi(3) * w;
                let trivial = count * rf.powi(3) / sizes;
                out.table.push(vec![
                    delta,
                    k as f64,
                    m as f64,
                    n as f64,
                    fam.len() as f64,
                    rf,
                    count,
                    rhs,
                    count / rhs,
                    trivial,
                ]);
                c = c.max(count / rhs);
                trivial_worst = trivial_worst.max(trivial);
            }
        }
        out.summary.insert(format!("constant_d{delta}"), c);
        constants.push(c);
    }
    let sp = spread(&constants);
    out.summary.insert("spread".into(), sp);
    out.summary.insert("max_trivial_ratio".into(), trivial_worst);
    out.checks.push(Check::holds("structure audits", audits_ok));
    if let Some(mx) = q.max_spread {
        out.checks.push(Check::at_most("constant spread across delta", sp, mx));
    }
    Ok(out)
}

fn plates(q: &PlateParams, seed: u64) -> Result<Outcome> {
    let mut out = Outcome::new(Table::new(["kind", "a", "b", "angle", "volume", "predicted", "ratio"]));
    let center = Vec3::new(0.5, 0.5, 0.5);
    let s = derive_seed(seed, 0);
    out.seeds.push(s);
    let mut rng = ChaCha8Rng::seed_from_u64(s);
    let (mut lo_ratio, mut hi_ratio) = (f64::INFINITY, 0.0f64);
    let mut done = 0;
    while done < q.pairs {
        let a = rng.gen_range(0.0..1.0 - q.delta);
        let b = rng.gen_range(0.0..1.0 - q.delta);
        let s1 = vinogradov_plate(Interval::new(a, q.delta)?, center)?;
        let s2 = vinogradov_plate(Interval::new(b, q.delta)?, center)?;
        let r = plate_intersection_volume(&s1, &s2)?;
        if r.angle < q.min_angle_factor * q.delta {
            continue;
        }
        let ratio = r.volume / r.predicted;
        out.table.push(vec![0.0, a, b, r.angle, r.volume, r.predicted, ratio]);
        lo_ratio = lo_ratio.min(ratio);
        hi_ratio = hi_ratio.max(ratio);
        done += 1;
    }
    let d = q.plank_delta;
    let mut inside = 0usize;
    for _ in 0..q.plank_pairs {
        let len = rng.gen_range(d..=d.sqrt());
        let t0 = rng.gen_range(0.0..=1.0 - len);
        let i0 = rng.gen_range(t0..=t0 + len - d);
        let ok = plank_in_plate_check(Interval::new(t0, len)?, Interval::new(i0, d)?, q.plank_shrink)?;
        out.table.push(vec![1.0, t0, i0, len, if ok { 1.0 } else { 0.0 }, 1.0, 0.0]);
        inside += ok as usize;
    }
    if q.pairs > 0 {
        out.summary.insert("min_ratio".into(), lo_ratio);
        out.summary.insert("max_ratio".into(), hi_ratio);
        if let Some(m) = q.max_ratio {
            out.checks.push(Check::at_least("smallest volume / (delta^2 / angle)", lo_ratio, 1.0 / m));
            out.checks.push(Check::at_most("largest volume / (delta^2 / angle)", hi_ratio, m));
        }
    }
    if q.plank_pairs > 0 {
        out.summary.insert("planks_inside".into(), inside as f64);
        out.checks.push(Check::at_least("planks inside their plates", inside as f64, q.plank_pairs as f64));
    }
    Ok(out)
}
