//! Empirical decoupling lower bounds across scales, plus the refined flat
//! estimate on wave-packet families.

use super::{derive_seed, Check, Outcome};
use crate::config::{ensure, Invalid};
use serde::{Deserialize, Serialize};
use smallcap_core::decoupling::{
    build_extremal, dec_lower_bound_report, refined_flat_gain, CapPartition, DecDomain, ExtremalMode, PacketFamily,
};
use smallcap_core::moments::fit_growth_exponent;
use smallcap_core::records::Table;
use smallcap_core::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "manifold", rename_all = "kebab-case")]
pub enum DecoupleParams {
    /// `scales` are the radii `R`.
    Parabola(PartitionParams),
    /// `scales` are the thicknesses `delta`.
    Cone(PartitionParams),
    /// `scales` are the thicknesses `delta`.
    MomentCurve(PartitionParams),
    /// `scales` are the cap counts `L`.
    Flat(PartitionParams),
    RefinedFlat(RefinedFlatParams),
}

impl Default for DecoupleParams {
    fn default() -> Self {
        DecoupleParams::Flat(PartitionParams { scales: vec![4.0, 8.0, 16.0], ..PartitionParams::default() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Extremal {
    Indicator,
    RandomPhase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormDomain {
    Torus,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionParams {
    pub scales: Vec<f64>,
    /// Cap-size exponent (parabola and moment curve only).
    pub alpha: f64,
    pub samples_per_cap: usize,
    pub p_values: Vec<f64>,
    /// Outer exponent; defaults to `p`.
    pub r: Option<f64>,
    pub extremal: Extremal,
    pub domain: NormDomain,
    pub radius_factor: f64,
    pub samples: usize,
    /// Require `lower_bound >= c * L^{1 - 1/p - 1/r}` on every row.
    pub min_sharp_ratio: Option<f64>,
    /// Require the fitted growth exponent (per `p`) to stay below this.
    pub max_slope: Option<f64>,
}

impl Default for PartitionParams {
    fn default() -> Self {
        Self {
            scales: vec![16.0, 32.0, 64.0],
            alpha: 1.0,
            samples_per_cap: 4,
            p_values: vec![4.0],
            r: None,
            extremal: Extremal::Indicator,
            domain: NormDomain::Torus,
            radius_factor: 1.0,
            samples: 200_000,
            min_sharp_ratio: None,
            max_slope: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefinedFlatParams {
    pub l_values: Vec<usize>,
    /// Packets per interval, as powers of `L` (`0, 1, 2` give `1, L, L^2`).
    pub multiplicity_exponents: Vec<u32>,
    pub taus: usize,
    pub seeds: usize,
    pub p_values: Vec<f64>,
    pub max_gain: Option<f64>,
}

impl Default for RefinedFlatParams {
    fn default() -> Self {
        Self {
            l_values: vec![4, 8],
            multiplicity_exponents: vec![0, 1, 2],
            taus: 6,
            seeds: 10,
            p_values: vec![4.0, 6.0],
            max_gain: None,
        }
    }
}

fn check_exponents(ps: &[f64]) -> std::result::Result<(), Invalid> {
    ensure(!ps.is_empty(), "p_values", || "empty list".into())?;
    ensure(ps.iter().all(|&p| p >= 2.0 && p.is_finite()), "p_values", || "every p must be >= 2".into())
}

impl DecoupleParams {
    pub fn validate(&self) -> std::result::Result<(), Invalid> {
        match self {
            DecoupleParams::RefinedFlat(q) => {
                ensure(!q.l_values.is_empty(), "l_values", || "empty list".into())?;
                ensure(q.l_values.iter().all(|&l| (1..=64).contains(&l)), "l_values", || "L must be in 1..=64".into())?;
                ensure(!q.multiplicity_exponents.is_empty(), "multiplicity_exponents", || "empty list".into())?;
                ensure(q.multiplicity_exponents.iter().all(|&k| k <= 2), "multiplicity_exponents", || {
                    "N = L^k needs k <= 2".into()
                })?;
                ensure(q.taus >= 1, "taus", || "at least one interval".into())?;
                ensure(q.seeds >= 1, "seeds", || "at least one seed".into())?;
                check_exponents(&q.p_values)
            }
            DecoupleParams::Parabola(q) | DecoupleParams::Cone(q) | DecoupleParams::MomentCurve(q) | DecoupleParams::Flat(q) => {
                ensure(!q.scales.is_empty(), "scales", || "empty list".into())?;
                let scales_ok = match self {
                    DecoupleParams::Parabola(_) => q.scales.iter().all(|&r| r >= 1.0),
                    DecoupleParams::Cone(_) => q.scales.iter().all(|&d| d > 0.0 && d <= 0.25),
                    DecoupleParams::MomentCurve(_) => q.scales.iter().all(|&d| d > 0.0 && d < 1.0),
                    _ => q.scales.iter().all(|&l| l >= 1.0 && l.fract() == 0.0),
                };
                ensure(scales_ok, "scales", || "a scale lies outside the partition's range".into())?;
                match self {
                    DecoupleParams::Parabola(_) => {
                        ensure((0.5..=1.0).contains(&q.alpha), "alpha", || format!("{} not in [1/2, 1]", q.alpha))?
                    }
                    DecoupleParams::MomentCurve(_) => {
                        ensure((1.0 / 3.0..=1.0).contains(&q.alpha), "alpha", || format!("{} not in [1/3, 1]", q.alpha))?
                    }
                    _ => {}
                }
                ensure(q.samples_per_cap >= 4, "samples_per_cap", || "at least 4 samples per cap".into())?;
                check_exponents(&q.p_values)?;
                if let Some(r) = q.r {
                    ensure(r >= 2.0 && r.is_finite(), "r", || format!("{r} must be >= 2"))?;
                }
                let cone = matches!(self, DecoupleParams::Cone(_));
                ensure(!(cone && q.domain == NormDomain::Torus), "domain", || "cone norms must be sampled".into())?;
                if q.domain == NormDomain::Torus {
                    ensure(q.p_values.iter().all(|p| (p / 2.0).fract() == 0.0), "p_values", || {
                        "torus norms need even p".into()
                    })?;
                } else {
                    ensure(q.samples >= 100, "samples", || "at least 100 samples".into())?;
                    ensure(q.radius_factor > 0.0, "radius_factor", || "must be positive".into())?;
                }
                if q.max_slope.is_some() {
                    ensure(q.scales.len() >= 3, "scales", || "a slope fit needs at least 3 values".into())?;
                }
                Ok(())
            }
        }
    }
}

pub fn run(params: &DecoupleParams, seed: u64) -> Result<Outcome> {
    match params {
        DecoupleParams::RefinedFlat(q) => refined(q, seed),
        DecoupleParams::Parabola(q) => partitions(q, seed, |s| (s, CapPartition::parabola(s, q.alpha, q.samples_per_cap))),
        DecoupleParams::Cone(q) => partitions(q, seed, |s| (1.0 / s, CapPartition::cone(s, q.samples_per_cap))),
        DecoupleParams::MomentCurve(q) => {
            partitions(q, seed, |s| (1.0 / s, CapPartition::moment_curve(s, q.alpha, q.samples_per_cap)))
        }
        DecoupleParams::Flat(q) => partitions(q, seed, |s| (s, CapPartition::flat(s as usize, q.samples_per_cap))),
    }
}

/// `build` maps a configured scale to the growth variable used for fits
/// (`R`, `1/delta` or `L`) and the partition at that scale.
fn partitions(
    q: &PartitionParams,
    seed: u64,
    build: impl Fn(f64) -> (f64, Result<CapPartition>),
) -> Result<Outcome> {
    let mut out = Outcome::new(Table::new(["scale", "size", "p", "r", "caps", "lower_bound", "norm", "norm_error"]));
    let mut rows: Vec<Vec<(f64, f64)>> = vec![Vec::new(); q.p_values.len()];
    let mut worst_sharp = f64::INFINITY;
    for (i, &scale) in q.scales.iter().enumerate() {
        let (size, part) = build(scale);
        let part = part?;
        let mode = match q.extremal {
            Extremal::Indicator => ExtremalMode::IndicatorLike,
            Extremal::RandomPhase => {
                let k = derive_seed(seed, 2 * i as u64);
                out.seeds.push(k);
                ExtremalMode::RandomPhase(k)
            }
        };
        let f = build_extremal(&part, mode)?;
        let domain = match q.domain {
            NormDomain::Torus => DecDomain::Torus,
            NormDomain::Sampled => {
                let k = derive_seed(seed, 2 * i as u64 + 1);
                out.seeds.push(k);
                part.sampled_domain(q.radius_factor, q.samples, k)
            }
        };
        for (j, &p) in q.p_values.iter().enumerate() {
            let r = q.r.unwrap_or(p);
            let rep = dec_lower_bound_report(&f, p, r, &domain)?;
            out.table.push(vec![
                scale,
                size,
                p,
                r,
                rep.caps as f64,
                rep.lower_bound,
                rep.norm.norm,
                rep.norm.norm_error,
            ]);
            rows[j].push((size, rep.lower_bound));
            if q.min_sharp_ratio.is_some() {
                let target = (rep.caps as f64).powf(1.0 - 1.0 / p - 1.0 / r);
                worst_sharp = worst_sharp.min(rep.lower_bound / target);
            }
        }
    }
    if let Some(c) = q.min_sharp_ratio {
        out.summary.insert("min_sharp_ratio".into(), worst_sharp);
        out.checks.push(Check::at_least("lower bound over N^(1-1/p-1/r)", worst_sharp, c));
    }
    if q.scales.len() >= 3 {
        for (j, &p) in q.p_values.iter().enumerate() {
            let fit = fit_growth_exponent(&rows[j])?;
            out.summary.insert(format!("slope_p{p}"), fit.slope);
            if let Some(hi) = q.max_slope {
                out.checks.push(Check::at_most(format!("growth exponent at p={p}"), fit.slope, hi));
            }
        }
    }
    Ok(out)
}

fn refined(q: &RefinedFlatParams, seed: u64) -> Result<Outcome> {
    let mut out = Outcome::new(Table::new(["L", "N", "p", "max_gain", "mean_gain"]));
    let mut worst: f64 = 0.0;
    let mut index = 0u64;
    for &l in &q.l_values {
        for &k in &q.multiplicity_exponents {
            let n = l.pow(k);
            let families: Vec<PacketFamily> = (0..q.seeds)
                .map(|_| {
                    let s = derive_seed(seed, index);
                    index += 1;
                    out.seeds.push(s);
                    PacketFamily::random(l, n, q.taus, s)
                })
                .collect::<Result<_>>()?;
            for &p in &q.p_values {
                let mut max: f64 = 0.0;
                let mut total = 0.0;
                for fam in &families {
                    let (lhs, rhs) = refined_flat_gain(fam, p)?;
                    max = max.max(lhs / rhs);
                    total += lhs / rhs;
                }
                out.table.push(vec![l as f64, n as f64, p, max, total / families.len() as f64]);
                worst = worst.max(max);
            }
        }
    }
    out.summary.insert("max_gain".into(), worst);
    if let Some(limit) = q.max_gain {
        out.checks.push(Check::at_most("refined flat gain", worst, limit));
    }
    Ok(out)
}
