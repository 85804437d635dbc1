//! Moment scans: slab integrals over `N` and small-cap cube averages over `R`.

use super::{derive_seed, Check, Outcome};
use crate::config::{ensure, Invalid};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use smallcap_core::expsum::{CurveSpec, ExpSumSpec, Scaling};
use smallcap_core::moments::{
    compute, cube_moment, fit_growth_exponent, CubeMethod, Method, MomentEstimate, MomentQuery, SlabDomain,
};
use smallcap_core::records::Table;
use smallcap_core::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coefficients {
    Ones,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentMethod {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scan", rename_all = "kebab-case")]
pub enum MomentsParams {
    Slab(SlabParams),
    SmallCap(SmallCapParams),
}

impl Default for MomentsParams {
    fn default() -> Self {
        MomentsParams::Slab(SlabParams::default())
    }
}

/// `int over [0,1]^{n-1} x [tau, tau + N^-beta]` of `|S_N|^p` for each `N`
/// (the full torus when `beta = 0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlabParams {
    pub dimension: usize,
    pub n_values: Vec<usize>,
    pub p: f64,
    pub beta: f64,
    pub tau: f64,
    pub coefficients: Coefficients,
    pub method: MomentMethod,
    pub samples: usize,
    /// Divide by the domain volume.
    pub normalized: bool,
    pub slope_min: Option<f64>,
    pub slope_max: Option<f64>,
    pub min_r_squared: Option<f64>,
}

impl Default for SlabParams {
    fn default() -> Self {
        Self {
            dimension: 3,
            n_values: vec![8, 16, 32],
            p: 10.0,
            beta: 1.0,
            tau: 0.0,
            coefficients: Coefficients::Ones,
            method: MomentMethod::Exact,
            samples: 1_000_000,
            normalized: false,
            slope_min: None,
            slope_max: None,
            min_r_squared: None,
        }
    }
}

/// `L^p_#` averages over the cube `[0, R]^2` of parabola sums with
/// `floor(R^alpha)` frequencies `R^-alpha` apart and random unimodular
/// coefficients, one scan per coefficient draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmallCapParams {
    pub alpha: f64,
    pub r_values: Vec<f64>,
    /// Defaults to `2 + 2 / alpha`.
    pub p: Option<f64>,
    pub draws: usize,
    pub samples: usize,
    pub slope_max: Option<f64>,
}

impl Default for SmallCapParams {
    fn default() -> Self {
        Self { alpha: 0.5, r_values: vec![16.0, 32.0, 64.0, 128.0], p: None, draws: 3, samples: 100_000, slope_max: None }
    }
}

impl MomentsParams {
    pub fn validate(&self) -> std::result::Result<(), Invalid> {
        match self {
            MomentsParams::Slab(s) => {
                ensure((2..=6).contains(&s.dimension), "dimension", || format!("{} not in 2..=6", s.dimension))?;
                ensure(!s.n_values.is_empty(), "n_values", || "empty list".into())?;
                ensure(s.n_values.iter().all(|&n| n >= 1), "n_values", || "N must be >= 1".into())?;
                ensure(s.p >= 2.0 && s.p.is_finite(), "p", || format!("{} must be >= 2", s.p))?;
                ensure(s.beta >= 0.0 && s.beta.is_finite(), "beta", || format!("{} must be >= 0", s.beta))?;
                ensure((0.0..1.0).contains(&s.tau), "tau", || format!("{} not in [0, 1)", s.tau))?;
                if s.method == MomentMethod::Exact {
                    let half = s.p / 2.0;
                    ensure(half.fract() == 0.0, "p", || format!("exact mode needs an even p, got {}", s.p))?;
                } else {
                    ensure(s.samples >= 100, "samples", || "at least 100 samples".into())?;
                }
                if s.slope_min.is_some() || s.slope_max.is_some() || s.min_r_squared.is_some() {
                    ensure(s.n_values.len() >= 3, "n_values", || "a slope fit needs at least 3 values".into())?;
                }
            }
            MomentsParams::SmallCap(c) => {
                ensure((0.5..=1.0).contains(&c.alpha), "alpha", || format!("{} not in [1/2, 1]", c.alpha))?;
                ensure(!c.r_values.is_empty(), "r_values", || "empty list".into())?;
                ensure(c.r_values.iter().all(|&r| r >= 1.0), "r_values", || "R must be >= 1".into())?;
                if let Some(p) = c.p {
                    ensure(p >= 2.0 && p.is_finite(), "p", || format!("{p} must be >= 2"))?;
                }
                ensure(c.draws >= 1, "draws", || "at least one draw".into())?;
                ensure(c.samples >= 100, "samples", || "at least 100 samples".into())?;
                if c.slope_max.is_some() {
                    ensure(c.r_values.len() >= 3, "r_values", || "a slope fit needs at least 3 values".into())?;
                }
            }
        }
        Ok(())
    }
}

pub fn run(params: &MomentsParams, seed: u64) -> Result<Outcome> {
    match params {
        MomentsParams::Slab(s) => slab(s, seed),
        MomentsParams::SmallCap(c) => small_cap(c, seed),
    }
}

fn slab(s: &SlabParams, seed: u64) -> Result<Outcome> {
    let mut out = Outcome::new(Table::new(["N", "moment", "moment_error", "norm", "norm_error", "evaluations"]));
    let mut scan = Vec::with_capacity(s.n_values.len());
    for (i, &n) in s.n_values.iter().enumerate() {
        let base = ExpSumSpec::moment_curve(s.dimension, n)?;
        let spec = match s.coefficients {
            Coefficients::Ones => base,
            Coefficients::Random => {
                let k = derive_seed(seed, 2 * i as u64);
                out.seeds.push(k);
                base.with_random_phases(k)
            }
        };
        let domain = if s.beta == 0.0 {
            SlabDomain::torus(s.dimension)
        } else {
            SlabDomain::last_axis_truncated(s.dimension, s.tau, (n as f64).powf(-s.beta))
        };
        let method = match s.method {
            MomentMethod::Exact => Method::ExactFFT,
            MomentMethod::MonteCarlo => {
                let k = derive_seed(seed, 2 * i as u64 + 1);
                out.seeds.push(k);
                Method::MonteCarlo { samples: s.samples, seed: k }
            }
        };
        let est = compute(&MomentQuery { spec, p: s.p, domain, normalized: s.normalized, method })?;
        push_estimate(&mut out.table, n as f64, &est);
        scan.push((n as f64, est.moment));
    }
    if scan.len() >= 3 {
        let fit = fit_growth_exponent(&scan)?;
        out.summary.insert("slope".into(), fit.slope);
        out.summary.insert("intercept".into(), fit.intercept);
        out.summary.insert("r_squared".into(), fit.r_squared);
        if let Some(lo) = s.slope_min {
            out.checks.push(Check::at_least("slope lower end", fit.slope, lo));
        }
        if let Some(hi) = s.slope_max {
            out.checks.push(Check::at_most("slope upper end", fit.slope, hi));
        }
        if let Some(r2) = s.min_r_squared {
            out.checks.push(Check::at_least("fit R^2", fit.r_squared, r2));
        }
    }
    Ok(out)
}

fn push_estimate(table: &mut Table, key: f64, est: &MomentEstimate) {
    table.push(vec![key, est.moment, est.moment_error, est.norm, est.norm_error, est.evaluations as f64]);
}

/// `floor(R^alpha)`, guarding against `R^alpha` landing just below an integer.
pub fn small_cap_terms(r: f64, alpha: f64) -> usize {
    (r.powf(alpha) + 1e-9).floor().max(1.0) as usize
}

fn small_cap(c: &SmallCapParams, seed: u64) -> Result<Outcome> {
    let p = c.p.unwrap_or(2.0 + 2.0 / c.alpha);
    let mut out = Outcome::new(Table::new(["R", "N", "draw", "norm", "norm_error"]));
    let mut per_draw: Vec<Vec<(f64, f64)>> = vec![Vec::new(); c.draws];
    let mut mean: Vec<(f64, f64)> = Vec::new();
    for (i, &r) in c.r_values.iter().enumerate() {
        let n = small_cap_terms(r, c.alpha);
        let mut total = 0.0;
        for (d, draw) in per_draw.iter_mut().enumerate() {
            let phase_seed = derive_seed(seed, (i * c.draws + d) as u64 * 2);
            let mc_seed = derive_seed(seed, (i * c.draws + d) as u64 * 2 + 1);
            out.seeds.extend([phase_seed, mc_seed]);
            let spec = ExpSumSpec::new(
                CurveSpec::Parabola2D,
                n,
                c.alpha,
                vec![Complex64::new(1.0, 0.0); n],
                Scaling::NormalizedFrequencies { r },
            )?
            .with_random_phases(phase_seed);
            let est = cube_moment(&spec, &[0.0, 0.0], r, p, CubeMethod::MonteCarlo { samples: c.samples, seed: mc_seed })?;
            out.table.push(vec![r, n as f64, d as f64, est.norm, est.norm_error]);
            draw.push((r, est.norm));
            total += est.norm;
        }
        mean.push((r, total / c.draws as f64));
    }
    out.summary.insert("p".into(), p);
    if c.r_values.len() >= 3 {
        let mut worst = f64::NEG_INFINITY;
        for (d, draw) in per_draw.iter().enumerate() {
            let fit = fit_growth_exponent(draw)?;
            out.summary.insert(format!("slope_draw_{d}"), fit.slope);
            worst = worst.max(fit.slope);
        }
        let fit = fit_growth_exponent(&mean)?;
        out.summary.insert("slope_of_mean".into(), fit.slope);
        out.summary.insert("max_draw_slope".into(), worst);
        if let Some(hi) = c.slope_max {
            out.checks.push(Check::at_most("largest per-draw slope", worst, hi));
        }
    }
    Ok(out)
}
