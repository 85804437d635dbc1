//! `L^p` moments of exponential sums over slab domains.
//!
//! Even exponents are handled exactly (up to truncated-axis quadrature) by
//! [`exact_torus_moment`]; any `p >= 2` can be estimated by
//! [`monte_carlo_moment`]. Scans over `N` are summarized by
//! [`fit_growth_exponent`].

mod exact;
mod fit;
mod mc;

pub use exact::{exact_moment_terms, ExactOptions, Route};
pub use fit::{fit_growth_exponent, ExponentFit};
pub use mc::{mc_moment_terms, BLOCK_SAMPLES};

use crate::expsum::{ExpSumSpec, Scaling};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// One axis of a slab domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis")]
pub enum AxisRange {
    /// The whole period `[0, 1]`.
    FullPeriod,
    /// `[start, start + length]` with `0 < length <= 1`.
    Truncated { start: f64, length: f64 },
}

impl AxisRange {
    pub fn start(&self) -> f64 {
        match self {
            AxisRange::FullPeriod => 0.0,
            AxisRange::Truncated { start, .. } => *start,
        }
    }
    pub fn length(&self) -> f64 {
        match self {
            AxisRange::FullPeriod => 1.0,
            AxisRange::Truncated { length, .. } => *length,
        }
    }
}

/// Product of per-axis ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlabDomain {
    pub axes: Vec<AxisRange>,
}

impl SlabDomain {
    pub fn torus(n: usize) -> Self {
        Self { axes: vec![AxisRange::FullPeriod; n] }
    }

    /// `[0,1]^{n-1} x [tau, tau + length]`.
    pub fn last_axis_truncated(n: usize, tau: f64, length: f64) -> Self {
        let mut axes = vec![AxisRange::FullPeriod; n];
        axes[n - 1] = AxisRange::Truncated { start: tau, length };
        Self { axes }
    }

    pub fn dimension(&self) -> usize {
        self.axes.len()
    }

    pub fn volume(&self) -> f64 {
        self.axes.iter().map(AxisRange::length).product()
    }

    pub fn truncated_axes(&self) -> Vec<usize> {
        self.axes
            .iter()
            .enumerate()
            .filter(|(_, a)| matches!(a, AxisRange::Truncated { .. }))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() {
            return Err(Error::InvalidSpec("domain has no axes".into()));
        }
        for a in &self.axes {
            if let AxisRange::Truncated { start, length } = a {
                if !(start.is_finite() && *length > 0.0 && *length <= 1.0) {
                    return Err(Error::InvalidSpec(format!(
                        "truncated axis [{start}, {start} + {length}] needs 0 < length <= 1"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn region(&self) -> Region {
        Region {
            lo: self.axes.iter().map(AxisRange::start).collect(),
            len: self.axes.iter().map(AxisRange::length).collect(),
        }
    }
}

/// Axis-aligned box used for sampling: `prod [lo_i, lo_i + len_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lo: Vec<f64>,
    pub len: Vec<f64>,
}

impl Region {
    pub fn cube(corner: &[f64], side: f64) -> Self {
        Self { lo: corner.to_vec(), len: vec![side; corner.len()] }
    }
    pub fn volume(&self) -> f64 {
        self.len.iter().product()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method")]
pub enum Method {
    ExactFFT,
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentQuery {
    pub spec: ExpSumSpec,
    pub p: f64,
    pub domain: SlabDomain,
    /// Divide by the domain volume (the `L^p_#` average).
    pub normalized: bool,
    pub method: Method,
}

/// A computed moment. `moment` is `int |S|^p` (or its average when
/// normalized) and `norm = moment^{1/p}`; each carries its own error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub moment: f64,
    pub moment_error: f64,
    pub norm: f64,
    pub norm_error: f64,
    pub p: f64,
    pub method: MethodTag,
    /// Number of `S` evaluations (grid points or samples).
    pub evaluations: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MethodTag {
    ExactFft,
    ExactSpectral,
    MonteCarlo,
    Quadrature,
}

impl MomentEstimate {
    pub(crate) fn from_moment(moment: f64, moment_error: f64, p: f64, method: MethodTag, evaluations: u64) -> Self {
        let norm = moment.max(0.0).powf(1.0 / p);
        // delta method: d(m^{1/p}) = m^{1/p - 1} dm / p
        let norm_error = if moment > 0.0 { norm / (p * moment) * moment_error } else { 0.0 };
        Self { moment, moment_error, norm, norm_error, p, method, evaluations }
    }
}

impl MomentQuery {
    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        if self.domain.dimension() != self.spec.dimension() {
            return Err(Error::InvalidSpec(format!(
                "domain has {} axes, sum lives in dimension {}",
                self.domain.dimension(),
                self.spec.dimension()
            )));
        }
        if !(self.p >= 2.0 && self.p.is_finite()) {
            return Err(Error::InvalidSpec(format!("p = {} must be a finite value >= 2", self.p)));
        }
        Ok(())
    }
}

/// Dispatch on the query's method.
pub fn compute(q: &MomentQuery) -> Result<MomentEstimate> {
    match q.method {
        Method::ExactFFT => exact_torus_moment(q),
        Method::MonteCarlo { .. } => monte_carlo_moment(q),
    }
}

/// Exact moment for even `p`; see [`exact_moment_terms`].
pub fn exact_torus_moment(q: &MomentQuery) -> Result<MomentEstimate> {
    exact_torus_moment_with(q, &ExactOptions::default())
}

pub fn exact_torus_moment_with(q: &MomentQuery, opts: &ExactOptions) -> Result<MomentEstimate> {
    q.validate()?;
    exact_moment_terms(q.spec.terms(), q.p, &q.domain, q.normalized, opts)
}

/// Seeded Monte-Carlo estimate with a 99% confidence half-width.
pub fn monte_carlo_moment(q: &MomentQuery) -> Result<MomentEstimate> {
    q.validate()?;
    let Method::MonteCarlo { samples, seed } = q.method else {
        return Err(Error::InvalidSpec("query does not request Monte Carlo".into()));
    };
    let region = q.domain.region();
    mc_moment_terms(q.spec.terms(), q.p, &region, q.normalized, samples, seed)
}

/// How [`cube_moment`] integrates over the cube.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method")]
pub enum CubeMethod {
    MonteCarlo { samples: usize, seed: u64 },
    /// Tensor midpoint rule with this many nodes per axis.
    Tensor { nodes_per_axis: usize },
}

/// `L^p_#` average over the cube `corner + [0, side]^n` of a sum with
/// normalized frequencies.
pub fn cube_moment(
    spec: &ExpSumSpec,
    corner: &[f64],
    side: f64,
    p: f64,
    method: CubeMethod,
) -> Result<MomentEstimate> {
    if !matches!(spec.scaling(), Scaling::NormalizedFrequencies { .. }) {
        return Err(Error::InvalidSpec("cube moments expect normalized frequencies".into()));
    }
    if corner.len() != spec.dimension() || !(side > 0.0 && side.is_finite()) {
        return Err(Error::InvalidSpec("cube corner dimension or side is invalid".into()));
    }
    if !(p >= 2.0 && p.is_finite()) {
        return Err(Error::InvalidSpec(format!("p = {p} must be >= 2")));
    }
    let region = Region::cube(corner, side);
    match method {
        CubeMethod::MonteCarlo { samples, seed } => {
            mc_moment_terms(spec.terms(), p, &region, true, samples, seed)
        }
        CubeMethod::Tensor { nodes_per_axis } => {
            tensor_midpoint(spec.terms(), p, &region, nodes_per_axis)
        }
    }
}

fn tensor_midpoint(
    terms: &crate::expsum::SumTerms,
    p: f64,
    region: &Region,
    nodes: usize,
) -> Result<MomentEstimate> {
    let dim = region.lo.len();
    let total = (nodes as u128).pow(dim as u32);
    if nodes == 0 || total > 1_000_000_000 {
        return Err(Error::SizeCap(format!("{total} tensor nodes")));
    }
    let mut acc = crate::numeric::KahanSum::new();
    let mut idx = vec![0usize; dim];
    let mut x = vec![0.0; dim];
    for _ in 0..total {
        for i in 0..dim {
            x[i] = region.lo[i] + (idx[i] as f64 + 0.5) / nodes as f64 * region.len[i];
        }
        acc.add(crate::numeric::abs_pow(terms.eval(&x), p));
        for i in 0..dim {
            idx[i] += 1;
            if idx[i] < nodes {
                break;
            }
            idx[i] = 0;
        }
    }
    let mean = acc.value() / total as f64;
    Ok(MomentEstimate::from_moment(mean, 0.0, p, MethodTag::Quadrature, total as u64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn query(spec: ExpSumSpec, p: f64, method: Method) -> MomentQuery {
        let n = spec.dimension();
        MomentQuery { spec, p, domain: SlabDomain::torus(n), normalized: true, method }
    }

    #[test]
    fn parseval_small() {
        let q = query(ExpSumSpec::moment_curve(3, 7).unwrap(), 2.0, Method::ExactFFT);
        let est = exact_torus_moment(&q).unwrap();
        assert!((est.moment - 7.0).abs() < 1e-10);
    }

    #[test]
    fn odd_exponent_is_rejected() {
        let q = query(ExpSumSpec::parabola(4).unwrap(), 5.0, Method::ExactFFT);
        assert!(matches!(exact_torus_moment(&q), Err(Error::OddExponent(_))));
    }

    #[test]
    fn constant_sum_under_monte_carlo() {
        let spec = ExpSumSpec::moment_curve(2, 1).unwrap();
        let q = query(spec, 7.3, Method::MonteCarlo { samples: 1000, seed: 3 });
        let est = monte_carlo_moment(&q).unwrap();
        assert!((est.norm - 1.0).abs() < 1e-12);
        assert!(est.norm_error < 1e-12);
    }

    #[test]
    fn too_few_samples() {
        let q = query(ExpSumSpec::parabola(3).unwrap(), 2.0, Method::MonteCarlo { samples: 99, seed: 0 });
        assert!(matches!(monte_carlo_moment(&q), Err(Error::TooFewSamples(99))));
    }

    #[test]
    fn single_frequency_cube() {
        let spec = ExpSumSpec::new(
            crate::expsum::CurveSpec::Parabola2D,
            1,
            1.0,
            vec![Complex64::new(0.0, 1.0)],
            Scaling::NormalizedFrequencies { r: 4.0 },
        )
        .unwrap();
        let est = cube_moment(&spec, &[3.0, -1.0], 4.0, 3.0, CubeMethod::Tensor { nodes_per_axis: 8 }).unwrap();
        assert!((est.norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn truncation_must_fit_in_a_period() {
        let mut q = query(ExpSumSpec::moment_curve(3, 4).unwrap(), 2.0, Method::ExactFFT);
        q.domain = SlabDomain::last_axis_truncated(3, 0.0, 1.5);
        assert!(exact_torus_moment(&q).is_err());
    }
}
