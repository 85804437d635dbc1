//! Curves, frequency sets and pointwise evaluation of exponential sums
//! `S(x) = sum_j a_j e(xi_j . x)` with `e(t) = exp(2 pi i t)`.

use crate::geometry::{det3, Vec3};
use crate::numeric::{e, frac, KahanComplex};
use crate::{Error, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// The curve carrying the frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum CurveSpec {
    /// `(k, k^2)`.
    Parabola2D,
    /// `(k, k^2, ..., k^n)` for `2 <= n <= 6`.
    MomentCurve { dimension: usize },
    /// `(l, k l, omega(k, l))` for `k` in `[k_base, 2 k_base)`, `l` in
    /// `[l_base, 2 l_base)` and `k > l`.
    PerturbedCone { k_base: u64, l_base: u64 },
    /// `(k, k^2, N^3 phi(k / N))` with `phi(u) = sum_i c_i u^i`.
    CustomPolynomialPhase { coefficients: Vec<f64> },
}

impl CurveSpec {
    pub fn dimension(&self) -> usize {
        match self {
            CurveSpec::Parabola2D => 2,
            CurveSpec::MomentCurve { dimension } => *dimension,
            CurveSpec::PerturbedCone { .. } | CurveSpec::CustomPolynomialPhase { .. } => 3,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            CurveSpec::MomentCurve { dimension } if !(2..=6).contains(dimension) => Err(
                Error::InvalidSpec(format!("moment curve dimension {dimension} outside [2, 6]")),
            ),
            CurveSpec::PerturbedCone { k_base, l_base } if *l_base < 1 || *k_base < 1 => {
                Err(Error::InvalidSpec("cone index bases must be >= 1".into()))
            }
            CurveSpec::PerturbedCone { k_base, l_base } if cone_pairs(*k_base, *l_base).is_empty() => {
                Err(Error::InvalidSpec(format!(
                    "no pairs with k > l for K = {k_base}, L = {l_base}"
                )))
            }
            CurveSpec::CustomPolynomialPhase { coefficients } if coefficients.is_empty() => {
                Err(Error::InvalidSpec("empty phase polynomial".into()))
            }
            _ => Ok(()),
        }
    }
}

/// `omega(k, l) = ((k + l)^{3/2} - (k - l)^{3/2}) / 3`, defined for `k > l >= 1`.
pub fn cone_omega(k: f64, l: f64) -> f64 {
    ((k + l).powf(1.5) - (k - l).powf(1.5)) / 3.0
}

fn cone_pairs(k_base: u64, l_base: u64) -> Vec<(u64, u64)> {
    let mut out = Vec::new();
    for k in k_base..2 * k_base {
        for l in l_base..2 * l_base {
            if k > l {
                out.push((k, l));
            }
        }
    }
    out
}

/// Whether frequencies are the raw integer points or rescaled by `R^alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode")]
pub enum Scaling {
    IntegerFrequencies,
    /// Coordinate of degree `d` is divided by `R^{alpha d}`, so consecutive
    /// points are `R^{-alpha}` apart along the curve.
    NormalizedFrequencies { r: f64 },
}

/// A finite exponential sum on a curve with unimodular coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecJson", into = "SpecJson")]
pub struct ExpSumSpec {
    curve: CurveSpec,
    n_terms: usize,
    alpha: f64,
    coefficients: Vec<Complex64>,
    scaling: Scaling,
    terms: SumTerms,
}

/// JSON layout: coefficients travel as phases in turns (`a_j = e(phase_j)`).
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecJson {
    curve: CurveSpec,
    n: usize,
    #[serde(rename = "N")]
    n_terms: usize,
    alpha: f64,
    scaling: Scaling,
    phases: Vec<f64>,
}

impl TryFrom<SpecJson> for ExpSumSpec {
    type Error = Error;
    fn try_from(raw: SpecJson) -> Result<Self> {
        if raw.n != raw.curve.dimension() {
            return Err(Error::InvalidSpec(format!(
                "n = {} does not match curve dimension {}",
                raw.n,
                raw.curve.dimension()
            )));
        }
        let coefficients = raw.phases.iter().map(|&t| e(t)).collect();
        ExpSumSpec::new(raw.curve, raw.n_terms, raw.alpha, coefficients, raw.scaling)
    }
}

impl From<ExpSumSpec> for SpecJson {
    fn from(spec: ExpSumSpec) -> Self {
        SpecJson {
            n: spec.curve.dimension(),
            phases: spec
                .coefficients
                .iter()
                .map(|a| (a.im.atan2(a.re) / std::f64::consts::TAU).rem_euclid(1.0))
                .collect(),
            curve: spec.curve,
            n_terms: spec.n_terms,
            alpha: spec.alpha,
            scaling: spec.scaling,
        }
    }
}

impl ExpSumSpec {
    pub fn new(
        curve: CurveSpec,
        n_terms: usize,
        alpha: f64,
        coefficients: Vec<Complex64>,
        scaling: Scaling,
    ) -> Result<Self> {
        curve.validate()?;
        if n_terms == 0 {
            return Err(Error::InvalidSpec("N must be positive".into()));
        }
        if !(1.0 / 3.0 - 1e-12..=1.0 + 1e-12).contains(&alpha) {
            return Err(Error::InvalidSpec(format!("alpha = {alpha} outside [1/3, 1]")));
        }
        if coefficients.len() != n_terms {
            return Err(Error::InvalidSpec(format!(
                "{} coefficients for N = {n_terms}",
                coefficients.len()
            )));
        }
        if let Some((j, a)) = coefficients
            .iter()
            .enumerate()
            .find(|(_, a)| (a.norm() - 1.0).abs() > 1e-12)
        {
            return Err(Error::InvalidSpec(format!("|a_{j}| = {} is not 1", a.norm())));
        }
        if let CurveSpec::PerturbedCone { k_base, l_base } = curve {
            let pairs = cone_pairs(k_base, l_base).len();
            if pairs != n_terms {
                return Err(Error::InvalidSpec(format!(
                    "cone with K = {k_base}, L = {l_base} has {pairs} terms, not {n_terms}"
                )));
            }
        }
        if let Scaling::NormalizedFrequencies { r } = scaling {
            if !(r.is_finite() && r >= 1.0) {
                return Err(Error::InvalidSpec(format!("normalization R = {r} must be >= 1")));
            }
            if !matches!(curve, CurveSpec::Parabola2D | CurveSpec::MomentCurve { .. }) {
                return Err(Error::InvalidSpec(
                    "normalized frequencies are defined for the parabola and moment curve only"
                        .into(),
                ));
            }
        }
        let terms = build_terms(&curve, n_terms, alpha, &coefficients, scaling)?;
        Ok(Self { curve, n_terms, alpha, coefficients, scaling, terms })
    }

    /// Moment curve of dimension `n` with `a_j = 1` and integer frequencies.
    pub fn moment_curve(n: usize, n_terms: usize) -> Result<Self> {
        Self::new(
            CurveSpec::MomentCurve { dimension: n },
            n_terms,
            1.0,
            vec![Complex64::new(1.0, 0.0); n_terms],
            Scaling::IntegerFrequencies,
        )
    }

    /// Parabola `(k, k^2)` with `a_j = 1` and integer frequencies.
    pub fn parabola(n_terms: usize) -> Result<Self> {
        Self::new(
            CurveSpec::Parabola2D,
            n_terms,
            1.0,
            vec![Complex64::new(1.0, 0.0); n_terms],
            Scaling::IntegerFrequencies,
        )
    }

    /// Same curve and scaling with i.i.d. uniform phases drawn from `seed`.
    pub fn with_random_phases(&self, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coefficients = (0..self.n_terms).map(|_| e(rng.gen::<f64>())).collect();
        self.with_coefficients(coefficients).expect("unimodular by construction")
    }

    pub fn with_coefficients(&self, coefficients: Vec<Complex64>) -> Result<Self> {
        Self::new(self.curve.clone(), self.n_terms, self.alpha, coefficients, self.scaling)
    }

    pub fn curve(&self) -> &CurveSpec {
        &self.curve
    }
    pub fn n_terms(&self) -> usize {
        self.n_terms
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn scaling(&self) -> Scaling {
        self.scaling
    }
    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }
    pub fn dimension(&self) -> usize {
        self.curve.dimension()
    }
    pub fn terms(&self) -> &SumTerms {
        &self.terms
    }
}

fn build_terms(
    curve: &CurveSpec,
    n_terms: usize,
    alpha: f64,
    coefficients: &[Complex64],
    scaling: Scaling,
) -> Result<SumTerms> {
    let dim = curve.dimension();
    let mut freqs = Vec::with_capacity(n_terms * dim);
    match curve {
        CurveSpec::Parabola2D | CurveSpec::MomentCurve { .. } => {
            let unit = match scaling {
                Scaling::IntegerFrequencies => 1.0,
                Scaling::NormalizedFrequencies { r } => r.powf(-alpha),
            };
            for j in 1..=n_terms {
                // normalized mode keeps the integer index in the numerator
                // so that the degree-d coordinate is (j * unit)^d exactly
                let base = match scaling {
                    Scaling::IntegerFrequencies => j as f64,
                    Scaling::NormalizedFrequencies { .. } => j as f64 * unit,
                };
                let mut pow = 1.0;
                for _ in 0..dim {
                    pow *= base;
                    freqs.push(pow);
                }
            }
        }
        CurveSpec::PerturbedCone { k_base, l_base } => {
            for (k, l) in cone_pairs(*k_base, *l_base) {
                let (k, l) = (k as f64, l as f64);
                freqs.extend_from_slice(&[l, k * l, cone_omega(k, l)]);
            }
        }
        CurveSpec::CustomPolynomialPhase { coefficients: phi } => {
            let nf = n_terms as f64;
            for j in 1..=n_terms {
                let u = j as f64 / nf;
                let val = phi.iter().rev().fold(0.0, |acc, c| acc * u + c);
                let jf = j as f64;
                freqs.extend_from_slice(&[jf, jf * jf, nf * nf * nf * val]);
            }
        }
    }
    SumTerms::new(dim, freqs, coefficients.to_vec())
}

/// A general finite exponential sum: frequency points plus coefficients.
///
/// Axes whose frequencies are all integers are recorded as lattice axes;
/// exact moment computations may only treat those axes as periodic.
#[derive(Debug, Clone, PartialEq)]
pub struct SumTerms {
    dim: usize,
    freqs: Vec<f64>,
    coeffs: Vec<Complex64>,
    lattice: Vec<Option<Vec<i64>>>,
}

impl SumTerms {
    pub fn new(dim: usize, freqs: Vec<f64>, coeffs: Vec<Complex64>) -> Result<Self> {
        if dim == 0 || freqs.len() != dim * coeffs.len() {
            return Err(Error::InvalidSpec(format!(
                "{} frequency coordinates for {} terms in dimension {dim}",
                freqs.len(),
                coeffs.len()
            )));
        }
        if freqs.iter().any(|f| !f.is_finite()) {
            return Err(Error::InvalidSpec("non-finite frequency".into()));
        }
        let lattice = (0..dim)
            .map(|axis| {
                let column: Option<Vec<i64>> = freqs
                    .iter()
                    .skip(axis)
                    .step_by(dim)
                    .map(|&f| (f.fract() == 0.0 && f.abs() < 9.0e15).then_some(f as i64))
                    .collect();
                column
            })
            .collect();
        Ok(Self { dim, freqs, coeffs, lattice })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }
    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }
    pub fn freq(&self, j: usize) -> &[f64] {
        &self.freqs[j * self.dim..(j + 1) * self.dim]
    }
    /// Integer frequencies along `axis`, if every term has one.
    pub fn lattice_axis(&self, axis: usize) -> Option<&[i64]> {
        self.lattice[axis].as_deref()
    }

    /// Multiply every coefficient by `c`.
    pub fn scaled(&self, c: Complex64) -> SumTerms {
        SumTerms { coeffs: self.coeffs.iter().map(|a| a * c).collect(), ..self.clone() }
    }

    /// Direct evaluation in ascending term order with compensated summation.
    pub fn eval(&self, x: &[f64]) -> Complex64 {
        debug_assert_eq!(x.len(), self.dim);
        let mut acc = KahanComplex::new();
        for (j, a) in self.coeffs.iter().enumerate() {
            let f = self.freq(j);
            let mut phase = 0.0;
            for i in 0..self.dim {
                // reduce each product separately; k^3 x can be large
                phase += frac(f[i] * x[i]);
            }
            acc.add(a * e(phase));
        }
        acc.value()
    }
}

/// `sum_j a_j e(xi_j . x)` by direct summation.
pub fn eval_sum(spec: &ExpSumSpec, x: &[f64]) -> Result<Complex64> {
    if x.len() != spec.dimension() {
        return Err(Error::Precondition(format!(
            "point has {} coordinates, sum lives in dimension {}",
            x.len(),
            spec.dimension()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition("non-finite evaluation point".into()));
    }
    Ok(spec.terms.eval(x))
}

/// Tangent, normal and binormal of the moment curve `(t, t^2, t^3)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrenetFrame {
    pub t: f64,
    pub t_vec: Vec3,
    pub n_vec: Vec3,
    pub b_vec: Vec3,
}

impl FrenetFrame {
    /// Largest deviation from an oriented orthonormal triple.
    pub fn orthonormality_defect(&self) -> f64 {
        let (t, n, b) = (&self.t_vec, &self.n_vec, &self.b_vec);
        [
            t.dot(n).abs(),
            t.dot(b).abs(),
            n.dot(b).abs(),
            (t.norm() - 1.0).abs(),
            (n.norm() - 1.0).abs(),
            (b.norm() - 1.0).abs(),
            (det3(t, n, b) - 1.0).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Frenet frame: `t ~ (1, 2t, 3t^2)`, `b ~ (3t^2, -3t, 1)`, `n = b x t`.
pub fn frenet_frame(t: f64) -> FrenetFrame {
    let t_vec = Vec3::new(1.0, 2.0 * t, 3.0 * t * t).normalized();
    let b_vec = Vec3::new(3.0 * t * t, -3.0 * t, 1.0).normalized();
    let n_vec = b_vec.cross(&t_vec).normalized();
    FrenetFrame { t, t_vec, n_vec, b_vec }
}

/// Polar-grid `delta`-separated points on the cone
/// `{(x, y, sqrt(x^2 + y^2)) : 1 <= x^2 + y^2 <= 2}`.
///
/// Radii step by `delta`; each circle carries the largest uniform angular
/// grid whose chord is still at least `delta`.
pub fn cone_points(delta: f64) -> Result<Vec<Vec3>> {
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(Error::Precondition(format!("delta = {delta} outside (0, 1/2]")));
    }
    let mut points = Vec::new();
    let r_max = std::f64::consts::SQRT_2;
    let mut k = 0u64;
    loop {
        let rho = 1.0 + k as f64 * delta;
        if rho > r_max + 1e-12 {
            break;
        }
        let step = delta.max(2.0 * (delta / (2.0 * rho)).asin());
        let m = (std::f64::consts::TAU / step).floor() as u64;
        for j in 0..m {
            let phi = std::f64::consts::TAU * j as f64 / m as f64;
            points.push(Vec3::new(rho * phi.cos(), rho * phi.sin(), rho));
        }
        k += 1;
    }
    Ok(points)
}
