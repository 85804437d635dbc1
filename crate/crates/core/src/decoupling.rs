//! Cap partitions, synthesized test functions and empirical lower bounds
//! for decoupling constants.
//!
//! Frequencies are stored in *evaluation units*: for the lattice manifolds
//! (parabola, moment curve, flat interval) the cap samples sit at
//! half-integer parameters `t = (2j + 1) / (2K)` and are scaled so that every
//! coordinate becomes an integer. Norms over the unit torus in these units are
//! the periodic surrogate of the norm over the dual box, and exact moments
//! apply. The cone is not a lattice set; its norms are sampled over a box.

use crate::expsum::{frenet_frame, SumTerms};
use crate::geometry::{BoxTag, OrientedBox, Vec3};
use crate::moments::{exact_moment_terms, mc_moment_terms, ExactOptions, MomentEstimate, Region, SlabDomain};
use crate::numeric::{e, gauss_legendre, KahanSum};
use crate::{Error, Result};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Manifold {
    Parabola,
    Cone2D,
    MomentCurve3D,
    /// The unit interval cut into translates (flat decoupling).
    Flat,
}

impl Manifold {
    /// Exponent of the canonical cap diameter.
    pub fn canonical_exponent(self) -> f64 {
        match self {
            Manifold::Parabola | Manifold::Cone2D => 0.5,
            Manifold::MomentCurve3D => 1.0 / 3.0,
            Manifold::Flat => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScaleKind {
    Canonical,
    SmallCap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapPartition {
    pub manifold: Manifold,
    pub delta: f64,
    pub alpha: f64,
    /// Cap boxes in the manifold's own coordinates.
    pub caps: Vec<OrientedBox>,
    pub scale_kind: ScaleKind,
    /// Frequency samples synthesized per cap.
    pub samples_per_cap: usize,
    /// Parameter grid size `K` (caps times samples) for lattice manifolds.
    grid: usize,
}

fn scale_kind(manifold: Manifold, alpha: f64) -> ScaleKind {
    if alpha > manifold.canonical_exponent() + 1e-12 {
        ScaleKind::SmallCap
    } else {
        ScaleKind::Canonical
    }
}

/// Box in the frame `axes` around `center`, with the given nominal half
/// dimensions grown (if needed) to contain every point of `pts`.
fn fitted_box(center: Vec3, axes: [Vec3; 3], nominal: [f64; 3], pts: &[Vec3], planar: bool) -> Result<OrientedBox> {
    let mut half = nominal;
    for p in pts {
        let d = *p - center;
        for k in 0..3 {
            half[k] = half[k].max(d.dot(&axes[k]).abs() * (1.0 + 1e-9) + 1e-15);
        }
    }
    let mut b = OrientedBox::new(center, axes, half, BoxTag::CapBox)?;
    b.planar = planar;
    Ok(b)
}

impl CapPartition {
    /// Caps of diameter `R^{-alpha}` over the `1/R`-neighborhood of the
    /// parabola `(t, t^2)`, `t in [0, 1]`.
    pub fn parabola(r: f64, alpha: f64, samples_per_cap: usize) -> Result<Self> {
        if !(r >= 1.0) || !(0.0..=1.0).contains(&alpha) || alpha < 0.5 - 1e-12 {
            return Err(Error::Precondition(format!("parabola caps need R >= 1 and 1/2 <= alpha <= 1 (R = {r}, alpha = {alpha})")));
        }
        check_samples(samples_per_cap)?;
        let n = r.powf(alpha).round().max(1.0) as usize;
        let delta = 1.0 / r;
        let mut part = Self {
            manifold: Manifold::Parabola,
            delta,
            alpha,
            caps: Vec::with_capacity(n),
            scale_kind: scale_kind(Manifold::Parabola, alpha),
            samples_per_cap,
            grid: n * samples_per_cap,
        };
        let len = 1.0 / n as f64;
        for i in 0..n {
            let tc = (i as f64 + 0.5) * len;
            let tangent = Vec3::new(1.0, 2.0 * tc, 0.0).normalized();
            let normal = Vec3::new(-tangent.y(), tangent.x(), 0.0);
            let speed = (1.0 + 4.0 * tc * tc).sqrt();
            let pts = part.cap_points(i);
            part.caps.push(fitted_box(
                Vec3::new(tc, tc * tc, 0.0),
                [tangent, normal, Vec3::Z],
                [0.5 * len * speed, 0.5 * delta, 0.5],
                &pts,
                true,
            )?);
        }
        Ok(part)
    }

    /// Caps of length `delta^alpha` over the moment curve `(t, t^2, t^3)`.
    pub fn moment_curve(delta: f64, alpha: f64, samples_per_cap: usize) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) || !(1.0 / 3.0 - 1e-12..=1.0).contains(&alpha) {
            return Err(Error::Precondition(format!("moment-curve caps need 0 < delta < 1, 1/3 <= alpha <= 1")));
        }
        check_samples(samples_per_cap)?;
        let n = delta.powf(-alpha).round().max(1.0) as usize;
        let mut part = Self {
            manifold: Manifold::MomentCurve3D,
            delta,
            alpha,
            caps: Vec::with_capacity(n),
            scale_kind: scale_kind(Manifold::MomentCurve3D, alpha),
            samples_per_cap,
            grid: n * samples_per_cap,
        };
        let len = 1.0 / n as f64;
        for i in 0..n {
            let tc = (i as f64 + 0.5) * len;
            let fr = frenet_frame(tc);
            let speed = (1.0 + 4.0 * tc * tc + 9.0 * tc.powi(4)).sqrt();
            let pts = part.cap_points(i);
            part.caps.push(fitted_box(
                Vec3::new(tc, tc * tc, tc * tc * tc),
                [fr.t_vec, fr.n_vec, fr.b_vec],
                [0.5 * len * speed, 0.5 * delta, 0.5 * delta],
                &pts,
                false,
            )?);
        }
        Ok(part)
    }

    /// `[0, 1]` cut into `l` translates of length `1/l` (embedded in the
    /// plane with thickness `1/l` for the box bookkeeping).
    pub fn flat(l: usize, samples_per_cap: usize) -> Result<Self> {
        if l == 0 {
            return Err(Error::Precondition("flat partition needs L >= 1".into()));
        }
        check_samples(samples_per_cap)?;
        let len = 1.0 / l as f64;
        let mut part = Self {
            manifold: Manifold::Flat,
            delta: len,
            alpha: 1.0,
            caps: Vec::with_capacity(l),
            scale_kind: ScaleKind::Canonical,
            samples_per_cap,
            grid: l * samples_per_cap,
        };
        for i in 0..l {
            let pts = part.cap_points(i);
            part.caps.push(fitted_box(
                Vec3::new((i as f64 + 0.5) * len, 0.0, 0.0),
                [Vec3::X, Vec3::Y, Vec3::Z],
                [0.5 * len, 0.5 * len, 0.5],
                &pts,
                true,
            )?);
        }
        Ok(part)
    }

    /// Small caps `gamma` of dimensions `(delta^{1/2}, delta, delta^{1/2})`
    /// on the cone `(xi, |xi|)`, `1 <= |xi| <= 2`: sectors of angular width
    /// `delta^{1/2}` (starting at angle 0) each cut radially into pieces of
    /// length `delta^{1/2}`.
    pub fn cone(delta: f64, samples_per_cap: usize) -> Result<Self> {
        if !(delta > 0.0 && delta <= 0.25) {
            return Err(Error::Precondition(format!("cone caps need 0 < delta <= 1/4 (got {delta})")));
        }
        check_samples(samples_per_cap)?;
        let w = delta.sqrt();
        let sectors = (1.0 / w).round() as usize;
        let pieces = (1.0 / w).round() as usize;
        let mut part = Self {
            manifold: Manifold::Cone2D,
            delta,
            alpha: 0.5,
            caps: Vec::with_capacity(sectors * pieces),
            scale_kind: ScaleKind::SmallCap,
            samples_per_cap,
            grid: 0,
        };
        let dr = 1.0 / pieces as f64;
        for s in 0..sectors {
            let phi = (s as f64 + 0.5) * w;
            let (sn, cs) = phi.sin_cos();
            let generator = Vec3::new(cs, sn, 1.0).normalized();
            let angular = Vec3::new(-sn, cs, 0.0);
            let normal = generator.cross(&angular);
            for k in 0..pieces {
                let rho = 1.0 + (k as f64 + 0.5) * dr;
                let idx = s * pieces + k;
                let pts = part.cone_cap_points(idx, pieces);
                part.caps.push(fitted_box(
                    Vec3::new(rho * cs, rho * sn, rho),
                    [generator, angular, normal],
                    [0.5 * dr * 2f64.sqrt(), 0.5 * rho * w, 0.5 * delta],
                    &pts,
                    false,
                )?);
            }
        }
        Ok(part)
    }

    pub fn len(&self) -> usize {
        self.caps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.caps.is_empty()
    }

    /// Factor taking evaluation-unit frequencies to cap coordinates.
    pub fn eval_to_cap(&self) -> f64 {
        let k2 = 2.0 * self.grid as f64;
        match self.manifold {
            Manifold::Parabola => 1.0 / (k2 * k2),
            Manifold::MomentCurve3D => 1.0 / (k2 * k2 * k2),
            Manifold::Flat => 1.0 / k2,
            Manifold::Cone2D => 1.0,
        }
    }

    /// Frequency samples of cap `i`, in evaluation units.
    pub fn cap_samples(&self, i: usize) -> Vec<Vec<f64>> {
        let m = self.samples_per_cap;
        let k2 = 2 * self.grid as i64;
        match self.manifold {
            Manifold::Parabola => (0..m)
                .map(|s| {
                    let q = 2 * (i * m + s) as i64 + 1;
                    vec![(q * k2) as f64, (q * q) as f64]
                })
                .collect(),
            Manifold::MomentCurve3D => (0..m)
                .map(|s| {
                    let q = 2 * (i * m + s) as i64 + 1;
                    vec![(q * k2 * k2) as f64, (q * q * k2) as f64, (q * q * q) as f64]
                })
                .collect(),
            Manifold::Flat => (0..m).map(|s| vec![(2 * (i * m + s) + 1) as f64]).collect(),
            Manifold::Cone2D => {
                let pieces = (1.0 / self.delta.sqrt()).round() as usize;
                self.cone_cap_points(i, pieces).iter().map(|p| p.0.to_vec()).collect()
            }
        }
    }

    fn cap_points(&self, i: usize) -> Vec<Vec3> {
        let scale = self.eval_to_cap();
        self.cap_samples(i)
            .into_iter()
            .map(|s| {
                let mut v = Vec3::ZERO;
                for (k, x) in s.iter().enumerate() {
                    v.0[k] = x * scale;
                }
                v
            })
            .collect()
    }

    fn cone_cap_points(&self, idx: usize, pieces: usize) -> Vec<Vec3> {
        let w = self.delta.sqrt();
        let dr = 1.0 / pieces as f64;
        let (s, k) = (idx / pieces, idx % pieces);
        let m = self.samples_per_cap;
        let a = (m as f64).sqrt().ceil() as usize;
        let b = m.div_ceil(a);
        (0..m)
            .map(|q| {
                let (u, v) = (q % a, q / a);
                let rho = 1.0 + (k as f64 + (u as f64 + 0.5) / a as f64) * dr;
                let phi = (s as f64 + (v as f64 + 0.5) / b as f64) * w;
                Vec3::new(rho * phi.cos(), rho * phi.sin(), rho)
            })
            .collect()
    }

    /// Frequency dimension of the synthesized functions.
    pub fn dimension(&self) -> usize {
        match self.manifold {
            Manifold::Flat => 1,
            Manifold::Parabola => 2,
            Manifold::MomentCurve3D | Manifold::Cone2D => 3,
        }
    }

    /// Every sample lies in its own cap and in no other; cap thickness is at
    /// most `4 delta`.
    pub fn validate(&self) -> Result<()> {
        if self.caps.is_empty() {
            return Err(Error::InvalidSpec("partition has no caps".into()));
        }
        for (i, cap) in self.caps.iter().enumerate() {
            let thin = cap.half[..cap.dims()].iter().copied().fold(f64::INFINITY, f64::min);
            if 2.0 * thin > 4.0 * self.delta {
                return Err(Error::InvalidSpec(format!("cap {i} has thickness {} > 4 delta", 2.0 * thin)));
            }
            for p in self.cap_points(i) {
                if !cap.contains(&p, 1e-12) {
                    return Err(Error::InvalidSpec(format!("a sample of cap {i} lies outside it")));
                }
                for (j, other) in self.caps.iter().enumerate() {
                    if j != i && other.contains(&p, 0.0) {
                        return Err(Error::InvalidSpec(format!("caps {i} and {j} share a sample")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Norm domain for the cone: the cube of side `4 / delta` centered at the
    /// origin (dual box of the thinnest cap direction, scaled by 4).
    pub fn sampled_domain(&self, radius_factor: f64, samples: usize, seed: u64) -> DecDomain {
        let half = 2.0 * radius_factor / 4.0 / self.delta;
        let dim = self.dimension();
        DecDomain::Sampled { region: Region { lo: vec![-half; dim], len: vec![2.0 * half; dim] }, samples, seed }
    }
}

fn check_samples(m: usize) -> Result<()> {
    if m < 4 {
        return Err(Error::Precondition(format!("need at least 4 samples per cap, got {m}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExtremalMode {
    IndicatorLike,
    RandomPhase(u64),
}

/// `F = sum_i a_i sum_{xi in S_i} e(xi . x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CapFunction {
    pub partition: CapPartition,
    pub amplitudes: Vec<Complex64>,
    pub samples: Vec<Vec<Vec<f64>>>,
}

pub fn build_extremal(partition: &CapPartition, mode: ExtremalMode) -> Result<CapFunction> {
    partition.validate()?;
    let n = partition.len();
    let amplitudes = match mode {
        ExtremalMode::IndicatorLike => vec![Complex64::new(1.0, 0.0); n],
        ExtremalMode::RandomPhase(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n).map(|_| e(rng.gen::<f64>())).collect()
        }
    };
    let samples = (0..n).map(|i| partition.cap_samples(i)).collect();
    Ok(CapFunction { partition: partition.clone(), amplitudes, samples })
}

impl CapFunction {
    /// `P_i F` as a flat term list.
    pub fn cap_terms(&self, i: usize) -> Result<SumTerms> {
        let dim = self.partition.dimension();
        let s = &self.samples[i];
        SumTerms::new(dim, s.iter().flatten().copied().collect(), vec![self.amplitudes[i]; s.len()])
    }

    pub fn terms(&self) -> Result<SumTerms> {
        let dim = self.partition.dimension();
        let mut freqs = Vec::new();
        let mut coeffs = Vec::new();
        for (a, s) in self.amplitudes.iter().zip(&self.samples) {
            for x in s {
                freqs.extend_from_slice(x);
                coeffs.push(*a);
            }
        }
        SumTerms::new(dim, freqs, coeffs)
    }

    /// Multiply every amplitude by `c`.
    pub fn scaled(&self, c: Complex64) -> Self {
        Self { amplitudes: self.amplitudes.iter().map(|a| a * c).collect(), ..self.clone() }
    }

    /// Reorder the caps (and their samples) by `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut partition = self.partition.clone();
        partition.caps = perm.iter().map(|&i| self.partition.caps[i]).collect();
        Self {
            partition,
            amplitudes: perm.iter().map(|&i| self.amplitudes[i]).collect(),
            samples: perm.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }
}

/// Where the norms of [`dec_lower_bound`] are taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum DecDomain {
    /// Unit torus in evaluation units; exact, needs lattice samples and even `p`.
    Torus,
    /// Monte-Carlo average over a box; every norm uses the same seed.
    Sampled { region: Region, samples: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecReport {
    pub lower_bound: f64,
    pub norm: MomentEstimate,
    pub cap_norms: Vec<MomentEstimate>,
    /// Number of caps `N`.
    pub caps: usize,
    pub p: f64,
    pub r: f64,
}

fn norm_over(terms: &SumTerms, p: f64, domain: &DecDomain) -> Result<MomentEstimate> {
    match domain {
        DecDomain::Torus => {
            exact_moment_terms(terms, p, &SlabDomain::torus(terms.dim()), true, &ExactOptions::default())
        }
        DecDomain::Sampled { region, samples, seed } => {
            mc_moment_terms(terms, p, region, true, *samples, *seed)
        }
    }
}

/// `||F||_p / (N^{1/2 - 1/r} (sum_i ||P_i F||_p^r)^{1/r})`.
pub fn dec_lower_bound(f: &CapFunction, p: f64, r: f64, domain: &DecDomain) -> Result<f64> {
    Ok(dec_lower_bound_report(f, p, r, domain)?.lower_bound)
}

pub fn dec_lower_bound_report(f: &CapFunction, p: f64, r: f64, domain: &DecDomain) -> Result<DecReport> {
    if !(p >= 2.0 && r >= 2.0 && p.is_finite() && r.is_finite()) {
        return Err(Error::Precondition(format!("need p, r >= 2 (got p = {p}, r = {r})")));
    }
    let n = f.partition.len();
    let cap_norms: Vec<MomentEstimate> = (0..n)
        .into_par_iter()
        .map(|i| norm_over(&f.cap_terms(i)?, p, domain))
        .collect::<Result<_>>()?;
    let sum: KahanSum = cap_norms.iter().map(|m| m.norm.powf(r)).collect();
    let denom = (n as f64).powf(0.5 - 1.0 / r) * sum.value().powf(1.0 / r);
    if !(denom > 0.0) {
        return Err(Error::Degenerate("every cap piece vanishes".into()));
    }
    let norm = norm_over(&f.terms()?, p, domain)?;
    Ok(DecReport { lower_bound: norm.norm / denom, norm, cap_norms, caps: n, p, r })
}

/// Wave-packet family for the refined flat estimate on the line.
///
/// Frequencies: `[0, 1]` cut into `L` caps with centers `c_i = (i + 1/2)/L`.
/// Space: `taus` intervals of length `L`, each made of `L` unit tubes `T`.
/// A packet is `W = 1_T(x) e(c_i x)` for a slot `(T, i)`; every interval
/// holds either exactly `N` packets or none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketFamily {
    pub l: usize,
    pub multiplicity: usize,
    /// Per interval: `(tube index within the interval, cap index, amplitude)`.
    pub taus: Vec<Vec<(usize, usize, Complex64)>>,
}

impl PacketFamily {
    /// `taus` intervals, about half of them (at least one) active, each
    /// active one with `n` distinct random slots and random unimodular
    /// amplitudes.
    pub fn random(l: usize, n: usize, taus: usize, seed: u64) -> Result<Self> {
        if l == 0 || n == 0 || n > l * l || taus == 0 {
            return Err(Error::Precondition(format!("need 1 <= N <= L^2 (L = {l}, N = {n}) and at least one interval")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let forced = rng.gen_range(0..taus);
        let mut slots: Vec<usize> = (0..l * l).collect();
        let taus = (0..taus)
            .map(|t| {
                if t != forced && rng.gen_bool(0.5) {
                    return Vec::new();
                }
                slots.shuffle(&mut rng);
                let mut chosen: Vec<usize> = slots[..n].to_vec();
                chosen.sort_unstable();
                chosen.into_iter().map(|s| (s / l, s % l, e(rng.gen::<f64>()))).collect()
            })
            .collect();
        Ok(Self { l, multiplicity: n, taus })
    }

    /// Every interval holds `N` distinct in-range slots or none.
    pub fn validate(&self) -> Result<()> {
        let l = self.l;
        for (k, tau) in self.taus.iter().enumerate() {
            if !tau.is_empty() && tau.len() != self.multiplicity {
                return Err(Error::Precondition(format!(
                    "interval {k} holds {} packets, expected {} or 0",
                    tau.len(),
                    self.multiplicity
                )));
            }
            let mut seen: Vec<(usize, usize)> = tau.iter().map(|s| (s.0, s.1)).collect();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != tau.len() || seen.iter().any(|&(t, i)| t >= l || i >= l) {
                return Err(Error::Precondition(format!("interval {k} has repeated or out-of-range slots")));
            }
        }
        if self.taus.iter().all(Vec::is_empty) {
            return Err(Error::Degenerate("no packets".into()));
        }
        Ok(())
    }
}

/// Left side `||sum_T w_T W_T||_p` and right side
/// `(L^2/N)^{1/2 - 1/p} (sum_i ||P_i F||_p^p)^{1/p}`.
///
/// On each unit tube the function is a trigonometric polynomial of degree
/// below 1, integrated by 4 panels of 16-point Gauss–Legendre; `P_i F` is
/// a sum of unimodular packets on disjoint tubes, so `||P_i F||_p^p` is the
/// number of packets of cap `i`.
pub fn refined_flat_gain(family: &PacketFamily, p: f64) -> Result<(f64, f64)> {
    family.validate()?;
    if !(p >= 2.0 && p.is_finite()) {
        return Err(Error::Precondition(format!("p = {p} must be >= 2")));
    }
    let l = family.l;
    let (nodes, weights) = gauss_legendre(16);
    const PANELS: usize = 4;
    let mut lhs = KahanSum::new();
    let mut packets = 0usize;
    for (k, tau) in family.taus.iter().enumerate() {
        for t in 0..l {
            let here: Vec<(f64, Complex64)> = tau
                .iter()
                .filter(|s| s.0 == t)
                .map(|s| ((s.1 as f64 + 0.5) / l as f64, s.2))
                .collect();
            if here.is_empty() {
                continue;
            }
            packets += here.len();
            let x0 = (k * l + t) as f64;
            for panel in 0..PANELS {
                let a = x0 + panel as f64 / PANELS as f64;
                let h = 0.5 / PANELS as f64;
                for (z, w) in nodes.iter().zip(&weights) {
                    let x = a + h * (z + 1.0);
                    let v: Complex64 = here.iter().map(|(c, amp)| amp * e((c * x).rem_euclid(1.0))).sum();
                    lhs.add(w * h * v.norm().powf(p));
                }
            }
        }
    }
    let factor = ((l * l) as f64 / family.multiplicity as f64).powf(0.5 - 1.0 / p);
    Ok((lhs.value().powf(1.0 / p), factor * (packets as f64).powf(1.0 / p)))
}
